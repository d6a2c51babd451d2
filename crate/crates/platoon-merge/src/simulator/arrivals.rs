//! Stochastic platoon arrival generation.
//!
//! Arrivals on each road are Poisson over platoons with the rate chosen
//! so expected vehicle throughput matches the configured volume given the
//! mean platoon size. Consecutive same-road arrivals are then spaced far
//! enough apart that two unobstructed platoons on one lane can never
//! occupy the merging zone together; the spacing carries over rather than
//! resampling, so the long-run rate is preserved.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Uniform};

use crate::error::Result;
use crate::scheduler;
use crate::simulator::ARRIVAL_SPEED_FRACTION;
use crate::types::{Origin, Platoon, ScenarioConfig, SizeRange};

struct RoadDraw {
    origin: Origin,
    time: f64,
    size: u32,
    speed: f64,
}

fn draw_road(
    cfg: &ScenarioConfig,
    origin: Origin,
    volume_vph: f64,
    sizes: SizeRange,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<RoadDraw>> {
    let mut draws = Vec::new();
    let platoons_per_second = volume_vph / sizes.mean() / 3600.0;
    if platoons_per_second <= 0.0 {
        return Ok(draws);
    }
    let gap_dist = Exp::new(platoons_per_second).expect("positive rate");
    let size_dist = Uniform::new_inclusive(sizes.min, sizes.max);
    let speed_lo = (ARRIVAL_SPEED_FRACTION * cfg.geometry.v_max).max(cfg.geometry.v_min);
    let speed_dist = Uniform::new_inclusive(speed_lo, cfg.geometry.v_max);

    let mut demand_time = 0.0;
    let mut prev: Option<(f64, f64, f64)> = None; // (arrival, t_in, t_out)
    loop {
        demand_time += gap_dist.sample(rng);
        if demand_time > cfg.sim_duration {
            break;
        }
        let size = rng.sample(size_dist);
        let speed = rng.sample(speed_dist);
        let probe = Platoon::new(
            1,
            origin,
            1.0,
            size,
            cfg.headway,
            0.0,
            speed,
            &cfg.geometry,
        )?;
        let t_in = scheduler::entry_time(&probe, &cfg.geometry)?;
        let t_out = scheduler::exit_time(&probe, &cfg.geometry, cfg.safe_time_gap);
        // Earliest arrival keeping this platoon's unobstructed zone entry
        // after the predecessor's unobstructed zone exit.
        let arrival = match prev {
            None => demand_time,
            Some((prev_arrival, prev_t_in, prev_t_out)) => {
                demand_time.max(prev_arrival + prev_t_in + prev_t_out - t_in)
            }
        };
        if arrival > cfg.sim_duration {
            break;
        }
        prev = Some((arrival, t_in, t_out));
        draws.push(RoadDraw {
            origin,
            time: arrival,
            size,
            speed,
        });
    }
    Ok(draws)
}

/// Generates the platoon arrival list for a scenario. Deterministic for a
/// given generator state; ids are assigned in merged arrival order.
pub fn generate_arrivals(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Platoon>> {
    let mut draws = draw_road(
        cfg,
        Origin::Highway,
        cfg.highway_volume,
        cfg.highway_platoon_size_range,
        rng,
    )?;
    draws.extend(draw_road(
        cfg,
        Origin::Ramp,
        cfg.ramp_volume,
        cfg.ramp_platoon_size_range,
        rng,
    )?);
    draws.sort_by(|a, b| {
        a.time
            .partial_cmp(&b.time)
            .expect("arrival times are finite")
            .then_with(|| a.origin.cmp(&b.origin))
    });
    let mut platoons = Vec::with_capacity(draws.len());
    for (index, draw) in draws.iter().enumerate() {
        let weight = match draw.origin {
            Origin::Highway => cfg.highway_weight,
            Origin::Ramp => cfg.ramp_weight,
        };
        platoons.push(Platoon::new(
            index as u32 + 1,
            draw.origin,
            weight,
            draw.size,
            cfg.headway,
            draw.time,
            draw.speed,
            &cfg.geometry,
        )?);
    }
    Ok(platoons)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_volume_means_no_arrivals() {
        let mut cfg = ScenarioConfig::paper_experiment();
        cfg.highway_volume = 0.0;
        cfg.ramp_volume = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(generate_arrivals(&cfg, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn same_seed_reproduces_the_list() {
        let cfg = ScenarioConfig::paper_experiment();
        let a = generate_arrivals(&cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = generate_arrivals(&cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ids_follow_arrival_order() {
        let cfg = ScenarioConfig::paper_experiment();
        let platoons = generate_arrivals(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for pair in platoons.windows(2) {
            assert!(pair[0].arrival_time <= pair[1].arrival_time);
            assert_eq!(pair[0].id + 1, pair[1].id);
        }
    }

    #[test]
    fn same_road_spacing_keeps_unobstructed_crossings_disjoint() {
        let cfg = ScenarioConfig::paper_experiment();
        for seed in 0..20 {
            let platoons = generate_arrivals(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            for origin in [Origin::Highway, Origin::Ramp] {
                let road: Vec<&Platoon> =
                    platoons.iter().filter(|p| p.origin == origin).collect();
                for pair in road.windows(2) {
                    let lead_entry = pair[0].arrival_time
                        + scheduler::entry_time(pair[0], &cfg.geometry).unwrap();
                    let lead_exit = lead_entry
                        + scheduler::exit_time(pair[0], &cfg.geometry, cfg.safe_time_gap);
                    let next_entry = pair[1].arrival_time
                        + scheduler::entry_time(pair[1], &cfg.geometry).unwrap();
                    assert!(next_entry >= lead_exit - 1e-9);
                }
            }
        }
    }

    #[test]
    fn mean_platoon_count_matches_demand_algebra() {
        // 1060 vph at mean size 3 over 900 s: 1060/3 * 0.25 = 88.33
        // expected highway platoons. Check the empirical mean over many
        // seeds stays within 5%.
        let cfg = ScenarioConfig::paper_experiment();
        let mut total = 0usize;
        let seeds = 1000u64;
        for seed in 0..seeds {
            let platoons = generate_arrivals(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            total += platoons.iter().filter(|p| p.origin == Origin::Highway).count();
        }
        let mean = total as f64 / seeds as f64;
        let expected = 1060.0 / 3.0 * (900.0 / 3600.0);
        assert!(
            (mean - expected).abs() / expected < 0.05,
            "mean {mean} vs expected {expected}"
        );
    }

    #[test]
    fn speeds_stay_in_the_draw_band() {
        let cfg = ScenarioConfig::paper_experiment();
        let platoons = generate_arrivals(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert!(!platoons.is_empty());
        for p in &platoons {
            assert!(p.initial_speed >= 0.8 * cfg.geometry.v_max - 1e-12);
            assert!(p.initial_speed <= cfg.geometry.v_max + 1e-12);
        }
    }
}
