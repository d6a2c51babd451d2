//! Per-vehicle and aggregate performance measures from trajectory logs:
//! delay, stopped delay, stop counts, travel time, and a control-effort
//! fuel proxy (the half-integral of squared acceleration, labelled as a
//! proxy in all outputs).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulator::{RunLog, TrajectorySample};
use crate::trajectory::fastest_crossing;
use crate::types::ScenarioConfig;

/// Speeds below this count as stopped.
pub const STOP_SPEED: f64 = 0.1;

/// Aggregate measures of one run. All fields are per-vehicle averages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub vehicles: usize,
    /// Travel time minus free-flow time, s/vehicle.
    pub avg_delay: f64,
    /// Time at speeds below the stop threshold, s/vehicle.
    pub avg_stopped_delay: f64,
    /// Maximal below-threshold intervals, count/vehicle.
    pub avg_stops: f64,
    /// Control-zone entry to merging-zone exit, s/vehicle.
    pub avg_travel_time: f64,
    /// Half-integral of squared acceleration, (m/s^2)^2*s per vehicle.
    pub fuel_proxy: f64,
    pub per_platoon: Vec<PlatoonMetrics>,
}

/// The same measures averaged over one platoon's vehicles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlatoonMetrics {
    pub platoon_id: u32,
    pub vehicles: usize,
    pub avg_delay: f64,
    pub avg_stopped_delay: f64,
    pub avg_stops: f64,
    pub avg_travel_time: f64,
    pub fuel_proxy: f64,
}

#[derive(Debug, Clone, Copy)]
struct VehicleMeasures {
    delay: f64,
    stopped_delay: f64,
    stops: f64,
    travel_time: f64,
    fuel: f64,
}

impl RunMetrics {
    /// Flat aggregate CSV row (with header).
    pub fn to_csv(&self) -> String {
        format!(
            "vehicles,avg_delay,avg_stopped_delay,avg_stops,avg_travel_time,fuel_proxy\n{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            self.vehicles,
            self.avg_delay,
            self.avg_stopped_delay,
            self.avg_stops,
            self.avg_travel_time,
            self.fuel_proxy
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    /// Vehicle-weighted mean of several runs; per-platoon detail is not
    /// aggregated across seeds.
    pub fn mean_of(runs: &[RunMetrics]) -> RunMetrics {
        let vehicles: usize = runs.iter().map(|r| r.vehicles).sum();
        let total = vehicles.max(1) as f64;
        let weighted = |f: fn(&RunMetrics) -> f64| -> f64 {
            runs.iter().map(|r| f(r) * r.vehicles as f64).sum::<f64>() / total
        };
        RunMetrics {
            vehicles,
            avg_delay: weighted(|r| r.avg_delay),
            avg_stopped_delay: weighted(|r| r.avg_stopped_delay),
            avg_stops: weighted(|r| r.avg_stops),
            avg_travel_time: weighted(|r| r.avg_travel_time),
            fuel_proxy: weighted(|r| r.fuel_proxy),
            per_platoon: Vec::new(),
        }
    }
}

fn interpolate_crossing(before: &TrajectorySample, after: &TrajectorySample, position: f64) -> f64 {
    let span = after.position - before.position;
    if span <= 0.0 {
        return after.time;
    }
    before.time + (after.time - before.time) * (position - before.position) / span
}

/// Integral of u^2 over one sample interval. The endpoint controls and
/// the realized speed change identify the switch fraction when the
/// underlying control is piecewise constant, and reduce to the trapezoid
/// for linear control.
fn interval_effort(a: &TrajectorySample, b: &TrajectorySample) -> f64 {
    let dt = b.time - a.time;
    if dt <= 0.0 {
        return 0.0;
    }
    let (ua, ub) = (a.accel, b.accel);
    if (ua - ub).abs() < 1e-9 {
        return ua * ua * dt;
    }
    let mean = (b.speed - a.speed) / dt;
    let theta = ((mean - ub) / (ua - ub)).clamp(0.0, 1.0);
    dt * (theta * ua * ua + (1.0 - theta) * ub * ub)
}

fn measure_vehicle(
    samples: &[TrajectorySample],
    free_flow: f64,
    exit_position: f64,
    platoon_id: u32,
    vehicle: usize,
) -> Result<VehicleMeasures> {
    let entry_idx = samples
        .iter()
        .position(|s| s.position >= 0.0)
        .ok_or(Error::TruncatedLog {
            platoon: platoon_id,
            vehicle,
        })?;
    let entry_time = if entry_idx == 0 {
        let s = &samples[0];
        if s.speed > 0.0 {
            s.time - s.position / s.speed
        } else {
            s.time
        }
    } else {
        interpolate_crossing(&samples[entry_idx - 1], &samples[entry_idx], 0.0)
    };
    let exit_idx = samples
        .iter()
        .position(|s| s.position >= exit_position)
        .ok_or(Error::TruncatedLog {
            platoon: platoon_id,
            vehicle,
        })?;
    let exit_time = if exit_idx == 0 {
        samples[0].time
    } else {
        interpolate_crossing(&samples[exit_idx - 1], &samples[exit_idx], exit_position)
    };

    let travel_time = exit_time - entry_time;
    let delay = (travel_time - free_flow).max(0.0);

    let mut stopped_delay = 0.0;
    let mut stops = 0u32;
    let mut in_stop = false;
    let mut fuel = 0.0;
    for pair in samples[entry_idx..=exit_idx].windows(2) {
        let dt = pair[1].time - pair[0].time;
        if pair[0].speed < STOP_SPEED {
            stopped_delay += dt;
            if !in_stop {
                stops += 1;
                in_stop = true;
            }
        } else {
            in_stop = false;
        }
        fuel += interval_effort(&pair[0], &pair[1]);
    }
    Ok(VehicleMeasures {
        delay,
        stopped_delay,
        stops: stops as f64,
        travel_time,
        fuel: 0.5 * fuel,
    })
}

/// Computes run metrics from a trajectory log. Pure in the log contents:
/// row order within each vehicle is normalized by time before measuring.
/// Errors if any vehicle never exits the merging zone.
pub fn compute_metrics(log: &RunLog, cfg: &ScenarioConfig) -> Result<RunMetrics> {
    let g = &cfg.geometry;
    let exit_position = g.exit_position();
    let mut by_vehicle: BTreeMap<(u32, u32), Vec<TrajectorySample>> = BTreeMap::new();
    for s in &log.samples {
        by_vehicle
            .entry((s.platoon_id, s.vehicle_index))
            .or_default()
            .push(*s);
    }
    let free_flow: BTreeMap<u32, f64> = log
        .platoons
        .iter()
        .map(|p| {
            (
                p.id,
                fastest_crossing(p.initial_speed, g.control_zone_length, g)
                    + g.merging_zone_length / g.v_max,
            )
        })
        .collect();

    let mut per_platoon_acc: BTreeMap<u32, Vec<VehicleMeasures>> = BTreeMap::new();
    for ((platoon_id, vehicle), mut samples) in by_vehicle {
        samples.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite times"));
        let ff = *free_flow
            .get(&platoon_id)
            .ok_or(Error::NotScheduled(platoon_id))?;
        let m = measure_vehicle(&samples, ff, exit_position, platoon_id, vehicle as usize)?;
        per_platoon_acc.entry(platoon_id).or_default().push(m);
    }

    let mut per_platoon = Vec::new();
    let mut all: Vec<VehicleMeasures> = Vec::new();
    for (platoon_id, measures) in per_platoon_acc {
        let n = measures.len() as f64;
        per_platoon.push(PlatoonMetrics {
            platoon_id,
            vehicles: measures.len(),
            avg_delay: measures.iter().map(|m| m.delay).sum::<f64>() / n,
            avg_stopped_delay: measures.iter().map(|m| m.stopped_delay).sum::<f64>() / n,
            avg_stops: measures.iter().map(|m| m.stops).sum::<f64>() / n,
            avg_travel_time: measures.iter().map(|m| m.travel_time).sum::<f64>() / n,
            fuel_proxy: measures.iter().map(|m| m.fuel).sum::<f64>() / n,
        });
        all.extend(measures);
    }
    let n = all.len().max(1) as f64;
    Ok(RunMetrics {
        vehicles: all.len(),
        avg_delay: all.iter().map(|m| m.delay).sum::<f64>() / n,
        avg_stopped_delay: all.iter().map(|m| m.stopped_delay).sum::<f64>() / n,
        avg_stops: all.iter().map(|m| m.stops).sum::<f64>() / n,
        avg_travel_time: all.iter().map(|m| m.travel_time).sum::<f64>() / n,
        fuel_proxy: all.iter().map(|m| m.fuel).sum::<f64>() / n,
        per_platoon,
    })
}

/// One metric's side-by-side values; the reduction is undefined when the
/// baseline value is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricComparison {
    pub metric: String,
    pub baseline: f64,
    pub proposed: f64,
    pub reduction_pct: Option<f64>,
}

/// Percentage reductions of the proposed policy against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<MetricComparison>,
}

impl ComparisonReport {
    pub fn reduction(&self, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric)
            .and_then(|r| r.reduction_pct)
    }

    /// CSV with one row per metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,baseline,proposed,reduction_pct\n");
        for row in &self.rows {
            let pct = row
                .reduction_pct
                .map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
            out.push_str(&format!(
                "{},{:.6},{:.6},{}\n",
                row.metric, row.baseline, row.proposed, pct
            ));
        }
        out
    }
}

impl std::fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<20} {:>12} {:>12} {:>10}",
            "metric", "baseline", "proposed", "reduction"
        )?;
        for row in &self.rows {
            let pct = row
                .reduction_pct
                .map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}%"));
            writeln!(
                f,
                "{:<20} {:>12.3} {:>12.3} {:>10}",
                row.metric, row.baseline, row.proposed, pct
            )?;
        }
        Ok(())
    }
}

/// Compares two runs of the same scenario and seed family: percentage
/// reduction per metric, 100 * (baseline - proposed) / baseline.
pub fn compare_runs(proposed: &RunMetrics, baseline: &RunMetrics) -> ComparisonReport {
    let fields: [(&str, fn(&RunMetrics) -> f64); 5] = [
        ("avg_delay", |m| m.avg_delay),
        ("avg_stopped_delay", |m| m.avg_stopped_delay),
        ("avg_stops", |m| m.avg_stops),
        ("avg_travel_time", |m| m.avg_travel_time),
        ("fuel_proxy", |m| m.fuel_proxy),
    ];
    let rows = fields
        .iter()
        .map(|(name, get)| {
            let b = get(baseline);
            let p = get(proposed);
            MetricComparison {
                metric: name.to_string(),
                baseline: b,
                proposed: p,
                reduction_pct: (b != 0.0).then(|| 100.0 * (b - p) / b),
            }
        })
        .collect();
    ComparisonReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{RunLog, SimEvent, TrajectorySample};
    use crate::types::{Origin, Platoon};

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::paper_experiment()
    }

    fn synthetic_log(samples: Vec<TrajectorySample>, platoons: Vec<Platoon>) -> RunLog {
        RunLog {
            events: Vec::<SimEvent>::new(),
            samples,
            platoons,
            slots: Default::default(),
        }
    }

    fn cruise_samples(platoon_id: u32, v: f64, until_pos: f64, dt: f64) -> Vec<TrajectorySample> {
        let mut out = Vec::new();
        let mut t = 0.0;
        loop {
            let position = v * t;
            out.push(TrajectorySample {
                time: t,
                platoon_id,
                vehicle_index: 0,
                position,
                speed: v,
                accel: 0.0,
            });
            if position > until_pos {
                return out;
            }
            t += dt;
        }
    }

    #[test]
    fn unobstructed_cruise_has_zero_delay_and_fuel() {
        let c = cfg();
        let p = Platoon::new(1, Origin::Highway, 2.0, 1, 1.0, 0.0, 25.0, &c.geometry).unwrap();
        let log = synthetic_log(cruise_samples(1, 25.0, 181.0, 0.1), vec![p]);
        let m = compute_metrics(&log, &c).unwrap();
        assert_eq!(m.vehicles, 1);
        assert!(m.avg_delay < 1e-6, "delay {}", m.avg_delay);
        assert_eq!(m.avg_stops, 0.0);
        assert!(m.fuel_proxy < 1e-9);
        assert!((m.avg_travel_time - 7.2).abs() < 1e-3);
    }

    #[test]
    fn held_vehicle_reports_stop_and_stopped_delay() {
        // Creep to mid-zone, hold 5 s, then cruise out.
        let c = cfg();
        let p = Platoon::new(1, Origin::Ramp, 1.0, 1, 1.0, 0.0, 25.0, &c.geometry).unwrap();
        let mut samples = Vec::new();
        let dt = 0.1;
        let mut t: f64 = 0.0;
        let mut pos = 0.0;
        let speed_at = |time: f64| -> f64 {
            if time < 2.0 {
                25.0
            } else if time < 7.0 {
                0.0
            } else {
                25.0
            }
        };
        while pos <= 181.0 {
            let v = speed_at(t);
            samples.push(TrajectorySample {
                time: t,
                platoon_id: 1,
                vehicle_index: 0,
                position: pos,
                speed: v,
                accel: 0.0,
            });
            pos += v * dt;
            t += dt;
        }
        let log = synthetic_log(samples, vec![p]);
        let m = compute_metrics(&log, &c).unwrap();
        assert_eq!(m.avg_stops, 1.0);
        assert!((m.avg_stopped_delay - 5.0).abs() < 0.2);
        assert!(m.avg_delay >= m.avg_stopped_delay - 1e-9);
    }

    #[test]
    fn truncated_log_is_an_error() {
        let c = cfg();
        let p = Platoon::new(1, Origin::Highway, 2.0, 1, 1.0, 0.0, 25.0, &c.geometry).unwrap();
        let log = synthetic_log(cruise_samples(1, 25.0, 100.0, 0.1), vec![p]);
        assert!(matches!(
            compute_metrics(&log, &c),
            Err(Error::TruncatedLog { .. })
        ));
    }

    #[test]
    fn metrics_are_row_order_invariant() {
        let c = cfg();
        let p = Platoon::new(1, Origin::Highway, 2.0, 1, 1.0, 0.0, 25.0, &c.geometry).unwrap();
        let samples = cruise_samples(1, 25.0, 181.0, 0.1);
        let mut shuffled = samples.clone();
        shuffled.reverse();
        let a = compute_metrics(&synthetic_log(samples, vec![p.clone()]), &c).unwrap();
        let b = compute_metrics(&synthetic_log(shuffled, vec![p]), &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_fuel_matches_bang_phase_closed_form() {
        // Time-optimal plan from v0 = 20: fuel = u_max^2 * t_a / 2 = 7.5.
        let c = cfg();
        let p = Platoon::new(1, Origin::Highway, 2.0, 1, 1.0, 0.0, 20.0, &c.geometry).unwrap();
        let plan = crate::trajectory::time_optimal_plan(20.0, &c.geometry, 0.0).unwrap();
        let mut samples = Vec::new();
        let mut t = 0.0;
        loop {
            let st = plan.sample(t);
            samples.push(TrajectorySample {
                time: t,
                platoon_id: 1,
                vehicle_index: 0,
                position: st.position,
                speed: st.speed,
                accel: st.accel,
            });
            if st.position > 181.0 {
                break;
            }
            t += 0.1;
        }
        let log = synthetic_log(samples, vec![p]);
        let m = compute_metrics(&log, &c).unwrap();
        let exact = 0.5 * 9.0 * (5.0 / 3.0);
        assert!(
            (m.fuel_proxy - exact).abs() / exact < 0.01,
            "sampled {} vs exact {exact}",
            m.fuel_proxy
        );
    }

    #[test]
    fn comparison_handles_zero_baselines() {
        let zero = RunMetrics {
            vehicles: 1,
            avg_delay: 0.0,
            avg_stopped_delay: 0.0,
            avg_stops: 0.0,
            avg_travel_time: 10.0,
            fuel_proxy: 0.0,
            per_platoon: Vec::new(),
        };
        let report = compare_runs(&zero, &zero);
        assert_eq!(report.reduction("fuel_proxy"), None);
        assert_eq!(report.reduction("avg_travel_time"), Some(0.0));
        let csv = report.to_csv();
        assert!(csv.contains("n/a"));
    }

    #[test]
    fn headline_reduction_example() {
        let baseline = RunMetrics {
            vehicles: 1,
            avg_delay: 12.0,
            avg_stopped_delay: 5.0,
            avg_stops: 1.0,
            avg_travel_time: 20.0,
            fuel_proxy: 50.0,
            per_platoon: Vec::new(),
        };
        let proposed = RunMetrics {
            vehicles: 1,
            avg_delay: 0.5,
            avg_stopped_delay: 0.0,
            avg_stops: 0.0,
            avg_travel_time: 6.4,
            fuel_proxy: 10.0,
            per_platoon: Vec::new(),
        };
        let report = compare_runs(&proposed, &baseline);
        assert!((report.reduction("avg_travel_time").unwrap() - 68.0).abs() < 1e-9);
    }
}
