//! The scheduled policy: every arrival triggers a reschedule over the
//! platoons that can still be revised, and each platoon drives a
//! closed-form plan that hits its merge slot exactly.
//!
//! Replanning always stretches: a platoon's slot never moves earlier, so
//! a revised plan continues from the platoon's current state. When the
//! linear-control stretch would leave the admissible control or speed
//! band, the planner falls back to the bound-respecting delay profile;
//! if that profile cannot reach the speed limit inside the control zone,
//! the platoon crosses the merging zone slower and its occupancy is
//! recomputed from the realized entry speed, keeping slots conflict-free.
//!
//! Platoons already in the merging zone, or committed to reach it within
//! the commit horizon, keep their slots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scheduler::{self, MergeSlot};
use crate::simulator::{
    check_exclusivity, generate_arrivals, occupancy, steps_for, vehicle_state, EventKind,
    PlanHistory, RunLog, SimEvent, TrajectorySample,
};
use crate::trajectory::{
    append_merge_cruise, bounded_delay_plan, bounded_delay_segments, time_optimal_plan,
    TrajectoryPlan, BOUNDARY_EPS, CRAWL_FLOOR,
};
use crate::types::{Platoon, ScenarioConfig, VehicleState};

struct Active {
    platoon: Platoon,
    ratio: f64,
    t_in: f64,
    slot: MergeSlot,
    plans: PlanHistory,
    merge_entered: bool,
    merge_released: bool,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    active: Vec<Active>,
    /// Final slot assignment per platoon, kept for the run log.
    slots: std::collections::BTreeMap<u32, MergeSlot>,
    /// Leave time of the latest platoon that has fully left the model.
    retired_last_leave: f64,
    /// A platoon keeps its slot unless it can still absorb at least this
    /// much extra delay from its current state: one insertion ahead of it
    /// can displace it by up to the largest occupancy.
    slack_margin: f64,
    /// Slots within this horizon of the clock are committed outright,
    /// keeping the near-term schedule stable while arrivals churn.
    commit_horizon: f64,
    events: Vec<SimEvent>,
    samples: Vec<TrajectorySample>,
}

enum Candidate {
    Existing(usize),
    Newcomer,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let g = &cfg.geometry;
        let max_size = cfg
            .highway_platoon_size_range
            .max
            .max(cfg.ramp_platoon_size_range.max);
        let max_occupancy = g.merging_zone_length / g.v_max
            + (max_size as f64 - 1.0) * cfg.headway
            + cfg.safe_time_gap;
        Sim {
            cfg,
            active: Vec::new(),
            slots: std::collections::BTreeMap::new(),
            retired_last_leave: 0.0,
            slack_margin: max_occupancy + 2.0,
            commit_horizon: g.control_zone_length / g.v_max,
            events: Vec::new(),
            samples: Vec::new(),
        }
    }

    /// Latest merge-entry time still reachable from the platoon's current
    /// state: brake to the crawl floor and creep the remaining runway.
    fn latest_reachable_entry(&self, state: &VehicleState, now: f64) -> f64 {
        let g = &self.cfg.geometry;
        let floor = g.v_min.max(CRAWL_FLOOR).min(state.speed);
        if floor <= 0.0 || state.position >= g.control_zone_length {
            return now;
        }
        let brake = -g.u_min;
        let d_brake = (state.speed * state.speed - floor * floor) / (2.0 * brake);
        let run = g.control_zone_length - state.position - d_brake;
        if run <= 0.0 {
            return now;
        }
        now + (state.speed - floor) / brake + run / floor
    }

    /// Plans a newly admitted platoon against its slot: the time-optimal
    /// crossing when unobstructed, otherwise the delay-absorbing ladder
    /// (free-terminal-speed control first).
    fn plan_newcomer(&self, platoon: &Platoon, release: f64, t_m: f64) -> Result<TrajectoryPlan> {
        let g = &self.cfg.geometry;
        if (t_m - release).abs() <= BOUNDARY_EPS {
            return time_optimal_plan(platoon.initial_speed, g, platoon.arrival_time);
        }
        bounded_delay_plan(platoon.initial_speed, g, platoon.arrival_time, t_m, platoon.id)
    }

    /// Stretches an in-flight platoon's plan to a later slot, continuing
    /// from its current state.
    fn replan_existing(&mut self, idx: usize, now: f64, t_m: f64) -> Result<()> {
        let g = self.cfg.geometry;
        let state = self.active[idx].plans.sample(now);
        let (segments, kind) = bounded_delay_segments(
            now,
            state.position,
            state.speed,
            t_m,
            g.control_zone_length,
            &g,
            self.active[idx].platoon.id,
        )?;
        let mut plan = TrajectoryPlan {
            kind,
            segments,
            t0: now,
            tm: t_m,
        };
        let entry_speed = plan.merge_entry_speed();
        let platoon = &self.active[idx].platoon;
        let t_l = t_m
            + occupancy(
                entry_speed,
                platoon.size,
                platoon.headway,
                self.cfg.safe_time_gap,
                &g,
            );
        append_merge_cruise(&mut plan, &g, t_l);
        self.active[idx].plans.push(now, plan);
        self.active[idx].slot = MergeSlot { t_m, t_l };
        self.slots
            .insert(self.active[idx].platoon.id, MergeSlot { t_m, t_l });
        Ok(())
    }

    /// Admits one platoon at its exact arrival time: rebuilds the
    /// schedule over the newcomer and every still-revisable platoon, then
    /// regenerates the plans whose slots moved.
    ///
    /// If a displacement cascade overruns some platoon's remaining slack,
    /// that platoon is pinned to its current slot and the rebuild is
    /// retried; re-planning at the same instant always continues from the
    /// same state, so abandoned attempts leave no trace in the dynamics.
    fn admit(&mut self, platoon: Platoon, now: f64) -> Result<()> {
        let g = &self.cfg.geometry;
        let timing = scheduler::platoon_timing(&platoon, g, self.cfg.safe_time_gap)?;
        let mut forced: std::collections::BTreeSet<u32> = std::collections::BTreeSet::new();

        'retry: for _ in 0..=self.active.len() + 1 {
            // A platoon is committed once it is in the zone, about to
            // enter, pinned by an earlier failed attempt, or too short on
            // slack to absorb another displacement. Committed slots are
            // closed into a prefix of the slot order so revisable
            // platoons are only displaced by bounded insertions.
            let mut commit_until = f64::NEG_INFINITY;
            for a in &self.active {
                let committed = a.merge_entered
                    || a.slot.t_m <= now + self.commit_horizon
                    || forced.contains(&a.platoon.id)
                    || {
                        let state = a.plans.sample(now);
                        self.latest_reachable_entry(&state, now)
                            < a.slot.t_m + self.slack_margin
                    };
                if committed {
                    commit_until = commit_until.max(a.slot.t_m);
                }
            }
            let mut base_leave = self.retired_last_leave;
            let mut candidates: Vec<(f64, crate::types::Origin, u32, Candidate)> = Vec::new();
            for (i, a) in self.active.iter().enumerate() {
                if a.slot.t_m <= commit_until {
                    base_leave = base_leave.max(a.slot.t_l);
                } else {
                    candidates.push((
                        a.ratio,
                        a.platoon.origin,
                        a.platoon.id,
                        Candidate::Existing(i),
                    ));
                }
            }
            candidates.push((timing.ratio, platoon.origin, platoon.id, Candidate::Newcomer));
            candidates.sort_by(|a, b| scheduler::sequence_order((a.0, a.1, a.2), (b.0, b.1, b.2)));

            let mut newcomer: Option<Active> = None;
            let mut prev_leave = base_leave;
            for (_, _, _, candidate) in candidates {
                match candidate {
                    Candidate::Existing(idx) => {
                        let release =
                            self.active[idx].platoon.arrival_time + self.active[idx].t_in;
                        let t_m = release.max(prev_leave);
                        if (t_m - self.active[idx].slot.t_m).abs() > 1e-9 {
                            match self.replan_existing(idx, now, t_m) {
                                Ok(()) => {}
                                Err(Error::InfeasibleDelay { .. }) => {
                                    forced.insert(self.active[idx].platoon.id);
                                    continue 'retry;
                                }
                                Err(e) => return Err(e),
                            }
                        }
                        prev_leave = self.active[idx].slot.t_l;
                    }
                    Candidate::Newcomer => {
                        let release = platoon.arrival_time + timing.t_in;
                        let t_m = release.max(prev_leave);
                        let mut plan = self.plan_newcomer(&platoon, release, t_m)?;
                        let t_l = t_m
                            + occupancy(
                                plan.merge_entry_speed(),
                                platoon.size,
                                platoon.headway,
                                self.cfg.safe_time_gap,
                                g,
                            );
                        append_merge_cruise(&mut plan, g, t_l);
                        prev_leave = t_l;
                        newcomer = Some(Active {
                            ratio: timing.ratio,
                            t_in: timing.t_in,
                            slot: MergeSlot { t_m, t_l },
                            plans: PlanHistory::new(plan),
                            merge_entered: false,
                            merge_released: false,
                            platoon: platoon.clone(),
                        });
                    }
                }
            }
            let newcomer = newcomer.expect("newcomer was among the candidates");
            self.slots.insert(newcomer.platoon.id, newcomer.slot);
            self.events.push(SimEvent {
                time: now,
                kind: EventKind::Reschedule,
                platoon_id: newcomer.platoon.id,
            });
            self.active.push(newcomer);
            return Ok(());
        }
        Err(Error::InvalidScenario(format!(
            "rescheduling did not converge at t={now:.3}"
        )))
    }

    fn step(&mut self, clock: f64) -> Result<()> {
        let g = &self.cfg.geometry;
        let mut occupants = Vec::new();
        for a in self.active.iter_mut() {
            for i in 0..a.platoon.size {
                let st = vehicle_state(&a.plans, &a.platoon, i, clock);
                occupants.push((a.platoon.id, st.position));
                self.samples.push(TrajectorySample {
                    time: clock,
                    platoon_id: a.platoon.id,
                    vehicle_index: i,
                    position: st.position,
                    speed: st.speed,
                    accel: st.accel,
                });
            }
            if !a.merge_entered {
                let leader = a.plans.sample(clock);
                if leader.position >= g.control_zone_length {
                    a.merge_entered = true;
                    self.events.push(SimEvent {
                        time: clock,
                        kind: EventKind::MergeEntry,
                        platoon_id: a.platoon.id,
                    });
                }
            }
            if a.merge_entered && !a.merge_released && clock >= a.slot.t_l {
                a.merge_released = true;
                self.events.push(SimEvent {
                    time: clock,
                    kind: EventKind::MergeExit,
                    platoon_id: a.platoon.id,
                });
            }
        }
        check_exclusivity(&occupants, g, clock)?;

        let exit_position = g.exit_position();
        let mut latest_leave = self.retired_last_leave;
        self.active.retain(|a| {
            let tail = vehicle_state(&a.plans, &a.platoon, a.platoon.size - 1, clock);
            let gone = a.merge_released && tail.position > exit_position;
            if gone {
                latest_leave = latest_leave.max(a.slot.t_l);
            }
            !gone
        });
        self.retired_last_leave = latest_leave;
        Ok(())
    }
}

/// Runs the scheduled policy on a scenario and returns its event and
/// trajectory logs. Aborts with a diagnostic if any plan is infeasible or
/// the merging-zone exclusivity invariant breaks.
pub fn run_proposed(cfg: &ScenarioConfig) -> Result<RunLog> {
    let report = crate::types::validate_scenario(cfg);
    if !report.is_valid() {
        return Err(Error::InvalidScenario(report.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let arrivals = generate_arrivals(cfg, &mut rng)?;
    run_proposed_with_arrivals(cfg, arrivals)
}

/// Same as [`run_proposed`] but over a fixed arrival list.
pub fn run_proposed_with_arrivals(
    cfg: &ScenarioConfig,
    arrivals: Vec<Platoon>,
) -> Result<RunLog> {
    let mut sim = Sim::new(cfg);
    let mut next = 0usize;
    let max_steps = steps_for(cfg);
    for step in 0..=max_steps {
        let clock = step as f64 * cfg.time_step;
        while next < arrivals.len() && arrivals[next].arrival_time <= clock {
            let platoon = arrivals[next].clone();
            next += 1;
            sim.events.push(SimEvent {
                time: platoon.arrival_time,
                kind: EventKind::PlatoonArrival,
                platoon_id: platoon.id,
            });
            let now = platoon.arrival_time;
            sim.admit(platoon, now)?;
        }
        sim.step(clock)?;
        if next >= arrivals.len() && sim.active.is_empty() {
            break;
        }
    }
    if !sim.active.is_empty() {
        return Err(Error::InvalidScenario(
            "simulation failed to drain within the drain limit".to_string(),
        ));
    }
    Ok(RunLog {
        events: sim.events,
        samples: sim.samples,
        platoons: arrivals,
        slots: sim.slots,
    })
}
