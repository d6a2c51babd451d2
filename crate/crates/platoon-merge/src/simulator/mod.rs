//! Discrete-time microsimulation of platoon arrivals through the control
//! and merging zones under two policies: the scheduled pipeline
//! ([`run_proposed`]) and a stop-and-yield baseline ([`run_baseline`]).
//!
//! Both policies share the arrival process, the event/trajectory logs,
//! and the merging-zone exclusivity check. Each run is single-threaded
//! and fully determined by the scenario (including its seed); arrival
//! generation stops at `sim_duration` and the simulation drains until
//! every admitted platoon has cleared the merging zone, so logs are never
//! truncated.

mod arrivals;
mod baseline;
mod proposed;

pub use arrivals::generate_arrivals;
pub use baseline::run_baseline;
pub use proposed::run_proposed;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scheduler::MergeSlot;
use crate::trajectory::TrajectoryPlan;
use crate::types::{Platoon, RoadGeometry, ScenarioConfig, VehicleState};

/// Fraction of the speed limit used as the lower bound of the arrival
/// speed draw.
pub const ARRIVAL_SPEED_FRACTION: f64 = 0.8;

/// Virtual standstill footprint of a queued platoon, meters. Only used to
/// place stopped platoons behind each other at the baseline stop line.
pub(crate) const QUEUE_SPACING: f64 = 10.0;

/// How far upstream of the merging-zone boundary the baseline stop line
/// sits, meters.
pub(crate) const STOP_LINE_SETBACK: f64 = 2.0;

/// Hard cap on simulated drain time past the arrival window, seconds.
pub(crate) const DRAIN_LIMIT: f64 = 3600.0;

/// What happened, when, to which platoon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    PlatoonArrival,
    MergeEntry,
    MergeExit,
    Reschedule,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::PlatoonArrival => "platoon_arrival",
            EventKind::MergeEntry => "merge_entry",
            EventKind::MergeExit => "merge_exit",
            EventKind::Reschedule => "reschedule",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub platoon_id: u32,
}

/// One row of the per-vehicle trajectory log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub platoon_id: u32,
    pub vehicle_index: u32,
    pub position: f64,
    pub speed: f64,
    pub accel: f64,
}

/// Full output of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub events: Vec<SimEvent>,
    pub samples: Vec<TrajectorySample>,
    /// Every platoon admitted during the run, in arrival (id) order.
    pub platoons: Vec<Platoon>,
    /// Final merging-zone slot of every platoon that received one.
    pub slots: BTreeMap<u32, MergeSlot>,
}

impl RunLog {
    /// Event log as CSV: `time,kind,platoon_id`.
    pub fn events_to_csv(&self) -> String {
        let mut out = String::from("time,kind,platoon_id\n");
        for e in &self.events {
            out.push_str(&format!("{:.6},{},{}\n", e.time, e.kind.as_str(), e.platoon_id));
        }
        out
    }

    /// Trajectory log as CSV:
    /// `time,platoon_id,vehicle_index,position,speed,accel`.
    pub fn samples_to_csv(&self) -> String {
        let mut out = String::from("time,platoon_id,vehicle_index,position,speed,accel\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:.6},{},{},{:.6},{:.6},{:.6}\n",
                s.time, s.platoon_id, s.vehicle_index, s.position, s.speed, s.accel
            ));
        }
        out
    }
}

/// A platoon's leader trajectory as a sequence of immutable plan pieces.
/// Replanning pushes a new piece valid from the replanning instant; past
/// pieces keep serving follower replay and log queries.
#[derive(Debug, Clone)]
pub(crate) struct PlanHistory {
    pieces: Vec<(f64, TrajectoryPlan)>,
}

impl PlanHistory {
    pub fn new(initial: TrajectoryPlan) -> Self {
        let from = initial.t0;
        PlanHistory {
            pieces: vec![(from, initial)],
        }
    }

    pub fn push(&mut self, valid_from: f64, plan: TrajectoryPlan) {
        debug_assert!(valid_from >= self.pieces.last().unwrap().0);
        self.pieces.push((valid_from, plan));
    }

    /// Leader state at `t`, routed to the piece that was active then.
    pub fn sample(&self, t: f64) -> VehicleState {
        let mut active = &self.pieces[0].1;
        for (from, plan) in &self.pieces {
            if *from <= t {
                active = plan;
            } else {
                break;
            }
        }
        active.sample(t)
    }
}

/// State of follower `index` of a platoon whose leader follows `history`:
/// followers replay the leader plan delayed by their cumulative headway.
pub(crate) fn vehicle_state(
    history: &PlanHistory,
    platoon: &Platoon,
    index: u32,
    t: f64,
) -> VehicleState {
    history.sample(t - index as f64 * platoon.headway)
}

/// Scans one step's vehicle positions and errors if two platoons occupy
/// the merging zone at once.
pub(crate) fn check_exclusivity(
    occupants: &[(u32, f64)],
    geometry: &RoadGeometry,
    clock: f64,
) -> Result<()> {
    let mut holder: Option<u32> = None;
    for (id, position) in occupants {
        if *position >= geometry.control_zone_length
            && *position < geometry.exit_position()
        {
            match holder {
                None => holder = Some(*id),
                Some(other) if other != *id => {
                    return Err(Error::InvalidScenario(format!(
                        "merging-zone exclusivity violated at t={clock:.3}: platoons {other} and {id}",
                    )));
                }
                _ => {}
            }
        }
    }
    Ok(())
}

/// Crossing duration of the merging zone entered at `entry_speed`,
/// accelerating at u_max and capped at v_max.
pub(crate) fn merge_crossing_time(entry_speed: f64, geometry: &RoadGeometry) -> f64 {
    crate::trajectory::fastest_crossing(entry_speed, geometry.merging_zone_length, geometry)
}

/// Generalized occupancy under the scheduled policy: the zone is crossed
/// at the realized entry speed, plus one headway per follower and the
/// safe time gap.
pub(crate) fn occupancy(
    entry_speed: f64,
    size: u32,
    headway: f64,
    safe_time_gap: f64,
    geometry: &RoadGeometry,
) -> f64 {
    crate::trajectory::scheduled_zone_crossing(entry_speed, geometry)
        + (size as f64 - 1.0) * headway
        + safe_time_gap
}

pub(crate) fn steps_for(cfg: &ScenarioConfig) -> usize {
    ((cfg.sim_duration + DRAIN_LIMIT) / cfg.time_step).ceil() as usize
}
