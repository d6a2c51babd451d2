//! Merge scheduling: entry/exit durations, completion times, the
//! weighted-completion-time sequence, and conflict-free slot assignment.
//!
//! The merging zone is treated as a single machine and platoons as jobs.
//! A platoon's completion time is its travel duration to the merging zone
//! plus its occupancy duration; platoons are sequenced by non-decreasing
//! completion time over weight and then chained so occupancy intervals
//! never overlap.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{Origin, Platoon, RoadGeometry};

/// Per-platoon durations and the sequencing ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatoonTiming {
    pub platoon_id: u32,
    /// Travel duration from control-zone entry to merging-zone entry at
    /// the earliest physically possible arrival, seconds.
    pub t_in: f64,
    /// Merging-zone occupancy duration, seconds.
    pub t_out: f64,
    /// Completion time t_in + t_out, seconds.
    pub t_c: f64,
    /// Sequencing key t_c / weight.
    pub ratio: f64,
}

/// Absolute merge-entry and merge-leave times of one scheduled platoon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeSlot {
    /// Absolute merging-zone entry time, seconds.
    pub t_m: f64,
    /// Absolute merging-zone leave time, seconds.
    pub t_l: f64,
}

/// A conflict-free schedule: the chosen sequence and each platoon's slot.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeSchedule {
    /// Platoon ids in merge order.
    pub sequence: Vec<u32>,
    pub entries: BTreeMap<u32, MergeSlot>,
}

impl MergeSchedule {
    pub fn slot(&self, platoon_id: u32) -> Option<MergeSlot> {
        self.entries.get(&platoon_id).copied()
    }
}

/// Travel duration from control-zone entry to the merging zone when the
/// platoon accelerates to the speed limit as early as possible.
///
/// A platoon already at the limit covers the control zone at v_max; a
/// slower platoon accelerates at u_max to v_max and cruises the rest.
pub fn entry_time(platoon: &Platoon, geometry: &RoadGeometry) -> Result<f64> {
    let v0 = platoon.initial_speed;
    let v_max = geometry.v_max;
    if v0 > v_max {
        return Err(Error::SpeedAboveLimit {
            speed: v0,
            v_max,
        });
    }
    if v0 == v_max {
        Ok(geometry.control_zone_length / v_max)
    } else {
        let t_a = (v_max - v0) / geometry.u_max;
        let d_a = (v_max * v_max - v0 * v0) / (2.0 * geometry.u_max);
        Ok(t_a + (geometry.control_zone_length - d_a) / v_max)
    }
}

/// Merging-zone occupancy duration: zone crossing at v_max, one headway
/// per follower, and the safe time gap.
pub fn exit_time(platoon: &Platoon, geometry: &RoadGeometry, safe_time_gap: f64) -> f64 {
    geometry.merging_zone_length / geometry.v_max
        + (platoon.size as f64 - 1.0) * platoon.headway
        + safe_time_gap
}

/// Sequencing ratio: completion time over weight.
pub fn completion_ratio(timing: &PlatoonTiming, weight: f64) -> Result<f64> {
    if !(weight > 0.0) {
        return Err(Error::NonPositiveWeight(weight));
    }
    Ok(timing.t_c / weight)
}

/// Computes the full timing record for one platoon.
pub fn platoon_timing(
    platoon: &Platoon,
    geometry: &RoadGeometry,
    safe_time_gap: f64,
) -> Result<PlatoonTiming> {
    let t_in = entry_time(platoon, geometry)?;
    let t_out = exit_time(platoon, geometry, safe_time_gap);
    let t_c = t_in + t_out;
    Ok(PlatoonTiming {
        platoon_id: platoon.id,
        t_in,
        t_out,
        t_c,
        ratio: t_c / platoon.weight,
    })
}

/// Ordering used everywhere a sequence is chosen: non-decreasing ratio,
/// highway before ramp on ties, then lower id.
pub(crate) fn sequence_order(
    a: (f64, Origin, u32),
    b: (f64, Origin, u32),
) -> Ordering {
    a.0.partial_cmp(&b.0)
        .expect("ratios are finite")
        .then_with(|| a.1.cmp(&b.1))
        .then_with(|| a.2.cmp(&b.2))
}

/// Chains slots for platoons taken in the given order: each platoon merges
/// at the later of its earliest possible arrival and its predecessor's
/// leave time.
pub fn schedule_in_order(
    ordered: &[(PlatoonTiming, Origin)],
    now: f64,
    t_last_leave: f64,
) -> MergeSchedule {
    let mut sequence = Vec::with_capacity(ordered.len());
    let mut entries = BTreeMap::new();
    let mut prev_leave = t_last_leave;
    for (timing, _) in ordered {
        let t_m = (now + timing.t_in).max(prev_leave);
        let t_l = t_m + timing.t_out;
        sequence.push(timing.platoon_id);
        entries.insert(timing.platoon_id, MergeSlot { t_m, t_l });
        prev_leave = t_l;
    }
    MergeSchedule { sequence, entries }
}

/// Computes the optimal sequence and schedule for a batch of platoons.
///
/// `now` is the scheduling instant; `t_last_leave` is the leave time of
/// the last platoon committed before this batch (0 if none).
pub fn build_schedule(
    platoons: &[Platoon],
    geometry: &RoadGeometry,
    safe_time_gap: f64,
    now: f64,
    t_last_leave: f64,
) -> Result<MergeSchedule> {
    if platoons.is_empty() {
        return Err(Error::NoPlatoons);
    }
    let mut ordered = Vec::with_capacity(platoons.len());
    for p in platoons {
        ordered.push((platoon_timing(p, geometry, safe_time_gap)?, p.origin));
    }
    ordered.sort_by(|a, b| {
        sequence_order(
            (a.0.ratio, a.1, a.0.platoon_id),
            (b.0.ratio, b.1, b.0.platoon_id),
        )
    });
    Ok(schedule_in_order(&ordered, now, t_last_leave))
}

/// Total weighted completion time of a schedule: the weighted sum of
/// realized leave times measured from `now`, accumulated in sequence
/// order.
pub fn total_weighted_completion(
    schedule: &MergeSchedule,
    platoons: &[Platoon],
    now: f64,
) -> Result<f64> {
    let weights: BTreeMap<u32, f64> = platoons.iter().map(|p| (p.id, p.weight)).collect();
    let mut total = 0.0;
    for id in &schedule.sequence {
        let slot = schedule.slot(*id).ok_or(Error::NotScheduled(*id))?;
        let weight = weights.get(id).ok_or(Error::NotScheduled(*id))?;
        total += weight * (slot.t_l - now);
    }
    Ok(total)
}

/// Exhaustive search over every merge order, using the same chaining as
/// [`build_schedule`]. Returns the minimizing sequence and its total
/// weighted completion time; ties keep the lexicographically first
/// sequence. Limited to 9 platoons.
pub fn brute_force_best_sequence(
    platoons: &[Platoon],
    geometry: &RoadGeometry,
    safe_time_gap: f64,
    now: f64,
    t_last_leave: f64,
) -> Result<(Vec<u32>, f64)> {
    if platoons.is_empty() {
        return Err(Error::NoPlatoons);
    }
    if platoons.len() > 9 {
        return Err(Error::TooManyPlatoons(platoons.len()));
    }
    let mut items = Vec::with_capacity(platoons.len());
    for p in platoons {
        items.push((platoon_timing(p, geometry, safe_time_gap)?, p.origin, p.weight));
    }
    items.sort_by_key(|(t, _, _)| t.platoon_id);

    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut best: Option<(Vec<u32>, f64)> = None;
    loop {
        let mut prev_leave = t_last_leave;
        let mut total = 0.0;
        for &i in &order {
            let timing = &items[i].0;
            let t_m = (now + timing.t_in).max(prev_leave);
            let t_l = t_m + timing.t_out;
            total += items[i].2 * (t_l - now);
            prev_leave = t_l;
        }
        if best.as_ref().map_or(true, |(_, t)| total < *t) {
            let sequence = order.iter().map(|&i| items[i].0.platoon_id).collect();
            best = Some((sequence, total));
        }
        if !next_permutation(&mut order) {
            break;
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// Advances `order` to the next lexicographic permutation; false once the
/// last permutation has been visited.
fn next_permutation(order: &mut [usize]) -> bool {
    if order.len() < 2 {
        return false;
    }
    let mut i = order.len() - 1;
    while i > 0 && order[i - 1] >= order[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = order.len() - 1;
    while order[j] <= order[i - 1] {
        j -= 1;
    }
    order.swap(i - 1, j);
    order[i..].reverse();
    true
}

/// Renders a schedule as CSV with one row per platoon in sequence order.
pub fn schedule_to_csv(
    schedule: &MergeSchedule,
    platoons: &[Platoon],
    geometry: &RoadGeometry,
    safe_time_gap: f64,
) -> Result<String> {
    let index: BTreeMap<u32, &Platoon> = platoons.iter().map(|p| (p.id, p)).collect();
    let mut out = String::from(
        "platoon_id,origin,weight,t_in,t_out,t_c,ratio,t_m,t_l,sequence_position\n",
    );
    for (pos, id) in schedule.sequence.iter().enumerate() {
        let platoon = index.get(id).ok_or(Error::NotScheduled(*id))?;
        let timing = platoon_timing(platoon, geometry, safe_time_gap)?;
        let slot = schedule.slot(*id).ok_or(Error::NotScheduled(*id))?;
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            id,
            platoon.origin,
            platoon.weight,
            timing.t_in,
            timing.t_out,
            timing.t_c,
            timing.ratio,
            slot.t_m,
            slot.t_l,
            pos + 1,
        ));
    }
    Ok(out)
}
