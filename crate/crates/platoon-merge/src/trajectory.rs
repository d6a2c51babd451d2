//! Closed-form leader trajectories.
//!
//! Three families:
//! - time-optimal: full acceleration to the speed limit, then cruise;
//! - energy-optimal: control linear in time (cubic position) solved from
//!   the four boundary conditions, valid only while speed and control
//!   bounds stay inactive;
//! - bounded-delay: brake/cruise/accelerate profiles that absorb merge
//!   delays the linear-control solution cannot, staying inside the speed
//!   and control bounds at the cost of optimality.
//!
//! Plans are piecewise polynomials in local segment time, immutable after
//! construction, and exact: speed is the derivative of position and
//! control the derivative of speed as polynomial identities.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::scheduler::MergeSchedule;
use crate::types::{Platoon, RoadGeometry, VehicleState};

/// Tolerance for boundary and continuity checks.
pub const BOUNDARY_EPS: f64 = 1e-9;

/// Slowest speed a delay-absorbing profile will cruise at when the
/// configured minimum speed is lower. Keeping platoons rolling avoids the
/// stop-and-go behavior the scheduled policy exists to remove.
pub const CRAWL_FLOOR: f64 = 0.5;

/// Merge-entry speeds of delayed platoons are held at or above this
/// fraction of the limit while possible: entering much slower stretches
/// the zone occupancy and snowballs delay onto followers.
pub const ENTRY_SPEED_FRACTION: f64 = 0.8;

/// How a plan was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    /// Earliest feasible crossing: maximum acceleration, then cruise.
    TimeOptimal,
    /// Linear-in-time control hitting a fixed merge time; minimizes the
    /// control-effort integral while constraints are inactive.
    EnergyOptimal,
    /// Bound-respecting brake/cruise/accelerate profile for delays the
    /// energy-optimal form cannot absorb.
    Constrained,
    /// Stop-and-yield behavior used by the comparison policy.
    Baseline,
}

impl PlanKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlanKind::TimeOptimal => "time_optimal",
            PlanKind::EnergyOptimal => "energy_optimal",
            PlanKind::Constrained => "constrained",
            PlanKind::Baseline => "baseline",
        }
    }
}

/// One polynomial piece of a plan. Position is a cubic in local time
/// `s = t - t_start`; speed and control are its first and second
/// derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    /// Position at s = 0.
    pub p0: f64,
    /// Speed at s = 0.
    pub v0: f64,
    /// Control at s = 0.
    pub u0: f64,
    /// Control slope (zero for constant-acceleration pieces).
    pub u_slope: f64,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn position_at(&self, t: f64) -> f64 {
        let s = t - self.t_start;
        self.p0 + s * (self.v0 + s * (self.u0 / 2.0 + s * self.u_slope / 6.0))
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        let s = t - self.t_start;
        self.v0 + s * (self.u0 + s * self.u_slope / 2.0)
    }

    pub fn control_at(&self, t: f64) -> f64 {
        self.u0 + (t - self.t_start) * self.u_slope
    }

    pub fn state_at(&self, t: f64) -> VehicleState {
        VehicleState {
            position: self.position_at(t),
            speed: self.speed_at(t),
            accel: self.control_at(t),
        }
    }

    fn end_state(&self) -> VehicleState {
        self.state_at(self.t_end)
    }

    /// Closed-form 1/2 * integral of u^2 over the segment.
    fn control_effort(&self) -> f64 {
        let d = self.duration();
        0.5 * (self.u0 * self.u0 * d
            + self.u0 * self.u_slope * d * d
            + self.u_slope * self.u_slope * d * d * d / 3.0)
    }

    /// Extreme speed over the segment: endpoint values plus the interior
    /// stationary point of the quadratic when present.
    fn speed_range(&self) -> (f64, f64) {
        let a = self.speed_at(self.t_start);
        let b = self.speed_at(self.t_end);
        let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
        if self.u_slope != 0.0 {
            let s_star = -self.u0 / self.u_slope;
            if s_star > 0.0 && s_star < self.duration() {
                let v = self.v0 + s_star * (self.u0 + s_star * self.u_slope / 2.0);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    /// Extreme control over the segment (linear, so endpoints suffice).
    fn control_range(&self) -> (f64, f64) {
        let a = self.u0;
        let b = self.control_at(self.t_end);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

/// A leader trajectory: contiguous polynomial segments from control-zone
/// entry at `t0` through merging-zone entry at `tm`, plus any appended
/// merging-zone pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPlan {
    pub kind: PlanKind,
    pub segments: Vec<Segment>,
    /// Control-zone entry time.
    pub t0: f64,
    /// Merging-zone entry time (position reaches the control-zone length).
    pub tm: f64,
}

impl TrajectoryPlan {
    /// End of the last segment; equals `tm` unless merging-zone segments
    /// were appended.
    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(self.t0, |s| s.t_end)
    }

    /// Speed at the merging-zone entry.
    pub fn merge_entry_speed(&self) -> f64 {
        self.segment_at(self.tm).speed_at(self.tm)
    }

    /// 1/2 * integral of u^2 over all segments, in closed form.
    pub fn control_effort(&self) -> f64 {
        self.segments.iter().map(Segment::control_effort).sum()
    }

    fn segment_at(&self, t: f64) -> &Segment {
        for seg in &self.segments {
            if t <= seg.t_end {
                return seg;
            }
        }
        self.segments.last().expect("plans have segments")
    }

    /// Evaluates the plan inside its domain.
    pub fn eval(&self, t: f64) -> Result<VehicleState> {
        let t_end = self.end_time();
        if t < self.t0 - BOUNDARY_EPS || t > t_end + BOUNDARY_EPS {
            return Err(Error::OutOfDomain {
                t,
                t0: self.t0,
                t_end,
            });
        }
        Ok(self.segment_at(t).state_at(t))
    }

    /// Total evaluation used by the simulator: before `t0` the leader is
    /// on its approach cruise at the entry speed; after the last segment
    /// it keeps the final speed.
    pub fn sample(&self, t: f64) -> VehicleState {
        if t < self.t0 {
            let v0 = self.segments.first().map_or(0.0, |s| s.v0);
            return VehicleState {
                position: v0 * (t - self.t0),
                speed: v0,
                accel: 0.0,
            };
        }
        let t_end = self.end_time();
        if t > t_end {
            let end = self.segments.last().expect("plans have segments").end_state();
            return VehicleState {
                position: end.position + end.speed * (t - t_end),
                speed: end.speed,
                accel: 0.0,
            };
        }
        self.segment_at(t).state_at(t)
    }

    /// Earliest time the plan reaches `position`, linearly bracketed over
    /// segments and solved on the containing piece by bisection.
    pub fn time_at_position(&self, position: f64) -> Option<f64> {
        for seg in &self.segments {
            let p_start = seg.position_at(seg.t_start);
            let p_end = seg.position_at(seg.t_end);
            if position >= p_start - BOUNDARY_EPS && position <= p_end + BOUNDARY_EPS {
                let (mut lo, mut hi) = (seg.t_start, seg.t_end);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if seg.position_at(mid) < position {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
        }
        None
    }

    /// Samples the plan at a fixed step as CSV rows `t,position,speed,accel`.
    pub fn to_csv(&self, time_step: f64) -> String {
        let mut out = String::from("t,position,speed,accel\n");
        let mut t = self.t0;
        let t_end = self.end_time();
        while t <= t_end + BOUNDARY_EPS {
            let s = self.sample(t.min(t_end));
            out.push_str(&format!(
                "{:.6},{:.6},{:.6},{:.6}\n",
                t.min(t_end),
                s.position,
                s.speed,
                s.accel
            ));
            t += time_step;
        }
        out
    }
}

fn check_bounds(segments: &[Segment], geometry: &RoadGeometry, t0: f64, tm: f64) -> Result<()> {
    for seg in segments {
        let (u_lo, u_hi) = seg.control_range();
        if u_hi > geometry.u_max + BOUNDARY_EPS {
            return Err(Error::ConstraintViolation {
                bound: "u_max",
                t0,
                tm,
                value: u_hi,
            });
        }
        if u_lo < geometry.u_min - BOUNDARY_EPS {
            return Err(Error::ConstraintViolation {
                bound: "u_min",
                t0,
                tm,
                value: u_lo,
            });
        }
        let (v_lo, v_hi) = seg.speed_range();
        if v_hi > geometry.v_max + BOUNDARY_EPS {
            return Err(Error::ConstraintViolation {
                bound: "v_max",
                t0,
                tm,
                value: v_hi,
            });
        }
        if v_lo < geometry.v_min - BOUNDARY_EPS {
            return Err(Error::ConstraintViolation {
                bound: "v_min",
                t0,
                tm,
                value: v_lo,
            });
        }
    }
    Ok(())
}

fn validate_speed(v0: f64, geometry: &RoadGeometry) -> Result<()> {
    if v0 > geometry.v_max {
        return Err(Error::SpeedAboveLimit {
            speed: v0,
            v_max: geometry.v_max,
        });
    }
    if v0 < geometry.v_min {
        return Err(Error::SpeedBelowMinimum {
            speed: v0,
            v_min: geometry.v_min,
        });
    }
    Ok(())
}

/// Duration of the fastest bound-respecting crossing of `distance` meters
/// starting at `v0`: accelerate at u_max to v_max, cruise the remainder.
pub fn fastest_crossing(v0: f64, distance: f64, geometry: &RoadGeometry) -> f64 {
    let v_max = geometry.v_max;
    if v0 >= v_max {
        return distance / v_max;
    }
    let t_a = (v_max - v0) / geometry.u_max;
    let d_a = (v_max * v_max - v0 * v0) / (2.0 * geometry.u_max);
    if d_a >= distance {
        // Limit not reached inside the distance; pure acceleration.
        let disc = (v0 * v0 + 2.0 * geometry.u_max * distance).sqrt();
        return (disc - v0) / geometry.u_max;
    }
    t_a + (distance - d_a) / v_max
}

/// Fastest bound-respecting segments from (p0, v0) to `target`:
/// accelerate at u_max until the limit or the target, cruise any
/// remainder.
pub(crate) fn time_optimal_segments(
    t0: f64,
    p0: f64,
    v0: f64,
    target: f64,
    geometry: &RoadGeometry,
) -> Vec<Segment> {
    let v_max = geometry.v_max;
    let mut segments = Vec::new();
    let mut t = t0;
    let mut p = p0;
    let mut v = v0;
    if v0 < v_max {
        let d_a = (v_max * v_max - v0 * v0) / (2.0 * geometry.u_max);
        if p0 + d_a >= target {
            // Target reached mid-acceleration.
            let duration =
                ((v0 * v0 + 2.0 * geometry.u_max * (target - p0)).sqrt() - v0) / geometry.u_max;
            segments.push(Segment {
                t_start: t,
                t_end: t + duration,
                p0: p,
                v0: v,
                u0: geometry.u_max,
                u_slope: 0.0,
            });
            return segments;
        }
        let t_a = (v_max - v0) / geometry.u_max;
        segments.push(Segment {
            t_start: t,
            t_end: t + t_a,
            p0: p,
            v0: v,
            u0: geometry.u_max,
            u_slope: 0.0,
        });
        p += d_a;
        v = v_max;
        t += t_a;
    }
    let remaining = target - p;
    segments.push(Segment {
        t_start: t,
        t_end: t + remaining / v_max,
        p0: p,
        v0: v,
        u0: 0.0,
        u_slope: 0.0,
    });
    segments
}

/// Time-optimal control-zone crossing: accelerate at u_max to the limit,
/// then cruise; `tm - t0` equals the scheduler's entry time.
pub fn time_optimal_plan(v0: f64, geometry: &RoadGeometry, t0: f64) -> Result<TrajectoryPlan> {
    validate_speed(v0, geometry)?;
    let segments = time_optimal_segments(t0, 0.0, v0, geometry.control_zone_length, geometry);
    let tm = segments.last().unwrap().t_end;
    Ok(TrajectoryPlan {
        kind: PlanKind::TimeOptimal,
        segments,
        t0,
        tm,
    })
}

/// Solves the linear-control boundary problem from an arbitrary start
/// state to (p1, v1) at `tm` and checks the speed/control bounds.
pub(crate) fn energy_segment_between(
    t0: f64,
    p0: f64,
    v0: f64,
    tm: f64,
    p1: f64,
    v1: f64,
    geometry: &RoadGeometry,
) -> Result<Segment> {
    let horizon = tm - t0;
    if horizon <= 0.0 {
        return Err(Error::SingularSystem(horizon));
    }
    // Unknowns x = [u_slope, u0, v_start, p_start]; position is
    // p_start + v_start*s + u0*s^2/2 + u_slope*s^3/6 in local time s.
    let h2 = horizon * horizon;
    let h3 = h2 * horizon;
    #[rustfmt::skip]
    let system = Matrix4::new(
        0.0,       0.0,      0.0,     1.0,
        0.0,       0.0,      1.0,     0.0,
        h3 / 6.0,  h2 / 2.0, horizon, 1.0,
        h2 / 2.0,  horizon,  1.0,     0.0,
    );
    let rhs = Vector4::new(p0, v0, p1, v1);
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem(horizon))?;
    let segment = Segment {
        t_start: t0,
        t_end: tm,
        p0: solution[3],
        v0: solution[2],
        u0: solution[1],
        u_slope: solution[0],
    };
    check_bounds(std::slice::from_ref(&segment), geometry, t0, tm)?;
    Ok(segment)
}

/// Energy-optimal control-zone crossing on a fixed horizon: control linear
/// in time, boundary conditions p(t0)=0, v(t0)=v0, p(tm)=L_CZ,
/// v(tm)=v_max. Errors if the resulting trajectory leaves the admissible
/// speed or control band anywhere on the horizon.
pub fn energy_optimal_plan(
    v0: f64,
    geometry: &RoadGeometry,
    t0: f64,
    tm: f64,
) -> Result<TrajectoryPlan> {
    validate_speed(v0, geometry)?;
    let segment = energy_segment_between(
        t0,
        0.0,
        v0,
        tm,
        geometry.control_zone_length,
        geometry.v_max,
        geometry,
    )?;
    Ok(TrajectoryPlan {
        kind: PlanKind::EnergyOptimal,
        segments: vec![segment],
        t0,
        tm,
    })
}

/// Bound-respecting delay absorption from an arbitrary start state: reach
/// `target` exactly at `tm` with low control effort. Preference order:
///
/// 1. the free-terminal-speed linear control (control eases to zero at
///    the merge entry, the entry speed falls where it may inside the
///    band) — the transversality solution of the effort objective when
///    the terminal speed is left free;
/// 2. a softened acceleration that rides the speed limit, for horizons
///    too tight for the free-terminal form;
/// 3. a full brake followed by the easing ramp when the free-terminal
///    control would exceed the braking bound;
/// 4. a brake-crawl-accelerate profile at the crawl floor for the longest
///    absorbable delays.
///
/// Callers recompute merging-zone occupancy from the realized entry speed.
pub(crate) fn bounded_delay_segments(
    t0: f64,
    p0: f64,
    v0: f64,
    tm: f64,
    target: f64,
    geometry: &RoadGeometry,
    platoon_id: u32,
) -> Result<(Vec<Segment>, PlanKind)> {
    let distance = target - p0;
    let horizon = tm - t0;
    let v_max = geometry.v_max;
    let accel = geometry.u_max;
    let brake = -geometry.u_min;
    let floor = geometry.v_min.max(CRAWL_FLOOR).min(v0);

    let fastest = fastest_crossing(v0, distance, geometry);
    if horizon < fastest - BOUNDARY_EPS {
        return Err(Error::InfeasibleDelay {
            id: platoon_id,
            t_m: tm,
            t_max: t0 + fastest,
        });
    }
    if (horizon - fastest).abs() <= 1e-7 {
        return Ok((
            time_optimal_segments(t0, p0, v0, target, geometry),
            PlanKind::TimeOptimal,
        ));
    }

    // Free-terminal linear control: u(s) = u_start * (1 - s/horizon).
    // The start level follows from the required position moment; speed
    // ends wherever the easing ramp leaves it, as long as that keeps the
    // merge-entry speed inside the operating band.
    let entry_floor = (ENTRY_SPEED_FRACTION * v_max).max(floor);
    let moment = distance - v0 * horizon;
    let u_start = 3.0 * moment / (horizon * horizon);
    let v_end = v0 + 1.5 * moment / horizon;
    if u_start >= geometry.u_min - BOUNDARY_EPS
        && u_start <= accel + BOUNDARY_EPS
        && v_end >= entry_floor - BOUNDARY_EPS
        && v_end <= v_max + BOUNDARY_EPS
    {
        let segments = vec![Segment {
            t_start: t0,
            t_end: tm,
            p0,
            v0,
            u0: u_start,
            u_slope: -u_start / horizon,
        }];
        return checked_profile(segments, tm, target, platoon_id, t0, fastest)
            .map(|s| (s, PlanKind::EnergyOptimal));
    }

    // Tight horizons from below the limit: soften the acceleration and
    // ride the speed limit the rest of the way.
    let dv = v_max - v0;
    if dv > BOUNDARY_EPS && horizon * v_max > distance {
        let ramp = dv * dv / (2.0 * (horizon * v_max - distance));
        let ramp_min = dv * (v_max + v0) / (2.0 * distance);
        if ramp >= ramp_min - BOUNDARY_EPS && ramp <= accel + BOUNDARY_EPS {
            let ramp = ramp.min(accel);
            let t_ramp = dv / ramp;
            let d_ramp = dv * (v_max + v0) / (2.0 * ramp);
            let mut segments = vec![Segment {
                t_start: t0,
                t_end: t0 + t_ramp,
                p0,
                v0,
                u0: ramp,
                u_slope: 0.0,
            }];
            if tm > t0 + t_ramp {
                segments.push(Segment {
                    t_start: t0 + t_ramp,
                    t_end: tm,
                    p0: p0 + d_ramp,
                    v0: v_max,
                    u0: 0.0,
                    u_slope: 0.0,
                });
            }
            return checked_profile(segments, tm, target, platoon_id, t0, fastest)
                .map(|s| (s, PlanKind::Constrained));
        }
    }

    // Longer delays: pin the merge entry at descending rungs of the
    // operating band and find the minimum-effort control that lands
    // there, clamping at the control bounds where the delay demands it.
    // Entering slower than the band stretches the zone occupancy and
    // snowballs delay onto followers, so the deeper rungs engage only
    // for delays the band entry cannot absorb.
    for fraction in [ENTRY_SPEED_FRACTION, 0.7, 0.6] {
        let v_entry = (fraction * v_max).max(floor);
        if let Some(segments) =
            saturated_linear_segments(t0, p0, v0, tm, target, v_entry, geometry, floor)
        {
            if let Ok(s) = checked_profile(segments, tm, target, platoon_id, t0, fastest) {
                return Ok((s, PlanKind::Constrained));
            }
        }
    }

    // Coverage net between the band-entry family and the crawl: brake
    // hard to a turn speed and immediately re-accelerate, exiting as fast
    // as the runway allows. The turn speed solves a quadratic from the
    // time identity with the exit speed eliminated through the distance
    // identity.
    let k = accel / brake;
    let shift = accel * horizon - k * v0;
    let qa = k * (k + 1.0);
    let qb = 2.0 * shift * (1.0 + k);
    let qc = k * v0 * v0 + shift * shift - 2.0 * accel * distance;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc >= 0.0 {
        let root = disc.sqrt();
        for candidate in [(-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)] {
            let v_exit = shift + (1.0 + k) * candidate;
            if candidate >= floor - BOUNDARY_EPS
                && candidate <= v0 + BOUNDARY_EPS
                && v_exit >= candidate - BOUNDARY_EPS
                && v_exit <= v_max + BOUNDARY_EPS
            {
                let v_c = candidate.clamp(floor, v0);
                let t_brake = (v0 - v_c) / brake;
                let t_accel = (horizon - t_brake).max(0.0);
                let segments = three_phase_segments(
                    t0,
                    p0,
                    v0,
                    v_c,
                    t_brake,
                    0.0,
                    v_exit.min(v_max),
                    t_accel,
                    geometry,
                );
                if let Ok(s) = checked_profile(segments, tm, target, platoon_id, t0, fastest) {
                    return Ok((s, PlanKind::Constrained));
                }
            }
        }
    }

    // Longest absorbable delays: brake to the crawl floor, hold it, and
    // exit at the highest speed the remaining runway permits.
    let d_brake = (v0 * v0 - floor * floor) / (2.0 * brake);
    let t_brake = (v0 - floor) / brake;
    let run = distance - d_brake;
    let slack = horizon - t_brake;
    if run < -BOUNDARY_EPS || slack < 0.0 {
        return Err(Error::InfeasibleDelay {
            id: platoon_id,
            t_m: tm,
            t_max: t0 + fastest,
        });
    }
    let gain = 2.0 * accel * (run - floor * slack);
    if gain < -1e-7 {
        // Even crawling the whole way cannot stretch to the horizon.
        return Err(Error::InfeasibleDelay {
            id: platoon_id,
            t_m: tm,
            t_max: t0 + t_brake + run / floor,
        });
    }
    let v_exit = (floor + gain.max(0.0).sqrt()).min(v_max);
    let t_accel = (v_exit - floor) / accel;
    let t_cruise = (horizon - t_brake - t_accel).max(0.0);
    let segments = three_phase_segments(
        t0, p0, v0, floor, t_brake, t_cruise, v_exit, t_accel, geometry,
    );
    checked_profile(segments, tm, target, platoon_id, t0, fastest)
        .map(|s| (s, PlanKind::Constrained))
}

/// Minimum-effort profile reaching `v_end` at the target over a fixed
/// horizon when the pure linear control would leave the admissible band:
/// the control is a linear ramp clamped to [u_min, u_max], with offset
/// and slope solved by nested bisection so the speed change and travel
/// distance land exactly.
///
/// Returns None when no such profile exists or the speed would leave
/// [floor, v_max] along the way.
#[allow(clippy::too_many_arguments)]
fn saturated_linear_segments(
    t0: f64,
    p0: f64,
    v0: f64,
    tm: f64,
    target: f64,
    v_end: f64,
    geometry: &RoadGeometry,
    floor: f64,
) -> Option<Vec<Segment>> {
    let horizon = tm - t0;
    let needed_dv = v_end - v0;
    let needed_dp = target - p0 - v0 * horizon;
    let (u_lo, u_hi) = (geometry.u_min, geometry.u_max);
    if needed_dv < u_lo * horizon - BOUNDARY_EPS || needed_dv > u_hi * horizon + BOUNDARY_EPS {
        return None;
    }

    // Integrals of u(s) = clamp(c0 + c1*s) over [0, horizon]: the speed
    // change and the position moment ((horizon - s) * u).
    let integrals = |c0: f64, c1: f64| -> (f64, f64) {
        if c1 <= 0.0 {
            let u = c0.clamp(u_lo, u_hi);
            return (u * horizon, u * horizon * horizon / 2.0);
        }
        let s1 = ((u_lo - c0) / c1).clamp(0.0, horizon);
        let s2 = ((u_hi - c0) / c1).clamp(s1, horizon);
        let dv = u_lo * s1
            + c0 * (s2 - s1)
            + c1 * (s2 * s2 - s1 * s1) / 2.0
            + u_hi * (horizon - s2);
        let mid_moment = c0 * horizon * (s2 - s1)
            + (c1 * horizon - c0) * (s2 * s2 - s1 * s1) / 2.0
            - c1 * (s2 * s2 * s2 - s1 * s1 * s1) / 3.0;
        let dp = u_lo * (horizon * s1 - s1 * s1 / 2.0)
            + mid_moment
            + u_hi * (horizon - s2) * (horizon - s2) / 2.0;
        (dv, dp)
    };

    // Offset matching the speed change for a given slope (monotone).
    let solve_offset = |c1: f64| -> f64 {
        let mut lo = u_lo - c1 * horizon;
        let mut hi = u_hi;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if integrals(mid, c1).0 < needed_dv {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    // The moment integral decreases as the ramp steepens; bracket the
    // slope between the constant control and an effectively instantaneous
    // switch.
    let slope_cap = (u_hi - u_lo) * 1e9 / horizon;
    if integrals(solve_offset(0.0), 0.0).1 < needed_dp - 1e-7
        || integrals(solve_offset(slope_cap), slope_cap).1 > needed_dp + 1e-7
    {
        return None;
    }
    let mut lo = 0.0;
    let mut hi = slope_cap;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if integrals(solve_offset(mid), mid).1 > needed_dp {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c1 = 0.5 * (lo + hi);
    let c0 = solve_offset(c1);

    let s1 = if c1 > 0.0 {
        ((u_lo - c0) / c1).clamp(0.0, horizon)
    } else {
        0.0
    };
    let s2 = if c1 > 0.0 {
        ((u_hi - c0) / c1).clamp(s1, horizon)
    } else {
        horizon
    };
    let mut segments = Vec::with_capacity(3);
    let mut t = t0;
    let mut p = p0;
    let mut v = v0;
    for (duration, u0, u_slope) in [
        (s1, u_lo, 0.0),
        (s2 - s1, c0 + c1 * s1, c1),
        (horizon - s2, u_hi, 0.0),
    ] {
        if duration <= 1e-12 {
            continue;
        }
        let seg = Segment {
            t_start: t,
            t_end: t + duration,
            p0: p,
            v0: v,
            u0,
            u_slope,
        };
        let end = seg.state_at(seg.t_end);
        segments.push(seg);
        t += duration;
        p = end.position;
        v = end.speed;
    }
    if segments.is_empty() {
        return None;
    }
    for seg in &segments {
        let (v_lo, v_hi) = seg.speed_range();
        if v_lo < floor - BOUNDARY_EPS || v_hi > geometry.v_max + BOUNDARY_EPS {
            return None;
        }
    }
    Some(segments)
}

/// Rejects delay profiles whose segments do not land on the target at the
/// horizon; a mismatch here would let a platoon miss its merge slot.
fn checked_profile(
    segments: Vec<Segment>,
    tm: f64,
    target: f64,
    platoon_id: u32,
    t0: f64,
    fastest: f64,
) -> Result<Vec<Segment>> {
    let last = segments.last().expect("profile has segments");
    let end_time = last.t_end;
    let end_pos = last.position_at(end_time);
    if (end_time - tm).abs() > 1e-6 || (end_pos - target).abs() > 1e-6 {
        return Err(Error::InfeasibleDelay {
            id: platoon_id,
            t_m: tm,
            t_max: t0 + fastest,
        });
    }
    Ok(segments)
}

#[allow(clippy::too_many_arguments)]
fn three_phase_segments(
    t0: f64,
    p0: f64,
    v0: f64,
    v_cruise: f64,
    t_brake: f64,
    t_cruise: f64,
    v_exit: f64,
    t_accel: f64,
    geometry: &RoadGeometry,
) -> Vec<Segment> {
    let mut segments = Vec::with_capacity(3);
    let mut t = t0;
    let mut p = p0;
    if t_brake > 0.0 {
        segments.push(Segment {
            t_start: t,
            t_end: t + t_brake,
            p0: p,
            v0,
            u0: geometry.u_min,
            u_slope: 0.0,
        });
        p += v0 * t_brake + 0.5 * geometry.u_min * t_brake * t_brake;
        t += t_brake;
    }
    if t_cruise > 0.0 {
        segments.push(Segment {
            t_start: t,
            t_end: t + t_cruise,
            p0: p,
            v0: v_cruise,
            u0: 0.0,
            u_slope: 0.0,
        });
        p += v_cruise * t_cruise;
        t += t_cruise;
    }
    if t_accel > 0.0 {
        segments.push(Segment {
            t_start: t,
            t_end: t + t_accel,
            p0: p,
            v0: v_cruise,
            u0: geometry.u_max,
            u_slope: 0.0,
        });
    }
    if segments.is_empty() {
        segments.push(Segment {
            t_start: t0,
            t_end: t0,
            p0,
            v0: v_exit,
            u0: 0.0,
            u_slope: 0.0,
        });
    }
    segments
}

/// Bound-respecting delay-absorbing control-zone crossing from entry.
/// The merge-entry speed falls below the limit for long delays; read it
/// back with [`TrajectoryPlan::merge_entry_speed`] and size the zone
/// occupancy accordingly.
pub fn bounded_delay_plan(
    v0: f64,
    geometry: &RoadGeometry,
    t0: f64,
    tm: f64,
    platoon_id: u32,
) -> Result<TrajectoryPlan> {
    validate_speed(v0, geometry)?;
    let (segments, kind) = bounded_delay_segments(
        t0,
        0.0,
        v0,
        tm,
        geometry.control_zone_length,
        geometry,
        platoon_id,
    )?;
    Ok(TrajectoryPlan {
        kind,
        segments,
        t0,
        tm,
    })
}

/// Acceleration used through the merging zone by scheduled platoons that
/// enter below the limit: half strength, so most of the speed recovery
/// happens downstream of the conflict area.
pub(crate) fn merge_recovery_accel(geometry: &RoadGeometry) -> f64 {
    geometry.u_max / 2.0
}

/// Crossing duration of the merging zone for a scheduled platoon entering
/// at `entry_speed`: recover gently toward the limit, cruise once there.
pub(crate) fn scheduled_zone_crossing(entry_speed: f64, geometry: &RoadGeometry) -> f64 {
    let v = entry_speed.max(CRAWL_FLOOR);
    let zone = geometry.merging_zone_length;
    let accel = merge_recovery_accel(geometry);
    if v >= geometry.v_max {
        return zone / geometry.v_max;
    }
    let d_a = (geometry.v_max * geometry.v_max - v * v) / (2.0 * accel);
    if d_a >= zone {
        return ((v * v + 2.0 * accel * zone).sqrt() - v) / accel;
    }
    (geometry.v_max - v) / accel + (zone - d_a) / geometry.v_max
}

/// Appends the merging-zone recovery to a plan that currently ends at its
/// merge entry: gentle acceleration toward the limit, cruising once
/// there, until `t_l`.
pub(crate) fn append_merge_cruise(plan: &mut TrajectoryPlan, geometry: &RoadGeometry, t_l: f64) {
    let entry = plan
        .segments
        .last()
        .expect("plans have segments")
        .end_state();
    let mut t = plan.tm;
    let mut p = entry.position;
    let mut v = entry.speed;
    let accel = merge_recovery_accel(geometry);
    if v < geometry.v_max - BOUNDARY_EPS {
        let t_a = ((geometry.v_max - v) / accel).min((t_l - t).max(0.0));
        if t_a > 0.0 {
            plan.segments.push(Segment {
                t_start: t,
                t_end: t + t_a,
                p0: p,
                v0: v,
                u0: accel,
                u_slope: 0.0,
            });
            p += v * t_a + 0.5 * accel * t_a * t_a;
            v += accel * t_a;
            t += t_a;
        }
    }
    if t_l > t {
        plan.segments.push(Segment {
            t_start: t,
            t_end: t_l,
            p0: p,
            v0: v,
            u0: 0.0,
            u_slope: 0.0,
        });
    }
}

/// Appends merging-zone segments to a plan that currently ends at its
/// merge entry: cruise at the entry speed when it equals the limit,
/// otherwise keep accelerating to the limit and cruise until `t_l`.
pub(crate) fn append_merge_segments(
    plan: &mut TrajectoryPlan,
    geometry: &RoadGeometry,
    t_l: f64,
) {
    let entry = plan
        .segments
        .last()
        .expect("plans have segments")
        .end_state();
    let mut t = plan.tm;
    let mut p = entry.position;
    let mut v = entry.speed;
    if v < geometry.v_max - BOUNDARY_EPS {
        let t_a = ((geometry.v_max - v) / geometry.u_max).min((t_l - t).max(0.0));
        if t_a > 0.0 {
            plan.segments.push(Segment {
                t_start: t,
                t_end: t + t_a,
                p0: p,
                v0: v,
                u0: geometry.u_max,
                u_slope: 0.0,
            });
            p += v * t_a + 0.5 * geometry.u_max * t_a * t_a;
            v += geometry.u_max * t_a;
            t += t_a;
        }
    }
    if t_l > t {
        plan.segments.push(Segment {
            t_start: t,
            t_end: t_l,
            p0: p,
            v0: v,
            u0: 0.0,
            u_slope: 0.0,
        });
    }
}

/// Plans the control-zone crossing implied by a schedule entry: the
/// time-optimal plan when the slot is the earliest possible arrival,
/// otherwise the energy-optimal plan stretched to the slot. Appends the
/// merging-zone crossing through the leave time.
pub fn plan_for_schedule(
    platoon: &Platoon,
    schedule: &MergeSchedule,
    geometry: &RoadGeometry,
) -> Result<TrajectoryPlan> {
    let slot = schedule
        .slot(platoon.id)
        .ok_or(Error::NotScheduled(platoon.id))?;
    let earliest = platoon.arrival_time
        + crate::scheduler::entry_time(platoon, geometry)?;
    let mut plan = if (slot.t_m - earliest).abs() <= BOUNDARY_EPS {
        time_optimal_plan(platoon.initial_speed, geometry, platoon.arrival_time)?
    } else {
        energy_optimal_plan(
            platoon.initial_speed,
            geometry,
            platoon.arrival_time,
            slot.t_m,
        )?
    };
    append_merge_segments(&mut plan, geometry, slot.t_l);
    Ok(plan)
}
