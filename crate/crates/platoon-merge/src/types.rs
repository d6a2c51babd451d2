//! Shared domain types: road geometry, platoons, vehicle state, and
//! scenario configuration with validation.
//!
//! Units are SI throughout (meters, meters/second, seconds). All times are
//! absolute simulation seconds from t = 0. Positions use p = 0 at the
//! control-zone entry, p = L_CZ at the merging-zone entry, and
//! p = L_CZ + L_MZ at the merging-zone exit.

use crate::error::{Error, Result};

/// Tolerance used when checking simulated states against speed and
/// acceleration bounds.
pub const STATE_EPS: f64 = 1e-9;

/// Geometry and kinematic limits of the merging roadways.
///
/// The control zone (length `control_zone_length`) is where platoons
/// communicate and plan; the merging zone (length `merging_zone_length`)
/// is the conflict area treated as a single exclusive resource.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadGeometry {
    /// L_CZ, meters.
    pub control_zone_length: f64,
    /// L_MZ, meters.
    pub merging_zone_length: f64,
    /// Minimum speed, m/s (non-negative).
    pub v_min: f64,
    /// Speed limit, m/s.
    pub v_max: f64,
    /// Maximum deceleration, m/s^2 (negative).
    pub u_min: f64,
    /// Maximum acceleration, m/s^2 (positive).
    pub u_max: f64,
}

impl RoadGeometry {
    /// Position of the merging-zone exit.
    pub fn exit_position(&self) -> f64 {
        self.control_zone_length + self.merging_zone_length
    }

    /// Distance needed to accelerate from v_min to v_max at u_max.
    /// The control zone must be at least this long so any admitted platoon
    /// can reach the speed limit before the merging zone.
    pub fn min_control_zone_length(&self) -> f64 {
        (self.v_max * self.v_max - self.v_min * self.v_min) / (2.0 * self.u_max)
    }

    fn check(&self) -> Vec<String> {
        let mut violations = Vec::new();
        if !(self.control_zone_length > 0.0) {
            violations.push("control_zone_length must be positive".to_string());
        }
        if !(self.merging_zone_length > 0.0) {
            violations.push("merging_zone_length must be positive".to_string());
        }
        if !(self.v_min >= 0.0) {
            violations.push("v_min must be non-negative".to_string());
        }
        if !(self.v_min < self.v_max) {
            violations.push("speed band is empty: v_min must be strictly below v_max".to_string());
        }
        if !(self.u_min < 0.0) {
            violations.push("u_min must be negative".to_string());
        }
        if !(self.u_max > 0.0) {
            violations.push("u_max must be positive".to_string());
        }
        if violations.is_empty() && self.control_zone_length < self.min_control_zone_length() {
            violations.push(format!(
                "control zone too short: {} m < {} m needed to reach v_max from v_min",
                self.control_zone_length,
                self.min_control_zone_length()
            ));
        }
        violations
    }
}

/// Which road a platoon enters from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Highway,
    Ramp,
}

impl Origin {
    pub fn as_str(&self) -> &'static str {
        match self {
            Origin::Highway => "highway",
            Origin::Ramp => "ramp",
        }
    }
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "highway" | "h" | "main" => Ok(Origin::Highway),
            "ramp" | "r" | "onramp" | "on-ramp" => Ok(Origin::Ramp),
            other => Err(format!("unknown origin '{other}'")),
        }
    }
}

/// A platoon of vehicles treated as one scheduling job: a leader plus
/// `size - 1` followers at constant time headway.
#[derive(Debug, Clone, PartialEq)]
pub struct Platoon {
    /// Unique id, assigned in arrival order starting at 1.
    pub id: u32,
    pub origin: Origin,
    /// Priority weight w_k (> 0); higher weight merges earlier on ties.
    pub weight: f64,
    /// Number of vehicles |C_k| (>= 1).
    pub size: u32,
    /// Intra-platoon time headway t_k^h, seconds (> 0).
    pub headway: f64,
    /// Control-zone entry time t_k^0, absolute seconds.
    pub arrival_time: f64,
    /// Speed at control-zone entry v_k^0, m/s.
    pub initial_speed: f64,
}

impl Platoon {
    /// Builds a platoon, rejecting any field that violates its invariant.
    pub fn new(
        id: u32,
        origin: Origin,
        weight: f64,
        size: u32,
        headway: f64,
        arrival_time: f64,
        initial_speed: f64,
        geometry: &RoadGeometry,
    ) -> Result<Self> {
        if size < 1 {
            return Err(Error::EmptyPlatoon);
        }
        if !(weight > 0.0) {
            return Err(Error::NonPositiveWeight(weight));
        }
        if !(headway > 0.0) {
            return Err(Error::NonPositiveHeadway(headway));
        }
        if initial_speed > geometry.v_max {
            return Err(Error::SpeedAboveLimit {
                speed: initial_speed,
                v_max: geometry.v_max,
            });
        }
        if initial_speed < geometry.v_min {
            return Err(Error::SpeedBelowMinimum {
                speed: initial_speed,
                v_min: geometry.v_min,
            });
        }
        Ok(Platoon {
            id,
            origin,
            weight,
            size,
            headway,
            arrival_time,
            initial_speed,
        })
    }
}

/// Kinematic state of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    /// Meters from the control-zone entry.
    pub position: f64,
    /// m/s.
    pub speed: f64,
    /// m/s^2.
    pub accel: f64,
}

/// Inclusive platoon-size range `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeRange {
    pub min: u32,
    pub max: u32,
}

impl SizeRange {
    pub fn new(min: u32, max: u32) -> Self {
        SizeRange { min, max }
    }

    pub fn mean(&self) -> f64 {
        (self.min as f64 + self.max as f64) / 2.0
    }
}

impl std::fmt::Display for SizeRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.min, self.max)
    }
}

/// Full description of one simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub geometry: RoadGeometry,
    /// Safe time gap t_g between consecutive platoons in the merging zone.
    pub safe_time_gap: f64,
    /// Demand on the main road, vehicles per hour.
    pub highway_volume: f64,
    /// Demand on the on-ramp, vehicles per hour.
    pub ramp_volume: f64,
    pub highway_platoon_size_range: SizeRange,
    pub ramp_platoon_size_range: SizeRange,
    pub highway_weight: f64,
    pub ramp_weight: f64,
    /// Intra-platoon headway applied to generated platoons, seconds.
    pub headway: f64,
    /// Arrival-generation window, seconds.
    pub sim_duration: f64,
    /// Simulation step, seconds.
    pub time_step: f64,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// The merging-roadway setup used throughout the reported experiment:
    /// 150 m control zone, 30 m merging zone, 25 m/s limit, +-3 m/s^2,
    /// 1060 vph highway and 450 vph ramp demand over 900 seconds.
    pub fn paper_experiment() -> Self {
        ScenarioConfig {
            geometry: RoadGeometry {
                control_zone_length: 150.0,
                merging_zone_length: 30.0,
                v_min: 0.0,
                v_max: 25.0,
                u_min: -3.0,
                u_max: 3.0,
            },
            safe_time_gap: 1.0,
            highway_volume: 1060.0,
            ramp_volume: 450.0,
            highway_platoon_size_range: SizeRange::new(1, 5),
            ramp_platoon_size_range: SizeRange::new(1, 3),
            highway_weight: 2.0,
            ramp_weight: 1.0,
            headway: 1.0,
            sim_duration: 900.0,
            time_step: 0.1,
            rng_seed: 1,
        }
    }
}

/// Outcome of validating a scenario: empty means runnable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_valid() {
            writeln!(f, "scenario valid")
        } else {
            for v in &self.violations {
                writeln!(f, "violation: {v}")?;
            }
            Ok(())
        }
    }
}

/// Checks every scenario invariant and reports all violations.
/// Pure: the same input always yields the same report.
pub fn validate_scenario(cfg: &ScenarioConfig) -> ValidationReport {
    let mut violations = cfg.geometry.check();
    if !(cfg.safe_time_gap >= 0.0) {
        violations.push("safe_time_gap must be non-negative".to_string());
    }
    if !(cfg.highway_volume >= 0.0) {
        violations.push("highway_volume must be non-negative".to_string());
    }
    if !(cfg.ramp_volume >= 0.0) {
        violations.push("ramp_volume must be non-negative".to_string());
    }
    for (name, range) in [
        ("highway_platoon_size_range", cfg.highway_platoon_size_range),
        ("ramp_platoon_size_range", cfg.ramp_platoon_size_range),
    ] {
        if range.min < 1 {
            violations.push(format!("{name} minimum must be at least 1"));
        }
        if range.min > range.max {
            violations.push(format!("{name} is empty: {range}"));
        }
    }
    if !(cfg.highway_weight > 0.0) {
        violations.push("highway_weight must be positive".to_string());
    }
    if !(cfg.ramp_weight > 0.0) {
        violations.push("ramp_weight must be positive".to_string());
    }
    if !(cfg.headway > 0.0) {
        violations.push("headway must be positive".to_string());
    }
    if !(cfg.sim_duration > 0.0) {
        violations.push("sim_duration must be positive".to_string());
    }
    if !(cfg.time_step > 0.0) {
        violations.push("time_step must be positive".to_string());
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_geometry() -> RoadGeometry {
        ScenarioConfig::paper_experiment().geometry
    }

    #[test]
    fn paper_scenario_is_valid() {
        let report = validate_scenario(&ScenarioConfig::paper_experiment());
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn empty_speed_band_is_invalid() {
        let mut cfg = ScenarioConfig::paper_experiment();
        cfg.geometry.v_min = cfg.geometry.v_max;
        let report = validate_scenario(&cfg);
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.contains("speed band")));
    }

    #[test]
    fn short_control_zone_fails_reachability() {
        // 50 m < (25^2 - 0^2) / (2 * 3) = 104.1667 m.
        let mut cfg = ScenarioConfig::paper_experiment();
        cfg.geometry.control_zone_length = 50.0;
        let report = validate_scenario(&cfg);
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.contains("too short")));
        assert!((cfg.geometry.min_control_zone_length() - 625.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn validation_is_pure() {
        let cfg = ScenarioConfig::paper_experiment();
        assert_eq!(validate_scenario(&cfg), validate_scenario(&cfg));
    }

    #[test]
    fn platoon_constructor_rejects_bad_fields() {
        let g = paper_geometry();
        assert!(Platoon::new(1, Origin::Highway, 2.0, 0, 1.0, 0.0, 25.0, &g).is_err());
        assert!(Platoon::new(1, Origin::Highway, 0.0, 1, 1.0, 0.0, 25.0, &g).is_err());
        assert!(Platoon::new(1, Origin::Highway, 2.0, 1, 0.0, 0.0, 25.0, &g).is_err());
        assert!(Platoon::new(1, Origin::Highway, 2.0, 1, 1.0, 0.0, 26.0, &g).is_err());
        assert!(Platoon::new(1, Origin::Highway, 2.0, 1, 1.0, 0.0, -1.0, &g).is_err());
        assert!(Platoon::new(1, Origin::Highway, 2.0, 3, 0.8, 0.0, 22.0, &g).is_ok());
    }
}
