//! Flat `key = value` scenario files.
//!
//! One assignment per line, `#` starts a comment. Keys are the field names
//! of [`ScenarioConfig`] with the geometry fields inlined. Size ranges use
//! `min..max`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{RoadGeometry, ScenarioConfig, SizeRange};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("{key}: expected a number, got '{value}'")))
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| parse_err(line, format!("{key}: expected an integer, got '{value}'")))
}

fn parse_range(line: usize, key: &str, value: &str) -> Result<SizeRange> {
    let parts: Vec<&str> = if value.contains("..") {
        value.splitn(2, "..").collect()
    } else {
        value.splitn(2, ',').collect()
    };
    if parts.len() != 2 {
        return Err(parse_err(
            line,
            format!("{key}: expected 'min..max', got '{value}'"),
        ));
    }
    let min = parts[0]
        .trim()
        .parse::<u32>()
        .map_err(|_| parse_err(line, format!("{key}: bad range minimum '{}'", parts[0])))?;
    let max = parts[1]
        .trim()
        .parse::<u32>()
        .map_err(|_| parse_err(line, format!("{key}: bad range maximum '{}'", parts[1])))?;
    Ok(SizeRange::new(min, max))
}

/// Parses a scenario from file contents. Unknown keys are errors; missing
/// keys fall back to the values of [`ScenarioConfig::paper_experiment`].
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::paper_experiment();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "control_zone_length" => {
                cfg.geometry.control_zone_length = parse_f64(line_no, key, value)?
            }
            "merging_zone_length" => {
                cfg.geometry.merging_zone_length = parse_f64(line_no, key, value)?
            }
            "v_min" => cfg.geometry.v_min = parse_f64(line_no, key, value)?,
            "v_max" => cfg.geometry.v_max = parse_f64(line_no, key, value)?,
            "u_min" => cfg.geometry.u_min = parse_f64(line_no, key, value)?,
            "u_max" => cfg.geometry.u_max = parse_f64(line_no, key, value)?,
            "safe_time_gap" => cfg.safe_time_gap = parse_f64(line_no, key, value)?,
            "highway_volume" => cfg.highway_volume = parse_f64(line_no, key, value)?,
            "ramp_volume" => cfg.ramp_volume = parse_f64(line_no, key, value)?,
            "highway_platoon_size_range" => {
                cfg.highway_platoon_size_range = parse_range(line_no, key, value)?
            }
            "ramp_platoon_size_range" => {
                cfg.ramp_platoon_size_range = parse_range(line_no, key, value)?
            }
            "highway_weight" => cfg.highway_weight = parse_f64(line_no, key, value)?,
            "ramp_weight" => cfg.ramp_weight = parse_f64(line_no, key, value)?,
            "headway" => cfg.headway = parse_f64(line_no, key, value)?,
            "sim_duration" => cfg.sim_duration = parse_f64(line_no, key, value)?,
            "time_step" => cfg.time_step = parse_f64(line_no, key, value)?,
            "rng_seed" => cfg.rng_seed = parse_u64(line_no, key, value)?,
            other => return Err(parse_err(line_no, format!("unknown key '{other}'"))),
        }
    }
    Ok(cfg)
}

/// Loads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

/// Renders a scenario in the flat key-value format.
pub fn format_scenario(cfg: &ScenarioConfig) -> String {
    let RoadGeometry {
        control_zone_length,
        merging_zone_length,
        v_min,
        v_max,
        u_min,
        u_max,
    } = cfg.geometry;
    format!(
        "# merging-roadway geometry\n\
         control_zone_length = {control_zone_length}\n\
         merging_zone_length = {merging_zone_length}\n\
         v_min = {v_min}\n\
         v_max = {v_max}\n\
         u_min = {u_min}\n\
         u_max = {u_max}\n\
         \n\
         # demand and platoon makeup\n\
         highway_volume = {}\n\
         ramp_volume = {}\n\
         highway_platoon_size_range = {}\n\
         ramp_platoon_size_range = {}\n\
         highway_weight = {}\n\
         ramp_weight = {}\n\
         headway = {}\n\
         safe_time_gap = {}\n\
         \n\
         # run control\n\
         sim_duration = {}\n\
         time_step = {}\n\
         rng_seed = {}\n",
        cfg.highway_volume,
        cfg.ramp_volume,
        cfg.highway_platoon_size_range,
        cfg.ramp_platoon_size_range,
        cfg.highway_weight,
        cfg.ramp_weight,
        cfg.headway,
        cfg.safe_time_gap,
        cfg.sim_duration,
        cfg.time_step,
        cfg.rng_seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_config() {
        let cfg = ScenarioConfig::paper_experiment();
        let parsed = parse_scenario(&format_scenario(&cfg)).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let cfg = parse_scenario("# header\n\nv_max = 30 # trailing comment\n").unwrap();
        assert_eq!(cfg.geometry.v_max, 30.0);
    }

    #[test]
    fn unknown_key_reports_line_number() {
        let err = parse_scenario("v_max = 25\nbogus = 1\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn range_accepts_both_separators() {
        let cfg = parse_scenario("highway_platoon_size_range = 2..4\n").unwrap();
        assert_eq!(cfg.highway_platoon_size_range, SizeRange::new(2, 4));
        let cfg = parse_scenario("highway_platoon_size_range = 2, 4\n").unwrap();
        assert_eq!(cfg.highway_platoon_size_range, SizeRange::new(2, 4));
    }
}
