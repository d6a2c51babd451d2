//! Batch front-end used by the `platoon-merge` binary: load a scenario,
//! run one or both policies over a set of seeds, and write event,
//! trajectory, metrics, and comparison files.
//!
//! Exit codes: 0 on success, 2 on configuration or input-parse failures
//! (with the validation report printed), 3 on simulation aborts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{compare_runs, compute_metrics, RunMetrics};
use crate::scenario::load_scenario;
use crate::scheduler::{
    brute_force_best_sequence, build_schedule, schedule_to_csv, total_weighted_completion,
};
use crate::simulator::{run_baseline, run_proposed, RunLog};
use crate::types::{validate_scenario, Platoon, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIM: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Proposed,
    Baseline,
    Both,
}

impl Policy {
    fn runs_proposed(&self) -> bool {
        matches!(self, Policy::Proposed | Policy::Both)
    }

    fn runs_baseline(&self) -> bool {
        matches!(self, Policy::Baseline | Policy::Both)
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proposed" => Ok(Policy::Proposed),
            "baseline" => Ok(Policy::Baseline),
            "both" => Ok(Policy::Both),
            other => Err(format!("unknown policy '{other}' (proposed|baseline|both)")),
        }
    }
}

/// One batch invocation.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub scenario_path: PathBuf,
    pub policy: Policy,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub emit_trajectories: bool,
}

/// Parses `7`, `1,2,9`, or an inclusive range `1..20`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    let bad = |msg: String| Error::Parse { line: 1, message: msg };
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad seed range start '{lo}'")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad seed range end '{hi}'")))?;
        if hi < lo {
            return Err(bad(format!("empty seed range {lo}..{hi}")));
        }
        return Ok((lo..=hi).collect());
    }
    let seeds: std::result::Result<Vec<u64>, _> =
        text.split(',').map(|s| s.trim().parse::<u64>()).collect();
    let seeds = seeds.map_err(|_| bad(format!("bad seed list '{text}'")))?;
    if seeds.is_empty() {
        return Err(bad("no seeds given".to_string()));
    }
    Ok(seeds)
}

/// Parses a platoon list file: CSV rows
/// `id,origin,weight,size,headway,arrival_time,initial_speed` with an
/// optional header and `#` comments.
pub fn parse_platoon_file(text: &str, cfg: &ScenarioConfig) -> Result<Vec<Platoon>> {
    let mut platoons = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with("id,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let id: u32 = fields[0]
            .parse()
            .map_err(|_| err(format!("bad id '{}'", fields[0])))?;
        let origin = fields[1]
            .parse()
            .map_err(|e: String| err(e))?;
        let weight: f64 = fields[2]
            .parse()
            .map_err(|_| err(format!("bad weight '{}'", fields[2])))?;
        let size: u32 = fields[3]
            .parse()
            .map_err(|_| err(format!("bad size '{}'", fields[3])))?;
        let headway: f64 = fields[4]
            .parse()
            .map_err(|_| err(format!("bad headway '{}'", fields[4])))?;
        let arrival: f64 = fields[5]
            .parse()
            .map_err(|_| err(format!("bad arrival_time '{}'", fields[5])))?;
        let speed: f64 = fields[6]
            .parse()
            .map_err(|_| err(format!("bad initial_speed '{}'", fields[6])))?;
        let platoon = Platoon::new(id, origin, weight, size, headway, arrival, speed, &cfg.geometry)
            .map_err(|e| err(e.to_string()))?;
        platoons.push(platoon);
    }
    if platoons.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no platoon rows found".to_string(),
        });
    }
    Ok(platoons)
}

fn load_validated_scenario(path: &Path) -> std::result::Result<ScenarioConfig, i32> {
    let cfg = match load_scenario(path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error loading scenario {}: {e}", path.display());
            return Err(EXIT_CONFIG);
        }
    };
    let report = validate_scenario(&cfg);
    if !report.is_valid() {
        eprint!("{report}");
        return Err(EXIT_CONFIG);
    }
    Ok(cfg)
}

fn scenario_or_default(path: Option<&Path>) -> std::result::Result<ScenarioConfig, i32> {
    match path {
        Some(p) => load_validated_scenario(p),
        None => Ok(ScenarioConfig::paper_experiment()),
    }
}

fn write_run_files(
    req: &RunRequest,
    label: &str,
    seed: u64,
    log: &RunLog,
    metrics: &RunMetrics,
) -> Result<()> {
    let dir = &req.output_dir;
    std::fs::write(
        dir.join(format!("events_{label}_seed{seed}.csv")),
        log.events_to_csv(),
    )?;
    if req.emit_trajectories {
        std::fs::write(
            dir.join(format!("trajectories_{label}_seed{seed}.csv")),
            log.samples_to_csv(),
        )?;
    }
    std::fs::write(
        dir.join(format!("metrics_{label}_seed{seed}.json")),
        metrics.to_json(),
    )?;
    std::fs::write(
        dir.join(format!("metrics_{label}_seed{seed}.csv")),
        metrics.to_csv(),
    )?;
    Ok(())
}

/// Runs the requested policies over every seed and writes per-seed files
/// plus, for `Policy::Both`, a seed-averaged comparison report.
pub fn cmd_run(req: &RunRequest) -> i32 {
    let cfg = match load_validated_scenario(&req.scenario_path) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    if req.seeds.is_empty() {
        eprintln!("no seeds requested");
        return EXIT_CONFIG;
    }
    if let Err(e) = std::fs::create_dir_all(&req.output_dir) {
        eprintln!("cannot create output dir {}: {e}", req.output_dir.display());
        return EXIT_CONFIG;
    }

    let mut proposed_metrics = Vec::new();
    let mut baseline_metrics = Vec::new();
    for &seed in &req.seeds {
        let mut seeded = cfg.clone();
        seeded.rng_seed = seed;
        if req.policy.runs_proposed() {
            match run_proposed(&seeded).and_then(|log| {
                let m = compute_metrics(&log, &seeded)?;
                write_run_files(req, "proposed", seed, &log, &m)?;
                Ok(m)
            }) {
                Ok(m) => proposed_metrics.push(m),
                Err(e) => {
                    eprintln!("proposed run failed (seed {seed}): {e}");
                    return EXIT_SIM;
                }
            }
        }
        if req.policy.runs_baseline() {
            match run_baseline(&seeded).and_then(|log| {
                let m = compute_metrics(&log, &seeded)?;
                write_run_files(req, "baseline", seed, &log, &m)?;
                Ok(m)
            }) {
                Ok(m) => baseline_metrics.push(m),
                Err(e) => {
                    eprintln!("baseline run failed (seed {seed}): {e}");
                    return EXIT_SIM;
                }
            }
        }
    }

    if req.policy == Policy::Both {
        let proposed = RunMetrics::mean_of(&proposed_metrics);
        let baseline = RunMetrics::mean_of(&baseline_metrics);
        let report = compare_runs(&proposed, &baseline);
        if let Err(e) = std::fs::write(req.output_dir.join("comparison.csv"), report.to_csv()) {
            eprintln!("cannot write comparison report: {e}");
            return EXIT_SIM;
        }
        print!("{report}");
    }
    EXIT_OK
}

/// Builds and prints the schedule (CSV plus the total weighted completion
/// time) for a platoon list file.
pub fn cmd_schedule(platoon_file: &Path, scenario: Option<&Path>) -> i32 {
    let cfg = match scenario_or_default(scenario) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let text = match std::fs::read_to_string(platoon_file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", platoon_file.display());
            return EXIT_CONFIG;
        }
    };
    let platoons = match parse_platoon_file(&text, &cfg) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = build_schedule(&platoons, &cfg.geometry, cfg.safe_time_gap, 0.0, 0.0)
        .and_then(|schedule| {
            let csv = schedule_to_csv(&schedule, &platoons, &cfg.geometry, cfg.safe_time_gap)?;
            let t_wc = total_weighted_completion(&schedule, &platoons, 0.0)?;
            Ok((csv, t_wc))
        });
    match outcome {
        Ok((csv, t_wc)) => {
            print!("{csv}");
            println!("T_WC = {t_wc:.6}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
    }
}

/// Compares the ratio-rule schedule against the brute-force optimum for a
/// platoon list file (diagnostic: mismatches exit 0).
pub fn cmd_oracle(platoon_file: &Path, scenario: Option<&Path>) -> i32 {
    let cfg = match scenario_or_default(scenario) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let text = match std::fs::read_to_string(platoon_file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", platoon_file.display());
            return EXIT_CONFIG;
        }
    };
    let platoons = match parse_platoon_file(&text, &cfg) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = (|| -> Result<String> {
        let schedule = build_schedule(&platoons, &cfg.geometry, cfg.safe_time_gap, 0.0, 0.0)?;
        let ratio_rule = total_weighted_completion(&schedule, &platoons, 0.0)?;
        let (best_seq, best) =
            brute_force_best_sequence(&platoons, &cfg.geometry, cfg.safe_time_gap, 0.0, 0.0)?;
        let mut out = String::new();
        writeln!(out, "ratio_rule_T_WC = {ratio_rule:.6}").unwrap();
        writeln!(out, "brute_force_T_WC = {best:.6}").unwrap();
        writeln!(
            out,
            "brute_force_sequence = {}",
            best_seq
                .iter()
                .map(|id| id.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )
        .unwrap();
        let verdict = if (ratio_rule - best).abs() <= 1e-9 {
            "match"
        } else {
            "mismatch"
        };
        writeln!(out, "verdict = {verdict}").unwrap();
        Ok(out)
    })();
    match outcome {
        Ok(report) => {
            print!("{report}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
    }
}

/// Validates a scenario file and prints the report.
pub fn cmd_validate(scenario: &Path) -> i32 {
    let cfg = match load_scenario(scenario) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error loading scenario {}: {e}", scenario.display());
            return EXIT_CONFIG;
        }
    };
    let report = validate_scenario(&cfg);
    print!("{report}");
    if report.is_valid() {
        EXIT_OK
    } else {
        EXIT_CONFIG
    }
}
