use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use platoon_merge::cli::{
    cmd_oracle, cmd_run, cmd_schedule, cmd_validate, parse_seeds, Policy, RunRequest, EXIT_CONFIG,
};

#[derive(Parser)]
#[command(
    name = "platoon-merge",
    about = "Schedule and simulate cooperative platoon merging at a highway on-ramp"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the proposed and/or baseline policy over one or more seeds.
    Run {
        /// Scenario file (flat key = value).
        #[arg(long)]
        scenario: PathBuf,
        /// proposed, baseline, or both.
        #[arg(long, default_value = "proposed")]
        policy: String,
        /// Seed list: `7`, `1,2,9`, or inclusive range `1..20`.
        #[arg(long, default_value = "1")]
        seeds: String,
        /// Directory for per-seed output files.
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
        /// Also write the (large) per-vehicle trajectory CSVs.
        #[arg(long)]
        emit_trajectories: bool,
    },
    /// Print the merge schedule for a platoon list file.
    Schedule {
        /// CSV rows: id,origin,weight,size,headway,arrival_time,initial_speed.
        platoon_file: PathBuf,
        /// Scenario supplying geometry and the safe time gap.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Compare the ratio-rule schedule against brute force (<= 9 platoons).
    Oracle {
        platoon_file: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Check a scenario file against every invariant.
    Validate { scenario: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenario,
            policy,
            seeds,
            output_dir,
            emit_trajectories,
        } => {
            let policy: Policy = match policy.parse() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            };
            let seeds = match parse_seeds(&seeds) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            };
            cmd_run(&RunRequest {
                scenario_path: scenario,
                policy,
                seeds,
                output_dir,
                emit_trajectories,
            })
        }
        Command::Schedule {
            platoon_file,
            scenario,
        } => cmd_schedule(&platoon_file, scenario.as_deref()),
        Command::Oracle {
            platoon_file,
            scenario,
        } => cmd_oracle(&platoon_file, scenario.as_deref()),
        Command::Validate { scenario } => cmd_validate(&scenario),
    };
    ExitCode::from(code as u8)
}
