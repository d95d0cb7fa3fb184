//! `branchstab` scenario runner.
//!
//! Exit codes: 0 pass, 1 statistical failure, 2 configuration error,
//! 3 numerical-tolerance error, 4 unknown scenario, 5 replay mismatch.

use branchstab::scenario::{list_scenarios, replay_report, run_scenario, ReplayOutcome, ScenarioConfig, REPORT_FILE};
use branchstab::Error;
use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_UNKNOWN: u8 = 4;
const EXIT_REPLAY: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "branchstab", version, about = "Run seeded branching-stability scenarios")]
struct Cli {
    /// Scenario configuration (JSON).
    #[arg(long, value_name = "PATH", required_unless_present_any = ["list", "replay"])]
    config: Option<PathBuf>,

    /// Overrides the seed in the configuration.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Directory for report.json, reports.csv and samples.csv.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Worker threads for replicate generation.
    #[arg(long, value_name = "N", env = "BRANCHSTAB_WORKERS")]
    workers: Option<usize>,

    /// Lists the available scenarios.
    #[arg(long, conflicts_with_all = ["config", "replay"])]
    list: bool,

    /// Re-runs a stored report and checks it is reproduced byte for byte.
    #[arg(long, value_name = "PATH", conflicts_with = "config")]
    replay: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical { .. } | Error::YaglomNotConverged { .. } | Error::TooLarge { .. } => EXIT_NUMERICAL,
        Error::UnknownScenario(_) => EXIT_UNKNOWN,
        _ => EXIT_CONFIG,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    if cli.list {
        print!("{}", list_scenarios());
        return Ok(0);
    }
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(path) = cli.replay {
        let text = std::fs::read_to_string(&path)?;
        return Ok(match replay_report(&text)? {
            ReplayOutcome::Identical => {
                println!("replay identical: {}", path.display());
                0
            }
            ReplayOutcome::Mismatch { first_difference } => {
                eprintln!("replay mismatch: {} differs from a fresh run at byte {first_difference}", path.display());
                EXIT_REPLAY
            }
        });
    }
    let path = cli.config.expect("clap enforces --config");
    let mut cfg = ScenarioConfig::from_path(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = run_scenario(&cfg)?;
    out.write_to(&cli.out)?;
    for r in &out.report.reports {
        println!(
            "{} {}: p={:.4e} (level {:.4})",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.p_value,
            r.alpha_level
        );
    }
    let verdict = match (out.report.passed, out.report.gated) {
        (true, _) => "pass",
        (false, true) => "fail",
        (false, false) => "fail (reported only, not gated)",
    };
    println!("{}: {verdict}; report written to {}", cfg.scenario, cli.out.join(REPORT_FILE).display());
    Ok(out.report.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
