//! Command-line front end: single runs, Monte-Carlo batches, weight sweeps
//! and the optimizer-versus-oracle check.

use clap::{Parser, Subcommand};
use searchtrack::runner::{self, persist, RunnerError, Scenario};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "searchtrack", version, about = "Multi-agent joint search-and-track simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, ospa.csv, searchgrid_<k>.csv
    /// and summary.json
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run Monte-Carlo trials and write mc.csv, ospa.csv and summary.json
    Mc {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trials: usize,
        /// seed of trial 0; trial t uses seed_base + t
        #[arg(long)]
        seed_base: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Solve the single-step decision at fixed geometry for each weight
    SweepW {
        #[arg(long)]
        scenario: PathBuf,
        /// comma-separated weights in [0,1]
        #[arg(long, value_delimiter = ',', required = true)]
        w_list: Vec<f64>,
        /// also write sweep.csv into this directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the genetic algorithm against exhaustive enumeration on
    /// randomized instances
    OracleCheck {
        #[arg(long, default_value_t = 2)]
        agents: usize,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
    },
}

fn load_scenario(path: &PathBuf) -> Result<Scenario, RunnerError> {
    Scenario::load(path).map_err(RunnerError::InvalidScenario)
}

fn run(cli: Cli) -> Result<(), RunnerError> {
    match cli.command {
        Command::Run { scenario, seed, out } => {
            let mut sc = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            let result = runner::run_scenario(&sc)?;
            std::fs::create_dir_all(&out)?;
            persist::write_trace_csv(&out.join("trace.csv"), &result.records)?;
            let ospa_series = searchtrack::metrics::SeriesStats {
                mean: result.records.iter().map(|r| r.ospa).collect(),
                std: vec![0.0; result.records.len()],
            };
            persist::write_ospa_csv(&out.join("ospa.csv"), &ospa_series)?;
            for (k, grid) in &result.grids {
                persist::write_grid_csv(&out.join(format!("searchgrid_{k}.csv")), grid)?;
            }
            persist::write_summary_json(
                &out.join("summary.json"),
                &sc,
                serde_json::json!({ "command": "run", "steps": result.records.len() }),
            )?;
            println!("run complete: {} steps -> {}", result.records.len(), out.display());
            Ok(())
        }
        Command::Mc { scenario, trials, seed_base, out } => {
            let sc = load_scenario(&scenario)?;
            let base = seed_base.unwrap_or(sc.seed);
            let mc = runner::run_monte_carlo(&sc, trials, base)?;
            std::fs::create_dir_all(&out)?;
            persist::write_mc_csv(&out.join("mc.csv"), &mc)?;
            persist::write_ospa_csv(&out.join("ospa.csv"), &mc.ospa)?;
            persist::write_summary_json(
                &out.join("summary.json"),
                &sc,
                serde_json::json!({ "command": "mc", "trials": trials, "seed_base": base }),
            )?;
            println!("mc complete: {trials} trials -> {}", out.display());
            Ok(())
        }
        Command::SweepW { scenario, w_list, out } => {
            let sc = load_scenario(&scenario)?;
            let sweep = runner::sweep_w(&sc, &w_list)?;
            println!("w per-agent modes (search cost / track cost / combined)");
            for e in &sweep.entries {
                let modes: Vec<String> = e.modes.iter().map(|m| m.to_string()).collect();
                println!(
                    "{:<6} {} ({:.4} / {:.4} / {:.4})",
                    e.w,
                    modes.join(" "),
                    e.values.search_cost,
                    e.values.track_cost,
                    e.values.combined
                );
            }
            if let Some(out) = out {
                std::fs::create_dir_all(&out)?;
                persist::write_sweep_csv(&out.join("sweep.csv"), &sweep)?;
            }
            Ok(())
        }
        Command::OracleCheck { agents, seeds, base_seed } => {
            let report = runner::oracle_check(agents, seeds, base_seed)?;
            for c in &report.cases {
                println!(
                    "seed {:<6} ga {:.6} exhaustive {:.6} gap {:+.2e} {}",
                    c.seed,
                    c.ga_combined,
                    c.exhaustive_combined,
                    c.gap,
                    if c.exact_match { "exact" } else { "approx" }
                );
            }
            println!(
                "{} seeds: max gap {:.2e}, exact match {:.1}%",
                report.cases.len(),
                report.max_gap,
                100.0 * report.exact_fraction
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
