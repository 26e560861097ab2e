//! Command-line runner for the zebris trading simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zebris_core::clearing::{brute_force_clear, dp_clear, quantize_resources, random_grid_instance};
use zebris_core::harness::{run_plan, RunPlan};
use zebris_core::invariants;
use zebris_core::market::ScenarioConfig;

#[derive(Parser)]
#[command(name = "zebris", version, about = "Zero-trust bilateral edge-service trading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment plan and write summary, audit, and posture files.
    Run {
        /// Plan TOML file; the built-in default plan is used when omitted.
        plan: Option<PathBuf>,
        /// Override the plan's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the plan's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict to these mechanisms (repeatable).
        #[arg(long = "mechanism")]
        mechanisms: Vec<String>,
        /// Restrict to these buyer-pool sizes (repeatable).
        #[arg(long = "buyers")]
        buyer_pools: Vec<usize>,
        /// Override episodes per cell.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Parse and validate a plan or scenario file without running anything.
    Validate {
        file: PathBuf,
    },
    /// Differential test: DP clearing against the brute-force oracle on
    /// random on-grid instances.
    Oracle {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        max_buyers: usize,
        #[arg(long, default_value_t = 3)]
        max_sellers: usize,
    },
    /// Check settlement invariants over a trades audit log.
    Check {
        audit: PathBuf,
        /// Deposit-cap ratio the log was produced under.
        #[arg(long, default_value_t = 0.4)]
        lambda: f64,
        /// Apply midpoint checks to raw-priced mechanisms too.
        #[arg(long)]
        all: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { plan, seed, out, mechanisms, buyer_pools, episodes } => {
            let mut plan = match plan {
                Some(path) => RunPlan::load(&path).with_context(|| format!("loading {}", path.display()))?,
                None => RunPlan::default(),
            };
            if let Some(seed) = seed {
                plan.base_seed = seed;
            }
            if let Some(out) = out {
                plan.output_dir = out;
            }
            if !mechanisms.is_empty() {
                plan.mechanisms = mechanisms;
            }
            if !buyer_pools.is_empty() {
                plan.buyer_pool_sizes = buyer_pools;
            }
            if let Some(episodes) = episodes {
                plan.episodes_per_cell = episodes;
            }
            let report = run_plan(&plan).context("running plan")?;
            println!("ran {} episodes", report.episodes_run);
            println!("summary: {}", report.summary_csv.display());
            println!("summary: {}", report.summary_json.display());
            if let Some(audit) = &report.audit_csv {
                println!("audit:   {}", audit.display());
            }
            println!("posture: {}", report.postures_csv.display());
            println!("config:  {}", report.resolved_config.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { file } => match RunPlan::load(&file) {
            Ok(plan) => {
                println!(
                    "ok: plan with {} mechanism(s), {} pool size(s), {} episode(s) per cell",
                    plan.mechanisms.len(),
                    plan.buyer_pool_sizes.len(),
                    plan.episodes_per_cell
                );
                Ok(ExitCode::SUCCESS)
            }
            Err(plan_err) => match ScenarioConfig::load(&file) {
                Ok(scenario) => {
                    println!(
                        "ok: scenario with {} seller(s), horizon {}, pool {}",
                        scenario.num_sellers, scenario.horizon, scenario.buyer_pool_size
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(scenario_err) => {
                    eprintln!("not a valid plan: {plan_err}");
                    eprintln!("not a valid scenario: {scenario_err}");
                    Ok(ExitCode::FAILURE)
                }
            },
        },
        Command::Oracle { instances, seed, max_buyers, max_sellers } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut mismatches = 0usize;
            for index in 0..instances {
                let (pairs, sellers) = random_grid_instance(&mut rng, max_buyers, max_sellers);
                let instance = quantize_resources(&pairs, &sellers, (1.0, 1.0))?;
                let dp = dp_clear(&instance, 10_000_000)?;
                let brute = brute_force_clear(&pairs, &sellers)?;
                if dp.welfare != brute.welfare {
                    mismatches += 1;
                    eprintln!(
                        "instance {index}: dp welfare {} != brute-force welfare {}",
                        dp.welfare, brute.welfare
                    );
                }
            }
            if mismatches == 0 {
                println!("{instances} instances: dp and brute-force welfare agree exactly");
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{mismatches} of {instances} instances disagree");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Check { audit, lambda, all } => {
            let violations = invariants::check_file(&audit, lambda, all)
                .with_context(|| format!("checking {}", audit.display()))?;
            if violations.is_empty() {
                println!("ok: no violations in {}", audit.display());
                Ok(ExitCode::SUCCESS)
            } else {
                for violation in violations.iter().take(20) {
                    eprintln!("{violation}");
                }
                if violations.len() > 20 {
                    eprintln!("... and {} more", violations.len() - 20);
                }
                eprintln!("{} violation(s) found", violations.len());
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
