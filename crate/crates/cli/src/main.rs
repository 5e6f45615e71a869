//! `resilient-opt`: run experiments, export bound curves and check invariants.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use resilient_opt::bounds::{bound_curve, BoundKind};
use resilient_opt::dynamics::Algorithm;
use resilient_opt::harness::check::{run_checks, CheckOptions};
use resilient_opt::harness::{
    compare_distance_to_average, compare_to_bounds, derived_params, gnuplot_script,
    parse_algorithm, report, run_experiment, write_bounds_csv, write_outputs, ExperimentConfig,
    DEFAULT_SLACK_SIGMAS,
};
use resilient_opt::par::Execution;

#[derive(Parser)]
#[command(
    name = "resilient-opt",
    version,
    about = "Trust-based resilient distributed optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo experiment; writes experiment.csv, bounds.csv and distance.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of resilient,nominal,wmsr.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
        #[arg(long)]
        realizations: Option<usize>,
        /// Also write a gnuplot script for the ratio curves.
        #[arg(long)]
        gnuplot: bool,
        /// Run realizations on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Evaluate every bound curve on the config's sample grid.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invariant and domination suite; exits nonzero on any violation.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the Monte Carlo domination experiment.
        #[arg(long)]
        quick: bool,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).with_context(|| format!("loading {}", path.display()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            algorithms,
            realizations,
            gnuplot,
            sequential,
        } => {
            let mut cfg = load(&config)?;
            cfg.seed = seed;
            if let Some(names) = algorithms {
                let f = cfg.algorithms.iter().find_map(|a| match a {
                    Algorithm::Wmsr { f } => Some(*f),
                    _ => None,
                });
                cfg.algorithms = names
                    .iter()
                    .map(|n| parse_algorithm(n, f.unwrap_or(2)))
                    .collect::<Result<_, _>>()?;
            }
            if let Some(n) = realizations {
                cfg.realizations = n;
            }
            if sequential {
                cfg.execution = Execution::Sequential;
            }
            simulate(&cfg, &out, gnuplot)
        }
        Command::Bounds { config, out } => {
            let cfg = load(&config)?;
            let p = derived_params(&cfg)?;
            let mut curves = Vec::new();
            for kind in BoundKind::GAP_BOUNDS.into_iter().chain([BoundKind::DeltaM]) {
                curves.push(bound_curve(kind, &cfg.sample_times, &p)?);
            }
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("bounds.csv");
            write_bounds_csv(&curves, &path)?;
            println!(
                "rho_L = {:.12}  D_L = {}  D_M = {}  G = {}  eta = {}",
                p.rho, p.counts.legitimate, p.counts.malicious, p.g, p.eta
            );
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::Check {
            config,
            seed,
            quick,
        } => {
            let cfg = load(&config)?;
            let opts = CheckOptions {
                domination: !quick,
                seed,
                ..CheckOptions::default()
            };
            let rep = run_checks(&cfg, &opts)?;
            for item in &rep.items {
                println!(
                    "[{}] {:<36} {}",
                    if item.passed { "PASS" } else { "FAIL" },
                    item.name,
                    item.detail
                );
            }
            let failed = rep.failures().count();
            println!("{} checks, {failed} failed", rep.items.len());
            Ok(failed == 0)
        }
    }
}

fn simulate(cfg: &ExperimentConfig, out: &Path, gnuplot: bool) -> Result<bool> {
    let result = run_experiment(cfg)?;
    for path in write_outputs(&result, out)? {
        println!("wrote {}", path.display());
    }
    if gnuplot {
        let names: Vec<&str> = cfg.algorithms.iter().map(|a| a.name()).collect();
        let path = out.join("ratio.gp");
        std::fs::write(&path, gnuplot_script("experiment.csv", &names))
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }

    let mut ok = true;
    for a in &result.algorithms {
        let s = &a.stats;
        print!(
            "{:<10} final mean error ratio {:.6}",
            s.algorithm,
            s.final_ratio()
        );
        if let Some(tf) = a.tf {
            print!(
                "  classified {}/{} (mean T_f {:.1})",
                tf.reached,
                tf.reached + tf.not_reached,
                tf.mean_reached
            );
        }
        if let Some(r) = a.residuals {
            print!("  residual ratio max {:.4}", r.max_ratio);
            ok &= r.max_ratio <= 1.0 + 1e-9;
        }
        println!();
    }
    if let Some(a) = result.get("resilient") {
        let attacked: Vec<_> = result
            .curves
            .iter()
            .filter(|c| c.name != BoundKind::Nominal.name())
            .cloned()
            .collect();
        let mut checks = compare_to_bounds(&a.stats, &attacked, DEFAULT_SLACK_SIGMAS);
        checks.push(compare_distance_to_average(
            &a.stats,
            &result.delta_m,
            DEFAULT_SLACK_SIGMAS,
        ));
        print!("{}", report::summarize(&checks));
    }
    Ok(ok)
}
