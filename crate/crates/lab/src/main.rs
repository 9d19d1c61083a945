use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xorgd::lab::{self, ExperimentConfig, PredicateOutcome};
use xorgd::NetworkParams;

#[derive(Parser, Debug)]
#[command(name = "lab", version, about = "Run, check and plot XOR gradient-descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train every seed of a preset or config file and write artifacts.
    Run {
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// JSON file mirroring the experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dotted-path override, e.g. `train.alpha=0.05`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated seeds, replacing the config's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Print the resolved config and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Re-evaluate the acceptance predicates of a finished run.
    Check {
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a two-dimensional checkpoint on a grid.
    Grid {
        #[arg(long)]
        checkpoint: PathBuf,
        /// `x0_min,x0_max,x1_min,x1_max`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,2,-2,2")]
        bounds: Vec<f64>,
        #[arg(long, default_value_t = 400)]
        res: usize,
        /// Output prefix; writes `<prefix>.csv` and `<prefix>.svg`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn report(outcomes: &[PredicateOutcome]) -> bool {
    for p in outcomes {
        println!("{} {}: {}", if p.pass { "PASS" } else { "FAIL" }, p.name, p.detail);
    }
    outcomes.iter().all(|p| p.pass)
}

fn resolve(
    preset: Option<String>,
    config: Option<PathBuf>,
    overrides: &[String],
    seeds: Option<Vec<u64>>,
) -> xorgd::Result<ExperimentConfig> {
    let mut cfg = match (preset, config) {
        (_, Some(path)) => ExperimentConfig::load(&path)?,
        (Some(name), None) => lab::preset(&name)?,
        (None, None) => {
            return Err(xorgd::Error::Config(format!(
                "one of --preset or --config is required (presets: {})",
                lab::PRESETS.join(", ")
            )))
        }
    };
    for o in overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seeds) = seeds {
        cfg.seeds = seeds;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn grid(checkpoint: &Path, bounds: &[f64], res: usize, out: Option<PathBuf>) -> xorgd::Result<()> {
    let [x0a, x0b, x1a, x1b] = bounds else {
        return Err(xorgd::Error::Config(format!("--bounds needs 4 values, got {}", bounds.len())));
    };
    let (params, _) = NetworkParams::load_checkpoint(checkpoint)?;
    let grid = lab::decision_boundary_grid(&params, [*x0a, *x0b, *x1a, *x1b], res)?;
    let prefix = out.unwrap_or_else(|| checkpoint.with_extension(""));
    let (csv_path, svg_path) = grid.save(&prefix, None)?;
    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            preset,
            config,
            overrides,
            out,
            seeds,
            dry_run,
        } => resolve(preset, config, &overrides, seeds).and_then(|cfg| {
            if dry_run {
                println!("{}", cfg.to_json_pretty()?);
                return Ok(true);
            }
            let artifacts = lab::run(&cfg, &out)?;
            for m in &artifacts.summary.seeds {
                println!(
                    "seed {}: T={} clean_acc={:?} noisy_acc={:?} test_error={:?}",
                    m.seed, m.iterations, m.final_clean_acc, m.final_noisy_acc, m.test_error
                );
            }
            println!("artifacts in {}", out.display());
            Ok(report(&artifacts.summary.predicates))
        }),
        Command::Check { out } => lab::check(&out).map(|o| report(&o)),
        Command::Grid {
            checkpoint,
            bounds,
            res,
            out,
        } => grid(&checkpoint, &bounds, res, out).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
