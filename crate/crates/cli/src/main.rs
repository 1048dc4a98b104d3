//! `tactovis`: generate a synthetic dataset, train, evaluate, and plot.
//!
//! Failures print one line, `error: code=N kind=K message`, and exit with
//! `N`: 2 for bad configuration, 3 for missing data, 4 for numeric failure,
//! 1 otherwise.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tactovis::data::Direction;
use tactovis::experiment::{
    eval_experiment, generate_dataset, plot_experiment, train_experiment, EvalSource, ExperimentConfig,
};
use tactovis::train::latest_checkpoint;
use tactovis::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "tactovis", version, about = "Vision/touch cross-modal prediction on synthetic gel data")]
struct Cli {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output location of the command (dataset, run, or report directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render train, seen and unseen splits.
    Gen {
        /// Replace an existing dataset.
        #[arg(long)]
        force: bool,
    },
    /// Train a generator/discriminator pair.
    Train {
        /// Dataset directory.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_direction)]
        direction: Option<Direction>,
        /// Zero the reference images.
        #[arg(long)]
        no_reference: bool,
        /// Sample frames uniformly.
        #[arg(long)]
        no_rebalance: bool,
        /// Repeat frame t instead of using the temporal window.
        #[arg(long)]
        no_temporal: bool,
        #[arg(long)]
        steps: Option<u64>,
        /// Continue from a checkpoint, or from the run's latest one.
        #[arg(long, num_args = 0..=1)]
        resume: Option<Option<PathBuf>>,
    },
    /// Score a checkpoint on the seen and unseen splits.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Checkpoint file; defaults to the latest one of the run.
        #[arg(long, conflicts_with = "ground_truth")]
        checkpoint: Option<PathBuf>,
        /// Run directory to take the latest checkpoint from.
        #[arg(long)]
        run: Option<PathBuf>,
        /// Score the ground-truth frames themselves.
        #[arg(long)]
        ground_truth: bool,
    },
    /// Render loss and deformation-curve plots.
    Plot {
        #[arg(long)]
        run: Option<PathBuf>,
        /// Directory holding an evaluation report.
        #[arg(long)]
        eval: Option<PathBuf>,
    },
}

fn parse_direction(s: &str) -> std::result::Result<Direction, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Gen { force } => {
            let out = cli.out.unwrap_or_else(|| cfg.paths.data.clone());
            let m = generate_dataset(&cfg, &out, force)?;
            let counts: Vec<String> = m.splits.iter().map(|(k, v)| format!("{k}={}", v.len())).collect();
            println!("wrote {} ({})", out.display(), counts.join(" "));
        }
        Command::Train {
            data,
            direction,
            no_reference,
            no_rebalance,
            no_temporal,
            steps,
            resume,
        } => {
            if let Some(d) = direction {
                cfg.train.direction = d;
            }
            let opts = &mut cfg.train.options;
            opts.reference &= !no_reference;
            opts.rebalance &= !no_rebalance;
            opts.temporal &= !no_temporal;
            if let Some(s) = steps {
                cfg.train.steps = s;
            }
            let data = data.unwrap_or_else(|| cfg.paths.data.clone());
            let run_dir = cli.out.unwrap_or_else(|| cfg.paths.run.clone());
            let resume = match resume {
                Some(None) => Some(latest_checkpoint(&run_dir)?),
                Some(p) => p,
                None => None,
            };
            let out = train_experiment(&cfg, &data, &run_dir, resume.as_deref())?;
            match out.losses.last() {
                Some(l) => println!(
                    "step {} loss_D {:.4} loss_G_adv {:.4} loss_G_L1 {:.4}",
                    out.final_step, l.loss_d, l.loss_g_adv, l.loss_g_l1
                ),
                None => println!("step {}", out.final_step),
            }
        }
        Command::Eval {
            data,
            checkpoint,
            run,
            ground_truth,
        } => {
            let data = data.unwrap_or_else(|| cfg.paths.data.clone());
            let source = if ground_truth {
                EvalSource::GroundTruth
            } else if let Some(c) = checkpoint {
                EvalSource::Checkpoint(c)
            } else {
                EvalSource::LatestIn(run.unwrap_or_else(|| cfg.paths.run.clone()))
            };
            let out = cli.out.unwrap_or_else(|| cfg.paths.eval.clone());
            let report = eval_experiment(&cfg, &data, &source, &out)?;
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
            for s in &report.splits {
                println!(
                    "{} n={} contact_error={} contact_miss_rate={} marker_error={} location_median={} location_miss_rate={}",
                    s.split,
                    s.sequences,
                    fmt(s.contact_error.mean),
                    fmt(s.contact_miss_rate),
                    fmt(s.marker_error.mean),
                    fmt(s.location_error_median),
                    fmt(s.location_miss_rate)
                );
            }
        }
        Command::Plot { run, eval } => {
            let run = run.unwrap_or_else(|| cfg.paths.run.clone());
            let eval = eval.unwrap_or_else(|| cfg.paths.eval.clone());
            let out = cli.out.unwrap_or_else(|| eval.clone());
            for p in plot_experiment(&run, &eval, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or_default();
            eprintln!("error: code=2 kind=usage {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let one_line = e.to_string().replace('\n', " ");
            eprintln!("error: code={} kind={} {one_line}", e.exit_code(), e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
