use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use stridewise::dataset::Step;
use stridewise::pipeline::{self, Models, RunConfig};

#[derive(Parser)]
#[command(
    name = "stridewise",
    version,
    about = "Running gait event detection from tibial acceleration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainMethod {
    Perceptron,
    Rnn,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic recordings, truth tables and a manifest.
    Generate {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        subjects: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        strides: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one learned method and write the model plus a training log.
    Train {
        #[arg(long, value_enum)]
        method: TrainMethod,
        #[arg(long)]
        config: PathBuf,
        /// Model file; the log goes next to it as `<stem>.log.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run all available methods and write error, summary, curve and timing CSVs.
    Evaluate {
        /// Directory holding perceptron.json and/or rnn.json.
        #[arg(long, required_unless_present = "loo")]
        models: Option<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Restrict evaluation to the config's test subjects (and supply
        /// training settings for --loo).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Leave-one-subject-out: retrain both learned methods per subject.
        #[arg(long, requires = "config")]
        loo: bool,
        /// Subjects held out for early stopping in each --loo fold.
        #[arg(long, default_value_t = 1)]
        loo_validation: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(1)
        }
    }
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn run(command: Command) -> AnyResult<()> {
    match command {
        Command::Generate {
            subjects,
            strides,
            seed,
            out,
        } => {
            let g = pipeline::generate_dataset(&out, subjects as usize, strides as usize, seed)?;
            log::info!(
                "wrote {} recordings and {}",
                g.recordings.len(),
                g.manifest.display()
            );
        }
        Command::Train {
            method,
            config,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let steps = pipeline::load_steps(&cfg.manifest)?;
            let split = cfg.resolve_split(&pipeline::subjects_of(&steps))?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let log_path = out.with_extension("log.json");
            match method {
                TrainMethod::Perceptron => {
                    let (model, log) = pipeline::train_perceptron(&cfg, &steps, &split)?;
                    model.save(&out)?;
                    pipeline::write_json(&log_path, &log)?;
                }
                TrainMethod::Rnn => {
                    let (model, report) = pipeline::train_rnn(&cfg, &steps, &split)?;
                    log::info!(
                        "best epoch {} of {} ({})",
                        report.best_epoch,
                        report.epochs.len(),
                        report.stop_reason
                    );
                    model.save(&out)?;
                    pipeline::write_json(&log_path, &report)?;
                }
            }
            log::info!("wrote {} and {}", out.display(), log_path.display());
        }
        Command::Evaluate {
            models,
            manifest,
            out,
            config,
            loo,
            loo_validation,
        } => {
            let steps = pipeline::load_steps(&manifest)?;
            let cfg = config.as_deref().map(RunConfig::load).transpose()?;
            let ev = if loo {
                let cfg = cfg.expect("clap enforces --config with --loo");
                pipeline::leave_one_subject_out(&cfg, &steps, loo_validation)?
            } else {
                let dir = models.expect("clap enforces --models without --loo");
                let models = Models::load_dir(&dir)?;
                if models.perceptron.is_none() && models.rnn.is_none() {
                    return Err(format!("no model files found in {}", dir.display()).into());
                }
                let steps = match &cfg {
                    Some(cfg) => test_steps(cfg, steps)?,
                    None => steps,
                };
                pipeline::evaluate_steps(&steps, &models)?
            };
            pipeline::write_evaluation(&out, &ev)?;
            report(&out, &ev);
        }
    }
    Ok(())
}

fn test_steps(cfg: &RunConfig, steps: Vec<Step>) -> AnyResult<Vec<Step>> {
    let split = cfg.resolve_split(&pipeline::subjects_of(&steps))?;
    let test: Vec<Step> = steps
        .into_iter()
        .filter(|s| split.test.contains(&s.subject_id))
        .collect();
    if test.is_empty() {
        return Err("the configured test subjects have no steps".into());
    }
    Ok(test)
}

fn report(out: &Path, ev: &pipeline::Evaluation) {
    for row in ev
        .summary
        .iter()
        .filter(|r| r.target == stridewise::eval::Target::Stance)
    {
        log::info!(
            "{:<10} stance MAE {:>7.2} ms, failed {:>5.1}%",
            row.method.as_str(),
            row.mae_ms,
            row.failed_pct
        );
    }
    for t in &ev.timings {
        log::info!("{:<10} {:.2} ms per step", t.method.as_str(), t.mean_ms);
    }
    log::info!("results in {}", out.display());
}
