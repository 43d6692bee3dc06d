//! `spoofguard`: drives the detection pipeline from a JSON run config.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 internal error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use spoofguard::config::RunConfig;
use spoofguard::pipeline::{self, Layout};

#[derive(Debug, Parser)]
#[command(
    name = "spoofguard",
    version,
    about = "GPS spoofing detection with a learned DD threshold"
)]
struct Cli {
    /// JSON run config; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root for traces, models and reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a clean synthetic trace.
    Synth {
        /// Trace length in seconds.
        #[arg(long, value_parser = positive_f64)]
        duration: Option<f64>,
    },
    /// Build the labeled attack scenarios from the clean trace.
    Inject,
    /// Train the distance predictor on the clean trace.
    TrainPredictor {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        epochs: Option<u64>,
    },
    /// Train the threshold agent on one scenario.
    TrainAgent {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        train_scenario: Option<u64>,
        /// Environment steps.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        steps: Option<u64>,
    },
    /// Run the trained detector over one trace.
    Detect {
        #[arg(long)]
        trace: PathBuf,
        /// Detection CSV; defaults to `<reports>/detect.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score every held-out scenario.
    Evaluate,
    /// All stages in order.
    Run,
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{s} is not a positive number"))
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Synth { duration: Some(d) } => cfg.synth.duration_s = *d,
        Command::TrainPredictor { epochs: Some(e) } => cfg.predictor.epochs = *e as usize,
        Command::TrainAgent {
            train_scenario,
            steps,
        } => {
            if let Some(s) = train_scenario {
                cfg.eval.train_scenario = *s as usize;
            }
            if let Some(s) = steps {
                cfg.agent.total_steps = *s as usize;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    let layout = Layout::new(&cli.out, &cfg);

    match cli.command {
        Command::Synth { .. } => {
            let path = pipeline::synth(&cfg, &layout)?;
            println!("wrote {}", path.display());
        }
        Command::Inject => {
            let manifest = pipeline::inject(&cfg, &layout)?;
            println!(
                "wrote {} scenarios and {}",
                manifest.scenarios.len(),
                layout.manifest().display()
            );
        }
        Command::TrainPredictor { .. } => {
            let report = pipeline::train_predictor_stage(&cfg, &layout)?;
            println!(
                "predictor: rmse {:.6} m, max error {:.6} m over {} held-out steps",
                report.rmse_m, report.max_abs_error_m, report.samples
            );
        }
        Command::TrainAgent { .. } => {
            let agent = pipeline::train_agent_stage(&cfg, &layout)?;
            println!(
                "agent: threshold {:.4} m after {} episode(s)",
                agent.threshold_m,
                agent.reward_history.len()
            );
        }
        Command::Detect { trace, output } => {
            let output = output.unwrap_or_else(|| layout.reports.join("detect.csv"));
            let series = pipeline::detect(&cfg, &layout, &trace, &output)?;
            let flagged = series.samples.iter().filter(|s| s.flagged).count();
            println!(
                "{flagged} of {} steps flagged; wrote {}",
                series.samples.len(),
                output.display()
            );
        }
        Command::Evaluate => {
            let report = pipeline::evaluate(&cfg, &layout)?;
            print!("{}", report.to_csv());
        }
        Command::Run => {
            let summary = pipeline::run_all(&cfg, &cli.out).context("pipeline failed")?;
            println!("threshold {:.4} m", summary.agent.threshold_m);
            print!("{}", summary.report.to_csv());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<spoofguard::Error>() {
        Some(e) if e.is_data_error() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
