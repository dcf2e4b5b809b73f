//! Thin command-line front end over [`trackguard::pipeline`]: parses flags,
//! loads the config, dispatches to one stage driver, and maps error classes
//! to distinct exit codes (2 config, 3 I/O, 4 validation).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use trackguard::config::RunConfig;
use trackguard::error::Error;
use trackguard::evaluation::earliness::DetectionMethod;
use trackguard::pipeline;

#[derive(Parser)]
#[command(
    name = "trackguard",
    version,
    about = "Synthetic two-channel track-circuit diagnostics: dataset generation, \
             window classification, conformal prediction sets, earliness reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration TOML (relative paths inside it resolve against
    /// its directory).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Print the fully resolved configuration to stderr before running.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the dataset (and held-out records) into data_dir.
    Generate,
    /// Train the window classifier; writes the model and a training log.
    Train,
    /// Compute the conformal threshold from the calibration split.
    Calibrate,
    /// Write the evaluation report: confusion, coverage, earliness.
    Evaluate,
    /// Print per-window prediction sets for one record CSV to stdout.
    Predict {
        /// Record CSV to diagnose.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Io { .. } => 3,
        Error::Domain(_) | Error::CsvParse { .. } | Error::Format { .. } => 4,
    }
}

/// True when the failure is a closed stdout (e.g. piping into `head`);
/// that is a normal way for a consumer to stop reading, not an error.
fn is_broken_pipe(e: &Error) -> bool {
    matches!(e, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::BrokenPipe)
}

/// Writes one line to stdout, reporting failures as I/O errors instead of
/// panicking like `println!` does.
fn say(args: std::fmt::Arguments<'_>) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    out.write_fmt(args)
        .and_then(|()| out.write_all(b"\n"))
        .map_err(|e| Error::io(Path::new("<stdout>"), e))
}

macro_rules! say {
    ($($arg:tt)*) => { say(format_args!($($arg)*))? };
}

fn run(cli: Cli) -> Result<(), Error> {
    let config_path = cli
        .config
        .ok_or_else(|| Error::config("--config <PATH> is required"))?;
    let mut config = RunConfig::load(&config_path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    config.resolve_paths(base);
    if cli.verbose {
        eprintln!("# resolved configuration ({})", config_path.display());
        eprint!("{}", config.to_toml_string()?);
    }

    match cli.command {
        Command::Generate => {
            let out = pipeline::cmd_generate(&config)?;
            let held = out
                .held_out_manifest
                .as_ref()
                .map_or(0, |m| m.records.len());
            say!(
                "generated {} records (+{held} held-out) into {}",
                out.manifest.records.len(),
                config.paths.data_dir.display()
            );
        }
        Command::Train => {
            let out = pipeline::cmd_train(&config)?;
            let final_acc = out.log.last().map_or(f64::NAN, |e| e.holdout_accuracy);
            say!(
                "trained {} classes over {} epochs (final holdout accuracy {final_acc:.4})",
                out.model.num_classes(),
                out.log.len()
            );
            say!("model: {}", out.model_path.display());
            say!("training log: {}", out.log_path.display());
        }
        Command::Calibrate => {
            let out = pipeline::cmd_calibrate(&config)?;
            let c = &out.calibration;
            say!(
                "calibrated: alpha={} n_cal={} q_hat={} saturated={}",
                c.alpha, c.n_cal, c.q_hat, c.saturated
            );
            say!("calibration: {}", out.calib_path.display());
        }
        Command::Evaluate => {
            let bundle = pipeline::cmd_evaluate(&config)?;
            say!(
                "accuracy={:.4} marginal_coverage={:.4} mean_set_size={:.4} empty_set_rate={:.4}",
                bundle.overall_accuracy,
                bundle.marginal_coverage,
                bundle.average_set_size,
                bundle.empty_set_rate
            );
            if let (Some(model), Some(threshold)) = (
                bundle.earliness.mean_earliness(DetectionMethod::Model),
                bundle.earliness.mean_earliness(DetectionMethod::Threshold),
            ) {
                say!(
                    "mean earliness: model={model:.2}% threshold_baseline={threshold:.2}%"
                );
            }
            if let Some(novelty) = &bundle.novelty {
                say!(
                    "held-out empty-set rate {:.4} ({:.1}x in-distribution)",
                    novelty.held_out_empty_set_rate,
                    novelty.ratio_over(bundle.empty_set_rate)
                );
            }
            say!("report: {}", config.paths.report_dir.display());
        }
        Command::Predict { input } => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            pipeline::cmd_predict(&config, &input, &mut out)?;
            out.flush().map_err(|e| Error::io(Path::new("<stdout>"), e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
