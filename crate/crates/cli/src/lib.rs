//! The `speccon` command-line tool.
//!
//! Every subcommand resolves its settings in the same order: an explicit flag
//! wins, then a key of the `--config` file, then the built-in default. The
//! worker count additionally honors `SPECCON_THREADS` as a stand-in for
//! `--threads`.
//!
//! | key          | flag           | default                      |
//! |--------------|----------------|------------------------------|
//! | `method`     | `--method`     | `sc`                         |
//! | `scales`     | `--scales`     | `3,5,7`                      |
//! | `alpha`      | `--alpha`      | `0.5`                        |
//! | `prefilter`  | `--prefilter`  | none                         |
//! | `low`        | `--low`        | `0.1`                        |
//! | `high`       | `--high`       | `0.3`                        |
//! | `sigma`      | `--sigma`      | `1.414214` (Canny smoothing) |
//! | `beta`       | `--beta`       | `1/9`                        |
//! | `tol`        | `--tol`        | 0.75% of the image diagonal  |
//! | `thresholds` | `--thresholds` | `20`                         |
//! | `threads`    | `--threads`    | available cores              |

mod commands;
mod error;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, EXIT_COMPUTE, EXIT_IO, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "speccon",
    version,
    about = "Spectrum congruency edge detection"
)]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "SPECCON_THREADS")]
    threads: Option<usize>,

    /// Flat `key = value` file supplying defaults for unset flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute an edge-strength map (sc) or an edge map (canny).
    Detect(DetectArgs),
    /// Thin a strength map and threshold it into an edge map.
    Thin(ThinArgs),
    /// Score detections against ground truth.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Render the synthetic shapes scene with Gaussian noise.
    Synth(SynthArgs),
    /// Time the strength-map computation.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Default)]
struct DetectorFlags {
    /// Detector: `sc` or `canny`.
    #[arg(long)]
    method: Option<String>,
    /// Odd patch sides (`3,5,7`) or a preset (`fine`, `wide-gap`, `medium`, `coarse`).
    #[arg(long)]
    scales: Option<String>,
    /// Noise-threshold multiplier.
    #[arg(long)]
    alpha: Option<f64>,
    /// Gaussian prefilter as `WINDOW:SIGMA`, e.g. `7:3.5`.
    #[arg(long)]
    prefilter: Option<String>,
    /// Canny smoothing sigma.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Lossless float sidecar for the strength map (sc only).
    #[arg(long)]
    raw: Option<PathBuf>,
    #[command(flatten)]
    detector: DetectorFlags,
    /// Canny low threshold, relative to the strongest gradient.
    #[arg(long)]
    low: Option<f64>,
    /// Canny high threshold, relative to the strongest gradient.
    #[arg(long)]
    high: Option<f64>,
}

#[derive(Debug, Args)]
struct ThinArgs {
    /// Strength map (`.pgm`, `.png` or `.scf`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    low: Option<f64>,
    #[arg(long)]
    high: Option<f64>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Pratt's figure of merit.
    Fom {
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Precision, recall and F-measure under a matching tolerance.
    Prf {
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Matching tolerance in pixels.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Threshold sweep over a dataset with `images/` and `gt/` folders.
    Curve {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        thresholds: Option<usize>,
        /// Destination of the precision/recall CSV.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        detector: DetectorFlags,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    /// Noise standard deviation on the 0-255 scale.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    gt: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 5)]
    iters: usize,
    #[command(flatten)]
    detector: DetectorFlags,
}

/// Runs the tool with process stdout and stderr. `argv[0]` is the program name.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the tool against arbitrary output streams and returns the exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match commands::dispatch(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}
