//! Command-line front end of the colorization pipeline.
//!
//! Exit codes: 0 success, 1 warning escalated by strict mode, 2 I/O or
//! argument error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "monocolor",
    version,
    about = "Guided colorization of a monochrome image from a nearby color view"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Pipeline configuration file (flat `key = value`, `#` comments).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Seed for the denoiser and for synthetic noise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Skip guidance pre-denoising.
    #[arg(long, global = true)]
    pub no_denoise: bool,
    /// Write status maps, scribbles, seeds and the prepared guidance here.
    #[arg(long, global = true, value_name = "DIR")]
    pub debug_dir: Option<PathBuf>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

/// Known mixed noise `α·v + σ²` of the guidance.
#[derive(Debug, Clone, Copy, Args)]
pub struct NoiseArgs {
    /// Signal-dependent noise variance factor α.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Signal-independent noise variance σ².
    #[arg(long, default_value_t = 0.0)]
    pub sigma2: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Colorize a monochrome target from a color guidance image.
    Colorize {
        mono: PathBuf,
        guide: PathBuf,
        #[arg(short, long, value_name = "PNG")]
        output: PathBuf,
        /// Noise known to be present in the guidance, used by the denoiser.
        #[command(flatten)]
        noise: NoiseArgs,
    },
    /// Prepare colorization inputs from a stereo pair or render procedural scenes.
    Synth {
        #[arg(short, long, value_name = "DIR")]
        output: PathBuf,
        /// Left view (target and ground truth).
        #[arg(long, requires = "right", conflicts_with = "scenes")]
        left: Option<PathBuf>,
        /// Right view (guidance).
        #[arg(long, requires = "left")]
        right: Option<PathBuf>,
        /// Render this many procedural scenes in dataset layout instead.
        #[arg(long, required_unless_present = "left")]
        scenes: Option<usize>,
        #[arg(long, default_value_t = 555)]
        height: usize,
        #[arg(long, default_value_t = 660)]
        width: usize,
        /// Noise added to the guidance of a prepared pair.
        #[command(flatten)]
        noise: NoiseArgs,
    },
    /// Benchmark a dataset of `<scene>/view_left.png` + `<scene>/view_right.png`.
    Evaluate {
        dataset: PathBuf,
        /// CSV destination; standard output when absent.
        #[arg(short, long, value_name = "CSV")]
        output: Option<PathBuf>,
        /// Only the noise-free setting instead of the standard noise grid.
        #[arg(long)]
        clean_only: bool,
    },
    /// Fit the sampling priors on a dataset with unsampled matching.
    Calibrate {
        dataset: PathBuf,
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Tabulate valid-match probability and confidence over (N, T).
    SamplingAnalysis {
        /// Prior file; the shipped prior when absent.
        #[arg(long, value_name = "FILE")]
        prior: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        n_max: usize,
        #[arg(long, default_value_t = 16)]
        t_max: usize,
        /// CSV destination; standard output when absent.
        #[arg(short, long, value_name = "CSV")]
        output: Option<PathBuf>,
    },
    /// Denoise a color image with randomized redundant DCT thresholding.
    Denoise {
        input: PathBuf,
        output: PathBuf,
        /// Known noise; estimated from the image when both are zero.
        #[command(flatten)]
        noise: NoiseArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
