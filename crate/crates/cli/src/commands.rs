use std::path::Path;

use monocolor::denoise::denoise_lab;
use monocolor::evalkit::{
    add_mixed_noise, load_dataset, make_pair, procedural_scene, run_benchmark, NoiseParams,
    SceneParams, NOISE_GRID,
};
use monocolor::imagecore::{
    lab_to_rgb, read_plane, read_rgb, rgb_to_lab, write_plane, write_rgb, BitDepth, RgbImage,
    WhitePoint,
};
use monocolor::pipeline::{calibration_pair, write_debug};
use monocolor::sampler::{calibrate_priors, emit_selection_table, selection_table_csv, PriorTable};
use monocolor::{colorize, PipelineConfig};

use crate::{Cli, Command, GlobalArgs, NoiseArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] monocolor::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_escalated() => 1,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(io_err(p)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::read(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.rng_seed = seed;
    }
    if g.no_denoise {
        cfg.pre_denoise = false;
    }
    if g.debug_dir.is_some() {
        cfg.dump_debug = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn noise_params(n: &NoiseArgs, seed: u64) -> Result<Option<NoiseParams>> {
    if !(n.alpha >= 0.0 && n.sigma2 >= 0.0) || !n.alpha.is_finite() || !n.sigma2.is_finite() {
        return Err(CliError::Usage(format!(
            "noise parameters must be finite and nonnegative (alpha {}, sigma2 {})",
            n.alpha, n.sigma2
        )));
    }
    let p = NoiseParams::new(n.alpha, n.sigma2, seed);
    Ok((!p.is_zero()).then_some(p))
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let cfg = load_config(&cli.global)?;
    let seed = cli.global.seed.unwrap_or(0);
    match &cli.command {
        Command::Colorize {
            mono,
            guide,
            output,
            noise,
        } => cmd_colorize(
            &cfg,
            &cli.global,
            mono,
            guide,
            output,
            noise_params(noise, seed)?,
        ),
        Command::Synth {
            output,
            left,
            right,
            scenes,
            height,
            width,
            noise,
        } => match (left, right, scenes) {
            (Some(l), Some(r), _) => cmd_synth_pair(l, r, output, noise_params(noise, seed)?),
            (_, _, Some(n)) => cmd_synth_scenes(*n, *height, *width, seed, output),
            _ => Err(CliError::Usage(
                "synth needs --left and --right, or --scenes".into(),
            )),
        },
        Command::Evaluate {
            dataset,
            output,
            clean_only,
        } => cmd_evaluate(&cfg, dataset, output.as_deref(), *clean_only, seed),
        Command::Calibrate { dataset, output } => cmd_calibrate(&cfg, dataset, output),
        Command::SamplingAnalysis {
            prior,
            n_max,
            t_max,
            output,
        } => cmd_sampling_analysis(prior.as_deref(), *n_max, *t_max, output.as_deref()),
        Command::Denoise {
            input,
            output,
            noise,
        } => cmd_denoise(&cfg, input, output, noise_params(noise, seed)?),
    }
}

fn cmd_colorize(
    cfg: &PipelineConfig,
    g: &GlobalArgs,
    mono_path: &Path,
    guide_path: &Path,
    out_path: &Path,
    noise: Option<NoiseParams>,
) -> Result<()> {
    let mono = read_plane(mono_path)?;
    let guide = read_rgb(guide_path)?;
    let out = colorize(&mono, &guide, cfg, noise.as_ref())?;
    write_rgb(out_path, &out.rgb, BitDepth::Sixteen)?;
    if let Some(dir) = &g.debug_dir {
        create_dir(dir)?;
        write_debug(dir, &mono, &out)?;
    }
    if !out.solve.converged {
        log::warn!(
            "propagation stopped after {} iterations at residual {:.3e}",
            out.solve.iterations,
            out.solve.residual
        );
    }
    println!(
        "scribble_s={:.3} propagate_s={:.3} total_s={:.3} valid={:.4} seeds={} skipped_levels={} solver_iterations={}",
        out.timings.scribble.as_secs_f64(),
        out.timings.propagate.as_secs_f64(),
        out.timings.total.as_secs_f64(),
        out.valid_fraction(),
        out.seeds.seeds.len(),
        out.seeds.skipped.len(),
        out.solve.iterations
    );
    Ok(())
}

fn cmd_synth_pair(left: &Path, right: &Path, out: &Path, noise: Option<NoiseParams>) -> Result<()> {
    let pair = make_pair(&read_rgb(left)?, &read_rgb(right)?)?;
    let guide = match &noise {
        Some(p) => add_mixed_noise(&pair.guide, p),
        None => pair.guide.clone(),
    };
    create_dir(out)?;
    write_plane(out.join("mono.png"), &pair.mono, BitDepth::Sixteen)?;
    write_rgb(out.join("guide.png"), &guide, BitDepth::Sixteen)?;
    write_rgb(out.join("truth.png"), &pair.truth, BitDepth::Sixteen)?;
    Ok(())
}

fn cmd_synth_scenes(n: usize, height: usize, width: usize, seed: u64, out: &Path) -> Result<()> {
    if n == 0 {
        return Err(CliError::Usage("--scenes must be positive".into()));
    }
    for i in 0..n {
        let scene = procedural_scene(&SceneParams {
            height,
            width,
            seed: seed + i as u64,
            ..SceneParams::default()
        });
        let dir = out.join(&scene.name);
        create_dir(&dir)?;
        write_rgb(dir.join("view_left.png"), &scene.left, BitDepth::Eight)?;
        write_rgb(dir.join("view_right.png"), &scene.right, BitDepth::Eight)?;
    }
    Ok(())
}

fn cmd_evaluate(
    cfg: &PipelineConfig,
    dataset: &Path,
    output: Option<&Path>,
    clean_only: bool,
    seed: u64,
) -> Result<()> {
    let pairs = load_dataset(dataset)?;
    if pairs.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no complete scenes",
            dataset.display()
        )));
    }
    let grid: &[(f64, f64)] = if clean_only {
        &NOISE_GRID[..1]
    } else {
        &NOISE_GRID
    };
    let summary = run_benchmark(&pairs, cfg, grid, seed)?;
    write_text(output, &summary.to_csv())
}

fn cmd_calibrate(cfg: &PipelineConfig, dataset: &Path, output: &Path) -> Result<()> {
    let pairs = load_dataset(dataset)?;
    let prepared = pairs
        .iter()
        .map(|p| calibration_pair(&make_pair(&p.left, &p.right)?, cfg))
        .collect::<monocolor::Result<Vec<_>>>()?;
    let prior = calibrate_priors(&prepared, &cfg.matching, &cfg.geometry, &cfg.jnd)?;
    prior.write(output)?;
    Ok(())
}

fn cmd_sampling_analysis(
    prior: Option<&Path>,
    n_max: usize,
    t_max: usize,
    output: Option<&Path>,
) -> Result<()> {
    let prior = match prior {
        Some(p) => PriorTable::read(p)?,
        None => PriorTable::shipped(),
    };
    if n_max == 0 || t_max == 0 || n_max > prior.pool() {
        return Err(CliError::Usage(format!(
            "--n-max must lie in 1..={} and --t-max must be positive",
            prior.pool()
        )));
    }
    let rows = emit_selection_table(&prior, 1..=n_max, 1..=t_max);
    write_text(output, &selection_table_csv(&rows))
}

fn cmd_denoise(
    cfg: &PipelineConfig,
    input: &Path,
    output: &Path,
    noise: Option<NoiseParams>,
) -> Result<()> {
    let rgb = read_rgb(input)?;
    let lab = rgb_to_lab(&rgb, WhitePoint::D65)?;
    let out = denoise_lab(&lab, &cfg.denoise, noise.as_ref(), cfg.rng_seed)?;
    if out.passthrough {
        log::warn!(
            "{}: image smaller than one patch; written unchanged",
            input.display()
        );
    }
    let mut rgb: RgbImage = lab_to_rgb(&out.image, WhitePoint::D65)?;
    for p in rgb.planes_mut() {
        p.clamp01();
    }
    write_rgb(output, &rgb, BitDepth::Sixteen)?;
    Ok(())
}
