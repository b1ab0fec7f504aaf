//! End-to-end colorization and its configuration file.
//!
//! The configuration is a flat `key = value` text file; `#` starts a
//! comment. Unknown keys are errors so typos do not pass silently.
//! Fractions such as `5/255` are accepted wherever a number is expected.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::denoise::{denoise_lab, DenoiseParams};
use crate::error::{Error, Result};
use crate::evalkit::{NoiseParams, SynthPair};
use crate::imagecore::{
    intensity_match, lab_to_rgb, rgb_to_lab, upsample_to, IntensityMode, LabImage, PairGeometry,
    PlaneImage, RgbImage, WhitePoint,
};
use crate::perception::{compute_jnd, JndParams};
use crate::propagation::{propagate, AffinityKernel, PropagationConfig, SolveReport};
use crate::sampler::CalibrationPair;
use crate::scribbler::{
    dense_scribble, write_debug_maps, MatchConfig, PixelStatus, ScribbleMap, SearchDirection,
};
use crate::seeding::{apply_seeds, generate_seeds, seeds_csv, SeedConfig, SeedOutcome};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub matching: MatchConfig,
    pub geometry: PairGeometry,
    pub jnd: JndParams,
    pub seeding: SeedConfig,
    pub propagation: PropagationConfig,
    pub denoise: DenoiseParams,
    pub pre_denoise: bool,
    pub local_intensity_match: bool,
    /// Window side of the local intensity match.
    pub intensity_window: usize,
    pub dump_debug: bool,
    /// Seed of the denoiser's random tilings.
    pub rng_seed: u64,
    /// Treat solver non-convergence as a failure.
    pub strict: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            matching: MatchConfig::default(),
            geometry: PairGeometry::default(),
            jnd: JndParams::default(),
            seeding: SeedConfig::default(),
            propagation: PropagationConfig::default(),
            denoise: DenoiseParams::default(),
            pre_denoise: true,
            local_intensity_match: false,
            intensity_window: 31,
            dump_debug: false,
            rng_seed: 0,
            strict: false,
        }
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: f64 = n.trim().parse().map_err(|e| format!("{e}"))?;
        let d: f64 = d.trim().parse().map_err(|e| format!("{e}"))?;
        if d == 0.0 {
            return Err("division by zero".into());
        }
        return Ok(n / d);
    }
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_f32(s: &str) -> std::result::Result<f32, String> {
    if s.contains('/') {
        return parse_f64(s).map(|v| v as f32);
    }
    s.trim().parse().map_err(|e| format!("{e}"))
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.trim().parse().map_err(|e| format!("{e}"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(format!("expected a boolean, found {other:?}")),
    }
}

impl PipelineConfig {
    pub const KEYS: &'static [&'static str] = &[
        "patch_size",
        "search_width",
        "search_height",
        "stride",
        "samples_per_pixel",
        "similar_required",
        "match_epsilon",
        "ambiguity_tau",
        "search_direction",
        "max_disparity",
        "vertical_tolerance",
        "jnd_luminance_floor",
        "jnd_texture_gain",
        "jnd_texture_cap",
        "jnd_background_radius",
        "seed_block_size",
        "seed_level_tau",
        "seed_neighbors",
        "seed_neighbor_window",
        "seed_epsilon",
        "seed_match_window",
        "prop_window_radius",
        "prop_variance_floor",
        "prop_variance_scale",
        "prop_solver_tolerance",
        "prop_max_iterations",
        "prop_kernel",
        "denoise_patch_size",
        "denoise_threshold_multiplier",
        "denoise_patches_per_pixel",
        "pre_denoise",
        "local_intensity_match",
        "intensity_window",
        "dump_debug",
        "rng_seed",
        "strict",
    ];

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let m = &mut self.matching;
        match key {
            "patch_size" => m.patch_size = parse_usize(value)?,
            "search_width" => {
                m.search_width = match value.trim() {
                    "auto" => None,
                    v => Some(parse_usize(v)?),
                }
            }
            "search_height" => m.search_height = parse_usize(value)?,
            "stride" => m.stride = parse_usize(value)?,
            "samples_per_pixel" => m.samples_per_pixel = parse_usize(value)?,
            "similar_required" => m.similar_required = parse_usize(value)?,
            "match_epsilon" => m.epsilon = parse_f32(value)?,
            "ambiguity_tau" => m.ambiguity_tau = parse_f32(value)?,
            "search_direction" => {
                m.direction = match value.trim() {
                    "left" => SearchDirection::Left,
                    "right" => SearchDirection::Right,
                    "both" => SearchDirection::Both,
                    other => return Err(format!("expected left, right or both, found {other:?}")),
                }
            }
            "max_disparity" => self.geometry.max_disparity = parse_usize(value)?,
            "vertical_tolerance" => self.geometry.vertical_tolerance = parse_usize(value)?,
            "jnd_luminance_floor" => self.jnd.luminance_floor = parse_f32(value)?,
            "jnd_texture_gain" => self.jnd.texture_gain = parse_f32(value)?,
            "jnd_texture_cap" => self.jnd.texture_cap = parse_f32(value)?,
            "jnd_background_radius" => self.jnd.background_radius = parse_usize(value)?,
            "seed_block_size" => self.seeding.block_size = parse_usize(value)?,
            "seed_level_tau" => self.seeding.level_tau = parse_f32(value)?,
            "seed_neighbors" => self.seeding.neighbors = parse_usize(value)?,
            "seed_neighbor_window" => self.seeding.neighbor_window = parse_usize(value)?,
            "seed_epsilon" => self.seeding.epsilon = parse_f32(value)?,
            "seed_match_window" => self.seeding.match_window = parse_usize(value)?,
            "prop_window_radius" => self.propagation.window_radius = parse_usize(value)?,
            "prop_variance_floor" => self.propagation.variance_floor = parse_f64(value)?,
            "prop_variance_scale" => self.propagation.variance_scale = parse_f64(value)?,
            "prop_solver_tolerance" => self.propagation.solver_tolerance = parse_f64(value)?,
            "prop_max_iterations" => self.propagation.max_iterations = parse_usize(value)?,
            "prop_kernel" => {
                self.propagation.kernel = match value.trim() {
                    "gaussian" => AffinityKernel::Gaussian,
                    "correlation" => AffinityKernel::Correlation,
                    other => {
                        return Err(format!("expected gaussian or correlation, found {other:?}"))
                    }
                }
            }
            "denoise_patch_size" => self.denoise.patch_size = parse_usize(value)?,
            "denoise_threshold_multiplier" => self.denoise.threshold_multiplier = parse_f64(value)?,
            "denoise_patches_per_pixel" => self.denoise.patches_per_pixel = parse_usize(value)?,
            "pre_denoise" => self.pre_denoise = parse_bool(value)?,
            "local_intensity_match" => self.local_intensity_match = parse_bool(value)?,
            "intensity_window" => self.intensity_window = parse_usize(value)?,
            "dump_debug" => self.dump_debug = parse_bool(value)?,
            "rng_seed" => self.rng_seed = value.trim().parse().map_err(|e| format!("{e}"))?,
            "strict" => self.strict = parse_bool(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Text value of one key, exactly as [`PipelineConfig::to_text`] writes it.
    pub fn get(&self, key: &str) -> Option<String> {
        let m = &self.matching;
        let v = match key {
            "patch_size" => m.patch_size.to_string(),
            "search_width" => m.search_width.map_or("auto".into(), |v| v.to_string()),
            "search_height" => m.search_height.to_string(),
            "stride" => m.stride.to_string(),
            "samples_per_pixel" => m.samples_per_pixel.to_string(),
            "similar_required" => m.similar_required.to_string(),
            "match_epsilon" => m.epsilon.to_string(),
            "ambiguity_tau" => m.ambiguity_tau.to_string(),
            "search_direction" => match m.direction {
                SearchDirection::Left => "left",
                SearchDirection::Right => "right",
                SearchDirection::Both => "both",
            }
            .into(),
            "max_disparity" => self.geometry.max_disparity.to_string(),
            "vertical_tolerance" => self.geometry.vertical_tolerance.to_string(),
            "jnd_luminance_floor" => self.jnd.luminance_floor.to_string(),
            "jnd_texture_gain" => self.jnd.texture_gain.to_string(),
            "jnd_texture_cap" => self.jnd.texture_cap.to_string(),
            "jnd_background_radius" => self.jnd.background_radius.to_string(),
            "seed_block_size" => self.seeding.block_size.to_string(),
            "seed_level_tau" => self.seeding.level_tau.to_string(),
            "seed_neighbors" => self.seeding.neighbors.to_string(),
            "seed_neighbor_window" => self.seeding.neighbor_window.to_string(),
            "seed_epsilon" => self.seeding.epsilon.to_string(),
            "seed_match_window" => self.seeding.match_window.to_string(),
            "prop_window_radius" => self.propagation.window_radius.to_string(),
            "prop_variance_floor" => self.propagation.variance_floor.to_string(),
            "prop_variance_scale" => self.propagation.variance_scale.to_string(),
            "prop_solver_tolerance" => self.propagation.solver_tolerance.to_string(),
            "prop_max_iterations" => self.propagation.max_iterations.to_string(),
            "prop_kernel" => match self.propagation.kernel {
                AffinityKernel::Gaussian => "gaussian",
                AffinityKernel::Correlation => "correlation",
            }
            .into(),
            "denoise_patch_size" => self.denoise.patch_size.to_string(),
            "denoise_threshold_multiplier" => self.denoise.threshold_multiplier.to_string(),
            "denoise_patches_per_pixel" => self.denoise.patches_per_pixel.to_string(),
            "pre_denoise" => self.pre_denoise.to_string(),
            "local_intensity_match" => self.local_intensity_match.to_string(),
            "intensity_window" => self.intensity_window.to_string(),
            "dump_debug" => self.dump_debug.to_string(),
            "rng_seed" => self.rng_seed.to_string(),
            "strict" => self.strict.to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// Parse a configuration file body; keys not mentioned keep their
    /// defaults.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            cfg.set(key.trim(), value)
                .map_err(|m| err(format!("{}: {m}", key.trim())))?;
        }
        cfg.validate().map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Every key with its current value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in Self::KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).expect("listed key"));
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.matching.validate()?;
        self.seeding.validate()?;
        self.propagation.validate()?;
        self.denoise.validate()?;
        if self.local_intensity_match && self.intensity_window == 0 {
            return Err(Error::InvalidConfig(
                "intensity_window must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    /// Guidance preparation, block matching and classification.
    pub scribble: Duration,
    /// Seeding and the sparse solve.
    pub propagate: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone)]
pub struct Colorization {
    pub rgb: RgbImage,
    /// Lightness is the input target verbatim.
    pub lab: LabImage,
    /// Final hint map, seeds included.
    pub scribbles: ScribbleMap,
    pub seeds: SeedOutcome,
    pub solve: SolveReport,
    pub timings: StageTimings,
    /// Guidance after resampling, denoising and intensity matching.
    pub prepared_guide: LabImage,
}

impl Colorization {
    pub fn valid_fraction(&self) -> f64 {
        self.scribbles.fraction(PixelStatus::Valid)
    }
}

/// Resample, convert, optionally denoise and intensity-match the guidance.
pub fn prepare_guide(
    mono: &PlaneImage,
    guide: &RgbImage,
    cfg: &PipelineConfig,
    noise: Option<&NoiseParams>,
) -> Result<LabImage> {
    let (h, w) = mono.dims();
    let guide = if guide.dims() == (h, w) {
        guide.clone()
    } else {
        if guide.height() > h || guide.width() > w {
            return Err(Error::InvalidParameters(format!(
                "guidance {}x{} is larger than the target {h}x{w}",
                guide.height(),
                guide.width()
            )));
        }
        let [r, g, b] = guide.planes().map(|p| {
            let mut up = upsample_to(p, h, w);
            up.clamp01();
            up
        });
        RgbImage::new(r, g, b)?
    };
    let mut lab = rgb_to_lab(&guide, WhitePoint::D65)?;
    if cfg.pre_denoise {
        lab = denoise_lab(&lab, &cfg.denoise, noise, cfg.rng_seed)?.image;
    }
    let mode = if cfg.local_intensity_match {
        IntensityMode::Local {
            window: cfg.intensity_window,
        }
    } else {
        IntensityMode::Global
    };
    let matched = intensity_match(mono, &lab.l, mode)?;
    lab.l = matched.scaled;
    Ok(lab)
}

/// Colorize `mono` from `guide`. `noise` describes known guidance noise for
/// the denoiser; without it the level is estimated from the image.
pub fn colorize(
    mono: &PlaneImage,
    guide: &RgbImage,
    cfg: &PipelineConfig,
    noise: Option<&NoiseParams>,
) -> Result<Colorization> {
    cfg.validate()?;
    let start = Instant::now();
    let prepared = prepare_guide(mono, guide, cfg, noise)?;
    let jnd = compute_jnd(mono, &cfg.jnd);
    let scribbled = dense_scribble(mono, &prepared, &jnd, &cfg.matching, &cfg.geometry)?;
    let scribble_time = start.elapsed();

    let mid = Instant::now();
    let mut scribbles = scribbled.scribbles;
    let seeds = generate_seeds(mono, &scribbles, &cfg.seeding)?;
    apply_seeds(&mut scribbles, &seeds.seeds);
    let propagated = propagate(mono, &scribbles, &cfg.propagation)?;
    if cfg.strict && !propagated.report.converged {
        return Err(Error::NotConverged {
            iterations: propagated.report.iterations,
            residual: propagated.report.residual,
        });
    }
    let propagate_time = mid.elapsed();

    let lab = LabImage::new(mono.clone(), propagated.a, propagated.b)?;
    let rgb = lab_to_rgb(&lab, WhitePoint::D65)?;
    Ok(Colorization {
        rgb,
        lab,
        scribbles,
        seeds,
        solve: propagated.report,
        timings: StageTimings {
            scribble: scribble_time,
            propagate: propagate_time,
            total: start.elapsed(),
        },
        prepared_guide: prepared,
    })
}

/// Calibration input from a prepared pair: the guidance is resampled and
/// intensity-matched like in [`colorize`] but never denoised.
pub fn calibration_pair(pair: &SynthPair, cfg: &PipelineConfig) -> Result<CalibrationPair> {
    let cfg = PipelineConfig {
        pre_denoise: false,
        ..*cfg
    };
    let guide = prepare_guide(&pair.mono, &pair.guide, &cfg, None)?;
    let truth = rgb_to_lab(&pair.truth, WhitePoint::D65)?;
    Ok(CalibrationPair {
        mono: pair.mono.clone(),
        guide,
        truth_a: truth.a,
        truth_b: truth.b,
    })
}

/// Write status and scribble maps, the seed list and the prepared guidance.
pub fn write_debug(dir: &Path, mono: &PlaneImage, out: &Colorization) -> Result<()> {
    write_debug_maps(dir, mono, &out.scribbles)?;
    let csv = dir.join("seeds.csv");
    std::fs::write(&csv, seeds_csv(&out.seeds.seeds))
        .map_err(|source| Error::Io { path: csv, source })?;
    let guide = lab_to_rgb(&out.prepared_guide, WhitePoint::D65)?;
    crate::imagecore::write_rgb(
        dir.join("guide_prepared.png"),
        &guide,
        crate::imagecore::BitDepth::Eight,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::{procedural_scene, psnr, SceneParams};
    use crate::imagecore::box_downsample;
    use proptest::prelude::*;

    #[test]
    fn defaults_carry_the_published_constants() {
        let c = PipelineConfig::default();
        assert_eq!(c.matching.patch_size, 16);
        assert_eq!(c.matching.search_height, 30);
        assert_eq!(c.matching.samples_per_pixel, 4);
        assert_eq!(c.matching.similar_required, 4);
        assert_eq!(c.matching.ambiguity_tau, 5.0 / 255.0);
        assert_eq!(c.seeding.block_size, 20);
        assert_eq!(c.seeding.level_tau, 9.0 / 255.0);
        assert_eq!(c.seeding.neighbors, 3);
        assert_eq!(c.seeding.neighbor_window, 50);
        assert!(c.pre_denoise && !c.local_intensity_match);
    }

    #[test]
    fn text_round_trip_of_defaults() {
        let c = PipelineConfig::default();
        let text = c.to_text();
        assert_eq!(text.lines().count(), PipelineConfig::KEYS.len());
        assert_eq!(PipelineConfig::parse(&text, "t").unwrap(), c);
    }

    #[test]
    fn parse_accepts_comments_and_fractions() {
        let text = "# ablation\nambiguity_tau = 10/255  # wider\n\nsearch_width = 40\nsearch_direction = both\nprop_kernel = correlation\npre_denoise = off\n";
        let c = PipelineConfig::parse(text, "t").unwrap();
        assert_eq!(c.matching.ambiguity_tau, (10.0f64 / 255.0) as f32);
        assert_eq!(c.matching.search_width, Some(40));
        assert_eq!(c.matching.direction, SearchDirection::Both);
        assert_eq!(c.propagation.kernel, AffinityKernel::Correlation);
        assert!(!c.pre_denoise);
    }

    #[test]
    fn parse_reports_bad_lines() {
        for (text, line) in [
            ("stride = 8\nbogus = 1\n", 2),
            ("stride 8\n", 1),
            ("patch_size = x\n", 1),
        ] {
            match PipelineConfig::parse(text, "f") {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(PipelineConfig::parse("stride = 5\n", "f").is_err());
    }

    fn config_strategy() -> impl Strategy<Value = PipelineConfig> {
        (
            prop_oneof![
                Just((16usize, 8usize, 4usize)),
                Just((16, 4, 16)),
                Just((8, 8, 1)),
                Just((12, 6, 4))
            ],
            0.001f32..0.2,
            prop::option::of(1usize..200),
            0usize..3,
            any::<bool>(),
            any::<bool>(),
            1e-9f64..0.1,
            1usize..5000,
            any::<u64>(),
            0.1f64..5.0,
        )
            .prop_map(
                |((s, st, n), tau, sw, dir, pd, local, tol, iters, seed, thr)| {
                    let mut c = PipelineConfig::default();
                    c.matching.patch_size = s;
                    c.matching.stride = st;
                    c.matching.samples_per_pixel = n;
                    c.matching.similar_required = n;
                    c.matching.ambiguity_tau = tau;
                    c.matching.search_width = sw;
                    c.matching.direction = [
                        SearchDirection::Left,
                        SearchDirection::Right,
                        SearchDirection::Both,
                    ][dir];
                    c.pre_denoise = pd;
                    c.local_intensity_match = local;
                    c.propagation.solver_tolerance = tol;
                    c.propagation.max_iterations = iters;
                    c.rng_seed = seed;
                    c.denoise.threshold_multiplier = thr;
                    c
                },
            )
    }

    proptest! {
        #[test]
        fn config_round_trip(c in config_strategy()) {
            let once = PipelineConfig::parse(&c.to_text(), "a").unwrap();
            prop_assert_eq!(once, c);
            let twice = PipelineConfig::parse(&once.to_text(), "b").unwrap();
            prop_assert_eq!(twice, once);
        }
    }

    fn small_scene() -> (PlaneImage, RgbImage, RgbImage) {
        let scene = procedural_scene(&SceneParams {
            height: 96,
            width: 128,
            seed: 21,
            min_disparity: 4.0,
            max_disparity: 14.0,
            layers: 3,
            ..SceneParams::default()
        });
        let pair = crate::evalkit::make_pair(&scene.left, &scene.right).unwrap();
        (pair.mono, pair.guide, pair.truth)
    }

    fn small_config() -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.geometry.max_disparity = 16;
        c
    }

    #[test]
    fn identical_views_reproduce_the_guide() {
        let (_, _, truth) = small_scene();
        let lab = rgb_to_lab(&truth, WhitePoint::D65).unwrap();
        let mut cfg = small_config();
        cfg.pre_denoise = false;
        let out = colorize(&lab.l, &truth, &cfg, None).unwrap();
        assert_eq!(out.lab.l, lab.l);
        assert!(out.valid_fraction() > 0.99);
        let err = out
            .lab
            .a
            .max_abs_diff(&lab.a)
            .max(out.lab.b.max_abs_diff(&lab.b));
        assert!(err < 1e-6, "{err}");
        assert!(psnr(&out.rgb, &truth).unwrap() > 60.0);
    }

    #[test]
    fn small_scene_colorizes_well() {
        let (mono, guide, truth) = small_scene();
        let out = colorize(&mono, &guide, &small_config(), None).unwrap();
        assert_eq!(out.lab.l, mono);
        let p = psnr(&out.rgb, &truth).unwrap();
        assert!(p > 30.0, "{p}");
        assert!(out.solve.converged);
        assert!(out.timings.total >= out.timings.scribble);
    }

    #[test]
    fn low_resolution_guide_is_upsampled() {
        let (mono, guide, _) = small_scene();
        let [r, g, b] = guide.planes().map(|p| box_downsample(p, 8));
        let small = RgbImage::new(r, g, b).unwrap();
        let out = colorize(&mono, &small, &small_config(), None).unwrap();
        assert_eq!(out.rgb.dims(), mono.dims());
    }

    #[test]
    fn colorize_is_deterministic() {
        let (mono, guide, _) = small_scene();
        let a = colorize(&mono, &guide, &small_config(), None).unwrap();
        let b = colorize(&mono, &guide, &small_config(), None).unwrap();
        assert_eq!(a.rgb, b.rgb);
        assert_eq!(a.scribbles, b.scribbles);
    }

    #[test]
    fn debug_dump_writes_files() {
        let (mono, guide, _) = small_scene();
        let out = colorize(&mono, &guide, &small_config(), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_debug(dir.path(), &mono, &out).unwrap();
        for f in [
            "status.png",
            "scribbles.png",
            "seeds.csv",
            "guide_prepared.png",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
}
