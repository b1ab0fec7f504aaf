//! Probability model of patch sampling.
//!
//! A target pixel is covered by `pool = S²` patches. Without sampling, `g`
//! of their matches are luminance-similar to the pixel. Sampling keeps `N`
//! of the covering patches, modelled as drawing without replacement, so
//! the number `r` of similar candidates kept is hypergeometric. Averaging
//! over a calibrated prior `P(g)` gives the probability of a valid match
//! (`r ≥ T`), and a linear fit of `P(B|g)` (the weighted color being
//! correct) gives the confidence of a valid match.

use std::fmt::Write as _;
use std::path::Path;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::{LabImage, PairGeometry, PlaneImage};
use crate::perception::{compute_jnd, is_similar, JndParams};
use crate::scribbler::{candidate_weights, match_patches, weighted_color, Candidate, MatchConfig};

/// Binomial coefficients `C(n, k)` for `n ≤ max_n`, computed exactly and
/// rounded once to `f64`.
#[derive(Debug, Clone)]
pub struct Binomials {
    max_n: usize,
    table: Vec<f64>,
}

impl Binomials {
    pub fn new(max_n: usize) -> Self {
        let stride = max_n + 1;
        let mut table = vec![0.0; stride * stride];
        let mut row = vec![BigUint::one()];
        for n in 0..=max_n {
            for (k, v) in row.iter().enumerate() {
                table[n * stride + k] = v.to_f64().unwrap_or(f64::INFINITY);
            }
            let mut next = Vec::with_capacity(row.len() + 1);
            next.push(BigUint::one());
            for k in 1..row.len() {
                next.push(&row[k - 1] + &row[k]);
            }
            next.push(BigUint::one());
            row = next;
        }
        Self { max_n, table }
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    /// `C(n, k)`, zero outside `0 ≤ k ≤ n ≤ max_n`.
    pub fn get(&self, n: usize, k: usize) -> f64 {
        if k > n || n > self.max_n {
            return 0.0;
        }
        self.table[n * (self.max_n + 1) + k]
    }

    /// Probability of `r` marked items among `n` drawn without replacement
    /// from `pool` items of which `g` are marked.
    pub fn hypergeometric(&self, r: usize, g: usize, n: usize, pool: usize) -> f64 {
        if n > pool || g > pool || r > n || r > g || n - r > pool - g {
            return 0.0;
        }
        self.get(g, r) * self.get(pool - g, n - r) / self.get(pool, n)
    }
}

/// `C(g,r)·C(pool−g, N−r) / C(pool, N)`; zero outside the support.
pub fn hypergeometric_term(r: usize, g: usize, n: usize, pool: usize) -> f64 {
    Binomials::new(pool).hypergeometric(r, g, n, pool)
}

/// Calibrated priors: `P(g)` for `g = 1..=pool` and the linear fit of
/// `P(B|g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTable {
    /// `p_g[g - 1] = P(g)`.
    pub p_g: Vec<f64>,
    pub b_given_g_slope: f64,
    pub b_given_g_intercept: f64,
}

impl PriorTable {
    /// Uniform `P(g)` over `1..=pool` with `P(B|g) ≡ 1`.
    pub fn uniform(pool: usize) -> Self {
        Self {
            p_g: vec![1.0 / pool as f64; pool],
            b_given_g_slope: 0.0,
            b_given_g_intercept: 1.0,
        }
    }

    /// All mass on `g`.
    pub fn point_mass(pool: usize, g: usize) -> Self {
        let mut p_g = vec![0.0; pool];
        p_g[g - 1] = 1.0;
        Self {
            p_g,
            b_given_g_slope: 0.0,
            b_given_g_intercept: 1.0,
        }
    }

    /// The prior shipped with the library.
    pub fn shipped() -> Self {
        Self::parse(DEFAULT_PRIOR, "<builtin>").expect("builtin prior parses")
    }

    pub fn pool(&self) -> usize {
        self.p_g.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_g.is_empty() {
            return Err(Error::InvalidParameters("empty prior".into()));
        }
        if self.p_g.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameters(
                "prior has a negative or non-finite entry".into(),
            ));
        }
        let total: f64 = self.p_g.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameters(format!(
                "prior sums to {total}, not 1"
            )));
        }
        if !self.b_given_g_slope.is_finite() || !self.b_given_g_intercept.is_finite() {
            return Err(Error::InvalidParameters("non-finite P(B|g) fit".into()));
        }
        Ok(())
    }

    /// Fitted `P(B|g)`, clamped to `[0, 1]`.
    pub fn b_given_g(&self, g: usize) -> f64 {
        (self.b_given_g_slope * g as f64 + self.b_given_g_intercept).clamp(0.0, 1.0)
    }

    /// `P(A_r)` for `r = 0..=n`.
    pub fn draw_distribution(&self, n: usize) -> Vec<f64> {
        let pool = self.pool();
        let bin = Binomials::new(pool);
        (0..=n)
            .map(|r| {
                self.p_g
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| p * bin.hypergeometric(r, i + 1, n, pool))
                    .sum()
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, p) in self.p_g.iter().enumerate() {
            let _ = writeln!(s, "g {} {:e}", i + 1, p);
        }
        let _ = writeln!(s, "slope {:e}", self.b_given_g_slope);
        let _ = writeln!(s, "intercept {:e}", self.b_given_g_intercept);
        s
    }

    /// Parse the text form. Blank lines and `#` comments are ignored; the
    /// `g` lines must be numbered `1..=pool` in order.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut p_g = Vec::new();
        let (mut slope, mut intercept) = (None, None);
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let float = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| err(line_no, format!("bad number {s:?}: {e}")))
            };
            match fields.as_slice() {
                ["g", g, p] => {
                    let g: usize = g
                        .parse()
                        .map_err(|e| err(line_no, format!("bad index {g:?}: {e}")))?;
                    if g != p_g.len() + 1 {
                        return Err(err(
                            line_no,
                            format!("expected g {}, found g {g}", p_g.len() + 1),
                        ));
                    }
                    p_g.push(float(p)?);
                }
                ["slope", v] => slope = Some(float(v)?),
                ["intercept", v] => intercept = Some(float(v)?),
                _ => return Err(err(line_no, format!("unrecognized line {line:?}"))),
            }
        }
        let last = text.lines().count();
        let table = Self {
            p_g,
            b_given_g_slope: slope.ok_or_else(|| err(last, "missing slope".into()))?,
            b_given_g_intercept: intercept.ok_or_else(|| err(last, "missing intercept".into()))?,
        };
        table.validate().map_err(|e| err(last, e.to_string()))?;
        Ok(table)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

const DEFAULT_PRIOR: &str = include_str!("../assets/default.prior");

fn check_nt(n: usize, t: usize, pool: usize) -> Result<()> {
    if t == 0 || t > n || n > pool {
        return Err(Error::InvalidParameters(format!(
            "need 1 <= T <= N <= {pool}, got N={n}, T={t}"
        )));
    }
    Ok(())
}

/// `P(r ≥ T | g)` for every `g = 1..=pool`.
fn tail_given_g(bin: &Binomials, n: usize, t: usize, pool: usize) -> Vec<f64> {
    (1..=pool)
        .map(|g| (t..=n).map(|r| bin.hypergeometric(r, g, n, pool)).sum())
        .collect()
}

/// `Φ_valid(N, T) = Σ_{r ≥ T} P(A_r)`.
pub fn prob_valid_match(n: usize, t: usize, prior: &PriorTable) -> Result<f64> {
    let pool = prior.pool();
    check_nt(n, t, pool)?;
    let bin = Binomials::new(pool);
    Ok(valid_with(&bin, n, t, prior))
}

fn valid_with(bin: &Binomials, n: usize, t: usize, prior: &PriorTable) -> f64 {
    let tail = tail_given_g(bin, n, t, prior.pool());
    tail.iter().zip(&prior.p_g).map(|(a, p)| a * p).sum()
}

/// `Φ_conf(N, T) = P(B | valid match)`.
pub fn prob_confidence(n: usize, t: usize, prior: &PriorTable) -> Result<f64> {
    let pool = prior.pool();
    check_nt(n, t, pool)?;
    let bin = Binomials::new(pool);
    confidence_with(&bin, n, t, prior)
}

fn confidence_with(bin: &Binomials, n: usize, t: usize, prior: &PriorTable) -> Result<f64> {
    let tail = tail_given_g(bin, n, t, prior.pool());
    let (mut joint, mut marginal) = (0.0, 0.0);
    for (i, (a, p)) in tail.iter().zip(&prior.p_g).enumerate() {
        marginal += a * p;
        joint += a * p * prior.b_given_g(i + 1);
    }
    if marginal <= 0.0 {
        return Err(Error::ZeroProbability { n, t });
    }
    Ok(joint / marginal)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRow {
    pub n: usize,
    pub t: usize,
    pub valid: f64,
    /// NaN when a valid match has zero probability.
    pub confidence: f64,
}

/// `Φ_valid` and `Φ_conf` over every `(N, T)` with `T ≤ N` in the ranges.
pub fn emit_selection_table(
    prior: &PriorTable,
    n_range: std::ops::RangeInclusive<usize>,
    t_range: std::ops::RangeInclusive<usize>,
) -> Vec<SelectionRow> {
    let pool = prior.pool();
    let bin = Binomials::new(pool);
    let pairs: Vec<(usize, usize)> = n_range
        .flat_map(|n| t_range.clone().map(move |t| (n, t)))
        .filter(|&(n, t)| check_nt(n, t, pool).is_ok())
        .collect();
    pairs
        .into_par_iter()
        .map(|(n, t)| SelectionRow {
            n,
            t,
            valid: valid_with(&bin, n, t, prior),
            confidence: confidence_with(&bin, n, t, prior).unwrap_or(f64::NAN),
        })
        .collect()
}

pub fn selection_table_csv(rows: &[SelectionRow]) -> String {
    let mut s = String::from("n,t,phi_valid,phi_confidence\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:.6},{:.6}", r.n, r.t, r.valid, r.confidence);
    }
    s
}

/// One calibration pair: the target luminance, the guidance (luminance
/// matched to the target) and the true chroma of the target.
#[derive(Debug, Clone)]
pub struct CalibrationPair {
    pub mono: PlaneImage,
    pub guide: LabImage,
    pub truth_a: PlaneImage,
    pub truth_b: PlaneImage,
}

/// Raw per-`g` counts gathered from unsampled matching.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationCounts {
    /// Pixels with `g` similar candidates, `g = 0..=pool`.
    pub pixels: Vec<u64>,
    /// Of those, pixels whose weighted color is within the JND of the truth.
    pub correct: Vec<u64>,
}

impl CalibrationCounts {
    fn new(pool: usize) -> Self {
        Self {
            pixels: vec![0; pool + 1],
            correct: vec![0; pool + 1],
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        for (a, b) in self.pixels.iter_mut().zip(&other.pixels) {
            *a += b;
        }
        for (a, b) in self.correct.iter_mut().zip(&other.correct) {
            *a += b;
        }
        self
    }
}

/// Histogram `g` and correctness over interior pixels of one pair, with
/// every patch matched.
pub fn calibration_counts(
    pair: &CalibrationPair,
    cfg: &MatchConfig,
    geom: &PairGeometry,
    jnd_params: &JndParams,
) -> Result<CalibrationCounts> {
    let full = cfg.unsampled(1);
    let pool = full.samples_per_pixel;
    let mono = &pair.mono;
    mono.ensure_same_dims(&pair.truth_a)?;
    mono.ensure_same_dims(&pair.truth_b)?;
    let jnd = compute_jnd(mono, jnd_params);
    let field = match_patches(mono, &pair.guide.l, &full, geom)?;
    let (h, w) = mono.dims();
    let rows: Vec<CalibrationCounts> = (0..h)
        .into_par_iter()
        .map(|r| {
            let mut counts = CalibrationCounts::new(pool);
            let mut cands: Vec<Candidate> = Vec::with_capacity(pool);
            for c in 0..w {
                if field.coverage(r, c) != pool {
                    continue;
                }
                field.candidates_into(r, c, &pair.guide, &mut cands);
                cands.sort_by(Candidate::canonical_cmp);
                let target = mono.get(r, c);
                let j = jnd.at(r, c);
                let g = cands
                    .iter()
                    .filter(|k| is_similar(target, k.luma, j))
                    .count();
                let lumas: Vec<f32> = cands.iter().map(|k| k.luma).collect();
                let weights = candidate_weights(target, &lumas, full.epsilon);
                let (a, b) = weighted_color(&cands, &weights);
                let ok = (a - pair.truth_a.get(r, c)).abs() < j
                    && (b - pair.truth_b.get(r, c)).abs() < j;
                counts.pixels[g] += 1;
                counts.correct[g] += ok as u64;
            }
            counts
        })
        .collect();
    Ok(rows
        .iter()
        .fold(CalibrationCounts::new(pool), |acc, x| acc.merge(x)))
}

/// Bins with fewer samples are left out of the `P(B|g)` fit.
pub const MIN_BIN_SAMPLES: u64 = 50;

/// Turn accumulated counts into a prior table. Pixels with `g = 0` have no
/// valid match under any sampling and fall outside the support of `P(g)`.
pub fn prior_from_counts(counts: &CalibrationCounts) -> Result<PriorTable> {
    let pool = counts.pixels.len() - 1;
    let total: u64 = counts.pixels[1..].iter().sum();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let p_g = counts.pixels[1..]
        .iter()
        .map(|&n| n as f64 / total as f64)
        .collect();
    let (slope, intercept) = fit_b_given_g(counts, pool);
    Ok(PriorTable {
        p_g,
        b_given_g_slope: slope,
        b_given_g_intercept: intercept,
    })
}

/// Weighted least squares of the per-bin correct fraction against `g`,
/// weighted by bin mass. Falls back to a constant when fewer than two
/// distinct bins qualify.
fn fit_b_given_g(counts: &CalibrationCounts, pool: usize) -> (f64, f64) {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut bins = 0;
    for g in 1..=pool {
        let n = counts.pixels[g];
        if n < MIN_BIN_SAMPLES {
            continue;
        }
        let (w, x, y) = (n as f64, g as f64, counts.correct[g] as f64 / n as f64);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
        bins += 1;
    }
    let det = sw * sxx - sx * sx;
    if bins >= 2 && det > 0.0 {
        let slope = (sw * sxy - sx * sy) / det;
        return (slope, (sy - slope * sx) / sw);
    }
    let n: u64 = counts.pixels[1..].iter().sum();
    let c: u64 = counts.correct[1..].iter().sum();
    (0.0, if n > 0 { c as f64 / n as f64 } else { 1.0 })
}

/// Calibrate priors on a dataset with unsampled matching.
pub fn calibrate_priors(
    dataset: &[CalibrationPair],
    cfg: &MatchConfig,
    geom: &PairGeometry,
    jnd_params: &JndParams,
) -> Result<PriorTable> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate()?;
    let pool = cfg.patch_size * cfg.patch_size;
    let mut acc = CalibrationCounts::new(pool);
    for pair in dataset {
        acc = acc.merge(&calibration_counts(pair, cfg, geom, jnd_params)?);
    }
    prior_from_counts(&acc)
}
