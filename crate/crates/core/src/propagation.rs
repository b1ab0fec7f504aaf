//! Hint propagation by luminance-affinity optimization.
//!
//! Every unhinted pixel is asked to equal the affinity-weighted average of
//! its neighbors, `U(r) = Σ_s w_rs U(s)`, while hinted pixels keep their
//! values. The weights of each row are nonnegative and sum to one, so the
//! solution is a discrete harmonic interpolation of the hints and obeys
//! the maximum principle. The sparse nonsymmetric system over the unhinted
//! pixels is solved with BiCGSTAB starting from a nearest-hint fill.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::PlaneImage;
use crate::scribbler::ScribbleMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AffinityKernel {
    /// `exp(−(Y_r − Y_s)² / (κ·σ_r²))`.
    #[default]
    Gaussian,
    /// `1 + (Y_r − μ_r)(Y_s − μ_r) / σ_r²`, clipped at zero.
    Correlation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    pub window_radius: usize,
    pub variance_floor: f64,
    /// κ in the Gaussian kernel; the window variance is scaled by it.
    pub variance_scale: f64,
    pub solver_tolerance: f64,
    pub max_iterations: usize,
    pub kernel: AffinityKernel,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            window_radius: 1,
            variance_floor: 2e-6,
            variance_scale: 0.6,
            solver_tolerance: 1e-6,
            max_iterations: 2000,
            kernel: AffinityKernel::Gaussian,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_radius == 0 {
            return Err(Error::InvalidConfig(
                "window_radius must be at least 1".into(),
            ));
        }
        if !(self.solver_tolerance > 0.0 && self.solver_tolerance < 1.0) {
            return Err(Error::InvalidConfig(
                "solver_tolerance must lie in (0, 1)".into(),
            ));
        }
        if !(self.variance_floor > 0.0) || !(self.variance_scale > 0.0) {
            return Err(Error::InvalidConfig(
                "variance_floor and variance_scale must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Row-stochastic neighbor weights in CSR layout. Row `i` (pixel `i` in
/// row-major order) lists neighbors `cols[offsets[i]..offsets[i+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinity {
    pub height: usize,
    pub width: usize,
    pub offsets: Vec<usize>,
    pub cols: Vec<u32>,
    pub weights: Vec<f64>,
}

impl Affinity {
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.cols[a..b], &self.weights[a..b])
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn pixel_weights(
    mono: &PlaneImage,
    r: usize,
    c: usize,
    cfg: &PropagationConfig,
) -> (Vec<u32>, Vec<f64>) {
    let (h, w) = mono.dims();
    let rad = cfg.window_radius;
    let (r0, r1) = (r.saturating_sub(rad), (r + rad + 1).min(h));
    let (c0, c1) = (c.saturating_sub(rad), (c + rad + 1).min(w));
    let center = mono.get(r, c) as f64;
    let mut cols = Vec::with_capacity((2 * rad + 1).pow(2));
    let mut vals = Vec::with_capacity((2 * rad + 1).pow(2));
    let (mut sum, mut sum2, mut n) = (center, center * center, 1.0);
    for rr in r0..r1 {
        for cc in c0..c1 {
            if rr == r && cc == c {
                continue;
            }
            let v = mono.get(rr, cc) as f64;
            cols.push((rr * w + cc) as u32);
            vals.push(v);
            sum += v;
            sum2 += v * v;
            n += 1.0;
        }
    }
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0);
    let mut weights: Vec<f64> = match cfg.kernel {
        AffinityKernel::Gaussian => {
            let mut scale = cfg.variance_scale * var;
            // Keep the most similar neighbor at weight ≥ 0.01.
            let min_d2 = vals
                .iter()
                .map(|v| (v - center).powi(2))
                .fold(f64::INFINITY, f64::min);
            scale = scale.max(-min_d2 / 0.01f64.ln()).max(cfg.variance_floor);
            vals.iter()
                .map(|v| (-(v - center).powi(2) / scale).exp())
                .collect()
        }
        AffinityKernel::Correlation => {
            let var = var.max(cfg.variance_floor);
            vals.iter()
                .map(|v| (1.0 + (center - mean) * (v - mean) / var).max(0.0))
                .collect()
        }
    };
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|x| *x /= total);
    } else {
        let u = 1.0 / weights.len() as f64;
        weights.iter_mut().for_each(|x| *x = u);
    }
    (cols, weights)
}

/// Neighbor weights over each pixel's `(2R+1)²` window (itself excluded,
/// clipped at the border), normalized per pixel.
pub fn build_affinity(mono: &PlaneImage, cfg: &PropagationConfig) -> Affinity {
    let (h, w) = mono.dims();
    let rows: Vec<(Vec<u32>, Vec<f64>)> = (0..h * w)
        .into_par_iter()
        .map(|i| pixel_weights(mono, i / w, i % w, cfg))
        .collect();
    let mut offsets = Vec::with_capacity(h * w + 1);
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    offsets.push(0);
    for (c, v) in rows {
        cols.extend(c);
        weights.extend(v);
        offsets.push(cols.len());
    }
    Affinity {
        height: h,
        width: w,
        offsets,
        cols,
        weights,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final relative residual `‖b − Ax‖ / ‖b‖`, worst of the two channels.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct Propagated {
    pub a: PlaneImage,
    pub b: PlaneImage,
    pub report: SolveReport,
}

/// The system `(I − W_uu) x = W_uh h` restricted to unhinted pixels.
struct Reduced {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<f64>,
}

impl Reduced {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let (a, b) = (self.offsets[i], self.offsets[i + 1]);
            let mut s = x[i];
            for k in a..b {
                s -= self.weights[k] * x[self.cols[k] as usize];
            }
            *o = s;
        });
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// BiCGSTAB from `x`; returns `(iterations, relative residual)` of the
/// best iterate, which is left in `x`.
fn bicgstab(m: &Reduced, rhs: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> (usize, f64) {
    let n = rhs.len();
    let bnorm = norm(rhs).max(1e-300);
    let mut ax = vec![0.0; n];
    m.apply(x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut rel = norm(&r) / bnorm;
    if rel <= tol {
        return (0, rel);
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut best = x.to_vec();
    let mut best_rel = rel;
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p.par_iter_mut()
            .zip(&r)
            .zip(&v)
            .for_each(|((p, r), v)| *p = r + beta * (*p - omega * v));
        m.apply(&p, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() < 1e-300 {
            break;
        }
        alpha = rho / denom;
        s.par_iter_mut()
            .zip(&r)
            .zip(&v)
            .for_each(|((s, r), v)| *s = r - alpha * v);
        if norm(&s) / bnorm <= tol {
            x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            m.apply(x, &mut ax);
            rel = rhs
                .iter()
                .zip(&ax)
                .map(|(b, a)| (b - a).powi(2))
                .sum::<f64>()
                .sqrt()
                / bnorm;
            return (it, rel);
        }
        m.apply(&s, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        x.par_iter_mut()
            .zip(&p)
            .zip(&s)
            .for_each(|((x, p), s)| *x += alpha * p + omega * s);
        r.par_iter_mut()
            .zip(&s)
            .zip(&t)
            .for_each(|((r, s), t)| *r = s - omega * t);
        rel = norm(&r) / bnorm;
        if rel < best_rel {
            best_rel = rel;
            best.copy_from_slice(x);
        }
        if rel <= tol {
            return (it, rel);
        }
    }
    x.copy_from_slice(&best);
    (max_iter, best_rel)
}

/// Multi-source breadth-first fill of unhinted pixels with the value of
/// the first hint to reach them (4-connectivity, row-major source order).
fn nearest_fill(hinted: &[bool], values: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = values.to_vec();
    let mut seen = hinted.to_vec();
    let mut queue: VecDeque<usize> = (0..h * w).filter(|&i| hinted[i]).collect();
    while let Some(i) = queue.pop_front() {
        let (r, c) = (i / w, i % w);
        let mut visit = |j: usize| {
            if !seen[j] {
                seen[j] = true;
                out[j] = out[i];
                queue.push_back(j);
            }
        };
        if r > 0 {
            visit(i - w);
        }
        if r + 1 < h {
            visit(i + w);
        }
        if c > 0 {
            visit(i - 1);
        }
        if c + 1 < w {
            visit(i + 1);
        }
    }
    out
}

/// Spread the hints of `hints` (every status carrying chroma) over the
/// image. Hinted pixels keep their values bit-exactly.
pub fn propagate(
    mono: &PlaneImage,
    hints: &ScribbleMap,
    cfg: &PropagationConfig,
) -> Result<Propagated> {
    cfg.validate()?;
    let (h, w) = mono.dims();
    if hints.dims() != (h, w) {
        return Err(Error::DimensionMismatch {
            expected: (h, w),
            actual: hints.dims(),
        });
    }
    let n = h * w;
    let hinted: Vec<bool> = hints
        .statuses()
        .iter()
        .map(|s| s.carries_chroma())
        .collect();
    if !hinted.iter().any(|&x| x) {
        return Err(Error::NoHints);
    }
    let chroma: Vec<(f32, f32)> = (0..n)
        .map(|i| hints.chroma(i / w, i % w).unwrap_or((0.0, 0.0)))
        .collect();
    let affinity = build_affinity(mono, cfg);

    // Index unknowns.
    let mut unknown_of = vec![u32::MAX; n];
    let mut unknowns = Vec::new();
    for i in 0..n {
        if !hinted[i] {
            unknown_of[i] = unknowns.len() as u32;
            unknowns.push(i);
        }
    }
    let mut offsets = Vec::with_capacity(unknowns.len() + 1);
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    let mut rhs_a = Vec::with_capacity(unknowns.len());
    let mut rhs_b = Vec::with_capacity(unknowns.len());
    offsets.push(0);
    for &i in &unknowns {
        let (nb, wt) = affinity.row(i);
        let (mut ra, mut rb) = (0.0, 0.0);
        for (&j, &wj) in nb.iter().zip(wt) {
            let j = j as usize;
            if hinted[j] {
                ra += wj * chroma[j].0 as f64;
                rb += wj * chroma[j].1 as f64;
            } else {
                cols.push(unknown_of[j]);
                weights.push(wj);
            }
        }
        offsets.push(cols.len());
        rhs_a.push(ra);
        rhs_b.push(rb);
    }
    let system = Reduced {
        offsets,
        cols,
        weights,
    };

    let plane_a: Vec<f64> = chroma.iter().map(|c| c.0 as f64).collect();
    let plane_b: Vec<f64> = chroma.iter().map(|c| c.1 as f64).collect();
    let init_a = nearest_fill(&hinted, &plane_a, h, w);
    let init_b = nearest_fill(&hinted, &plane_b, h, w);
    let mut xa: Vec<f64> = unknowns.iter().map(|&i| init_a[i]).collect();
    let mut xb: Vec<f64> = unknowns.iter().map(|&i| init_b[i]).collect();
    let ((ia, ra), (ib, rb)) = if unknowns.is_empty() {
        ((0, 0.0), (0, 0.0))
    } else {
        (
            bicgstab(
                &system,
                &rhs_a,
                &mut xa,
                cfg.solver_tolerance,
                cfg.max_iterations,
            ),
            bicgstab(
                &system,
                &rhs_b,
                &mut xb,
                cfg.solver_tolerance,
                cfg.max_iterations,
            ),
        )
    };
    let residual = ra.max(rb);
    let report = SolveReport {
        iterations: ia.max(ib),
        residual,
        converged: residual <= cfg.solver_tolerance,
    };
    if !report.converged {
        log::warn!(
            "propagation stopped after {} iterations at relative residual {:.3e}",
            report.iterations,
            residual
        );
    }
    let mut out_a: Vec<f32> = chroma.iter().map(|c| c.0).collect();
    let mut out_b: Vec<f32> = chroma.iter().map(|c| c.1).collect();
    for (k, &i) in unknowns.iter().enumerate() {
        out_a[i] = xa[k] as f32;
        out_b[i] = xb[k] as f32;
    }
    Ok(Propagated {
        a: PlaneImage::from_vec(h, w, out_a)?,
        b: PlaneImage::from_vec(h, w, out_b)?,
        report,
    })
}
