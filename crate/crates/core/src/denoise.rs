//! Randomized redundant DCT (RRDCT) denoising.
//!
//! Each pass tiles the image with `P×P` patches at a random offset. Every
//! patch is transformed with an orthonormal 2-D DCT, coefficients below
//! `k·σ_patch` are zeroed (the DC term is kept), and the inverse transforms
//! of all passes are averaged per pixel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evalkit::NoiseParams;
use crate::imagecore::{
    lab_to_rgb_pixel, rgb_to_lab_pixel, Integral, LabImage, PlaneImage, WhitePoint,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseParams {
    pub patch_size: usize,
    /// Hard threshold in units of the patch noise standard deviation.
    pub threshold_multiplier: f64,
    /// Number of randomly offset tilings, i.e. expected patches per pixel.
    pub patches_per_pixel: usize,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self {
            patch_size: 8,
            threshold_multiplier: 2.7,
            patches_per_pixel: 4,
        }
    }
}

impl DenoiseParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 4 {
            return Err(Error::InvalidConfig(format!(
                "denoise patch_size {} is below 4",
                self.patch_size
            )));
        }
        if !(self.threshold_multiplier > 0.0) {
            return Err(Error::InvalidConfig(
                "threshold_multiplier must be positive".into(),
            ));
        }
        if self.patches_per_pixel == 0 {
            return Err(Error::InvalidConfig(
                "patches_per_pixel must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-pixel noise variance; patch variances are means over the patch.
#[derive(Debug, Clone)]
pub struct VarianceMap {
    pixel: PlaneImage,
    integral: std::sync::Arc<Integral>,
}

impl VarianceMap {
    pub fn from_plane(pixel: PlaneImage) -> Self {
        let integral = std::sync::Arc::new(Integral::new(&pixel));
        Self { pixel, integral }
    }

    pub fn constant(height: usize, width: usize, variance: f64) -> Self {
        Self::from_plane(PlaneImage::filled(height, width, variance as f32))
    }

    pub fn pixel(&self) -> &PlaneImage {
        &self.pixel
    }

    /// Mean variance over `size×size` pixels from `(row, col)`.
    pub fn patch_variance(&self, row: usize, col: usize, size: usize) -> f64 {
        let r1 = (row + size).min(self.pixel.height());
        let c1 = (col + size).min(self.pixel.width());
        let n = ((r1 - row) * (c1 - col)) as f64;
        (self.integral.sum(row, col, r1, c1) / n).max(0.0)
    }
}

/// Noise variance of a plane whose values carry the noise directly.
///
/// With known parameters the variance is `α·v + σ²` per pixel. Without,
/// a constant is estimated from the median absolute Haar diagonal detail
/// (`σ = MAD / 0.6745`).
pub fn estimate_noise_variance(img: &PlaneImage, noise: Option<&NoiseParams>) -> VarianceMap {
    match noise {
        Some(p) => VarianceMap::from_plane(
            img.map(|v| (p.alpha * v.clamp(0.0, 1.0) as f64 + p.sigma2) as f32),
        ),
        None => {
            let sigma = blind_sigma(img);
            VarianceMap::constant(img.height(), img.width(), sigma * sigma)
        }
    }
}

fn blind_sigma(img: &PlaneImage) -> f64 {
    let (h, w) = img.dims();
    let mut details: Vec<f64> = Vec::with_capacity((h / 2) * (w / 2));
    for r in (0..h.saturating_sub(1)).step_by(2) {
        for c in (0..w.saturating_sub(1)).step_by(2) {
            let d = (img.get(r, c) as f64 - img.get(r, c + 1) as f64 - img.get(r + 1, c) as f64
                + img.get(r + 1, c + 1) as f64)
                / 2.0;
            details.push(d.abs());
        }
    }
    if details.is_empty() {
        return 0.0;
    }
    let mid = details.len() / 2;
    let (_, median, _) = details.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *median / 0.6745
}

/// Variance of the three normalized Lab planes of an image whose sRGB
/// values received noise with parameters `noise`, via the local Jacobian
/// of the sRGB→Lab map.
pub fn lab_noise_variance(lab: &LabImage, noise: &NoiseParams) -> [VarianceMap; 3] {
    let (h, w) = lab.dims();
    let white = WhitePoint::D65;
    let per_pixel: Vec<[f32; 3]> = (0..h * w)
        .into_par_iter()
        .map(|i| {
            let px = [
                lab.l.data()[i] as f64,
                lab.a.data()[i] as f64,
                lab.b.data()[i] as f64,
            ];
            let rgb = lab_to_rgb_pixel(px, white).map(|v| v.clamp(0.0, 1.0));
            let step = 1e-4;
            let mut var = [0.0f64; 3];
            for k in 0..3 {
                let gamma = noise.alpha * rgb[k] + noise.sigma2;
                let (mut lo, mut hi) = (rgb, rgb);
                lo[k] = (rgb[k] - step).max(0.0);
                hi[k] = (rgb[k] + step).min(1.0);
                let d = hi[k] - lo[k];
                let a = rgb_to_lab_pixel(lo, white);
                let b = rgb_to_lab_pixel(hi, white);
                for ch in 0..3 {
                    let j = (b[ch] - a[ch]) / d;
                    var[ch] += j * j * gamma;
                }
            }
            var.map(|v| v as f32)
        })
        .collect();
    [0, 1, 2].map(|ch| {
        VarianceMap::from_plane(PlaneImage::from_fn(h, w, |r, c| per_pixel[r * w + c][ch]))
    })
}

/// Denoising output; `passthrough` is set when the image was smaller than
/// one patch and returned unchanged.
#[derive(Debug, Clone)]
pub struct Denoised<T> {
    pub image: T,
    pub passthrough: bool,
    pub seed: u64,
}

/// Orthonormal DCT-II basis, row `k` is frequency `k`.
fn dct_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for i in 0..n {
            m[k * n + i] = scale
                * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    m
}

/// `out = M · x · Mᵀ` (forward) or `Mᵀ · x · M` (inverse) for `n×n` blocks.
fn transform(m: &[f64], x: &[f64], out: &mut [f64], tmp: &mut [f64], n: usize, inverse: bool) {
    let at = |r: usize, c: usize| if inverse { m[c * n + r] } else { m[r * n + c] };
    for r in 0..n {
        for c in 0..n {
            tmp[r * n + c] = (0..n).map(|k| at(r, k) * x[k * n + c]).sum();
        }
    }
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = (0..n).map(|k| tmp[r * n + k] * at(c, k)).sum();
        }
    }
}

/// Hard-threshold the AC coefficients in place; returns the number zeroed.
fn hard_threshold(coeffs: &mut [f64], threshold: f64) -> usize {
    let mut zeroed = 0;
    for c in coeffs.iter_mut().skip(1) {
        if c.abs() < threshold {
            *c = 0.0;
            zeroed += 1;
        }
    }
    zeroed
}

/// Patch origins along one axis for a tiling shifted by `offset`, clamped
/// so every patch lies inside the image.
fn tiling_origins(len: usize, size: usize, offset: usize) -> Vec<usize> {
    let last = len - size;
    let mut out = Vec::new();
    let mut p = offset as isize - size as isize;
    while p < len as isize {
        let clamped = p.clamp(0, last as isize) as usize;
        if out.last() != Some(&clamped) {
            out.push(clamped);
        }
        p += size as isize;
    }
    out
}

/// Denoise one plane with a known variance map.
pub fn rrdct_denoise_with(
    img: &PlaneImage,
    params: &DenoiseParams,
    variance: &VarianceMap,
    seed: u64,
) -> Result<Denoised<PlaneImage>> {
    params.validate()?;
    img.ensure_same_dims(variance.pixel())?;
    let (h, w) = img.dims();
    let n = params.patch_size;
    if h < n || w < n {
        log::warn!("image {h}x{w} is smaller than the {n}x{n} denoising patch; left unchanged");
        return Ok(Denoised {
            image: img.clone(),
            passthrough: true,
            seed,
        });
    }
    let basis = dct_matrix(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0f64; h * w];
    let mut count = vec![0u32; h * w];
    for _ in 0..params.patches_per_pixel {
        let oy = rng.random_range(0..n);
        let ox = rng.random_range(0..n);
        let rows = tiling_origins(h, n, oy);
        let cols = tiling_origins(w, n, ox);
        let origins: Vec<(usize, usize)> = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .collect();
        let blocks: Vec<Vec<f64>> = origins
            .par_iter()
            .map_init(
                || (vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]),
                |(x, coeffs, tmp), &(r0, c0)| {
                    for i in 0..n {
                        for j in 0..n {
                            x[i * n + j] = img.get(r0 + i, c0 + j) as f64;
                        }
                    }
                    let threshold =
                        params.threshold_multiplier * variance.patch_variance(r0, c0, n).sqrt();
                    transform(&basis, x, coeffs, tmp, n, false);
                    hard_threshold(coeffs, threshold);
                    let mut out = vec![0.0; n * n];
                    transform(&basis, coeffs, &mut out, tmp, n, true);
                    out
                },
            )
            .collect();
        for (&(r0, c0), block) in origins.iter().zip(&blocks) {
            for i in 0..n {
                let base = (r0 + i) * w + c0;
                for j in 0..n {
                    sum[base + j] += block[i * n + j];
                    count[base + j] += 1;
                }
            }
        }
    }
    let data = sum
        .iter()
        .zip(&count)
        .map(|(&s, &k)| (s / k as f64) as f32)
        .collect();
    Ok(Denoised {
        image: PlaneImage::from_vec(h, w, data)?,
        passthrough: false,
        seed,
    })
}

/// Denoise one plane; `noise` describes the noise on the plane's own values
/// (`None` estimates it blindly).
pub fn rrdct_denoise(
    img: &PlaneImage,
    params: &DenoiseParams,
    noise: Option<&NoiseParams>,
    seed: u64,
) -> Result<Denoised<PlaneImage>> {
    let variance = estimate_noise_variance(img, noise);
    rrdct_denoise_with(img, params, &variance, seed)
}

/// Denoise all three planes of a Lab image. `noise` describes noise added
/// to the sRGB values the Lab image was converted from; without it each
/// plane's level is estimated blindly.
pub fn denoise_lab(
    lab: &LabImage,
    params: &DenoiseParams,
    noise: Option<&NoiseParams>,
    seed: u64,
) -> Result<Denoised<LabImage>> {
    let variances = match noise {
        Some(p) => lab_noise_variance(lab, p),
        None => [&lab.l, &lab.a, &lab.b].map(|p| estimate_noise_variance(p, None)),
    };
    let mut planes = Vec::with_capacity(3);
    let mut passthrough = false;
    for (i, (plane, var)) in [&lab.l, &lab.a, &lab.b]
        .into_iter()
        .zip(&variances)
        .enumerate()
    {
        let out = rrdct_denoise_with(plane, params, var, seed.wrapping_add(i as u64))?;
        passthrough |= out.passthrough;
        planes.push(out.image);
    }
    let b = planes.pop().unwrap();
    let a = planes.pop().unwrap();
    let l = planes.pop().unwrap();
    Ok(Denoised {
        image: LabImage::new(l, a, b)?,
        passthrough,
        seed,
    })
}
