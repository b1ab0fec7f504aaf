//! Evaluation support: mixed Poisson-Gaussian noise, pair preparation,
//! PSNR/SSIM, procedural stereo scenes and the benchmark driver.

mod benchmark;
mod scenes;

pub use benchmark::{
    load_dataset, run_benchmark, BenchmarkRow, BenchmarkSummary, DatasetPair, NOISE_GRID,
};
pub use scenes::{
    occlusion_fixture, procedural_scene, shift_fixture, OcclusionFixture, SceneParams, StereoScene,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::imagecore::{rgb_to_lab, PlaneImage, RgbImage, WhitePoint};

/// Parameters of the variance law `Γ = α·v + σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseParams {
    pub alpha: f64,
    pub sigma2: f64,
    pub seed: u64,
}

impl NoiseParams {
    pub fn new(alpha: f64, sigma2: f64, seed: u64) -> Self {
        Self {
            alpha,
            sigma2,
            seed,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.alpha == 0.0 && self.sigma2 == 0.0
    }

    pub fn variance_at(&self, v: f64) -> f64 {
        self.alpha * v + self.sigma2
    }
}

/// Add zero-mean Gaussian noise of variance `α·v + σ²` to every sample
/// and clamp to `[0, 1]`. Channels are drawn in order r, g, b from one
/// seeded stream.
pub fn add_mixed_noise(img: &RgbImage, p: &NoiseParams) -> RgbImage {
    if p.is_zero() {
        return img.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut out = img.clone();
    for plane in out.planes_mut() {
        for v in plane.data_mut() {
            let x = *v as f64;
            let sd = p.variance_at(x.clamp(0.0, 1.0)).max(0.0).sqrt();
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = (x + sd * z).clamp(0.0, 1.0) as f32;
        }
    }
    out
}

/// A prepared colorization pair.
#[derive(Debug, Clone)]
pub struct SynthPair {
    /// Lightness of the left view.
    pub mono: PlaneImage,
    /// The right view.
    pub guide: RgbImage,
    /// The left view.
    pub truth: RgbImage,
}

/// Target = lightness of the left view, guidance = the right view.
pub fn make_pair(left: &RgbImage, right: &RgbImage) -> Result<SynthPair> {
    left.ensure_same_dims(right)?;
    let lab = rgb_to_lab(left, WhitePoint::D65)?;
    Ok(SynthPair {
        mono: lab.l,
        guide: right.clone(),
        truth: left.clone(),
    })
}

/// `10·log10(1 / MSE)` over all channels; `+∞` when the images are equal.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for (pa, pb) in a.planes().into_iter().zip(b.planes()) {
        for (x, y) in pa.data().iter().zip(pb.data()) {
            let d = *x as f64 - *y as f64;
            sum += d * d;
        }
        n += pa.len();
    }
    let mse = sum / n as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    })
}

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_kernel() -> Vec<f64> {
    let k: Vec<f64> = (0..=2 * SSIM_RADIUS)
        .map(|i| {
            let x = i as f64 - SSIM_RADIUS as f64;
            (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Gaussian-weighted local mean at every position where the window fits.
fn filter_valid(x: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (vh, vw) = (h + 1 - n, w + 1 - n);
    let mut rows = vec![0.0; h * vw];
    for r in 0..h {
        for c in 0..vw {
            rows[r * vw + c] = (0..n).map(|i| k[i] * x[r * w + c + i]).sum();
        }
    }
    let mut out = vec![0.0; vh * vw];
    for r in 0..vh {
        for c in 0..vw {
            out[r * vw + c] = (0..n).map(|i| k[i] * rows[(r + i) * vw + c]).sum();
        }
    }
    (out, vh, vw)
}

fn ssim_plane(a: &PlaneImage, b: &PlaneImage, k: &[f64]) -> f64 {
    let (h, w) = a.dims();
    let x: Vec<f64> = a.data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.data().iter().map(|&v| v as f64).collect();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).collect::<Vec<f64>>();
    let (mx, vh, vw) = filter_valid(&x, h, w, k);
    let (my, ..) = filter_valid(&y, h, w, k);
    let (mxx, ..) = filter_valid(&prod(&x, &x), h, w, k);
    let (myy, ..) = filter_valid(&prod(&y, &y), h, w, k);
    let (mxy, ..) = filter_valid(&prod(&x, &y), h, w, k);
    let c1 = (0.01f64).powi(2);
    let c2 = (0.03f64).powi(2);
    let mut total = 0.0;
    for i in 0..vh * vw {
        let vx = mxx[i] - mx[i] * mx[i];
        let vy = myy[i] - my[i] * my[i];
        let cxy = mxy[i] - mx[i] * my[i];
        total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2))
            / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total / (vh * vw) as f64
}

/// Mean SSIM with an 11×11 Gaussian window (σ = 1.5), `K1 = 0.01`,
/// `K2 = 0.03`, data range 1, over window positions inside the image and
/// averaged over the three channels.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (h, w) = a.dims();
    let side = 2 * SSIM_RADIUS + 1;
    if h < side || w < side {
        return Err(Error::InvalidParameters(format!(
            "SSIM needs at least {side}x{side} pixels, got {h}x{w}"
        )));
    }
    let k = gaussian_kernel();
    let total: f64 = a
        .planes()
        .into_iter()
        .zip(b.planes())
        .map(|(pa, pb)| ssim_plane(pa, pb, &k))
        .sum();
    Ok(total / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hashed(h: usize, w: usize, off: u64) -> RgbImage {
        RgbImage::from_fn(h, w, |r, c| {
            [0u64, 1, 2].map(|k| {
                let v = ((r as u64 * 31 + c as u64 * 17 + k * 7 + off) * 2654435761) % (1u64 << 32);
                (v as f64 / (1u64 << 32) as f64) as f32
            })
        })
    }

    fn warped(a: &RgbImage) -> RgbImage {
        let (h, w) = a.dims();
        RgbImage::from_fn(h, w, |r, c| {
            let p = a.get(r, c);
            [0usize, 1, 2].map(|k| {
                (0.6 * p[k] as f64
                    + 0.2
                    + 0.15 * (r as f64 * 0.3 + c as f64 * 0.7 + k as f64).sin())
                .clamp(0.0, 1.0) as f32
            })
        })
    }

    #[test]
    fn ssim_matches_reference_values() {
        // Reference: skimage structural_similarity with gaussian_weights,
        // sigma 1.5, use_sample_covariance=False, data_range 1.
        for (h, w, want) in [(24, 30, 0.8174917506212189), (40, 33, 0.8176543422628321)] {
            let a = hashed(h, w, 0);
            let b = warped(&a);
            let got = ssim(&a, &b).unwrap();
            assert!((got - want).abs() < 1e-4, "{h}x{w}: {got} vs {want}");
        }
        let (h, w) = (32, 36);
        let a = RgbImage::from_fn(h, w, |r, c| {
            [0usize, 1, 2].map(|k| {
                (0.5 + 0.4 * (r as f64 * 0.2 + k as f64).sin() * (c as f64 * 0.15).cos()) as f32
            })
        });
        let noise = hashed(h, w, 0);
        let b = RgbImage::from_fn(h, w, |r, c| {
            let (p, n) = (a.get(r, c), noise.get(r, c));
            [0usize, 1, 2].map(|k| (p[k] as f64 + 0.02 * (n[k] as f64 - 0.5)) as f32)
        });
        let got = ssim(&a, &b).unwrap();
        assert!((got - 0.996268624040075).abs() < 1e-4, "{got}");
    }

    #[test]
    fn psnr_matches_reference_value() {
        let a = hashed(24, 30, 0);
        let b = warped(&a);
        assert!((psnr(&a, &b).unwrap() - 16.076125259715305).abs() < 1e-4);
    }

    #[test]
    fn psnr_examples() {
        let a = hashed(16, 16, 3);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let x = RgbImage::filled(20, 20, [0.5; 3]);
        let y = RgbImage::filled(20, 20, [0.5 + 1.0 / 255.0; 3]);
        let got = psnr(&x, &y).unwrap();
        // f32 storage of 0.5 + 1/255 limits agreement.
        assert!((got - 20.0 * 255f64.log10()).abs() < 1e-4, "{got}");
    }

    #[test]
    fn psnr_matches_scalar_loop() {
        let a = hashed(21, 19, 5);
        let b = hashed(21, 19, 9);
        let mut s = 0.0;
        for r in 0..21 {
            for c in 0..19 {
                let (p, q) = (a.get(r, c), b.get(r, c));
                for k in 0..3 {
                    s += (p[k] as f64 - q[k] as f64).powi(2);
                }
            }
        }
        let want = 10.0 * (1.0 / (s / (21.0 * 19.0 * 3.0))).log10();
        assert!((psnr(&a, &b).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn psnr_decreases_with_error() {
        let x = RgbImage::filled(12, 12, [0.4; 3]);
        let mut last = f64::INFINITY;
        for step in 1..10 {
            let y = RgbImage::filled(12, 12, [0.4 + step as f32 * 0.01; 3]);
            let p = psnr(&x, &y).unwrap();
            assert!(p < last);
            assert_eq!(p, psnr(&y, &x).unwrap());
            last = p;
        }
    }

    #[test]
    fn ssim_examples() {
        let a = hashed(20, 20, 1);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let half = RgbImage::filled(16, 16, [0.5; 3]);
        let neg = RgbImage::filled(16, 16, [1.0 - 0.5; 3]);
        assert!((ssim(&half, &neg).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(
            &RgbImage::filled(10, 40, [0.1; 3]),
            &RgbImage::filled(10, 40, [0.1; 3])
        )
        .is_err());
        let b = warped(&a);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_is_identity() {
        let a = hashed(10, 10, 2);
        assert_eq!(add_mixed_noise(&a, &NoiseParams::new(0.0, 0.0, 4)), a);
    }

    fn sample_variance(p: &PlaneImage, mean: f64) -> f64 {
        p.data()
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / p.len() as f64
    }

    #[test]
    fn mixed_noise_variance_follows_the_law() {
        let img = RgbImage::filled(578, 578, [0.5; 3]);
        let p = NoiseParams::new(0.0009, 0.0009, 12);
        let noisy = add_mixed_noise(&img, &p);
        let total: f64 = noisy
            .planes()
            .iter()
            .map(|pl| sample_variance(pl, 0.5))
            .sum::<f64>()
            / 3.0;
        assert!((total - 0.00135).abs() / 0.00135 < 0.05, "{total}");
    }

    #[test]
    fn additive_noise_has_flat_profile() {
        let p = NoiseParams::new(0.0, 0.0009, 8);
        let mut variances = Vec::new();
        for level in [0.2f32, 0.4, 0.6, 0.8] {
            let img = RgbImage::filled(200, 200, [level; 3]);
            let noisy = add_mixed_noise(&img, &p);
            let v = sample_variance(&noisy.r, level as f64);
            variances.push(v);
        }
        for v in &variances {
            assert!((v - 0.0009).abs() / 0.0009 < 0.05, "{variances:?}");
        }
    }

    #[test]
    fn noise_is_reproducible_and_seeds_agree_in_variance() {
        let img = RgbImage::filled(100, 100, [0.5; 3]);
        let p = NoiseParams::new(0.0009, 0.0009, 1);
        assert_eq!(add_mixed_noise(&img, &p), add_mixed_noise(&img, &p));
        let sigma2 = 0.00135;
        for seed in 2..7 {
            let noisy = add_mixed_noise(&img, &NoiseParams { seed, ..p });
            let n = noisy.r.len() as f64;
            let chi2 = sample_variance(&noisy.r, 0.5) * n / sigma2;
            let z = (chi2 - n) / (2.0 * n).sqrt();
            assert!(z.abs() < 2.576, "seed {seed}: z = {z}");
        }
    }

    #[test]
    fn make_pair_uses_left_lightness() {
        let left = hashed(12, 14, 0);
        let right = hashed(12, 14, 1);
        let pair = make_pair(&left, &right).unwrap();
        assert_eq!(pair.mono, rgb_to_lab(&left, WhitePoint::D65).unwrap().l);
        assert_eq!(pair.guide, right);
        assert_eq!(pair.truth, left);
        assert!(make_pair(&left, &hashed(12, 15, 0)).is_err());
    }
}
