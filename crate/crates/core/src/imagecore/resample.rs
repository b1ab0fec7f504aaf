use super::{box_mean, PlaneImage};
use crate::error::{Error, Result};

const MIN_MEAN: f64 = 1e-6;

#[inline]
fn cubic_weight(x: f64) -> f64 {
    // Keys kernel, a = -0.5.
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Taps and weights for resampling one axis from `src` to `dst` samples.
fn axis_taps(src: usize, dst: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let x = (i as f64 + 0.5) * scale - 0.5;
            let base = x.floor();
            let t = x - base;
            let mut idx = [0usize; 4];
            let mut w = [0.0; 4];
            for k in 0..4 {
                let offset = k as f64 - 1.0;
                idx[k] = (base as isize + k as isize - 1).clamp(0, src as isize - 1) as usize;
                w[k] = cubic_weight(t - offset);
            }
            let sum: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= sum);
            (idx, w)
        })
        .collect()
}

/// Bicubic resampling to an explicit size. Borders are clamped and the
/// result is clamped to `[0, 1]`.
pub fn upsample_to(img: &PlaneImage, height: usize, width: usize) -> PlaneImage {
    if img.dims() == (height, width) {
        return img.clone();
    }
    let rows = axis_taps(img.height(), height);
    let cols = axis_taps(img.width(), width);

    // Horizontal pass into an intermediate of size src_h x width.
    let mut tmp = vec![0.0f64; img.height() * width];
    for r in 0..img.height() {
        let src = img.row(r);
        for (c, (idx, w)) in cols.iter().enumerate() {
            tmp[r * width + c] = (0..4).map(|k| w[k] * src[idx[k]] as f64).sum();
        }
    }
    PlaneImage::from_fn(height, width, |r, c| {
        let (idx, w) = &rows[r];
        let v: f64 = (0..4).map(|k| w[k] * tmp[idx[k] * width + c]).sum();
        v.clamp(0.0, 1.0) as f32
    })
}

/// Bicubic upsampling by `factor` (≥ 1); output dims are the rounded
/// products of the input dims and the factor.
pub fn upsample_bicubic(img: &PlaneImage, factor: f64) -> Result<PlaneImage> {
    if !(factor >= 1.0) || !factor.is_finite() {
        return Err(Error::InvalidParameters(format!(
            "upsampling factor must be >= 1, got {factor}"
        )));
    }
    let h = (img.height() as f64 * factor).round() as usize;
    let w = (img.width() as f64 * factor).round() as usize;
    Ok(upsample_to(img, h, w))
}

/// Mean over non-overlapping `factor × factor` boxes; trailing rows and
/// columns that do not fill a box are dropped.
pub fn box_downsample(img: &PlaneImage, factor: usize) -> PlaneImage {
    let h = img.height() / factor;
    let w = img.width() / factor;
    let n = (factor * factor) as f64;
    PlaneImage::from_fn(h, w, |r, c| {
        let mut s = 0.0f64;
        for rr in 0..factor {
            for cc in 0..factor {
                s += img.get(r * factor + rr, c * factor + cc) as f64;
            }
        }
        (s / n) as f32
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityMode {
    /// One ratio for the whole image.
    Global,
    /// One ratio per pixel, computed over a `window × window` neighborhood.
    Local { window: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lambda {
    Global(f64),
    Local(PlaneImage),
}

#[derive(Debug, Clone)]
pub struct IntensityMatch {
    pub scaled: PlaneImage,
    pub lambda: Lambda,
    /// Set when a gray mean fell below the division guard and identity
    /// scaling was used instead.
    pub degenerate: bool,
}

/// Scale `gray` to the intensity level of `mono` by the mean luminance ratio.
pub fn intensity_match(
    mono: &PlaneImage,
    gray: &PlaneImage,
    mode: IntensityMode,
) -> Result<IntensityMatch> {
    mono.ensure_same_dims(gray)?;
    match mode {
        IntensityMode::Global => {
            let gm = gray.mean();
            let (lambda, degenerate) = if gm < MIN_MEAN {
                (1.0, true)
            } else {
                (mono.mean() / gm, false)
            };
            let scaled = gray.map(|v| ((v as f64 * lambda).clamp(0.0, 1.0)) as f32);
            Ok(IntensityMatch {
                scaled,
                lambda: Lambda::Global(lambda),
                degenerate,
            })
        }
        IntensityMode::Local { window } => {
            if window == 0 {
                return Err(Error::InvalidParameters(
                    "intensity window must be positive".into(),
                ));
            }
            let radius = window / 2;
            let mono_mean = box_mean(mono, radius);
            let gray_mean = box_mean(gray, radius);
            let mut degenerate = false;
            let (h, w) = mono.dims();
            let lambda = PlaneImage::from_fn(h, w, |r, c| {
                let g = gray_mean.get(r, c) as f64;
                if g < MIN_MEAN {
                    degenerate = true;
                    1.0
                } else {
                    (mono_mean.get(r, c) as f64 / g) as f32
                }
            });
            let scaled = PlaneImage::from_fn(h, w, |r, c| {
                (gray.get(r, c) * lambda.get(r, c)).clamp(0.0, 1.0)
            });
            Ok(IntensityMatch {
                scaled,
                lambda: Lambda::Local(lambda),
                degenerate,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn global_lambda(m: &IntensityMatch) -> f64 {
        match m.lambda {
            Lambda::Global(l) => l,
            _ => panic!("expected a global ratio"),
        }
    }

    #[test]
    fn constant_plane_stays_constant() {
        let p = PlaneImage::filled(9, 13, 0.5);
        let up = upsample_bicubic(&p, 2.0).unwrap();
        assert_eq!(up.dims(), (18, 26));
        assert!(up.data().iter().all(|&v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn unit_factor_is_identity() {
        let p = PlaneImage::from_fn(6, 7, |r, c| ((r * 7 + c) % 5) as f32 / 5.0);
        assert_eq!(upsample_bicubic(&p, 1.0).unwrap(), p);
    }

    #[test]
    fn rational_factor_rounds_dims() {
        let p = PlaneImage::filled(10, 15, 0.2);
        let up = upsample_bicubic(&p, 1.5).unwrap();
        assert_eq!(up.dims(), (15, 23));
        assert!(upsample_bicubic(&p, 0.5).is_err());
    }

    #[test]
    fn ramp_survives_up_then_down() {
        let p = PlaneImage::from_fn(40, 48, |r, c| {
            0.1 + 0.6 * (r as f32 / 40.0) + 0.2 * (c as f32 / 48.0)
        });
        let up = upsample_bicubic(&p, 2.0).unwrap();
        let down = box_downsample(&up, 2);
        assert_eq!(down.dims(), p.dims());
        assert!(
            down.max_abs_diff(&p) <= 2.0 / 255.0,
            "{}",
            down.max_abs_diff(&p)
        );
    }

    #[test]
    fn global_ratio_is_exact() {
        let gray = PlaneImage::from_fn(4, 4, |r, c| 0.05 + 0.02 * (r + c) as f32);
        let mono = gray.map(|v| 2.0 * v);
        let m = intensity_match(&mono, &gray, IntensityMode::Global).unwrap();
        assert!((global_lambda(&m) - 2.0).abs() < 1e-6);

        let same = intensity_match(&gray, &gray, IntensityMode::Global).unwrap();
        assert!((global_lambda(&same) - 1.0).abs() < 1e-12);
        assert!(same.scaled.max_abs_diff(&gray) < 1e-6);
    }

    #[test]
    fn dark_gray_falls_back_to_identity() {
        let gray = PlaneImage::new(3, 3);
        let mono = PlaneImage::filled(3, 3, 0.4);
        let m = intensity_match(&mono, &gray, IntensityMode::Global).unwrap();
        assert!(m.degenerate);
        assert_eq!(global_lambda(&m), 1.0);
    }

    #[test]
    fn local_ratio_tracks_windowed_means() {
        // Left half brightened by 1.5, right half by 1.2.
        let gray = PlaneImage::from_fn(12, 24, |r, c| 0.2 + 0.01 * ((r * 3 + c * 5) % 7) as f32);
        let mono = PlaneImage::from_fn(12, 24, |r, c| {
            gray.get(r, c) * if c < 12 { 1.5 } else { 1.2 }
        });
        let window = 5;
        let m = intensity_match(&mono, &gray, IntensityMode::Local { window }).unwrap();
        let Lambda::Local(lambda) = &m.lambda else {
            panic!()
        };
        for r in 0..12usize {
            for c in 0..24usize {
                let mut sm = 0.0f64;
                let mut sg = 0.0f64;
                for rr in r.saturating_sub(2)..(r + 3).min(12) {
                    for cc in c.saturating_sub(2)..(c + 3).min(24) {
                        sm += mono.get(rr, cc) as f64;
                        sg += gray.get(rr, cc) as f64;
                    }
                }
                assert!((lambda.get(r, c) as f64 - sm / sg).abs() < 1e-5);
            }
        }
        assert!((lambda.get(6, 2) - 1.5).abs() < 1e-5);
        assert!((lambda.get(6, 21) - 1.2).abs() < 1e-5);
    }

    #[test]
    fn ratio_is_scale_equivariant() {
        let gray = PlaneImage::from_fn(8, 8, |r, c| 0.1 + 0.03 * ((r + 2 * c) % 6) as f32);
        let mono = gray.map(|v| 0.8 * v + 0.05);
        let base = global_lambda(&intensity_match(&mono, &gray, IntensityMode::Global).unwrap());
        for k in [0.5f32, 1.3, 2.0] {
            let scaled = mono.map(|v| k * v);
            let l = global_lambda(&intensity_match(&scaled, &gray, IntensityMode::Global).unwrap());
            assert!((l - k as f64 * base).abs() < 1e-6 * l.max(1.0));
        }
    }
}
