//! Just-noticeable-difference thresholds on the monochrome target.
//!
//! `J = J_L + J_T − 0.3·min(J_L, J_T)` combines a luminance-adaptation term
//! driven by the 5×5 background mean with a texture term driven by the local
//! gradient. All values are in normalized luminance units.

use crate::imagecore::{box_mean, PlaneImage};

/// Overlap discount between the luminance and texture terms.
const OVERLAP: f32 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JndParams {
    /// Lower bound for the luminance term.
    pub luminance_floor: f32,
    /// Slope of the texture term in the local max gradient magnitude.
    pub texture_gain: f32,
    /// Upper bound for the texture term.
    pub texture_cap: f32,
    /// Radius of the background-luminance window.
    pub background_radius: usize,
}

impl Default for JndParams {
    fn default() -> Self {
        Self {
            luminance_floor: 3.0 / 255.0,
            texture_gain: 0.25,
            texture_cap: 30.0 / 255.0,
            background_radius: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JndMap {
    pub thresholds: PlaneImage,
}

impl JndMap {
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.thresholds.get(row, col)
    }
}

/// Luminance-adaptation curve: high thresholds in dark and bright
/// backgrounds, minimum of 3 levels near mid-gray.
pub fn luminance_threshold(background: f32, floor: f32) -> f32 {
    let bg = background.clamp(0.0, 1.0) * 255.0;
    let t = if bg <= 127.0 {
        17.0 * (1.0 - (bg / 127.0).sqrt()) + 3.0
    } else {
        3.0 / 128.0 * (bg - 127.0) + 3.0
    };
    (t / 255.0).max(floor)
}

/// Combine the two terms.
#[inline]
pub fn combine(luminance: f32, texture: f32) -> f32 {
    luminance + texture - OVERLAP * luminance.min(texture)
}

/// Central-difference gradient magnitude, then a 3×3 max filter.
fn local_max_gradient(mono: &PlaneImage) -> PlaneImage {
    let (h, w) = mono.dims();
    let grad = PlaneImage::from_fn(h, w, |r, c| {
        let (r, c) = (r as isize, c as isize);
        let gx = (mono.get_clamped(r, c + 1) - mono.get_clamped(r, c - 1)) * 0.5;
        let gy = (mono.get_clamped(r + 1, c) - mono.get_clamped(r - 1, c)) * 0.5;
        (gx * gx + gy * gy).sqrt()
    });
    PlaneImage::from_fn(h, w, |r, c| {
        let mut m = 0.0f32;
        for rr in r.saturating_sub(1)..(r + 2).min(h) {
            for cc in c.saturating_sub(1)..(c + 2).min(w) {
                m = m.max(grad.get(rr, cc));
            }
        }
        m
    })
}

pub fn compute_jnd(mono: &PlaneImage, params: &JndParams) -> JndMap {
    let background = box_mean(mono, params.background_radius);
    let gradient = local_max_gradient(mono);
    let (h, w) = mono.dims();
    let thresholds = PlaneImage::from_fn(h, w, |r, c| {
        let jl = luminance_threshold(background.get(r, c), params.luminance_floor);
        let jt = (params.texture_gain * gradient.get(r, c)).min(params.texture_cap);
        combine(jl, jt)
    });
    JndMap { thresholds }
}

/// Two luminances are similar when they differ by less than the threshold.
#[inline]
pub fn is_similar(a: f32, b: f32, jnd_at_a: f32) -> bool {
    (a - b).abs() < jnd_at_a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn combination_examples() {
        assert!((combine(0.1, 0.1) - 0.17).abs() < 1e-7);
        assert_eq!(combine(0.04, 0.0), 0.04);
    }

    #[test]
    fn constant_image_gives_flat_map() {
        let mono = PlaneImage::filled(12, 15, 0.5);
        let jnd = compute_jnd(&mono, &JndParams::default());
        let expected = luminance_threshold(0.5, 3.0 / 255.0);
        assert!(jnd.thresholds.data().iter().all(|&v| v == expected));
        // Background 127.5 sits just above the minimum of the curve.
        assert!((expected * 255.0 - (3.0 + 3.0 / 128.0 * 0.5)).abs() < 1e-4);
    }

    #[test]
    fn curve_has_its_minimum_near_mid_gray() {
        let floor = 3.0 / 255.0;
        let mid = luminance_threshold(127.0 / 255.0, floor);
        assert!((mid - floor).abs() < 1e-7);
        assert!(luminance_threshold(0.0, floor) > mid);
        assert!(luminance_threshold(1.0, floor) > mid);
        assert!((luminance_threshold(0.0, floor) * 255.0 - 20.0).abs() < 1e-4);
    }

    #[test]
    fn similarity_rule() {
        assert!(is_similar(0.50, 0.505, 0.02));
        assert!(!is_similar(0.50, 0.60, 0.02));
        assert!(is_similar(0.3, 0.3, 1e-6));
    }

    #[test]
    fn texture_raises_threshold() {
        let flat = PlaneImage::filled(10, 10, 0.5);
        let striped = PlaneImage::from_fn(10, 10, |_, c| if c % 2 == 0 { 0.45 } else { 0.55 });
        let p = JndParams::default();
        let jf = compute_jnd(&flat, &p);
        let js = compute_jnd(&striped, &p);
        for r in 2..8 {
            for c in 2..8 {
                assert!(js.at(r, c) >= jf.at(r, c));
            }
        }
    }

    proptest! {
        #[test]
        fn combination_bounds(l in 1e-4f32..0.2, t in 0.0f32..0.2) {
            let j = combine(l, t);
            prop_assert!(j >= 0.7 * l.max(t) - 1e-7);
            prop_assert!(j <= l + t + 1e-7);
        }

        #[test]
        fn thresholds_stay_in_range(seed in 0u64..1000) {
            let mono = PlaneImage::from_fn(9, 9, |r, c| {
                (((r as u64 * 7919 + c as u64 * 104729 + seed * 31) % 1000) as f32) / 999.0
            });
            let jnd = compute_jnd(&mono, &JndParams::default());
            for &v in jnd.thresholds.data() {
                prop_assert!(v > 0.0 && v <= 0.5);
            }
        }
    }
}
