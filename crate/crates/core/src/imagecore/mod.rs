//! Image containers, CIELAB conversion, guidance resampling, intensity
//! matching and file I/O.
//!
//! Every plane stores `f32` samples in `[0, 1]`, row-major with a top-left
//! origin. Lab chroma planes are stored affinely mapped from `[-128, 127]` to
//! `[0, 1]` so that thresholds and weights work on a single numeric range.

mod io;
mod lab;
mod resample;

pub use io::{read_plane, read_rgb, write_plane, write_rgb, BitDepth};
pub use lab::{
    decode_chroma, encode_chroma, gray_of_color, lab_to_rgb, lab_to_rgb_pixel, rgb_to_lab,
    rgb_to_lab_pixel, WhitePoint,
};
pub use resample::{
    box_downsample, intensity_match, upsample_bicubic, upsample_to, IntensityMatch, IntensityMode,
    Lambda,
};

use crate::error::{Error, Result};

/// Dense single-channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl PlaneImage {
    pub fn new(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::BadPlaneLength {
                height,
                width,
                len: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// `(height, width)`
    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.data[row * self.width + col] = value;
    }

    /// Sample with coordinates clamped to the image border.
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f32 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c)
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamp01(&mut self) {
        for v in &mut self.data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let mean = self.mean();
        let var = self
            .data
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / self.data.len() as f64;
        var.sqrt()
    }

    pub fn max_abs_diff(&self, other: &PlaneImage) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    pub fn ensure_same_dims(&self, other: &PlaneImage) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    /// Copy of the rectangle starting at `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Self {
        Self::from_fn(height, width, |r, c| self.get(row + r, col + c))
    }
}

/// Three-plane nonlinear RGB image.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub r: PlaneImage,
    pub g: PlaneImage,
    pub b: PlaneImage,
}

impl RgbImage {
    pub fn new(r: PlaneImage, g: PlaneImage, b: PlaneImage) -> Result<Self> {
        r.ensure_same_dims(&g)?;
        r.ensure_same_dims(&b)?;
        Ok(Self { r, g, b })
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        Self {
            r: PlaneImage::filled(height, width, rgb[0]),
            g: PlaneImage::filled(height, width, rgb[1]),
            b: PlaneImage::filled(height, width, rgb[2]),
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Self {
        let mut out = Self::filled(height, width, [0.0; 3]);
        for row in 0..height {
            for col in 0..width {
                out.set(row, col, f(row, col));
            }
        }
        out
    }

    pub fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }

    pub fn height(&self) -> usize {
        self.r.height()
    }

    pub fn width(&self) -> usize {
        self.r.width()
    }

    pub fn planes(&self) -> [&PlaneImage; 3] {
        [&self.r, &self.g, &self.b]
    }

    pub fn planes_mut(&mut self) -> [&mut PlaneImage; 3] {
        [&mut self.r, &mut self.g, &mut self.b]
    }

    pub fn get(&self, row: usize, col: usize) -> [f32; 3] {
        [
            self.r.get(row, col),
            self.g.get(row, col),
            self.b.get(row, col),
        ]
    }

    pub fn set(&mut self, row: usize, col: usize, rgb: [f32; 3]) {
        self.r.set(row, col, rgb[0]);
        self.g.set(row, col, rgb[1]);
        self.b.set(row, col, rgb[2]);
    }

    pub fn ensure_same_dims(&self, other: &RgbImage) -> Result<()> {
        self.r.ensure_same_dims(&other.r)
    }

    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Self {
        Self {
            r: self.r.crop(row, col, height, width),
            g: self.g.crop(row, col, height, width),
            b: self.b.crop(row, col, height, width),
        }
    }
}

/// Lightness and the two affinely mapped chroma planes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub l: PlaneImage,
    pub a: PlaneImage,
    pub b: PlaneImage,
}

impl LabImage {
    pub fn new(l: PlaneImage, a: PlaneImage, b: PlaneImage) -> Result<Self> {
        l.ensure_same_dims(&a)?;
        l.ensure_same_dims(&b)?;
        Ok(Self { l, a, b })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.l.dims()
    }

    pub fn height(&self) -> usize {
        self.l.height()
    }

    pub fn width(&self) -> usize {
        self.l.width()
    }

    pub fn planes(&self) -> [&PlaneImage; 3] {
        [&self.l, &self.a, &self.b]
    }

    pub fn planes_mut(&mut self) -> [&mut PlaneImage; 3] {
        [&mut self.l, &mut self.a, &mut self.b]
    }
}

/// Geometry of a rectified image pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairGeometry {
    /// Largest horizontal displacement between corresponding pixels (D).
    pub max_disparity: usize,
    /// Residual vertical misalignment the search must absorb.
    pub vertical_tolerance: usize,
}

impl Default for PairGeometry {
    fn default() -> Self {
        Self {
            max_disparity: 64,
            vertical_tolerance: 0,
        }
    }
}

/// Summed-area table used for box means.
#[derive(Debug)]
pub(crate) struct Integral {
    width: usize,
    sums: Vec<f64>,
}

impl Integral {
    pub(crate) fn new(plane: &PlaneImage) -> Self {
        Self::from_values(plane.height(), plane.width(), |i| plane.data()[i] as f64)
    }

    pub(crate) fn from_values(height: usize, width: usize, value: impl Fn(usize) -> f64) -> Self {
        let stride = width + 1;
        let mut sums = vec![0.0; (height + 1) * stride];
        for r in 0..height {
            let mut acc = 0.0;
            for c in 0..width {
                acc += value(r * width + c);
                sums[(r + 1) * stride + c + 1] = sums[r * stride + c + 1] + acc;
            }
        }
        Self { width, sums }
    }

    /// Sum over rows `r0..r1` and columns `c0..c1`.
    #[inline]
    pub(crate) fn sum(&self, r0: usize, c0: usize, r1: usize, c1: usize) -> f64 {
        let s = self.width + 1;
        self.sums[r1 * s + c1] - self.sums[r0 * s + c1] - self.sums[r1 * s + c0]
            + self.sums[r0 * s + c0]
    }
}

/// Mean over the `(2 * radius + 1)²` window around every pixel, clipped to
/// the image.
pub(crate) fn box_mean(plane: &PlaneImage, radius: usize) -> PlaneImage {
    let integral = Integral::new(plane);
    let (h, w) = plane.dims();
    PlaneImage::from_fn(h, w, |r, c| {
        let r0 = r.saturating_sub(radius);
        let c0 = c.saturating_sub(radius);
        let r1 = (r + radius + 1).min(h);
        let c1 = (c + radius + 1).min(w);
        (integral.sum(r0, c0, r1, c1) / ((r1 - r0) * (c1 - c0)) as f64) as f32
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(PlaneImage::from_vec(2, 3, vec![0.0; 5]).is_err());
        let p = PlaneImage::from_vec(2, 3, (0..6).map(|v| v as f32).collect()).unwrap();
        assert_eq!(p.get(1, 2), 5.0);
        assert_eq!(p.row(1), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn rgb_rejects_mismatched_planes() {
        let a = PlaneImage::new(2, 2);
        let b = PlaneImage::new(2, 3);
        assert!(RgbImage::new(a.clone(), a.clone(), b).is_err());
    }

    #[test]
    fn box_mean_matches_brute_force() {
        let p = PlaneImage::from_fn(7, 9, |r, c| ((r * 31 + c * 17) % 11) as f32 / 11.0);
        let m = box_mean(&p, 2);
        for r in 0..7usize {
            for c in 0..9usize {
                let mut s = 0.0;
                let mut n = 0;
                for rr in r.saturating_sub(2)..(r + 3).min(7) {
                    for cc in c.saturating_sub(2)..(c + 3).min(9) {
                        s += p.get(rr, cc) as f64;
                        n += 1;
                    }
                }
                assert!((m.get(r, c) as f64 - s / n as f64).abs() < 1e-6);
            }
        }
    }
}
