use super::{LabImage, PlaneImage, RgbImage};
use crate::error::Result;

/// Reference white used by the XYZ normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WhitePoint {
    /// CIE standard illuminant D65, 2° observer.
    #[default]
    D65,
}

impl WhitePoint {
    fn xyz(self) -> [f64; 3] {
        match self {
            WhitePoint::D65 => [0.95047, 1.0, 1.08883],
        }
    }
}

// sRGB primaries, D65.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412453, 0.357580, 0.180423],
    [0.212671, 0.715160, 0.072169],
    [0.019334, 0.119193, 0.950227],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.240479, -1.537150, -0.498535],
    [-0.969256, 1.875992, 0.041556],
    [0.055648, -0.204043, 1.057311],
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

#[inline]
fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.0031308 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

#[inline]
fn lab_f_inv(f: f64) -> f64 {
    let t = f * f * f;
    if t > EPSILON {
        t
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

/// Map a CIELAB chroma value in `[-128, 127]` to `[0, 1]`.
#[inline]
pub fn encode_chroma(v: f64) -> f64 {
    (v + 128.0) / 255.0
}

/// Inverse of [`encode_chroma`].
#[inline]
pub fn decode_chroma(v: f64) -> f64 {
    v * 255.0 - 128.0
}

/// Convert one nonlinear sRGB pixel to normalized Lab `(L/100, a', b')`.
pub fn rgb_to_lab_pixel(rgb: [f64; 3], white: WhitePoint) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let w = white.xyz();
    let mut f = [0.0; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        let xyz = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
        f[i] = lab_f(xyz / w[i]);
    }
    let l = 116.0 * f[1] - 16.0;
    let a = 500.0 * (f[0] - f[1]);
    let b = 200.0 * (f[1] - f[2]);
    [l / 100.0, encode_chroma(a), encode_chroma(b)]
}

/// Convert one normalized Lab pixel back to nonlinear sRGB, unclamped.
pub fn lab_to_rgb_pixel(lab: [f64; 3], white: WhitePoint) -> [f64; 3] {
    let l = lab[0] * 100.0;
    let a = decode_chroma(lab[1]);
    let b = decode_chroma(lab[2]);
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;
    let w = white.xyz();
    let xyz = [
        lab_f_inv(fx) * w[0],
        lab_f_inv(fy) * w[1],
        lab_f_inv(fz) * w[2],
    ];
    let mut rgb = [0.0; 3];
    for (i, row) in XYZ_TO_RGB.iter().enumerate() {
        let lin = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
        rgb[i] = linear_to_srgb(lin.max(0.0));
    }
    rgb
}

pub fn rgb_to_lab(rgb: &RgbImage, white: WhitePoint) -> Result<LabImage> {
    rgb.r.ensure_same_dims(&rgb.g)?;
    rgb.r.ensure_same_dims(&rgb.b)?;
    let (h, w) = rgb.dims();
    let mut l = PlaneImage::new(h, w);
    let mut a = PlaneImage::new(h, w);
    let mut b = PlaneImage::new(h, w);
    for i in 0..h * w {
        let px = [
            rgb.r.data()[i] as f64,
            rgb.g.data()[i] as f64,
            rgb.b.data()[i] as f64,
        ];
        let lab = rgb_to_lab_pixel(px, white);
        l.data_mut()[i] = lab[0] as f32;
        a.data_mut()[i] = lab[1] as f32;
        b.data_mut()[i] = lab[2] as f32;
    }
    Ok(LabImage { l, a, b })
}

/// Convert back to RGB; out-of-gamut results are clamped to `[0, 1]`.
pub fn lab_to_rgb(lab: &LabImage, white: WhitePoint) -> Result<RgbImage> {
    lab.l.ensure_same_dims(&lab.a)?;
    lab.l.ensure_same_dims(&lab.b)?;
    let (h, w) = lab.dims();
    let mut out = RgbImage::filled(h, w, [0.0; 3]);
    for i in 0..h * w {
        let px = [
            lab.l.data()[i] as f64,
            lab.a.data()[i] as f64,
            lab.b.data()[i] as f64,
        ];
        let rgb = lab_to_rgb_pixel(px, white);
        out.r.data_mut()[i] = rgb[0].clamp(0.0, 1.0) as f32;
        out.g.data_mut()[i] = rgb[1].clamp(0.0, 1.0) as f32;
        out.b.data_mut()[i] = rgb[2].clamp(0.0, 1.0) as f32;
    }
    Ok(out)
}

/// Per-pixel mean of the three channels.
pub fn gray_of_color(rgb: &RgbImage) -> Result<PlaneImage> {
    rgb.r.ensure_same_dims(&rgb.g)?;
    rgb.r.ensure_same_dims(&rgb.b)?;
    let (h, w) = rgb.dims();
    let data = (0..h * w)
        .map(|i| (rgb.r.data()[i] + rgb.g.data()[i] + rgb.b.data()[i]) / 3.0)
        .collect();
    PlaneImage::from_vec(h, w, data)
}
