//! Procedural stereo scenes and small synthetic fixtures.
//!
//! A scene is a stack of textured planar layers seen by a rectified pair.
//! Layer `i` has disparity `d(x, y) = d0 + sx·x + sy·y` in left-view
//! coordinates, so a right-view pixel `x'` on row `y` sees the layer point
//! with `x = (x' + d0 + sy·y) / (1 − sx)`. Nearer layers (larger disparity)
//! win. Both views are rendered with 2×2 supersampling; the right view gets
//! its own sensor noise and an optional exposure gain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::imagecore::{box_mean, LabImage, PlaneImage, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    pub min_disparity: f64,
    pub max_disparity: f64,
    /// Foreground layers in front of the background.
    pub layers: usize,
    /// Standard deviation of per-view sensor noise.
    pub sensor_sigma: f64,
    /// Gain applied to the right view.
    pub exposure_gain: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            height: 555,
            width: 660,
            seed: 0,
            min_disparity: 12.0,
            max_disparity: 56.0,
            layers: 7,
            sensor_sigma: 0.004,
            exposure_gain: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StereoScene {
    pub name: String,
    pub left: RgbImage,
    pub right: RgbImage,
}

fn hash2(ix: i64, iy: i64, seed: u64) -> f64 {
    let mut h = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((ix as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add((iy as u64).wrapping_mul(0x94D0_49BB_1331_11EB));
    h ^= h >> 31;
    h = h.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    h ^= h >> 32;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smoothly interpolated lattice noise in `[0, 1)`.
fn value_noise(x: f64, y: f64, cell: f64, seed: u64) -> f64 {
    let (u, v) = (x / cell, y / cell);
    let (ix, iy) = (u.floor() as i64, v.floor() as i64);
    let (fx, fy) = (u - ix as f64, v - iy as f64);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (sx, sy) = (s(fx), s(fy));
    let a = hash2(ix, iy, seed);
    let b = hash2(ix + 1, iy, seed);
    let c = hash2(ix, iy + 1, seed);
    let d = hash2(ix + 1, iy + 1, seed);
    let top = a + (b - a) * sx;
    let bot = c + (d - c) * sx;
    top + (bot - top) * sy
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Everywhere,
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Everywhere => true,
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
            Shape::Ellipse { cx, cy, rx, ry } => {
                let (u, v) = ((x - cx) / rx, (y - cy) / ry);
                u * u + v * v <= 1.0
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    shape: Shape,
    d0: f64,
    sx: f64,
    sy: f64,
    base: [f64; 3],
    accent: [f64; 3],
    /// Texture amplitude and lattice cell sizes.
    grain: f64,
    fine_cell: f64,
    coarse_cell: f64,
    /// Period of accent-colored stripes; 0 disables them.
    stripe: f64,
    seed: u64,
}

impl Layer {
    fn disparity(&self, x: f64, y: f64) -> f64 {
        self.d0 + self.sx * x + self.sy * y
    }

    /// Left-view abscissa of the layer point seen at right-view `xr`.
    fn left_x(&self, xr: f64, y: f64) -> f64 {
        (xr + self.d0 + self.sy * y) / (1.0 - self.sx)
    }

    fn color(&self, x: f64, y: f64) -> [f64; 3] {
        let fine = value_noise(x, y, self.fine_cell, self.seed) - 0.5;
        let coarse = value_noise(x, y, self.coarse_cell, self.seed ^ 0x55) - 0.5;
        let shade = 1.0 + self.grain * (fine + 0.8 * coarse);
        let mix = if self.stripe > 0.0 {
            let t = ((x + 0.6 * y) / self.stripe).rem_euclid(1.0);
            if t < 0.35 {
                1.0
            } else {
                0.0
            }
        } else {
            (value_noise(x, y, self.coarse_cell * 3.0, self.seed ^ 0xAA) - 0.2).clamp(0.0, 0.6)
        };
        [0, 1, 2]
            .map(|k| ((self.base[k] * (1.0 - mix) + self.accent[k] * mix) * shade).clamp(0.0, 1.0))
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let mut c = [0.0f64; 3];
    for v in c.iter_mut() {
        *v = rng.random_range(0.12..0.88);
    }
    c
}

fn build_layers(p: &SceneParams, rng: &mut ChaCha8Rng) -> Vec<Layer> {
    let (w, h) = (p.width as f64, p.height as f64);
    let span = p.max_disparity - p.min_disparity;
    let mut layers = Vec::with_capacity(p.layers + 1);
    // Background: a slanted plane receding toward the top.
    let bg_top = p.min_disparity;
    let bg_bottom = p.min_disparity + 0.3 * span;
    layers.push(Layer {
        shape: Shape::Everywhere,
        d0: bg_top,
        sx: 0.0,
        sy: (bg_bottom - bg_top) / h,
        base: random_color(rng),
        accent: random_color(rng),
        grain: rng.random_range(0.15..0.35),
        fine_cell: rng.random_range(4.0..8.0),
        coarse_cell: rng.random_range(12.0..30.0),
        stripe: 0.0,
        seed: rng.random(),
    });
    for i in 0..p.layers {
        let depth = (i + 1) as f64 / p.layers as f64;
        let d0 = p.min_disparity + span * (0.3 + 0.7 * depth) * rng.random_range(0.85..1.0);
        let cx = rng.random_range(0.1..0.9) * w;
        let cy = rng.random_range(0.1..0.9) * h;
        let rx = rng.random_range(0.07..0.2) * w;
        let ry = rng.random_range(0.07..0.22) * h;
        let shape = if rng.random_bool(0.5) {
            Shape::Rect {
                x0: cx - rx,
                y0: cy - ry,
                x1: cx + rx,
                y1: cy + ry,
            }
        } else {
            Shape::Ellipse { cx, cy, rx, ry }
        };
        let sx = rng.random_range(-0.02..0.02);
        let sy = rng.random_range(-0.02..0.02);
        layers.push(Layer {
            shape,
            // Keep the disparity at the layer center near d0.
            d0: d0 - sx * cx - sy * cy,
            sx,
            sy,
            base: random_color(rng),
            accent: random_color(rng),
            grain: rng.random_range(0.1..0.35),
            fine_cell: rng.random_range(3.0..8.0),
            coarse_cell: rng.random_range(10.0..40.0),
            stripe: if rng.random_bool(0.3) {
                rng.random_range(14.0..40.0)
            } else {
                0.0
            },
            seed: rng.random(),
        });
    }
    layers
}

fn render(layers: &[Layer], h: usize, w: usize, right_view: bool) -> RgbImage {
    let offsets = [0.25, 0.75];
    RgbImage::from_fn(h, w, |r, c| {
        let mut acc = [0.0; 3];
        for &oy in &offsets {
            for &ox in &offsets {
                let (xv, y) = (c as f64 + ox, r as f64 + oy);
                let mut best: Option<(f64, [f64; 3])> = None;
                for layer in layers {
                    let x = if right_view { layer.left_x(xv, y) } else { xv };
                    if !layer.shape.contains(x, y) {
                        continue;
                    }
                    let d = layer.disparity(x, y);
                    if best.is_none_or(|(bd, _)| d > bd) {
                        best = Some((d, layer.color(x, y)));
                    }
                }
                let col = best.map(|b| b.1).unwrap_or([0.0; 3]);
                for k in 0..3 {
                    acc[k] += col[k] / 4.0;
                }
            }
        }
        acc.map(|v| v as f32)
    })
}

fn sensor(img: &mut RgbImage, sigma: f64, gain: f64, rng: &mut ChaCha8Rng) {
    for plane in img.planes_mut() {
        for v in plane.data_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = ((*v as f64) * gain + sigma * z).clamp(0.0, 1.0) as f32;
        }
    }
}

/// Render a rectified left/right pair.
pub fn procedural_scene(p: &SceneParams) -> StereoScene {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let layers = build_layers(p, &mut rng);
    let mut left = render(&layers, p.height, p.width, false);
    let mut right = render(&layers, p.height, p.width, true);
    sensor(&mut left, p.sensor_sigma, 1.0, &mut rng);
    sensor(&mut right, p.sensor_sigma, p.exposure_gain, &mut rng);
    StereoScene {
        name: format!("scene{:02}", p.seed),
        left,
        right,
    }
}

/// Smooth random plane rescaled to `[lo, hi]`.
pub fn smooth_noise_plane(h: usize, w: usize, seed: u64, lo: f32, hi: f32) -> PlaneImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = PlaneImage::from_fn(h, w, |_, _| rng.random::<f32>());
    let blurred = box_mean(&box_mean(&noise, 1), 1);
    let (mn, mx) = blurred
        .data()
        .iter()
        .fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    blurred.map(|v| lo + (hi - lo) * (v - mn) / (mx - mn))
}

/// A translated pair with a strip of content missing from the guidance.
#[derive(Debug, Clone)]
pub struct OcclusionFixture {
    pub mono: PlaneImage,
    pub guide: LabImage,
    /// True where the target pixel has no correspondence in the guidance.
    pub occluded: Vec<bool>,
}

/// Target `mono`, guidance `guide(c) = mono(c + d)` except on guidance
/// columns `strip` (and the rightmost `d` columns), which show unrelated
/// texture. Target column `c` thus corresponds to guidance column `c − d`.
pub fn occlusion_fixture(
    h: usize,
    w: usize,
    d: usize,
    strip: std::ops::Range<usize>,
    seed: u64,
) -> OcclusionFixture {
    let mono = smooth_noise_plane(h, w, seed, 0.3, 0.8);
    let novel = smooth_noise_plane(h, w, seed + 1, 0.3, 0.8);
    let guide_l = PlaneImage::from_fn(h, w, |r, c| {
        if strip.contains(&c) || c + d >= w {
            novel.get(r, c)
        } else {
            mono.get(r, c + d)
        }
    });
    let flat = PlaneImage::filled(h, w, 0.5);
    let guide = LabImage::new(guide_l, flat.clone(), flat).expect("equal dims");
    let occluded = (0..h * w)
        .map(|i| {
            let c = i % w;
            c < d || strip.contains(&(c - d))
        })
        .collect();
    OcclusionFixture {
        mono,
        guide,
        occluded,
    }
}

/// Pure translation by `d` pixels without occlusion: the guidance is the
/// target moved left by `d`, and the canvas carries a uniform margin on the
/// left wide enough that border patches still find their exact match.
///
/// The canvas is split by a vertical luminance and chroma step at column
/// `w / 2`. Returns `(left, right)`.
pub fn shift_fixture(h: usize, w: usize, d: usize, seed: u64) -> (RgbImage, RgbImage) {
    let margin = d + 24;
    let step = w / 2;
    let canvas = RgbImage::from_fn(h, w + d, |r, c| {
        if c < margin {
            return [0.45, 0.5, 0.55];
        }
        let (x, y) = (c as f64, r as f64);
        let t =
            value_noise(x, y, 3.0, seed) - 0.5 + 0.6 * (value_noise(x, y, 11.0, seed ^ 1) - 0.5);
        let (base, shade) = if c < step {
            ([0.75, 0.35, 0.25], 0.25)
        } else {
            ([0.2, 0.45, 0.8], 0.2)
        };
        [0, 1, 2].map(|k| ((base[k] * (1.0 + shade * t)) as f32).clamp(0.0, 1.0))
    });
    let left = canvas.crop(0, 0, h, w);
    let right = canvas.crop(0, d, h, w);
    (left, right)
}
