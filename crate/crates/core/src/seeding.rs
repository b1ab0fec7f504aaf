//! Seeds for luminance levels that received no scribble.
//!
//! The image is cut into `B×B` blocks and each block's pixels are split
//! into luminance levels at sorted gaps wider than `τ_l`. A level without
//! any hint gets one seed at its median-luminance pixel, colored from the
//! `N_p` scribbled pixels in a `W_N×W_N` neighborhood whose surrounding
//! windows look most alike, with reciprocal-distance weights.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::PlaneImage;
use crate::scribbler::{PixelStatus, ScribbleMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedConfig {
    /// Block side B.
    pub block_size: usize,
    /// Level splitting gap τ_l.
    pub level_tau: f32,
    /// Scribbled neighbors per seed N_p.
    pub neighbors: usize,
    /// Neighbor search window side W_N, centered on the seed.
    pub neighbor_window: usize,
    pub epsilon: f32,
    /// Side of the window compared around the seed and each neighbor.
    pub match_window: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            block_size: 20,
            level_tau: 9.0 / 255.0,
            neighbors: 3,
            neighbor_window: 50,
            epsilon: 1e-4,
            match_window: 5,
        }
    }
}

impl SeedConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.block_size > 0
            && self.neighbors > 0
            && self.neighbor_window > 0
            && self.match_window > 0
            && self.level_tau > 0.0
            && self.epsilon > 0.0;
        if !positive {
            return Err(Error::InvalidConfig(
                "seed parameters must be positive".into(),
            ));
        }
        if self.neighbor_window <= self.block_size {
            return Err(Error::InvalidConfig(format!(
                "neighbor_window {} must exceed block_size {}",
                self.neighbor_window, self.block_size
            )));
        }
        Ok(())
    }
}

/// A pixel of a block: luminance and `(row, col)`.
pub type LevelPixel = (f32, (usize, usize));

/// Sort by luminance (then position) and split wherever adjacent values
/// differ by more than `tau`.
pub fn luminance_levels(block: &[LevelPixel], tau: f32) -> Vec<Vec<LevelPixel>> {
    let mut sorted = block.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut levels: Vec<Vec<LevelPixel>> = Vec::new();
    for p in sorted {
        match levels.last_mut() {
            Some(level) if p.0 - level.last().unwrap().0 <= tau => level.push(p),
            _ => levels.push(vec![p]),
        }
    }
    levels
}

/// Reciprocal-distance blend of neighbor chroma: `Σ z·c_l / (d_l + ε)`.
pub fn seed_chroma(distances: &[f32], chroma: &[(f32, f32)], epsilon: f32) -> (f32, f32) {
    let w: Vec<f64> = distances
        .iter()
        .map(|&d| 1.0 / (d.abs() as f64 + epsilon as f64))
        .collect();
    let z: f64 = w.iter().sum();
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for (wi, c) in w.iter().zip(chroma) {
        a += wi * c.0 as f64;
        b += wi * c.1 as f64;
    }
    ((a / z) as f32, (b / z) as f32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed {
    pub row: usize,
    pub col: usize,
    pub a: f32,
    pub b: f32,
}

/// A level that stayed without a hint because no scribbled pixel lay in
/// the (enlarged) neighbor window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkippedLevel {
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeedOutcome {
    /// Row-major.
    pub seeds: Vec<Seed>,
    pub skipped: Vec<SkippedLevel>,
}

/// Mean absolute difference between the windows around two pixels, with
/// clamped borders.
fn window_distance(mono: &PlaneImage, p: (usize, usize), q: (usize, usize), half: isize) -> f32 {
    let mut sum = 0.0f32;
    for dy in -half..=half {
        for dx in -half..=half {
            let u = mono.get_clamped(p.0 as isize + dy, p.1 as isize + dx);
            let v = mono.get_clamped(q.0 as isize + dy, q.1 as isize + dx);
            sum += (u - v).abs();
        }
    }
    sum / ((2 * half + 1) * (2 * half + 1)) as f32
}

/// The `k` scribbled pixels in the `side×side` window around `p` with the
/// smallest window distance, ties broken by position.
fn nearest_scribbles(
    mono: &PlaneImage,
    scribbles: &ScribbleMap,
    p: (usize, usize),
    side: usize,
    k: usize,
    half: isize,
) -> Vec<(f32, (f32, f32))> {
    let (h, w) = mono.dims();
    let r = side / 2;
    let (r0, r1) = (p.0.saturating_sub(r), (p.0 + r + 1).min(h));
    let (c0, c1) = (p.1.saturating_sub(r), (p.1 + r + 1).min(w));
    // (distance, position, chroma)
    let mut found = Vec::<(f32, (usize, usize), (f32, f32))>::new();
    for qr in r0..r1 {
        for qc in c0..c1 {
            if scribbles.status(qr, qc) != PixelStatus::Valid {
                continue;
            }
            let chroma = scribbles.chroma(qr, qc).expect("valid pixels carry chroma");
            found.push((window_distance(mono, p, (qr, qc), half), (qr, qc), chroma));
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    found.truncate(k);
    found.into_iter().map(|(d, _, c)| (d, c)).collect()
}

/// Seeds for every unhinted level of every block. Only scribbled (valid)
/// pixels serve as neighbors, so blocks are independent.
pub fn generate_seeds(
    mono: &PlaneImage,
    scribbles: &ScribbleMap,
    cfg: &SeedConfig,
) -> Result<SeedOutcome> {
    cfg.validate()?;
    let (h, w) = mono.dims();
    if scribbles.dims() != (h, w) {
        return Err(Error::DimensionMismatch {
            expected: (h, w),
            actual: scribbles.dims(),
        });
    }
    let b = cfg.block_size;
    let blocks: Vec<(usize, usize)> = (0..h)
        .step_by(b)
        .flat_map(|r| (0..w).step_by(b).map(move |c| (r, c)))
        .collect();
    let half = (cfg.match_window / 2) as isize;
    let per_block: Vec<(Vec<Seed>, Vec<SkippedLevel>)> = blocks
        .par_iter()
        .map(|&(r0, c0)| {
            let mut pixels = Vec::with_capacity(b * b);
            for r in r0..(r0 + b).min(h) {
                for c in c0..(c0 + b).min(w) {
                    pixels.push((mono.get(r, c), (r, c)));
                }
            }
            let mut seeds = Vec::new();
            let mut skipped = Vec::new();
            for level in luminance_levels(&pixels, cfg.level_tau) {
                if level
                    .iter()
                    .any(|&(_, (r, c))| scribbles.status(r, c).carries_chroma())
                {
                    continue;
                }
                let (_, p) = level[(level.len() - 1) / 2];
                let mut near =
                    nearest_scribbles(mono, scribbles, p, cfg.neighbor_window, cfg.neighbors, half);
                if near.is_empty() {
                    near = nearest_scribbles(
                        mono,
                        scribbles,
                        p,
                        2 * cfg.neighbor_window,
                        cfg.neighbors,
                        half,
                    );
                }
                if near.is_empty() {
                    skipped.push(SkippedLevel { row: p.0, col: p.1 });
                    continue;
                }
                let d: Vec<f32> = near.iter().map(|n| n.0).collect();
                let ch: Vec<(f32, f32)> = near.iter().map(|n| n.1).collect();
                let (a, bb) = seed_chroma(&d, &ch, cfg.epsilon);
                seeds.push(Seed {
                    row: p.0,
                    col: p.1,
                    a,
                    b: bb,
                });
            }
            (seeds, skipped)
        })
        .collect();
    let mut out = SeedOutcome::default();
    for (s, k) in per_block {
        out.seeds.extend(s);
        out.skipped.extend(k);
    }
    out.seeds.sort_by_key(|s| (s.row, s.col));
    out.skipped.sort_by_key(|s| (s.row, s.col));
    for s in &out.skipped {
        log::warn!(
            "no scribbled pixel near ({}, {}); luminance level left without a seed",
            s.row,
            s.col
        );
    }
    Ok(out)
}

/// Mark seeds on the scribble map. Pixels that already carry chroma are
/// left untouched.
pub fn apply_seeds(scribbles: &mut ScribbleMap, seeds: &[Seed]) {
    for s in seeds {
        if !scribbles.status(s.row, s.col).carries_chroma() {
            scribbles.set_hint(s.row, s.col, PixelStatus::Seeded, s.a, s.b);
        }
    }
}

/// Seeds as CSV `row,col,a,b`.
pub fn seeds_csv(seeds: &[Seed]) -> String {
    let mut s = String::from("row,col,a,b\n");
    for seed in seeds {
        s.push_str(&format!(
            "{},{},{},{}\n",
            seed.row, seed.col, seed.a, seed.b
        ));
    }
    s
}

/// Check that every level of every block holds a hint; returns the number
/// of levels without one.
pub fn unhinted_levels(mono: &PlaneImage, scribbles: &ScribbleMap, cfg: &SeedConfig) -> usize {
    let (h, w) = mono.dims();
    let b = cfg.block_size;
    let mut missing = 0;
    for r0 in (0..h).step_by(b) {
        for c0 in (0..w).step_by(b) {
            let mut pixels = Vec::new();
            for r in r0..(r0 + b).min(h) {
                for c in c0..(c0 + b).min(w) {
                    pixels.push((mono.get(r, c), (r, c)));
                }
            }
            missing += luminance_levels(&pixels, cfg.level_tau)
                .iter()
                .filter(|lv| {
                    !lv.iter()
                        .any(|&(_, (r, c))| scribbles.status(r, c).carries_chroma())
                })
                .count();
        }
    }
    missing
}
