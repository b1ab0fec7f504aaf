use rayon::prelude::*;

use super::{Candidate, MatchConfig, SearchDirection};
use crate::error::{Error, Result};
use crate::imagecore::{LabImage, PairGeometry, PlaneImage};

const LANES: usize = 8;

#[inline(always)]
fn accumulate(acc: &mut [f32; LANES], a: &[f32], b: &[f32]) {
    let n = a.len().min(b.len());
    let full = n / LANES * LANES;
    for (ca, cb) in a[..full]
        .chunks_exact(LANES)
        .zip(b[..full].chunks_exact(LANES))
    {
        for j in 0..LANES {
            let d = ca[j] - cb[j];
            acc[j] += d * d;
        }
    }
    for j in full..n {
        let d = a[j] - b[j];
        acc[j - full] += d * d;
    }
}

#[inline(always)]
fn lane_sum(acc: &[f32; LANES]) -> f32 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// Squared Frobenius norm of the difference of two equally sized blocks,
/// given as row-major slices of `side × side` values.
pub fn patch_distance(mono_patch: &[f32], guide_patch: &[f32], side: usize) -> f32 {
    assert_eq!(mono_patch.len(), side * side);
    assert_eq!(guide_patch.len(), side * side);
    let mut acc = [0.0f32; LANES];
    for r in 0..side {
        accumulate(
            &mut acc,
            &mono_patch[r * side..(r + 1) * side],
            &guide_patch[r * side..(r + 1) * side],
        );
    }
    lane_sum(&acc)
}

/// Distance between the patch of `mono` at `(mr, mc)` and the patch of
/// `guide` at `(gr, gc)`, abandoned as soon as the partial sum reaches
/// `bound`. Summation order is identical to [`patch_distance`], and since
/// partial sums never exceed the full sum an abandoned location can never
/// beat `bound`.
#[inline]
#[allow(clippy::too_many_arguments)]
fn bounded_distance(
    mono: &PlaneImage,
    mr: usize,
    mc: usize,
    guide: &PlaneImage,
    gr: usize,
    gc: usize,
    side: usize,
    bound: f32,
) -> Option<f32> {
    let mut acc = [0.0f32; LANES];
    for r in 0..side {
        let a = &mono.row(mr + r)[mc..mc + side];
        let b = &guide.row(gr + r)[gc..gc + side];
        accumulate(&mut acc, a, b);
        if lane_sum(&acc) >= bound {
            return None;
        }
    }
    Some(lane_sum(&acc))
}

/// Search offsets ordered by displacement magnitude, then row-major.
#[derive(Debug, Clone)]
pub struct SearchWindow {
    offsets: Vec<(i32, i32)>,
}

impl SearchWindow {
    pub fn new(cfg: &MatchConfig, geom: &PairGeometry) -> Self {
        let wh = cfg.horizontal_range(geom) as i32;
        let wv = cfg.vertical_range(geom) as i32;
        let (lo, hi) = match cfg.direction {
            SearchDirection::Left => (-wh, 0),
            SearchDirection::Right => (0, wh),
            SearchDirection::Both => (-wh, wh),
        };
        let mut offsets: Vec<(i32, i32)> = (-wv..=wv)
            .flat_map(|dy| (lo..=hi).map(move |dx| (dy, dx)))
            .collect();
        offsets.sort_by_key(|&(dy, dx)| (dy * dy + dx * dx, dy, dx));
        Self { offsets }
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }
}

/// Best guidance location for one patch, stored as a displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchMatch {
    pub dy: i32,
    pub dx: i32,
    pub distance: f32,
}

fn search(
    mono: &PlaneImage,
    guide: &PlaneImage,
    r0: usize,
    c0: usize,
    side: usize,
    window: &SearchWindow,
) -> PatchMatch {
    let (h, w) = guide.dims();
    let max_r = (h - side) as i32;
    let max_c = (w - side) as i32;
    let mut best = PatchMatch {
        dy: 0,
        dx: 0,
        distance: f32::INFINITY,
    };
    for &(dy, dx) in window.offsets() {
        let gr = r0 as i32 + dy;
        let gc = c0 as i32 + dx;
        if gr < 0 || gc < 0 || gr > max_r || gc > max_c {
            continue;
        }
        if let Some(d) = bounded_distance(
            mono,
            r0,
            c0,
            guide,
            gr as usize,
            gc as usize,
            side,
            best.distance,
        ) {
            if d < best.distance {
                best = PatchMatch {
                    dy,
                    dx,
                    distance: d,
                };
            }
        }
    }
    best
}

fn check_fits(plane: &PlaneImage, side: usize) -> Result<()> {
    if side == 0 || side > plane.height() || side > plane.width() {
        return Err(Error::DegenerateWindow {
            patch: side,
            height: plane.height(),
            width: plane.width(),
        });
    }
    Ok(())
}

/// Location of the guidance patch minimizing [`patch_distance`] to the
/// target patch whose top-left corner is `at`. Ties go to the smallest
/// displacement, then to row-major order.
pub fn best_match(
    mono: &PlaneImage,
    at: (usize, usize),
    guide_l: &PlaneImage,
    cfg: &MatchConfig,
    geom: &PairGeometry,
) -> Result<(usize, usize)> {
    mono.ensure_same_dims(guide_l)?;
    let side = cfg.patch_size;
    check_fits(mono, side)?;
    if at.0 + side > mono.height() || at.1 + side > mono.width() {
        return Err(Error::InvalidParameters(format!(
            "patch at {at:?} leaves the {}x{} image",
            mono.height(),
            mono.width()
        )));
    }
    let window = SearchWindow::new(cfg, geom);
    let m = search(mono, guide_l, at.0, at.1, side, &window);
    Ok(((at.0 as i32 + m.dy) as usize, (at.1 as i32 + m.dx) as usize))
}

/// Patch origins along one axis: every `stride` from 0, plus a final patch
/// flush with the far border when the grid does not reach it.
pub(crate) fn grid_positions(len: usize, side: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=len - side).step_by(stride).collect();
    if *out.last().unwrap() + side < len {
        out.push(len - side);
    }
    out
}

/// For every coordinate, the half-open range of grid indices whose patch
/// covers it.
fn cover_ranges(len: usize, positions: &[usize], side: usize) -> Vec<(u32, u32)> {
    (0..len)
        .map(|x| {
            let lo = positions.partition_point(|&p| p + side <= x);
            let hi = positions.partition_point(|&p| p <= x);
            (lo as u32, hi as u32)
        })
        .collect()
}

/// Best match of every patch on the grid.
#[derive(Debug, Clone)]
pub struct MatchField {
    patch_size: usize,
    row_positions: Vec<usize>,
    col_positions: Vec<usize>,
    row_cover: Vec<(u32, u32)>,
    col_cover: Vec<(u32, u32)>,
    matches: Vec<PatchMatch>,
}

impl MatchField {
    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn row_positions(&self) -> &[usize] {
        &self.row_positions
    }

    pub fn col_positions(&self) -> &[usize] {
        &self.col_positions
    }

    /// Match of the patch at grid index `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> PatchMatch {
        self.matches[i * self.col_positions.len() + j]
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Number of patches covering pixel `(row, col)`.
    pub fn coverage(&self, row: usize, col: usize) -> usize {
        let (r0, r1) = self.row_cover[row];
        let (c0, c1) = self.col_cover[col];
        ((r1 - r0) * (c1 - c0)) as usize
    }

    /// Replace `out` with the candidates of pixel `(row, col)`, in grid
    /// order.
    pub fn candidates_into(
        &self,
        row: usize,
        col: usize,
        guide: &LabImage,
        out: &mut Vec<Candidate>,
    ) {
        out.clear();
        let (r0, r1) = self.row_cover[row];
        let (c0, c1) = self.col_cover[col];
        let ncols = self.col_positions.len();
        for i in r0 as usize..r1 as usize {
            for j in c0 as usize..c1 as usize {
                let m = self.matches[i * ncols + j];
                let gr = (row as i32 + m.dy) as usize;
                let gc = (col as i32 + m.dx) as usize;
                out.push(Candidate {
                    luma: guide.l.get(gr, gc),
                    a: guide.a.get(gr, gc),
                    b: guide.b.get(gr, gc),
                });
            }
        }
    }
}

/// Match every patch of the stride grid, in parallel over grid rows.
pub fn match_patches(
    mono: &PlaneImage,
    guide_l: &PlaneImage,
    cfg: &MatchConfig,
    geom: &PairGeometry,
) -> Result<MatchField> {
    mono.ensure_same_dims(guide_l)?;
    let side = cfg.patch_size;
    check_fits(mono, side)?;
    let (h, w) = mono.dims();
    let row_positions = grid_positions(h, side, cfg.stride);
    let col_positions = grid_positions(w, side, cfg.stride);
    let window = SearchWindow::new(cfg, geom);
    let matches: Vec<PatchMatch> = row_positions
        .par_iter()
        .flat_map_iter(|&r0| {
            col_positions
                .iter()
                .map(|&c0| search(mono, guide_l, r0, c0, side, &window))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(MatchField {
        patch_size: side,
        row_cover: cover_ranges(h, &row_positions, side),
        col_cover: cover_ranges(w, &col_positions, side),
        row_positions,
        col_positions,
        matches,
    })
}
