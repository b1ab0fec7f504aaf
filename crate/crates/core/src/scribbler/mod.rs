//! Dense scribbling: patch-grid block matching between the monochrome
//! target and the guidance luminance, per-pixel candidate gathering,
//! weighted chroma estimation and outlier classification.
//!
//! Every patch on the stride grid is matched once. Its best guidance
//! location hands one `(luma, a, b)` candidate to every pixel the patch
//! covers, so with stride `S / 2` each interior pixel collects four.
//! A pixel is a valid match when enough candidates agree with it in
//! luminance (JND test); otherwise it is treated as occluded. Valid pixels
//! whose candidate chroma splits into separated clusters are ambiguous.

mod candidates;
mod matching;
mod scribbles;

pub use candidates::{
    ambiguity_check, assess_pixel, candidate_weights, channel_has_gap, weighted_color, Candidate,
    CandidateSet, PixelAssessment,
};
pub use matching::{
    best_match, match_patches, patch_distance, MatchField, PatchMatch, SearchWindow,
};
pub use scribbles::{write_debug_maps, PixelStatus, ScribbleMap};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::{LabImage, PairGeometry, PlaneImage};
use crate::perception::JndMap;

/// Side of the guidance the search window extends to, relative to the
/// target pixel's column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchDirection {
    /// Columns `col − W_h ..= col`: the guidance is the right view of a
    /// rectified pair whose target is the left view.
    #[default]
    Left,
    /// Columns `col ..= col + W_h`.
    Right,
    /// Both sides.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Patch side S.
    pub patch_size: usize,
    /// Horizontal search range W_h; `None` uses the pair's maximum disparity.
    pub search_width: Option<usize>,
    /// Vertical search range W_v (the window spans ±W_v/2 rows).
    pub search_height: usize,
    /// Spacing of the patch grid.
    pub stride: usize,
    /// Candidates per pixel N; must equal `(patch_size / stride)²`.
    pub samples_per_pixel: usize,
    /// Similar candidates T required for a valid match.
    pub similar_required: usize,
    /// ε guarding the weight denominators.
    pub epsilon: f32,
    /// Largest tolerated adjacent gap τ in sorted candidate chroma.
    pub ambiguity_tau: f32,
    pub direction: SearchDirection,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            patch_size: 16,
            search_width: None,
            search_height: 30,
            stride: 8,
            samples_per_pixel: 4,
            similar_required: 4,
            epsilon: 1e-4,
            ambiguity_tau: 5.0 / 255.0,
            direction: SearchDirection::Left,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.patch_size == 0 || self.stride == 0 {
            return bad("patch_size and stride must be positive".into());
        }
        if !self.patch_size.is_multiple_of(self.stride) {
            return bad(format!(
                "stride {} does not divide patch_size {}",
                self.stride, self.patch_size
            ));
        }
        let per_axis = self.patch_size / self.stride;
        if per_axis * per_axis != self.samples_per_pixel {
            return bad(format!(
                "samples_per_pixel {} must equal (patch_size/stride)^2 = {}",
                self.samples_per_pixel,
                per_axis * per_axis
            ));
        }
        if self.similar_required == 0 || self.similar_required > self.samples_per_pixel {
            return bad(format!(
                "similar_required {} must lie in 1..={}",
                self.similar_required, self.samples_per_pixel
            ));
        }
        if !(self.ambiguity_tau > 0.0) {
            return bad("ambiguity_tau must be positive".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        Ok(())
    }

    /// The same configuration with every patch matched (stride 1,
    /// `N = S²`) and `similar_required` candidates needed for a valid match.
    pub fn unsampled(&self, similar_required: usize) -> Self {
        Self {
            stride: 1,
            samples_per_pixel: self.patch_size * self.patch_size,
            similar_required,
            ..*self
        }
    }

    pub(crate) fn horizontal_range(&self, geom: &PairGeometry) -> usize {
        self.search_width.unwrap_or(geom.max_disparity)
    }

    pub(crate) fn vertical_range(&self, geom: &PairGeometry) -> usize {
        (self.search_height / 2).max(geom.vertical_tolerance)
    }
}

/// Output of [`dense_scribble`].
#[derive(Debug, Clone)]
pub struct ScribbleResult {
    pub matches: MatchField,
    pub scribbles: ScribbleMap,
}

impl ScribbleResult {
    /// Materialize the per-pixel candidate lists.
    pub fn candidates(&self, guide: &LabImage) -> CandidateSet {
        CandidateSet::gather(&self.matches, guide)
    }
}

/// Run block matching and classify every pixel.
///
/// `guide.l` is the luminance used for matching (already resampled and
/// intensity-matched to `mono`); `guide.a` and `guide.b` supply the chroma.
pub fn dense_scribble(
    mono: &PlaneImage,
    guide: &LabImage,
    jnd: &JndMap,
    cfg: &MatchConfig,
    geom: &PairGeometry,
) -> Result<ScribbleResult> {
    cfg.validate()?;
    mono.ensure_same_dims(&guide.l)?;
    mono.ensure_same_dims(&jnd.thresholds)?;
    let matches = match_patches(mono, &guide.l, cfg, geom)?;
    let assessments = assess_all(mono, guide, jnd, &matches, cfg);
    let (h, w) = mono.dims();
    let mut scribbles = ScribbleMap::empty(h, w);
    for (i, a) in assessments.iter().enumerate() {
        let (r, c) = (i / w, i % w);
        match a.status {
            PixelStatus::Valid => {
                scribbles.set_hint(r, c, PixelStatus::Valid, a.chroma.0, a.chroma.1)
            }
            s => scribbles.set_unhinted(r, c, s),
        }
    }
    Ok(ScribbleResult { matches, scribbles })
}

/// Assess every pixel from the match field, row-parallel.
pub fn assess_all(
    mono: &PlaneImage,
    guide: &LabImage,
    jnd: &JndMap,
    matches: &MatchField,
    cfg: &MatchConfig,
) -> Vec<PixelAssessment> {
    let (h, w) = mono.dims();
    (0..h)
        .into_par_iter()
        .flat_map_iter(|r| {
            let mut scratch = Vec::with_capacity(cfg.samples_per_pixel.max(4) * 2);
            (0..w)
                .map(|c| {
                    matches.candidates_into(r, c, guide, &mut scratch);
                    assess_pixel(mono.get(r, c), jnd.at(r, c), &scratch, cfg)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

#[cfg(test)]
mod tests;
