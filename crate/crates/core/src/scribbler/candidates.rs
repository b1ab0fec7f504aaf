use std::cmp::Ordering;

use super::{MatchConfig, MatchField, PixelStatus};
use crate::imagecore::LabImage;
use crate::perception::is_similar;

/// Luminance and chroma of one matched guidance pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub luma: f32,
    pub a: f32,
    pub b: f32,
}

impl Candidate {
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.luma
            .total_cmp(&other.luma)
            .then(self.a.total_cmp(&other.a))
            .then(self.b.total_cmp(&other.b))
    }
}

/// Candidate lists of every pixel in compressed row storage.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    height: usize,
    width: usize,
    starts: Vec<usize>,
    items: Vec<Candidate>,
}

impl CandidateSet {
    pub fn gather(matches: &MatchField, guide: &LabImage) -> Self {
        let (height, width) = guide.dims();
        let mut starts = Vec::with_capacity(height * width + 1);
        let mut items = Vec::new();
        let mut scratch = Vec::new();
        starts.push(0);
        for r in 0..height {
            for c in 0..width {
                matches.candidates_into(r, c, guide, &mut scratch);
                items.extend_from_slice(&scratch);
                starts.push(items.len());
            }
        }
        Self {
            height,
            width,
            starts,
            items,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn at(&self, row: usize, col: usize) -> &[Candidate] {
        let i = row * self.width + col;
        &self.items[self.starts[i]..self.starts[i + 1]]
    }

    pub fn total(&self) -> usize {
        self.items.len()
    }
}

/// Reciprocal-distance weights `1 / (|L_k − m| + ε)` normalized to sum to 1.
pub fn candidate_weights(target_luma: f32, matched_lumas: &[f32], epsilon: f32) -> Vec<f64> {
    let mut w: Vec<f64> = matched_lumas
        .iter()
        .map(|&l| 1.0 / ((l as f64 - target_luma as f64).abs() + epsilon as f64))
        .collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    w
}

/// Per-channel dot product of the weights with the candidate chroma.
pub fn weighted_color(candidates: &[Candidate], weights: &[f64]) -> (f32, f32) {
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for (c, &w) in candidates.iter().zip(weights) {
        a += w * c.a as f64;
        b += w * c.b as f64;
    }
    (a as f32, b as f32)
}

/// True when some adjacent gap of the sorted values exceeds `tau`.
pub fn channel_has_gap(values: &[f32], tau: f32) -> bool {
    if values.len() < 2 {
        return false;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f32::total_cmp);
    sorted.windows(2).any(|p| p[1] - p[0] > tau)
}

/// Ambiguity in either chroma channel.
pub fn ambiguity_check(candidates: &[Candidate], tau: f32) -> bool {
    if candidates.len() < 2 {
        return false;
    }
    let a: Vec<f32> = candidates.iter().map(|c| c.a).collect();
    let b: Vec<f32> = candidates.iter().map(|c| c.b).collect();
    channel_has_gap(&a, tau) || channel_has_gap(&b, tau)
}

/// Classification of one pixel from its candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelAssessment {
    pub status: PixelStatus,
    /// Number of candidates K.
    pub candidates: usize,
    /// Candidates within the JND of the target luminance.
    pub similar: usize,
    /// Weighted chroma over all candidates (meaningful when K > 0).
    pub chroma: (f32, f32),
}

/// Valid-match test, ambiguity test and weighted color for one pixel.
///
/// Pixels covered by fewer than `similar_required` patches (image borders)
/// need every available candidate to be similar.
pub fn assess_pixel(
    target_luma: f32,
    jnd: f32,
    candidates: &[Candidate],
    cfg: &MatchConfig,
) -> PixelAssessment {
    let k = candidates.len();
    if k == 0 {
        return PixelAssessment {
            status: PixelStatus::Occluded,
            candidates: 0,
            similar: 0,
            chroma: (f32::NAN, f32::NAN),
        };
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(Candidate::canonical_cmp);
    let similar = sorted
        .iter()
        .filter(|c| is_similar(target_luma, c.luma, jnd))
        .count();
    let lumas: Vec<f32> = sorted.iter().map(|c| c.luma).collect();
    let weights = candidate_weights(target_luma, &lumas, cfg.epsilon);
    let chroma = weighted_color(&sorted, &weights);

    let t = cfg.similar_required;
    let valid = if k >= t { similar >= t } else { similar == k };
    let status = if !valid {
        PixelStatus::Occluded
    } else if ambiguity_check(&sorted, cfg.ambiguity_tau) {
        PixelStatus::Ambiguous
    } else {
        PixelStatus::Valid
    };
    PixelAssessment {
        status,
        candidates: k,
        similar,
        chroma,
    }
}
