use std::path::Path;

use crate::error::Result;
use crate::imagecore::{
    lab_to_rgb, write_rgb, BitDepth, LabImage, PlaneImage, RgbImage, WhitePoint,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PixelStatus {
    /// Valid match with consistent candidates; carries the weighted chroma.
    Valid,
    /// Failed the valid-match test.
    Occluded,
    /// Valid match whose candidate chroma is inconsistent.
    Ambiguous,
    /// Unhinted pixel that received a seed.
    Seeded,
    /// Colored by propagation.
    Propagated,
}

impl PixelStatus {
    pub fn carries_chroma(self) -> bool {
        matches!(
            self,
            PixelStatus::Valid | PixelStatus::Seeded | PixelStatus::Propagated
        )
    }

    /// Display color for debug maps.
    pub fn debug_color(self) -> [f32; 3] {
        match self {
            PixelStatus::Valid => [0.1, 0.75, 0.2],
            PixelStatus::Occluded => [0.85, 0.1, 0.1],
            PixelStatus::Ambiguous => [0.95, 0.8, 0.1],
            PixelStatus::Seeded => [0.1, 0.3, 0.95],
            PixelStatus::Propagated => [0.5, 0.5, 0.5],
        }
    }
}

/// Per-pixel status with chroma for the hinted pixels.
#[derive(Debug, Clone)]
pub struct ScribbleMap {
    height: usize,
    width: usize,
    status: Vec<PixelStatus>,
    chroma_a: Vec<f32>,
    chroma_b: Vec<f32>,
}

impl PartialEq for ScribbleMap {
    /// Bitwise comparison of the chroma so that absent values compare equal.
    fn eq(&self, other: &Self) -> bool {
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.dims() == other.dims()
            && self.status == other.status
            && bits(&self.chroma_a) == bits(&other.chroma_a)
            && bits(&self.chroma_b) == bits(&other.chroma_b)
    }
}

impl ScribbleMap {
    /// All pixels occluded and without chroma.
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            status: vec![PixelStatus::Occluded; height * width],
            chroma_a: vec![f32::NAN; height * width],
            chroma_b: vec![f32::NAN; height * width],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn status(&self, row: usize, col: usize) -> PixelStatus {
        self.status[row * self.width + col]
    }

    #[inline]
    pub fn chroma(&self, row: usize, col: usize) -> Option<(f32, f32)> {
        let i = row * self.width + col;
        self.status[i]
            .carries_chroma()
            .then(|| (self.chroma_a[i], self.chroma_b[i]))
    }

    /// Store a hint. Panics if `status` does not carry chroma.
    pub fn set_hint(&mut self, row: usize, col: usize, status: PixelStatus, a: f32, b: f32) {
        assert!(status.carries_chroma(), "{status:?} cannot carry chroma");
        let i = row * self.width + col;
        self.status[i] = status;
        self.chroma_a[i] = a;
        self.chroma_b[i] = b;
    }

    /// Mark a pixel as unhinted. Panics if `status` carries chroma.
    pub fn set_unhinted(&mut self, row: usize, col: usize, status: PixelStatus) {
        assert!(!status.carries_chroma(), "{status:?} requires chroma");
        let i = row * self.width + col;
        self.status[i] = status;
        self.chroma_a[i] = f32::NAN;
        self.chroma_b[i] = f32::NAN;
    }

    pub fn count(&self, status: PixelStatus) -> usize {
        self.status.iter().filter(|&&s| s == status).count()
    }

    pub fn fraction(&self, status: PixelStatus) -> f64 {
        self.count(status) as f64 / self.status.len().max(1) as f64
    }

    pub fn statuses(&self) -> &[PixelStatus] {
        &self.status
    }

    /// Number of pixels carrying chroma.
    pub fn hint_count(&self) -> usize {
        self.status.iter().filter(|s| s.carries_chroma()).count()
    }

    pub fn status_image(&self) -> RgbImage {
        RgbImage::from_fn(self.height, self.width, |r, c| {
            self.status(r, c).debug_color()
        })
    }

    /// Hinted pixels rendered with the target lightness; others black.
    pub fn chroma_image(&self, mono: &PlaneImage) -> Result<RgbImage> {
        let (h, w) = self.dims();
        let mut lab = LabImage {
            l: mono.clone(),
            a: PlaneImage::filled(h, w, 128.0 / 255.0),
            b: PlaneImage::filled(h, w, 128.0 / 255.0),
        };
        for r in 0..h {
            for c in 0..w {
                match self.chroma(r, c) {
                    Some((a, b)) => {
                        lab.a.set(r, c, a);
                        lab.b.set(r, c, b);
                    }
                    None => lab.l.set(r, c, 0.0),
                }
            }
        }
        lab_to_rgb(&lab, WhitePoint::D65)
    }
}

/// Write `status.png` and `scribbles.png` into `dir`.
pub fn write_debug_maps(dir: &Path, mono: &PlaneImage, map: &ScribbleMap) -> Result<()> {
    write_rgb(dir.join("status.png"), &map.status_image(), BitDepth::Eight)?;
    write_rgb(
        dir.join("scribbles.png"),
        &map.chroma_image(mono)?,
        BitDepth::Eight,
    )
}
