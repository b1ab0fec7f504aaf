//! Guided colorization of a monochrome image using a color image captured
//! from a nearby viewpoint.
//!
//! The pipeline runs in two stages. Dense scribbling block-matches patches of
//! the monochrome target against the luminance of the color guidance, turns
//! the matches into per-pixel chroma candidates and keeps the pixels whose
//! candidates agree. Propagation then places extra seeds in unhinted
//! luminance levels and spreads all hints over the image with a
//! luminance-affinity quadratic.
//!
//! Modules map onto the stages:
//!
//! * [`imagecore`]: planes, CIELAB conversion, resampling, intensity matching, I/O
//! * [`denoise`]: randomized redundant DCT pre-denoising of the guidance
//! * [`perception`]: just-noticeable-difference thresholds
//! * [`scribbler`]: block matching, candidate weighting, outlier classification
//! * [`sampler`]: hypergeometric sampling model and prior calibration
//! * [`seeding`]: seed generation in unhinted luminance levels
//! * [`propagation`]: affinity construction and the sparse solve
//! * [`evalkit`]: noise synthesis, PSNR/SSIM, synthetic scenes, benchmarking
//! * [`pipeline`]: the configuration file and the end-to-end driver

// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod denoise;
pub mod error;
pub mod evalkit;
pub mod imagecore;
pub mod perception;
pub mod pipeline;
pub mod propagation;
pub mod sampler;
pub mod scribbler;
pub mod seeding;

pub use error::{Error, Result};
pub use imagecore::{LabImage, PairGeometry, PlaneImage, RgbImage};
pub use pipeline::{colorize, Colorization, PipelineConfig};
