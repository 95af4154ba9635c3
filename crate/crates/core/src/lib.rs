//! Gaussian-centered view sampling for contrastive learning.
//!
//! * [`crop`]: RandomCrop plus the GCC, CGCC, MGCC and MCGCC samplers.
//! * [`analytics`]: Monte Carlo crop geometry and false-positive pair rates.
//! * [`contrastive`]: NT-Xent loss and gradient, augmentations, a small
//!   encoder, SGD pretraining and linear evaluation.
//! * [`dataio`]: PPM and CIFAR-10 codecs, synthetic scenes, result writers.
//! * [`sweep`]: grid sweeps producing [`SweepRecord`]s.

pub mod analytics;
pub mod contrastive;
pub mod crop;
pub mod dataio;
mod error;
pub mod geometry;
pub mod image;
pub mod rng;
pub mod sweep;

pub use analytics::{estimate_fp_rate, geometry_stats, FpEstimate, GeometryStats, Scene};
pub use crop::{compute_view_dims, generate_views, CropperConfig, Method, PadPolicy, ViewSet};
pub use dataio::LabeledDataset;
pub use error::{Error, Result};
pub use geometry::{correct_rect, iou, oob_fraction, Rect};
pub use image::{Image, ImageDims};
pub use rng::RngStream;
pub use sweep::{run_sweep, SweepGrid, SweepOptions, SweepRecord};
