//! Pixel-wise road-obstacle anomaly scoring with a sigmoid-head segmentation
//! output.
//!
//! The crate covers the whole pipeline from label engineering to evaluation:
//!
//! * [`tensor_io`]: the `PXT1` container used for every map on disk.
//! * [`labels`]: class schemas, multi-hot label maps with a merged object
//!   class, OoD relabelling, boundary masks and ROI-masked ground truth.
//! * [`scoring`]: unknown score, unknown-objectness score and the
//!   softmax-entropy / max-logit baselines.
//! * [`loss`]: boundary-aware binary cross-entropy and its gradient.
//! * [`metrics`]: exact and histogram-based AUROC, AP, FPR95, plus mIoU.
//! * [`synth`]: a deterministic synthetic driving-scene benchmark and a small
//!   per-pixel sigmoid-head classifier.
//! * [`bench`]: throughput measurement helpers.

pub mod bench;
pub mod error;
pub mod grid;
pub mod labels;
pub mod loss;
pub mod metrics;
pub mod scoring;
pub mod synth;
pub mod tensor_io;

pub use error::{Error, Result};
pub use grid::{Grid, Mask};

/// Probability clamp shared by scoring and the loss.
pub const PROB_EPS: f64 = 1e-7;
