//! Egocentric hand-object segmentation toolkit.
//!
//! The pieces, bottom up:
//!
//! - [`mask`] — binary-mask algebra, the six-class hand/object label schema,
//!   and contact-boundary pseudo-label generation (dilate both the hand and
//!   object masks, keep the overlap).
//! - [`metrics`] — pixel confusion counting and IoU/Prec/Rec/F1 reports
//!   aggregated by count summing.
//! - [`dataio`] — dataset layout, manifest parsing/validation, frame
//!   sampling, deterministic train/val/test splitting.
//! - [`ccda`] — context-aware compositional data augmentation: clean
//!   background pools, inpainting-based removal, top-K background retrieval,
//!   and label-preserving compositing.
//! - [`pipeline`] — the sequential hand -> contact boundary -> object dense
//!   prediction pipeline, the parallel-decode baseline, and their
//!   training/inference loops over a pluggable dense predictor (a small
//!   fully-convolutional reference predictor ships in-crate).
//! - [`eval`] — the benchmark runner, ablation grid, and augmentation
//!   quantity sweeps.
//! - [`handstate`] — per-hand state classification with mask-channel inputs.
//! - [`toydata`] — synthetic shapes dataset generator used by the examples
//!   and the test suite.
//!
//! See the crate examples for runnable end-to-end entry points, and the
//! `hoseg` binary for the scripted CLI.

pub mod ccda;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod handstate;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod toydata;

pub use error::{Error, Result};
pub use mask::{
    dilate, generate_contact_boundary, intersect, BinaryMask, ClassId, ContactBoundaryMap,
    LabelMap, PairingPolicy, DEFAULT_CB_RADIUS,
};
pub use metrics::{aggregate_metrics, class_metrics, ClassMetrics, ConfusionCounts, MetricsReport};
