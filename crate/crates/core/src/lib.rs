//! Multi-level Gaussian descriptor (MLGD) for person re-identification.
//!
//! Pipeline: per-pixel feature channels → patch-level Gaussians →
//! log-Euclidean SPD flattening → region-level Gaussians → fused descriptor,
//! scored under learned cross-view metrics (XQDA, KISSME, LFDA) and
//! evaluated with CMC curves and top-k retrieval.

pub mod config;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod metric;
pub mod spd;
pub mod synth;

pub use config::{DescriptorConfig, FeatureSet, MetricConfig, MetricKind, PipelineConfig};
pub use error::{Error, Result};
