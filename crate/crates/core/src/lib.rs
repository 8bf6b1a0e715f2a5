//! Clustering of face-sets from egocentric photo-streams.
//!
//! The pipeline: tracked face occurrences within a sequence form *face-sets*
//! (one per individual); a median-based dissimilarity compares face-sets
//! through pairwise example matching; co-occurrence within a sequence
//! constrains the dissimilarity matrix; calibrated-threshold agglomerative
//! clustering groups face-sets into identities; NMI/ARI score the result
//! against ground truth. A synthetic generator with controllable separation
//! provides ground-truthed corpora for verification.
//!
//! All numeric code is generic over the scalar type via [`Real`]
//! (`f32`/`f64`); the `*64` aliases at the crate root pin the common `f64`
//! instantiations.

pub mod calibration;
pub mod clustering;
pub mod dissimilarity;
pub mod error;
pub mod formats;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod tracklets;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` instantiations used by the CLI and most callers.
pub type Dataset64 = model::Dataset<f64>;
pub type FaceSet64 = model::FaceSet<f64>;
pub type FaceExample64 = model::FaceExample<f64>;
pub type DissimilarityMatrix64 = dissimilarity::DissimilarityMatrix<f64>;
pub type Dendrogram64 = clustering::Dendrogram<f64>;
pub type CalibrationResult64 = calibration::CalibrationResult<f64>;
