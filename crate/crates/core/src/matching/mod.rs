//! Pairwise face-example similarity Δ(x, y) ∈ [0, 1].
//!
//! Three interchangeable matchers implement the same contract: a
//! quadrant-patch matcher over grayscale crops, descriptor-space similarity,
//! and a lookup table of precomputed scores. Every matcher is symmetric
//! (|Δ(x,y) − Δ(y,x)| ≤ 1e-6; the built-in ones are exactly symmetric) and
//! pure, so callers may evaluate pairs concurrently.

mod descriptor;
mod quad;
mod table;

pub use descriptor::{descriptor_similarity, DescriptorMatcher};
pub use quad::{quad_patch_match, QuadPatchMatcher};
pub use table::{ScoreTable, TableMatcher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FaceExample;
use crate::scalar::Real;

/// Which similarity backend to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatcherKind {
    QuadPatch,
    Descriptor,
    Precomputed,
}

/// Distance-to-similarity mapping for descriptor matchers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorMetric {
    /// (1 + cos(a, b)) / 2
    CosineSim,
    /// 1 / (1 + ‖a − b‖)
    InvEuclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub kind: MatcherKind,
    /// Side length both images are resized to before tiling.
    pub patch_size: usize,
    /// Patches per image side (grid × grid patches total).
    pub grid: usize,
    /// Quadrant search window half-width in pixels.
    pub search_radius: usize,
    pub descriptor_metric: DescriptorMetric,
    /// Path of a precomputed score table, for `kind = precomputed`.
    pub score_table_path: Option<std::path::PathBuf>,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            kind: MatcherKind::Descriptor,
            patch_size: 64,
            grid: 4,
            search_radius: 4,
            descriptor_metric: DescriptorMetric::InvEuclidean,
            score_table_path: None,
        }
    }
}

impl MatcherConfig {
    /// patch_size must tile evenly into grid² patches of 2×2 quadrants.
    pub fn validate(&self) -> Result<()> {
        if self.grid == 0 || self.patch_size == 0 {
            return Err(Error::Config(
                "patch_size and grid must be positive".into(),
            ));
        }
        if self.patch_size % (2 * self.grid) != 0 {
            return Err(Error::Config(format!(
                "patch_size {} not divisible by 2*grid = {}",
                self.patch_size,
                2 * self.grid
            )));
        }
        Ok(())
    }
}

/// The Δ contract over face-examples.
pub trait ExampleMatcher<T: Real>: Sync {
    fn score(&self, a: &FaceExample<T>, b: &FaceExample<T>) -> Result<T>;
}

/// Build the matcher selected by the config. The score table, when needed,
/// must already be loaded by the caller.
pub fn build_matcher<T: Real>(
    config: &MatcherConfig,
    table: Option<ScoreTable>,
) -> Result<Box<dyn ExampleMatcher<T>>> {
    config.validate()?;
    match config.kind {
        MatcherKind::QuadPatch => Ok(Box::new(QuadPatchMatcher::new(config.clone()))),
        MatcherKind::Descriptor => Ok(Box::new(DescriptorMatcher::new(config.descriptor_metric))),
        MatcherKind::Precomputed => {
            let table = table.ok_or_else(|| {
                Error::Config("precomputed matcher requires a score table".into())
            })?;
            Ok(Box::new(TableMatcher::new(table)))
        }
    }
}
