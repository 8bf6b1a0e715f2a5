//! Face-set dissimilarity: per-set similarity statistics, the N×N
//! dissimilarity matrix D, and co-occurrence constraint weighting.
//!
//! For a reference set R and target T, two similarity matrices are built:
//! the self-similarity of R's examples (a baseline for how alike faces
//! within one set are) and the cross-similarity between R's and T's
//! examples. The directional dissimilarity is the absolute difference of
//! their medians, and the symmetric dissimilarity averages both directions.
//! Face-sets extracted from the same sequence belong to different people, so
//! their entries are pushed up by the constraint matrix before clustering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::ExampleMatcher;
use crate::model::{Dataset, FaceSet, SetId};
use crate::scalar::{median_in_place, Real};

/// Pairwise match scores between the examples of one or two face-sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix<T: Real> {
    pub rows: usize,
    pub cols: usize,
    /// Row-major score grid in [0, 1].
    pub values: Vec<T>,
    pub kind: ScoreMatrixKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMatrixKind {
    /// Square; the diagonal is excluded from statistics.
    SelfSim,
    Cross,
}

impl<T: Real> ScoreMatrix<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.cols + j]
    }

    /// The values that enter the median: strict upper triangle for self
    /// matrices (each unordered pair once, diagonal excluded), every entry
    /// for cross matrices.
    pub fn statistic_values(&self) -> Vec<T> {
        match self.kind {
            ScoreMatrixKind::SelfSim => {
                let mut out = Vec::with_capacity(self.rows * (self.rows - 1) / 2);
                for i in 0..self.rows {
                    for j in (i + 1)..self.cols {
                        out.push(self.get(i, j));
                    }
                }
                out
            }
            ScoreMatrixKind::Cross => self.values.clone(),
        }
    }
}

/// Median similarity of a score matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySummary<T: Real> {
    pub phi: T,
}

/// Symmetric dissimilarity matrix over face-sets, zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix<T: Real> {
    order: usize,
    values: Vec<T>,
    set_ids: Vec<SetId>,
}

impl<T: Real> DissimilarityMatrix<T> {
    pub fn new(set_ids: Vec<SetId>, values: Vec<T>) -> Result<Self> {
        let order = set_ids.len();
        if values.len() != order * order {
            return Err(Error::InvalidMatrix(format!(
                "expected {} values for order {}, got {}",
                order * order,
                order,
                values.len()
            )));
        }
        Ok(Self {
            order,
            values,
            set_ids,
        })
    }

    pub fn zeros(set_ids: Vec<SetId>) -> Self {
        let order = set_ids.len();
        Self {
            order,
            values: vec![T::zero(); order * order],
            set_ids,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn set_ids(&self) -> &[SetId] {
        &self.set_ids
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.order + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.values[i * self.order + j] = v;
        self.values[j * self.order + i] = v;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Symmetric, non-negative, zero diagonal.
    pub fn check_valid(&self) -> Result<()> {
        for i in 0..self.order {
            if self.get(i, i) != T::zero() {
                return Err(Error::InvalidMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..self.order {
                let d = self.get(i, j);
                if d < T::zero() || !d.is_finite() {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {d} is negative or not finite"
                    )));
                }
                if self.get(i, j) != self.get(j, i) {
                    return Err(Error::InvalidMatrix(format!("asymmetry at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }
}

/// Binary co-occurrence flags: 1 where two face-sets share a sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMatrix {
    order: usize,
    flags: Vec<u8>,
    set_ids: Vec<SetId>,
}

impl ConstraintMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn set_ids(&self) -> &[SetId] {
        &self.set_ids
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.flags[i * self.order + j] != 0
    }

    pub fn count_constrained_pairs(&self) -> usize {
        let mut n = 0;
        for i in 0..self.order {
            for j in (i + 1)..self.order {
                if self.get(i, j) {
                    n += 1;
                }
            }
        }
        n
    }
}

/// How constrained entries of D are raised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Multiply by the weight c + 1, i.e. double constrained entries.
    #[default]
    Weight,
    /// Force constrained entries to the sentinel 2.0, twice the Δ range
    /// maximum, so they exceed any plausible threshold.
    HardMax,
    Off,
}

/// Sentinel for [`ConstraintMode::HardMax`].
pub const HARD_MAX_SENTINEL: f64 = 2.0;

/// φ of a face-set against itself: median over each unordered example pair
/// once, self-matches excluded. Singleton sets have no pairs and fall back
/// to φ = 1.0 (perfect self-similarity) with a logged warning.
pub fn self_similarity_summary<T: Real>(
    set: &FaceSet<T>,
    matcher: &dyn ExampleMatcher<T>,
) -> Result<SimilaritySummary<T>> {
    if set.len() < 2 {
        log::warn!(
            "face-set {} is a singleton; self-similarity falls back to 1.0",
            set.set_id
        );
        return Ok(SimilaritySummary { phi: T::one() });
    }
    let matrix = self_score_matrix(set, matcher)?;
    let mut values = matrix.statistic_values();
    Ok(SimilaritySummary {
        phi: median_in_place(&mut values),
    })
}

fn self_score_matrix<T: Real>(
    set: &FaceSet<T>,
    matcher: &dyn ExampleMatcher<T>,
) -> Result<ScoreMatrix<T>> {
    let n = set.len();
    let mut values = vec![T::one(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = matcher.score(&set.examples[i], &set.examples[j])?;
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    Ok(ScoreMatrix {
        rows: n,
        cols: n,
        values,
        kind: ScoreMatrixKind::SelfSim,
    })
}

/// φ between two face-sets: median over all l(R)·l(T) cross scores. The
/// cross matrix is direction-free, so this is symmetric in its arguments.
pub fn cross_similarity_summary<T: Real>(
    r: &FaceSet<T>,
    t: &FaceSet<T>,
    matcher: &dyn ExampleMatcher<T>,
) -> Result<SimilaritySummary<T>> {
    let matrix = cross_score_matrix(r, t, matcher)?;
    let mut values = matrix.statistic_values();
    Ok(SimilaritySummary {
        phi: median_in_place(&mut values),
    })
}

fn cross_score_matrix<T: Real>(
    r: &FaceSet<T>,
    t: &FaceSet<T>,
    matcher: &dyn ExampleMatcher<T>,
) -> Result<ScoreMatrix<T>> {
    let rows = r.len();
    let cols = t.len();
    let mut values = Vec::with_capacity(rows * cols);
    for ri in &r.examples {
        for tj in &t.examples {
            values.push(matcher.score(ri, tj)?);
        }
    }
    Ok(ScoreMatrix {
        rows,
        cols,
        values,
        kind: ScoreMatrixKind::Cross,
    })
}

/// Symmetric face-set dissimilarity in [0, 1].
///
/// Each direction takes |φ_self − φ_cross| with its own reference baseline;
/// the two directions share one cross median and are averaged, which makes
/// the value exactly symmetric in (R, T).
pub fn face_set_dissimilarity<T: Real>(
    r: &FaceSet<T>,
    t: &FaceSet<T>,
    matcher: &dyn ExampleMatcher<T>,
) -> Result<T> {
    let phi_r = self_similarity_summary(r, matcher)?.phi;
    let phi_t = self_similarity_summary(t, matcher)?.phi;
    let phi_cross = cross_similarity_summary(r, t, matcher)?.phi;
    Ok(delta_from_medians(phi_r, phi_t, phi_cross))
}

/// Symmetric dissimilarity from precomputed medians: both directions share
/// the cross median and are averaged.
pub fn delta_from_medians<T: Real>(phi_r: T, phi_t: T, phi_cross: T) -> T {
    ((phi_r - phi_cross).abs() + (phi_t - phi_cross).abs()) * T::half()
}

/// Dissimilarity matrix over every face-set pair of a validated dataset.
///
/// Self medians are computed once per set; pair entries are evaluated in
/// parallel and assembled by index, so the result does not depend on
/// evaluation order.
pub fn build_dissimilarity_matrix<T: Real>(
    dataset: &Dataset<T>,
    matcher: &dyn ExampleMatcher<T>,
) -> Result<DissimilarityMatrix<T>> {
    let sets = &dataset.face_sets;
    let n = sets.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "dissimilarity matrix needs at least 2 face-sets, got {n}"
        )));
    }
    let selfs: Vec<T> = sets
        .par_iter()
        .map(|s| self_similarity_summary(s, matcher).map(|x| x.phi))
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let entries: Vec<T> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let phi_cross = cross_similarity_summary(&sets[i], &sets[j], matcher)?.phi;
            Ok(delta_from_medians(selfs[i], selfs[j], phi_cross))
        })
        .collect::<Result<_>>()?;

    let set_ids: Vec<SetId> = sets.iter().map(|s| s.set_id.clone()).collect();
    let mut matrix = DissimilarityMatrix::zeros(set_ids);
    for (&(i, j), &d) in pairs.iter().zip(&entries) {
        matrix.set(i, j, d);
    }
    Ok(matrix)
}

/// Constraint matrix from sequence membership: c = 1 iff two distinct sets
/// share a sequence_id.
pub fn build_constraint_matrix<T: Real>(dataset: &Dataset<T>) -> ConstraintMatrix {
    let n = dataset.face_sets.len();
    let mut flags = vec![0u8; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dataset.face_sets[i].sequence_id == dataset.face_sets[j].sequence_id {
                flags[i * n + j] = 1;
                flags[j * n + i] = 1;
            }
        }
    }
    ConstraintMatrix {
        order: n,
        flags,
        set_ids: dataset.face_sets.iter().map(|s| s.set_id.clone()).collect(),
    }
}

/// Raise constrained entries of D; unconstrained entries are returned
/// bit-identical. `Off` is the identity.
pub fn apply_constraints<T: Real>(
    d: &DissimilarityMatrix<T>,
    c: &ConstraintMatrix,
    mode: ConstraintMode,
) -> Result<DissimilarityMatrix<T>> {
    if d.order() != c.order() {
        return Err(Error::OrderMismatch {
            left: d.order(),
            right: c.order(),
        });
    }
    let mut out = d.clone();
    if mode == ConstraintMode::Off {
        return Ok(out);
    }
    let sentinel = T::from_f64_lossy(HARD_MAX_SENTINEL);
    for i in 0..d.order() {
        for j in (i + 1)..d.order() {
            if c.get(i, j) {
                let v = match mode {
                    ConstraintMode::Weight => d.get(i, j) * T::two(),
                    ConstraintMode::HardMax => sentinel,
                    ConstraintMode::Off => unreachable!(),
                };
                out.set(i, j, v);
            }
        }
    }
    Ok(out)
}
