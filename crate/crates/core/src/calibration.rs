//! Cut-off threshold estimation from labeled face-set pairs.
//!
//! Dissimilarities are measured over same-person pairs (δ_s) and
//! different-person pairs (δ_d) of a training dataset; the threshold θ is
//! the median of the δ_s values. The δ_d median is carried along as a
//! diagnostic: a calibration only separates when θ sits clearly below it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissimilarity::{cross_similarity_summary, delta_from_medians, self_similarity_summary};
use crate::error::{Error, Result};
use crate::matching::ExampleMatcher;
use crate::model::{Dataset, FaceSet};
use crate::scalar::{median_of, Real};

/// One labeled pair of distinct face-sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationPair {
    pub set_a: String,
    pub set_b: String,
    pub same_person: bool,
}

/// A resolved calibration sample: two face-sets plus the label.
pub struct CalibrationSample<'a, T: Real> {
    pub set_a: &'a FaceSet<T>,
    pub set_b: &'a FaceSet<T>,
    pub same_person: bool,
}

/// Threshold estimate and the sample populations behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult<T: Real> {
    /// Median of the same-person dissimilarities.
    pub theta: T,
    pub delta_s_values: Vec<T>,
    pub delta_d_values: Vec<T>,
    /// Median of the different-person dissimilarities (diagnostic only).
    pub median_d: Option<T>,
}

/// Calibrate θ with the face-set dissimilarity. Self-similarity medians are
/// computed once per distinct face-set, not once per pair.
pub fn calibrate_threshold<T: Real>(
    samples: &[CalibrationSample<'_, T>],
    matcher: &dyn ExampleMatcher<T>,
) -> Result<CalibrationResult<T>> {
    let mut distinct: BTreeMap<&str, &FaceSet<T>> = BTreeMap::new();
    for s in samples {
        distinct.insert(&s.set_a.set_id, s.set_a);
        distinct.insert(&s.set_b.set_id, s.set_b);
    }
    let sets: Vec<&FaceSet<T>> = distinct.values().copied().collect();
    let phis: Vec<T> = sets
        .par_iter()
        .map(|s| self_similarity_summary(s, matcher).map(|x| x.phi))
        .collect::<Result<_>>()?;
    let phi_of: BTreeMap<&str, T> = sets
        .iter()
        .zip(&phis)
        .map(|(s, &phi)| (s.set_id.as_str(), phi))
        .collect();
    calibrate_threshold_with(samples, |a, b| {
        let cross = cross_similarity_summary(a, b, matcher)?.phi;
        Ok(delta_from_medians(
            phi_of[a.set_id.as_str()],
            phi_of[b.set_id.as_str()],
            cross,
        ))
    })
}

/// Calibrate θ with an arbitrary symmetric pair dissimilarity; used by the
/// mean-descriptor baseline, which runs on its own distance scale.
pub fn calibrate_threshold_with<T, F>(
    samples: &[CalibrationSample<'_, T>],
    pair_dissimilarity: F,
) -> Result<CalibrationResult<T>>
where
    T: Real,
    F: Fn(&FaceSet<T>, &FaceSet<T>) -> Result<T> + Sync,
{
    if !samples.iter().any(|s| s.same_person) {
        return Err(Error::NoPositiveSamples);
    }
    let deltas: Vec<(bool, T)> = samples
        .par_iter()
        .map(|s| Ok((s.same_person, pair_dissimilarity(s.set_a, s.set_b)?)))
        .collect::<Result<_>>()?;
    let delta_s_values: Vec<T> = deltas.iter().filter(|(same, _)| *same).map(|&(_, d)| d).collect();
    let delta_d_values: Vec<T> = deltas.iter().filter(|(same, _)| !*same).map(|&(_, d)| d).collect();
    let theta = median_of(&delta_s_values);
    let median_d = if delta_d_values.is_empty() {
        None
    } else {
        Some(median_of(&delta_d_values))
    };
    Ok(CalibrationResult {
        theta,
        delta_s_values,
        delta_d_values,
        median_d,
    })
}

/// Every labeled pair of a ground-truthed dataset, the default when no
/// explicit pair list is supplied.
pub fn all_labeled_pairs<T: Real>(dataset: &Dataset<T>) -> Vec<CalibrationPair> {
    let truth = dataset.truth_labels();
    let labeled: Vec<&FaceSet<T>> = dataset
        .face_sets
        .iter()
        .filter(|fs| truth.contains_key(&fs.set_id))
        .collect();
    let mut pairs = Vec::new();
    for i in 0..labeled.len() {
        for j in (i + 1)..labeled.len() {
            pairs.push(CalibrationPair {
                set_a: labeled[i].set_id.clone(),
                set_b: labeled[j].set_id.clone(),
                same_person: truth[&labeled[i].set_id] == truth[&labeled[j].set_id],
            });
        }
    }
    pairs
}

/// Resolve pair ids against a dataset.
pub fn resolve_pairs<'a, T: Real>(
    dataset: &'a Dataset<T>,
    pairs: &[CalibrationPair],
) -> Result<Vec<CalibrationSample<'a, T>>> {
    pairs
        .iter()
        .map(|p| {
            if p.set_a == p.set_b {
                return Err(Error::Config(format!(
                    "calibration pair references the same set twice: {}",
                    p.set_a
                )));
            }
            let set_a = dataset
                .face_set(&p.set_a)
                .ok_or_else(|| Error::Config(format!("unknown face-set {}", p.set_a)))?;
            let set_b = dataset
                .face_set(&p.set_b)
                .ok_or_else(|| Error::Config(format!("unknown face-set {}", p.set_b)))?;
            Ok(CalibrationSample {
                set_a,
                set_b,
                same_person: p.same_person,
            })
        })
        .collect()
}
