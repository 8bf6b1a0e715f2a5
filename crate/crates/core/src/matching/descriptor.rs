//! Descriptor-space similarity in [0, 1].

use crate::error::{Error, Result};
use crate::model::FaceExample;
use crate::scalar::Real;

use super::{DescriptorMetric, ExampleMatcher};

/// Similarity between two descriptor vectors under the chosen metric.
///
/// `cosine_sim` maps the cosine from [−1, 1] to [0, 1]; `inv_euclidean` is
/// 1/(1 + ‖a − b‖). Both are exactly symmetric.
pub fn descriptor_similarity<T: Real>(a: &[T], b: &[T], metric: DescriptorMetric) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    match metric {
        DescriptorMetric::CosineSim => {
            let mut dot = T::zero();
            let mut na = T::zero();
            let mut nb = T::zero();
            for (&x, &y) in a.iter().zip(b) {
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            if na == T::zero() || nb == T::zero() {
                return Err(Error::ZeroVector);
            }
            let cos = dot / (na.sqrt() * nb.sqrt());
            let score = (T::one() + cos) * T::half();
            Ok(clamp_unit(score))
        }
        DescriptorMetric::InvEuclidean => {
            let mut sq = T::zero();
            for (&x, &y) in a.iter().zip(b) {
                let d = x - y;
                sq += d * d;
            }
            Ok(T::one() / (T::one() + sq.sqrt()))
        }
    }
}

fn clamp_unit<T: Real>(v: T) -> T {
    if v < T::zero() {
        T::zero()
    } else if v > T::one() {
        T::one()
    } else {
        v
    }
}

/// Δ over face-example descriptors.
pub struct DescriptorMatcher {
    metric: DescriptorMetric,
}

impl DescriptorMatcher {
    pub fn new(metric: DescriptorMetric) -> Self {
        Self { metric }
    }
}

impl<T: Real> ExampleMatcher<T> for DescriptorMatcher {
    fn score(&self, a: &FaceExample<T>, b: &FaceExample<T>) -> Result<T> {
        let da = a.descriptor.as_ref().ok_or_else(|| Error::MissingDescriptor {
            example_id: a.example_id.clone(),
        })?;
        let db = b.descriptor.as_ref().ok_or_else(|| Error::MissingDescriptor {
            example_id: b.example_id.clone(),
        })?;
        descriptor_similarity(da, db, self.metric)
            .map_err(|e| e.for_pair(&a.example_id, &b.example_id))
    }
}
