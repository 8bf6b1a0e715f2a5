//! Bottom-up agglomerative clustering of face-sets with a cut-off threshold,
//! plus the mean-descriptor baseline matrix.
//!
//! Merging proceeds greedily on the minimum linkage dissimilarity. When
//! several pairs share the minimum, the pair with the lexicographically
//! smallest (min_id, max_id) merges, which pins the merge order across
//! platforms and parallelism settings. Cluster ids follow the stepwise
//! convention: leaves are 0..N-1 and the merge at step k creates cluster
//! N+k.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dissimilarity::DissimilarityMatrix;
use crate::error::{Error, Result};
use crate::model::{Dataset, SetId};
use crate::scalar::Real;

/// Linkage criterion for cluster-to-cluster dissimilarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Single,
    Complete,
    /// Unweighted average over member pairs (UPGMA). The default: it matches
    /// the median-similarity spirit of the dissimilarity and is robust to
    /// outlier face-sets.
    #[default]
    Average,
}

/// One merge of the agglomeration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeStep<T: Real> {
    pub step_index: usize,
    /// Smaller input cluster id.
    pub left: usize,
    /// Larger input cluster id.
    pub right: usize,
    pub merged_id: usize,
    /// Linkage dissimilarity at which the merge happened.
    pub height: T,
}

/// Full merge history over the face-set leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram<T: Real> {
    pub steps: Vec<MergeStep<T>>,
    pub leaf_ids: Vec<SetId>,
}

impl<T: Real> Dendrogram<T> {
    pub fn num_leaves(&self) -> usize {
        self.leaf_ids.len()
    }

    pub fn max_height(&self) -> Option<T> {
        self.steps.last().map(|s| s.height)
    }
}

/// Final flat clustering: face-set id → contiguous cluster label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: BTreeMap<SetId, usize>,
    pub num_clusters: usize,
}

impl ClusterAssignment {
    /// Labels aligned with the given id order.
    pub fn labels_for(&self, ids: &[SetId]) -> Option<Vec<usize>> {
        ids.iter().map(|id| self.labels.get(id).copied()).collect()
    }
}

/// Agglomerative clustering: computes the full dendrogram, then cuts it at
/// `theta`. Merging stops (equivalently: the cut stops applying merges) once
/// the minimum linkage exceeds `theta`; merges at exactly `theta` proceed.
pub fn agglomerative_cluster<T: Real>(
    d: &DissimilarityMatrix<T>,
    linkage: Linkage,
    theta: T,
) -> Result<(Dendrogram<T>, ClusterAssignment)> {
    if theta < T::zero() {
        return Err(Error::Config(format!("theta must be non-negative, got {theta}")));
    }
    let dendrogram = linkage_dendrogram(d, linkage)?;
    let assignment = cut_dendrogram(&dendrogram, theta);
    Ok((dendrogram, assignment))
}

/// The complete merge history (N−1 steps) under the given linkage.
pub fn linkage_dendrogram<T: Real>(
    d: &DissimilarityMatrix<T>,
    linkage: Linkage,
) -> Result<Dendrogram<T>> {
    d.check_valid()?;
    let n = d.order();
    if n == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    let mut state = MergeState::new(d, linkage);
    let mut steps = Vec::with_capacity(n.saturating_sub(1));
    for step_index in 0..n.saturating_sub(1) {
        let (slot_a, slot_b, height) = state.closest_pair();
        steps.push(state.merge(step_index, slot_a, slot_b, height));
    }
    Ok(Dendrogram {
        steps,
        leaf_ids: d.set_ids().to_vec(),
    })
}

/// Early-stop variant: identical loop, but merging halts once the minimum
/// linkage exceeds `theta` instead of continuing to a single root. Kept as a
/// separate path so tests can assert stop-early ≡ cut-after.
pub fn cluster_stop_early<T: Real>(
    d: &DissimilarityMatrix<T>,
    linkage: Linkage,
    theta: T,
) -> Result<ClusterAssignment> {
    d.check_valid()?;
    let n = d.order();
    if n == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    let mut state = MergeState::new(d, linkage);
    let mut parent: Vec<usize> = (0..n).collect();
    for step_index in 0..n.saturating_sub(1) {
        let (slot_a, slot_b, height) = state.closest_pair();
        if height > theta {
            break;
        }
        state.merge(step_index, slot_a, slot_b, height);
        // the surviving slot keeps representing the merged cluster, so slot
        // indices double as leaf representatives
        union(&mut parent, slot_a, slot_b);
    }
    Ok(canonical_assignment(d.set_ids(), &mut parent))
}

/// Cut the dendrogram at height `theta`: apply every merge with
/// height ≤ theta, then relabel components canonically (clusters ordered by
/// their smallest leaf index).
pub fn cut_dendrogram<T: Real>(dendrogram: &Dendrogram<T>, theta: T) -> ClusterAssignment {
    let n = dendrogram.num_leaves();
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut members: Vec<usize> = (0..n).collect(); // cluster id -> representative leaf
    for step in &dendrogram.steps {
        if step.height <= theta {
            let ra = find(&mut parent, members[step.left]);
            let rb = find(&mut parent, members[step.right]);
            union(&mut parent, ra, rb);
        }
        // record a representative for the merged id either way, so later
        // steps can reference it
        let rep = members[step.left.min(step.right)];
        if members.len() <= step.merged_id {
            members.resize(step.merged_id + 1, 0);
        }
        members[step.merged_id] = rep;
    }
    let mut leaf_parent: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    canonical_assignment(&dendrogram.leaf_ids, &mut leaf_parent)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

fn canonical_assignment(ids: &[SetId], parent: &mut [usize]) -> ClusterAssignment {
    let n = ids.len();
    let roots: Vec<usize> = (0..n).map(|i| find(parent, i)).collect();
    let mut label_of_root = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let next = label_of_root.len();
        let label = *label_of_root.entry(roots[i]).or_insert(next);
        labels.insert(id.clone(), label);
    }
    ClusterAssignment {
        labels,
        num_clusters: label_of_root.len(),
    }
}

/// Working state of the stored-matrix agglomeration. Slots are matrix rows;
/// a merge collapses cluster b into slot a and deactivates slot b. Average
/// linkage tracks pair-count sums so cluster-to-cluster values stay exact
/// means over member pairs.
struct MergeState<T: Real> {
    linkage: Linkage,
    /// Working linkage values, indexed by slot.
    w: Vec<T>,
    n: usize,
    active: Vec<bool>,
    /// Current cluster id held by each slot.
    cluster_id: Vec<usize>,
    /// Cluster sizes by slot, for average linkage.
    size: Vec<usize>,
}

impl<T: Real> MergeState<T> {
    fn new(d: &DissimilarityMatrix<T>, linkage: Linkage) -> Self {
        let n = d.order();
        Self {
            linkage,
            w: d.values().to_vec(),
            n,
            active: vec![true; n],
            cluster_id: (0..n).collect(),
            size: vec![1; n],
        }
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> T {
        self.w[a * self.n + b]
    }

    #[inline]
    fn set(&mut self, a: usize, b: usize, v: T) {
        self.w[a * self.n + b] = v;
        self.w[b * self.n + a] = v;
    }

    /// Minimum-linkage active pair; ties resolve to the smallest
    /// (min_id, max_id) of the clusters' ids.
    fn closest_pair(&self) -> (usize, usize, T) {
        let mut best: Option<(T, (usize, usize), (usize, usize))> = None;
        for a in 0..self.n {
            if !self.active[a] {
                continue;
            }
            for b in (a + 1)..self.n {
                if !self.active[b] {
                    continue;
                }
                let d = self.get(a, b);
                let ids = order_pair(self.cluster_id[a], self.cluster_id[b]);
                let better = match &best {
                    None => true,
                    Some((bd, bids, _)) => d < *bd || (d == *bd && ids < *bids),
                };
                if better {
                    best = Some((d, ids, (a, b)));
                }
            }
        }
        let (d, _, (a, b)) = best.expect("closest_pair on fewer than two active clusters");
        (a, b, d)
    }

    fn merge(&mut self, step_index: usize, slot_a: usize, slot_b: usize, height: T) -> MergeStep<T> {
        let (id_a, id_b) = (self.cluster_id[slot_a], self.cluster_id[slot_b]);
        let (sa, sb) = (self.size[slot_a], self.size[slot_b]);
        for k in 0..self.n {
            if !self.active[k] || k == slot_a || k == slot_b {
                continue;
            }
            let dka = self.get(k, slot_a);
            let dkb = self.get(k, slot_b);
            let merged = match self.linkage {
                Linkage::Single => dka.min(dkb),
                Linkage::Complete => dka.max(dkb),
                Linkage::Average => {
                    let fa = T::from_f64_lossy(sa as f64);
                    let fb = T::from_f64_lossy(sb as f64);
                    (fa * dka + fb * dkb) / (fa + fb)
                }
            };
            self.set(k, slot_a, merged);
        }
        self.active[slot_b] = false;
        self.size[slot_a] = sa + sb;
        let merged_id = self.n + step_index;
        self.cluster_id[slot_a] = merged_id;
        let (left, right) = order_pair(id_a, id_b);
        MergeStep {
            step_index,
            left,
            right,
            merged_id,
            height,
        }
    }
}

fn order_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Baseline dissimilarity: Euclidean distances between face-set mean
/// descriptors. Its range is not [0, 1] and it takes its own threshold.
pub fn mean_descriptor_matrix<T: Real>(dataset: &Dataset<T>) -> Result<DissimilarityMatrix<T>> {
    let sets = &dataset.face_sets;
    let mut means: Vec<Vec<T>> = Vec::with_capacity(sets.len());
    for fs in sets {
        means.push(mean_descriptor(fs)?);
    }
    let dim = means.first().map(|m| m.len()).unwrap_or(0);
    for m in &means {
        if m.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: m.len(),
            });
        }
    }
    let set_ids: Vec<SetId> = sets.iter().map(|s| s.set_id.clone()).collect();
    let mut matrix = DissimilarityMatrix::zeros(set_ids);
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            matrix.set(i, j, euclidean(&means[i], &means[j]));
        }
    }
    Ok(matrix)
}

/// Mean descriptor of one face-set.
pub fn mean_descriptor<T: Real>(set: &crate::model::FaceSet<T>) -> Result<Vec<T>> {
    let mut iter = set.examples.iter();
    let first = iter.next().ok_or_else(|| Error::InvalidDataset(format!(
        "face-set {} is empty",
        set.set_id
    )))?;
    let mut sum: Vec<T> = first
        .descriptor
        .clone()
        .ok_or_else(|| Error::MissingDescriptor {
            example_id: first.example_id.clone(),
        })?;
    for ex in iter {
        let d = ex.descriptor.as_ref().ok_or_else(|| Error::MissingDescriptor {
            example_id: ex.example_id.clone(),
        })?;
        if d.len() != sum.len() {
            return Err(Error::DimensionMismatch {
                left: sum.len(),
                right: d.len(),
            });
        }
        for (s, &v) in sum.iter_mut().zip(d) {
            *s += v;
        }
    }
    let n = T::from_f64_lossy(set.len() as f64);
    for s in &mut sum {
        *s /= n;
    }
    Ok(sum)
}

/// Euclidean distance between two same-length vectors.
pub fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    let mut sq = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        sq += d * d;
    }
    sq.sqrt()
}
