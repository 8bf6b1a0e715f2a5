//! Clustering evaluation against ground truth: normalized mutual information
//! and adjusted Rand index, both relabeling-invariant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Counts of items per (true class, predicted cluster) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

/// Entropy normalization for NMI. The ratio is base-invariant; entropies are
/// taken in nats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NmiNormalization {
    #[default]
    Arithmetic,
    Geometric,
    Max,
}

/// Build the contingency table of two aligned label slices.
pub fn contingency_table(truth: &[usize], predicted: &[usize]) -> Result<ContingencyTable> {
    if truth.len() != predicted.len() {
        return Err(Error::LabelUniverseMismatch(format!(
            "{} truth labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut row_index = BTreeMap::new();
    let mut col_index = BTreeMap::new();
    for &t in truth {
        let next = row_index.len();
        row_index.entry(t).or_insert(next);
    }
    for &p in predicted {
        let next = col_index.len();
        col_index.entry(p).or_insert(next);
    }
    let mut counts = vec![vec![0u64; col_index.len()]; row_index.len()];
    for (&t, &p) in truth.iter().zip(predicted) {
        counts[row_index[&t]][col_index[&p]] += 1;
    }
    Ok(from_counts(counts))
}

fn from_counts(counts: Vec<Vec<u64>>) -> ContingencyTable {
    let row_sums: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
    let cols = counts.first().map(|r| r.len()).unwrap_or(0);
    let col_sums: Vec<u64> = (0..cols)
        .map(|j| counts.iter().map(|r| r[j]).sum())
        .collect();
    let total = row_sums.iter().sum();
    ContingencyTable {
        counts,
        row_sums,
        col_sums,
        total,
    }
}

impl ContingencyTable {
    /// True when the partitions agree up to relabeling: every row and every
    /// column holds exactly one nonzero cell.
    pub fn is_identical_partition(&self) -> bool {
        self.counts.iter().all(|row| row.iter().filter(|&&c| c > 0).count() == 1)
            && (0..self.col_sums.len())
                .all(|j| self.counts.iter().filter(|row| row[j] > 0).count() == 1)
    }
}

fn entropy(sums: &[u64], total: f64) -> f64 {
    let mut h = 0.0;
    for &c in sums {
        if c > 0 {
            let p = c as f64 / total;
            h -= p * p.ln();
        }
    }
    h
}

/// Normalized mutual information in [0, 1].
///
/// Degenerate conventions: identical partitions (including two single-cluster
/// partitions) score exactly 1.0; when exactly one side has zero entropy and
/// the partitions differ, the 0/0 mutual-information ratio is taken as 0.0.
pub fn nmi<T: Real>(table: &ContingencyTable, normalization: NmiNormalization) -> Result<T> {
    if table.total == 0 {
        return Err(Error::EmptyTable);
    }
    if table.is_identical_partition() {
        return Ok(T::one());
    }
    let total = table.total as f64;
    let h_true = entropy(&table.row_sums, total);
    let h_pred = entropy(&table.col_sums, total);
    if h_true == 0.0 || h_pred == 0.0 {
        return Ok(T::zero());
    }
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let p = c as f64 / total;
                mi += p * ((c as f64 * total) / (table.row_sums[i] as f64 * table.col_sums[j] as f64)).ln();
            }
        }
    }
    let norm = match normalization {
        NmiNormalization::Arithmetic => 0.5 * (h_true + h_pred),
        NmiNormalization::Geometric => (h_true * h_pred).sqrt(),
        NmiNormalization::Max => h_true.max(h_pred),
    };
    Ok(T::from_f64_lossy((mi / norm).clamp(0.0, 1.0)))
}

fn comb2(n: u64) -> u128 {
    let n = n as u128;
    if n < 2 {
        0
    } else {
        n * (n - 1) / 2
    }
}

/// Adjusted Rand index in [−1, 1].
///
/// Computed from integer pair counts, so analytic identities hold exactly:
/// identical partitions give exactly 1.0 and a single-cluster prediction
/// against any truth gives exactly 0.0. A zero denominator with
/// non-identical partitions also scores 0.0.
pub fn ari<T: Real>(table: &ContingencyTable) -> Result<T> {
    if table.total == 0 {
        return Err(Error::EmptyTable);
    }
    if table.total < 2 {
        return Err(Error::FewerThanTwoItems);
    }
    if table.is_identical_partition() {
        return Ok(T::one());
    }
    let index: u128 = table
        .counts
        .iter()
        .flat_map(|r| r.iter())
        .map(|&c| comb2(c))
        .sum();
    let sum_a: u128 = table.row_sums.iter().map(|&c| comb2(c)).sum();
    let sum_b: u128 = table.col_sums.iter().map(|&c| comb2(c)).sum();
    let pairs = comb2(table.total);
    // ARI = (index - sum_a*sum_b/pairs) / ((sum_a+sum_b)/2 - sum_a*sum_b/pairs)
    // cleared of fractions: numerator and denominator both times 2*pairs.
    let num = 2 * (index as i128) * (pairs as i128) - 2 * (sum_a as i128) * (sum_b as i128);
    let den = (pairs as i128) * ((sum_a + sum_b) as i128) - 2 * (sum_a as i128) * (sum_b as i128);
    if den == 0 {
        return Ok(T::zero());
    }
    Ok(T::from_f64_lossy(num as f64 / den as f64))
}

/// Convenience wrapper: build the table and compute both metrics.
pub fn score_partitions<T: Real>(
    truth: &[usize],
    predicted: &[usize],
    normalization: NmiNormalization,
) -> Result<(T, T)> {
    let table = contingency_table(truth, predicted)?;
    Ok((nmi(&table, normalization)?, ari(&table)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn contingency_identical_partitions_is_diagonal() {
        let t = contingency_table(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!(t.counts, vec![vec![2, 0], vec![0, 2]]);
        assert!(t.is_identical_partition());
    }

    #[test]
    fn contingency_single_predicted_cluster_is_column() {
        let t = contingency_table(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap();
        assert_eq!(t.counts, vec![vec![2], vec![2]]);
    }

    #[test]
    fn contingency_relabeled_partition_is_antidiagonal() {
        let t = contingency_table(&[0, 1], &[1, 0]).unwrap();
        assert_eq!(t.counts, vec![vec![1, 0], vec![0, 1]]);
        assert!(t.is_identical_partition());
    }

    #[test]
    fn nmi_identical_partitions_is_exactly_one() {
        let t = contingency_table(&[0, 0, 1, 1, 2], &[5, 5, 7, 7, 9]).unwrap();
        let v: f64 = nmi(&t, NmiNormalization::Arithmetic).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn nmi_constant_prediction_is_zero() {
        let t = contingency_table(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap();
        let v: f64 = nmi(&t, NmiNormalization::Arithmetic).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn nmi_both_single_cluster_is_one() {
        let t = contingency_table(&[3, 3, 3], &[8, 8, 8]).unwrap();
        let v: f64 = nmi(&t, NmiNormalization::Arithmetic).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn nmi_hand_computed_case() {
        // truth [0,0,1,1], pred [0,0,1,2]: 2x3 table [[2,0,0],[0,1,1]]
        // H(U) = ln 2; H(V) = -(1/2 ln 1/2 + 1/4 ln 1/4 + 1/4 ln 1/4) = 1.5 ln 2
        // MI = 1/2 ln 2 + 1/4 ln 2 + 1/4 ln 2 = ln 2
        // arithmetic NMI = ln2 / (1.25 ln 2) = 0.8
        let t = contingency_table(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
        let v: f64 = nmi(&t, NmiNormalization::Arithmetic).unwrap();
        assert_abs_diff_eq!(v, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn ari_identical_partitions_is_exactly_one() {
        let t = contingency_table(&[0, 0, 1, 1], &[7, 7, 3, 3]).unwrap();
        let v: f64 = ari(&t).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn ari_single_cluster_prediction_is_exactly_zero() {
        let t = contingency_table(&[0, 0, 1, 1, 2, 2], &[0; 6]).unwrap();
        let v: f64 = ari(&t).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn ari_hand_computed_case() {
        // truth [0,0,1,1], pred [0,0,1,2]
        // pairs agreeing in both: (a,b) same-same: 1 (the two 0s) + 0 = 1
        // index = 1, sum_a = 2, sum_b = 1, pairs = 6
        // ari = (1 - 2*1/6) / (1.5 - 2*1/6) = (2/3)/(7/6) = 4/7
        let t = contingency_table(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
        let v: f64 = ari(&t).unwrap();
        assert_abs_diff_eq!(v, 4.0 / 7.0, epsilon = 1e-15);
    }

    #[test]
    fn relabeling_invariance() {
        let truth = [0, 0, 1, 2, 2, 1, 0];
        let pred = [4, 4, 2, 2, 9, 9, 4];
        // permute label names on both sides
        let truth_p: Vec<usize> = truth.iter().map(|&t| (t + 5) * 3).collect();
        let pred_p: Vec<usize> = pred.iter().map(|&p| 100 - p).collect();
        let (n1, a1): (f64, f64) =
            score_partitions(&truth, &pred, NmiNormalization::Arithmetic).unwrap();
        let (n2, a2): (f64, f64) =
            score_partitions(&truth_p, &pred_p, NmiNormalization::Arithmetic).unwrap();
        assert_abs_diff_eq!(n1, n2, epsilon = 1e-15);
        assert_abs_diff_eq!(a1, a2, epsilon = 1e-15);
    }

    #[test]
    fn empty_table_is_rejected() {
        let t = contingency_table(&[], &[]).unwrap();
        assert!(matches!(nmi::<f64>(&t, NmiNormalization::Arithmetic), Err(Error::EmptyTable)));
        assert!(matches!(ari::<f64>(&t), Err(Error::EmptyTable)));
    }

    #[test]
    fn single_item_rejected_for_ari() {
        let t = contingency_table(&[0], &[0]).unwrap();
        assert!(matches!(ari::<f64>(&t), Err(Error::FewerThanTwoItems)));
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert!(matches!(
            contingency_table(&[0, 1], &[0]),
            Err(Error::LabelUniverseMismatch(_))
        ));
    }
}
