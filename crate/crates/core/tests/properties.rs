//! Property tests over the dissimilarity, constraint, clustering and metric
//! invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use egoface_core::clustering::{
    agglomerative_cluster, cluster_stop_early, linkage_dendrogram, Linkage,
};
use egoface_core::dissimilarity::{
    apply_constraints, build_constraint_matrix, build_dissimilarity_matrix, face_set_dissimilarity,
    ConstraintMode, DissimilarityMatrix,
};
use egoface_core::matching::{build_matcher, DescriptorMetric, MatcherConfig};
use egoface_core::metrics::{ari, contingency_table, nmi, NmiNormalization};
use egoface_core::model::{BoundingBox, Dataset, FaceExample, FaceSet, SequenceRecord};

fn face_set(set_id: &str, seq: &str, descriptors: Vec<Vec<f64>>) -> FaceSet<f64> {
    FaceSet {
        set_id: set_id.to_string(),
        sequence_id: seq.to_string(),
        examples: descriptors
            .into_iter()
            .enumerate()
            .map(|(i, d)| FaceExample {
                example_id: format!("{set_id}-e{i}"),
                sequence_id: seq.to_string(),
                frame_index: i,
                bbox: BoundingBox::new(0.0, 0.0, 8.0, 8.0),
                patch: None,
                descriptor: Some(d),
                true_identity: None,
            })
            .collect(),
    }
}

fn descriptor_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    // 1..6 examples of fixed dimension 3, bounded coordinates
    prop::collection::vec(
        prop::collection::vec(-100.0..100.0f64, 3),
        1..6,
    )
}

fn symmetric_matrix_strategy(max_n: usize) -> impl Strategy<Value = DissimilarityMatrix<f64>> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0..1.0f64, n * (n - 1) / 2).prop_map(move |upper| {
            let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
            let mut m = DissimilarityMatrix::zeros(ids);
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    m.set(i, j, upper[k]);
                    k += 1;
                }
            }
            m
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_is_bounded_and_exactly_symmetric(a in descriptor_strategy(), b in descriptor_strategy()) {
        let r = face_set("r", "q0", a);
        let t = face_set("t", "q1", b);
        let matcher = build_matcher::<f64>(&MatcherConfig {
            descriptor_metric: DescriptorMetric::InvEuclidean,
            ..MatcherConfig::default()
        }, None).unwrap();
        let rt = face_set_dissimilarity(&r, &t, matcher.as_ref()).unwrap();
        let tr = face_set_dissimilarity(&t, &r, matcher.as_ref()).unwrap();
        prop_assert!((0.0..=1.0).contains(&rt));
        prop_assert_eq!(rt.to_bits(), tr.to_bits());
    }

    #[test]
    fn weighting_doubles_constrained_and_preserves_rest(m in symmetric_matrix_strategy(8), flags in prop::collection::vec(any::<bool>(), 28)) {
        let n = m.order();
        let mut ds = Dataset::<f64>::default();
        // co-occurrence via shared sequences: flagged pairs share one
        let mut k = 0;
        let mut pair_flags = vec![vec![false; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                if k < flags.len() {
                    pair_flags[i][j] = flags[k];
                }
                k += 1;
            }
        }
        // build a dataset whose constraint matrix has at least the flagged
        // pairs; use tiny sequences chaining flagged sets
        // (simpler: craft the constraint matrix through a dataset with one
        // sequence per flagged pair is impossible since a set has one
        // sequence; instead constrain via one shared sequence for a clique)
        // Here we only need *some* constraint pattern, so: sets 0 and 1
        // co-occur when flags[0], otherwise nothing.
        let co = !flags.is_empty() && flags[0] && n >= 2;
        for i in 0..n {
            let seq = if co && i < 2 { "q-shared".to_string() } else { format!("q{i}") };
            ds.face_sets.push(face_set(&format!("s{i}"), &seq, vec![vec![0.0, 0.0, 0.0]]));
            ds.sequences.push(SequenceRecord {
                sequence_id: seq,
                frame_count: 2,
                face_set_ids: vec![],
            });
        }
        let c = build_constraint_matrix(&ds);
        let w = apply_constraints(&m, &c, ConstraintMode::Weight).unwrap();
        let h = apply_constraints(&m, &c, ConstraintMode::HardMax).unwrap();
        for i in 0..n {
            for j in 0..n {
                if c.get(i, j) {
                    prop_assert_eq!(w.get(i, j), m.get(i, j) * 2.0);
                    prop_assert_eq!(h.get(i, j), 2.0);
                } else {
                    prop_assert_eq!(w.get(i, j).to_bits(), m.get(i, j).to_bits());
                    prop_assert_eq!(h.get(i, j).to_bits(), m.get(i, j).to_bits());
                }
                prop_assert!(w.get(i, j) >= m.get(i, j));
            }
        }
    }

    #[test]
    fn stop_early_equals_cut_after(m in symmetric_matrix_strategy(9), theta in 0.0..1.2f64) {
        for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average] {
            let (_, cut) = agglomerative_cluster(&m, linkage, theta).unwrap();
            let early = cluster_stop_early(&m, linkage, theta).unwrap();
            prop_assert_eq!(&cut, &early);
        }
    }

    #[test]
    fn merge_heights_never_decrease(m in symmetric_matrix_strategy(9)) {
        for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average] {
            let d = linkage_dendrogram(&m, linkage).unwrap();
            for w in d.steps.windows(2) {
                prop_assert!(w[0].height <= w[1].height);
            }
        }
    }

    #[test]
    fn partition_is_invariant_under_index_permutation(m in symmetric_matrix_strategy(7), theta in 0.0..1.0f64, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let n = m.order();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let ids: Vec<String> = perm.iter().map(|&i| m.set_ids()[i].clone()).collect();
        let mut pm = DissimilarityMatrix::zeros(ids);
        for a in 0..n {
            for b in (a + 1)..n {
                pm.set(a, b, m.get(perm[a], perm[b]));
            }
        }
        let (_, base) = agglomerative_cluster(&m, Linkage::Average, theta).unwrap();
        let (_, permuted) = agglomerative_cluster(&pm, Linkage::Average, theta).unwrap();
        // same partition up to label renaming: group set ids by label
        let groups = |a: &egoface_core::clustering::ClusterAssignment| {
            let mut g: BTreeMap<usize, Vec<&String>> = BTreeMap::new();
            for (id, &label) in &a.labels {
                g.entry(label).or_default().push(id);
            }
            let mut sets: Vec<Vec<&String>> = g.into_values().collect();
            sets.iter_mut().for_each(|s| s.sort());
            sets.sort();
            sets
        };
        prop_assert_eq!(groups(&base), groups(&permuted));
    }

    #[test]
    fn single_linkage_matches_connected_components(m in symmetric_matrix_strategy(10), theta in 0.0..1.0f64) {
        let n = m.order();
        let (_, assign) = agglomerative_cluster(&m, Linkage::Single, theta).unwrap();
        // oracle: union-find over edges <= theta
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, mut x: usize) -> usize {
            while p[x] != x { x = p[x]; }
            x
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if m.get(i, j) <= theta {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj { parent[ri.max(rj)] = ri.min(rj); }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let same_component = find(&mut parent, i) == find(&mut parent, j);
                let same_cluster = assign.labels[&m.set_ids()[i]] == assign.labels[&m.set_ids()[j]];
                prop_assert_eq!(same_component, same_cluster, "items {} and {}", i, j);
            }
        }
    }

    #[test]
    fn hard_max_pairs_never_co_cluster(m in symmetric_matrix_strategy(8), theta in 0.0..1.99f64) {
        let n = m.order();
        // constrain sets 0 and 1 through a shared sequence
        let mut ds = Dataset::<f64>::default();
        for i in 0..n {
            let seq = if i < 2 { "q-shared".to_string() } else { format!("q{i}") };
            ds.face_sets.push(face_set(&format!("s{i}"), &seq, vec![vec![0.0, 0.0, 0.0]]));
        }
        let c = build_constraint_matrix(&ds);
        let h = apply_constraints(&m, &c, ConstraintMode::HardMax).unwrap();
        for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average] {
            let (_, assign) = agglomerative_cluster(&h, linkage, theta).unwrap();
            // complete/average linkage can only raise the pair's merge
            // height above 2.0; single linkage is the tight case
            if linkage == Linkage::Single {
                prop_assert_ne!(assign.labels["s0"], assign.labels["s1"]);
            }
        }
    }

    #[test]
    fn metrics_are_relabeling_invariant(labels in prop::collection::vec((0usize..4, 0usize..4), 2..20), a_shift in 1usize..7, b_shift in 1usize..7) {
        let truth: Vec<usize> = labels.iter().map(|&(t, _)| t).collect();
        let pred: Vec<usize> = labels.iter().map(|&(_, p)| p).collect();
        let truth_r: Vec<usize> = truth.iter().map(|&t| (t + a_shift) * 13 % 29).collect();
        let pred_r: Vec<usize> = pred.iter().map(|&p| (p + b_shift) * 7 % 31).collect();
        let t1 = contingency_table(&truth, &pred).unwrap();
        let t2 = contingency_table(&truth_r, &pred_r).unwrap();
        let (n1, n2): (f64, f64) = (nmi(&t1, NmiNormalization::Arithmetic).unwrap(), nmi(&t2, NmiNormalization::Arithmetic).unwrap());
        let (a1, a2): (f64, f64) = (ari(&t1).unwrap(), ari(&t2).unwrap());
        prop_assert!((n1 - n2).abs() < 1e-12);
        prop_assert!((a1 - a2).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&n1));
        prop_assert!((-1.0..=1.0).contains(&a1));
    }

    #[test]
    fn identical_partitions_score_exactly_one(labels in prop::collection::vec(0usize..5, 2..20), shift in 1usize..9) {
        let relabeled: Vec<usize> = labels.iter().map(|&t| (t + shift) * 11 % 23).collect();
        let t = contingency_table(&labels, &relabeled).unwrap();
        let n: f64 = nmi(&t, NmiNormalization::Arithmetic).unwrap();
        let a: f64 = ari(&t).unwrap();
        prop_assert_eq!(n, 1.0);
        prop_assert_eq!(a, 1.0);
    }
}

#[test]
fn constant_matcher_yields_all_zero_matrix_on_multi_example_sets() {
    // delta over a dataset where every set has >= 2 examples and the matcher
    // is constant collapses to zero everywhere
    let mut ds = Dataset::<f64>::default();
    for i in 0..5 {
        let seq = format!("q{i}");
        ds.face_sets.push(face_set(
            &format!("s{i}"),
            &seq,
            vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]],
        ));
        ds.sequences.push(SequenceRecord {
            sequence_id: seq,
            frame_count: 4,
            face_set_ids: vec![format!("s{i}")],
        });
    }
    // identical descriptors: inv_euclidean gives 1.0 for every pair
    let matcher = build_matcher::<f64>(&MatcherConfig::default(), None).unwrap();
    let d = build_dissimilarity_matrix(&ds, matcher.as_ref()).unwrap();
    assert!(d.values().iter().all(|&v| v == 0.0));
}
