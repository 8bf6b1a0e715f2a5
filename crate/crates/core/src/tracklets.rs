//! Simplified tracklet stage: link per-frame detections of one sequence into
//! tracklets, bag similar tracklets, and extract one face-set per bag.
//!
//! Linking is greedy frame-to-frame: a detection joins the best prior
//! tracklet whose last detection lies within `max_gap` skipped frames and
//! passes the IoU or appearance gate; otherwise it starts a new tracklet.
//! Frames are processed in order, detections within a frame by ascending
//! x-coordinate, and score ties fall to the longest candidate, so the result
//! is deterministic.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matching::{descriptor_similarity, quad_patch_match, DescriptorMetric, MatcherConfig};
use crate::model::{BoundingBox, Detection, FaceExample, FaceSet, SequenceId};
use crate::scalar::Real;

/// Tracklet linking and bagging parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    /// Maximum number of skipped frames between consecutive detections of
    /// one tracklet.
    pub max_gap: usize,
    /// IoU gate for spatial continuity.
    pub iou_min: f64,
    /// Appearance-similarity gate for re-association across small gaps.
    pub sim_min: f64,
    /// Mean shared-frame IoU above which two tracklets land in one bag.
    pub overlap_min: f64,
    /// Minimum fraction of frames with detections for a sequence to count as
    /// trackable at all.
    pub min_face_frame_ratio: f64,
    /// Matcher used for the appearance gate.
    pub matcher: MatcherConfig,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            max_gap: 2,
            iou_min: 0.3,
            sim_min: 0.7,
            overlap_min: 0.5,
            min_face_frame_ratio: 0.5,
            matcher: MatcherConfig::default(),
        }
    }
}

/// A chain of linked detections of one face, strictly increasing in frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet<T: Real> {
    pub detections: Vec<Detection<T>>,
    /// Fraction of the sequence's frames this tracklet covers.
    pub confidence: f64,
}

impl<T: Real> Tracklet<T> {
    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn first_frame(&self) -> usize {
        self.detections.first().map(|d| d.frame_index).unwrap_or(0)
    }

    fn bbox_at(&self, frame: usize) -> Option<&BoundingBox> {
        self.detections
            .iter()
            .find(|d| d.frame_index == frame)
            .map(|d| &d.bbox)
    }
}

/// True when the sequence has enough face-bearing frames to track.
pub fn sequence_is_trackable<T: Real>(frames: &[Vec<Detection<T>>], min_ratio: f64) -> bool {
    if frames.is_empty() {
        return false;
    }
    let with_faces = frames.iter().filter(|f| !f.is_empty()).count();
    (with_faces as f64 / frames.len() as f64) >= min_ratio
}

/// Appearance similarity between two detections, when both carry a
/// comparable appearance source.
fn appearance_similarity<T: Real>(
    a: &Detection<T>,
    b: &Detection<T>,
    config: &MatcherConfig,
) -> Option<f64> {
    if let (Some(da), Some(db)) = (&a.descriptor, &b.descriptor) {
        if da.len() == db.len() {
            return descriptor_similarity(da, db, DescriptorMetric::InvEuclidean)
                .ok()
                .and_then(|s: T| s.to_f64());
        }
    }
    if let (Some(pa), Some(pb)) = (&a.patch, &b.patch) {
        return quad_patch_match::<T>(pa, pb, config).ok().and_then(|s| s.to_f64());
    }
    None
}

/// Greedy frame-to-frame linking. Every detection ends up in exactly one
/// tracklet.
pub fn link_detections<T: Real>(
    frames: &[Vec<Detection<T>>],
    config: &LinkConfig,
) -> Result<Vec<Tracklet<T>>> {
    let frame_count = frames.len();
    let mut tracklets: Vec<Vec<Detection<T>>> = Vec::new();

    for (frame_index, frame) in frames.iter().enumerate() {
        // ascending x, then y, for a deterministic in-frame order
        let mut order: Vec<usize> = (0..frame.len()).collect();
        order.sort_by(|&a, &b| {
            (frame[a].bbox.x, frame[a].bbox.y)
                .partial_cmp(&(frame[b].bbox.x, frame[b].bbox.y))
                .expect("detection coordinates must not be NaN")
        });
        let mut claimed: Vec<bool> = vec![false; tracklets.len()];
        for &di in &order {
            let det = &frame[di];
            let mut best: Option<(f64, usize)> = None;
            for (ti, track) in tracklets.iter().enumerate() {
                if claimed[ti] {
                    continue;
                }
                let last = track.last().expect("tracklets are never empty");
                if last.frame_index >= frame_index {
                    continue;
                }
                let skipped = frame_index - last.frame_index - 1;
                if skipped > config.max_gap {
                    continue;
                }
                let iou = last.bbox.iou(&det.bbox);
                let sim = appearance_similarity(last, det, &config.matcher);
                let eligible = iou >= config.iou_min || sim.map_or(false, |s| s >= config.sim_min);
                if !eligible {
                    continue;
                }
                let score = sim.map_or(iou, |s| iou.max(s));
                let better = match best {
                    None => true,
                    Some((bs, bi)) => {
                        score > bs
                            || (score == bs && tracklets[bi].len() < track.len())
                    }
                };
                if better {
                    best = Some((score, ti));
                }
            }
            match best {
                Some((_, ti)) => {
                    claimed[ti] = true;
                    tracklets[ti].push(det.clone());
                }
                None => {
                    tracklets.push(vec![det.clone()]);
                    claimed.push(true);
                }
            }
        }
    }

    Ok(tracklets
        .into_iter()
        .map(|detections| {
            let confidence = if frame_count == 0 {
                0.0
            } else {
                detections.len() as f64 / frame_count as f64
            };
            Tracklet {
                detections,
                confidence,
            }
        })
        .collect())
}

/// Mean IoU over frames both tracklets cover; None when they share none.
fn shared_frame_overlap<T: Real>(a: &Tracklet<T>, b: &Tracklet<T>) -> Option<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for det in &a.detections {
        if let Some(other) = b.bbox_at(det.frame_index) {
            total += det.bbox.iou(other);
            count += 1;
        }
    }
    if count == 0 {
        None
    } else {
        Some(total / count as f64)
    }
}

/// Group overlapping tracklets into bags and emit one face-set per bag,
/// built from the bag's prototype (its highest-confidence tracklet).
pub fn bag_and_prototype<T: Real>(
    tracklets: &[Tracklet<T>],
    overlap_min: f64,
    sequence_id: &SequenceId,
) -> Vec<FaceSet<T>> {
    let n = tracklets.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if let Some(overlap) = shared_frame_overlap(&tracklets[i], &tracklets[j]) {
                if overlap >= overlap_min {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
    }

    let mut bags: Vec<Vec<usize>> = Vec::new();
    let mut bag_of_root = std::collections::BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        let next = bags.len();
        let slot = *bag_of_root.entry(root).or_insert(next);
        if slot == bags.len() {
            bags.push(Vec::new());
        }
        bags[slot].push(i);
    }

    bags.iter()
        .enumerate()
        .map(|(bag_index, members)| {
            let proto = *members
                .iter()
                .max_by(|&&a, &&b| {
                    let ka = (tracklets[a].confidence, tracklets[a].len(), std::cmp::Reverse(tracklets[a].first_frame()));
                    let kb = (tracklets[b].confidence, tracklets[b].len(), std::cmp::Reverse(tracklets[b].first_frame()));
                    ka.partial_cmp(&kb).expect("confidence must not be NaN")
                })
                .expect("bags are never empty");
            let set_id = format!("{sequence_id}-fs{bag_index:02}");
            let examples = tracklets[proto]
                .detections
                .iter()
                .enumerate()
                .map(|(k, det)| FaceExample {
                    example_id: format!("{set_id}-e{k:03}"),
                    sequence_id: sequence_id.clone(),
                    frame_index: det.frame_index,
                    bbox: det.bbox,
                    patch: det.patch.clone(),
                    descriptor: det.descriptor.clone(),
                    true_identity: None,
                })
                .collect();
            FaceSet {
                set_id,
                sequence_id: sequence_id.clone(),
                examples,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(frame: usize, x: f64, y: f64) -> Detection<f64> {
        Detection {
            frame_index: frame,
            bbox: BoundingBox::new(x, y, 10.0, 10.0),
            patch: None,
            descriptor: None,
        }
    }

    #[test]
    fn fixed_position_chain_forms_one_tracklet() {
        let frames: Vec<Vec<Detection<f64>>> = (0..10).map(|f| vec![det(f, 5.0, 5.0)]).collect();
        let tracklets = link_detections(&frames, &LinkConfig::default()).unwrap();
        assert_eq!(tracklets.len(), 1);
        assert_eq!(tracklets[0].len(), 10);
        assert!((tracklets[0].confidence - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_disjoint_chains_form_two_tracklets() {
        let frames: Vec<Vec<Detection<f64>>> = (0..5)
            .map(|f| vec![det(f, 0.0, 0.0), det(f, 100.0, 0.0)])
            .collect();
        let tracklets = link_detections(&frames, &LinkConfig::default()).unwrap();
        assert_eq!(tracklets.len(), 2);
        // oracle: connected components of the frame-to-frame link graph
        assert_eq!(link_graph_components(&frames, &LinkConfig::default()), 2);
        for t in &tracklets {
            assert_eq!(t.len(), 5);
        }
    }

    /// Brute-force oracle: treat "could link" as an undirected edge and
    /// count connected components over all detections.
    fn link_graph_components(frames: &[Vec<Detection<f64>>], cfg: &LinkConfig) -> usize {
        let all: Vec<(usize, &Detection<f64>)> = frames
            .iter()
            .enumerate()
            .flat_map(|(f, ds)| ds.iter().map(move |d| (f, d)))
            .collect();
        let n = all.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, mut x: usize) -> usize {
            while p[x] != x {
                x = p[x];
            }
            x
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (fa, da) = all[i];
                let (fb, db) = all[j];
                if fa == fb {
                    continue;
                }
                let skipped = fa.abs_diff(fb) - 1;
                if skipped > cfg.max_gap {
                    continue;
                }
                if da.bbox.iou(&db.bbox) >= cfg.iou_min {
                    let (ra, rb) = (find(&mut parent, i), find(&mut parent, j));
                    if ra != rb {
                        parent[ra] = rb;
                    }
                }
            }
        }
        (0..n)
            .map(|i| find(&mut parent, i))
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    }

    #[test]
    fn gap_over_max_splits_the_chain() {
        let cfg = LinkConfig::default(); // max_gap = 2
        // detections at frames 0,1 then 5,6: 3 skipped frames
        let mut frames: Vec<Vec<Detection<f64>>> = vec![vec![]; 7];
        for f in [0usize, 1, 5, 6] {
            frames[f] = vec![det(f, 5.0, 5.0)];
        }
        let tracklets = link_detections(&frames, &cfg).unwrap();
        assert_eq!(tracklets.len(), 2);
    }

    #[test]
    fn gap_at_max_is_bridged() {
        let cfg = LinkConfig::default();
        let mut frames: Vec<Vec<Detection<f64>>> = vec![vec![]; 5];
        for f in [0usize, 3] {
            // 2 skipped frames
            frames[f] = vec![det(f, 5.0, 5.0)];
        }
        let tracklets = link_detections(&frames, &cfg).unwrap();
        assert_eq!(tracklets.len(), 1);
    }

    #[test]
    fn frame_indices_strictly_increase() {
        let frames: Vec<Vec<Detection<f64>>> = (0..6)
            .map(|f| vec![det(f, 0.0, 0.0), det(f, 3.0, 0.0)])
            .collect();
        let tracklets = link_detections(&frames, &LinkConfig::default()).unwrap();
        let total: usize = tracklets.iter().map(|t| t.len()).sum();
        assert_eq!(total, 12, "every detection belongs to exactly one tracklet");
        for t in &tracklets {
            for w in t.detections.windows(2) {
                assert!(w[0].frame_index < w[1].frame_index);
            }
        }
    }

    fn tracklet_at(frames: &[usize], x: f64, frame_count: usize) -> Tracklet<f64> {
        Tracklet {
            detections: frames.iter().map(|&f| det(f, x, 0.0)).collect(),
            confidence: frames.len() as f64 / frame_count as f64,
        }
    }

    #[test]
    fn near_identical_tracklets_bag_together() {
        let a = tracklet_at(&[0, 1, 2, 3], 5.0, 4);
        let b = tracklet_at(&[0, 1, 2], 5.0, 4);
        let sets = bag_and_prototype(&[a, b], 0.5, &"q0".to_string());
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].len(), 4, "prototype is the higher-coverage tracklet");
    }

    #[test]
    fn disjoint_tracklets_stay_separate() {
        let a = tracklet_at(&[0, 1, 2], 0.0, 4);
        let b = tracklet_at(&[0, 1, 2], 100.0, 4);
        let sets = bag_and_prototype(&[a, b], 0.5, &"q0".to_string());
        assert_eq!(sets.len(), 2);
    }

    #[test]
    fn prototype_is_the_longest_by_confidence() {
        let long = tracklet_at(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9], 5.0, 10);
        let short = tracklet_at(&[0, 1, 2, 3], 5.0, 10);
        let sets = bag_and_prototype(&[short, long], 0.5, &"q0".to_string());
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].len(), 10);
    }

    #[test]
    fn output_sets_never_exceed_input_tracklets() {
        let tracklets: Vec<Tracklet<f64>> = (0..5)
            .map(|i| tracklet_at(&[0, 1], i as f64 * 3.0, 4))
            .collect();
        let sets = bag_and_prototype(&tracklets, 0.5, &"q0".to_string());
        assert!(sets.len() <= tracklets.len());
        for fs in &sets {
            let mut frames: Vec<usize> = fs.examples.iter().map(|e| e.frame_index).collect();
            frames.dedup();
            assert_eq!(frames.len(), fs.len(), "frame indices unique within a set");
        }
    }

    #[test]
    fn trackability_ratio() {
        let frames: Vec<Vec<Detection<f64>>> =
            vec![vec![det(0, 0.0, 0.0)], vec![], vec![det(2, 0.0, 0.0)], vec![]];
        assert!(sequence_is_trackable(&frames, 0.5));
        assert!(!sequence_is_trackable(&frames, 0.6));
        assert!(!sequence_is_trackable::<f64>(&[], 0.0));
    }
}
