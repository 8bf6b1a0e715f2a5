//! Domain types: face-examples, face-sets, sequences, datasets, and the
//! dataset validator.
//!
//! A *face-example* is one detected face bounding box in one frame. A
//! *face-set* collects all face-examples of one individual within one
//! sequence and is the atomic unit of clustering. All values are immutable
//! after construction and safe to share across threads.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

pub type ExampleId = String;
pub type SetId = String;
pub type SequenceId = String;
pub type IdentityLabel = String;

/// Axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Self {
            x,
            y,
            width,
            height,
        }
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }

    /// Intersection-over-union with another box; 0.0 when either is empty.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.width).min(other.x + other.width);
        let y1 = (self.y + self.height).min(other.y + other.height);
        if x1 <= x0 || y1 <= y0 {
            return 0.0;
        }
        let inter = (x1 - x0) * (y1 - y0);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// 8-bit grayscale pixel grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrayPatch {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayPatch {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer size mismatch");
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// One detected face bounding box in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceExample<T: Real> {
    pub example_id: ExampleId,
    pub sequence_id: SequenceId,
    pub frame_index: usize,
    pub bbox: BoundingBox,
    /// Grayscale crop for the patch matcher. Color is discarded at ingestion.
    pub patch: Option<GrayPatch>,
    /// Fixed-length appearance vector for descriptor matchers.
    pub descriptor: Option<Vec<T>>,
    /// Ground-truth identity; never consulted by the pipeline itself.
    pub true_identity: Option<IdentityLabel>,
}

impl<T: Real> FaceExample<T> {
    pub fn has_appearance(&self) -> bool {
        self.patch.is_some() || self.descriptor.is_some()
    }
}

/// All face-examples of one individual within one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceSet<T: Real> {
    pub set_id: SetId,
    pub sequence_id: SequenceId,
    pub examples: Vec<FaceExample<T>>,
}

impl<T: Real> FaceSet<T> {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// The uniform ground-truth label of this set, if present and unmixed.
    pub fn true_identity(&self) -> Option<&IdentityLabel> {
        let first = self.examples.first()?.true_identity.as_ref()?;
        for ex in &self.examples[1..] {
            if ex.true_identity.as_deref() != Some(first) {
                return None;
            }
        }
        Some(first)
    }
}

/// One temporally segmented event with trackable people.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub sequence_id: SequenceId,
    pub frame_count: usize,
    pub face_set_ids: Vec<SetId>,
}

/// Whether a dataset is meant for threshold calibration or evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    Training,
    Evaluation,
}

/// Raw per-frame detections of one sequence, prior to tracklet linking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection<T: Real> {
    pub frame_index: usize,
    pub bbox: BoundingBox,
    pub patch: Option<GrayPatch>,
    pub descriptor: Option<Vec<T>>,
}

/// A full ingested dataset: sequences, their face-sets, and optionally the
/// raw detections the tracklet stage consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T: Real> {
    pub sequences: Vec<SequenceRecord>,
    pub face_sets: Vec<FaceSet<T>>,
    pub descriptor_dim: Option<usize>,
    pub role: Option<DatasetRole>,
    #[serde(default = "BTreeMap::new", skip_serializing_if = "BTreeMap::is_empty")]
    pub detections: BTreeMap<SequenceId, Vec<Detection<T>>>,
}

impl<T: Real> Default for Dataset<T> {
    fn default() -> Self {
        Self {
            sequences: Vec::new(),
            face_sets: Vec::new(),
            descriptor_dim: None,
            role: None,
            detections: BTreeMap::new(),
        }
    }
}

impl<T: Real> Dataset<T> {
    pub fn face_set(&self, set_id: &str) -> Option<&FaceSet<T>> {
        self.face_sets.iter().find(|fs| fs.set_id == set_id)
    }

    /// Ground-truth labels per face-set, for sets that carry one.
    pub fn truth_labels(&self) -> BTreeMap<SetId, IdentityLabel> {
        self.face_sets
            .iter()
            .filter_map(|fs| Some((fs.set_id.clone(), fs.true_identity()?.clone())))
            .collect()
    }
}

/// One invariant breach found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Stable machine-readable code, e.g. `duplicate-set-id`.
    pub code: String,
    /// Identifier of the offending entity.
    pub offender: String,
    pub message: String,
}

impl Violation {
    fn new(code: &str, offender: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            offender: offender.into(),
            message: message.into(),
        }
    }
}

/// Outcome of dataset validation; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "dataset is valid");
        }
        for v in &self.violations {
            writeln!(f, "[{}] {}: {}", v.code, v.offender, v.message)?;
        }
        Ok(())
    }
}

/// Check every dataset invariant and report each breach. Violations are data,
/// not errors: a well-formed call never fails, and a valid dataset yields an
/// empty report.
pub fn validate_dataset<T: Real>(dataset: &Dataset<T>) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seq_ids = BTreeSet::new();
    for seq in &dataset.sequences {
        if !seq_ids.insert(seq.sequence_id.as_str()) {
            violations.push(Violation::new(
                "duplicate-sequence-id",
                &seq.sequence_id,
                "sequence_id appears more than once",
            ));
        }
        if seq.frame_count == 0 {
            violations.push(Violation::new(
                "empty-sequence",
                &seq.sequence_id,
                "frame_count must be positive",
            ));
        }
        let mut seen = BTreeSet::new();
        for sid in &seq.face_set_ids {
            if !seen.insert(sid.as_str()) {
                violations.push(Violation::new(
                    "duplicate-face-set-ref",
                    &seq.sequence_id,
                    format!("face_set_id {sid} listed twice"),
                ));
            }
            if dataset.face_set(sid).is_none() {
                violations.push(Violation::new(
                    "dangling-face-set-ref",
                    &seq.sequence_id,
                    format!("face_set_id {sid} does not exist"),
                ));
            }
        }
    }

    let mut set_ids = BTreeSet::new();
    let mut example_ids = BTreeSet::new();
    for fs in &dataset.face_sets {
        if !set_ids.insert(fs.set_id.as_str()) {
            violations.push(Violation::new(
                "duplicate-set-id",
                &fs.set_id,
                "set_id appears more than once",
            ));
        }
        if fs.examples.is_empty() {
            violations.push(Violation::new(
                "empty-face-set",
                &fs.set_id,
                "face-set must contain at least one example",
            ));
        }
        let owning_seq = dataset
            .sequences
            .iter()
            .find(|s| s.sequence_id == fs.sequence_id);
        match owning_seq {
            None => violations.push(Violation::new(
                "dangling-sequence-ref",
                &fs.set_id,
                format!("sequence {} does not exist", fs.sequence_id),
            )),
            Some(seq) => {
                if !seq.face_set_ids.iter().any(|s| *s == fs.set_id) {
                    violations.push(Violation::new(
                        "unlisted-face-set",
                        &fs.set_id,
                        format!("not listed by its sequence {}", seq.sequence_id),
                    ));
                }
            }
        }

        let mut ids_in_set = BTreeSet::new();
        let mut labels = BTreeSet::new();
        for ex in &fs.examples {
            if !ids_in_set.insert(ex.example_id.as_str()) {
                violations.push(Violation::new(
                    "duplicate-example-id",
                    &fs.set_id,
                    format!("example_id {} repeated within the set", ex.example_id),
                ));
            }
            if !example_ids.insert(ex.example_id.clone()) {
                violations.push(Violation::new(
                    "shared-example-id",
                    &ex.example_id,
                    "example_id appears in more than one face-set",
                ));
            }
            if ex.sequence_id != fs.sequence_id {
                violations.push(Violation::new(
                    "sequence-mismatch",
                    &fs.set_id,
                    format!(
                        "example {} has sequence_id {} but the set belongs to {}",
                        ex.example_id, ex.sequence_id, fs.sequence_id
                    ),
                ));
            }
            if ex.bbox.width <= 0.0 || ex.bbox.height <= 0.0 {
                violations.push(Violation::new(
                    "degenerate-bbox",
                    &ex.example_id,
                    "bounding box width and height must be positive",
                ));
            }
            if !ex.has_appearance() {
                violations.push(Violation::new(
                    "no-appearance",
                    &ex.example_id,
                    "example carries neither a patch nor a descriptor",
                ));
            }
            if let Some(d) = &ex.descriptor {
                if let Some(dim) = dataset.descriptor_dim {
                    if d.len() != dim {
                        violations.push(Violation::new(
                            "descriptor-dim-mismatch",
                            &ex.example_id,
                            format!("descriptor has length {}, dataset says {}", d.len(), dim),
                        ));
                    }
                }
            }
            if let Some(seq) = owning_seq {
                if ex.frame_index >= seq.frame_count {
                    violations.push(Violation::new(
                        "frame-out-of-range",
                        &ex.example_id,
                        format!(
                            "frame_index {} outside sequence of {} frames",
                            ex.frame_index, seq.frame_count
                        ),
                    ));
                }
            }
            if let Some(label) = &ex.true_identity {
                labels.insert(label.as_str());
            }
        }
        // A face-set stands for one person; mixed ground-truth labels mean
        // the upstream tracker merged two people.
        if labels.len() > 1 {
            violations.push(Violation::new(
                "mixed-identity",
                &fs.set_id,
                format!("face-set carries {} distinct identity labels", labels.len()),
            ));
        }
    }

    // Descriptor dimensionality must agree across the dataset even when the
    // manifest omits descriptor_dim.
    let mut dims = BTreeSet::new();
    for fs in &dataset.face_sets {
        for ex in &fs.examples {
            if let Some(d) = &ex.descriptor {
                dims.insert(d.len());
            }
        }
    }
    if dims.len() > 1 {
        violations.push(Violation::new(
            "inconsistent-descriptor-dims",
            "dataset",
            format!("descriptors have {} distinct lengths", dims.len()),
        ));
    }

    ValidationReport { violations }
}
