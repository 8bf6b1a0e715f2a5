//! Ground-truthed synthetic dataset generator.
//!
//! Identities are descriptor-space centroids; face-sets sample
//! centroid + Gaussian noise. Separation, co-occurrence, confusable identity
//! pairs and set-size imbalance are all controllable, and generation is
//! fully deterministic given the seed. A secondary mode renders gray noise
//! textures instead of descriptors so the quadrant matcher can be exercised
//! end to end.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    BoundingBox, Dataset, Detection, FaceExample, FaceSet, GrayPatch, IdentityLabel,
    SequenceRecord, SetId,
};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SynthMode {
    #[default]
    Descriptors,
    /// Gray noise textures per identity, jittered per example.
    Patches,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_identities: usize,
    pub sets_per_identity: usize,
    /// Inclusive range of examples per face-set; the low end models the
    /// unbalanced-set hard case.
    pub examples_per_set: (usize, usize),
    pub descriptor_dim: usize,
    /// Within-identity noise σ.
    pub intra_sigma: f64,
    /// Minimum centroid pairwise distance, in multiples of σ.
    pub inter_margin: f64,
    /// Scale of centroid placement, in multiples of σ. Typical centroid
    /// distances land well above `inter_margin`, which only enforces the
    /// floor.
    pub placement_spread: f64,
    /// Fraction of sequences containing two identities.
    pub cooccurrence_rate: f64,
    /// Identity pairs placed at sub-margin distance and forced to co-occur,
    /// to stress the constraint machinery.
    pub confusable_pairs: usize,
    /// Distance of confusable pairs, in multiples of σ.
    pub confusable_margin: f64,
    pub seed: u64,
    pub mode: SynthMode,
    /// Also emit raw per-frame detections so the tracklet stage can be run
    /// against the generated face-sets.
    pub emit_detections: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_identities: 20,
            sets_per_identity: 5,
            examples_per_set: (5, 15),
            descriptor_dim: 4,
            intra_sigma: 0.1,
            inter_margin: 3.0,
            placement_spread: 12.0,
            cooccurrence_rate: 0.3,
            confusable_pairs: 0,
            confusable_margin: 2.6,
            seed: 0,
            mode: SynthMode::Descriptors,
            emit_detections: false,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.num_identities == 0 {
            return Err(Error::Config("num_identities must be at least 1".into()));
        }
        if self.examples_per_set.0 > self.examples_per_set.1 || self.examples_per_set.0 == 0 {
            return Err(Error::Config(format!(
                "invalid examples_per_set range {:?}",
                self.examples_per_set
            )));
        }
        if self.inter_margin <= 0.0 {
            return Err(Error::Config("inter_margin must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.cooccurrence_rate) {
            return Err(Error::Config("cooccurrence_rate must be in [0, 1]".into()));
        }
        if 2 * self.confusable_pairs > self.num_identities {
            return Err(Error::Config(format!(
                "{} confusable pairs need {} identities, have {}",
                self.confusable_pairs,
                2 * self.confusable_pairs,
                self.num_identities
            )));
        }
        if self.mode == SynthMode::Descriptors && self.descriptor_dim == 0 {
            return Err(Error::Config("descriptor_dim must be positive".into()));
        }
        Ok(())
    }
}

const PLACEMENT_BUDGET: usize = 20_000;
const CONFUSABLE_BUDGET: usize = 1_000;
const TEXTURE_SIDE: usize = 56;
const PATCH_SIDE: usize = 48;
const PATCH_MAX_SHIFT: i32 = 2;
const PATCH_BRIGHTNESS_JITTER: f64 = 15.0;
const PATCH_PIXEL_NOISE: f64 = 6.0;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn place_centroids(rng: &mut ChaCha8Rng, config: &SynthConfig) -> Result<Vec<Vec<f64>>> {
    let k = config.num_identities;
    let dim = config.descriptor_dim;
    let sigma = config.intra_sigma;
    let scale = config.placement_spread * sigma;
    let min_dist = config.inter_margin * sigma;
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut budget = PLACEMENT_BUDGET;
    while centroids.len() < k {
        if budget == 0 {
            return Err(Error::InfeasibleGeometry {
                requested: k,
                margin: config.inter_margin,
                dim,
            });
        }
        budget -= 1;
        let candidate: Vec<f64> = (0..dim).map(|_| gauss.sample(rng) * scale).collect();
        if centroids.iter().all(|c| dist(c, &candidate) >= min_dist) {
            centroids.push(candidate);
        }
    }

    // confusable pairs (0,1), (2,3), ...: move the second identity of each
    // pair to the configured sub-margin distance from the first
    for p in 0..config.confusable_pairs {
        let a = 2 * p;
        let b = 2 * p + 1;
        let mut placed = false;
        for _ in 0..CONFUSABLE_BUDGET {
            let mut u: Vec<f64> = (0..dim).map(|_| gauss.sample(rng)).collect();
            let n = norm(&u);
            if n == 0.0 {
                continue;
            }
            u.iter_mut().for_each(|x| *x /= n);
            let candidate: Vec<f64> = centroids[a]
                .iter()
                .zip(&u)
                .map(|(c, x)| c + x * config.confusable_margin * sigma)
                .collect();
            let clear = centroids
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != a && i != b)
                .all(|(_, c)| dist(c, &candidate) >= min_dist);
            if clear {
                centroids[b] = candidate;
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InfeasibleGeometry {
                requested: k,
                margin: config.confusable_margin,
                dim,
            });
        }
    }
    Ok(centroids)
}

struct ProtoSet {
    identity: usize,
    size: usize,
}

/// Deterministically generate a dataset and its ground-truth labels.
pub fn generate_dataset<T: Real>(
    config: &SynthConfig,
) -> Result<(Dataset<T>, BTreeMap<SetId, IdentityLabel>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");

    let centroids = match config.mode {
        SynthMode::Descriptors => place_centroids(&mut rng, config)?,
        SynthMode::Patches => Vec::new(),
    };
    let textures: Vec<GrayPatch> = match config.mode {
        SynthMode::Patches => (0..config.num_identities)
            .map(|_| {
                GrayPatch::new(
                    TEXTURE_SIDE,
                    TEXTURE_SIDE,
                    (0..TEXTURE_SIDE * TEXTURE_SIDE).map(|_| rng.gen::<u8>()).collect(),
                )
            })
            .collect(),
        SynthMode::Descriptors => Vec::new(),
    };

    // draw set sizes in a fixed order
    let mut protos: Vec<ProtoSet> = Vec::new();
    for identity in 0..config.num_identities {
        for _ in 0..config.sets_per_identity {
            let size = rng.gen_range(config.examples_per_set.0..=config.examples_per_set.1);
            protos.push(ProtoSet { identity, size });
        }
    }
    let total_sets = protos.len();

    // sequence layout: confusable sets co-occur round-robin, then random
    // different-identity pairs up to the co-occurrence rate, then singles
    let mut used = vec![false; total_sets];
    let set_index = |identity: usize, round: usize| identity * config.sets_per_identity + round;
    let mut seq_pairs: Vec<(usize, usize)> = Vec::new();
    for p in 0..config.confusable_pairs {
        for r in 0..config.sets_per_identity {
            let i = set_index(2 * p, r);
            let j = set_index(2 * p + 1, r);
            seq_pairs.push((i, j));
            used[i] = true;
            used[j] = true;
        }
    }
    let mut remaining: Vec<usize> = (0..total_sets).filter(|&i| !used[i]).collect();
    let target_pairs =
        (config.cooccurrence_rate * remaining.len() as f64 / (1.0 + config.cooccurrence_rate))
            .round() as usize;
    remaining.shuffle(&mut rng);
    let mut pairs_made = 0;
    while pairs_made < target_pairs && remaining.len() >= 2 {
        let i = remaining.pop().expect("len checked");
        let partner = remaining
            .iter()
            .rposition(|&j| protos[j].identity != protos[i].identity);
        match partner {
            Some(pos) => {
                let j = remaining.remove(pos);
                seq_pairs.push((i, j));
                pairs_made += 1;
            }
            None => {
                remaining.push(i);
                break;
            }
        }
    }
    remaining.sort_unstable();

    // materialize sequences and face-sets
    let mut dataset = Dataset::<T>::default();
    let mut truth: BTreeMap<SetId, IdentityLabel> = BTreeMap::new();
    let mut seq_count = 0usize;
    let mut emit = |members: &[usize],
                    dataset: &mut Dataset<T>,
                    truth: &mut BTreeMap<SetId, IdentityLabel>,
                    rng: &mut ChaCha8Rng|
     -> Result<()> {
        let sequence_id = format!("q{seq_count:03}");
        seq_count += 1;
        let frame_count = members.iter().map(|&m| protos[m].size).max().unwrap_or(1) + 2;
        let mut face_set_ids = Vec::new();
        let mut detections: Vec<Detection<T>> = Vec::new();
        for (slot, &m) in members.iter().enumerate() {
            let proto = &protos[m];
            let set_id = format!("s{m:03}");
            let identity = format!("p{:02}", proto.identity);
            let mut examples = Vec::with_capacity(proto.size);
            for e in 0..proto.size {
                let bbox = BoundingBox::new(10.0 + 50.0 * slot as f64, 10.0, 24.0, 24.0);
                let descriptor = match config.mode {
                    SynthMode::Descriptors => Some(
                        centroids[proto.identity]
                            .iter()
                            .map(|c| T::from_f64_lossy(c + config.intra_sigma * gauss.sample(rng)))
                            .collect::<Vec<T>>(),
                    ),
                    SynthMode::Patches => None,
                };
                let patch = match config.mode {
                    SynthMode::Patches => Some(render_example(&textures[proto.identity], rng)),
                    SynthMode::Descriptors => None,
                };
                let example = FaceExample {
                    example_id: format!("{set_id}-e{e:02}"),
                    sequence_id: sequence_id.clone(),
                    frame_index: e,
                    bbox,
                    patch,
                    descriptor,
                    true_identity: Some(identity.clone()),
                };
                if config.emit_detections {
                    detections.push(Detection {
                        frame_index: example.frame_index,
                        bbox: example.bbox,
                        patch: example.patch.clone(),
                        descriptor: example.descriptor.clone(),
                    });
                }
                examples.push(example);
            }
            truth.insert(set_id.clone(), identity);
            face_set_ids.push(set_id.clone());
            dataset.face_sets.push(FaceSet {
                set_id,
                sequence_id: sequence_id.clone(),
                examples,
            });
        }
        dataset.sequences.push(SequenceRecord {
            sequence_id: sequence_id.clone(),
            frame_count,
            face_set_ids,
        });
        if config.emit_detections {
            detections.sort_by_key(|d| d.frame_index);
            dataset.detections.insert(sequence_id, detections);
        }
        Ok(())
    };

    for (i, j) in seq_pairs {
        emit(&[i, j], &mut dataset, &mut truth, &mut rng)?;
    }
    for m in remaining {
        emit(&[m], &mut dataset, &mut truth, &mut rng)?;
    }

    dataset.descriptor_dim = match config.mode {
        SynthMode::Descriptors => Some(config.descriptor_dim),
        SynthMode::Patches => None,
    };
    Ok((dataset, truth))
}

/// Jittered crop of the identity's base texture: small shift, brightness
/// offset, pixel noise.
fn render_example(base: &GrayPatch, rng: &mut ChaCha8Rng) -> GrayPatch {
    let gauss = Normal::new(0.0, PATCH_PIXEL_NOISE).expect("pixel noise");
    let margin = ((TEXTURE_SIDE - PATCH_SIDE) / 2) as i32;
    let dx = rng.gen_range(-PATCH_MAX_SHIFT..=PATCH_MAX_SHIFT);
    let dy = rng.gen_range(-PATCH_MAX_SHIFT..=PATCH_MAX_SHIFT);
    let brightness = rng.gen_range(-PATCH_BRIGHTNESS_JITTER..=PATCH_BRIGHTNESS_JITTER);
    let mut pixels = Vec::with_capacity(PATCH_SIDE * PATCH_SIDE);
    for y in 0..PATCH_SIDE {
        for x in 0..PATCH_SIDE {
            let sx = (x as i32 + margin + dx) as usize;
            let sy = (y as i32 + margin + dy) as usize;
            let v = base.get(sx, sy) as f64 + brightness + gauss.sample(rng);
            pixels.push(v.clamp(0.0, 255.0) as u8);
        }
    }
    GrayPatch::new(PATCH_SIDE, PATCH_SIDE, pixels)
}
