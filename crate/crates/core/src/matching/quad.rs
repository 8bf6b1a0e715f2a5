//! Quadrant-patch matcher: a desk-scale stand-in for dense descriptor
//! matching with deformable patches.
//!
//! Both images are resized to `patch_size`², tiled into `grid`² patches, and
//! each patch is split into four quadrants. Every quadrant independently
//! searches a ±`search_radius` pixel window in the target image for its best
//! normalized cross-correlation, so the four quadrants of a patch may move
//! independently. NCC is mapped from [−1, 1] to [0, 1]; a patch scores the
//! mean of its four best quadrant scores, the image scores the mean over
//! patches, and the final value averages both match directions, which makes
//! it exactly symmetric.

use crate::error::{Error, Result};
use crate::model::{FaceExample, GrayPatch};
use crate::scalar::Real;

use super::{ExampleMatcher, MatcherConfig};

/// Match two grayscale images; score in [0, 1].
///
/// Zero-variance (constant) quadrants score 0.5: NCC is undefined for
/// constant signals and a neutral value avoids biasing medians. Ties in the
/// search window resolve to the smallest displacement (by squared length,
/// then (dy, dx)).
pub fn quad_patch_match<T: Real>(a: &GrayPatch, b: &GrayPatch, config: &MatcherConfig) -> Result<T> {
    config.validate()?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyImage);
    }
    let size = config.patch_size;
    let ra = resize_bilinear::<T>(a, size);
    let rb = resize_bilinear::<T>(b, size);
    let displacements = displacement_order(config.search_radius);
    let forward = one_direction(&ra, &rb, size, config, &displacements);
    let backward = one_direction(&rb, &ra, size, config, &displacements);
    let score = (forward + backward) * T::half();
    Ok(score.max(T::zero()).min(T::one()))
}

/// Δ over face-example patches.
pub struct QuadPatchMatcher {
    config: MatcherConfig,
}

impl QuadPatchMatcher {
    pub fn new(config: MatcherConfig) -> Self {
        Self { config }
    }
}

impl<T: Real> ExampleMatcher<T> for QuadPatchMatcher {
    fn score(&self, a: &FaceExample<T>, b: &FaceExample<T>) -> Result<T> {
        let pa = a.patch.as_ref().ok_or_else(|| Error::MissingPatch {
            example_id: a.example_id.clone(),
        })?;
        let pb = b.patch.as_ref().ok_or_else(|| Error::MissingPatch {
            example_id: b.example_id.clone(),
        })?;
        quad_patch_match(pa, pb, &self.config).map_err(|e| e.for_pair(&a.example_id, &b.example_id))
    }
}

/// Displacements ordered so earlier entries win ties: by squared length,
/// then (dy, dx).
fn displacement_order(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for dy in -r..=r {
        for dx in -r..=r {
            out.push((dy, dx));
        }
    }
    out.sort_by_key(|&(dy, dx)| (dy * dy + dx * dx, dy, dx));
    out
}

fn one_direction<T: Real>(
    src: &[T],
    dst: &[T],
    size: usize,
    config: &MatcherConfig,
    displacements: &[(isize, isize)],
) -> T {
    let patch = size / config.grid;
    let quad = patch / 2;
    let mut patch_sum = T::zero();
    for py in 0..config.grid {
        for px in 0..config.grid {
            let mut quad_sum = T::zero();
            for qy in 0..2 {
                for qx in 0..2 {
                    let x0 = px * patch + qx * quad;
                    let y0 = py * patch + qy * quad;
                    quad_sum += best_quadrant_score(src, dst, size, x0, y0, quad, displacements);
                }
            }
            patch_sum += quad_sum / T::from_f64_lossy(4.0);
        }
    }
    patch_sum / T::from_f64_lossy((config.grid * config.grid) as f64)
}

fn best_quadrant_score<T: Real>(
    src: &[T],
    dst: &[T],
    size: usize,
    x0: usize,
    y0: usize,
    quad: usize,
    displacements: &[(isize, isize)],
) -> T {
    let (src_centered, src_norm) = window_centered(src, size, x0, y0, quad);
    let mut best = T::neg_infinity();
    for &(dy, dx) in displacements {
        let tx = x0 as isize + dx;
        let ty = y0 as isize + dy;
        if tx < 0 || ty < 0 || tx as usize + quad > size || ty as usize + quad > size {
            continue;
        }
        let candidate = if src_norm == T::zero() {
            // constant source quadrant: neutral
            T::half()
        } else {
            let (dst_centered, dst_norm) = window_centered(dst, size, tx as usize, ty as usize, quad);
            if dst_norm == T::zero() {
                T::half()
            } else {
                let mut dot = T::zero();
                for (sa, sb) in src_centered.iter().zip(&dst_centered) {
                    dot += *sa * *sb;
                }
                let ncc = dot / (src_norm * dst_norm);
                ((ncc + T::one()) * T::half()).max(T::zero()).min(T::one())
            }
        };
        // strict improvement only, so the smallest displacement wins ties
        if candidate > best {
            best = candidate;
        }
    }
    debug_assert!(best.is_finite(), "no valid displacement window");
    best
}

/// Mean-centered window values and their Euclidean norm.
fn window_centered<T: Real>(img: &[T], size: usize, x0: usize, y0: usize, quad: usize) -> (Vec<T>, T) {
    let n = T::from_f64_lossy((quad * quad) as f64);
    let mut sum = T::zero();
    for y in y0..y0 + quad {
        for x in x0..x0 + quad {
            sum += img[y * size + x];
        }
    }
    let mean = sum / n;
    let mut centered = Vec::with_capacity(quad * quad);
    let mut sq = T::zero();
    for y in y0..y0 + quad {
        for x in x0..x0 + quad {
            let v = img[y * size + x] - mean;
            sq += v * v;
            centered.push(v);
        }
    }
    (centered, sq.sqrt())
}

/// Bilinear resample to `size`×`size`. Same-size inputs pass through with a
/// plain u8→float conversion.
fn resize_bilinear<T: Real>(img: &GrayPatch, size: usize) -> Vec<T> {
    if img.width == size && img.height == size {
        return img.pixels.iter().map(|&p| T::from_f64_lossy(p as f64)).collect();
    }
    let mut out = Vec::with_capacity(size * size);
    let sx = img.width as f64 / size as f64;
    let sy = img.height as f64 / size as f64;
    for y in 0..size {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (img.height - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let wy = fy - y0 as f64;
        for x in 0..size {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (img.width - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let wx = fx - x0 as f64;
            let p00 = img.get(x0, y0) as f64;
            let p10 = img.get(x1, y0) as f64;
            let p01 = img.get(x0, y1) as f64;
            let p11 = img.get(x1, y1) as f64;
            let v = p00 * (1.0 - wx) * (1.0 - wy)
                + p10 * wx * (1.0 - wy)
                + p01 * (1.0 - wx) * wy
                + p11 * wx * wy;
            out.push(T::from_f64_lossy(v));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_patch(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayPatch {
        GrayPatch::new(w, h, (0..w * h).map(|_| rng.gen::<u8>()).collect())
    }

    /// Textured image with smooth structure so shifts stay recoverable.
    fn textured(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayPatch {
        let fx: f64 = rng.gen_range(0.05..0.3);
        let fy: f64 = rng.gen_range(0.05..0.3);
        let phase: f64 = rng.gen_range(0.0..6.28);
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let v = 128.0
                    + 60.0 * ((x as f64 * fx + phase).sin() * (y as f64 * fy).cos())
                    + rng.gen_range(-20.0..20.0);
                px.push(v.clamp(0.0, 255.0) as u8);
            }
        }
        GrayPatch::new(w, h, px)
    }

    #[test]
    fn identical_images_score_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = noise_patch(&mut rng, 64, 64);
        let s: f64 = quad_patch_match(&img, &img, &MatcherConfig::default()).unwrap();
        assert!((s - 1.0).abs() <= 1e-6, "s = {s}");
    }

    #[test]
    fn two_pixel_shift_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = textured(&mut rng, 80, 80);
        let crop = |ox: usize, oy: usize| {
            let mut px = Vec::with_capacity(64 * 64);
            for y in 0..64 {
                for x in 0..64 {
                    px.push(base.get(x + ox, y + oy));
                }
            }
            GrayPatch::new(64, 64, px)
        };
        let a = crop(8, 8);
        let b = crop(6, 8);
        let s: f64 = quad_patch_match(&a, &b, &MatcherConfig::default()).unwrap();
        assert!(s >= 0.95, "shift recovery score {s}");
    }

    #[test]
    fn constant_image_scores_neutral() {
        let flat = GrayPatch::new(64, 64, vec![77; 64 * 64]);
        let s: f64 = quad_patch_match(&flat, &flat, &MatcherConfig::default()).unwrap();
        assert!((s - 0.5).abs() <= 1e-9, "constant quadrants must be neutral, got {s}");
    }

    #[test]
    fn empty_image_is_rejected() {
        let empty = GrayPatch::new(0, 0, vec![]);
        let other = GrayPatch::new(8, 8, vec![0; 64]);
        assert!(matches!(
            quad_patch_match::<f64>(&empty, &other, &MatcherConfig::default()),
            Err(Error::EmptyImage)
        ));
    }

    #[test]
    fn score_is_exactly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let a = textured(&mut rng, 48, 52);
            let b = textured(&mut rng, 64, 64);
            let ab: f64 = quad_patch_match(&a, &b, &MatcherConfig::default()).unwrap();
            let ba: f64 = quad_patch_match(&b, &a, &MatcherConfig::default()).unwrap();
            assert_eq!(ab.to_bits(), ba.to_bits());
        }
    }

    #[test]
    fn self_match_dominates_cross_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let x = textured(&mut rng, 64, 64);
            let y = textured(&mut rng, 64, 64);
            let xx: f64 = quad_patch_match(&x, &x, &MatcherConfig::default()).unwrap();
            let xy: f64 = quad_patch_match(&x, &y, &MatcherConfig::default()).unwrap();
            assert!(xx >= xy, "self {xx} < cross {xy}");
        }
    }

    #[test]
    fn resize_preserves_constant_images() {
        let flat = GrayPatch::new(30, 20, vec![99; 600]);
        let r: Vec<f64> = resize_bilinear(&flat, 64);
        assert!(r.iter().all(|&v| (v - 99.0).abs() < 1e-9));
    }
}
