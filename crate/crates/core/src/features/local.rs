//! Shape-indexed local descriptors and their numerical Jacobian.
//!
//! Around each landmark a square patch is divided into a 4×4 grid of spatial
//! cells; each cell contributes the 8 orientation sums read from the integral
//! maps, giving a 128-value descriptor that is L2-normalized per landmark.
//! Descriptor derivatives with respect to landmark coordinates are
//! approximated by central differences with step `epsilon`, two evaluations
//! per landmark per axis.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::features::response::{ResponseMaps, ORIENTATION_BINS};
use crate::shapes::Shape;

/// Spatial cells per patch side.
pub const SPATIAL_CELLS: usize = 4;

/// Descriptor values per landmark: 4×4 cells × 8 orientation bins.
pub const LANDMARK_DESCRIPTOR_LEN: usize = SPATIAL_CELLS * SPATIAL_CELLS * ORIENTATION_BINS;

const NORM_FLOOR: f64 = 1e-6;

/// Per-stage local descriptor settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDescriptorConfig {
    /// Side length of the square patch, in pixels.
    pub patch_size: usize,
    /// Central-difference step for the descriptor Jacobian, in pixels.
    pub epsilon: f64,
    /// Gaussian sigma used when blurring the response maps this stage reads.
    pub blur_sigma: f64,
}

impl LocalDescriptorConfig {
    /// Settings for the given patch size: blur of half a spatial cell and a
    /// 2-pixel difference step.
    pub fn new(patch_size: usize) -> Self {
        LocalDescriptorConfig {
            patch_size,
            epsilon: 2.0,
            blur_sigma: patch_size as f64 / 8.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size < SPATIAL_CELLS || self.patch_size % SPATIAL_CELLS != 0 {
            return Err(Error::invalid(format!(
                "patch size must be a positive multiple of {SPATIAL_CELLS}, got {}",
                self.patch_size
            )));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if !(self.blur_sigma > 0.0) || !self.blur_sigma.is_finite() {
            return Err(Error::invalid("blur sigma must be positive"));
        }
        Ok(())
    }
}

/// Block-diagonal descriptor Jacobian: one 128×2 block per landmark, column 0
/// the x-derivative and column 1 the y-derivative. Cross-landmark entries are
/// structurally absent.
#[derive(Debug, Clone)]
pub struct FeatureJacobian {
    pub blocks: Vec<Array2<f64>>,
}

/// The 128-value descriptor of a single landmark at `(x, y)`.
///
/// The patch is anchored at the nearest integer pixel; area outside the image
/// contributes zero. The result is L2-normalized with a floor on the norm so
/// flat patches stay exactly zero.
pub fn landmark_descriptor(
    maps: &ResponseMaps,
    cfg: &LocalDescriptorConfig,
    x: f64,
    y: f64,
) -> Vec<f64> {
    let half = (cfg.patch_size / 2) as i64;
    let cell = (cfg.patch_size / SPATIAL_CELLS) as i64;
    let cx = x.round() as i64;
    let cy = y.round() as i64;
    let x0 = cx - half;
    let y0 = cy - half;
    let mut v = vec![0.0f64; LANDMARK_DESCRIPTOR_LEN];
    for gy in 0..SPATIAL_CELLS as i64 {
        for gx in 0..SPATIAL_CELLS as i64 {
            let base = ((gy * SPATIAL_CELLS as i64 + gx) as usize) * ORIENTATION_BINS;
            for bin in 0..ORIENTATION_BINS {
                v[base + bin] = maps.rect_sum(
                    bin,
                    x0 + gx * cell,
                    y0 + gy * cell,
                    x0 + (gx + 1) * cell,
                    y0 + (gy + 1) * cell,
                );
            }
        }
    }
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let denom = norm.max(NORM_FLOOR);
    for a in v.iter_mut() {
        *a /= denom;
    }
    v
}

/// Concatenated per-landmark descriptors of every landmark of `s`, in
/// landmark order: a `128 P` vector.
pub fn extract_local(maps: &ResponseMaps, s: &Shape, cfg: &LocalDescriptorConfig) -> Array1<f64> {
    debug_assert_eq!(maps.blur_sigma().to_bits(), cfg.blur_sigma.to_bits());
    let p = s.landmark_count();
    let mut out = Vec::with_capacity(p * LANDMARK_DESCRIPTOR_LEN);
    for i in 0..p {
        let (x, y) = s.point(i);
        out.extend(landmark_descriptor(maps, cfg, x, y));
    }
    Array1::from_vec(out)
}

/// Central-difference Jacobian of the local descriptor at every landmark of
/// `s`: block p column x is `(h_p(x+ε, y) − h_p(x−ε, y)) / 2ε`, analogously
/// for y.
pub fn local_jacobian(
    maps: &ResponseMaps,
    s: &Shape,
    cfg: &LocalDescriptorConfig,
) -> FeatureJacobian {
    let p = s.landmark_count();
    let eps = cfg.epsilon;
    let mut blocks = Vec::with_capacity(p);
    for i in 0..p {
        let (x, y) = s.point(i);
        let px = landmark_descriptor(maps, cfg, x + eps, y);
        let mx = landmark_descriptor(maps, cfg, x - eps, y);
        let py = landmark_descriptor(maps, cfg, x, y + eps);
        let my = landmark_descriptor(maps, cfg, x, y - eps);
        let mut block = Array2::<f64>::zeros((LANDMARK_DESCRIPTOR_LEN, 2));
        for r in 0..LANDMARK_DESCRIPTOR_LEN {
            block[(r, 0)] = (px[r] - mx[r]) / (2.0 * eps);
            block[(r, 1)] = (py[r] - my[r]) / (2.0 * eps);
        }
        blocks.push(block);
    }
    FeatureJacobian { blocks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::response::build_response_maps;
    use crate::image::GrayImage;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg16() -> LocalDescriptorConfig {
        LocalDescriptorConfig::new(16)
    }

    fn textured_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.gen::<f64>()).unwrap()
    }

    #[test]
    fn constant_image_gives_zero_descriptor() {
        let img = GrayImage::constant(40, 40, 0.3).unwrap();
        let cfg = cfg16();
        let maps = build_response_maps(&img, cfg.blur_sigma).unwrap();
        let s = Shape::new(vec![20.0, 20.0, 5.0, 35.0]).unwrap();
        let d = extract_local(&maps, &s, &cfg);
        assert_eq!(d.len(), 2 * LANDMARK_DESCRIPTOR_LEN);
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coincident_landmarks_share_a_descriptor() {
        let img = textured_image(48, 48, 11);
        let cfg = cfg16();
        let maps = build_response_maps(&img, cfg.blur_sigma).unwrap();
        let s = Shape::new(vec![24.0, 24.0, 24.0, 24.0]).unwrap();
        let d = extract_local(&maps, &s, &cfg);
        let (a, b) = d.as_slice().unwrap().split_at(LANDMARK_DESCRIPTOR_LEN);
        assert_eq!(a, b);
    }

    #[test]
    fn far_outside_landmark_is_zero() {
        let img = textured_image(32, 32, 5);
        let cfg = cfg16();
        let maps = build_response_maps(&img, cfg.blur_sigma).unwrap();
        let s = Shape::new(vec![-100.0, -100.0]).unwrap();
        let d = extract_local(&maps, &s, &cfg);
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn translation_consistency_away_from_borders() {
        // Content and query shifted by the same integer offset read identical
        // blurred responses, so descriptors must match exactly.
        let w = 96;
        let pattern = |x: f64, y: f64| {
            0.5 + 0.3 * ((x * 0.41).sin() * (y * 0.29).cos())
        };
        let img_a = GrayImage::from_fn(w, w, |x, y| pattern(x as f64, y as f64)).unwrap();
        let (dx, dy) = (7.0, -4.0);
        let img_b =
            GrayImage::from_fn(w, w, |x, y| pattern(x as f64 - dx, y as f64 - dy)).unwrap();
        let cfg = cfg16();
        let maps_a = build_response_maps(&img_a, cfg.blur_sigma).unwrap();
        let maps_b = build_response_maps(&img_b, cfg.blur_sigma).unwrap();
        let s_a = Shape::new(vec![44.0, 52.0]).unwrap();
        let s_b = Shape::new(vec![44.0 + dx, 52.0 + dy]).unwrap();
        let d_a = extract_local(&maps_a, &s_a, &cfg);
        let d_b = extract_local(&maps_b, &s_b, &cfg);
        assert!(d_a.iter().any(|&v| v != 0.0));
        assert_eq!(d_a, d_b);
    }

    #[test]
    fn jacobian_zero_on_constant_image() {
        let img = GrayImage::constant(40, 40, 0.6).unwrap();
        let cfg = cfg16();
        let maps = build_response_maps(&img, cfg.blur_sigma).unwrap();
        let s = Shape::new(vec![20.0, 20.0]).unwrap();
        let jac = local_jacobian(&maps, &s, &cfg);
        assert!(jac.blocks[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jacobian_equals_direct_central_difference() {
        let img = textured_image(64, 64, 23);
        let cfg = cfg16();
        let maps = build_response_maps(&img, cfg.blur_sigma).unwrap();
        let s = Shape::new(vec![30.0, 33.0, 17.5, 40.25]).unwrap();
        let jac = local_jacobian(&maps, &s, &cfg);
        for p in 0..2 {
            let (x, y) = s.point(p);
            let px = landmark_descriptor(&maps, &cfg, x + cfg.epsilon, y);
            let mx = landmark_descriptor(&maps, &cfg, x - cfg.epsilon, y);
            let py = landmark_descriptor(&maps, &cfg, x, y + cfg.epsilon);
            let my = landmark_descriptor(&maps, &cfg, x, y - cfg.epsilon);
            for r in 0..LANDMARK_DESCRIPTOR_LEN {
                assert_eq!(jac.blocks[p][(r, 0)], (px[r] - mx[r]) / (2.0 * cfg.epsilon));
                assert_eq!(jac.blocks[p][(r, 1)], (py[r] - my[r]) / (2.0 * cfg.epsilon));
            }
        }
    }

    #[test]
    fn jacobian_tracks_smooth_field_for_small_steps() {
        // On a smooth blob the step-1 and step-2 Jacobians differ but both
        // stay close to a five-point-stencil reference derivative.
        let img = GrayImage::from_fn(80, 80, |x, y| {
            let dx = x as f64 - 40.0;
            let dy = y as f64 - 40.0;
            (0.9 * (-(dx * dx + dy * dy) / 500.0).exp()).clamp(0.0, 1.0)
        })
        .unwrap();
        let mut cfg = LocalDescriptorConfig::new(16);
        let maps = build_response_maps(&img, cfg.blur_sigma).unwrap();
        let s = Shape::new(vec![34.0, 38.0]).unwrap();

        cfg.epsilon = 1.0;
        let j1 = local_jacobian(&maps, &s, &cfg);
        cfg.epsilon = 2.0;
        let j2 = local_jacobian(&maps, &s, &cfg);
        assert_ne!(j1.blocks[0], j2.blocks[0]);

        // Five-point stencil: (-f(x+2) + 8 f(x+1) - 8 f(x-1) + f(x-2)) / 12.
        let (x, y) = s.point(0);
        let f = |dx: f64, dy: f64| landmark_descriptor(&maps, &cfg, x + dx, y + dy);
        let (p2x, p1x, m1x, m2x) = (f(2.0, 0.0), f(1.0, 0.0), f(-1.0, 0.0), f(-2.0, 0.0));
        let (p2y, p1y, m1y, m2y) = (f(0.0, 2.0), f(0.0, 1.0), f(0.0, -1.0), f(0.0, -2.0));
        let mut max_ref: f64 = 0.0;
        for r in 0..LANDMARK_DESCRIPTOR_LEN {
            let rx = (-p2x[r] + 8.0 * p1x[r] - 8.0 * m1x[r] + m2x[r]) / 12.0;
            let ry = (-p2y[r] + 8.0 * p1y[r] - 8.0 * m1y[r] + m2y[r]) / 12.0;
            max_ref = max_ref.max(rx.abs()).max(ry.abs());
        }
        assert!(max_ref > 0.0);
        let tol = 0.25 * max_ref;
        for r in 0..LANDMARK_DESCRIPTOR_LEN {
            let rx = (-p2x[r] + 8.0 * p1x[r] - 8.0 * m1x[r] + m2x[r]) / 12.0;
            let ry = (-p2y[r] + 8.0 * p1y[r] - 8.0 * m1y[r] + m2y[r]) / 12.0;
            assert!((j1.blocks[0][(r, 0)] - rx).abs() <= tol);
            assert!((j1.blocks[0][(r, 1)] - ry).abs() <= tol);
            assert!((j2.blocks[0][(r, 0)] - rx).abs() <= tol);
            assert!((j2.blocks[0][(r, 1)] - ry).abs() <= tol);
        }
    }

    #[test]
    fn config_validation() {
        assert!(LocalDescriptorConfig::new(16).validate().is_ok());
        assert!(LocalDescriptorConfig::new(13).validate().is_err());
        let mut cfg = LocalDescriptorConfig::new(16);
        cfg.epsilon = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = LocalDescriptorConfig::new(16);
        cfg.blur_sigma = -2.0;
        assert!(cfg.validate().is_err());
    }
}
