//! Per-orientation gradient response maps stored as summed-area tables.
//!
//! Gradient magnitude is split between the two nearest of 8 signed
//! orientation bins, each bin plane is blurred with a Gaussian, and the
//! blurred planes are converted to integral maps so any rectangular histogram
//! query costs four reads.
//!
//! Blurred responses are quantized to multiples of 2^-20 before integration.
//! Every integral entry is then an exactly representable multiple of 2^-20,
//! so rectangle queries reproduce naive sums over the blurred plane bit for
//! bit instead of only up to floating-point reassociation.

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Number of signed orientation bins covering `[0, 2π)`.
pub const ORIENTATION_BINS: usize = 8;

/// Quantization scale for blurred responses (2^20).
const QUANT: f64 = 1048576.0;

/// Integral maps of the blurred orientation responses of one image.
#[derive(Debug, Clone)]
pub struct ResponseMaps {
    width: usize,
    height: usize,
    blur_sigma: f64,
    /// One `(width+1) × (height+1)` summed-area table per orientation bin.
    integrals: Vec<Vec<f64>>,
}

/// Computes the 8 blurred, quantized orientation response planes of `img`,
/// each `width × height` row-major.
pub fn build_response_planes(img: &GrayImage, sigma: f64) -> Result<Vec<Vec<f64>>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("blur sigma must be positive, got {sigma}")));
    }
    let (w, h) = (img.width(), img.height());
    let mut planes = vec![vec![0.0f64; w * h]; ORIENTATION_BINS];
    let bin_width = 2.0 * std::f64::consts::PI / ORIENTATION_BINS as f64;
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as i64, y as i64);
            let gx = img.get_clamped(xi + 1, yi) - img.get_clamped(xi - 1, yi);
            let gy = img.get_clamped(xi, yi + 1) - img.get_clamped(xi, yi - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += 2.0 * std::f64::consts::PI;
            }
            let fb = angle / bin_width - 0.5;
            let lower = fb.floor();
            let frac = fb - lower;
            let bin0 = (lower as i64).rem_euclid(ORIENTATION_BINS as i64) as usize;
            let bin1 = (bin0 + 1) % ORIENTATION_BINS;
            planes[bin0][y * w + x] += mag * (1.0 - frac);
            planes[bin1][y * w + x] += mag * frac;
        }
    }
    for plane in planes.iter_mut() {
        gaussian_blur(plane, w, h, sigma);
        for v in plane.iter_mut() {
            *v = (*v * QUANT).round() / QUANT;
        }
    }
    Ok(planes)
}

/// Builds the integral maps of `img`'s blurred orientation responses.
pub fn build_response_maps(img: &GrayImage, sigma: f64) -> Result<ResponseMaps> {
    let planes = build_response_planes(img, sigma)?;
    Ok(ResponseMaps::from_planes(
        img.width(),
        img.height(),
        sigma,
        &planes,
    ))
}

impl ResponseMaps {
    /// Integrates precomputed response planes (each `width × height`).
    pub fn from_planes(width: usize, height: usize, blur_sigma: f64, planes: &[Vec<f64>]) -> Self {
        assert_eq!(planes.len(), ORIENTATION_BINS);
        let stride = width + 1;
        let mut integrals = Vec::with_capacity(ORIENTATION_BINS);
        for plane in planes {
            assert_eq!(plane.len(), width * height);
            let mut sat = vec![0.0f64; stride * (height + 1)];
            for y in 0..height {
                for x in 0..width {
                    sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1]
                        + sat[(y + 1) * stride + x]
                        - sat[y * stride + x]
                        + plane[y * width + x];
                }
            }
            integrals.push(sat);
        }
        ResponseMaps {
            width,
            height,
            blur_sigma,
            integrals,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn blur_sigma(&self) -> f64 {
        self.blur_sigma
    }

    /// Raw integral entry, `i` along x in `0..=width`, `j` along y in `0..=height`.
    pub fn integral(&self, bin: usize, i: usize, j: usize) -> f64 {
        self.integrals[bin][j * (self.width + 1) + i]
    }

    /// Sum of the blurred responses of `bin` over the half-open rectangle
    /// `[x0, x1) × [y0, y1)`. Area outside the image contributes zero.
    pub fn rect_sum(&self, bin: usize, x0: i64, y0: i64, x1: i64, y1: i64) -> f64 {
        let xa = x0.clamp(0, self.width as i64) as usize;
        let xb = x1.clamp(0, self.width as i64) as usize;
        let ya = y0.clamp(0, self.height as i64) as usize;
        let yb = y1.clamp(0, self.height as i64) as usize;
        if xb <= xa || yb <= ya {
            return 0.0;
        }
        self.integral(bin, xb, yb) - self.integral(bin, xa, yb) - self.integral(bin, xb, ya)
            + self.integral(bin, xa, ya)
    }
}

/// In-place separable Gaussian blur with zero padding outside the plane.
fn gaussian_blur(plane: &mut [f64], width: usize, height: usize, sigma: f64) {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-((i * i) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let total: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= total;
    }

    let mut tmp = vec![0.0f64; plane.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let sx = x as i64 + ki as i64 - radius;
                if sx >= 0 && sx < width as i64 {
                    acc += k * plane[y * width + sx as usize];
                }
            }
            tmp[y * width + x] = acc;
        }
    }
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let sy = y as i64 + ki as i64 - radius;
                if sy >= 0 && sy < height as i64 {
                    acc += k * tmp[sy as usize * width + x];
                }
            }
            plane[y * width + x] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.gen::<f64>()).unwrap()
    }

    #[test]
    fn constant_image_gives_zero_maps() {
        let img = GrayImage::constant(16, 12, 0.7).unwrap();
        let maps = build_response_maps(&img, 1.5).unwrap();
        for bin in 0..ORIENTATION_BINS {
            assert_eq!(maps.rect_sum(bin, 0, 0, 16, 12), 0.0);
        }
    }

    #[test]
    fn integral_borders_are_zero() {
        let maps = build_response_maps(&noisy_image(9, 7, 3), 1.0).unwrap();
        for bin in 0..ORIENTATION_BINS {
            for i in 0..=9 {
                assert_eq!(maps.integral(bin, i, 0), 0.0);
            }
            for j in 0..=7 {
                assert_eq!(maps.integral(bin, 0, j), 0.0);
            }
        }
    }

    #[test]
    fn integral_is_monotone() {
        let maps = build_response_maps(&noisy_image(14, 11, 9), 2.0).unwrap();
        for bin in 0..ORIENTATION_BINS {
            for j in 0..=11 {
                for i in 1..=14 {
                    assert!(maps.integral(bin, i, j) >= maps.integral(bin, i - 1, j));
                }
            }
            for i in 0..=14 {
                for j in 1..=11 {
                    assert!(maps.integral(bin, i, j) >= maps.integral(bin, i, j - 1));
                }
            }
        }
    }

    #[test]
    fn rect_queries_match_naive_sums_exactly() {
        let img = noisy_image(24, 18, 42);
        let planes = build_response_planes(&img, 1.5).unwrap();
        let maps = ResponseMaps::from_planes(24, 18, 1.5, &planes);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let bin = rng.gen_range(0..ORIENTATION_BINS);
            let x0 = rng.gen_range(0..24) as i64;
            let y0 = rng.gen_range(0..18) as i64;
            let x1 = rng.gen_range(x0 + 1..=24);
            let y1 = rng.gen_range(y0 + 1..=18);
            let mut naive = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    naive += planes[bin][y as usize * 24 + x as usize];
                }
            }
            assert_eq!(maps.rect_sum(bin, x0, y0, x1, y1), naive);
        }
    }

    #[test]
    fn single_pixel_total_mass_matches_plane_total() {
        let img = GrayImage::from_fn(15, 15, |x, y| if x == 7 && y == 7 { 1.0 } else { 0.0 }).unwrap();
        let planes = build_response_planes(&img, 1.2).unwrap();
        let maps = ResponseMaps::from_planes(15, 15, 1.2, &planes);
        let mut via_integral = 0.0;
        let mut naive = 0.0;
        for bin in 0..ORIENTATION_BINS {
            via_integral += maps.rect_sum(bin, 0, 0, 15, 15);
            naive += planes[bin].iter().sum::<f64>();
        }
        assert!(naive > 0.0);
        assert_eq!(via_integral, naive);
    }

    #[test]
    fn out_of_bounds_queries_clamp_to_zero_area() {
        let maps = build_response_maps(&noisy_image(10, 10, 1), 1.0).unwrap();
        assert_eq!(maps.rect_sum(0, -20, -20, -10, -10), 0.0);
        assert_eq!(maps.rect_sum(0, 50, 2, 60, 8), 0.0);
        // Half-overlapping query equals the clamped in-bounds query.
        assert_eq!(
            maps.rect_sum(3, -5, -5, 5, 5),
            maps.rect_sum(3, 0, 0, 5, 5)
        );
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        let img = noisy_image(8, 8, 2);
        assert!(build_response_maps(&img, 0.0).is_err());
        assert!(build_response_maps(&img, -1.0).is_err());
    }
}
