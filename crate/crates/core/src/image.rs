//! Grayscale raster with intensities in `[0, 1]`, plus the resampling and
//! mirroring primitives the feature extractors and augmentation need.

use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "pixel count {} does not match {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        if !pixels.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(Error::invalid("pixel intensities must lie in [0, 1]"));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)`; values are clamped to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        GrayImage::new(width, height, pixels)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Intensity with coordinates clamped to the image bounds.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> f64 {
        let xc = x.clamp(0, self.width as i64 - 1) as usize;
        let yc = y.clamp(0, self.height as i64 - 1) as usize;
        self.get(xc, yc)
    }

    /// Mirror around the vertical axis: `out(x, y) = in(width-1-x, y)`.
    pub fn flip_horizontal(&self) -> GrayImage {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for y in 0..self.height {
            let row = &self.pixels[y * self.width..(y + 1) * self.width];
            pixels.extend(row.iter().rev());
        }
        GrayImage {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Bilinear resampling with pixel-center alignment. Resampling to the
    /// same size reproduces the input exactly.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<GrayImage> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("resize target must be positive"));
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            let src_y = (y as f64 + 0.5) * sy - 0.5;
            let y0 = src_y.floor();
            let fy = src_y - y0;
            for x in 0..width {
                let src_x = (x as f64 + 0.5) * sx - 0.5;
                let x0 = src_x.floor();
                let fx = src_x - x0;
                let (xi, yi) = (x0 as i64, y0 as i64);
                let v00 = self.get_clamped(xi, yi);
                let v10 = self.get_clamped(xi + 1, yi);
                let v01 = self.get_clamped(xi, yi + 1);
                let v11 = self.get_clamped(xi + 1, yi + 1);
                let top = v00 * (1.0 - fx) + v10 * fx;
                let bottom = v01 * (1.0 - fx) + v11 * fx;
                pixels.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
            }
        }
        GrayImage::new(width, height, pixels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(GrayImage::new(0, 4, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.5, 1.5]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.5, f64::NAN]).is_err());
    }

    #[test]
    fn identity_resize_is_exact() {
        let img = GrayImage::from_fn(9, 7, |x, y| ((x * 31 + y * 17) % 11) as f64 / 10.0).unwrap();
        let same = img.resize_bilinear(9, 7).unwrap();
        assert_eq!(img, same);
    }

    #[test]
    fn flip_twice_is_identity() {
        let img = GrayImage::from_fn(8, 5, |x, y| ((x + 2 * y) % 7) as f64 / 6.0).unwrap();
        assert_eq!(img.flip_horizontal().flip_horizontal(), img);
    }

    #[test]
    fn upscaled_constant_stays_constant() {
        let img = GrayImage::constant(4, 4, 0.25).unwrap();
        let big = img.resize_bilinear(16, 16).unwrap();
        assert!(big.pixels().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn clamped_reads_replicate_borders() {
        let img = GrayImage::from_fn(3, 3, |x, _| x as f64 / 2.0).unwrap();
        assert_eq!(img.get_clamped(-5, 1), img.get(0, 1));
        assert_eq!(img.get_clamped(7, 0), img.get(2, 0));
    }
}
