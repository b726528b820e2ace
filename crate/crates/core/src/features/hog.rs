//! Histogram-of-oriented-gradients descriptor for the whole face crop.
//!
//! The image is resampled to a square, gradients are binned into unsigned
//! orientation histograms per cell, and overlapping blocks of cells are
//! L2-normalized with clipping before concatenation.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::image::GrayImage;

const NORM_EPS: f64 = 1e-6;
const CLIP: f64 = 0.2;

/// Geometry of the global descriptor. All sizes are in pixels of the
/// resampled image. The defaults produce a 1764-dimensional vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HogConfig {
    pub resize_to: usize,
    pub block_size: usize,
    pub block_stride: usize,
    pub cell_size: usize,
    pub num_bins: usize,
}

impl Default for HogConfig {
    fn default() -> Self {
        HogConfig {
            resize_to: 64,
            block_size: 16,
            block_stride: 8,
            cell_size: 8,
            num_bins: 9,
        }
    }
}

impl HogConfig {
    pub fn validate(&self) -> Result<()> {
        let c = self.cell_size;
        if c == 0 || self.block_size == 0 || self.block_stride == 0 || self.num_bins == 0 {
            return Err(Error::invalid("HOG sizes must be positive"));
        }
        if self.block_size % c != 0 {
            return Err(Error::invalid("block size must be divisible by cell size"));
        }
        if self.block_stride % c != 0 {
            return Err(Error::invalid("block stride must be divisible by cell size"));
        }
        if self.resize_to % c != 0 {
            return Err(Error::invalid("resize target must be divisible by cell size"));
        }
        if self.block_size > self.resize_to {
            return Err(Error::invalid("block size exceeds image size"));
        }
        if (self.resize_to - self.block_size) % self.block_stride != 0 {
            return Err(Error::invalid(
                "blocks must tile the image exactly: (resize_to - block_size) % block_stride != 0",
            ));
        }
        Ok(())
    }

    pub fn blocks_per_side(&self) -> usize {
        (self.resize_to - self.block_size) / self.block_stride + 1
    }

    pub fn cells_per_block(&self) -> usize {
        self.block_size / self.cell_size
    }

    /// Total descriptor dimension: blocks² × cells-per-block² × bins.
    pub fn descriptor_len(&self) -> usize {
        let b = self.blocks_per_side();
        let cb = self.cells_per_block();
        b * b * cb * cb * self.num_bins
    }
}

/// Computes the global HOG descriptor of `img` under `cfg`.
pub fn extract_global(img: &GrayImage, cfg: &HogConfig) -> Result<Array1<f64>> {
    cfg.validate()?;
    let n = cfg.resize_to;
    let resized = img.resize_bilinear(n, n)?;

    // Per-cell orientation histograms; magnitude votes split between the two
    // nearest unsigned orientation bins.
    let cells_per_side = n / cfg.cell_size;
    let nb = cfg.num_bins;
    let mut cells = vec![0.0f64; cells_per_side * cells_per_side * nb];
    let bin_width = std::f64::consts::PI / nb as f64;
    for y in 0..n {
        for x in 0..n {
            let (xi, yi) = (x as i64, y as i64);
            let gx = resized.get_clamped(xi + 1, yi) - resized.get_clamped(xi - 1, yi);
            let gy = resized.get_clamped(xi, yi + 1) - resized.get_clamped(xi, yi - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += std::f64::consts::PI;
            }
            if angle >= std::f64::consts::PI {
                angle -= std::f64::consts::PI;
            }
            let fb = angle / bin_width - 0.5;
            let lower = fb.floor();
            let frac = fb - lower;
            let bin0 = (lower as i64).rem_euclid(nb as i64) as usize;
            let bin1 = (bin0 + 1) % nb;
            let cell = (y / cfg.cell_size) * cells_per_side + x / cfg.cell_size;
            cells[cell * nb + bin0] += mag * (1.0 - frac);
            cells[cell * nb + bin1] += mag * frac;
        }
    }

    // Blocks of cells, L2 normalization clipped at 0.2 and renormalized.
    let cb = cfg.cells_per_block();
    let mut out = Vec::with_capacity(cfg.descriptor_len());
    let mut block = vec![0.0f64; cb * cb * nb];
    for by in (0..=n - cfg.block_size).step_by(cfg.block_stride) {
        for bx in (0..=n - cfg.block_size).step_by(cfg.block_stride) {
            let cell_x0 = bx / cfg.cell_size;
            let cell_y0 = by / cfg.cell_size;
            for cy in 0..cb {
                for cx in 0..cb {
                    let cell = (cell_y0 + cy) * cells_per_side + cell_x0 + cx;
                    let dst = (cy * cb + cx) * nb;
                    block[dst..dst + nb].copy_from_slice(&cells[cell * nb..cell * nb + nb]);
                }
            }
            normalize_block(&mut block);
            out.extend_from_slice(&block);
        }
    }
    Ok(Array1::from_vec(out))
}

fn normalize_block(block: &mut [f64]) {
    let norm = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
    let n1 = norm(block);
    for v in block.iter_mut() {
        *v = (*v / n1).min(CLIP);
    }
    let n2 = norm(block);
    for v in block.iter_mut() {
        *v /= n2;
    }
}
