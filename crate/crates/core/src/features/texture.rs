//! Grey-level co-occurrence texture statistics.

use image::RgbImage;

use super::raster::{check_pair, Mask};
use crate::error::{Error, Result};

pub const GRAY_LEVELS: usize = 32;
pub const TEXTURE_LEN: usize = 4;
const OFFSETS: [(i64, i64); 2] = [(1, 0), (0, 1)];

/// Integer luma in 0..=255, quantized to 32 levels.
pub fn gray_level(rgb: [u8; 3]) -> usize {
    let [r, g, b] = rgb.map(u32::from);
    let luma = (299 * r + 587 * g + 114 * b) / 1000;
    (luma as usize * GRAY_LEVELS) / 256
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureFeatures {
    pub energy: f64,
    pub entropy: f64,
    pub variance: f64,
    pub homogeneity: f64,
}

impl TextureFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.energy, self.entropy, self.variance, self.homogeneity]
    }
}

/// Symmetric co-occurrence counts over offsets (1,0) and (0,1), restricted
/// to pairs with both pixels inside the mask. Row-major 32x32.
pub fn cooccurrence_counts(image: &RgbImage, mask: &Mask) -> Result<Vec<u64>> {
    check_pair(image, mask)?;
    let level = |x: i64, y: i64| gray_level(image.get_pixel(x as u32, y as u32).0);
    let mut counts = vec![0u64; GRAY_LEVELS * GRAY_LEVELS];
    for (x, y) in mask.foreground() {
        let (x, y) = (i64::from(x), i64::from(y));
        let a = level(x, y);
        for (dx, dy) in OFFSETS {
            if mask.at(x + dx, y + dy) {
                let b = level(x + dx, y + dy);
                counts[a * GRAY_LEVELS + b] += 1;
                counts[b * GRAY_LEVELS + a] += 1;
            }
        }
    }
    Ok(counts)
}

/// Statistics of a normalized co-occurrence matrix given as counts.
pub fn texture_from_counts(counts: &[u64]) -> Result<TextureFeatures> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::DegenerateTexture);
    }
    let n = GRAY_LEVELS;
    let total = total as f64;
    let (mut energy, mut entropy, mut homogeneity) = (0.0, 0.0, 0.0);
    let mut marginal = [0.0; GRAY_LEVELS];
    for i in 0..n {
        for j in 0..n {
            let c = counts[i * n + j];
            if c == 0 {
                continue;
            }
            let p = c as f64 / total;
            energy += p * p;
            entropy -= p * p.log2();
            homogeneity += p / (1.0 + i.abs_diff(j) as f64);
            marginal[i] += p;
        }
    }
    let mean: f64 = marginal.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    let variance = marginal
        .iter()
        .enumerate()
        .map(|(i, p)| (i as f64 - mean).powi(2) * p)
        .sum();
    Ok(TextureFeatures {
        energy,
        entropy,
        variance,
        homogeneity,
    })
}

pub fn cooccurrence_features(image: &RgbImage, mask: &Mask) -> Result<TextureFeatures> {
    texture_from_counts(&cooccurrence_counts(image, mask)?)
}
