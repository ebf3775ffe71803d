//! Border/interior pixel classification colour histograms.

use image::RgbImage;

use super::raster::{check_pair, Mask, FOUR_NEIGHBORS};
use crate::error::Result;

pub const BIC_COLORS: usize = 64;
pub const BIC_LEN: usize = 2 * BIC_COLORS;
const LOG_CAP: f64 = 9.0;

/// 4x4x4 colour index of an 8-bit RGB pixel.
pub fn quantize(rgb: [u8; 3]) -> usize {
    let [r, g, b] = rgb.map(|c| usize::from(c >> 6));
    r * 16 + g * 4 + b
}

/// Raw (pre-log) counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BicHistograms {
    pub border: [u32; BIC_COLORS],
    pub interior: [u32; BIC_COLORS],
}

impl BicHistograms {
    pub fn total(&self) -> u64 {
        self.border
            .iter()
            .chain(&self.interior)
            .map(|&c| u64::from(c))
            .sum()
    }
}

/// A masked pixel is border when any 4-neighbour lies outside the mask or
/// has a different quantized colour; otherwise it is interior.
pub fn bic_histograms(image: &RgbImage, mask: &Mask) -> Result<BicHistograms> {
    check_pair(image, mask)?;
    let color = |x: i64, y: i64| quantize(image.get_pixel(x as u32, y as u32).0);
    let mut hist = BicHistograms {
        border: [0; BIC_COLORS],
        interior: [0; BIC_COLORS],
    };
    for (x, y) in mask.foreground() {
        let (x, y) = (i64::from(x), i64::from(y));
        let c = color(x, y);
        let border = FOUR_NEIGHBORS.iter().any(|&(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            !mask.at(nx, ny) || color(nx, ny) != c
        });
        if border {
            hist.border[c] += 1;
        } else {
            hist.interior[c] += 1;
        }
    }
    Ok(hist)
}

/// floor(log2(count) + 1), 0 for empty bins, capped at 9.
pub fn log_compress(count: u32) -> f64 {
    if count == 0 {
        0.0
    } else {
        (f64::from(count).log2() + 1.0).floor().min(LOG_CAP)
    }
}

/// 128 values: the border histogram followed by the interior one.
pub fn bic_descriptor(image: &RgbImage, mask: &Mask) -> Result<Vec<f64>> {
    let h = bic_histograms(image, mask)?;
    Ok(h.border
        .iter()
        .chain(&h.interior)
        .map(|&c| log_compress(c))
        .collect())
}
