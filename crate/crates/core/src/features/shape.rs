//! Mask geometry: area, perimeter, moment ellipse, reflection symmetry.

use std::collections::HashSet;

use super::raster::{Mask, FOUR_NEIGHBORS};
use crate::error::{Error, Result};

pub const SHAPE_LEN: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFeatures {
    pub area: f64,
    pub perimeter: f64,
    /// Dice overlap of the mask with its reflection about the principal axis.
    pub symmetry: f64,
    pub major_axis: f64,
    pub minor_axis: f64,
    /// |mask XOR rasterized ellipse| / area.
    pub ellipse_diff: f64,
    pub eccentricity: f64,
}

impl ShapeFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.area,
            self.perimeter,
            self.symmetry,
            self.major_axis,
            self.minor_axis,
            self.ellipse_diff,
            self.eccentricity,
        ]
    }
}

/// Moment-equivalent ellipse of a pixel set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEllipse {
    pub cx: f64,
    pub cy: f64,
    /// Eigenvalues of the covariance, `lambda_major >= lambda_minor`.
    pub lambda_major: f64,
    pub lambda_minor: f64,
    /// Angle of the major axis from the +x axis.
    pub theta: f64,
}

impl MomentEllipse {
    /// Second central moments are accumulated as exact integers
    /// (`n * sum(x^2) - sum(x)^2`), so a 90 degree rotation of the mask swaps
    /// them without rounding differences.
    pub fn of(mask: &Mask) -> Result<Self> {
        let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128, 0i128);
        for (x, y) in mask.foreground() {
            let (x, y) = (i128::from(x), i128::from(y));
            n += 1;
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        if n == 0 {
            return Err(Error::EmptyRegion);
        }
        let n2 = (n * n) as f64;
        let c20 = (n * sxx - sx * sx) as f64 / n2;
        let c02 = (n * syy - sy * sy) as f64 / n2;
        let c11 = (n * sxy - sx * sy) as f64 / n2;
        let mean = (c20 + c02) / 2.0;
        let half_diff = (c20 - c02) / 2.0;
        let root = (half_diff * half_diff + c11 * c11).sqrt();
        Ok(MomentEllipse {
            cx: sx as f64 / n as f64,
            cy: sy as f64 / n as f64,
            lambda_major: mean + root,
            lambda_minor: (mean - root).max(0.0),
            theta: 0.5 * (2.0 * c11).atan2(c20 - c02),
        })
    }

    /// Full axis lengths (4 standard deviations).
    pub fn axes(&self) -> (f64, f64) {
        (4.0 * self.lambda_major.sqrt(), 4.0 * self.lambda_minor.sqrt())
    }
}

fn perimeter(mask: &Mask) -> usize {
    mask.foreground()
        .filter(|&(x, y)| {
            let (x, y) = (i64::from(x), i64::from(y));
            FOUR_NEIGHBORS
                .iter()
                .any(|&(dx, dy)| !mask.at(x + dx, y + dy))
        })
        .count()
}

fn reflection_symmetry(mask: &Mask, e: &MomentEllipse, area: usize) -> f64 {
    let (ux, uy) = (e.theta.cos(), e.theta.sin());
    let reflected: HashSet<(i64, i64)> = mask
        .foreground()
        .map(|(x, y)| {
            let (vx, vy) = (f64::from(x) - e.cx, f64::from(y) - e.cy);
            let dot = vx * ux + vy * uy;
            let rx = e.cx + 2.0 * dot * ux - vx;
            let ry = e.cy + 2.0 * dot * uy - vy;
            (rx.round() as i64, ry.round() as i64)
        })
        .collect();
    let overlap = reflected.iter().filter(|&&(x, y)| mask.at(x, y)).count();
    2.0 * overlap as f64 / (area + reflected.len()) as f64
}

fn ellipse_difference(mask: &Mask, e: &MomentEllipse, area: usize) -> f64 {
    // Semi-axes; a line-like mask still gets a half-pixel-wide ellipse.
    let a = (2.0 * e.lambda_major.sqrt()).max(0.5);
    let b = (2.0 * e.lambda_minor.sqrt()).max(0.5);
    let (c, s) = (e.theta.cos(), e.theta.sin());
    let x0 = (e.cx - a).floor() as i64;
    let x1 = (e.cx + a).ceil() as i64;
    let y0 = (e.cy - a).floor() as i64;
    let y1 = (e.cy + a).ceil() as i64;
    let (mut inside, mut both) = (0usize, 0usize);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 - e.cx, y as f64 - e.cy);
            let u = (dx * c + dy * s) / a;
            let v = (-dx * s + dy * c) / b;
            if u * u + v * v <= 1.0 {
                inside += 1;
                if mask.at(x, y) {
                    both += 1;
                }
            }
        }
    }
    (area + inside - 2 * both) as f64 / area as f64
}

pub fn shape_features(mask: &Mask) -> Result<ShapeFeatures> {
    let area = mask.area();
    if area == 0 {
        return Err(Error::EmptyRegion);
    }
    let e = MomentEllipse::of(mask)?;
    let (major_axis, minor_axis) = e.axes();
    let eccentricity = if e.lambda_major > 0.0 {
        (1.0 - e.lambda_minor / e.lambda_major).max(0.0).sqrt()
    } else {
        0.0
    };
    Ok(ShapeFeatures {
        area: area as f64,
        perimeter: perimeter(mask) as f64,
        symmetry: reflection_symmetry(mask, &e, area),
        major_axis,
        minor_axis,
        ellipse_diff: ellipse_difference(mask, &e, area),
        eccentricity,
    })
}
