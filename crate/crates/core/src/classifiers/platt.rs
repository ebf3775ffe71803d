//! Sigmoid calibration of decision values: `P(y=1|f) = 1 / (1 + exp(A f + B))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

impl PlattParams {
    /// Overflow-safe sigmoid.
    pub fn probability(&self, f: f64) -> f64 {
        let z = self.a * f + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Regularized negative log-likelihood against smoothed targets.
pub fn platt_nll(dec: &[f64], positive: &[bool], a: f64, b: f64) -> f64 {
    let (t_pos, t_neg) = targets(positive);
    dec.iter()
        .zip(positive)
        .map(|(&f, &p)| {
            let t = if p { t_pos } else { t_neg };
            let z = f * a + b;
            if z >= 0.0 {
                t * z + (1.0 + (-z).exp()).ln()
            } else {
                (t - 1.0) * z + (1.0 + z.exp()).ln()
            }
        })
        .sum()
}

fn targets(positive: &[bool]) -> (f64, f64) {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    ((n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
}

/// Newton's method with backtracking line search on the smoothed-target
/// likelihood. The fit is normalized to a positive first label so the
/// result is exactly symmetric under flipping every label and value.
pub fn platt_calibrate(dec: &[f64], positive: &[bool]) -> Result<PlattParams> {
    if dec.len() != positive.len() || dec.len() < 2 {
        return Err(Error::Calibration(
            "Platt calibration needs at least 2 decision values with labels".into(),
        ));
    }
    if positive.iter().all(|&p| p) || positive.iter().all(|&p| !p) {
        return Err(Error::Calibration(
            "Platt calibration needs both labels present".into(),
        ));
    }
    if dec.iter().any(|f| !f.is_finite()) {
        return Err(Error::Calibration("non-finite decision value".into()));
    }
    if !positive[0] {
        let dec: Vec<f64> = dec.iter().map(|f| -f).collect();
        let pos: Vec<bool> = positive.iter().map(|p| !p).collect();
        let p = fit(&dec, &pos);
        return Ok(PlattParams { a: p.a, b: -p.b });
    }
    Ok(fit(dec, positive))
}

fn fit(dec: &[f64], positive: &[bool]) -> PlattParams {
    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    const EPS: f64 = 1e-5;

    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    let (t_pos, t_neg) = targets(positive);
    let t: Vec<f64> = positive.iter().map(|&p| if p { t_pos } else { t_neg }).collect();

    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut fval = platt_nll(dec, positive, a, b);

    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&f, &ti) in dec.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = platt_nll(dec, positive, na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            break;
        }
    }
    PlattParams { a, b }
}
