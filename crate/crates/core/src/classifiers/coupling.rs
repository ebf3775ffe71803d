//! Multiclass probabilities from pairwise estimates.
//!
//! Minimizes `sum_{i<j} (r_ji p_i - r_ij p_j)^2` over the simplex by solving
//! the stationarity system `Q p + lambda e = 0` bordered with `e'p = 1`, where
//! `Q_tt = sum_{s != t} r_st^2` and `Q_ts = -r_st r_ts`.

use crate::error::{Error, Result};

/// Symmetric pairwise quadratic form of the coupling objective.
pub fn coupling_matrix(r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = r.len();
    let mut q = vec![vec![0.0; m]; m];
    for t in 0..m {
        for s in 0..m {
            if s == t {
                continue;
            }
            q[t][t] += r[s][t] * r[s][t];
            q[t][s] = -r[s][t] * r[t][s];
        }
    }
    q
}

pub fn coupling_objective(r: &[Vec<f64>], p: &[f64]) -> f64 {
    let m = r.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let d = r[j][i] * p[i] - r[i][j] * p[j];
            total += d * d;
        }
    }
    total
}

fn validate(r: &[Vec<f64>]) -> Result<()> {
    let m = r.len();
    if m < 2 || r.iter().any(|row| row.len() != m) {
        return Err(Error::Validation(format!(
            "pairwise matrix must be square with m >= 2, got {m} rows"
        )));
    }
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let v = r[i][j];
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Validation(format!("r[{i}][{j}] = {v} is outside (0, 1)")));
            }
            if (v + r[j][i] - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!(
                    "r[{i}][{j}] + r[{j}][{i}] = {} != 1",
                    v + r[j][i]
                )));
            }
        }
    }
    Ok(())
}

/// Gaussian elimination with partial pivoting. `None` when singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / a[row][row];
    }
    Some(x)
}

/// `r[i][j]` estimates P(class i | class i or j). Returns `p` summing to 1.
pub fn pairwise_coupling(r: &[Vec<f64>]) -> Result<Vec<f64>> {
    validate(r)?;
    let m = r.len();
    let q = coupling_matrix(r);
    let mut a = vec![vec![0.0; m + 1]; m + 1];
    for t in 0..m {
        a[t][..m].copy_from_slice(&q[t]);
        a[t][m] = 1.0;
        a[m][t] = 1.0;
    }
    let mut rhs = vec![0.0; m + 1];
    rhs[m] = 1.0;
    let sol = solve_linear(a, rhs).ok_or_else(|| Error::Coupling(r.to_vec()))?;
    let mut p: Vec<f64> = sol[..m].iter().map(|&v| v.max(0.0)).collect();
    let sum: f64 = p.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::Coupling(r.to_vec()));
    }
    p.iter_mut().for_each(|v| *v /= sum);
    Ok(p)
}
