//! Soft-margin binary SVM trained by sequential minimal optimization with
//! second-order working-set selection.
//!
//! Dual problem: maximize `sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij`
//! subject to `0 <= a_i <= C` and `sum(a_i y_i) = 0`.

use serde::{Deserialize, Serialize};

use super::kernel::{Gram, Kernel};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Final maximal KKT violation.
    pub gap: f64,
}

/// Dual objective value for multipliers `alpha`.
pub fn dual_objective(gram: &Gram, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram.get(i, j);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Solve the dual on a precomputed kernel matrix. Labels must be +/-1.
pub fn solve_dual(gram: &Gram, y: &[f64], c: f64, cfg: &SmoConfig) -> Result<DualSolution> {
    let n = y.len();
    debug_assert_eq!(gram.len(), n);
    let mut alpha = vec![0.0; n];
    // Gradient of 1/2 a'Qa - e'a.
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iterations = 0;
    let gap = loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let mut sel_i = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                sel_i = Some(t);
            }
            if in_low(alpha[t], y[t]) && v < gmin {
                gmin = v;
            }
        }
        let Some(i) = sel_i else { break 0.0 };
        let gap = gmax - gmin;
        if gap < cfg.tol {
            break gap.max(0.0);
        }
        if iterations >= cfg.max_iter {
            return Err(Error::Convergence {
                iterations,
                residual: gap,
            });
        }
        iterations += 1;

        let kii = gram.get(i, i);
        let mut sel_j = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let b = gmax + y[t] * grad[t];
            if b > 0.0 {
                let mut a = kii + gram.get(t, t) - 2.0 * gram.get(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let v = -b * b / a;
                if v < best {
                    best = v;
                    sel_j = Some(t);
                }
            }
        }
        let Some(j) = sel_j else { break gap };

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = gram.get(i, j);
        let quad = {
            let q = kii + gram.get(j, j) - 2.0 * kij;
            if q <= 0.0 {
                TAU
            } else {
                q
            }
        };
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * gram.get(t, i) * di + y[j] * gram.get(t, j) * dj);
        }
    };

    // Bias from free multipliers, or the middle of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };
    Ok(DualSolution {
        alpha,
        bias: -rho,
        iterations,
        gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl BinarySvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, a)| a * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.decision(x) > 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }
}

fn check_labels(y: &[f64]) -> Result<()> {
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Training("binary labels must be +1 or -1".into()));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::Training("both binary labels must be present".into()));
    }
    Ok(())
}

/// Train on rows whose kernel matrix is already known.
///
/// The problem is solved with the first label normalized to +1, so flipping
/// every label yields exactly negated decision values.
pub(crate) fn train_with_gram(
    rows: &[&[f64]],
    y: &[f64],
    gram: &Gram,
    kernel: Kernel,
    c: f64,
    cfg: &SmoConfig,
) -> Result<(BinarySvmModel, DualSolution)> {
    check_labels(y)?;
    if !(c > 0.0) {
        return Err(Error::Training(format!("C must be positive, got {c}")));
    }
    let flip = y[0] < 0.0;
    let solved_y: Vec<f64> = if flip { y.iter().map(|v| -v).collect() } else { y.to_vec() };
    let mut sol = solve_dual(gram, &solved_y, c, cfg)?;
    if flip {
        sol.bias = -sol.bias;
    }
    let mut support_vectors = Vec::new();
    let mut coef = Vec::new();
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(rows[t].to_vec());
            coef.push(a * y[t]);
        }
    }
    Ok((
        BinarySvmModel {
            kernel,
            c,
            support_vectors,
            coef,
            bias: sol.bias,
        },
        sol,
    ))
}

pub fn train_binary_svm(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: Kernel,
    c: f64,
    cfg: &SmoConfig,
) -> Result<BinarySvmModel> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Training(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape("rows have differing lengths".into()));
    }
    let gram = Gram::new(x, kernel);
    let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
    train_with_gram(&rows, y, &gram, kernel, c, cfg).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_pair_boundary_at_half() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![-1.0, 1.0];
        let m = train_binary_svm(&x, &y, Kernel::Linear, 1e6, &SmoConfig { tol: 1e-9, ..Default::default() }).unwrap();
        assert!(m.decision(&[0.5]).abs() < 1e-9);
        assert_eq!(m.predict(&[0.0]), -1.0);
        assert_eq!(m.predict(&[1.0]), 1.0);
        // Margin 1 at both points: w = 2, b = -1.
        assert!((m.decision(&[1.0]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn xor_rbf_fits() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = vec![1.0, 1.0, -1.0, -1.0];
        let m = train_binary_svm(&x, &y, Kernel::Rbf { gamma: 1.0 }, 10.0, &SmoConfig::default()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(m.predict(xi), *yi);
        }
        assert!(m.coef.iter().sum::<f64>().abs() < 1e-6);
    }

    #[test]
    fn label_flip_negates_exactly() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]).collect();
        let y: Vec<f64> = (0..12).map(|i| if (i * 7) % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
        let k = Kernel::Rbf { gamma: 0.8 };
        let a = train_binary_svm(&x, &y, k, 3.0, &SmoConfig::default()).unwrap();
        let b = train_binary_svm(&x, &flipped, k, 3.0, &SmoConfig::default()).unwrap();
        for t in [[0.1, 0.2], [-0.5, 0.9], [2.0, -1.0]] {
            assert_eq!(a.decision(&t), -b.decision(&t));
        }
    }

    #[test]
    fn coefficients_within_box() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 10.0, ((i * 13) % 7) as f64 / 7.0]).collect();
        let y: Vec<f64> = (0..30).map(|i| if (i * 5) % 4 < 2 { 1.0 } else { -1.0 }).collect();
        let c = 0.7;
        let m = train_binary_svm(&x, &y, Kernel::Rbf { gamma: 2.0 }, c, &SmoConfig::default()).unwrap();
        assert!(m.coef.iter().all(|a| a.abs() <= c + 1e-12));
        assert!(m.coef.iter().sum::<f64>().abs() < 1e-6);
    }

    #[test]
    fn iteration_cap_reports_convergence_error() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64).sin()]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let cfg = SmoConfig { tol: 1e-12, max_iter: 1 };
        match train_binary_svm(&x, &y, Kernel::Rbf { gamma: 1.0 }, 10.0, &cfg) {
            Err(Error::Convergence { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn single_label_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(train_binary_svm(&x, &[1.0, 1.0], Kernel::Linear, 1.0, &SmoConfig::default()).is_err());
        assert!(train_binary_svm(&x, &[1.0, -1.0], Kernel::Linear, 0.0, &SmoConfig::default()).is_err());
    }
}
