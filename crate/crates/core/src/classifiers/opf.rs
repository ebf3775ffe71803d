//! Supervised optimum-path forest with the f_max path cost.
//!
//! Prototypes are the endpoints of minimum-spanning-tree edges joining
//! different classes. Every training sample is conquered by the prototype
//! offering the path whose largest edge is smallest.

use serde::{Deserialize, Serialize};

use super::query::Assignment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfModel {
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Optimum path cost of every training sample.
    pub cost: Vec<f64>,
    pub prototypes: Vec<usize>,
    /// Training indices sorted by increasing cost.
    pub order: Vec<usize>,
    /// Divides the winning cost when computing a confidence.
    pub scale: f64,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Prim's algorithm on the complete graph; returns (parent, child) edges.
fn mst_edges(x: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = x.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    best[0] = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || best[v] < best[u]) {
                u = v;
            }
        }
        in_tree[u] = true;
        if parent[u] != usize::MAX {
            edges.push((parent[u], u));
        }
        for v in 0..n {
            if !in_tree[v] {
                let d = euclidean(&x[u], &x[v]);
                if d < best[v] {
                    best[v] = d;
                    parent[v] = u;
                }
            }
        }
    }
    edges
}

pub fn train_opf(x: &[Vec<f64>], labels: &[usize]) -> Result<OpfModel> {
    if x.is_empty() || x.len() != labels.len() {
        return Err(Error::Training(format!("{} rows but {} labels", x.len(), labels.len())));
    }
    let first = labels[0];
    if labels.iter().all(|&l| l == first) {
        return Err(Error::Training("OPF needs at least two classes in the training set".into()));
    }
    let n = x.len();
    let mut is_proto = vec![false; n];
    for (a, b) in mst_edges(x) {
        if labels[a] != labels[b] {
            is_proto[a] = true;
            is_proto[b] = true;
        }
    }
    let prototypes: Vec<usize> = (0..n).filter(|&t| is_proto[t]).collect();

    // Image foresting transform with f_max, dense O(n^2).
    let mut cost = vec![f64::INFINITY; n];
    let mut label = labels.to_vec();
    let mut done = vec![false; n];
    for &p in &prototypes {
        cost[p] = 0.0;
    }
    for _ in 0..n {
        let mut s = usize::MAX;
        for v in 0..n {
            if !done[v] && (s == usize::MAX || cost[v] < cost[s]) {
                s = v;
            }
        }
        done[s] = true;
        for t in 0..n {
            if done[t] {
                continue;
            }
            let c = cost[s].max(euclidean(&x[s], &x[t]));
            if c < cost[t] {
                cost[t] = c;
                label[t] = label[s];
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(a.cmp(&b)));
    let scale = cost.iter().cloned().fold(0.0, f64::max);
    Ok(OpfModel {
        samples: x.to_vec(),
        labels: label,
        cost,
        prototypes,
        order,
        scale,
    })
}

impl OpfModel {
    /// Winning (label, cost, training index) for one sample.
    pub fn conquer(&self, x: &[f64]) -> Result<(usize, f64, usize)> {
        let dim = self.samples[0].len();
        if x.len() != dim {
            return Err(Error::Shape(format!("OPF expects {dim} features, got {}", x.len())));
        }
        let mut best = (f64::INFINITY, usize::MAX);
        for &s in &self.order {
            // Later samples cannot do better once their own cost is no lower.
            if self.cost[s] >= best.0 {
                break;
            }
            let c = self.cost[s].max(euclidean(&self.samples[s], x));
            if c < best.0 {
                best = (c, s);
            }
        }
        Ok((self.labels[best.1], best.0, best.1))
    }

    /// Set the confidence scale to the largest winning cost over `rows`.
    pub fn fit_confidence_scale(&mut self, rows: &[Vec<f64>]) -> Result<()> {
        let mut max = 0.0f64;
        for r in rows {
            max = max.max(self.conquer(r)?.1);
        }
        self.scale = max;
        Ok(())
    }

    pub fn confidence(&self, cost: f64) -> f64 {
        if self.scale > 0.0 {
            (1.0 - cost / self.scale).clamp(0.0, 1.0)
        } else if cost == 0.0 {
            1.0
        } else {
            0.0
        }
    }

    pub fn classify_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Assignment>> {
        rows.iter()
            .enumerate()
            .map(|(t, r)| {
                let (class, cost, _) = self.conquer(r)?;
                Ok(Assignment {
                    id: t.to_string(),
                    class,
                    confidence: self.confidence(cost),
                    probs: None,
                })
            })
            .collect()
    }
}
