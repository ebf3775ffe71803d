//! Hyper-parameter grid search scored by Cohen's kappa on a validation set.

use serde::{Deserialize, Serialize};

use super::kernel::{Gram, Kernel};
use super::multiclass::{train_multiclass_with_gram, MulticlassModel, Strategy, TrainParams};
use crate::error::{Error, Result};
use crate::harness::{cohen_kappa, ConfusionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub c: Vec<f64>,
    /// Ignored for the linear kernel.
    pub gamma: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            c: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            gamma: vec![
                2f64.powi(-7),
                2f64.powi(-5),
                2f64.powi(-3),
                2f64.powi(-1),
                2f64.powi(1),
                2f64.powi(3),
            ],
        }
    }
}

impl Grid {
    pub fn single(c: f64, gamma: f64) -> Self {
        Grid {
            c: vec![c],
            gamma: vec![gamma],
        }
    }

    fn sorted(values: &[f64]) -> Vec<f64> {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub c: f64,
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub c: f64,
    pub gamma: Option<f64>,
    pub kappa: f64,
    pub cells: Vec<CellResult>,
    pub model: MulticlassModel,
}

pub struct GridInput<'a> {
    pub z1_x: &'a [Vec<f64>],
    pub z1_y: &'a [usize],
    pub z2_x: &'a [Vec<f64>],
    pub z2_y: &'a [usize],
    pub m: usize,
}

/// Train on Z1 for every (C, gamma), keep the cell with the highest Z2
/// kappa. Ties go to the smaller C, then the smaller gamma. Failed cells are
/// recorded and skipped.
pub fn grid_search(
    data: &GridInput,
    strategy: Strategy,
    kernel: KernelKind,
    grid: &Grid,
    base: &TrainParams,
) -> Result<GridOutcome> {
    let cs = Grid::sorted(&grid.c);
    let gammas: Vec<Option<f64>> = match kernel {
        KernelKind::Linear => vec![None],
        KernelKind::Rbf => Grid::sorted(&grid.gamma).into_iter().map(Some).collect(),
    };
    if cs.is_empty() || gammas.is_empty() {
        return Err(Error::Validation("empty parameter grid".into()));
    }
    if data.z2_x.len() != data.z2_y.len() || data.z2_x.is_empty() {
        return Err(Error::Validation("grid search needs a non-empty validation set".into()));
    }

    let mut cells = Vec::new();
    let mut best: Option<(f64, f64, Option<f64>, MulticlassModel)> = None;
    for &gamma in &gammas {
        let k = match gamma {
            Some(g) => Kernel::Rbf { gamma: g },
            None => Kernel::Linear,
        };
        let gram = Gram::new(data.z1_x, k);
        for &c in &cs {
            let params = TrainParams { kernel: k, c, ..*base };
            let scored = train_multiclass_with_gram(data.z1_x, data.z1_y, data.m, strategy, &params, &gram)
                .and_then(|model| {
                    let pred: Vec<usize> = model
                        .classify_rows(data.z2_x)?
                        .into_iter()
                        .map(|a| a.class)
                        .collect();
                    let kappa = cohen_kappa(&ConfusionMatrix::from_labels(data.z2_y, &pred, data.m)?)?;
                    Ok((kappa, model))
                });
            match scored {
                Ok((kappa, model)) => {
                    cells.push(CellResult {
                        c,
                        gamma,
                        kappa: Some(kappa),
                        error: None,
                    });
                    let better = match &best {
                        None => true,
                        Some((bk, bc, bg, _)) => {
                            kappa > *bk || (kappa == *bk && (c, gamma.unwrap_or(0.0)) < (*bc, bg.unwrap_or(0.0)))
                        }
                    };
                    if better {
                        best = Some((kappa, c, gamma, model));
                    }
                }
                Err(e) => cells.push(CellResult {
                    c,
                    gamma,
                    kappa: None,
                    error: Some(e.to_string()),
                }),
            }
        }
    }
    match best {
        Some((kappa, c, gamma, model)) => Ok(GridOutcome {
            c,
            gamma,
            kappa,
            cells,
            model,
        }),
        None => Err(Error::Training(format!(
            "every grid cell failed; first error: {}",
            cells
                .first()
                .and_then(|c| c.error.clone())
                .unwrap_or_default()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data() -> (Vec<Vec<f64>>, Vec<usize>) {
        let x: Vec<Vec<f64>> = (0..12).map(|t| vec![t as f64]).collect();
        let y = (0..12).map(|t| if t < 6 { 1 } else { 2 }).collect();
        (x, y)
    }

    #[test]
    fn singleton_grid() {
        let (x, y) = line_data();
        let input = GridInput {
            z1_x: &x,
            z1_y: &y,
            z2_x: &x,
            z2_y: &y,
            m: 2,
        };
        let out = grid_search(
            &input,
            Strategy::Ovo,
            KernelKind::Rbf,
            &Grid::single(3.0, 0.25),
            &TrainParams::new(Kernel::Linear, 1.0),
        )
        .unwrap();
        assert_eq!((out.c, out.gamma), (3.0, Some(0.25)));
        assert_eq!(out.cells.len(), 1);
    }

    #[test]
    fn ties_go_to_smallest_cell() {
        let (x, y) = line_data();
        let input = GridInput {
            z1_x: &x,
            z1_y: &y,
            z2_x: &x,
            z2_y: &y,
            m: 2,
        };
        let grid = Grid {
            c: vec![100.0, 10.0],
            gamma: vec![0.5, 0.1],
        };
        let out = grid_search(&input, Strategy::Ovo, KernelKind::Rbf, &grid, &TrainParams::new(Kernel::Linear, 1.0))
            .unwrap();
        assert!(out.cells.iter().all(|c| c.kappa == Some(1.0)));
        assert_eq!((out.c, out.gamma), (10.0, Some(0.1)));
    }

    #[test]
    fn perfect_cell_wins() {
        // Z2 points sit where only a narrow kernel separates the classes.
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]];
        let y = vec![1, 2, 1, 2, 1, 2];
        let z2x = vec![vec![0.05], vec![1.05], vec![3.95], vec![4.95]];
        let z2y = vec![1, 2, 1, 2];
        let input = GridInput {
            z1_x: &x,
            z1_y: &y,
            z2_x: &z2x,
            z2_y: &z2y,
            m: 2,
        };
        let grid = Grid {
            c: vec![100.0],
            gamma: vec![0.001, 8.0],
        };
        let out = grid_search(&input, Strategy::Ovo, KernelKind::Rbf, &grid, &TrainParams::new(Kernel::Linear, 1.0))
            .unwrap();
        assert_eq!(out.kappa, 1.0);
        assert_eq!(out.gamma, Some(8.0));
        let low = out.cells.iter().find(|c| c.gamma == Some(0.001)).unwrap();
        assert!(low.kappa.unwrap() < 1.0);
    }

    #[test]
    fn failed_cells_recorded() {
        let (x, y) = line_data();
        let input = GridInput {
            z1_x: &x,
            z1_y: &y,
            z2_x: &x,
            z2_y: &y,
            m: 2,
        };
        let grid = Grid {
            c: vec![-1.0, 1.0],
            gamma: vec![0.1],
        };
        let out = grid_search(&input, Strategy::Ova, KernelKind::Linear, &grid, &TrainParams::new(Kernel::Linear, 1.0))
            .unwrap();
        assert_eq!(out.c, 1.0);
        assert!(out.cells[0].error.is_some());
    }
}
