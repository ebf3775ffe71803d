//! One-vs-all, one-vs-one and probabilistic (pairwise-coupled) SVMs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::coupling::pairwise_coupling;
use super::kernel::{Gram, Kernel};
use super::platt::{platt_calibrate, PlattParams};
use super::query::{Assignment, Preprocess, Query};
use super::smo::{train_with_gram, BinarySvmModel, SmoConfig};
use crate::error::{Error, Result, ResultExt};
use crate::seeds;

const FORMAT: &str = "hybrid-cascade/multiclass-svm";
const VERSION: u32 = 1;

/// Pairwise probabilities are kept away from 0 and 1 before coupling.
const R_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Ova,
    Ovo,
    Probabilistic,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Ova => "ova",
            Strategy::Ovo => "ovo",
            Strategy::Probabilistic => "probabilistic",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ova" => Ok(Strategy::Ova),
            "ovo" => Ok(Strategy::Ovo),
            "probabilistic" | "p-svm" | "psvm" => Ok(Strategy::Probabilistic),
            other => Err(format!("unknown strategy '{other}' (expected ova, ovo, probabilistic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub kernel: Kernel,
    pub c: f64,
    pub smo: SmoConfig,
    /// Seeds the Platt cross-validation folds.
    pub seed: u64,
    pub platt_folds: usize,
}

impl TrainParams {
    pub fn new(kernel: Kernel, c: f64) -> Self {
        TrainParams {
            kernel,
            c,
            smo: SmoConfig::default(),
            seed: 0,
            platt_folds: 3,
        }
    }
}

/// A binary machine separating `positive` from `negative` (or from every
/// other class when `negative` is `None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryUnit {
    pub positive: usize,
    pub negative: Option<usize>,
    pub svm: BinarySvmModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platt: Option<PlattParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassModel {
    pub format: String,
    pub version: u32,
    pub strategy: Strategy,
    pub m: usize,
    pub kernel: Kernel,
    pub c: f64,
    pub dim: usize,
    pub units: Vec<BinaryUnit>,
    #[serde(default)]
    pub preprocess: Preprocess,
}

fn class_members(labels: &[usize], m: usize) -> Result<Vec<Vec<usize>>> {
    let mut members = vec![Vec::new(); m];
    for (t, &l) in labels.iter().enumerate() {
        if l == 0 || l > m {
            return Err(Error::Training(format!("label {l} outside 1..={m}")));
        }
        members[l - 1].push(t);
    }
    if let Some(k) = members.iter().position(Vec::is_empty) {
        return Err(Error::Training(format!("class {} has no training samples", k + 1)));
    }
    Ok(members)
}

pub fn train_multiclass(
    x: &[Vec<f64>],
    labels: &[usize],
    m: usize,
    strategy: Strategy,
    params: &TrainParams,
) -> Result<MulticlassModel> {
    let gram = Gram::new(x, params.kernel);
    train_multiclass_with_gram(x, labels, m, strategy, params, &gram)
}

/// Train against a kernel matrix over all of `x`; used by the grid search
/// to share one matrix across every C.
pub(crate) fn train_multiclass_with_gram(
    x: &[Vec<f64>],
    labels: &[usize],
    m: usize,
    strategy: Strategy,
    params: &TrainParams,
    gram: &Gram,
) -> Result<MulticlassModel> {
    if m < 2 {
        return Err(Error::Training(format!("need at least 2 classes, got {m}")));
    }
    if x.len() != labels.len() || x.is_empty() {
        return Err(Error::Training(format!("{} rows but {} labels", x.len(), labels.len())));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape("training rows have differing lengths".into()));
    }
    let members = class_members(labels, m)?;
    let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
    let mut units = Vec::new();

    match strategy {
        Strategy::Ova => {
            for k in 1..=m {
                let y: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
                let (svm, _) = train_with_gram(&rows, &y, gram, params.kernel, params.c, &params.smo)
                    .context_with(|| format!("class {k} vs rest"))?;
                units.push(BinaryUnit {
                    positive: k,
                    negative: None,
                    svm,
                    platt: None,
                });
            }
        }
        Strategy::Ovo | Strategy::Probabilistic => {
            for i in 1..=m {
                for j in i + 1..=m {
                    let mut idx: Vec<usize> = members[i - 1].iter().chain(&members[j - 1]).copied().collect();
                    idx.sort_unstable();
                    let sub = gram.subset(&idx);
                    let pr: Vec<&[f64]> = idx.iter().map(|&t| rows[t]).collect();
                    let y: Vec<f64> = idx.iter().map(|&t| if labels[t] == i { 1.0 } else { -1.0 }).collect();
                    let (svm, _) = train_with_gram(&pr, &y, &sub, params.kernel, params.c, &params.smo)
                        .context_with(|| format!("class {i} vs {j}"))?;
                    let platt = if strategy == Strategy::Probabilistic {
                        Some(
                            calibrate_pair(&pr, &y, &sub, &svm, params)
                                .context_with(|| format!("calibrating class {i} vs {j}"))?,
                        )
                    } else {
                        None
                    };
                    units.push(BinaryUnit {
                        positive: i,
                        negative: Some(j),
                        svm,
                        platt,
                    });
                }
            }
        }
    }
    Ok(MulticlassModel {
        format: FORMAT.into(),
        version: VERSION,
        strategy,
        m,
        kernel: params.kernel,
        c: params.c,
        dim,
        units,
        preprocess: Preprocess::default(),
    })
}

/// Platt parameters from decision values of held-out folds. Falls back to
/// the full model's training decision values when a fold would lose a class.
fn calibrate_pair(
    rows: &[&[f64]],
    y: &[f64],
    gram: &Gram,
    full: &BinarySvmModel,
    params: &TrainParams,
) -> Result<PlattParams> {
    let n = y.len();
    let k = params.platt_folds.max(2).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeds::stream_rng(params.seed, seeds::Stream::PlattFolds));
    let mut fold = vec![0; n];
    for (rank, &t) in order.iter().enumerate() {
        fold[t] = rank % k;
    }

    let mut dec = vec![0.0; n];
    let mut cv_ok = true;
    for f in 0..k {
        let train: Vec<usize> = (0..n).filter(|&t| fold[t] != f).collect();
        let ty: Vec<f64> = train.iter().map(|&t| y[t]).collect();
        if !ty.contains(&1.0) || !ty.contains(&-1.0) {
            cv_ok = false;
            break;
        }
        let tr: Vec<&[f64]> = train.iter().map(|&t| rows[t]).collect();
        let (svm, _) = train_with_gram(&tr, &ty, &gram.subset(&train), params.kernel, params.c, &params.smo)?;
        for t in (0..n).filter(|&t| fold[t] == f) {
            dec[t] = svm.decision(rows[t]);
        }
    }
    if !cv_ok {
        for t in 0..n {
            dec[t] = full.decision(rows[t]);
        }
    }
    let positive: Vec<bool> = y.iter().map(|&v| v > 0.0).collect();
    platt_calibrate(&dec, &positive)
}

/// First index of the maximum; NaN never wins.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

impl MulticlassModel {
    pub fn n_models(&self) -> usize {
        self.units.len()
    }

    pub fn with_preprocess(mut self, p: Preprocess) -> Self {
        self.preprocess = p;
        self
    }

    /// Decision values of every unit for an already preprocessed row.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.dim,
                x.len()
            )));
        }
        Ok(self.units.iter().map(|u| u.svm.decision(x)).collect())
    }

    /// Classify a preprocessed row.
    pub fn assign_row(&self, id: &str, x: &[f64]) -> Result<Assignment> {
        let d = self.decision_values(x)?;
        let m = self.m;
        let (class, confidence, probs) = match self.strategy {
            Strategy::Ova => {
                let k = argmax(&d);
                let z: f64 = d.iter().map(|v| (v - d[k]).exp()).sum();
                (k + 1, 1.0 / z, None)
            }
            Strategy::Ovo => {
                let mut votes = vec![0usize; m];
                let mut score = vec![0.0; m];
                for (u, &v) in self.units.iter().zip(&d) {
                    let (i, j) = (u.positive - 1, u.negative.unwrap_or(0) - 1);
                    if v > 0.0 {
                        votes[i] += 1;
                    } else {
                        votes[j] += 1;
                    }
                    score[i] += v;
                    score[j] -= v;
                }
                let top = *votes.iter().max().unwrap_or(&0);
                let mut best: Option<usize> = None;
                for k in 0..m {
                    if votes[k] == top && best.is_none_or(|b| score[k] > score[b]) {
                        best = Some(k);
                    }
                }
                let k = best.unwrap_or(0);
                (k + 1, top as f64 / (m - 1) as f64, None)
            }
            Strategy::Probabilistic => {
                let mut r = vec![vec![0.5; m]; m];
                for (u, &v) in self.units.iter().zip(&d) {
                    let (i, j) = (u.positive - 1, u.negative.unwrap_or(0) - 1);
                    let platt = u
                        .platt
                        .ok_or_else(|| Error::Validation("probabilistic unit without Platt parameters".into()))?;
                    let p = platt.probability(v).clamp(R_CLAMP, 1.0 - R_CLAMP);
                    r[i][j] = p;
                    r[j][i] = 1.0 - p;
                }
                let p = pairwise_coupling(&r)?;
                let k = argmax(&p);
                (k + 1, p[k], Some(p))
            }
        };
        Ok(Assignment {
            id: id.to_string(),
            class,
            confidence: confidence.clamp(0.0, 1.0),
            probs,
        })
    }

    /// Apply the model's preprocessing to a raw vector.
    pub fn prepare(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.preprocess.apply(raw)
    }

    pub fn classify_query(&self, q: &Query) -> Result<Assignment> {
        let raw = q.raw()?;
        let x = self.prepare(&raw)?;
        self.assign_row(q.id, &x).context_with(|| format!("sample '{}'", q.id))
    }

    pub fn classify(&self, queries: &[Query]) -> Result<Vec<Assignment>> {
        queries.iter().map(|q| self.classify_query(q)).collect()
    }

    /// Classify preprocessed rows; ids are the row positions.
    pub fn classify_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Assignment>> {
        rows.iter()
            .enumerate()
            .map(|(t, r)| self.assign_row(&t.to_string(), r))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: MulticlassModel = serde_json::from_str(text)?;
        if model.format != FORMAT {
            return Err(Error::Validation(format!("not a model document: format '{}'", model.format)));
        }
        if model.version != VERSION {
            return Err(Error::Validation(format!("unsupported model version {}", model.version)));
        }
        let expected = match model.strategy {
            Strategy::Ova => model.m,
            _ => model.m * (model.m - 1) / 2,
        };
        if model.units.len() != expected {
            return Err(Error::Validation(format!(
                "{} strategy with m = {} needs {expected} binary models, found {}",
                model.strategy,
                model.m,
                model.units.len()
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).context_with(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).context_with(|| format!("reading {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(per: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = seeds::rng(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let centers = [[0.0, 0.0], [sep, 0.0], [0.0, sep]];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (k, c) in centers.iter().enumerate() {
            for _ in 0..per {
                x.push(vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]);
                y.push(k + 1);
            }
        }
        (x, y)
    }

    fn params() -> TrainParams {
        TrainParams::new(Kernel::Rbf { gamma: 0.1 }, 10.0)
    }

    #[test]
    fn model_counts() {
        let x = vec![vec![0.0], vec![0.2], vec![3.0], vec![3.3]];
        let y = vec![1, 1, 2, 2];
        assert_eq!(train_multiclass(&x, &y, 2, Strategy::Ova, &params()).unwrap().n_models(), 2);
        assert_eq!(train_multiclass(&x, &y, 2, Strategy::Ovo, &params()).unwrap().n_models(), 1);
        let p = train_multiclass(&x, &y, 2, Strategy::Probabilistic, &params()).unwrap();
        assert_eq!(p.n_models(), 1);
        assert!(p.units[0].platt.is_some());
    }

    #[test]
    fn separated_blobs_all_strategies() {
        let (x, y) = blobs(30, 10.0, 4);
        for s in [Strategy::Ova, Strategy::Ovo, Strategy::Probabilistic] {
            let model = train_multiclass(&x, &y, 3, s, &params()).unwrap();
            let out = model.classify_rows(&x).unwrap();
            let correct = out.iter().zip(&y).filter(|(a, &l)| a.class == l).count();
            assert!(correct as f64 / y.len() as f64 >= 0.99, "{s}");
            for a in &out {
                assert!((0.0..=1.0).contains(&a.confidence));
                if let Some(p) = &a.probs {
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    assert_eq!(a.confidence, p[a.class - 1]);
                }
            }
        }
    }

    #[test]
    fn absent_class_named() {
        let x = vec![vec![0.0], vec![1.0]];
        let err = train_multiclass(&x, &[1, 3], 3, Strategy::Ovo, &params()).unwrap_err();
        assert!(err.to_string().contains("class 2"), "{err}");
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let (x, y) = blobs(5, 10.0, 1);
        let model = train_multiclass(&x, &y, 3, Strategy::Ovo, &params()).unwrap();
        assert!(matches!(model.assign_row("a", &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn ovo_three_way_tie_uses_decision_sums() {
        // Hand-built units: 1 beats 2, 2 beats 3, 3 beats 1, with margins
        // that favour class 3 overall.
        let unit = |p, n, bias| BinaryUnit {
            positive: p,
            negative: Some(n),
            svm: BinarySvmModel {
                kernel: Kernel::Linear,
                c: 1.0,
                support_vectors: vec![vec![0.0]],
                coef: vec![0.0],
                bias,
            },
            platt: None,
        };
        let model = MulticlassModel {
            format: FORMAT.into(),
            version: VERSION,
            strategy: Strategy::Ovo,
            m: 3,
            kernel: Kernel::Linear,
            c: 1.0,
            dim: 1,
            units: vec![unit(1, 2, 0.1), unit(1, 3, -2.0), unit(2, 3, 0.5)],
            preprocess: Preprocess::default(),
        };
        // scores: 1 -> 0.1 - 2.0 = -1.9, 2 -> -0.1 + 0.5 = 0.4, 3 -> 2.0 - 0.5 = 1.5
        let a = model.assign_row("t", &[0.0]).unwrap();
        assert_eq!(a.class, 3);
        assert!((a.confidence - 0.5).abs() < 1e-15);
        assert_eq!(model.assign_row("t", &[0.0]).unwrap(), a);
    }

    #[test]
    fn relabeling_permutes_predictions() {
        let (x, y) = blobs(12, 4.0, 9);
        let perm = [3usize, 1, 2]; // old class k -> perm[k-1]
        let y2: Vec<usize> = y.iter().map(|&l| perm[l - 1]).collect();
        let mut rng = seeds::rng(2);
        let probe: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.random_range(-3.0..7.0), rng.random_range(-3.0..7.0)])
            .collect();
        for s in [Strategy::Ova, Strategy::Ovo, Strategy::Probabilistic] {
            let a = train_multiclass(&x, &y, 3, s, &params()).unwrap().classify_rows(&probe).unwrap();
            let b = train_multiclass(&x, &y2, 3, s, &params()).unwrap().classify_rows(&probe).unwrap();
            for (pa, pb) in a.iter().zip(&b) {
                assert_eq!(perm[pa.class - 1], pb.class, "{s}");
                assert!((pa.confidence - pb.confidence).abs() < 1e-9, "{s}");
            }
        }
    }

    #[test]
    fn json_round_trip_is_bit_identical() {
        let (x, y) = blobs(10, 3.0, 5);
        let model = train_multiclass(&x, &y, 3, Strategy::Probabilistic, &params())
            .unwrap()
            .with_preprocess(Preprocess::fit(&x, None, None).unwrap());
        let back = MulticlassModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        let qs: Vec<Query> = x.iter().map(|r| Query::tabular("q", r)).collect();
        assert_eq!(model.classify(&qs).unwrap(), back.classify(&qs).unwrap());
    }
}
