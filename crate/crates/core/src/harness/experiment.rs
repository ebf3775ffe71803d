//! The repeated split / train / calibrate / evaluate protocol.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Technique};
use super::metrics::{cohen_kappa, per_class_accuracy, ConfusionMatrix, MeanStd};
use super::timing::{time_per_sample, SampleTiming};
use crate::classifiers::{
    grid_search, train_opf, Assignment, ExternalStrong, GridInput, MulticlassModel, Preprocess, Query,
    ReferenceStrong, ReferenceStrongConfig, Strategy, StrongClassifier, TrainParams,
};
use crate::datasets::{balance_training, stratified_split, Dataset, Split};
use crate::error::{Error, Result, ResultExt};
use crate::features::{msps_optimize, raw_features, MspsConfig, NearestNeighbor};
use crate::hybrid::{estimate_error_histograms, route_with, RoutingOutcome, SelectionMode};
use crate::seeds::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseAnalysis {
    pub routed: usize,
    /// Among routed samples DS1 had right, percentage DS2 got wrong.
    pub case1_pct: Option<f64>,
    /// Among routed samples DS1 had wrong, percentage DS2 got right.
    pub case2_pct: Option<f64>,
}

pub fn case_analysis(outcomes: &[RoutingOutcome], labels: &[usize]) -> Result<CaseAnalysis> {
    if outcomes.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} outcomes but {} labels",
            outcomes.len(),
            labels.len()
        )));
    }
    let (mut right, mut right_broken, mut wrong, mut wrong_fixed) = (0usize, 0usize, 0usize, 0usize);
    for (o, &y) in outcomes.iter().zip(labels) {
        if !o.routed {
            continue;
        }
        if o.ds1.class == y {
            right += 1;
            right_broken += usize::from(o.final_class != y);
        } else {
            wrong += 1;
            wrong_fixed += usize::from(o.final_class == y);
        }
    }
    let pct = |a: usize, b: usize| (b > 0).then(|| 100.0 * a as f64 / b as f64);
    Ok(CaseAnalysis {
        routed: right + wrong,
        case1_pct: pct(right_broken, right),
        case2_pct: pct(wrong_fixed, wrong),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueResult {
    pub technique: Technique,
    pub kappa: f64,
    pub accuracy: f64,
    pub per_class: Vec<Option<f64>>,
    pub time: SampleTiming,
    #[serde(default)]
    pub routed: Option<usize>,
    #[serde(default)]
    pub cases: Option<CaseAnalysis>,
    /// Final labels on Z3, in Z3 order.
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenParams {
    pub c: f64,
    pub gamma: Option<f64>,
    pub validation_kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub seed: u64,
    pub bins: usize,
    pub budget: usize,
    pub split_fingerprint: u64,
    pub sizes: [usize; 3],
    pub ds1: ChosenParams,
    pub ds2_delay_ms: f64,
    /// DS1 errors on Z2 and the error total held by the histogram.
    pub z2_errors: usize,
    pub histogram_errors: usize,
    pub techniques: Vec<TechniqueResult>,
}

impl RepetitionResult {
    pub fn get(&self, t: Technique) -> Option<&TechniqueResult> {
        self.techniques.iter().find(|r| r.technique == t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueSummary {
    pub technique: Technique,
    pub kappa: MeanStd,
    pub accuracy: MeanStd,
    pub per_class: Vec<Option<MeanStd>>,
    /// Over repetition means.
    pub time_ms: MeanStd,
    /// Mean within-repetition per-sample standard deviation.
    pub sample_std_ms: f64,
    pub case1_pct: Option<MeanStd>,
    pub case2_pct: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub class_names: Vec<String>,
    pub bins: usize,
    pub repetitions: usize,
    pub summaries: Vec<TechniqueSummary>,
    pub raw: Vec<RepetitionResult>,
}

impl ExperimentReport {
    pub fn summary(&self, t: Technique) -> Option<&TechniqueSummary> {
        self.summaries.iter().find(|s| s.technique == t)
    }

    /// Rebuild the summaries from raw per-repetition results.
    pub fn aggregate(
        name: String,
        config: ExperimentConfig,
        class_names: Vec<String>,
        bins: usize,
        raw: Vec<RepetitionResult>,
    ) -> Self {
        let mut techniques: Vec<Technique> = raw
            .iter()
            .flat_map(|r| r.techniques.iter().map(|t| t.technique))
            .collect();
        techniques.sort();
        techniques.dedup();
        let m = class_names.len();
        let summaries = techniques
            .into_iter()
            .map(|t| {
                let rows: Vec<&TechniqueResult> = raw.iter().filter_map(|r| r.get(t)).collect();
                let col = |f: &dyn Fn(&TechniqueResult) -> Option<f64>| -> Vec<f64> { rows.iter().filter_map(|r| f(r)).collect() };
                let per_class = (0..m)
                    .map(|k| MeanStd::of(&col(&|r| r.per_class.get(k).copied().flatten())))
                    .collect();
                let stds = col(&|r| Some(r.time.std_ms));
                TechniqueSummary {
                    technique: t,
                    kappa: MeanStd::of(&col(&|r| Some(r.kappa))).expect("at least one repetition"),
                    accuracy: MeanStd::of(&col(&|r| Some(r.accuracy))).expect("at least one repetition"),
                    per_class,
                    time_ms: MeanStd::of(&col(&|r| Some(r.time.mean_ms))).expect("at least one repetition"),
                    sample_std_ms: stds.iter().sum::<f64>() / stds.len() as f64,
                    case1_pct: MeanStd::of(&col(&|r| r.cases.as_ref().and_then(|c| c.case1_pct))),
                    case2_pct: MeanStd::of(&col(&|r| r.cases.as_ref().and_then(|c| c.case2_pct))),
                }
            })
            .collect();
        ExperimentReport {
            name,
            repetitions: raw.len(),
            config,
            class_names,
            bins,
            summaries,
            raw,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Shared, repetition-independent state of an experiment.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub dataset: Dataset,
    raw: Vec<Vec<f64>>,
}

fn evaluate(technique: Technique, truth: &[usize], pred: Vec<usize>, m: usize, time: SampleTiming) -> Result<TechniqueResult> {
    let cm = ConfusionMatrix::from_labels(truth, &pred, m)?;
    Ok(TechniqueResult {
        technique,
        kappa: cohen_kappa(&cm)?,
        accuracy: cm.accuracy().unwrap_or(0.0),
        per_class: per_class_accuracy(&cm),
        time,
        routed: None,
        cases: None,
        predictions: pred,
    })
}

fn classes(a: &[Assignment]) -> Vec<usize> {
    a.iter().map(|a| a.class).collect()
}

impl Experiment {
    /// Load the dataset and extract raw features once. `base` resolves
    /// relative dataset paths.
    pub fn prepare(config: ExperimentConfig, base: &Path) -> Result<Self> {
        config.validate()?;
        let dataset = config.dataset.load(base)?;
        let raw = dataset
            .samples
            .iter()
            .map(|s| raw_features(s).map(|f| f.values))
            .collect::<Result<_>>()?;
        Ok(Experiment { config, dataset, raw })
    }

    pub fn split(&self, repetition: usize) -> Result<Split> {
        let seed = self.config.base_seed + repetition as u64;
        let mut split = stratified_split(&self.dataset, self.config.fractions, seeds::derive(seed, Stream::Split))?;
        if self.config.balance_training {
            split = balance_training(&split, &self.dataset, seeds::derive(seed, Stream::Balance))?;
        }
        split.repetition_index = repetition;
        Ok(split)
    }

    fn rows(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.raw[i].clone()).collect()
    }

    fn labels(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.dataset.samples[i].label).collect()
    }

    fn ds1_columns(&self) -> Option<std::ops::Range<usize>> {
        self.config
            .ds1
            .columns
            .clone()
            .or_else(|| self.dataset.views.as_ref().map(|v| v.degraded.clone()))
    }

    fn ds2_columns(&self) -> Option<std::ops::Range<usize>> {
        self.config
            .ds2
            .columns
            .clone()
            .or_else(|| self.dataset.views.as_ref().map(|v| v.clean.clone()))
    }

    /// DS1 preprocessing fitted on Z1 (with MSPS weights when enabled).
    fn ds1_preprocess(&self, z1: &[usize], seed: u64) -> Result<Preprocess> {
        let raw = self.rows(z1);
        let weights = if self.config.ds1.msps {
            let base = Preprocess::fit(&raw, self.ds1_columns(), None)?;
            let x = base.apply_all(&raw)?;
            let cfg = MspsConfig {
                max_iters: self.config.ds1.msps_iters,
                seed: seeds::derive(seed, Stream::MspsFolds),
                ..MspsConfig::default()
            };
            Some(msps_optimize(&x, &self.labels(z1), &NearestNeighbor, &cfg)?.weights)
        } else {
            None
        };
        Preprocess::fit(&raw, self.ds1_columns(), weights)
    }

    fn train_svm(
        &self,
        split: &Split,
        pre: &Preprocess,
        strategy: Strategy,
        seed: u64,
    ) -> Result<(MulticlassModel, ChosenParams)> {
        let x1 = pre.apply_all(&self.rows(&split.z1))?;
        let x2 = pre.apply_all(&self.rows(&split.z2))?;
        let y1 = self.labels(&split.z1);
        let y2 = self.labels(&split.z2);
        let base = TrainParams {
            seed: seeds::derive(seed, Stream::PlattFolds),
            ..TrainParams::new(crate::classifiers::Kernel::Linear, 1.0)
        };
        let found = grid_search(
            &GridInput {
                z1_x: &x1,
                z1_y: &y1,
                z2_x: &x2,
                z2_y: &y2,
                m: self.dataset.m,
            },
            strategy,
            self.config.ds1.kernel,
            &self.config.ds1.grid,
            &base,
        )?;
        let chosen = ChosenParams {
            c: found.c,
            gamma: found.gamma,
            validation_kappa: found.kappa,
        };
        Ok((found.model.with_preprocess(pre.clone()), chosen))
    }

    /// One repetition evaluated for every bin count in `bins` on the same
    /// split and the same trained DS1/DS2. Returns one result per bin count.
    pub fn run_repetition(&self, repetition: usize, bins: &[usize]) -> Result<Vec<RepetitionResult>> {
        self.run_repetition_inner(repetition, bins)
            .context_with(|| format!("repetition {repetition}"))
    }

    fn run_repetition_inner(&self, repetition: usize, bins: &[usize]) -> Result<Vec<RepetitionResult>> {
        let cfg = &self.config;
        let seed = cfg.base_seed + repetition as u64;
        let m = self.dataset.m;
        let split = self.split(repetition)?;
        let techniques = &cfg.techniques;
        let wants = |t: Technique| techniques.contains(&t);

        let pre = self.ds1_preprocess(&split.z1, seed)?;
        let (ds1, chosen) = self.train_svm(&split, &pre, cfg.ds1.strategy, seed)?;

        let z2_rows = pre.apply_all(&self.rows(&split.z2))?;
        let z2_labels = self.labels(&split.z2);
        let z2_assign = ds1.classify_rows(&z2_rows)?;
        let z2_errors = z2_assign.iter().zip(&z2_labels).filter(|(a, &y)| a.class != y).count();

        let z3_samples: Vec<&crate::datasets::Sample> = split.z3.iter().map(|&i| &self.dataset.samples[i]).collect();
        let queries: Vec<Query> = z3_samples.iter().map(|s| Query::from_sample(s)).collect();
        let truth = self.labels(&split.z3);
        let budget = (cfg.budget_fraction * queries.len() as f64).round() as usize;

        let (ds1_assign, ds1_time) = time_per_sample(&queries, |q| ds1.classify_query(q))?;
        let mut shared = Vec::new();
        if wants(Technique::Ds1) {
            shared.push(evaluate(Technique::Ds1, &truth, classes(&ds1_assign), m, ds1_time)?);
        }

        let needs_ds2 = wants(Technique::Ds2) || wants(Technique::Hybrid) || wants(Technique::HybridRs);
        let mut delay_ms = 0.0;
        let mut ds2 = None;
        if needs_ds2 {
            let z1_samples: Vec<&crate::datasets::Sample> = split.z1.iter().map(|&i| &self.dataset.samples[i]).collect();
            let delay = match (cfg.ds2.delay_ms, cfg.ds2.delay_ratio) {
                (Some(ms), _) => Duration::from_secs_f64(ms / 1e3),
                (None, Some(ratio)) => Duration::from_secs_f64(ratio * ds1_time.mean_ms / 1e3),
                (None, None) => Duration::ZERO,
            };
            let strong: Box<dyn StrongClassifier> = match &cfg.ds2.command {
                Some(cmd) if !cmd.is_empty() => {
                    let mut ext = ExternalStrong::spawn(&cmd[0], &cmd[1..])?;
                    ext.train(&z1_samples, m)?;
                    Box::new(ext)
                }
                Some(_) => return Err(Error::Validation("ds2.command is empty".into())),
                None => {
                    let mut reference = ReferenceStrong::new(ReferenceStrongConfig {
                        columns: self.ds2_columns(),
                        kernel: cfg.ds2.kernel,
                        grid: cfg.ds2.grid.clone(),
                        delay: Duration::ZERO,
                        seed,
                    });
                    reference.train(&z1_samples, m)?;
                    // DS1's cost is known only now.
                    reference.set_delay(delay);
                    delay_ms = delay.as_secs_f64() * 1e3;
                    Box::new(reference)
                }
            };
            ds2 = Some(strong);
        }
        if wants(Technique::Ds2) {
            let strong = ds2.as_deref().expect("trained above");
            let (a, t) = time_per_sample(&queries, |q| {
                strong
                    .classify(std::slice::from_ref(q))?
                    .pop()
                    .ok_or_else(|| Error::Adapter("no assignment".into()))
            })?;
            shared.push(evaluate(Technique::Ds2, &truth, classes(&a), m, t)?);
        }
        if wants(Technique::HybridRs) {
            let strong = ds2.as_deref().expect("trained above");
            let run = route_with(
                &queries,
                &ds1,
                strong,
                None,
                SelectionMode::Random,
                budget,
                seeds::derive(seed, Stream::RandomBaseline),
            )?;
            shared.push(self.hybrid_result(Technique::HybridRs, &truth, &run.outcomes)?);
        }
        for (t, strategy) in [(Technique::Ova, Strategy::Ova), (Technique::Ovo, Strategy::Ovo)] {
            if wants(t) {
                let (model, _) = self.train_svm(&split, &pre, strategy, seed)?;
                let (a, time) = time_per_sample(&queries, |q| model.classify_query(q))?;
                shared.push(evaluate(t, &truth, classes(&a), m, time)?);
            }
        }
        if wants(Technique::Opf) {
            let x1 = pre.apply_all(&self.rows(&split.z1))?;
            let mut opf = train_opf(&x1, &self.labels(&split.z1))?;
            opf.fit_confidence_scale(&z2_rows)?;
            let (pred, time) = time_per_sample(&queries, |q| {
                let x = pre.apply(&q.raw()?)?;
                Ok(opf.conquer(&x)?.0)
            })?;
            shared.push(evaluate(Technique::Opf, &truth, pred, m, time)?);
        }

        let mut out = Vec::with_capacity(bins.len());
        for &n in bins {
            let hist = estimate_error_histograms(&z2_assign, &z2_labels, m, n, cfg.smoothing)?;
            let mut results = shared.clone();
            if wants(Technique::Hybrid) {
                let strong = ds2.as_deref().expect("trained above");
                let run = route_with(
                    &queries,
                    &ds1,
                    strong,
                    Some(&hist),
                    SelectionMode::ErrorGuided,
                    budget,
                    seeds::derive(seed, Stream::Selection),
                )?;
                results.push(self.hybrid_result(Technique::Hybrid, &truth, &run.outcomes)?);
            }
            results.sort_by_key(|r| r.technique);
            out.push(RepetitionResult {
                repetition,
                seed,
                bins: n,
                budget,
                split_fingerprint: split.fingerprint(),
                sizes: [split.z1.len(), split.z2.len(), split.z3.len()],
                ds1: chosen.clone(),
                ds2_delay_ms: delay_ms,
                z2_errors,
                histogram_errors: hist.total_errors(),
                techniques: results,
            });
        }
        Ok(out)
    }

    fn hybrid_result(&self, t: Technique, truth: &[usize], outcomes: &[RoutingOutcome]) -> Result<TechniqueResult> {
        let times: Vec<Duration> = outcomes.iter().map(|o| o.elapsed).collect();
        let time = SampleTiming::of(&times).ok_or(Error::EmptyDataset)?;
        let pred = outcomes.iter().map(|o| o.final_class).collect();
        let mut r = evaluate(t, truth, pred, self.dataset.m, time)?;
        r.routed = Some(outcomes.iter().filter(|o| o.routed).count());
        r.cases = Some(case_analysis(outcomes, truth)?);
        Ok(r)
    }

    fn report(&self, bins: usize, raw: Vec<RepetitionResult>) -> ExperimentReport {
        ExperimentReport::aggregate(
            self.config.name.clone().unwrap_or_else(|| self.dataset.name.clone()),
            self.config.clone(),
            self.dataset.class_names.clone(),
            bins,
            raw,
        )
    }

    pub fn run(&self) -> Result<ExperimentReport> {
        let mut raw = Vec::with_capacity(self.config.repetitions);
        for r in 0..self.config.repetitions {
            raw.extend(self.run_repetition(r, &[self.config.bins])?);
        }
        Ok(self.report(self.config.bins, raw))
    }

    pub fn sweep(&self, bins: &[usize]) -> Result<SweepReport> {
        if bins.is_empty() {
            return Err(Error::Validation("no bin counts to sweep".into()));
        }
        let mut per_bin: Vec<Vec<RepetitionResult>> = vec![Vec::new(); bins.len()];
        for r in 0..self.config.repetitions {
            for (k, res) in self.run_repetition(r, bins)?.into_iter().enumerate() {
                per_bin[k].push(res);
            }
        }
        let reports: Vec<ExperimentReport> = bins
            .iter()
            .zip(per_bin)
            .map(|(&n, raw)| self.report(n, raw))
            .collect();
        let rows: Vec<SweepRow> = reports
            .iter()
            .map(|r| SweepRow {
                n: r.bins,
                hybrid_kappa: r.summary(Technique::Hybrid).map(|s| s.kappa),
                fingerprints: r.raw.iter().map(|x| x.split_fingerprint).collect(),
            })
            .collect();
        let best = rows
            .iter()
            .filter_map(|r| r.hybrid_kappa.map(|k| (r.n, k.mean)))
            .fold(None, |acc: Option<(usize, f64)>, (n, k)| match acc {
                Some((_, bk)) if bk >= k => acc,
                _ => Some((n, k)),
            })
            .map(|(n, _)| n);
        Ok(SweepReport {
            bins: bins.to_vec(),
            rows,
            best_n: best,
            reports,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub hybrid_kappa: Option<MeanStd>,
    /// Split fingerprint per repetition.
    pub fingerprints: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub bins: Vec<usize>,
    pub rows: Vec<SweepRow>,
    pub best_n: Option<usize>,
    pub reports: Vec<ExperimentReport>,
}

pub fn run_experiment(config: &ExperimentConfig, base: &Path) -> Result<ExperimentReport> {
    Experiment::prepare(config.clone(), base)?.run()
}

pub fn sweep_bins(config: &ExperimentConfig, base: &Path, bins: &[usize]) -> Result<SweepReport> {
    Experiment::prepare(config.clone(), base)?.sweep(bins)
}
