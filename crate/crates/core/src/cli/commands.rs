use std::io::{self, BufWriter};
use std::path::Path;
use std::time::Duration;

use serde::Serialize;

use hybrid_cascade::classifiers::{
    grid_search, serve, Assignment, ExternalStrong, Grid, GridInput, Kernel, ModelStrong, MulticlassModel,
    Preprocess, Query, StrongClassifier, TrainParams,
};
use hybrid_cascade::datasets::{
    balance_training, generate_synthetic, load_dataset, stratified_split, write_tabular, Dataset, Fractions,
    Sample, Split, SplitDocument, SyntheticSpec,
};
use hybrid_cascade::features::raw_features;
use hybrid_cascade::harness::{
    cohen_kappa, render_report, render_sweep, ConfusionMatrix, ExperimentConfig, ExperimentReport, Experiment,
    Technique,
};
use hybrid_cascade::hybrid::{estimate_error_histograms, route_with, ErrorHistogram, RoutingOutcome, SelectionMode};
use hybrid_cascade::seeds::{self, Stream};
use hybrid_cascade::{Error, Result};

use super::args::*;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Dataset(DatasetCommand::Gen(a)) => dataset_gen(a),
        Command::Dataset(DatasetCommand::Inspect(a)) => dataset_inspect(a),
        Command::Dataset(DatasetCommand::Split(a)) => dataset_split(a),
        Command::Features(FeaturesCommand::Extract(a)) => features_extract(a),
        Command::Train(a) => train(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Route(a) => route(a),
        Command::Evaluate(a) => evaluate(a),
        Command::SweepBins(a) => sweep(a),
        Command::Compare(a) => compare(a),
        Command::Serve(a) => serve_model(a),
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn load(input: &InputArgs) -> Result<Dataset> {
    load_dataset(&input.data, input.format.into())
}

fn load_split(data: &SplitInput) -> Result<(Dataset, Split)> {
    let ds = load(&data.input)?;
    let split = SplitDocument::load(&data.split)?.resolve(&ds)?;
    Ok((ds, split))
}

fn part<'a>(ds: &'a Dataset, idx: &[usize]) -> Vec<&'a Sample> {
    idx.iter().map(|&i| &ds.samples[i]).collect()
}

fn raw_rows(samples: &[&Sample]) -> Result<Vec<Vec<f64>>> {
    samples.iter().map(|s| raw_features(s).map(|f| f.values)).collect()
}

fn labels(samples: &[&Sample]) -> Vec<usize> {
    samples.iter().map(|s| s.label).collect()
}

fn kappa(truth: &[usize], pred: &[usize], m: usize) -> Result<f64> {
    cohen_kappa(&ConfusionMatrix::from_labels(truth, pred, m)?)
}

fn dataset_gen(a: GenArgs) -> Result<()> {
    let mut spec = SyntheticSpec::by_name(&a.preset, a.scale)
        .ok_or_else(|| Error::Validation(format!("unknown preset '{}'", a.preset)))?;
    if let Some(v) = a.ds1_noise {
        spec.ds1_noise = v;
    }
    if let Some(v) = a.separation {
        spec.separation = v;
    }
    let ds = generate_synthetic(&spec, a.seed)?;
    write_tabular(&ds, &a.out)?;
    println!("{} samples, {} classes -> {}", ds.len(), ds.m, a.out.display());
    if let Some(v) = &ds.views {
        println!("clean columns {}..{}, degraded columns {}..{}", v.clean.start, v.clean.end, v.degraded.start, v.degraded.end);
    }
    Ok(())
}

fn dataset_inspect(a: InputArgs) -> Result<()> {
    let ds = load(&a)?;
    println!("name: {}", ds.name);
    println!("samples: {}", ds.len());
    println!("classes: {}", ds.m);
    match ds.feature_dim() {
        Some(d) => println!("features: {d}"),
        None => println!("features: image descriptors"),
    }
    let width = ds.class_names.iter().map(|n| n.len()).max().unwrap_or(0);
    for (name, count) in ds.class_names.iter().zip(ds.class_counts()) {
        println!("  {name:<width$}  {count}");
    }
    Ok(())
}

fn dataset_split(a: SplitArgs) -> Result<()> {
    let ds = load(&a.input)?;
    let f = Fractions(a.fractions[0], a.fractions[1], a.fractions[2]);
    let mut split = stratified_split(&ds, f, seeds::derive(a.seed, Stream::Split))?;
    if a.balance {
        split = balance_training(&split, &ds, seeds::derive(a.seed, Stream::Balance))?;
    }
    split.to_document(&ds, f).save(&a.out)?;
    println!(
        "Z1 {}, Z2 {}, Z3 {} -> {}",
        split.z1.len(),
        split.z2.len(),
        split.z3.len(),
        a.out.display()
    );
    Ok(())
}

fn features_extract(a: ExtractArgs) -> Result<()> {
    let ds = load_dataset(&a.manifest, hybrid_cascade::datasets::DatasetFormat::ImageManifest)?;
    let samples = ds
        .samples
        .iter()
        .map(|s| Ok(Sample::tabular(s.id.clone(), raw_features(s)?.values, s.label)))
        .collect::<Result<Vec<_>>>()?;
    let out = Dataset::with_classes(ds.name.clone(), samples, ds.class_names.clone())?;
    write_tabular(&out, &a.out)?;
    println!("{} descriptors -> {}", out.len(), a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let (ds, split) = load_split(&a.data)?;
    let z1 = part(&ds, &split.z1);
    let z2 = part(&ds, &split.z2);
    let pre = Preprocess::fit(&raw_rows(&z1)?, a.columns.clone(), None)?;
    let x1 = pre.apply_all(&raw_rows(&z1)?)?;
    let x2 = pre.apply_all(&raw_rows(&z2)?)?;
    let (y1, y2) = (labels(&z1), labels(&z2));
    let defaults = Grid::default();
    let grid = Grid {
        c: a.c.unwrap_or(defaults.c),
        gamma: a.gamma.unwrap_or(defaults.gamma),
    };
    let base = TrainParams {
        seed: seeds::derive(a.seed, Stream::PlattFolds),
        ..TrainParams::new(Kernel::Linear, 1.0)
    };
    let found = grid_search(
        &GridInput {
            z1_x: &x1,
            z1_y: &y1,
            z2_x: &x2,
            z2_y: &y2,
            m: ds.m,
        },
        a.strategy.into(),
        a.kernel.into(),
        &grid,
        &base,
    )?;
    let failed = found.cells.iter().filter(|c| c.error.is_some()).count();
    let model = found.model.with_preprocess(pre);
    model.save(&a.out)?;
    match found.gamma {
        Some(g) => println!("C = {}, gamma = {g}, Z2 kappa = {:.4}", found.c, found.kappa),
        None => println!("C = {}, Z2 kappa = {:.4}", found.c, found.kappa),
    }
    if failed > 0 {
        println!("{failed} grid cells failed to train");
    }
    println!("{} binary models -> {}", model.n_models(), a.out.display());
    Ok(())
}

fn classify_part(model: &MulticlassModel, samples: &[&Sample]) -> Result<Vec<Assignment>> {
    let queries: Vec<Query> = samples.iter().map(|s| Query::from_sample(s)).collect();
    model.classify(&queries)
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let (ds, split) = load_split(&a.data)?;
    let model = MulticlassModel::load(&a.model)?;
    let z2 = part(&ds, &split.z2);
    let assigned = classify_part(&model, &z2)?;
    let hist = estimate_error_histograms(&assigned, &labels(&z2), model.m, a.bins, a.smoothing)?;
    hist.save(&a.out)?;
    println!(
        "{} errors among {} Z2 samples, {} bins -> {}",
        hist.total_errors(),
        hist.total_count(),
        hist.n,
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct RouteDocument<'a> {
    budget: usize,
    routed: usize,
    ds1_kappa: f64,
    final_kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    outcomes: &'a [RoutingOutcome],
}

fn route(a: RouteArgs) -> Result<()> {
    let (ds, split) = load_split(&a.data)?;
    let ds1 = MulticlassModel::load(&a.model)?;
    let hist = a.histogram.as_deref().map(ErrorHistogram::load).transpose()?;
    let mode = if a.random {
        SelectionMode::Random
    } else {
        if hist.is_none() {
            return Err(Error::Validation("error-guided routing needs --histogram (or pass --random)".into()));
        }
        SelectionMode::ErrorGuided
    };
    let strong: Box<dyn StrongClassifier> = match (&a.strong, &a.strong_command) {
        (Some(path), _) => Box::new(ModelStrong::new(MulticlassModel::load(path)?)),
        (None, Some(cmd)) if !cmd.is_empty() => {
            let mut ext = ExternalStrong::spawn(&cmd[0], &cmd[1..])?.with_timeout(Duration::from_secs_f64(a.timeout));
            ext.train(&[], ds1.m)?;
            Box::new(ext)
        }
        _ => return Err(Error::Validation("no DS2 given".into())),
    };
    let z3 = part(&ds, &split.z3);
    let queries: Vec<Query> = z3.iter().map(|s| Query::from_sample(s)).collect();
    let budget = a
        .budget_count
        .unwrap_or_else(|| (a.budget * queries.len() as f64).round() as usize);
    let stream = if a.random { Stream::RandomBaseline } else { Stream::Selection };
    let (outcomes, failure) = match route_with(
        &queries,
        &ds1,
        strong.as_ref(),
        hist.as_ref(),
        mode,
        budget,
        seeds::derive(a.seed, stream),
    ) {
        Ok(run) => (run.outcomes, None),
        Err(Error::Routing { fallback, sample_id, message }) => {
            let e = Error::Routing {
                sample_id,
                message,
                fallback: Box::default(),
            };
            (*fallback, Some(e))
        }
        Err(e) => return Err(e),
    };
    let truth = labels(&z3);
    let ds1_pred: Vec<usize> = outcomes.iter().map(|o| o.ds1.class).collect();
    let final_pred: Vec<usize> = outcomes.iter().map(|o| o.final_class).collect();
    let doc = RouteDocument {
        budget,
        routed: outcomes.iter().filter(|o| o.routed).count(),
        ds1_kappa: kappa(&truth, &ds1_pred, ds.m)?,
        final_kappa: kappa(&truth, &final_pred, ds.m)?,
        error: failure.as_ref().map(|e| e.to_string()),
        outcomes: &outcomes,
    };
    if let Some(out) = &a.out {
        write_json(&doc, out)?;
    }
    println!(
        "routed {} of {} (budget {}), kappa DS1 {:.4} -> final {:.4}",
        doc.routed,
        outcomes.len(),
        budget,
        doc.ds1_kappa,
        doc.final_kappa
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn config_base(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(r) = a.repetitions {
        cfg.repetitions = r;
    }
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    let report = Experiment::prepare(cfg, config_base(&a.config))?.run()?;
    if let Some(out) = &a.out {
        std::fs::write(out, report.to_json()?)?;
    }
    let text = render_report(&report);
    match &a.text {
        Some(p) => std::fs::write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(r) = a.repetitions {
        cfg.repetitions = r;
    }
    if !cfg.techniques.contains(&Technique::Hybrid) {
        cfg.techniques.push(Technique::Hybrid);
    }
    let report = Experiment::prepare(cfg, config_base(&a.config))?.sweep(&a.bins)?;
    if let Some(out) = &a.out {
        write_json(&report, out)?;
    }
    print!("{}", render_sweep(&report));
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let mut reports = Vec::with_capacity(a.reports.len());
    for p in &a.reports {
        if !p.exists() {
            return Err(Error::MissingInput(p.clone()));
        }
        let r: ExperimentReport = serde_json::from_str(&std::fs::read_to_string(p)?)?;
        reports.push(r);
    }
    print!("{}", hybrid_cascade::harness::render_comparison(&reports));
    Ok(())
}

fn serve_model(a: ServeArgs) -> Result<()> {
    let model = MulticlassModel::load(&a.model)?;
    let m = model.m;
    let mut strong = ModelStrong::new(model);
    strong.delay = Duration::from_secs_f64(a.delay_ms.max(0.0) / 1e3);
    let stdin = io::stdin();
    let stdout = BufWriter::new(io::stdout().lock());
    serve(stdin.lock(), stdout, &strong, Some(m), a.exit_after)?;
    Ok(())
}
