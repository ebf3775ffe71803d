//! Aligned text rendering of reports.

use std::fmt::Write;

use super::config::Technique;
use super::experiment::{ExperimentReport, SweepReport};
use super::metrics::MeanStd;

fn pm(v: &MeanStd, digits: usize) -> String {
    format!("{:.*} ± {:.*}", digits, v.mean, digits, v.std)
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (c, cell) in r.iter().enumerate().take(cols) {
            width[c] = width[c].max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let mut s = String::new();
        for (c, cell) in cells.iter().enumerate() {
            let pad = width[c] - cell.chars().count();
            if c == 0 {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(header);
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

pub fn render_report(r: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}: {} repetitions, n = {} bins, M = {:.0}% of Z3, base seed {}",
        r.name,
        r.repetitions,
        r.bins,
        r.config.budget_fraction * 100.0,
        r.config.base_seed
    );
    out.push('\n');

    let techniques: Vec<Technique> = r.summaries.iter().map(|s| s.technique).collect();
    let header: Vec<String> = std::iter::once("Cohen's kappa".to_string())
        .chain(techniques.iter().map(|t| t.to_string()))
        .collect();
    let row: Vec<String> = std::iter::once("mean ± std".to_string())
        .chain(r.summaries.iter().map(|s| pm(&s.kappa, 3)))
        .collect();
    out.push_str(&table(&header, &[row]));
    out.push('\n');

    let header: Vec<String> = std::iter::once("Class".to_string())
        .chain(techniques.iter().map(|t| t.to_string()))
        .collect();
    let rows: Vec<Vec<String>> = r
        .class_names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            std::iter::once(name.clone())
                .chain(r.summaries.iter().map(|s| match s.per_class.get(k).copied().flatten() {
                    Some(v) => pm(&v, 3),
                    None => "-".to_string(),
                }))
                .collect()
        })
        .collect();
    out.push_str(&table(&header, &rows));
    out.push('\n');

    let header = vec!["Technique".to_string(), "ms per sample".to_string(), "sample std".to_string()];
    let rows: Vec<Vec<String>> = r
        .summaries
        .iter()
        .map(|s| {
            vec![
                s.technique.to_string(),
                pm(&s.time_ms, 4),
                format!("{:.4}", s.sample_std_ms),
            ]
        })
        .collect();
    out.push_str(&table(&header, &rows));

    let cases: Vec<Vec<String>> = r
        .summaries
        .iter()
        .filter(|s| s.technique.is_hybrid())
        .map(|s| {
            let f = |v: &Option<MeanStd>| v.as_ref().map_or("-".to_string(), |v| pm(v, 2));
            vec![s.technique.to_string(), f(&s.case1_pct), f(&s.case2_pct)]
        })
        .collect();
    if !cases.is_empty() {
        out.push('\n');
        let header = vec![
            "Routed".to_string(),
            "case 1: DS2 breaks (%)".to_string(),
            "case 2: DS2 fixes (%)".to_string(),
        ];
        out.push_str(&table(&header, &cases));
    }
    out
}

pub fn render_sweep(s: &SweepReport) -> String {
    let header = vec!["n".to_string(), "hybrid kappa".to_string(), "splits".to_string()];
    let rows: Vec<Vec<String>> = s
        .rows
        .iter()
        .map(|r| {
            let fp = r.fingerprints.iter().fold(0u64, |h, f| h.rotate_left(7) ^ f);
            vec![
                r.n.to_string(),
                r.hybrid_kappa.as_ref().map_or("-".into(), |k| pm(k, 3)),
                format!("{fp:016x}"),
            ]
        })
        .collect();
    let mut out = table(&header, &rows);
    if let Some(n) = s.best_n {
        let _ = writeln!(out, "best n = {n}");
    }
    out
}

/// Kappa of every technique across several reports, one column per report.
pub fn render_comparison(reports: &[ExperimentReport]) -> String {
    let mut techniques: Vec<Technique> = reports
        .iter()
        .flat_map(|r| r.summaries.iter().map(|s| s.technique))
        .collect();
    techniques.sort();
    techniques.dedup();
    let header: Vec<String> = std::iter::once("Technique".to_string())
        .chain(reports.iter().map(|r| format!("{} (n = {})", r.name, r.bins)))
        .collect();
    let rows: Vec<Vec<String>> = techniques
        .iter()
        .map(|&t| {
            std::iter::once(t.to_string())
                .chain(
                    reports
                        .iter()
                        .map(|r| r.summary(t).map_or("-".to_string(), |s| pm(&s.kappa, 3))),
                )
                .collect()
        })
        .collect();
    table(&header, &rows)
}
