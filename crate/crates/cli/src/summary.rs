//! Per-cell statistics over runs and the `summarize` command.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use glucevo_core::dataset::{read_report, RunReport};
use glucevo_core::fitness::ObjectiveId;
use serde::Serialize;

use crate::train::report_files;

/// Mean and spread over the runs of one patient × grammar × objective cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub patient: String,
    pub grammar: String,
    pub objective: ObjectiveId,
    pub runs: usize,
    /// Runs whose best individual never had a finite fitness.
    pub invalid_runs: usize,
    pub fitness_mean: Option<f64>,
    pub fitness_std: Option<f64>,
    pub pae_mean: Option<f64>,
    pub pae_std: Option<f64>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

pub fn summarize_reports(reports: &[RunReport]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(String, String, ObjectiveId), Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        cells
            .entry((r.patient.clone(), r.grammar.clone(), r.objective))
            .or_default()
            .push(r);
    }
    cells
        .into_iter()
        .map(|((patient, grammar, objective), runs)| {
            let fit: Vec<f64> = runs.iter().filter_map(|r| r.best_fitness.value()).collect();
            let pae: Vec<f64> = runs.iter().filter_map(|r| r.pae_percent).collect();
            let f = mean_std(&fit);
            let p = mean_std(&pae);
            SummaryRow {
                patient,
                grammar,
                objective,
                runs: runs.len(),
                invalid_runs: runs.len() - fit.len(),
                fitness_mean: f.map(|x| x.0),
                fitness_std: f.map(|x| x.1),
                pae_mean: p.map(|x| x.0),
                pae_std: p.map(|x| x.1),
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    if rows.is_empty() {
        w.write_record([
            "patient", "grammar", "objective", "runs", "invalid_runs", "fitness_mean", "fitness_std", "pae_mean",
            "pae_std",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn cell(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
        _ => "-".into(),
    }
}

/// Grammar × objective tables per patient, one for fitness and one for PAE.
pub fn render_tables(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let mut patients: Vec<&str> = rows.iter().map(|r| r.patient.as_str()).collect();
    patients.dedup();
    for patient in patients {
        let mine: Vec<&SummaryRow> = rows.iter().filter(|r| r.patient == patient).collect();
        let mut objectives: Vec<ObjectiveId> = mine.iter().map(|r| r.objective).collect();
        objectives.sort();
        objectives.dedup();
        let mut grammars: Vec<&str> = mine.iter().map(|r| r.grammar.as_str()).collect();
        grammars.sort();
        grammars.dedup();
        for (title, pick) in [
            ("fitness", (|r: &SummaryRow| cell(r.fitness_mean, r.fitness_std)) as fn(&SummaryRow) -> String),
            ("PAE %", |r: &SummaryRow| cell(r.pae_mean, r.pae_std)),
        ] {
            let _ = writeln!(out, "{patient}: {title}");
            let _ = write!(out, "{:<10}", "grammar");
            for o in &objectives {
                let _ = write!(out, " {:>22}", o.as_str().to_uppercase());
            }
            out.push('\n');
            for g in &grammars {
                let _ = write!(out, "{g:<10}");
                for o in &objectives {
                    let text = mine
                        .iter()
                        .find(|r| r.grammar == *g && r.objective == *o)
                        .map_or("-".into(), |r| pick(r));
                    let _ = write!(out, " {text:>22}");
                }
                out.push('\n');
            }
            out.push('\n');
        }
    }
    out
}

/// Summarize every report in `dir` and write `dir/summary.csv`.
pub fn cmd_summarize(dir: &Path) -> Result<Vec<SummaryRow>> {
    let reports = report_files(dir)?
        .iter()
        .map(|p| read_report(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let rows = summarize_reports(&reports);
    write_summary(&dir.join("summary.csv"), &rows)?;
    Ok(rows)
}
