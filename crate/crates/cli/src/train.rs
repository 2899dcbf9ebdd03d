//! `train`: seeded batches of GA runs over patients × grammars × objectives.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, ensure, Context, Result};
use glucevo_core::dataset::{
    comparison_table, load_patient, write_report, ObjectiveValues, ReportMetadata, RunReport, REPORT_SCHEMA_VERSION,
};
use glucevo_core::evolver::{assess, run_with_progress, GaConfig, Problem, RunResult};
use glucevo_core::fitness::{self, ObjectiveId};
use glucevo_core::grammar::Grammar;
use glucevo_core::simulate::{EstimatedSeries, PatientSeries};
use log::{debug, info, warn};
use rayon::prelude::*;

use crate::summary::{summarize_reports, write_summary, SummaryRow};
use crate::{run_seed, GrammarSource};

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub datasets: Vec<PathBuf>,
    pub grammars: Vec<GrammarSource>,
    pub objectives: Vec<ObjectiveId>,
    pub runs: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    /// GA parameters; the seed field is replaced per run.
    pub config: GaConfig,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.runs >= 1, "--runs must be at least 1");
        ensure!(!self.datasets.is_empty(), "at least one --dataset is required");
        ensure!(!self.grammars.is_empty(), "at least one --grammar is required");
        ensure!(!self.objectives.is_empty(), "at least one --objective is required");
        for d in &self.datasets {
            ensure!(d.is_file(), "dataset {} does not exist", d.display());
        }
        for g in &self.grammars {
            if let GrammarSource::File(p) = g {
                ensure!(p.is_file(), "grammar file {} does not exist", p.display());
            }
        }
        self.config.validate()?;
        Ok(())
    }
}

pub fn report_file_name(patient: &str, grammar: &str, objective: ObjectiveId, run: usize) -> String {
    format!("{patient}_{grammar}_{}_{run}.report", objective.as_str())
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub reports: Vec<PathBuf>,
    pub summary: Vec<SummaryRow>,
    pub summary_path: PathBuf,
    /// `(cell description, error)` for every run that did not complete.
    pub failures: Vec<(String, String)>,
}

struct Job<'a> {
    series: &'a PatientSeries,
    grammar: &'a (String, Grammar),
    objective: ObjectiveId,
    run: usize,
}

pub fn cmd_train(spec: &ExperimentSpec) -> Result<TrainOutcome> {
    spec.validate()?;
    std::fs::create_dir_all(&spec.out_dir).with_context(|| format!("creating {}", spec.out_dir.display()))?;

    let patients = spec
        .datasets
        .iter()
        .map(|p| load_patient(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let grammars = spec
        .grammars
        .iter()
        .map(|g| Ok((g.label(), g.load()?)))
        .collect::<Result<Vec<_>>>()?;

    let mut jobs = Vec::new();
    for series in &patients {
        for grammar in &grammars {
            for &objective in &spec.objectives {
                for run in 0..spec.runs {
                    jobs.push(Job { series, grammar, objective, run });
                }
            }
        }
    }
    info!("{} runs queued", jobs.len());

    let results: Vec<(String, Result<(PathBuf, RunReport)>)> = jobs
        .par_iter()
        .map(|job| {
            let cell = format!(
                "{} {} {} run {}",
                job.series.patient_id(),
                job.grammar.0,
                job.objective,
                job.run
            );
            (cell, execute(spec, job))
        })
        .collect();

    let mut reports = Vec::new();
    let mut written = Vec::new();
    let mut failures = Vec::new();
    for (cell, result) in results {
        match result {
            Ok((path, report)) => {
                reports.push(path);
                written.push(report);
            }
            Err(e) => {
                warn!("{cell} failed: {e:#}");
                failures.push((cell, format!("{e:#}")));
            }
        }
    }

    let summary = summarize_reports(&written);
    let summary_path = spec.out_dir.join("summary.csv");
    write_summary(&summary_path, &summary)?;
    Ok(TrainOutcome {
        reports,
        summary,
        summary_path,
        failures,
    })
}

fn execute(spec: &ExperimentSpec, job: &Job<'_>) -> Result<(PathBuf, RunReport)> {
    let seed = run_seed(spec.base_seed, job.run);
    let config = GaConfig { seed, ..spec.config.clone() };
    let problem = Problem {
        grammar: &job.grammar.1,
        grammar_id: &job.grammar.0,
        objective: job.objective,
        series: job.series,
    };
    let every = (config.generations / 10).max(1);
    let result = run_with_progress(&config, &problem, &mut |s| {
        if s.generation % every == 0 {
            debug!(
                "{} {} {} run {}: generation {} best {}",
                job.series.patient_id(),
                job.grammar.0,
                job.objective,
                job.run,
                s.generation,
                s.best
            );
        }
    })?;
    let report = build_report(&problem, &result, job.run)?;
    let path = spec.out_dir.join(report_file_name(
        job.series.patient_id(),
        &job.grammar.0,
        job.objective,
        job.run,
    ));
    write_report(&path, &report)?;
    info!(
        "{}: fitness {} PAE {}",
        path.display(),
        report.best_fitness,
        report.pae_percent.map_or("-".into(), |p| format!("{p:.2}%"))
    );
    Ok((path, report))
}

/// All five objective values of an estimate.
pub fn objective_values(series: &PatientSeries, estimated: &EstimatedSeries) -> Result<ObjectiveValues> {
    let errors = fitness::error_series(series, estimated)?;
    let mut values = ObjectiveValues::default();
    for id in ObjectiveId::ALL {
        values.set(id, fitness::evaluate(id, &errors, series.gl())?.value());
    }
    Ok(values)
}

pub fn build_report(problem: &Problem<'_>, result: &RunResult, run: usize) -> Result<RunReport> {
    let assessment = assess(problem, &result.best_chromosome, result.config.max_wraps);
    if assessment.report.value != result.best_fitness {
        bail!(
            "best individual re-evaluates to {} instead of {}",
            assessment.report.value,
            result.best_fitness
        );
    }
    let (objectives, table) = match &assessment.estimated {
        Some(est) => (objective_values(problem.series, est)?, comparison_table(problem.series, est)),
        None => (ObjectiveValues::default(), Vec::new()),
    };
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        patient: problem.series.patient_id().to_string(),
        grammar: result.grammar_id.clone(),
        objective: result.objective,
        seed: result.config.seed,
        run,
        config: result.config.clone(),
        chromosome: result.best_chromosome.clone(),
        phenotype: result.best_phenotype.clone(),
        expression: result.best_expression.clone(),
        best_fitness: result.best_fitness,
        pae_percent: result.best_pae,
        best_generation: result.best_generation,
        objectives,
        history: result.history.clone(),
        table,
        metadata: ReportMetadata {
            generated_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        },
    })
}

/// Report files in `dir`, sorted by name.
pub fn report_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "report") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
