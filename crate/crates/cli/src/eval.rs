//! `eval`: run a fixed model over a dataset, no evolution involved.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use glucevo_core::dataset::{comparison_table, read_report, ObjectiveValues, TableRow};
use glucevo_core::expression::{parse_expr, Expr};
use glucevo_core::fitness::{percentage_average_error, ObjectiveId};
use glucevo_core::simulate::{simulate, PatientSeries};

use crate::train::objective_values;

/// Where the model comes from.
#[derive(Debug, Clone)]
pub enum ModelSource {
    Text(String),
    Report(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub patient: String,
    pub expression: Expr,
    pub objectives: ObjectiveValues,
    pub pae_percent: Option<f64>,
    pub table: Vec<TableRow>,
}

impl Evaluation {
    pub fn summary_text(&self) -> String {
        let mut out = format!("model   {}\npatient {}\n", self.expression, self.patient);
        for id in ObjectiveId::ALL {
            let v = self.objectives.get(id).map_or("non-finite".into(), |v| format!("{v:.6}"));
            out.push_str(&format!("{} {:<26} {v}\n", id.as_str().to_uppercase(), id.title()));
        }
        let pae = self.pae_percent.map_or("non-finite".into(), |p| format!("{p:.4}%"));
        out.push_str(&format!("PAE {pae}\n"));
        out
    }
}

pub fn load_model(source: &ModelSource) -> Result<Expr> {
    let text = match source {
        ModelSource::Text(t) => t.clone(),
        ModelSource::Report(p) => {
            let report = read_report(p).with_context(|| format!("reading {}", p.display()))?;
            match report.expression {
                Some(e) => e,
                None => bail!("report {} holds no valid model", p.display()),
            }
        }
    };
    parse_expr(&text).with_context(|| format!("parsing model `{text}`"))
}

pub fn cmd_eval(model: &Expr, series: &PatientSeries) -> Result<Evaluation> {
    let estimated = simulate(model, series);
    Ok(Evaluation {
        patient: series.patient_id().to_string(),
        expression: model.clone(),
        objectives: objective_values(series, &estimated)?,
        pae_percent: percentage_average_error(series, &estimated).unwrap_or(None),
        table: comparison_table(series, &estimated),
    })
}

/// Plot-ready `k,GL,GL_hat` file; non-finite estimates are left empty.
pub fn write_table(path: &Path, table: &[TableRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["k", "GL", "GL_hat"])?;
    for row in table {
        w.write_record([
            row.k.to_string(),
            row.gl.to_string(),
            row.gl_hat.map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
