//! Recursive one-step-ahead glucose estimation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expression::{EvalContext, Expr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("a patient series needs at least one step")]
    Empty,
    #[error("column lengths differ (GL {gl}, CH {ch}, IS {is}, IL {il})")]
    LengthMismatch { gl: usize, ch: usize, is: usize, il: usize },
    #[error("step {k}: glucose must be positive, got {value}")]
    NonPositiveGlucose { k: usize, value: f64 },
    #[error("step {k}: {column} must be non-negative, got {value}")]
    NegativeInput { k: usize, column: &'static str, value: f64 },
}

/// Aligned 15-minute records for one patient. Step `k` (1-based) is stored at
/// index `k - 1` of each column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientSeries {
    patient_id: String,
    gl: Vec<f64>,
    ch: Vec<f64>,
    is: Vec<f64>,
    il: Vec<f64>,
}

impl PatientSeries {
    pub fn new(
        patient_id: impl Into<String>,
        gl: Vec<f64>,
        ch: Vec<f64>,
        is: Vec<f64>,
        il: Vec<f64>,
    ) -> Result<Self, SeriesError> {
        let n = gl.len();
        if n == 0 {
            return Err(SeriesError::Empty);
        }
        if ch.len() != n || is.len() != n || il.len() != n {
            return Err(SeriesError::LengthMismatch {
                gl: n,
                ch: ch.len(),
                is: is.len(),
                il: il.len(),
            });
        }
        for (i, &value) in gl.iter().enumerate() {
            // also rejects NaN
            if !(value > 0.0 && value.is_finite()) {
                return Err(SeriesError::NonPositiveGlucose { k: i + 1, value });
            }
        }
        for (column, values) in [("CH", &ch), ("IS", &is), ("IL", &il)] {
            for (i, &value) in values.iter().enumerate() {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(SeriesError::NegativeInput { k: i + 1, column, value });
                }
            }
        }
        Ok(PatientSeries {
            patient_id: patient_id.into(),
            gl,
            ch,
            is,
            il,
        })
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn len(&self) -> usize {
        self.gl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gl.is_empty()
    }

    pub fn gl(&self) -> &[f64] {
        &self.gl
    }

    pub fn ch(&self) -> &[f64] {
        &self.ch
    }

    pub fn is(&self) -> &[f64] {
        &self.is
    }

    pub fn il(&self) -> &[f64] {
        &self.il
    }

    /// `max GL - min GL`.
    pub fn glucose_range(&self) -> f64 {
        let (lo, hi) = self
            .gl
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// Same inputs with a different glucose seed at step 1.
    pub fn with_first_glucose(&self, value: f64) -> Result<Self, SeriesError> {
        let mut gl = self.gl.clone();
        gl[0] = value;
        PatientSeries::new(self.patient_id.clone(), gl, self.ch.clone(), self.is.clone(), self.il.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedSeries {
    pub gl_hat: Vec<f64>,
    /// False if any estimate is NaN or infinite.
    pub finite: bool,
}

/// Run `expr` as the one-step model `gl_hat(k+1) = f(k)` over `series`.
///
/// `gl_hat(1)` is seeded with the actual `GL(1)`. Non-finite values are kept
/// and propagate into later steps; `finite` reports whether any occurred.
pub fn simulate(expr: &Expr, series: &PatientSeries) -> EstimatedSeries {
    let n = series.len();
    let mut gl_hat = Vec::with_capacity(n);
    gl_hat.push(series.gl()[0]);
    let mut finite = true;
    for k in 1..n {
        let ctx = EvalContext {
            k,
            gl_hat: &gl_hat,
            series,
        };
        let next = expr.eval(&ctx);
        finite &= next.is_finite();
        gl_hat.push(next);
    }
    EstimatedSeries { gl_hat, finite }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expression::{BinOp, Channel};

    fn toy() -> PatientSeries {
        PatientSeries::new(
            "toy",
            vec![209.1453, 209.1453, 205.79354, 202.56395],
            vec![0.0, 10.0, 0.0, 0.0],
            vec![0.0, 0.0, 2.0, 0.0],
            vec![0.0, 0.0, 0.0, 5.0],
        )
        .unwrap()
    }

    #[test]
    fn previous_glucose_is_a_fixed_point() {
        let est = simulate(&Expr::var(Channel::GL, 0), &toy());
        assert_eq!(est.gl_hat, vec![209.1453; 4]);
        assert!(est.finite);
    }

    #[test]
    fn constant_model() {
        let est = simulate(&Expr::constant("00.00"), &toy());
        assert_eq!(est.gl_hat, vec![209.1453, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn inputs_are_actuals_and_glucose_is_estimated() {
        // gl_hat(k+1) = GL[k] + CH[k]
        let e = Expr::bin(BinOp::Add, Expr::var(Channel::GL, 0), Expr::var(Channel::CH, 0));
        let est = simulate(&e, &toy());
        assert_eq!(est.gl_hat, vec![209.1453, 209.1453, 219.1453, 219.1453]);
    }

    #[test]
    fn non_finite_is_flagged_and_propagates() {
        let e = Expr::bin(BinOp::Div, Expr::var(Channel::GL, 0), Expr::var(Channel::IS, 0));
        let est = simulate(&e, &toy());
        assert!(!est.finite);
        assert_eq!(est.gl_hat.len(), 4);
        assert!(est.gl_hat[1].is_infinite());
    }

    #[test]
    fn seed_passes_through() {
        let s = toy().with_first_glucose(150.0).unwrap();
        let est = simulate(&Expr::var(Channel::GL, 0), &s);
        assert_eq!(est.gl_hat[0], 150.0);
        assert_eq!(est.gl_hat[3], 150.0);
    }

    #[test]
    fn series_validation() {
        let one = |gl: f64, ch: f64| PatientSeries::new("p", vec![gl], vec![ch], vec![0.0], vec![0.0]);
        assert!(one(100.0, 0.0).is_ok());
        assert!(matches!(one(0.0, 0.0), Err(SeriesError::NonPositiveGlucose { k: 1, .. })));
        assert!(matches!(one(100.0, -1.0), Err(SeriesError::NegativeInput { column: "CH", .. })));
        assert!(matches!(
            PatientSeries::new("p", vec![], vec![], vec![], vec![]),
            Err(SeriesError::Empty)
        ));
        assert!(matches!(
            PatientSeries::new("p", vec![1.0], vec![], vec![0.0], vec![0.0]),
            Err(SeriesError::LengthMismatch { .. })
        ));
    }
}
