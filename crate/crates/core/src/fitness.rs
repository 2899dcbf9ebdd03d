//! Error series, objective functions and the percentage-average-error metric.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::simulate::{EstimatedSeries, PatientSeries};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitnessError {
    #[error("series lengths differ: {actual} actual vs {estimated} estimated")]
    LengthMismatch { actual: usize, estimated: usize },
    #[error("error series is empty")]
    EmptySeries,
    #[error("glucose range is zero")]
    DegenerateRange,
}

/// The five objectives. Lower is better for all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveId {
    /// Least squares, `sum e^2`.
    F1,
    /// Average error, `mean e`.
    F2,
    /// Maximum error.
    F3,
    /// Root mean squared error.
    F4,
    /// Mean relative error `mean e/GL` (labelled MAD).
    F5,
}

impl ObjectiveId {
    pub const ALL: [ObjectiveId; 5] = [
        ObjectiveId::F1,
        ObjectiveId::F2,
        ObjectiveId::F3,
        ObjectiveId::F4,
        ObjectiveId::F5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveId::F1 => "f1",
            ObjectiveId::F2 => "f2",
            ObjectiveId::F3 => "f3",
            ObjectiveId::F4 => "f4",
            ObjectiveId::F5 => "f5",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ObjectiveId::F1 => "least squares",
            ObjectiveId::F2 => "average error",
            ObjectiveId::F3 => "maximum error",
            ObjectiveId::F4 => "RMSE",
            ObjectiveId::F5 => "MAD",
        }
    }
}

impl fmt::Display for ObjectiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObjectiveId::ALL
            .into_iter()
            .find(|o| o.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown objective `{s}` (expected f1..f5)"))
    }
}

/// Objective value with a dedicated worst element.
///
/// `Worst` compares greater than every finite value. It stands for failed
/// mappings and non-finite estimates. Serialized as a number or `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fitness {
    Value(f64),
    Worst,
}

impl Fitness {
    /// Non-finite inputs become `Worst`.
    pub fn new(v: f64) -> Self {
        if v.is_finite() {
            Fitness::Value(v)
        } else {
            Fitness::Worst
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Fitness::Value(v) => Some(v),
            Fitness::Worst => None,
        }
    }

    pub fn is_worst(self) -> bool {
        matches!(self, Fitness::Worst)
    }
}

impl Eq for Fitness {}

impl Ord for Fitness {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Fitness::Value(a), Fitness::Value(b)) => a.total_cmp(b),
            (Fitness::Value(_), Fitness::Worst) => Ordering::Less,
            (Fitness::Worst, Fitness::Value(_)) => Ordering::Greater,
            (Fitness::Worst, Fitness::Worst) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Fitness {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Fitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fitness::Value(v) => write!(f, "{v}"),
            Fitness::Worst => f.write_str("worst"),
        }
    }
}

impl Serialize for Fitness {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Fitness {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.map_or(Fitness::Worst, Fitness::new))
    }
}

/// `e_k = |GL(k) - gl_hat(k)|` for every step.
pub fn error_series(actual: &PatientSeries, estimated: &EstimatedSeries) -> Result<Vec<f64>, FitnessError> {
    if actual.len() != estimated.gl_hat.len() {
        return Err(FitnessError::LengthMismatch {
            actual: actual.len(),
            estimated: estimated.gl_hat.len(),
        });
    }
    Ok(actual
        .gl()
        .iter()
        .zip(&estimated.gl_hat)
        .map(|(gl, est)| (gl - est).abs())
        .collect())
}

/// Objective value for an error series. `glucose` is needed by F5 only and
/// must be aligned with `errors`.
pub fn evaluate(objective: ObjectiveId, errors: &[f64], glucose: &[f64]) -> Result<Fitness, FitnessError> {
    if errors.is_empty() {
        return Err(FitnessError::EmptySeries);
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Ok(Fitness::Worst);
    }
    let n = errors.len() as f64;
    let sum_sq = || errors.iter().map(|e| e * e).sum::<f64>();
    let value = match objective {
        ObjectiveId::F1 => sum_sq(),
        ObjectiveId::F2 => errors.iter().sum::<f64>() / n,
        ObjectiveId::F3 => errors.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ObjectiveId::F4 => (sum_sq() / n).sqrt(),
        ObjectiveId::F5 => {
            if glucose.len() != errors.len() {
                return Err(FitnessError::LengthMismatch {
                    actual: glucose.len(),
                    estimated: errors.len(),
                });
            }
            errors.iter().zip(glucose).map(|(e, gl)| e / gl).sum::<f64>() / n
        }
    };
    Ok(Fitness::new(value))
}

/// `100 * F2 / (max GL - min GL)`. `None` when the estimate is not finite.
pub fn percentage_average_error(actual: &PatientSeries, estimated: &EstimatedSeries) -> Result<Option<f64>, FitnessError> {
    let range = actual.glucose_range();
    if range <= 0.0 {
        return Err(FitnessError::DegenerateRange);
    }
    let errors = error_series(actual, estimated)?;
    Ok(evaluate(ObjectiveId::F2, &errors, actual.gl())?
        .value()
        .map(|f2| 100.0 * f2 / range)
        .filter(|p| p.is_finite()))
}

/// Objective value and PAE of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub objective: ObjectiveId,
    pub value: Fitness,
    pub pae_percent: Option<f64>,
    pub n: usize,
}

impl FitnessReport {
    pub fn compute(objective: ObjectiveId, actual: &PatientSeries, estimated: &EstimatedSeries) -> Result<Self, FitnessError> {
        let errors = error_series(actual, estimated)?;
        let value = evaluate(objective, &errors, actual.gl())?;
        let pae_percent = match percentage_average_error(actual, estimated) {
            Ok(p) => p,
            Err(FitnessError::DegenerateRange) => None,
            Err(e) => return Err(e),
        };
        Ok(FitnessReport {
            objective,
            value,
            pae_percent,
            n: errors.len(),
        })
    }

    /// Report for an individual whose mapping or lowering failed.
    pub fn failed(objective: ObjectiveId, n: usize) -> Self {
        FitnessReport {
            objective,
            value: Fitness::Worst,
            pae_percent: None,
            n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(gl: Vec<f64>) -> PatientSeries {
        let n = gl.len();
        PatientSeries::new("p", gl, vec![0.0; n], vec![0.0; n], vec![0.0; n]).unwrap()
    }

    fn est(v: Vec<f64>) -> EstimatedSeries {
        let finite = v.iter().all(|x| x.is_finite());
        EstimatedSeries { gl_hat: v, finite }
    }

    fn val(o: ObjectiveId, e: &[f64], gl: &[f64]) -> f64 {
        evaluate(o, e, gl).unwrap().value().unwrap()
    }

    #[test]
    fn error_series_examples() {
        let s = series(vec![100.0, 110.0]);
        assert_eq!(error_series(&s, &est(vec![100.0, 110.0])).unwrap(), vec![0.0, 0.0]);
        assert_eq!(error_series(&s, &est(vec![100.0, 100.0])).unwrap(), vec![0.0, 10.0]);
        assert_eq!(
            error_series(&s, &est(vec![1.0])),
            Err(FitnessError::LengthMismatch { actual: 2, estimated: 1 })
        );
    }

    #[test]
    fn objective_examples() {
        let e = [3.0, 4.0];
        let gl = [100.0, 100.0];
        assert_eq!(val(ObjectiveId::F1, &e, &gl), 25.0);
        assert_eq!(val(ObjectiveId::F2, &e, &gl), 3.5);
        assert_eq!(val(ObjectiveId::F3, &e, &gl), 4.0);
        assert!((val(ObjectiveId::F4, &e, &gl) - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((val(ObjectiveId::F5, &e, &gl) - 0.035).abs() < 1e-15);
        for o in ObjectiveId::ALL {
            assert_eq!(val(o, &[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]), 0.0);
        }
    }

    #[test]
    fn constant_error_identity() {
        let e = [7.25; 9];
        let gl = [120.0; 9];
        let f2 = val(ObjectiveId::F2, &e, &gl);
        assert_eq!(f2, 7.25);
        assert_eq!(val(ObjectiveId::F3, &e, &gl), 7.25);
        assert!((val(ObjectiveId::F4, &e, &gl) - 7.25).abs() < 1e-12);
    }

    #[test]
    fn non_finite_errors_are_worst() {
        for o in ObjectiveId::ALL {
            assert_eq!(evaluate(o, &[1.0, f64::NAN], &[1.0, 1.0]).unwrap(), Fitness::Worst);
            assert_eq!(evaluate(o, &[f64::INFINITY], &[1.0]).unwrap(), Fitness::Worst);
        }
        assert_eq!(evaluate(ObjectiveId::F1, &[1e200, 1e200], &[1.0, 1.0]).unwrap(), Fitness::Worst);
        assert_eq!(evaluate(ObjectiveId::F2, &[], &[]), Err(FitnessError::EmptySeries));
    }

    #[test]
    fn worst_orders_after_everything() {
        assert!(Fitness::Value(f64::MAX) < Fitness::Worst);
        assert!(Fitness::Value(0.0) < Fitness::Value(1.0));
        assert_eq!(Fitness::new(f64::NAN), Fitness::Worst);
        let mut v = [Fitness::Worst, Fitness::Value(2.0), Fitness::Value(-0.0)];
        v.sort();
        assert_eq!(v[2], Fitness::Worst);
    }

    #[test]
    fn fitness_json() {
        assert_eq!(serde_json::to_string(&Fitness::Worst).unwrap(), "null");
        assert_eq!(serde_json::to_string(&Fitness::Value(1.5)).unwrap(), "1.5");
        assert_eq!(serde_json::from_str::<Fitness>("null").unwrap(), Fitness::Worst);
        assert_eq!(serde_json::from_str::<Fitness>("2.0").unwrap(), Fitness::Value(2.0));
    }

    #[test]
    fn pae() {
        let s = series(vec![100.0, 150.0, 200.0]);
        assert_eq!(percentage_average_error(&s, &est(vec![100.0, 150.0, 200.0])).unwrap(), Some(0.0));
        // F2 = 10, range = 100
        let p = percentage_average_error(&s, &est(vec![100.0, 160.0, 220.0])).unwrap().unwrap();
        assert!((p - 10.0).abs() < 1e-12);
        assert_eq!(percentage_average_error(&s, &est(vec![100.0, f64::NAN, 1.0])).unwrap(), None);
        let flat = series(vec![5.0, 5.0]);
        assert_eq!(
            percentage_average_error(&flat, &est(vec![5.0, 5.0])),
            Err(FitnessError::DegenerateRange)
        );
    }

    #[test]
    fn objective_ids_parse() {
        for o in ObjectiveId::ALL {
            assert_eq!(o.as_str().parse::<ObjectiveId>().unwrap(), o);
        }
        assert_eq!("F5".parse::<ObjectiveId>().unwrap(), ObjectiveId::F5);
        assert!("f6".parse::<ObjectiveId>().is_err());
    }
}
