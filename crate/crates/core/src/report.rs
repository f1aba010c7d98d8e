//! Serialized results: model reports, Pareto fronts and run history.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::IterationStats;
use crate::model::{ModelError, NarxModel};
use crate::moo::{dominates, Individual, ParetoFront};
use crate::narx::NarxExpression;
use crate::objectives::FitnessVector;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("front member {0} is dominated by member {1}")]
    Dominated(u64, u64),
    #[error("individual {0} has not been evaluated")]
    Unevaluated(u64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A fitted model with its scores. Infinite errors are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    /// Structure without coefficients, e.g. `u[k-1] + y[k-1] + xi[k]`.
    pub expression: String,
    /// Structure with coefficients.
    pub model: String,
    /// One per term, in the order of `expression`.
    pub parameters: Vec<f64>,
    pub complexity: usize,
    pub rms_prediction: Option<f64>,
    pub rms_simulation: Option<f64>,
    pub degenerate: bool,
    pub diverged: bool,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl ModelReport {
    pub fn new<T: Scalar>(m: &NarxModel<T>, fitness: &FitnessVector<T>, diverged: bool) -> Self {
        Self {
            expression: m.expression().to_string(),
            model: m.to_string(),
            parameters: m.parameters().iter().map(|p| p.to_f64_lossy()).collect(),
            complexity: fitness.complexity,
            rms_prediction: finite(fitness.rms_prediction.to_f64_lossy()),
            rms_simulation: finite(fitness.rms_simulation.to_f64_lossy()),
            degenerate: m.is_degenerate(),
            diverged,
        }
    }

    pub fn from_individual<T: Scalar>(ind: &Individual<T>) -> Result<Self, ReportError> {
        match (&ind.model, &ind.fitness) {
            (Some(m), Some(f)) => Ok(Self::new(m, f, ind.diverged)),
            _ => Err(ReportError::Unevaluated(ind.id)),
        }
    }

    /// Rebuilds the model from `expression` and `parameters`.
    pub fn to_model<T: Scalar>(&self) -> Result<NarxModel<T>, ReportError> {
        let e: NarxExpression = self.expression.parse().map_err(ModelError::from)?;
        Ok(NarxModel::new(e, self.parameters.iter().map(|&p| T::from_f64_lossy(p)).collect())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontEntry {
    pub id: u64,
    #[serde(flatten)]
    pub report: ModelReport,
}

/// Contents of `pareto.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontReport {
    pub members: Vec<FrontEntry>,
    /// Complexity to id of the member with the lowest simulation error.
    pub best_by_complexity: BTreeMap<usize, u64>,
}

/// Members by increasing complexity, then id.
fn ordered<T: Scalar>(front: &ParetoFront<T>) -> Result<Vec<(&Individual<T>, FitnessVector<T>)>, ReportError> {
    let mut rows = front
        .members()
        .iter()
        .map(|i| i.fitness.map(|f| (i, f)).ok_or(ReportError::Unevaluated(i.id)))
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by_key(|(i, f)| (f.complexity, i.id));
    Ok(rows)
}

impl FrontReport {
    pub fn new<T: Scalar>(front: &ParetoFront<T>) -> Result<Self, ReportError> {
        let members = ordered(front)?
            .into_iter()
            .map(|(i, _)| Ok(FrontEntry { id: i.id, report: ModelReport::from_individual(i)? }))
            .collect::<Result<_, ReportError>>()?;
        let best_by_complexity = front.best_by_complexity().map(|(c, i)| (c, i.id)).collect();
        Ok(Self { members, best_by_complexity })
    }
}

/// Writes `id,complexity,rms_prediction,rms_simulation,expression` rows,
/// after checking that no row dominates another.
pub fn write_pareto_csv<T: Scalar, W: Write>(front: &ParetoFront<T>, out: W) -> Result<(), ReportError> {
    let rows = ordered(front)?;
    for (a, fa) in &rows {
        if let Some((b, _)) = rows.iter().find(|(_, fb)| dominates(fb, fa)) {
            return Err(ReportError::Dominated(a.id, b.id));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "complexity", "rms_prediction", "rms_simulation", "expression"])?;
    for (i, f) in rows {
        let expression = i.expression().map(ToString::to_string).unwrap_or_default();
        w.write_record([
            i.id.to_string(),
            f.complexity.to_string(),
            f.rms_prediction.to_string(),
            f.rms_simulation.to_string(),
            expression,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one row per iteration with the minimum and mean of each objective.
pub fn write_history_csv<T: Scalar, W: Write>(history: &[IterationStats<T>], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "min_rms_prediction",
        "mean_rms_prediction",
        "min_rms_simulation",
        "mean_rms_simulation",
        "min_complexity",
        "mean_complexity",
    ])?;
    for s in history {
        w.write_record([
            s.iteration.to_string(),
            s.min_rms_prediction.to_string(),
            s.mean_rms_prediction.to_string(),
            s.min_rms_simulation.to_string(),
            s.mean_rms_simulation.to_string(),
            s.min_complexity.to_string(),
            s.mean_complexity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narx::DerivationTree;
    use crate::tag::TreeId;

    fn member(id: u64, model: &str, f: FitnessVector<f64>) -> Individual<f64> {
        let mut i = Individual::new(id, DerivationTree::new(TreeId::new("alpha1")));
        i.model = Some(NarxModel::from_polynomial(model).unwrap());
        i.fitness = Some(f);
        i
    }

    #[test]
    fn model_report_round_trip() {
        let m = NarxModel::<f64>::from_polynomial("0.5*u[k-1] - 0.25*y[k-2] + xi[k]").unwrap();
        let r = ModelReport::new(&m, &FitnessVector::new(0.1, f64::INFINITY, 2), true);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["rms_simulation"], serde_json::Value::Null);
        assert_eq!(json["expression"], "u[k-1] + y[k-2] + xi[k]");
        assert_eq!(json["model"], "0.5*u[k-1] - 0.25*y[k-2] + xi[k]");
        let back: ModelReport = serde_json::from_value(json).unwrap();
        assert_eq!(back.to_model::<f64>().unwrap(), m);
    }

    #[test]
    fn pareto_csv_rows() {
        let pop = vec![
            member(4, "2*u[k] + 1*u[k-1] + xi[k]", FitnessVector::new(0.5, 0.75, 2)),
            member(1, "1*u[k] + xi[k]", FitnessVector::new(1.0, f64::INFINITY, 1)),
        ];
        let front = ParetoFront::from_population(&pop).unwrap();
        let mut buf = Vec::new();
        write_pareto_csv(&front, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "id,complexity,rms_prediction,rms_simulation,expression\n\
             1,1,1,inf,u[k] + xi[k]\n\
             4,2,0.5,0.75,u[k] + u[k-1] + xi[k]\n"
        );
        let r = FrontReport::new(&front).unwrap();
        assert_eq!(r.best_by_complexity.get(&2), Some(&4));
    }

    #[test]
    fn history_csv_header() {
        let h = vec![IterationStats {
            iteration: 0,
            min_rms_prediction: 0.25,
            mean_rms_prediction: 0.5,
            min_rms_simulation: 1.0,
            mean_rms_simulation: f64::INFINITY,
            min_complexity: 0,
            mean_complexity: 3.5,
        }];
        let mut buf = Vec::new();
        write_history_csv(&h, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1), Some("0,0.25,0.5,1,inf,0,3.5"));
    }
}
