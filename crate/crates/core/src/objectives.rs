//! Fitness of a candidate structure: prediction error, simulation error and
//! parameter count.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::model::{estimate_ls, predict_one_step, residuals, rms, simulate, ModelError, NarxModel};
use crate::narx::NarxExpression;
use crate::Scalar;

/// Objectives in dominance order: prediction RMS, simulation RMS,
/// complexity. RMS values may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FitnessVector<T> {
    pub rms_prediction: T,
    pub rms_simulation: T,
    pub complexity: usize,
}

impl<T: Scalar> FitnessVector<T> {
    pub fn new(rms_prediction: T, rms_simulation: T, complexity: usize) -> Self {
        Self { rms_prediction, rms_simulation, complexity }
    }

    /// Both errors `+∞`.
    pub fn infeasible(complexity: usize) -> Self {
        Self::new(T::infinity(), T::infinity(), complexity)
    }

    pub fn objectives(&self) -> [T; 3] {
        [self.rms_prediction, self.rms_simulation, T::from_usize_lossy(self.complexity)]
    }
}

impl<T: Scalar> fmt::Display for FitnessVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.rms_prediction, self.rms_simulation, self.complexity)
    }
}

/// Number of parameters, one per term.
pub fn complexity(e: &NarxExpression) -> usize {
    e.term_count()
}

/// Error measures of a fixed model over one or more records; residuals of
/// all records are pooled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores<T> {
    pub rms_prediction: T,
    /// `+∞` when any record diverged.
    pub rms_simulation: T,
    pub diverged: bool,
}

pub fn score<T: Scalar>(m: &NarxModel<T>, data: &[Dataset<T>]) -> Result<Scores<T>, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptySeries);
    }
    let mut pred = Vec::new();
    let mut sim = Vec::new();
    let mut diverged = false;
    for d in data {
        pred.extend(residuals(d, &predict_one_step(m, d)?));
        let s = simulate(m, d)?;
        diverged |= s.diverged;
        if !diverged {
            sim.extend(residuals(d, &s.series));
        }
    }
    Ok(Scores {
        rms_prediction: rms(&pred)?,
        rms_simulation: if diverged { T::infinity() } else { rms(&sim)? },
        diverged,
    })
}

/// A fitted candidate with its fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub model: NarxModel<T>,
    pub fitness: FitnessVector<T>,
    pub diverged: bool,
}

/// Least squares on `estimation`, errors on `validation`. A degenerate fit
/// gets both errors `+∞`; a diverging simulation gets simulation error `+∞`.
pub fn evaluate<T: Scalar>(
    e: &NarxExpression,
    estimation: &[Dataset<T>],
    validation: &[Dataset<T>],
) -> Result<Evaluation<T>, ModelError> {
    let model = estimate_ls(e, estimation)?;
    let c = complexity(e);
    if model.is_degenerate() {
        return Ok(Evaluation { model, fitness: FitnessVector::infeasible(c), diverged: false });
    }
    let s = score(&model, validation)?;
    Ok(Evaluation {
        model,
        fitness: FitnessVector::new(s.rms_prediction, s.rms_simulation, c),
        diverged: s.diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize, InputKind, InputSpec};

    fn data(model: &str, seed: u64, noise: f64) -> Dataset<f64> {
        let g = NarxModel::from_polynomial(model).unwrap();
        let spec = InputSpec { kind: InputKind::Gaussian, amplitude: 1.0, length: 400, seed, bandwidth: 1.0 };
        synthesize(&g, &spec.generate().unwrap(), noise, seed).unwrap()
    }

    #[test]
    fn complexity_counts_terms() {
        let m1: NarxExpression = "u[k-1] + u[k] + y[k-3] + y[k-2] + y[k-1] + y[k-1]^3 + xi[k]".parse().unwrap();
        assert_eq!(complexity(&m1), 6);
        assert_eq!(complexity(&NarxExpression::noise_only()), 0);
    }

    #[test]
    fn true_structure_noiseless() {
        let gen = "0.5*u[k-1] - 0.3*y[k-1] + 0.1*u[k-2]*y[k-1] + xi[k]";
        let (est, val) = (data(gen, 1, 0.0), data(gen, 2, 0.0));
        let e = NarxModel::<f64>::from_polynomial(gen).unwrap().expression().clone();
        let ev = evaluate(&e, &[est], &[val]).unwrap();
        assert!(ev.fitness.rms_prediction < 1e-8);
        assert!(ev.fitness.rms_simulation < 1e-8);
        assert_eq!(ev.fitness.complexity, 3);
        let truth = NarxModel::<f64>::from_polynomial(gen).unwrap();
        for (a, b) in ev.model.parameters().iter().zip(truth.parameters()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn empty_expression_scores_rms_of_y() {
        let (est, val) = (data("0.5*u[k-1] + xi[k]", 1, 0.01), data("0.5*u[k-1] + xi[k]", 2, 0.01));
        let ev = evaluate(&NarxExpression::noise_only(), &[est], std::slice::from_ref(&val)).unwrap();
        let r = rms(val.y.samples()).unwrap();
        assert_eq!(ev.fitness, FitnessVector::new(r, r, 0));
    }

    #[test]
    fn unstable_candidate_gets_infinite_simulation_error() {
        let e: NarxExpression = "y[k-1]".parse().unwrap();
        let est = Dataset::new("e", vec![0.0; 10], (0..10).map(|k| 1.5f64.powi(k)).collect()).unwrap();
        let val = Dataset::new("v", vec![0.0; 50], vec![1.0; 50]).unwrap();
        let ev = evaluate(&e, &[est], &[val]).unwrap();
        assert!((ev.model.parameters()[0] - 1.5).abs() < 1e-12);
        assert!(ev.diverged);
        assert!(ev.fitness.rms_simulation.is_infinite());
        assert!(ev.fitness.rms_prediction.is_finite());
    }

    #[test]
    fn degenerate_fit_is_infeasible() {
        let est = Dataset::new("e", vec![1.0; 20], vec![2.0; 20]).unwrap();
        let e: NarxExpression = "u[k] + u[k-1]".parse().unwrap();
        let ev = evaluate(&e, &[est.clone()], &[est]).unwrap();
        assert!(ev.model.is_degenerate());
        assert_eq!(ev.fitness, FitnessVector::infeasible(2));
    }
}
