//! Executable NARX models: regressors, least squares, prediction and
//! free-run simulation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::linalg::lstsq;
pub use crate::linalg::Matrix;
use crate::narx::{parse_polynomial, NarxError, NarxExpression, Signal, Term};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("series of length {len} is too short; need more than {max_lag} samples")]
    SeriesTooShort { len: usize, max_lag: usize },
    #[error("input and output lengths differ ({u} vs {y})")]
    LengthMismatch { u: usize, y: usize },
    #[error("regressor {column} is not finite at row {row}")]
    NonFiniteRegressor { row: usize, column: usize },
    #[error("empty series")]
    EmptySeries,
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("no estimation data")]
    NoEstimationData,
    #[error("expected {expected} parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },
    #[error("parameter {0} is not finite")]
    NonFiniteParameter(usize),
    #[error("term `{0}` appears twice")]
    DuplicateTerm(String),
    #[error(transparent)]
    Expression(#[from] NarxError),
}

/// A uniformly sampled signal; `start_index` is the sample offset of the
/// first value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SignalSeries<T> {
    samples: Vec<T>,
    start_index: usize,
}

impl<T: Scalar> SignalSeries<T> {
    pub fn new(samples: Vec<T>) -> Result<Self, ModelError> {
        Self::with_start(samples, 0)
    }

    pub fn with_start(samples: Vec<T>, start_index: usize) -> Result<Self, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::EmptySeries);
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteSample(i));
        }
        Ok(Self { samples, start_index })
    }

    /// Unchecked; model outputs may be empty or cut short.
    pub(crate) fn raw(samples: Vec<T>, start_index: usize) -> Self {
        Self { samples, start_index }
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }
}

/// An expression with one parameter per term.
#[derive(Debug, Clone, PartialEq)]
pub struct NarxModel<T> {
    expression: NarxExpression,
    parameters: Vec<T>,
    degenerate: bool,
}

impl<T: Scalar> NarxModel<T> {
    pub fn new(expression: NarxExpression, parameters: Vec<T>) -> Result<Self, ModelError> {
        if parameters.len() != expression.term_count() {
            return Err(ModelError::ParameterCount {
                expected: expression.term_count(),
                got: parameters.len(),
            });
        }
        if let Some(i) = parameters.iter().position(|p| !p.is_finite()) {
            return Err(ModelError::NonFiniteParameter(i));
        }
        Ok(Self { expression, parameters, degenerate: false })
    }

    /// All-zero parameters, flagged degenerate; stands in for a candidate
    /// that could not be fitted.
    pub fn unfitted(expression: NarxExpression) -> Self {
        let parameters = vec![T::zero(); expression.term_count()];
        Self { expression, parameters, degenerate: true }
    }

    /// Parses `0.5*u[k-1] - 1.2*y[k-1]^2 + xi[k]`; a term without a
    /// coefficient has parameter 1. Terms may come in any order.
    pub fn from_polynomial(s: &str) -> Result<Self, ModelError> {
        let parsed = parse_polynomial(s)?;
        let mut pairs: Vec<(Term, f64)> =
            parsed.terms.into_iter().map(|(c, t)| (t, c.unwrap_or(1.0))).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(ModelError::DuplicateTerm(w[0].0.to_string()));
        }
        let expression = NarxExpression::new(pairs.iter().map(|(t, _)| t.clone()), parsed.noise_term);
        let by_position = expression
            .terms()
            .iter()
            .map(|t| {
                let (_, c) = pairs.iter().find(|(p, _)| p == t).expect("term present");
                T::from_f64_lossy(*c)
            })
            .collect();
        Self::new(expression, by_position)
    }

    pub fn expression(&self) -> &NarxExpression {
        &self.expression
    }

    pub fn parameters(&self) -> &[T] {
        &self.parameters
    }

    /// Whether the estimation regressors were rank deficient.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn max_lag(&self) -> usize {
        self.expression.max_lag()
    }

    /// Output at sample `k` given signals holding the past values needed.
    fn output_at(&self, k: usize, u: &[T], y: &[T]) -> T {
        self.expression
            .terms()
            .iter()
            .zip(&self.parameters)
            .map(|(t, &c)| c * monomial(t, k, u, y))
            .sum()
    }
}

impl<T: Scalar> fmt::Display for NarxModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (t, c) in self.expression.terms().iter().zip(&self.parameters) {
            let neg = c.is_sign_negative();
            let sep = match (first, neg) {
                (true, false) => "",
                (true, true) => "-",
                (false, false) => " + ",
                (false, true) => " - ",
            };
            write!(f, "{sep}{}*{t}", c.abs())?;
            first = false;
        }
        if self.expression.noise_term() {
            write!(f, "{}xi[k]", if first { "" } else { " + " })?;
        } else if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

fn monomial<T: Scalar>(t: &Term, k: usize, u: &[T], y: &[T]) -> T {
    t.factors().iter().fold(T::one(), |acc, f| {
        let s = match f.signal {
            Signal::Input => u[k - f.delay],
            Signal::Output => y[k - f.delay],
        };
        acc * s.powi(f.exponent as i32)
    })
}

fn check_lengths<T: Scalar>(
    e: &NarxExpression,
    u: &SignalSeries<T>,
    y: &SignalSeries<T>,
) -> Result<usize, ModelError> {
    if u.len() != y.len() {
        return Err(ModelError::LengthMismatch { u: u.len(), y: y.len() });
    }
    let max_lag = e.max_lag();
    if y.len() <= max_lag {
        return Err(ModelError::SeriesTooShort { len: y.len(), max_lag });
    }
    Ok(max_lag)
}

/// Largest delay over all factors of `e`.
pub fn max_lag(e: &NarxExpression) -> usize {
    e.max_lag()
}

/// Rows `k = max_lag .. N-1`, one column per term, from measured signals.
pub fn regressor_matrix<T: Scalar>(
    e: &NarxExpression,
    u: &SignalSeries<T>,
    y: &SignalSeries<T>,
) -> Result<Matrix<T>, ModelError> {
    let max_lag = check_lengths(e, u, y)?;
    let rows = y.len() - max_lag;
    let mut phi = Matrix::zeros(rows, e.term_count());
    for (c, t) in e.terms().iter().enumerate() {
        for r in 0..rows {
            let v = monomial(t, r + max_lag, u.samples(), y.samples());
            if !v.is_finite() {
                return Err(ModelError::NonFiniteRegressor { row: r, column: c });
            }
            phi.set(r, c, v);
        }
    }
    Ok(phi)
}

/// Least-squares parameters over all `records`, stacking their regressor
/// matrices so no lag straddles two records. Rank-deficient problems get
/// the minimum-norm solution and a degenerate model.
pub fn estimate_ls<T: Scalar>(
    e: &NarxExpression,
    records: &[Dataset<T>],
) -> Result<NarxModel<T>, ModelError> {
    if records.is_empty() {
        return Err(ModelError::NoEstimationData);
    }
    let mut blocks = Vec::with_capacity(records.len());
    let mut target = Vec::new();
    for d in records {
        blocks.push(regressor_matrix(e, &d.u, &d.y)?);
        target.extend_from_slice(&d.y.samples()[e.max_lag()..]);
    }
    let phi = if blocks.len() == 1 {
        blocks.pop().expect("one block")
    } else {
        Matrix::vstack(&blocks, e.term_count())
    };
    let sol = lstsq(&phi, &target);
    let degenerate = sol.rank_deficient();
    let mut m = NarxModel::new(e.clone(), sol.x)?;
    m.degenerate = degenerate;
    Ok(m)
}

/// One-step-ahead prediction from measured signals, for `k ≥ max_lag`.
pub fn predict_one_step<T: Scalar>(m: &NarxModel<T>, d: &Dataset<T>) -> Result<SignalSeries<T>, ModelError> {
    let max_lag = check_lengths(m.expression(), &d.u, &d.y)?;
    let out = (max_lag..d.len()).map(|k| m.output_at(k, d.u.samples(), d.y.samples())).collect();
    Ok(SignalSeries::raw(out, max_lag))
}

/// Free-run output. `series` covers `k ≥ max_lag`; when the run diverges it
/// stops at the first offending sample, which is not included.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation<T> {
    pub series: SignalSeries<T>,
    pub diverged: bool,
}

/// Multiple of `max |y|` beyond which a simulation is declared diverged.
pub const DIVERGENCE_FACTOR: f64 = 100.0;

/// Free-run simulation with noise set to zero. The first `max_lag` outputs
/// are taken from the measured `y`.
pub fn simulate<T: Scalar>(m: &NarxModel<T>, d: &Dataset<T>) -> Result<Simulation<T>, ModelError> {
    let max_lag = check_lengths(m.expression(), &d.u, &d.y)?;
    let peak = d.y.samples().iter().fold(T::zero(), |a, x| a.max(x.abs()));
    let bound = if peak > T::zero() { T::from_f64_lossy(DIVERGENCE_FACTOR) * peak } else { T::infinity() };
    let mut sim = d.y.samples()[..max_lag].to_vec();
    sim.reserve(d.len() - max_lag);
    let mut diverged = false;
    for k in max_lag..d.len() {
        let v = m.output_at(k, d.u.samples(), &sim);
        if !v.is_finite() || v.abs() > bound {
            diverged = true;
            break;
        }
        sim.push(v);
    }
    sim.drain(..max_lag);
    Ok(Simulation { series: SignalSeries::raw(sim, max_lag), diverged })
}

/// Root mean square of `errors`.
pub fn rms<T: Scalar>(errors: &[T]) -> Result<T, ModelError> {
    if errors.is_empty() {
        return Err(ModelError::EmptySeries);
    }
    let ss: T = errors.iter().map(|&e| e * e).sum();
    Ok((ss / T::from_usize_lossy(errors.len())).sqrt())
}

/// `y[k] − ŷ[k]` for the samples covered by `output`.
pub fn residuals<T: Scalar>(d: &Dataset<T>, output: &SignalSeries<T>) -> Vec<T> {
    let y = &d.y.samples()[output.start_index()..];
    y.iter().zip(output.samples()).map(|(&a, &b)| a - b).collect()
}
