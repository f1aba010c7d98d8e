//! Identification of polynomial NARX models with Tree Adjoining Grammars.
//!
//! Model structures are encoded as derivation trees of the grammar returned by
//! [`narx::g_narx`]. A multi-objective genetic-programming loop
//! ([`evolution::run`]) searches over those derivations, estimating the
//! parameters of every candidate by least squares and ranking candidates on
//! one-step-ahead prediction error, free-run simulation error and parameter
//! count.
//!
//! The numeric layers are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root name the `f64` instantiations used by the CLI.

pub mod data;
pub mod evolution;
mod linalg;
pub mod model;
pub mod moo;
pub mod narx;
pub mod objectives;
pub mod report;
mod scalar;
pub mod tag;

pub use scalar::Scalar;

/// Library version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use data::{Dataset, SplitSpec};
pub use evolution::{GpConfig, RunResult};
pub use model::{NarxModel, SignalSeries};
pub use moo::{FitnessVector, Individual, ParetoFront};
pub use narx::{DerivationTree, NarxExpression};
pub use objectives::Evaluation;
pub use tag::{Grammar, GornAddress, Symbol, SyntacticTree};

/// `f64` dataset.
pub type Dataset64 = data::Dataset<f64>;
/// `f32` dataset.
pub type Dataset32 = data::Dataset<f32>;
/// `f64` signal series.
pub type SignalSeries64 = model::SignalSeries<f64>;
/// `f64` NARX model.
pub type NarxModel64 = model::NarxModel<f64>;
/// `f32` NARX model.
pub type NarxModel32 = model::NarxModel<f32>;
/// `f64` fitness vector.
pub type FitnessVector64 = moo::FitnessVector<f64>;
/// `f64` population member.
pub type Individual64 = moo::Individual<f64>;
/// `f64` Pareto front.
pub type ParetoFront64 = moo::ParetoFront<f64>;
/// `f64` identification result.
pub type RunResult64 = evolution::RunResult<f64>;
