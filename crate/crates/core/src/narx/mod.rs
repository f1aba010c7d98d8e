//! Polynomial NARX models as TAG derivations.

mod derivation;
mod expression;
mod grammar;

pub use derivation::{
    compile, random_derivation, validate_derivation, Adjunction, AdjunctionTable, DerivationNode,
    DerivationTree, NodePath,
};
pub use expression::{
    parse_polynomial, parse_yield, tokens, Factor, NarxExpression, ParsedPolynomial, Signal, Term,
};
pub use grammar::{g_narx, names, restrict, ARX_SUBSET, FIR_SUBSET};

use crate::tag::{GornAddress, TagError, TreeId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NarxError {
    #[error("unknown elementary tree `{0}`")]
    UnknownTreeId(TreeId),
    #[error("factor exponent must be positive")]
    ZeroExponent,
    #[error("a term needs at least one factor")]
    EmptyTerm,
    #[error("output factor `{0}` has no delay")]
    NonCausalOutput(String),
    #[error("malformed yield at token {position}: {reason}")]
    MalformedYield { position: usize, reason: String },
    #[error("syntax error at {position}: {reason}")]
    Syntax { position: usize, reason: String },
    #[error("derivation root `{0}` is not an initial tree")]
    RootNotInitial(TreeId),
    #[error("`{0}` is not an auxiliary tree")]
    NotAuxiliary(TreeId),
    #[error("no adjunction site {site} in `{tree}`")]
    InvalidSite { tree: TreeId, site: GornAddress },
    #[error("`{aux}` cannot adjoin at {site} of `{tree}`: label mismatch")]
    LabelMismatch { tree: TreeId, site: GornAddress, aux: TreeId },
    #[error("two adjunctions at {site} of `{tree}`")]
    DuplicateSite { tree: TreeId, site: GornAddress },
    #[error("output leaf under {site} of `{tree}` has no delay adjoined")]
    MissingDelay { tree: TreeId, site: GornAddress },
    #[error("{count} adjunctions exceed the budget of {max}")]
    BudgetExceeded { count: usize, max: usize },
    #[error("no node at the given derivation path")]
    BadPath,
    #[error(transparent)]
    Tag(#[from] TagError),
}
