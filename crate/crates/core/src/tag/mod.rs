//! Tree Adjoining Grammar engine.
//!
//! Labeled ordered trees with Gorn addressing, elementary trees, grammars,
//! and the substitution and adjunction operations. All values are immutable;
//! operations return new trees that share unchanged subtrees with their
//! inputs.

mod gorn;
mod grammar;
mod json;
mod symbol;
mod tree;

pub use gorn::GornAddress;
pub(crate) use grammar::adjoin_at_foot;
pub use grammar::{
    adjoin, substitute, ElementaryTree, Grammar, TreeId, TreeKind, Violation, ViolationKind,
};
pub use json::{GrammarDocument, NodeRecord, TreeDocument};
pub use symbol::{Symbol, SymbolKind};
pub use tree::SyntacticTree;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagError {
    #[error("symbol name must be nonempty")]
    EmptySymbolName,
    #[error("Gorn address indices are 1-based, got 0")]
    ZeroGornIndex,
    #[error("invalid Gorn address `{0}`")]
    BadGornAddress(String),
    #[error("no node at address {0}")]
    NotFound(GornAddress),
    #[error("terminal `{0}` cannot label an internal node")]
    TerminalInternal(Symbol),
    #[error("terminal `{0}` cannot label the root of a syntactic tree")]
    TerminalRoot(Symbol),
    #[error("label mismatch: site is `{site}`, tree root is `{root}`")]
    LabelMismatch { site: Symbol, root: Symbol },
    #[error("node at {0} is not a leaf")]
    NotALeaf(GornAddress),
    #[error("node at {0} is not internal")]
    NotInternal(GornAddress),
    #[error("tree `{0}` is not an initial tree")]
    NotAnInitialTree(TreeId),
    #[error("tree `{0}` is not an auxiliary tree")]
    NotAnAuxiliaryTree(TreeId),
    #[error("malformed tree records: {0}")]
    MalformedRecords(String),
    #[error("grammar JSON: {0}")]
    Json(String),
}
