use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::TagError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Terminal,
    Nonterminal,
}

/// A grammar symbol. Two symbols are equal iff name and kind agree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    name: Arc<str>,
    kind: SymbolKind,
}

impl Symbol {
    pub fn new(name: &str, kind: SymbolKind) -> Result<Self, TagError> {
        if name.is_empty() {
            return Err(TagError::EmptySymbolName);
        }
        Ok(Self { name: name.into(), kind })
    }

    /// Panics on an empty name.
    pub fn terminal(name: &str) -> Self {
        Self::new(name, SymbolKind::Terminal).expect("nonempty terminal name")
    }

    /// Panics on an empty name.
    pub fn nonterminal(name: &str) -> Self {
        Self::new(name, SymbolKind::Nonterminal).expect("nonempty nonterminal name")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn is_terminal(&self) -> bool {
        self.kind == SymbolKind::Terminal
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}
