use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TagError;

/// Path of 1-based child indices from the root; the empty path is the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GornAddress(Vec<usize>);

impl GornAddress {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn new(path: Vec<usize>) -> Result<Self, TagError> {
        if path.contains(&0) {
            return Err(TagError::ZeroGornIndex);
        }
        Ok(Self(path))
    }

    pub fn path(&self) -> &[usize] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// Address of the `index`-th child (1-based).
    pub fn child(&self, index: usize) -> Self {
        assert!(index > 0, "Gorn indices are 1-based");
        let mut path = self.0.clone();
        path.push(index);
        Self(path)
    }

    pub fn parent(&self) -> Option<Self> {
        let (_, init) = self.0.split_last()?;
        Some(Self(init.to_vec()))
    }

    pub fn is_prefix_of(&self, other: &GornAddress) -> bool {
        other.0.starts_with(&self.0)
    }

    /// `self` followed by `suffix`.
    pub fn join(&self, suffix: &GornAddress) -> Self {
        let mut path = self.0.clone();
        path.extend_from_slice(&suffix.0);
        Self(path)
    }
}

impl TryFrom<Vec<usize>> for GornAddress {
    type Error = TagError;

    fn try_from(path: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(path)
    }
}

impl From<GornAddress> for Vec<usize> {
    fn from(a: GornAddress) -> Self {
        a.0
    }
}

impl fmt::Display for GornAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for (i, idx) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{idx}")?;
        }
        Ok(())
    }
}

impl FromStr for GornAddress {
    type Err = TagError;

    /// Accepts `ε`, the empty string, or dot-separated positive indices.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "ε" {
            return Ok(Self::root());
        }
        let path = s
            .split('.')
            .map(|p| p.parse::<usize>().map_err(|_| TagError::BadGornAddress(s.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(path)
    }
}
