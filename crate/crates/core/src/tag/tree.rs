use std::fmt;
use std::sync::Arc;

use super::{GornAddress, Symbol, TagError};

/// Immutable labeled ordered tree.
///
/// Cloning is O(1); edits rebuild only the spine from the root to the edited
/// node and share every other subtree.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SyntacticTree(Arc<Node>);

#[derive(PartialEq, Eq, Hash)]
struct Node {
    label: Symbol,
    children: Vec<SyntacticTree>,
    size: usize,
}

impl SyntacticTree {
    /// Single-node tree. Any label is allowed; use [`SyntacticTree::rooted`]
    /// for a standalone tree whose root must be a nonterminal.
    pub fn leaf(label: Symbol) -> Self {
        Self(Arc::new(Node { label, children: Vec::new(), size: 1 }))
    }

    /// Node with the given children. Internal nodes must carry nonterminals.
    pub fn node(label: Symbol, children: Vec<SyntacticTree>) -> Result<Self, TagError> {
        if !children.is_empty() && label.is_terminal() {
            return Err(TagError::TerminalInternal(label));
        }
        let size = 1 + children.iter().map(SyntacticTree::size).sum::<usize>();
        Ok(Self(Arc::new(Node { label, children, size })))
    }

    /// Like [`SyntacticTree::node`] but also rejects a terminal root.
    pub fn rooted(label: Symbol, children: Vec<SyntacticTree>) -> Result<Self, TagError> {
        if label.is_terminal() {
            return Err(TagError::TerminalRoot(label));
        }
        Self::node(label, children)
    }

    pub fn label(&self) -> &Symbol {
        &self.0.label
    }

    pub fn children(&self) -> &[SyntacticTree] {
        &self.0.children
    }

    pub fn is_leaf(&self) -> bool {
        self.0.children.is_empty()
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        self.0.size
    }

    pub fn resolve(&self, address: &GornAddress) -> Result<&SyntacticTree, TagError> {
        let mut node = self;
        for &idx in address.path() {
            node = node
                .children()
                .get(idx - 1)
                .ok_or_else(|| TagError::NotFound(address.clone()))?;
        }
        Ok(node)
    }

    /// Returns a tree with the subtree at `address` replaced by `replacement`.
    pub fn replace_at(
        &self,
        address: &GornAddress,
        replacement: SyntacticTree,
    ) -> Result<SyntacticTree, TagError> {
        self.replace_path(address.path(), replacement)
            .ok_or_else(|| TagError::NotFound(address.clone()))
    }

    fn replace_path(&self, path: &[usize], replacement: SyntacticTree) -> Option<SyntacticTree> {
        let Some((&first, rest)) = path.split_first() else {
            return Some(replacement);
        };
        let child = self.children().get(first.checked_sub(1)?)?;
        let new_child = child.replace_path(rest, replacement)?;
        let mut children = self.children().to_vec();
        children[first - 1] = new_child;
        let size = 1 + children.iter().map(SyntacticTree::size).sum::<usize>();
        Some(Self(Arc::new(Node { label: self.label().clone(), children, size })))
    }

    /// Left-to-right leaf labels.
    pub fn yield_of(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<Symbol>) {
        if self.is_leaf() {
            out.push(self.label().clone());
        } else {
            for c in self.children() {
                c.collect_leaves(out);
            }
        }
    }

    /// True iff every leaf is labeled with a terminal.
    pub fn is_saturated(&self) -> bool {
        if self.is_leaf() {
            self.label().is_terminal()
        } else {
            self.children().iter().all(SyntacticTree::is_saturated)
        }
    }

    /// Pre-order walk yielding every node with its address.
    pub fn nodes(&self) -> Vec<(GornAddress, &SyntacticTree)> {
        let mut out = Vec::with_capacity(self.size());
        self.walk(GornAddress::root(), &mut out);
        out
    }

    fn walk<'a>(&'a self, at: GornAddress, out: &mut Vec<(GornAddress, &'a SyntacticTree)>) {
        out.push((at.clone(), self));
        for (i, c) in self.children().iter().enumerate() {
            c.walk(at.child(i + 1), out);
        }
    }
}

impl fmt::Debug for SyntacticTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Bracketed form, e.g. `expr0(aff(ξ))`.
impl fmt::Display for SyntacticTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())?;
        if !self.is_leaf() {
            f.write_str("(")?;
            for (i, c) in self.children().iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nt(n: &str) -> Symbol {
        Symbol::nonterminal(n)
    }
    fn t(n: &str) -> Symbol {
        Symbol::terminal(n)
    }
    fn addr(p: &[usize]) -> GornAddress {
        GornAddress::new(p.to_vec()).unwrap()
    }

    fn two_children() -> SyntacticTree {
        SyntacticTree::rooted(nt("S"), vec![SyntacticTree::leaf(t("a")), SyntacticTree::leaf(nt("B"))])
            .unwrap()
    }

    #[test]
    fn resolve_examples() {
        let tree = two_children();
        assert_eq!(tree.resolve(&GornAddress::root()).unwrap(), &tree);
        assert_eq!(tree.resolve(&addr(&[2])).unwrap().label(), &nt("B"));
        assert_eq!(tree.resolve(&addr(&[3])), Err(TagError::NotFound(addr(&[3]))));
        assert!(tree.resolve(&addr(&[1, 1])).is_err());
    }

    #[test]
    fn terminal_labels_cannot_be_internal_or_root() {
        assert!(matches!(
            SyntacticTree::node(t("a"), vec![SyntacticTree::leaf(t("b"))]),
            Err(TagError::TerminalInternal(_))
        ));
        assert!(matches!(SyntacticTree::rooted(t("a"), vec![]), Err(TagError::TerminalRoot(_))));
    }

    #[test]
    fn yield_and_saturation() {
        let tree = two_children();
        assert_eq!(tree.yield_of(), vec![t("a"), nt("B")]);
        assert!(!tree.is_saturated());
        let single = SyntacticTree::rooted(nt("X"), vec![]).unwrap();
        assert_eq!(single.yield_of(), vec![nt("X")]);
        assert_eq!(single.size(), 1);
    }

    #[test]
    fn replace_shares_and_does_not_mutate() {
        let tree = two_children();
        let before = tree.clone();
        let new = tree.replace_at(&addr(&[2]), SyntacticTree::leaf(t("b"))).unwrap();
        assert_eq!(tree, before);
        assert!(new.is_saturated());
        assert_eq!(new.size(), 3);
        assert!(Arc::ptr_eq(&tree.children()[0].0, &new.children()[0].0));
    }

    #[test]
    fn preorder_addresses() {
        let tree = two_children();
        let addrs: Vec<String> = tree.nodes().iter().map(|(a, _)| a.to_string()).collect();
        assert_eq!(addrs, vec!["ε", "1", "2"]);
    }
}
