use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{GornAddress, Symbol, SymbolKind, SyntacticTree, TagError};

/// Stable identifier of an elementary tree, e.g. `beta3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreeId(Arc<str>);

impl TreeId {
    pub fn new(id: &str) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for TreeId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

impl fmt::Display for TreeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    Initial,
    Auxiliary,
}

/// An initial or auxiliary tree. Construction does not check the
/// elementary-tree clauses; [`Grammar::validate`] reports them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementaryTree {
    pub id: TreeId,
    pub kind: TreeKind,
    pub tree: SyntacticTree,
    pub foot: Option<GornAddress>,
}

impl ElementaryTree {
    pub fn initial(id: &str, tree: SyntacticTree) -> Self {
        Self { id: TreeId::new(id), kind: TreeKind::Initial, tree, foot: None }
    }

    pub fn auxiliary(id: &str, tree: SyntacticTree, foot: GornAddress) -> Self {
        Self { id: TreeId::new(id), kind: TreeKind::Auxiliary, tree, foot: Some(foot) }
    }

    pub fn root_label(&self) -> &Symbol {
        self.tree.label()
    }

    /// Addresses of internal nodes, in pre-order.
    pub fn internal_addresses(&self) -> Vec<GornAddress> {
        self.tree
            .nodes()
            .into_iter()
            .filter(|(_, n)| !n.is_leaf())
            .map(|(a, _)| a)
            .collect()
    }

    fn violations(&self, out: &mut Vec<Violation>) {
        let mut push = |kind: ViolationKind, detail: String| {
            out.push(Violation { tree: Some(self.id.clone()), kind, detail })
        };
        let root = self.root_label();
        if root.is_terminal() {
            push(ViolationKind::TerminalRoot, format!("root `{root}` is terminal"));
        }
        for (addr, node) in self.tree.nodes() {
            if !node.is_leaf() && node.label().is_terminal() {
                push(
                    ViolationKind::TerminalInternalNode,
                    format!("internal node {addr} labeled with terminal `{}`", node.label()),
                );
            }
        }
        let root_labeled_leaves: Vec<GornAddress> = self
            .tree
            .nodes()
            .into_iter()
            .filter(|(a, n)| !a.is_root() && n.is_leaf() && n.label() == root)
            .map(|(a, _)| a)
            .collect();
        match self.kind {
            TreeKind::Initial => {
                if self.foot.is_some() {
                    push(ViolationKind::InitialWithFoot, "initial tree declares a foot".into());
                }
                for a in root_labeled_leaves {
                    push(
                        ViolationKind::InitialLeafLabeledAsRoot,
                        format!("leaf {a} of initial tree carries the root label `{root}`"),
                    );
                }
            }
            TreeKind::Auxiliary => {
                let Some(foot) = &self.foot else {
                    push(ViolationKind::MissingFoot, "auxiliary tree has no foot".into());
                    return;
                };
                match self.tree.resolve(foot) {
                    Err(_) => push(
                        ViolationKind::FootNotLeaf,
                        format!("foot address {foot} does not resolve"),
                    ),
                    Ok(node) if !node.is_leaf() || foot.is_root() => push(
                        ViolationKind::FootNotLeaf,
                        format!("foot {foot} is not a leaf"),
                    ),
                    Ok(node) if node.label() != root => push(
                        ViolationKind::FootRootLabelMismatch,
                        format!(
                            "foot/root label mismatch: foot `{}`, root `{root}`",
                            node.label()
                        ),
                    ),
                    Ok(_) => {
                        if root_labeled_leaves.len() > 1 {
                            push(
                                ViolationKind::AmbiguousFoot,
                                format!(
                                    "{} leaves carry the root label `{root}`",
                                    root_labeled_leaves.len()
                                ),
                            );
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    AlphabetOverlap,
    WrongKindInAlphabet,
    StartNotNonterminal,
    UnknownLabel,
    DuplicateTreeId,
    TerminalRoot,
    TerminalInternalNode,
    InitialWithFoot,
    InitialLeafLabeledAsRoot,
    MissingFoot,
    FootNotLeaf,
    FootRootLabelMismatch,
    AmbiguousFoot,
    KindMismatch,
}

/// One breached grammar clause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub tree: Option<TreeId>,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.tree {
            Some(id) => write!(f, "[{id}] {}", self.detail),
            None => f.write_str(&self.detail),
        }
    }
}

/// A Tree Adjoining Grammar ⟨N, T, S, I, A⟩.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    pub nonterminals: BTreeSet<Symbol>,
    pub terminals: BTreeSet<Symbol>,
    pub start: BTreeSet<Symbol>,
    pub initial_trees: Vec<ElementaryTree>,
    pub auxiliary_trees: Vec<ElementaryTree>,
}

impl Grammar {
    pub fn elementary_trees(&self) -> impl Iterator<Item = &ElementaryTree> {
        self.initial_trees.iter().chain(&self.auxiliary_trees)
    }

    pub fn tree(&self, id: &TreeId) -> Option<&ElementaryTree> {
        self.elementary_trees().find(|t| &t.id == id)
    }

    /// Auxiliary trees whose root carries `label`.
    pub fn auxiliary_for<'a>(&'a self, label: &'a Symbol) -> impl Iterator<Item = &'a ElementaryTree> {
        self.auxiliary_trees.iter().filter(move |t| t.root_label() == label)
    }

    pub fn symbol(&self, name: &str) -> Option<&Symbol> {
        self.nonterminals.iter().chain(&self.terminals).find(|s| s.name() == name)
    }

    /// Every breached clause of the grammar and elementary-tree definitions;
    /// empty iff the grammar is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let global = |kind, detail: String| Violation { tree: None, kind, detail };

        let nt_names: HashSet<&str> = self.nonterminals.iter().map(Symbol::name).collect();
        for t in &self.terminals {
            if nt_names.contains(t.name()) {
                out.push(global(
                    ViolationKind::AlphabetOverlap,
                    format!("`{t}` is both terminal and nonterminal"),
                ));
            }
            if !t.is_terminal() {
                out.push(global(
                    ViolationKind::WrongKindInAlphabet,
                    format!("`{t}` listed as terminal but has nonterminal kind"),
                ));
            }
        }
        for n in &self.nonterminals {
            if n.kind() != SymbolKind::Nonterminal {
                out.push(global(
                    ViolationKind::WrongKindInAlphabet,
                    format!("`{n}` listed as nonterminal but has terminal kind"),
                ));
            }
        }
        for s in &self.start {
            if !self.nonterminals.contains(s) {
                out.push(global(
                    ViolationKind::StartNotNonterminal,
                    format!("start symbol `{s}` is not a nonterminal of the grammar"),
                ));
            }
        }

        let mut seen = HashSet::new();
        for (expected, trees) in
            [(TreeKind::Initial, &self.initial_trees), (TreeKind::Auxiliary, &self.auxiliary_trees)]
        {
            for et in trees {
                if !seen.insert(et.id.clone()) {
                    out.push(Violation {
                        tree: Some(et.id.clone()),
                        kind: ViolationKind::DuplicateTreeId,
                        detail: format!("tree id `{}` used more than once", et.id),
                    });
                }
                if et.kind != expected {
                    out.push(Violation {
                        tree: Some(et.id.clone()),
                        kind: ViolationKind::KindMismatch,
                        detail: format!("tree listed as {expected:?} but declared {:?}", et.kind),
                    });
                }
                for (addr, node) in et.tree.nodes() {
                    let l = node.label();
                    if !self.nonterminals.contains(l) && !self.terminals.contains(l) {
                        out.push(Violation {
                            tree: Some(et.id.clone()),
                            kind: ViolationKind::UnknownLabel,
                            detail: format!("label `{l}` at {addr} is not in N ∪ T"),
                        });
                    }
                }
                et.violations(&mut out);
            }
        }
        out
    }
}

/// Replaces the leaf at `leaf_at` by a copy of the initial tree `initial`.
pub fn substitute(
    host: &SyntacticTree,
    leaf_at: &GornAddress,
    initial: &ElementaryTree,
) -> Result<SyntacticTree, TagError> {
    if initial.kind != TreeKind::Initial {
        return Err(TagError::NotAnInitialTree(initial.id.clone()));
    }
    let leaf = host.resolve(leaf_at)?;
    if !leaf.is_leaf() {
        return Err(TagError::NotALeaf(leaf_at.clone()));
    }
    if leaf.label() != initial.root_label() {
        return Err(TagError::LabelMismatch {
            site: leaf.label().clone(),
            root: initial.root_label().clone(),
        });
    }
    host.replace_at(leaf_at, initial.tree.clone())
}

/// Adjoins `aux` at the internal node `at`: the subtree rooted there is
/// detached, substituted at the foot of a copy of `aux`, and the result is
/// put back in its place.
pub fn adjoin(
    host: &SyntacticTree,
    at: &GornAddress,
    aux: &ElementaryTree,
) -> Result<SyntacticTree, TagError> {
    let foot = match (&aux.kind, &aux.foot) {
        (TreeKind::Auxiliary, Some(foot)) => foot,
        _ => return Err(TagError::NotAnAuxiliaryTree(aux.id.clone())),
    };
    let detached = host.resolve(at)?;
    if detached.is_leaf() {
        return Err(TagError::NotInternal(at.clone()));
    }
    if detached.label() != aux.root_label() {
        return Err(TagError::LabelMismatch {
            site: detached.label().clone(),
            root: aux.root_label().clone(),
        });
    }
    adjoin_at_foot(host, at, &aux.tree, foot)
}

/// Adjunction of an already derived auxiliary tree whose foot sits at `foot`.
/// Only the site/foot label agreement is checked.
pub(crate) fn adjoin_at_foot(
    host: &SyntacticTree,
    at: &GornAddress,
    aux: &SyntacticTree,
    foot: &GornAddress,
) -> Result<SyntacticTree, TagError> {
    let detached = host.resolve(at)?;
    if detached.is_leaf() {
        return Err(TagError::NotInternal(at.clone()));
    }
    let foot_label = aux.resolve(foot)?.label();
    if foot_label != detached.label() {
        return Err(TagError::LabelMismatch {
            site: detached.label().clone(),
            root: foot_label.clone(),
        });
    }
    let wrapped = aux.replace_at(foot, detached.clone())?;
    host.replace_at(at, wrapped)
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
    fn leaf(s: Symbol) -> SyntacticTree {
        SyntacticTree::leaf(s)
    }
    fn node(s: Symbol, c: Vec<SyntacticTree>) -> SyntacticTree {
        SyntacticTree::node(s, c).unwrap()
    }
    fn addr(p: &[usize]) -> GornAddress {
        GornAddress::new(p.to_vec()).unwrap()
    }

    // S(a X)  with initial X(b c)
    fn host_with_subst_site() -> SyntacticTree {
        node(nt("S"), vec![leaf(t("a")), leaf(nt("X"))])
    }

    fn initial_x() -> ElementaryTree {
        ElementaryTree::initial("x", node(nt("X"), vec![leaf(t("b")), leaf(t("c"))]))
    }

    // S(S* d)
    fn aux_s() -> ElementaryTree {
        ElementaryTree::auxiliary("s", node(nt("S"), vec![leaf(nt("S")), leaf(t("d"))]), addr(&[1]))
    }

    #[test]
    fn substitution_adds_initial_minus_one_nodes() {
        let host = host_with_subst_site();
        let init = initial_x();
        let out = substitute(&host, &addr(&[2]), &init).unwrap();
        assert_eq!(out.size(), host.size() + init.tree.size() - 1);
        assert_eq!(out.yield_of(), vec![t("a"), t("b"), t("c")]);
        assert!(out.is_saturated());
    }

    #[test]
    fn substitution_errors() {
        let host = host_with_subst_site();
        let other = ElementaryTree::initial("y", node(nt("Y"), vec![leaf(t("b"))]));
        assert!(matches!(
            substitute(&host, &addr(&[2]), &other),
            Err(TagError::LabelMismatch { .. })
        ));
        assert_eq!(
            substitute(&host, &GornAddress::root(), &initial_x()),
            Err(TagError::NotALeaf(GornAddress::root()))
        );
        assert!(matches!(
            substitute(&host, &addr(&[2]), &aux_s()),
            Err(TagError::NotAnInitialTree(_))
        ));
    }

    #[test]
    fn adjunction_wraps_subtree_at_foot() {
        let host = node(nt("S"), vec![leaf(t("a")), node(nt("S"), vec![leaf(t("e"))])]);
        let aux = aux_s();
        let out = adjoin(&host, &addr(&[2]), &aux).unwrap();
        assert_eq!(out.size(), host.size() + aux.tree.size() - 1);
        assert_eq!(out.yield_of(), vec![t("a"), t("e"), t("d")]);
        let at_root = adjoin(&host, &GornAddress::root(), &aux).unwrap();
        assert_eq!(at_root.yield_of(), vec![t("a"), t("e"), t("d")]);
        assert_eq!(at_root.children()[0], host);
    }

    #[test]
    fn adjunction_errors() {
        let host = node(nt("S"), vec![leaf(t("a")), leaf(nt("S"))]);
        assert_eq!(adjoin(&host, &addr(&[2]), &aux_s()), Err(TagError::NotInternal(addr(&[2]))));
        assert!(matches!(
            adjoin(&host, &GornAddress::root(), &initial_x()),
            Err(TagError::NotAnAuxiliaryTree(_))
        ));
        let other = ElementaryTree::auxiliary(
            "z",
            node(nt("Z"), vec![leaf(nt("Z")), leaf(t("d"))]),
            addr(&[1]),
        );
        assert!(matches!(
            adjoin(&host, &GornAddress::root(), &other),
            Err(TagError::LabelMismatch { .. })
        ));
    }

    fn tiny_grammar(aux: ElementaryTree, init: ElementaryTree) -> Grammar {
        Grammar {
            nonterminals: [nt("S"), nt("X")].into_iter().collect(),
            terminals: [t("a"), t("b"), t("c"), t("d")].into_iter().collect(),
            start: [nt("S")].into_iter().collect(),
            initial_trees: vec![init],
            auxiliary_trees: vec![aux],
        }
    }

    #[test]
    fn validate_reports_each_clause() {
        let ok = tiny_grammar(aux_s(), initial_x());
        assert!(ok.validate().is_empty(), "{:?}", ok.validate());

        let bad_foot = ElementaryTree::auxiliary(
            "s",
            node(nt("S"), vec![leaf(nt("X")), leaf(t("d"))]),
            addr(&[1]),
        );
        let v = tiny_grammar(bad_foot, initial_x()).validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::FootRootLabelMismatch);
        assert!(v[0].detail.contains("foot/root label mismatch"));

        let bad_init =
            ElementaryTree::initial("x", node(nt("X"), vec![leaf(t("b")), leaf(nt("X"))]));
        let v = tiny_grammar(aux_s(), bad_init).validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::InitialLeafLabeledAsRoot);

        let mut g = tiny_grammar(aux_s(), initial_x());
        g.start.insert(nt("Q"));
        g.terminals.insert(t("S"));
        let kinds: Vec<_> = g.validate().into_iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::StartNotNonterminal));
        assert!(kinds.contains(&ViolationKind::AlphabetOverlap));
    }
}
