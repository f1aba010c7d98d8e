use std::collections::HashMap;
use std::fmt;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::expression::{parse_yield, NarxExpression};
use super::grammar::names::OUTPUT;
use super::NarxError;
use crate::tag::{
    adjoin_at_foot, ElementaryTree, GornAddress, Grammar, SyntacticTree, TreeId, TreeKind,
};

/// Child-index path from the derivation root to a node.
pub type NodePath = Vec<usize>;

/// One elementary tree instance in a derivation, adjoined at `site_address`
/// of its parent's elementary tree. Children are kept sorted by site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DerivationNode {
    #[serde(skip)]
    id: u32,
    pub tree_id: TreeId,
    pub site_address: GornAddress,
    pub children: Vec<DerivationNode>,
}

impl DerivationNode {
    fn new(tree_id: TreeId, site_address: GornAddress) -> Self {
        Self { id: 0, tree_id, site_address, children: Vec::new() }
    }

    /// Pre-order index, regenerated whenever the derivation changes.
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(DerivationNode::size).sum::<usize>()
    }

    fn renumber(&mut self, next: &mut u32) {
        self.id = *next;
        *next += 1;
        for c in &mut self.children {
            c.renumber(next);
        }
    }

    fn walk<'a>(&'a self, path: &mut NodePath, out: &mut Vec<(NodePath, &'a DerivationNode)>) {
        out.push((path.clone(), self));
        for (i, c) in self.children.iter().enumerate() {
            path.push(i);
            c.walk(path, out);
            path.pop();
        }
    }

    fn get_mut(&mut self, path: &[usize]) -> Option<&mut DerivationNode> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => self.children.get_mut(i)?.get_mut(rest),
        }
    }

    fn fmt_indented(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        writeln!(f, "{:indent$}{} @ {}", "", self.tree_id, self.site_address, indent = depth * 2)?;
        for c in &self.children {
            c.fmt_indented(f, depth + 1)?;
        }
        Ok(())
    }
}

/// Record of which elementary trees were adjoined where; the genotype of
/// the search. Serializes as nested `{tree_id, site_address, children}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "DerivationNode", into = "DerivationNode")]
pub struct DerivationTree {
    root: DerivationNode,
}

impl From<DerivationNode> for DerivationTree {
    fn from(root: DerivationNode) -> Self {
        let mut d = Self { root };
        d.normalize();
        d
    }
}

impl From<DerivationTree> for DerivationNode {
    fn from(d: DerivationTree) -> Self {
        d.root
    }
}

impl fmt::Display for DerivationTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt_indented(f, 0)
    }
}

impl DerivationTree {
    /// Derivation consisting of the initial tree alone.
    pub fn new(initial: TreeId) -> Self {
        Self { root: DerivationNode::new(initial, GornAddress::root()) }
    }

    pub fn root(&self) -> &DerivationNode {
        &self.root
    }

    pub fn node_count(&self) -> usize {
        self.root.size()
    }

    pub fn adjunction_count(&self) -> usize {
        self.node_count() - 1
    }

    /// All nodes in pre-order with their paths.
    pub fn nodes(&self) -> Vec<(NodePath, &DerivationNode)> {
        let mut out = Vec::with_capacity(self.node_count());
        self.root.walk(&mut Vec::new(), &mut out);
        out
    }

    pub fn get(&self, path: &[usize]) -> Option<&DerivationNode> {
        let mut node = &self.root;
        for &i in path {
            node = node.children.get(i)?;
        }
        Some(node)
    }

    /// Replaces the subtree at a non-root `path`; the replacement keeps the
    /// site address of the node it replaces.
    pub(crate) fn with_subtree(&self, path: &[usize], subtree: &DerivationNode) -> Self {
        let mut out = self.clone();
        let slot = out.root.get_mut(path).expect("path resolves");
        let site = slot.site_address.clone();
        *slot = subtree.clone();
        slot.site_address = site;
        out.normalize();
        out
    }

    pub(crate) fn without_subtree(&self, path: &[usize]) -> Self {
        let (&last, parent) = path.split_last().expect("root cannot be removed");
        let mut out = self.clone();
        out.root.get_mut(parent).expect("path resolves").children.remove(last);
        out.normalize();
        out
    }

    /// Strips every adjunction, keeping the initial tree.
    pub(crate) fn bare(&self) -> Self {
        Self::new(self.root.tree_id.clone())
    }

    fn normalize(&mut self) {
        fn sort(n: &mut DerivationNode) {
            n.children.sort_by(|a, b| a.site_address.cmp(&b.site_address));
            for c in &mut n.children {
                sort(c);
            }
        }
        sort(&mut self.root);
        self.root.renumber(&mut 0);
    }

    fn insert(&self, parent: &[usize], child: DerivationNode) -> (Self, NodePath) {
        let mut out = self.clone();
        let p = out.root.get_mut(parent).expect("path resolves");
        let idx = p.children.partition_point(|c| c.site_address < child.site_address);
        p.children.insert(idx, child);
        out.root.renumber(&mut 0);
        let mut path = parent.to_vec();
        path.push(idx);
        (out, path)
    }
}

/// A legal adjunction: `aux` at `site` of the elementary tree of `node`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Adjunction {
    pub node: NodePath,
    pub site: GornAddress,
    pub aux: TreeId,
}

struct TreeInfo<'g> {
    tree: &'g ElementaryTree,
    /// Internal addresses admitting at least one usable auxiliary tree.
    sites: Vec<(GornAddress, Vec<TreeId>)>,
    /// Parents of output-signal leaves: each must host an adjunction so the
    /// output factor carries a delay.
    delay_sites: Vec<GornAddress>,
}

/// Per-grammar lookup of adjunction sites, shared by validation,
/// compilation and the genetic operators.
pub struct AdjunctionTable<'g> {
    grammar: &'g Grammar,
    info: HashMap<TreeId, TreeInfo<'g>>,
}

impl<'g> AdjunctionTable<'g> {
    pub fn new(grammar: &'g Grammar) -> Self {
        let delay_sites = |et: &ElementaryTree| -> Vec<GornAddress> {
            et.tree
                .nodes()
                .into_iter()
                .filter(|(a, n)| {
                    n.is_leaf()
                        && n.label().is_terminal()
                        && n.label().name() == OUTPUT
                        && Some(a) != et.foot.as_ref()
                })
                .filter_map(|(a, _)| a.parent())
                .collect()
        };
        // An auxiliary tree is usable if each of its delay sites can be
        // filled by a tree that needs no delay itself.
        let usable = |et: &ElementaryTree| -> bool {
            delay_sites(et).iter().all(|s| {
                let label = et.tree.resolve(s).expect("delay site resolves").label();
                grammar.auxiliary_for(label).any(|a| delay_sites(a).is_empty())
            })
        };
        let mut info = HashMap::new();
        for et in grammar.elementary_trees() {
            let sites = et
                .internal_addresses()
                .into_iter()
                .filter_map(|a| {
                    let label = et.tree.resolve(&a).expect("internal address").label();
                    let auxes: Vec<TreeId> = grammar
                        .auxiliary_for(label)
                        .filter(|aux| usable(aux))
                        .map(|aux| aux.id.clone())
                        .collect();
                    (!auxes.is_empty()).then_some((a, auxes))
                })
                .collect();
            info.insert(et.id.clone(), TreeInfo { tree: et, sites, delay_sites: delay_sites(et) });
        }
        Self { grammar, info }
    }

    pub fn grammar(&self) -> &'g Grammar {
        self.grammar
    }

    fn info(&self, id: &TreeId) -> Result<&TreeInfo<'g>, NarxError> {
        self.info.get(id).ok_or_else(|| NarxError::UnknownTreeId(id.clone()))
    }

    /// Adjunctions needed to place `aux` including its forced delays.
    pub fn cost(&self, aux: &TreeId) -> usize {
        self.info.get(aux).map_or(1, |i| 1 + i.delay_sites.len())
    }

    /// Checks every derivation invariant, including the adjunction budget
    /// when `max_adjunctions` is given.
    pub fn validate(&self, d: &DerivationTree, max_adjunctions: Option<usize>) -> Result<(), NarxError> {
        let root = self.info(&d.root.tree_id)?;
        if root.tree.kind != TreeKind::Initial {
            return Err(NarxError::RootNotInitial(d.root.tree_id.clone()));
        }
        self.validate_node(&d.root)?;
        if let Some(max) = max_adjunctions {
            if d.adjunction_count() > max {
                return Err(NarxError::BudgetExceeded { count: d.adjunction_count(), max });
            }
        }
        Ok(())
    }

    fn validate_node(&self, n: &DerivationNode) -> Result<(), NarxError> {
        let info = self.info(&n.tree_id)?;
        for w in n.children.windows(2) {
            if w[0].site_address == w[1].site_address {
                return Err(NarxError::DuplicateSite {
                    tree: n.tree_id.clone(),
                    site: w[1].site_address.clone(),
                });
            }
        }
        for c in &n.children {
            let aux = self.info(&c.tree_id)?;
            if aux.tree.kind != TreeKind::Auxiliary {
                return Err(NarxError::NotAuxiliary(c.tree_id.clone()));
            }
            let site = info
                .tree
                .tree
                .resolve(&c.site_address)
                .ok()
                .filter(|s| !s.is_leaf())
                .ok_or_else(|| NarxError::InvalidSite {
                    tree: n.tree_id.clone(),
                    site: c.site_address.clone(),
                })?;
            if site.label() != aux.tree.root_label() {
                return Err(NarxError::LabelMismatch {
                    tree: n.tree_id.clone(),
                    site: c.site_address.clone(),
                    aux: c.tree_id.clone(),
                });
            }
            self.validate_node(c)?;
        }
        for s in &info.delay_sites {
            if !n.children.iter().any(|c| &c.site_address == s) {
                return Err(NarxError::MissingDelay { tree: n.tree_id.clone(), site: s.clone() });
            }
        }
        Ok(())
    }

    /// Performs the recorded adjunctions bottom-up and returns the derived tree.
    pub fn compile(&self, d: &DerivationTree) -> Result<SyntacticTree, NarxError> {
        Ok(self.compile_node(&d.root)?.0)
    }

    fn compile_node(
        &self,
        n: &DerivationNode,
    ) -> Result<(SyntacticTree, Option<GornAddress>), NarxError> {
        let info = self.info(&n.tree_id)?;
        let mut tree = info.tree.tree.clone();
        let mut foot = info.tree.foot.clone();
        // Descendant sites first, so that ancestor addresses stay valid.
        let mut kids: Vec<&DerivationNode> = n.children.iter().collect();
        kids.sort_by(|a, b| b.site_address.cmp(&a.site_address));
        for k in kids {
            let (sub, sub_foot) = self.compile_node(k)?;
            let sub_foot = sub_foot.ok_or_else(|| NarxError::NotAuxiliary(k.tree_id.clone()))?;
            let site = &k.site_address;
            tree = adjoin_at_foot(&tree, site, &sub, &sub_foot).map_err(|e| match e {
                crate::tag::TagError::LabelMismatch { .. } => NarxError::LabelMismatch {
                    tree: n.tree_id.clone(),
                    site: site.clone(),
                    aux: k.tree_id.clone(),
                },
                _ => NarxError::InvalidSite { tree: n.tree_id.clone(), site: site.clone() },
            })?;
            if let Some(f) = &foot {
                if site.is_prefix_of(f) {
                    let rest = GornAddress::new(f.path()[site.depth()..].to_vec())
                        .expect("suffix of a valid address");
                    foot = Some(site.join(&sub_foot).join(&rest));
                }
            }
        }
        Ok((tree, foot))
    }

    /// Compiles and parses the derived tree's yield.
    pub fn expression(&self, d: &DerivationTree) -> Result<NarxExpression, NarxError> {
        parse_yield(&self.compile(d)?.yield_of())
    }

    /// Free (site, aux) pairs at `scope` and all its descendants, in
    /// pre-order, site order, grammar order.
    pub fn legal_moves(&self, d: &DerivationTree, scope: &[usize]) -> Vec<Adjunction> {
        let mut out = Vec::new();
        for (path, node) in d.nodes() {
            if !path.starts_with(scope) {
                continue;
            }
            let Ok(info) = self.info(&node.tree_id) else { continue };
            for (site, auxes) in &info.sites {
                if node.children.iter().any(|c| &c.site_address == site) {
                    continue;
                }
                for aux in auxes {
                    out.push(Adjunction { node: path.clone(), site: site.clone(), aux: aux.clone() });
                }
            }
        }
        out
    }

    /// Applies one adjunction without forcing delays; returns the path of
    /// the new node.
    pub fn apply(&self, d: &DerivationTree, mv: &Adjunction) -> Result<(DerivationTree, NodePath), NarxError> {
        let node = d.get(&mv.node).ok_or(NarxError::BadPath)?;
        let info = self.info(&node.tree_id)?;
        let legal = info.sites.iter().any(|(s, auxes)| s == &mv.site && auxes.contains(&mv.aux));
        let free = !node.children.iter().any(|c| c.site_address == mv.site);
        if !legal || !free {
            return Err(NarxError::InvalidSite { tree: node.tree_id.clone(), site: mv.site.clone() });
        }
        Ok(d.insert(&mv.node, DerivationNode::new(mv.aux.clone(), mv.site.clone())))
    }

    /// Applies `mv` plus one random delay adjunction for each output factor
    /// the new tree introduces.
    fn apply_causal<R: Rng + ?Sized>(
        &self,
        d: &DerivationTree,
        mv: &Adjunction,
        rng: &mut R,
    ) -> Result<(DerivationTree, NodePath), NarxError> {
        let (mut out, path) = self.apply(d, mv)?;
        let delay_sites = self.info(&mv.aux)?.delay_sites.clone();
        for site in delay_sites {
            let fillers: Vec<&TreeId> = self
                .info(&mv.aux)?
                .sites
                .iter()
                .filter(|(s, _)| s == &site)
                .flat_map(|(_, auxes)| auxes)
                .filter(|a| self.cost(a) == 1)
                .collect();
            let aux = (*fillers.choose(rng).ok_or_else(|| NarxError::InvalidSite {
                tree: mv.aux.clone(),
                site: site.clone(),
            })?)
            .clone();
            out = self.apply(&out, &Adjunction { node: path.clone(), site, aux })?.0;
        }
        Ok((out, path))
    }

    /// Adds up to `adjunctions` random adjunctions inside the subtree at
    /// `scope`. Every step picks uniformly among the affordable legal moves.
    pub fn grow<R: Rng + ?Sized>(
        &self,
        d: &DerivationTree,
        scope: &[usize],
        adjunctions: usize,
        rng: &mut R,
    ) -> DerivationTree {
        let mut out = d.clone();
        let mut remaining = adjunctions;
        while remaining > 0 {
            let moves: Vec<Adjunction> = self
                .legal_moves(&out, scope)
                .into_iter()
                .filter(|m| self.cost(&m.aux) <= remaining)
                .collect();
            let Some(mv) = moves.choose(rng) else { break };
            out = self.apply_causal(&out, mv, rng).expect("legal move applies").0;
            remaining -= self.cost(&mv.aux);
        }
        out
    }

    /// Random derivation with an adjunction target drawn uniformly from
    /// `0..=max_adjunctions`.
    pub fn random<R: Rng + ?Sized>(&self, max_adjunctions: usize, rng: &mut R) -> DerivationTree {
        let initial = self
            .grammar
            .initial_trees
            .iter()
            .filter(|t| self.grammar.start.contains(t.root_label()))
            .collect::<Vec<_>>();
        let initial = initial.choose(rng).copied().unwrap_or(&self.grammar.initial_trees[0]);
        let target = rng.random_range(0..=max_adjunctions);
        self.grow(&DerivationTree::new(initial.id.clone()), &[], target, rng)
    }

    /// Adjoins a fresh random subtree at `site` of the node at `parent`,
    /// using at most `budget` adjunctions in total. Returns `d` unchanged when
    /// nothing fits.
    pub(crate) fn grow_at<R: Rng + ?Sized>(
        &self,
        d: &DerivationTree,
        parent: &[usize],
        site: &GornAddress,
        budget: usize,
        rng: &mut R,
    ) -> DerivationTree {
        let moves: Vec<Adjunction> = self
            .legal_moves(d, parent)
            .into_iter()
            .filter(|m| m.node == parent && &m.site == site && self.cost(&m.aux) <= budget)
            .collect();
        let Some(mv) = moves.choose(rng) else { return d.clone() };
        let (out, path) = self.apply_causal(d, mv, rng).expect("legal move applies");
        self.grow(&out, &path, budget - self.cost(&mv.aux), rng)
    }

    /// Whether the node at `path` fills a delay site its parent requires.
    pub fn is_mandatory(&self, d: &DerivationTree, path: &[usize]) -> bool {
        let Some((_, parent)) = path.split_last() else { return false };
        let (Some(node), Some(parent)) = (d.get(path), d.get(parent)) else { return false };
        self.info
            .get(&parent.tree_id)
            .is_some_and(|i| i.delay_sites.contains(&node.site_address))
    }

    /// Removes the deepest removable adjunctions until the budget holds.
    /// A mandatory delay leaf is removed together with its parent.
    pub fn prune_to_budget(&self, d: &DerivationTree, max_adjunctions: usize) -> DerivationTree {
        let mut out = d.clone();
        while out.adjunction_count() > max_adjunctions {
            let candidate = out
                .nodes()
                .into_iter()
                .filter(|(path, node)| {
                    if path.is_empty() {
                        return false;
                    }
                    if node.children.is_empty() {
                        return !self.is_mandatory(&out, path);
                    }
                    node.children.iter().enumerate().all(|(i, c)| {
                        let mut cp = path.clone();
                        cp.push(i);
                        c.children.is_empty() && self.is_mandatory(&out, &cp)
                    })
                })
                .map(|(path, _)| path)
                .max_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
            match candidate {
                Some(path) => out = out.without_subtree(&path),
                None => return out.bare(),
            }
        }
        out
    }
}

/// Validates `d` against `g`; see [`AdjunctionTable::validate`].
pub fn validate_derivation(
    d: &DerivationTree,
    g: &Grammar,
    max_adjunctions: Option<usize>,
) -> Result<(), NarxError> {
    AdjunctionTable::new(g).validate(d, max_adjunctions)
}

/// Derived tree of `d` under `g`.
pub fn compile(d: &DerivationTree, g: &Grammar) -> Result<SyntacticTree, NarxError> {
    AdjunctionTable::new(g).compile(d)
}

/// Random valid derivation; see [`AdjunctionTable::random`].
pub fn random_derivation<R: Rng + ?Sized>(g: &Grammar, max_adjunctions: usize, rng: &mut R) -> DerivationTree {
    AdjunctionTable::new(g).random(max_adjunctions, rng)
}
