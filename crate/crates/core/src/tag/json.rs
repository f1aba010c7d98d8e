//! JSON form of a grammar: each elementary tree is a flat array of node
//! records `{address, label, kind}`, auxiliary trees add a `foot` address.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    ElementaryTree, GornAddress, Grammar, Symbol, SymbolKind, SyntacticTree, TagError, TreeId,
    TreeKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub address: GornAddress,
    pub label: String,
    pub kind: SymbolKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub id: String,
    pub nodes: Vec<NodeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foot: Option<GornAddress>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarDocument {
    pub nonterminals: Vec<String>,
    pub terminals: Vec<String>,
    pub start: Vec<String>,
    pub initial_trees: Vec<TreeDocument>,
    pub auxiliary_trees: Vec<TreeDocument>,
}

impl TreeDocument {
    fn from_tree(et: &ElementaryTree) -> Self {
        let nodes = et
            .tree
            .nodes()
            .into_iter()
            .map(|(address, n)| NodeRecord {
                address,
                label: n.label().name().to_string(),
                kind: n.label().kind(),
            })
            .collect();
        Self { id: et.id.to_string(), nodes, foot: et.foot.clone() }
    }

    fn to_tree(&self, kind: TreeKind) -> Result<ElementaryTree, TagError> {
        let mut by_addr: BTreeMap<&GornAddress, &NodeRecord> = BTreeMap::new();
        for rec in &self.nodes {
            if by_addr.insert(&rec.address, rec).is_some() {
                return Err(TagError::MalformedRecords(format!(
                    "tree `{}`: duplicate address {}",
                    self.id, rec.address
                )));
            }
        }
        let tree = build(&by_addr, &GornAddress::root(), &self.id)?;
        if tree.size() != by_addr.len() {
            return Err(TagError::MalformedRecords(format!(
                "tree `{}`: {} records but only {} reachable from the root",
                self.id,
                by_addr.len(),
                tree.size()
            )));
        }
        Ok(ElementaryTree { id: TreeId::new(&self.id), kind, tree, foot: self.foot.clone() })
    }
}

fn build(
    by_addr: &BTreeMap<&GornAddress, &NodeRecord>,
    at: &GornAddress,
    id: &str,
) -> Result<SyntacticTree, TagError> {
    let rec = by_addr
        .get(at)
        .ok_or_else(|| TagError::MalformedRecords(format!("tree `{id}`: missing node {at}")))?;
    let label = Symbol::new(&rec.label, rec.kind)?;
    let mut children = Vec::new();
    let mut i = 1;
    loop {
        let child = at.child(i);
        if !by_addr.contains_key(&child) {
            break;
        }
        children.push(build(by_addr, &child, id)?);
        i += 1;
    }
    SyntacticTree::node(label, children)
}

fn symbols(names: &[String], kind: SymbolKind) -> Result<Vec<Symbol>, TagError> {
    names.iter().map(|n| Symbol::new(n, kind)).collect()
}

impl GrammarDocument {
    pub fn from_grammar(g: &Grammar) -> Self {
        let names = |set: &std::collections::BTreeSet<Symbol>| {
            set.iter().map(|s| s.name().to_string()).collect()
        };
        Self {
            nonterminals: names(&g.nonterminals),
            terminals: names(&g.terminals),
            start: names(&g.start),
            initial_trees: g.initial_trees.iter().map(TreeDocument::from_tree).collect(),
            auxiliary_trees: g.auxiliary_trees.iter().map(TreeDocument::from_tree).collect(),
        }
    }

    /// Structural decoding only; clause violations are left for
    /// [`Grammar::validate`].
    pub fn into_grammar(&self) -> Result<Grammar, TagError> {
        Ok(Grammar {
            nonterminals: symbols(&self.nonterminals, SymbolKind::Nonterminal)?.into_iter().collect(),
            terminals: symbols(&self.terminals, SymbolKind::Terminal)?.into_iter().collect(),
            start: symbols(&self.start, SymbolKind::Nonterminal)?.into_iter().collect(),
            initial_trees: self
                .initial_trees
                .iter()
                .map(|t| t.to_tree(TreeKind::Initial))
                .collect::<Result<_, _>>()?,
            auxiliary_trees: self
                .auxiliary_trees
                .iter()
                .map(|t| t.to_tree(TreeKind::Auxiliary))
                .collect::<Result<_, _>>()?,
        })
    }
}

impl Grammar {
    pub fn from_json(s: &str) -> Result<Self, TagError> {
        let doc: GrammarDocument =
            serde_json::from_str(s).map_err(|e| TagError::Json(e.to_string()))?;
        doc.into_grammar()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GrammarDocument::from_grammar(self))
            .expect("grammar document serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_rebuild_tree() {
        let doc = TreeDocument {
            id: "b".into(),
            nodes: vec![
                NodeRecord { address: "ε".parse().unwrap(), label: "S".into(), kind: SymbolKind::Nonterminal },
                NodeRecord { address: "2".parse().unwrap(), label: "d".into(), kind: SymbolKind::Terminal },
                NodeRecord { address: "1".parse().unwrap(), label: "S".into(), kind: SymbolKind::Nonterminal },
            ],
            foot: Some("1".parse().unwrap()),
        };
        let et = doc.to_tree(TreeKind::Auxiliary).unwrap();
        assert_eq!(et.tree.to_string(), "S(S d)");
    }

    #[test]
    fn gaps_and_orphans_are_rejected() {
        let doc = TreeDocument {
            id: "b".into(),
            nodes: vec![
                NodeRecord { address: "ε".parse().unwrap(), label: "S".into(), kind: SymbolKind::Nonterminal },
                NodeRecord { address: "2".parse().unwrap(), label: "d".into(), kind: SymbolKind::Terminal },
            ],
            foot: None,
        };
        assert!(matches!(doc.to_tree(TreeKind::Initial), Err(TagError::MalformedRecords(_))));
    }
}
