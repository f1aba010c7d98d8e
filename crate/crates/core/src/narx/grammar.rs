use std::collections::BTreeSet;

use crate::tag::{ElementaryTree, GornAddress, Grammar, Symbol, SyntacticTree, TreeId};

use super::NarxError;

/// Symbol names of the NARX grammar.
pub mod names {
    pub const EXPR0: &str = "expr0";
    pub const EXPR1: &str = "expr1";
    pub const EXPR2: &str = "expr2";
    pub const OP: &str = "op";
    pub const AFF: &str = "aff";
    pub const PAR: &str = "par";

    pub const INPUT: &str = "u";
    pub const OUTPUT: &str = "y";
    pub const NOISE: &str = "ξ";
    pub const COEFF: &str = "c";
    pub const PLUS: &str = "+";
    pub const TIMES: &str = "×";
    pub const DELAY: &str = "q⁻¹";

    pub const ALPHA1: &str = "alpha1";
    pub const BETA1: &str = "beta1";
    pub const BETA2: &str = "beta2";
    pub const BETA3: &str = "beta3";
    pub const BETA4: &str = "beta4";
    pub const BETA5: &str = "beta5";
}

use names::*;

fn nt(n: &str) -> Symbol {
    Symbol::nonterminal(n)
}

fn t(n: &str) -> Symbol {
    Symbol::terminal(n)
}

fn leaf(s: Symbol) -> SyntacticTree {
    SyntacticTree::leaf(s)
}

fn node(s: Symbol, children: Vec<SyntacticTree>) -> SyntacticTree {
    SyntacticTree::node(s, children).expect("NARX trees only use nonterminal internal nodes")
}

fn unary(parent: &str, child: &str) -> SyntacticTree {
    node(nt(parent), vec![leaf(t(child))])
}

fn foot(path: &[usize]) -> GornAddress {
    GornAddress::new(path.to_vec()).expect("1-based foot address")
}

// expr0(expr0* op(+) expr1(par(c) op(×) expr2(signal)))
fn new_term(id: &str, signal: &str) -> ElementaryTree {
    let tree = node(
        nt(EXPR0),
        vec![
            leaf(nt(EXPR0)),
            unary(OP, PLUS),
            node(nt(EXPR1), vec![unary(PAR, COEFF), unary(OP, TIMES), unary(EXPR2, signal)]),
        ],
    );
    ElementaryTree::auxiliary(id, tree, foot(&[1]))
}

// expr1(expr1* op(×) expr2(signal))
fn new_factor(id: &str, signal: &str) -> ElementaryTree {
    let tree = node(nt(EXPR1), vec![leaf(nt(EXPR1)), unary(OP, TIMES), unary(EXPR2, signal)]);
    ElementaryTree::auxiliary(id, tree, foot(&[1]))
}

/// The grammar of polynomial NARX models.
///
/// * `alpha1`: `expr0(aff(ξ))`, the model `y_k = ξ_k`;
/// * `beta1`/`beta2`: append a term `+ c × u` / `+ c × y`;
/// * `beta3`/`beta4`: multiply a term by `u` / `y`;
/// * `beta5`: prepend one backward shift `q⁻¹` to a factor.
pub fn g_narx() -> Grammar {
    let alpha1 = ElementaryTree::initial(ALPHA1, node(nt(EXPR0), vec![unary(AFF, NOISE)]));
    let beta5 = ElementaryTree::auxiliary(
        BETA5,
        node(nt(EXPR2), vec![leaf(t(DELAY)), leaf(nt(EXPR2))]),
        foot(&[2]),
    );
    Grammar {
        nonterminals: [EXPR0, EXPR1, EXPR2, OP, AFF, PAR].into_iter().map(nt).collect(),
        terminals: [INPUT, OUTPUT, NOISE, COEFF, PLUS, TIMES, DELAY].into_iter().map(t).collect(),
        start: [nt(EXPR0)].into_iter().collect(),
        initial_trees: vec![alpha1],
        auxiliary_trees: vec![
            new_term(BETA1, INPUT),
            new_term(BETA2, OUTPUT),
            new_factor(BETA3, INPUT),
            new_factor(BETA4, OUTPUT),
            beta5,
        ],
    }
}

/// Keeps only the auxiliary trees named in `aux_subset`.
pub fn restrict<S: AsRef<str>>(g: &Grammar, aux_subset: &[S]) -> Result<Grammar, NarxError> {
    let wanted: BTreeSet<TreeId> = aux_subset.iter().map(|s| TreeId::new(s.as_ref())).collect();
    if let Some(unknown) = wanted.iter().find(|id| !g.auxiliary_trees.iter().any(|a| &a.id == *id)) {
        return Err(NarxError::UnknownTreeId(unknown.clone()));
    }
    let mut out = g.clone();
    out.auxiliary_trees.retain(|a| wanted.contains(&a.id));
    Ok(out)
}

/// Auxiliary-tree subset generating FIR models.
pub const FIR_SUBSET: [&str; 2] = [BETA1, BETA5];
/// Auxiliary-tree subset generating ARX models.
pub const ARX_SUBSET: [&str; 3] = [BETA1, BETA2, BETA5];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tag::adjoin;

    #[test]
    fn alphabets_and_trees() {
        let g = g_narx();
        let terms: BTreeSet<&str> = g.terminals.iter().map(Symbol::name).collect();
        assert_eq!(terms, ["u", "y", "ξ", "c", "+", "×", "q⁻¹"].into_iter().collect());
        let start: Vec<&str> = g.start.iter().map(Symbol::name).collect();
        assert_eq!(start, vec!["expr0"]);
        assert_eq!(g.auxiliary_trees.len(), 5);
        assert_eq!(g.initial_trees.len(), 1);
        assert!(g.validate().is_empty(), "{:?}", g.validate());
    }

    #[test]
    fn alpha1_yields_noise_only() {
        let g = g_narx();
        let a1 = &g.initial_trees[0].tree;
        assert_eq!(a1.yield_of(), vec![t(NOISE)]);
        assert!(a1.is_saturated());
    }

    #[test]
    fn beta1_at_root_of_alpha1() {
        let g = g_narx();
        let a1 = &g.initial_trees[0].tree;
        let b1 = g.tree(&TreeId::new(BETA1)).unwrap();
        let out = adjoin(a1, &GornAddress::root(), b1).unwrap();
        let leaves = out.yield_of();
        let y: Vec<&str> = leaves.iter().map(|s| s.name()).collect();
        assert_eq!(y, vec!["ξ", "+", "c", "×", "u"]);
        assert_eq!(out.size(), a1.size() + b1.tree.size() - 1);
        assert!(out.is_saturated());
    }

    #[test]
    fn beta5_on_nine_node_host() {
        let g = g_narx();
        let b5 = g.tree(&TreeId::new(BETA5)).unwrap();
        assert_eq!(b5.tree.size(), 3);
        // expr0(expr1(par(c) op(×) expr2(u)) op): 9 nodes
        let host = node(
            nt(EXPR0),
            vec![
                node(nt(EXPR1), vec![unary(PAR, COEFF), unary(OP, TIMES), unary(EXPR2, INPUT)]),
                leaf(nt(OP)),
            ],
        );
        assert_eq!(host.size(), 9);
        let out = adjoin(&host, &foot(&[1, 3]), b5).unwrap();
        assert_eq!(out.size(), 11);
    }

    #[test]
    fn restriction() {
        let g = g_narx();
        let fir = restrict(&g, &FIR_SUBSET).unwrap();
        let ids: Vec<&str> = fir.auxiliary_trees.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, vec![BETA1, BETA5]);
        let arx = restrict(&g, &ARX_SUBSET).unwrap();
        assert_eq!(arx.auxiliary_trees.len(), 3);
        let all = restrict(&g, &[BETA1, BETA2, BETA3, BETA4, BETA5]).unwrap();
        assert_eq!(all, g);
        assert!(matches!(restrict(&g, &["beta9"]), Err(NarxError::UnknownTreeId(_))));
    }

    #[test]
    fn json_round_trip() {
        let g = g_narx();
        let back = Grammar::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
    }
}
