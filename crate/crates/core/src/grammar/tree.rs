use std::cmp::Ordering;

use num_bigint::BigUint;
use serde::Serialize;

use super::cyk::{derivation_table, Spans};
use super::CnfGrammar;
use crate::error::{Error, Result};

/// Parse trees beyond this count are not enumerated.
pub const TREE_ENUMERATION_GUARD: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum ParseTree {
    Leaf { label: usize, terminal: usize },
    Node { label: usize, leaves: usize, left: Box<ParseTree>, right: Box<ParseTree> },
}

impl ParseTree {
    pub fn label(&self) -> usize {
        match self {
            ParseTree::Leaf { label, .. } | ParseTree::Node { label, .. } => *label,
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            ParseTree::Leaf { .. } => 1,
            ParseTree::Node { leaves, .. } => *leaves,
        }
    }

    pub fn yield_word(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.leaves());
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<usize>) {
        match self {
            ParseTree::Leaf { terminal, .. } => out.push(*terminal),
            ParseTree::Node { left, right, .. } => {
                left.collect(out);
                right.collect(out);
            }
        }
    }

    /// Size of the left subtree's yield, or `None` for a leaf.
    pub fn split(&self) -> Option<usize> {
        match self {
            ParseTree::Leaf { .. } => None,
            ParseTree::Node { left, .. } => Some(left.leaves()),
        }
    }

    /// Bracketed rendering, e.g. `(S (S a) (S a))`.
    pub fn render(&self, g: &CnfGrammar) -> String {
        match self {
            ParseTree::Leaf { label, terminal } => {
                format!("({} {})", g.nonterminals()[*label], g.terminals().symbol(*terminal))
            }
            ParseTree::Node { label, left, right, .. } => {
                format!("({} {} {})", g.nonterminals()[*label], left.render(g), right.render(g))
            }
        }
    }
}

/// Compares by leaf count, then root label, then left subtree, then right
/// subtree. Labels follow declaration order with nonterminals before
/// terminals.
impl Ord for ParseTree {
    fn cmp(&self, other: &Self) -> Ordering {
        self.leaves().cmp(&other.leaves()).then_with(|| match (self, other) {
            (ParseTree::Leaf { label: a, terminal: x }, ParseTree::Leaf { label: b, terminal: y }) => {
                a.cmp(b).then(x.cmp(y))
            }
            (
                ParseTree::Node { label: a, left: la, right: ra, .. },
                ParseTree::Node { label: b, left: lb, right: rb, .. },
            ) => a.cmp(b).then_with(|| la.cmp(lb)).then_with(|| ra.cmp(rb)),
            _ => unreachable!("equal leaf counts imply the same shape at the root"),
        })
    }
}

impl PartialOrd for ParseTree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn tree_less(a: &ParseTree, b: &ParseTree) -> bool {
    a < b
}

struct Enumerator<'a> {
    g: &'a CnfGrammar,
    w: &'a [usize],
    spans: Spans,
    counts: Vec<BigUint>,
}

impl Enumerator<'_> {
    fn trees(&self, v: usize, i: usize, len: usize) -> Vec<ParseTree> {
        let nv = self.g.num_nonterminals();
        if self.counts[self.spans.id(i, len) * nv + v] == BigUint::default() {
            return Vec::new();
        }
        if len == 1 {
            return vec![ParseTree::Leaf { label: v, terminal: self.w[i] }];
        }
        let mut out = Vec::new();
        for &r in self.g.rules_for(v) {
            let r = self.g.binary_rules()[r];
            for k in 1..len {
                let lefts = self.trees(r.left, i, k);
                if lefts.is_empty() {
                    continue;
                }
                let rights = self.trees(r.right, i + k, len - k);
                for l in &lefts {
                    for rt in &rights {
                        out.push(ParseTree::Node {
                            label: v,
                            leaves: len,
                            left: Box::new(l.clone()),
                            right: Box::new(rt.clone()),
                        });
                    }
                }
            }
        }
        out
    }
}

/// Every parse tree of `w` from the start symbol, sorted ascending.
pub fn all_parse_trees(g: &CnfGrammar, w: &[usize]) -> Result<Vec<ParseTree>> {
    let total = super::count_derivations(g, w)?;
    if total > BigUint::from(TREE_ENUMERATION_GUARD) {
        let requested = u128::try_from(&total).unwrap_or(u128::MAX);
        return Err(Error::GuardExceeded { requested, limit: TREE_ENUMERATION_GUARD as u128 });
    }
    if w.is_empty() {
        return Ok(Vec::new());
    }
    let e = Enumerator { g, w, spans: Spans::new(w.len()), counts: derivation_table(g, w) };
    let mut trees = e.trees(g.start(), 0, w.len());
    trees.sort();
    Ok(trees)
}

/// The least parse tree of `w` in the tree order.
pub fn canonical_tree(g: &CnfGrammar, w: &[usize]) -> Result<ParseTree> {
    all_parse_trees(g, w)?.into_iter().next().ok_or(Error::NoParse)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn enumerates_catalan_many_trees() {
        let g = catalan();
        assert_eq!(all_parse_trees(&g, &[0; 5]).unwrap().len(), 14);
        for t in all_parse_trees(&g, &[0; 4]).unwrap() {
            assert_eq!(t.yield_word(), vec![0; 4]);
        }
    }

    #[test]
    fn canonical_tree_prefers_small_left_subtrees() {
        let g = catalan();
        let t = canonical_tree(&g, &[0; 3]).unwrap();
        assert_eq!(t.render(&g), "(S (S a) (S (S a) (S a)))");
        assert_eq!(t.split(), Some(1));
    }

    #[test]
    fn order_compares_leaf_count_first() {
        let g = catalan();
        let small = canonical_tree(&g, &[0; 2]).unwrap();
        let big = canonical_tree(&g, &[0; 3]).unwrap();
        assert!(tree_less(&small, &big));
        assert!(!tree_less(&big, &small));
        assert!(!tree_less(&big, &big));
    }

    #[test]
    fn no_parse_is_an_error() {
        let g = dyck();
        assert!(matches!(canonical_tree(&g, &[1, 0]), Err(Error::NoParse)));
    }

    #[test]
    fn guard_limits_enumeration() {
        let g = catalan();
        assert!(matches!(all_parse_trees(&g, &[0; 16]), Err(Error::GuardExceeded { .. })));
    }
}
