use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use super::CnfGrammar;
use crate::error::{Error, Result};
use crate::oracle::{check_enumeration, for_each_word, ENUMERATION_GUARD};

/// Flat index over spans `(i, len)` of a word of length `n`, shortest first.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Spans {
    n: usize,
}

impl Spans {
    pub(crate) fn new(n: usize) -> Self {
        Spans { n }
    }

    pub(crate) fn count(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// `i` 0-based start, `len ≥ 1`.
    #[inline]
    pub(crate) fn id(&self, i: usize, len: usize) -> usize {
        debug_assert!(len >= 1 && i + len <= self.n);
        // Spans of length l occupy n - l + 1 slots.
        let before = (len - 1) * (self.n + 1) - (len - 1) * len / 2;
        before + i
    }
}

/// Which nonterminals derive which substrings of a word.
#[derive(Clone, Debug)]
pub struct ParseChart {
    spans: Spans,
    nv: usize,
    start: usize,
    cells: Vec<bool>,
}

impl ParseChart {
    /// `v ⇒* w[i..i+len]`, `i` 0-based.
    #[inline]
    pub fn derives(&self, v: usize, i: usize, len: usize) -> bool {
        self.cells[self.spans.id(i, len) * self.nv + v]
    }

    pub fn accepts(&self) -> bool {
        self.spans.n > 0 && self.derives(self.start, 0, self.spans.n)
    }

    pub fn len(&self) -> usize {
        self.spans.n
    }

    pub fn is_empty(&self) -> bool {
        self.spans.n == 0
    }

    /// Nonterminals deriving the whole word, ascending.
    pub fn roots(&self) -> Vec<usize> {
        if self.spans.n == 0 {
            return Vec::new();
        }
        (0..self.nv).filter(|&v| self.derives(v, 0, self.spans.n)).collect()
    }
}

fn check_word(g: &CnfGrammar, w: &[usize]) -> Result<()> {
    if let Some(&a) = w.iter().find(|&&a| a >= g.terminals().len()) {
        return Err(Error::Domain(format!("letter {a} is outside the alphabet")));
    }
    Ok(())
}

/// CYK recognition over terminal indices of `g`.
pub fn cyk_member(g: &CnfGrammar, w: &[usize]) -> Result<ParseChart> {
    check_word(g, w)?;
    let n = w.len();
    let nv = g.num_nonterminals();
    let spans = Spans::new(n);
    let mut cells = vec![false; spans.count() * nv];
    for (i, &a) in w.iter().enumerate() {
        let base = spans.id(i, 1) * nv;
        for v in 0..nv {
            cells[base + v] = g.emits(v, a);
        }
    }
    for len in 2..=n {
        for i in 0..=n - len {
            let base = spans.id(i, len) * nv;
            for r in g.binary_rules() {
                if cells[base + r.lhs] {
                    continue;
                }
                let hit = (1..len)
                    .any(|k| cells[spans.id(i, k) * nv + r.left] && cells[spans.id(i + k, len - k) * nv + r.right]);
                if hit {
                    cells[base + r.lhs] = true;
                }
            }
        }
    }
    Ok(ParseChart { spans, nv, start: g.start(), cells })
}

/// Number of parse trees of `w` rooted at every nonterminal, indexed like
/// the parse chart.
pub(crate) fn derivation_table(g: &CnfGrammar, w: &[usize]) -> Vec<BigUint> {
    let n = w.len();
    let nv = g.num_nonterminals();
    let spans = Spans::new(n);
    let mut cells = vec![BigUint::zero(); spans.count() * nv];
    for (i, &a) in w.iter().enumerate() {
        let base = spans.id(i, 1) * nv;
        for v in 0..nv {
            if g.emits(v, a) {
                cells[base + v] = BigUint::one();
            }
        }
    }
    for len in 2..=n {
        for i in 0..=n - len {
            let base = spans.id(i, len) * nv;
            for r in g.binary_rules() {
                let mut acc = BigUint::zero();
                for k in 1..len {
                    let l = &cells[spans.id(i, k) * nv + r.left];
                    let rr = &cells[spans.id(i + k, len - k) * nv + r.right];
                    if !l.is_zero() && !rr.is_zero() {
                        acc += l * rr;
                    }
                }
                cells[base + r.lhs] += acc;
            }
        }
    }
    cells
}

/// Number of distinct parse trees of `w` from the start symbol.
pub fn count_derivations(g: &CnfGrammar, w: &[usize]) -> Result<BigUint> {
    check_word(g, w)?;
    if w.is_empty() {
        return Ok(BigUint::zero());
    }
    let table = derivation_table(g, w);
    let id = Spans::new(w.len()).id(0, w.len());
    Ok(table[id * g.num_nonterminals() + g.start()].clone())
}

fn bounded_words(g: &CnfGrammar, max_len: usize) -> Result<Vec<usize>> {
    let letters = g.used_terminals();
    let mut total: u128 = 0;
    for l in 1..=max_len {
        total = total.saturating_add(check_enumeration(letters.len(), l, ENUMERATION_GUARD)?);
        if total > ENUMERATION_GUARD {
            return Err(Error::GuardExceeded { requested: total, limit: ENUMERATION_GUARD });
        }
    }
    Ok(letters)
}

/// First word of length ≤ `max_len` (shortest, then lexicographic) with at
/// least two parse trees, if any.
pub fn check_ambiguity_bounded(g: &CnfGrammar, max_len: usize) -> Result<Option<Vec<usize>>> {
    let letters = bounded_words(g, max_len)?;
    let two = BigUint::from(2u8);
    for l in 1..=max_len {
        let mut found = None;
        let mut word = vec![0; l];
        for_each_word(letters.len(), l, |idx| {
            if found.is_some() {
                return;
            }
            for (slot, &j) in word.iter_mut().zip(idx) {
                *slot = letters[j];
            }
            if count_derivations(g, &word).expect("letters are in range") >= two {
                found = Some(word.clone());
            }
        });
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WeakViolation {
    pub first: usize,
    pub second: usize,
    pub word: Vec<usize>,
}

/// First word of length ≤ `max_len` derived by two distinct nonterminals,
/// together with the lowest such pair.
pub fn check_weak_ambiguity_bounded(g: &CnfGrammar, max_len: usize) -> Result<Option<WeakViolation>> {
    let letters = bounded_words(g, max_len)?;
    for l in 1..=max_len {
        let mut found = None;
        let mut word = vec![0; l];
        for_each_word(letters.len(), l, |idx| {
            if found.is_some() {
                return;
            }
            for (slot, &j) in word.iter_mut().zip(idx) {
                *slot = letters[j];
            }
            let roots = cyk_member(g, &word).expect("letters are in range").roots();
            if roots.len() >= 2 {
                found = Some(WeakViolation { first: roots[0], second: roots[1], word: word.clone() });
            }
        });
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}
