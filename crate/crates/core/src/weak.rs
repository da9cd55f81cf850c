//! Partition function and sampling for weakly ambiguous grammars, where
//! distinct nonterminals derive disjoint languages but a word may still have
//! several parse trees.
//!
//! Each word is charged to its least parse tree. Since trees are compared by
//! leaf count first, the root of the least tree uses the smallest valid cut
//! `k`, and under weak ambiguity the rule at that cut is unique. The table
//! stores `Ĉ(k, S→AB)`, the mass of words whose least tree has that root.
//!
//! `Ĉ` is obtained from the prefix masses of `A` by removing every prefix
//! that also admits an earlier cut. An earlier cut `k' < k` with rule
//! `S→A'B'` is linked to `k` through a bridge `E` with `A→A'E` and
//! `B'→EB`; the removal runs as a signed sum over chains of linked cuts, so
//! words with several earlier cuts are removed exactly once. Words whose
//! earlier cuts are not linked this way are not removed, so the result
//! overcounts them; [`check_cut_linkage_bounded`] finds such words and the
//! builder reports them as a warning.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grammar::{check_weak_ambiguity_bounded, cyk_member, CnfGrammar, Spans};
use crate::inside::{check_alignment, fill_by_length, stitch, ChartOptions};
use crate::markov::{forward_marginals, pick, Chain, Pinned};
use crate::oracle::{check_enumeration, for_each_word, ENUMERATION_GUARD};

/// Rejections allowed per node before the sampler gives up.
pub const MAX_SAMPLER_TRIES: usize = 100_000;

const CLAMP: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct CanonicalPartitionTable {
    n: usize,
    k: usize,
    spans: Spans,
    nrules: usize,
    /// per span: word-set masses `[V][x][y]`, conditional on the first letter
    cond: Vec<Vec<f64>>,
    /// per span of length `len`: `[rule][cut - 1][x][y]`
    hat: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
    corrections: u64,
    warnings: Vec<String>,
}

struct Cell {
    cond: Vec<f64>,
    hat: Vec<f64>,
    corrections: u64,
}

impl CanonicalPartitionTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Number of nonzero correction terms subtracted while building.
    pub fn corrections_applied(&self) -> u64 {
        self.corrections
    }

    pub fn cond(&self, v: usize, i: usize, len: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.cond[self.spans.id(i, len)][v * kk..(v + 1) * kk]
    }

    /// Conditional `Ĉ` block of a binary rule at a cut (`1 ≤ cut < len`).
    pub fn hat(&self, rule: usize, i: usize, len: usize, cut: usize) -> &[f64] {
        let kk = self.k * self.k;
        let off = (rule * (len - 1) + cut - 1) * kk;
        &self.hat[self.spans.id(i, len)][off..off + kk]
    }

    /// P(Ĉ(cut, rule) on the span), unconditioned.
    pub fn hat_mass(&self, rule: usize, i: usize, len: usize, cut: usize) -> f64 {
        let k = self.k;
        let h = self.hat(rule, i, len, cut);
        (0..k * k).map(|xy| self.mu[i][xy / k] * h[xy]).sum()
    }

    /// P(V derives the span).
    pub fn marginal(&self, v: usize, i: usize, len: usize) -> f64 {
        let k = self.k;
        let c = self.cond(v, i, len);
        (0..k * k).map(|xy| self.mu[i][xy / k] * c[xy]).sum()
    }

    pub fn num_rules(&self) -> usize {
        self.nrules
    }
}

/// For rules `r = S→PQ` and `r' = S→P'Q'`: bridges `E` with `P→P'E` and
/// `Q'→EQ`.
fn rotations(g: &CnfGrammar) -> Vec<Vec<Vec<usize>>> {
    let rules = g.binary_rules();
    let has =
        |lhs: usize, l: usize, r: usize| g.rules_for(lhs).iter().any(|&i| rules[i].left == l && rules[i].right == r);
    let nv = g.num_nonterminals();
    rules
        .iter()
        .map(|r| {
            rules
                .iter()
                .map(|rp| {
                    if rp.lhs != r.lhs {
                        return Vec::new();
                    }
                    (0..nv).filter(|&e| has(r.left, rp.left, e) && has(rp.right, e, r.right)).collect()
                })
                .collect()
        })
        .collect()
}

pub fn build_weak_chart<C: Chain + ?Sized>(
    chain: &C,
    g: &CnfGrammar,
    n: usize,
    opts: ChartOptions,
) -> Result<CanonicalPartitionTable> {
    chain.check_len(n)?;
    check_alignment(chain, g)?;
    let k = chain.size();
    let kk = k * k;
    let nv = g.num_nonterminals();
    let rules = g.binary_rules();
    let nrules = rules.len();
    let spans = Spans::new(n);
    let rot = rotations(g);

    let cells = fill_by_length(n, opts.threads, |i, len, done: &[Cell]| {
        let mut cond = vec![0.0; nv * kk];
        if len == 1 {
            for v in 0..nv {
                for x in 0..k {
                    if g.emits(v, x) {
                        cond[v * kk + x * k + x] = 1.0;
                    }
                }
            }
            return Ok(Cell { cond, hat: Vec::new(), corrections: 0 });
        }
        let cond_of = |v: usize, at: usize, l: usize| &done[spans.id(at, l)].cond[v * kk..(v + 1) * kk];
        let mut hat = vec![0.0; nrules * (len - 1) * kk];
        let mut corrections = 0u64;
        for s in 0..nv {
            let own = g.rules_for(s);
            if own.is_empty() {
                continue;
            }
            for x in 0..k {
                // chain[cut - 1][local rule][u]: signed prefix mass ending in u
                let mut chains = vec![vec![vec![0.0; k]; own.len()]; len - 1];
                for cut in 1..len {
                    for (li, &r) in own.iter().enumerate() {
                        let p = rules[r].left;
                        let mut acc = cond_of(p, i, cut)[x * k..(x + 1) * k].to_vec();
                        for early in 1..cut {
                            let t = chain.transition(i + early - 1);
                            for (lj, &rp) in own.iter().enumerate() {
                                let prev = &chains[early - 1][lj];
                                if prev.iter().all(|&z| z == 0.0) {
                                    continue;
                                }
                                for &e in &rot[r][rp] {
                                    let bridge = stitch(t, cond_of(e, i + early, cut - early), k);
                                    let mut any = false;
                                    for (up, &pv) in prev.iter().enumerate() {
                                        if pv == 0.0 {
                                            continue;
                                        }
                                        for u in 0..k {
                                            let d = pv * bridge[up * k + u];
                                            if d != 0.0 {
                                                acc[u] -= d;
                                                any = true;
                                            }
                                        }
                                    }
                                    corrections += any as u64;
                                }
                            }
                        }
                        chains[cut - 1][li] = acc;
                    }
                }
                for cut in 1..len {
                    let t = chain.transition(i + cut - 1);
                    for (li, &r) in own.iter().enumerate() {
                        let g_u = &chains[cut - 1][li];
                        if g_u.iter().all(|&z| z == 0.0) {
                            continue;
                        }
                        let h = stitch(t, cond_of(rules[r].right, i + cut, len - cut), k);
                        let off = (r * (len - 1) + cut - 1) * kk + x * k;
                        for y in 0..k {
                            let mut val: f64 = (0..k).map(|u| g_u[u] * h[u * k + y]).sum();
                            if val < 0.0 {
                                if val < -CLAMP {
                                    return Err(Error::Consistency(format!(
                                        "negative canonical mass {val:e} at span ({}, {len}), cut {cut}",
                                        i + 1
                                    )));
                                }
                                val = 0.0;
                            }
                            hat[off + y] = val;
                            cond[s * kk + x * k + y] += val;
                        }
                    }
                }
            }
        }
        Ok(Cell { cond, hat, corrections })
    })?;

    let corrections = cells.iter().map(|c| c.corrections).sum();
    let (cond, hat) = cells.into_iter().map(|c| (c.cond, c.hat)).unzip();
    let warnings = weak_warnings(g, n, opts.ambiguity_bound);
    Ok(CanonicalPartitionTable {
        n,
        k,
        spans,
        nrules,
        cond,
        hat,
        mu: forward_marginals(chain, n),
        corrections,
        warnings,
    })
}

fn weak_warnings(g: &CnfGrammar, n: usize, bound: usize) -> Vec<String> {
    if bound == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    match check_weak_ambiguity_bounded(g, n.min(bound)) {
        Ok(None) => {}
        Ok(Some(v)) => out.push(format!(
            "grammar is not weakly ambiguous: {} and {} both derive \"{}\"",
            g.nonterminals()[v.first],
            g.nonterminals()[v.second],
            g.terminals().render(&v.word)
        )),
        Err(e) => out.push(format!("weak-ambiguity screen skipped: {e}")),
    }
    match check_cut_linkage_bounded(g, n.min(bound)) {
        Ok(None) => {}
        Ok(Some(c)) => out.push(format!(
            "cuts {} and {} of \"{}\" under {} share no bridge symbol; such words are overcounted",
            c.first_cut,
            c.second_cut,
            g.terminals().render(&c.word),
            g.nonterminals()[c.symbol]
        )),
        Err(e) => out.push(format!("cut-linkage screen skipped: {e}")),
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CutConflict {
    pub symbol: usize,
    pub word: Vec<usize>,
    pub first_cut: usize,
    pub second_cut: usize,
}

/// First word of length ≤ `max_len` with two valid cuts under one symbol
/// that no bridge symbol links. The weak table is exact for lengths up to
/// `max_len` when this returns `None` and the grammar is weakly ambiguous.
pub fn check_cut_linkage_bounded(g: &CnfGrammar, max_len: usize) -> Result<Option<CutConflict>> {
    let letters = g.used_terminals();
    let mut total: u128 = 0;
    for l in 1..=max_len {
        total = total.saturating_add(check_enumeration(letters.len(), l, ENUMERATION_GUARD)?);
        if total > ENUMERATION_GUARD {
            return Err(Error::GuardExceeded { requested: total, limit: ENUMERATION_GUARD });
        }
    }
    let rot = rotations(g);
    let rules = g.binary_rules();
    for l in 2..=max_len {
        let mut found = None;
        let mut word = vec![0; l];
        for_each_word(letters.len(), l, |idx| {
            if found.is_some() {
                return;
            }
            for (slot, &j) in word.iter_mut().zip(idx) {
                *slot = letters[j];
            }
            let chart = cyk_member(g, &word).expect("letters are in range");
            for v in chart.roots() {
                let cuts: Vec<(usize, usize)> = (1..l)
                    .flat_map(|cut| g.rules_for(v).iter().map(move |&r| (cut, r)))
                    .filter(|&(cut, r)| {
                        chart.derives(rules[r].left, 0, cut) && chart.derives(rules[r].right, cut, l - cut)
                    })
                    .collect();
                for (a, &(early, re)) in cuts.iter().enumerate() {
                    for &(late, rl) in &cuts[a + 1..] {
                        if early == late {
                            continue;
                        }
                        let linked = rot[rl][re].iter().any(|&e| chart.derives(e, early, late - early));
                        if !linked && found.is_none() {
                            found =
                                Some(CutConflict { symbol: v, word: word.clone(), first_cut: early, second_cut: late });
                        }
                    }
                }
            }
        });
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

/// P(w ∈ L_G^n), each word counted once.
pub fn partition_weak(table: &CanonicalPartitionTable, g: &CnfGrammar) -> f64 {
    table.marginal(g.start(), 0, table.n)
}

/// The valid cuts of `w` for a binary rule of `v`, ascending, as
/// `(cut, rule)` pairs.
pub fn valid_cuts(g: &CnfGrammar, v: usize, w: &[usize]) -> Result<Vec<(usize, usize)>> {
    let chart = cyk_member(g, w)?;
    let mut out = Vec::new();
    for cut in 1..w.len() {
        for &r in g.rules_for(v) {
            let rule = g.binary_rules()[r];
            if chart.derives(rule.left, 0, cut) && chart.derives(rule.right, cut, w.len() - cut) {
                out.push((cut, r));
            }
        }
    }
    Ok(out)
}

struct Sampler<'a, C: ?Sized> {
    table: &'a CanonicalPartitionTable,
    chain: &'a C,
    g: &'a CnfGrammar,
}

impl<C: Chain + ?Sized> Sampler<'_, C> {
    fn node<R: Rng + ?Sized>(
        &self,
        v: usize,
        i: usize,
        len: usize,
        x: usize,
        y: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        if len == 1 {
            return Ok(vec![x]);
        }
        let k = self.table.k;
        let rules = self.g.binary_rules();
        let mut options = Vec::new();
        let mut weights = Vec::new();
        for cut in 1..len {
            for &r in self.g.rules_for(v) {
                let w = self.table.hat(r, i, len, cut)[x * k + y];
                if w > 0.0 {
                    options.push((cut, r));
                    weights.push(w);
                }
            }
        }
        let (cut, r) = options[pick(&weights, rng)?];
        let rule = rules[r];
        let a = self.table.cond(rule.left, i, cut);
        let b = self.table.cond(rule.right, i + cut, len - cut);
        let t = self.chain.transition(i + cut - 1);
        let mut pairs = Vec::new();
        let mut pw = Vec::new();
        for u in 0..k {
            for w in 0..k {
                let p = a[x * k + u] * t.get(u, w) * b[w * k + y];
                if p > 0.0 {
                    pairs.push((u, w));
                    pw.push(p);
                }
            }
        }
        // Propose from all words with a valid cut here; keep those with no
        // earlier cut.
        for _ in 0..MAX_SAMPLER_TRIES {
            let (u, w) = pairs[pick(&pw, rng)?];
            let mut word = self.node(rule.left, i, cut, x, u, rng)?;
            word.extend(self.node(rule.right, i + cut, len - cut, w, y, rng)?);
            let first = valid_cuts(self.g, v, &word)?.first().map(|c| c.0);
            if first == Some(cut) {
                return Ok(word);
            }
        }
        Err(Error::Consistency(format!("sampler rejected {MAX_SAMPLER_TRIES} proposals at span ({}, {len})", i + 1)))
    }
}

/// Exact sample from the chain conditioned on `w ∈ L_G^n`.
pub fn sample_word_weak<C: Chain + ?Sized, R: Rng + ?Sized>(
    table: &CanonicalPartitionTable,
    chain: &C,
    g: &CnfGrammar,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let k = table.k;
    let c = table.cond(g.start(), 0, table.n);
    let weights: Vec<f64> = (0..k * k).map(|xy| table.mu[0][xy / k] * c[xy]).collect();
    let xy = pick(&weights, rng)?;
    Sampler { table, chain, g }.node(g.start(), 0, table.n, xy / k, xy % k, rng)
}

/// `out[t][a] = P(X_t = a | w ∈ L_G^n)`, by re-solving with each position
/// pinned.
pub fn positional_marginals_weak<C: Chain + ?Sized>(
    chain: &C,
    g: &CnfGrammar,
    n: usize,
    opts: ChartOptions,
) -> Result<Vec<Vec<f64>>> {
    let quiet = ChartOptions { ambiguity_bound: 0, ..opts };
    let z = partition_weak(&build_weak_chart(chain, g, n, quiet)?, g);
    if z.is_nan() || z <= 0.0 {
        return Err(Error::NullEvent);
    }
    (0..n)
        .map(|t| {
            (0..chain.size())
                .map(|a| {
                    let pinned = Pinned::new(chain, t, a);
                    Ok(partition_weak(&build_weak_chart(&pinned, g, n, quiet)?, g) / z)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::fixtures::{catalan, dyck};
    use crate::grammar::{canonical_tree, check_ambiguity_bounded, BinaryRule};
    use crate::inside::{build_chart, partition_unambiguous};
    use crate::markov::fixtures::{m_d, m_u};
    use crate::markov::{Alphabet, MarkovModel, Matrix, StepChain};
    use crate::oracle::{for_each_word, oracle_distribution, oracle_partition, total_variation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn member(g: &CnfGrammar) -> impl Fn(&[usize]) -> bool + '_ {
        move |w| cyk_member(g, w).unwrap().accepts()
    }

    fn opts() -> ChartOptions {
        ChartOptions::default()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1e-12)
    }

    fn paren(p0: Vec<f64>, rows: &[Vec<f64>]) -> MarkovModel {
        MarkovModel::from_rows(&["(", ")"], p0, rows).unwrap()
    }

    /// Chain whose only positive-weight word is `w`.
    fn indicator(k: usize, w: &[usize]) -> StepChain {
        let mut p0 = vec![0.0; k];
        p0[w[0]] = 1.0;
        let steps = w
            .windows(2)
            .map(|p| {
                let mut m = Matrix::zeros(k);
                for r in 0..k {
                    m.set(r, p[1], 1.0);
                }
                m
            })
            .collect();
        StepChain::new(p0, steps).unwrap()
    }

    #[test]
    fn catalan_fixtures() {
        let m = m_u();
        let g = catalan().align_to(m.alphabet()).unwrap();
        let t = build_weak_chart(&m, &g, 3, opts()).unwrap();
        assert!(close(partition_weak(&t, &g), 0.125));
        assert!(t.corrections_applied() > 0);
        let t = build_weak_chart(&m, &g, 5, opts()).unwrap();
        assert!(close(partition_weak(&t, &g), 0.03125));
        let md = m_d();
        let t = build_weak_chart(&md, &g, 3, opts()).unwrap();
        assert_eq!(partition_weak(&t, &g), 0.0);
        let single = CnfGrammar::parse("S -> 'a'").unwrap().align_to(m.alphabet()).unwrap();
        let t = build_weak_chart(&m, &single, 1, opts()).unwrap();
        assert_eq!(partition_weak(&t, &single), 0.5);
    }

    #[test]
    fn catalan_matches_oracle_up_to_ten() {
        let m = MarkovModel::from_rows(&["a", "b"], vec![0.6, 0.4], &[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let g = catalan().align_to(m.alphabet()).unwrap();
        for n in 1..=10 {
            let t = build_weak_chart(&m, &g, n, opts()).unwrap();
            let o = oracle_partition(&m, n, member(&g)).unwrap();
            assert!(close(partition_weak(&t, &g), o), "n={n}");
        }
    }

    #[test]
    fn dyck_fixtures() {
        let m = paren(vec![0.5, 0.5], &[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let g = dyck().align_to(m.alphabet()).unwrap();
        let t = build_weak_chart(&m, &g, 4, opts()).unwrap();
        assert!(close(partition_weak(&t, &g), 0.125));
        assert_eq!(t.corrections_applied(), 0);
        let t = build_weak_chart(&m, &g, 6, opts()).unwrap();
        assert!(close(partition_weak(&t, &g), 0.078125));
        // D and P share the word "()".
        assert_eq!(t.warnings().len(), 1);
        let skew = paren(vec![0.3, 0.7], &[vec![0.45, 0.55], vec![0.8, 0.2]]);
        for n in 1..=8 {
            let t = build_weak_chart(&skew, &g, n, opts()).unwrap();
            let o = oracle_partition(&skew, n, member(&g)).unwrap();
            assert!(close(partition_weak(&t, &g), o), "n={n}");
        }
    }

    #[test]
    fn hat_cells_sum_to_span_marginals() {
        let m = MarkovModel::from_rows(&["a", "b"], vec![0.6, 0.4], &[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let g = catalan().align_to(m.alphabet()).unwrap();
        let t = build_weak_chart(&m, &g, 7, opts()).unwrap();
        for len in 2..=7 {
            for i in 0..=7 - len {
                let s: f64 = (1..len)
                    .flat_map(|cut| (0..t.num_rules()).map(move |r| (cut, r)))
                    .map(|(cut, r)| t.hat_mass(r, i, len, cut))
                    .sum();
                assert!((s - t.marginal(0, i, len)).abs() < 1e-12);
                for cut in 1..len {
                    assert!(t.hat(0, i, len, cut).iter().all(|&v| v >= 0.0));
                }
            }
        }
    }

    #[test]
    fn agrees_with_unambiguous_dp_when_unambiguous() {
        let m = paren(vec![0.3, 0.7], &[vec![0.45, 0.55], vec![0.8, 0.2]]);
        let grammars = [
            dyck(),
            CnfGrammar::parse("S -> '(' S ')' | '(' ')'").unwrap(),
            CnfGrammar::parse("S -> '(' S | ')'").unwrap(),
        ];
        for g in grammars {
            assert_eq!(check_ambiguity_bounded(&g, 8).unwrap(), None);
            let g = g.align_to(m.alphabet()).unwrap();
            for n in 1..=8 {
                let a = partition_weak(&build_weak_chart(&m, &g, n, opts()).unwrap(), &g);
                let b = partition_unambiguous(&build_chart(&m, &g, n, opts()).unwrap(), &g);
                assert!((a - b).abs() <= 1e-12, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn mass_lands_in_the_canonical_root_cell() {
        let fixtures = [(catalan(), vec!["a"]), (dyck(), vec!["(", ")"])];
        for (g, symbols) in fixtures {
            let alphabet = Alphabet::new(symbols).unwrap();
            let g = g.align_to(&alphabet).unwrap();
            let k = alphabet.len();
            for n in 1..=7 {
                for_each_word(k, n, |w| {
                    if n == 1 || !cyk_member(&g, w).unwrap().accepts() {
                        return;
                    }
                    let chain = indicator(k, w);
                    let t = build_weak_chart(&chain, &g, n, ChartOptions { ambiguity_bound: 0, threads: 1 }).unwrap();
                    let mut cells = Vec::new();
                    for cut in 1..n {
                        for &r in g.rules_for(g.start()) {
                            let mass = t.hat_mass(r, 0, n, cut);
                            if mass > 1e-12 {
                                assert!((mass - 1.0).abs() < 1e-9);
                                cells.push((cut, g.binary_rules()[r]));
                            }
                        }
                    }
                    let tree = canonical_tree(&g, w).unwrap();
                    let crate::grammar::ParseTree::Node { label, left, right, .. } = tree else {
                        panic!("long word has a leaf tree")
                    };
                    let expect = BinaryRule { lhs: label, left: left.label(), right: right.label() };
                    assert_eq!(cells, vec![(left.leaves(), expect)], "{w:?}");
                });
            }
        }
    }

    #[test]
    fn sampler_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = paren(vec![0.5, 0.5], &[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let g = dyck().align_to(m.alphabet()).unwrap();
        let t = build_weak_chart(&m, &g, 6, opts()).unwrap();
        let reference = oracle_distribution(&m, 6, member(&g)).unwrap();
        assert_eq!(reference.len(), 5);
        let samples: Vec<Vec<usize>> = (0..50_000).map(|_| sample_word_weak(&t, &m, &g, &mut rng).unwrap()).collect();
        assert!(total_variation(&samples, &reference) <= 0.02);

        let m = MarkovModel::from_rows(&["a", "b"], vec![0.6, 0.4], &[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let g = CnfGrammar::parse("S -> S S | 'a' | 'b' 'b'").unwrap().align_to(m.alphabet()).unwrap();
        let t = build_weak_chart(&m, &g, 6, opts()).unwrap();
        let reference = oracle_distribution(&m, 6, member(&g)).unwrap();
        let samples: Vec<Vec<usize>> = (0..50_000).map(|_| sample_word_weak(&t, &m, &g, &mut rng).unwrap()).collect();
        assert!(total_variation(&samples, &reference) <= 0.02);

        let m = m_u();
        let g = catalan().align_to(m.alphabet()).unwrap();
        let t = build_weak_chart(&m, &g, 3, opts()).unwrap();
        assert_eq!(sample_word_weak(&t, &m, &g, &mut rng).unwrap(), vec![0, 0, 0]);
        let t = build_weak_chart(&m_d(), &g, 3, opts()).unwrap();
        assert!(matches!(sample_word_weak(&t, &m_d(), &g, &mut rng), Err(Error::NullEvent)));
    }

    #[test]
    fn pinned_marginals_match_oracle() {
        let m = MarkovModel::from_rows(&["a", "b"], vec![0.6, 0.4], &[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let g = CnfGrammar::parse("S -> S S | 'a' | 'b' 'b'").unwrap().align_to(m.alphabet()).unwrap();
        let got = positional_marginals_weak(&m, &g, 6, opts()).unwrap();
        let want = crate::oracle::oracle_marginals(&m, 6, member(&g)).unwrap();
        for (a, b) in got.iter().flatten().zip(want.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn unlinked_cuts_are_not_corrected() {
        // "abcd" splits as a|bcd and abc|d, but nothing derives "bc".
        let g = CnfGrammar::parse(
            "S -> C D | A B\nA -> X Z\nX -> C Y\nD -> Y W\nW -> Z B\nC -> 'a'\nY -> 'b'\nZ -> 'c'\nB -> 'd'",
        )
        .unwrap();
        assert_eq!(check_weak_ambiguity_bounded(&g, 4).unwrap(), None);
        let m = MarkovModel::uniform(g.terminals().clone());
        let t = build_weak_chart(&m, &g, 4, opts()).unwrap();
        let exact = oracle_partition(&m, 4, member(&g)).unwrap();
        assert!(close(exact, 0.25f64.powi(4)));
        assert!(close(partition_weak(&t, &g), 2.0 * exact));
    }

    /// Random CNF grammars over at most three nonterminals and two letters,
    /// screened for weak ambiguity.
    fn random_weak_grammars(count: usize, seed: u64) -> Vec<CnfGrammar> {
        let names = ["S", "A", "B"];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        let mut attempts = 0;
        while out.len() < count {
            attempts += 1;
            assert!(attempts < 100_000, "could not find enough grammars");
            let nv = rng.gen_range(1..=3);
            let mut text = String::new();
            for v in 0..nv {
                let mut alts = Vec::new();
                for a in 0..nv {
                    for b in 0..nv {
                        if rng.gen_bool(0.25) {
                            alts.push(format!("{} {}", names[a], names[b]));
                        }
                    }
                }
                for t in ["'a'", "'b'"] {
                    if rng.gen_bool(0.35) {
                        alts.push(t.to_string());
                    }
                }
                if !alts.is_empty() {
                    text.push_str(&format!("{} -> {}\n", names[v], alts.join(" | ")));
                }
            }
            let Ok(g) = CnfGrammar::parse(&text) else { continue };
            if g.binary_rules().is_empty() {
                continue;
            }
            if check_weak_ambiguity_bounded(&g, 8).unwrap().is_some() {
                continue;
            }
            out.push(g);
        }
        out
    }

    #[test]
    fn random_weakly_ambiguous_grammars_match_oracle_or_are_flagged() {
        let ab = Alphabet::new(["a", "b"]).unwrap();
        let m = MarkovModel::from_rows(&["a", "b"], vec![0.55, 0.45], &[vec![0.35, 0.65], vec![0.6, 0.4]]).unwrap();
        let mut exact = 0;
        for g in random_weak_grammars(20, 2024) {
            let g = g.align_to(&ab).unwrap();
            let flagged = check_cut_linkage_bounded(&g, 7).unwrap().is_some();
            let mut all_match = true;
            for n in 1..=7 {
                let t = build_weak_chart(&m, &g, n, ChartOptions { ambiguity_bound: 0, threads: 1 });
                let o = oracle_partition(&m, n, member(&g)).unwrap();
                let ok = matches!(&t, Ok(t) if close(partition_weak(t, &g), o) || (o == 0.0 && partition_weak(t, &g).abs() < 1e-15));
                all_match &= ok;
                assert!(ok || flagged, "unflagged mismatch\n{}n={n}", g.to_text());
            }
            exact += all_match as usize;
        }
        assert!(exact >= 10, "only {exact} of 20 grammars exact");
    }

    #[test]
    fn linkage_screen() {
        assert_eq!(check_cut_linkage_bounded(&catalan(), 8).unwrap(), None);
        assert_eq!(check_cut_linkage_bounded(&dyck(), 8).unwrap(), None);
        let g = CnfGrammar::parse("S -> B B\nB -> S S | 'b'").unwrap();
        let c = check_cut_linkage_bounded(&g, 8).unwrap().unwrap();
        assert_eq!((c.word.len(), c.first_cut, c.second_cut), (5, 1, 4));
        let m = MarkovModel::uniform(g.terminals().clone());
        let t = build_weak_chart(&m, &g, 5, opts()).unwrap();
        assert!(t.warnings().iter().any(|w| w.contains("overcounted")));
    }
}
