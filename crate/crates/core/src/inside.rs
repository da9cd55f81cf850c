//! Partition function, sampling and marginals for a Markov chain restricted
//! to the words of length `n` of an unambiguous CNF grammar.
//!
//! The chart is kept in conditional form: `cond[V](i, len)[x][y]` is the
//! weight of the words of the span derived by `V` that start with `x` and
//! end with `y`, given `X_i = x`. The joint is recovered by multiplying with
//! the cached position marginal of `x`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::{check_ambiguity_bounded, CnfGrammar};
use crate::markov::{forward_marginals, pick, Chain, Matrix};

pub(crate) use crate::grammar::Spans;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartOptions {
    /// Words up to this length are screened for ambiguity before building.
    /// Zero disables the screen.
    pub ambiguity_bound: usize,
    pub threads: usize,
}

impl Default for ChartOptions {
    fn default() -> Self {
        ChartOptions { ambiguity_bound: 6, threads: 1 }
    }
}

/// Fills one value per span, shortest spans first. `cell(i, len, done)` may
/// read every span shorter than `len` from `done`.
pub(crate) fn fill_by_length<T, F>(n: usize, threads: usize, cell: F) -> Result<Vec<T>>
where
    T: Send + Sync,
    F: Fn(usize, usize, &[T]) -> Result<T> + Sync,
{
    let spans = Spans::new(n);
    let mut done: Vec<T> = Vec::with_capacity(spans.count());
    let run = |done: &mut Vec<T>| -> Result<()> {
        for len in 1..=n {
            let row: Vec<T> = if threads > 1 {
                (0..=n - len).into_par_iter().map(|i| cell(i, len, done)).collect::<Result<_>>()?
            } else {
                (0..=n - len).map(|i| cell(i, len, done)).collect::<Result<_>>()?
            };
            done.extend(row);
        }
        Ok(())
    };
    if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
        pool.install(|| run(&mut done))?;
    } else {
        run(&mut done)?;
    }
    Ok(done)
}

/// `out[u][y] = Σ_v T(u→v) · b[v][y]`
pub(crate) fn stitch(t: &Matrix, b: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * k];
    for u in 0..k {
        let row = t.row(u);
        let o = &mut out[u * k..(u + 1) * k];
        for (v, &tv) in row.iter().enumerate() {
            if tv == 0.0 {
                continue;
            }
            for (oy, &by) in o.iter_mut().zip(&b[v * k..(v + 1) * k]) {
                *oy += tv * by;
            }
        }
    }
    out
}

/// `acc[x][y] += Σ_u a[x][u] · h[u][y]`
pub(crate) fn mul_add(acc: &mut [f64], a: &[f64], h: &[f64], k: usize) {
    for x in 0..k {
        for u in 0..k {
            let axu = a[x * k + u];
            if axu == 0.0 {
                continue;
            }
            for y in 0..k {
                acc[x * k + y] += axu * h[u * k + y];
            }
        }
    }
}

pub(crate) fn check_alignment<C: Chain + ?Sized>(chain: &C, g: &CnfGrammar) -> Result<()> {
    if g.terminals().len() != chain.size() {
        return Err(Error::AlphabetMismatch(format!(
            "grammar has {} terminals, chain has {} states; align the grammar to the model alphabet",
            g.terminals().len(),
            chain.size()
        )));
    }
    Ok(())
}

pub(crate) fn ambiguity_warnings(g: &CnfGrammar, n: usize, bound: usize) -> Vec<String> {
    if bound == 0 {
        return Vec::new();
    }
    match check_ambiguity_bounded(g, n.min(bound)) {
        Ok(None) => Vec::new(),
        Ok(Some(w)) => vec![format!(
            "grammar is ambiguous: \"{}\" has several parse trees; results count trees, not words",
            g.terminals().render(&w)
        )],
        Err(e) => vec![format!("ambiguity screen skipped: {e}")],
    }
}

/// Span chart for an unambiguous grammar.
#[derive(Clone, Debug)]
pub struct BoundaryChart {
    n: usize,
    nv: usize,
    k: usize,
    spans: Spans,
    /// per span: `[V][x][y]`
    cond: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
    warnings: Vec<String>,
}

impl BoundaryChart {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `|A| × |A|` block of conditional weights; `i` is 0-based.
    pub fn cond(&self, v: usize, i: usize, len: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.cond[self.spans.id(i, len)][v * kk..(v + 1) * kk]
    }

    /// P(V spans `[i, i+len)`, X_i = x, X_{i+len-1} = y).
    pub fn joint(&self, v: usize, i: usize, len: usize, x: usize, y: usize) -> f64 {
        self.mu[i][x] * self.cond(v, i, len)[x * self.k + y]
    }

    /// P(V spans `[i, i+len)`).
    pub fn marginal(&self, v: usize, i: usize, len: usize) -> f64 {
        let c = self.cond(v, i, len);
        (0..self.k).map(|x| self.mu[i][x] * c[x * self.k..(x + 1) * self.k].iter().sum::<f64>()).sum()
    }

    /// Cached chain weight of `X_t = x` (0-based `t`).
    pub fn position_marginal(&self, t: usize) -> &[f64] {
        &self.mu[t]
    }
}

pub fn build_chart<C: Chain + ?Sized>(
    chain: &C,
    g: &CnfGrammar,
    n: usize,
    opts: ChartOptions,
) -> Result<BoundaryChart> {
    chain.check_len(n)?;
    check_alignment(chain, g)?;
    let k = chain.size();
    let nv = g.num_nonterminals();
    let kk = k * k;
    let spans = Spans::new(n);
    let cond = fill_by_length(n, opts.threads, |i, len, done: &[Vec<f64>]| {
        let mut cell = vec![0.0; nv * kk];
        if len == 1 {
            for v in 0..nv {
                for x in 0..k {
                    if g.emits(v, x) {
                        cell[v * kk + x * k + x] = 1.0;
                    }
                }
            }
            return Ok(cell);
        }
        for split in 1..len {
            let t = chain.transition(i + split - 1);
            let left = &done[spans.id(i, split)];
            let right = &done[spans.id(i + split, len - split)];
            // B's block stitched through the transition, once per B.
            let mut stitched: Vec<Option<Vec<f64>>> = vec![None; nv];
            for r in g.binary_rules() {
                let a = &left[r.left * kk..(r.left + 1) * kk];
                if a.iter().all(|&z| z == 0.0) {
                    continue;
                }
                let h = stitched[r.right].get_or_insert_with(|| stitch(t, &right[r.right * kk..(r.right + 1) * kk], k));
                mul_add(&mut cell[r.lhs * kk..(r.lhs + 1) * kk], a, h, k);
            }
        }
        Ok(cell)
    })?;
    Ok(BoundaryChart {
        n,
        nv,
        k,
        spans,
        cond,
        mu: forward_marginals(chain, n),
        warnings: ambiguity_warnings(g, n, opts.ambiguity_bound),
    })
}

/// P(w ∈ L_G^n), counting each parse tree once.
pub fn partition_unambiguous(chart: &BoundaryChart, g: &CnfGrammar) -> f64 {
    chart.marginal(g.start(), 0, chart.n)
}

fn root_weights(chart: &BoundaryChart, v: usize) -> Vec<f64> {
    let k = chart.k;
    let c = chart.cond(v, 0, chart.n);
    (0..k * k).map(|xy| chart.mu[0][xy / k] * c[xy]).collect()
}

/// Exact sample from the chain conditioned on `w ∈ L_G^n`.
pub fn sample_word_unambiguous<C: Chain + ?Sized, R: Rng + ?Sized>(
    chart: &BoundaryChart,
    chain: &C,
    g: &CnfGrammar,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let k = chart.k;
    let xy = pick(&root_weights(chart, g.start()), rng)?;
    let mut out = vec![usize::MAX; chart.n];
    let mut stack = vec![(g.start(), 0, chart.n, xy / k, xy % k)];
    while let Some((v, i, len, x, y)) = stack.pop() {
        if len == 1 {
            out[i] = x;
            continue;
        }
        let (split, rule, u, w) = pick_split(chart, chain, g, v, i, len, x, y, rng)?;
        let r = g.binary_rules()[rule];
        stack.push((r.left, i, split, x, u));
        stack.push((r.right, i + split, len - split, w, y));
    }
    Ok(out)
}

/// Chooses `(split, rule, u, v)` for node `V` on a span with fixed
/// boundary letters, proportionally to its share of `cond[V][x][y]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pick_split<C: Chain + ?Sized, R: Rng + ?Sized>(
    chart: &BoundaryChart,
    chain: &C,
    g: &CnfGrammar,
    v: usize,
    i: usize,
    len: usize,
    x: usize,
    y: usize,
    rng: &mut R,
) -> Result<(usize, usize, usize, usize)> {
    let k = chart.k;
    let mut options = Vec::new();
    let mut weights = Vec::new();
    for split in 1..len {
        let t = chain.transition(i + split - 1);
        for &rule in g.rules_for(v) {
            let r = g.binary_rules()[rule];
            let a = chart.cond(r.left, i, split);
            let b = chart.cond(r.right, i + split, len - split);
            for u in 0..k {
                let au = a[x * k + u];
                if au == 0.0 {
                    continue;
                }
                for (w, &tuw) in t.row(u).iter().enumerate() {
                    let p = au * tuw * b[w * k + y];
                    if p > 0.0 {
                        options.push((split, rule, u, w));
                        weights.push(p);
                    }
                }
            }
        }
    }
    Ok(options[pick(&weights, rng)?])
}

/// `out[t][a] = P(X_t = a | w ∈ L_G^n)` for every position (0-based rows),
/// by pushing node probabilities down the chart.
#[allow(clippy::needless_range_loop)]
pub fn positional_marginals<C: Chain + ?Sized>(
    chart: &BoundaryChart,
    chain: &C,
    g: &CnfGrammar,
) -> Result<Vec<Vec<f64>>> {
    let (n, k, nv) = (chart.n, chart.k, chart.nv);
    let kk = k * k;
    let z = partition_unambiguous(chart, g);
    if z.is_nan() || z <= 0.0 {
        return Err(Error::NullEvent);
    }
    // flow[span][V][x][y]: probability that node V covers the span with
    // these boundary letters.
    let mut flow = vec![vec![0.0; nv * kk]; chart.spans.count()];
    let root = chart.spans.id(0, n);
    for (xy, w) in root_weights(chart, g.start()).into_iter().enumerate() {
        flow[root][g.start() * kk + xy] = w / z;
    }
    let mut out = vec![vec![0.0; k]; n];
    for len in (1..=n).rev() {
        for i in 0..=n - len {
            let id = chart.spans.id(i, len);
            if len == 1 {
                for v in 0..nv {
                    for (x, o) in out[i].iter_mut().enumerate() {
                        *o += flow[id][v * kk + x * k + x];
                    }
                }
                continue;
            }
            for v in 0..nv {
                let c = chart.cond(v, i, len);
                // ratio[x][y] = flow / cond
                let ratio: Vec<f64> = (0..kk)
                    .map(|xy| {
                        let f = flow[id][v * kk + xy];
                        if f == 0.0 {
                            0.0
                        } else {
                            f / c[xy]
                        }
                    })
                    .collect();
                if ratio.iter().all(|&r| r == 0.0) {
                    continue;
                }
                for split in 1..len {
                    let t = chain.transition(i + split - 1);
                    let lid = chart.spans.id(i, split);
                    let rid = chart.spans.id(i + split, len - split);
                    for &rule in g.rules_for(v) {
                        let r = g.binary_rules()[rule];
                        let a = chart.cond(r.left, i, split);
                        let b = chart.cond(r.right, i + split, len - split);
                        // Left child: a[x][u] · Σ_v T(u,v) Σ_y b[v][y] ratio[x][y]
                        let mut m = vec![0.0; kk]; // m[x][v]
                        for x in 0..k {
                            for w in 0..k {
                                m[x * k + w] = (0..k).map(|y| ratio[x * k + y] * b[w * k + y]).sum::<f64>();
                            }
                        }
                        for x in 0..k {
                            for u in 0..k {
                                let au = a[x * k + u];
                                if au == 0.0 {
                                    continue;
                                }
                                let s: f64 = (0..k).map(|w| t.get(u, w) * m[x * k + w]).sum();
                                flow[lid][r.left * kk + x * k + u] += au * s;
                            }
                        }
                        // Right child: b[v][y] · Σ_x ratio[x][y] Σ_u a[x][u] T(u,v)
                        let h = {
                            let mut h = vec![0.0; kk]; // h[x][v]
                            for x in 0..k {
                                for u in 0..k {
                                    let au = a[x * k + u];
                                    if au == 0.0 {
                                        continue;
                                    }
                                    for w in 0..k {
                                        h[x * k + w] += au * t.get(u, w);
                                    }
                                }
                            }
                            h
                        };
                        for w in 0..k {
                            for y in 0..k {
                                let bw = b[w * k + y];
                                if bw == 0.0 {
                                    continue;
                                }
                                let s: f64 = (0..k).map(|x| ratio[x * k + y] * h[x * k + w]).sum();
                                flow[rid][r.right * kk + w * k + y] += bw * s;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// P(X_t = a | w ∈ L_G^n) for 1-based `t`.
pub fn conditional_marginal<C: Chain + ?Sized>(
    chart: &BoundaryChart,
    chain: &C,
    g: &CnfGrammar,
    t: usize,
) -> Result<Vec<f64>> {
    if t == 0 || t > chart.n {
        return Err(Error::Domain(format!("position {t} outside 1..={}", chart.n)));
    }
    Ok(positional_marginals(chart, chain, g)?.swap_remove(t - 1))
}
