//! First-order Markov chains over a finite alphabet.
//!
//! Transition matrices are stored row = current symbol, column = next symbol,
//! so every row of a stochastic matrix sums to one. Positions are 0-based
//! internally; `Chain::transition(t)` moves from position `t` to `t + 1`.

use std::collections::HashMap;
use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const STOCHASTIC_TOL: f64 = 1e-9;

/// Ordered set of symbol names; a symbol's index is its position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    symbols: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::InvalidModel("alphabet must be non-empty".into()));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::InvalidModel(format!("duplicate symbol {s:?}")));
            }
        }
        Ok(Alphabet { symbols, index })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn index_of(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Parses a word given as a list of symbol names.
    pub fn encode<S: AsRef<str>>(&self, names: &[S]) -> Result<Word> {
        let symbols = names
            .iter()
            .map(|s| self.index_of(s.as_ref()).ok_or_else(|| Error::Domain(format!("unknown symbol {:?}", s.as_ref()))))
            .collect::<Result<Vec<_>>>()?;
        Word::new(symbols, self.len())
    }

    /// Parses a word written as one character per symbol (only valid when
    /// every symbol name is a single character).
    pub fn encode_str(&self, text: &str) -> Result<Word> {
        let names: Vec<String> = text.chars().map(String::from).collect();
        self.encode(&names)
    }

    pub fn decode(&self, w: &[usize]) -> Vec<String> {
        w.iter().map(|&i| self.symbols[i].clone()).collect()
    }

    pub fn render(&self, w: &[usize]) -> String {
        let names = self.decode(w);
        if names.iter().all(|s| s.chars().count() == 1) {
            names.concat()
        } else {
            names.join(" ")
        }
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        Alphabet::new(v)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.symbols
    }
}

/// A non-empty sequence of alphabet indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(symbols: Vec<usize>, alphabet_size: usize) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Domain("words must be non-empty".into()));
        }
        if let Some(&bad) = symbols.iter().find(|&&s| s >= alphabet_size) {
            return Err(Error::Domain(format!("symbol index {bad} out of range for alphabet of size {alphabet_size}")));
        }
        Ok(Word(symbols))
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl Deref for Word {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// Dense square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidModel(format!("row {r} has {} entries, expected {dim}", row.len())));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Row vector times matrix.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += vi * self.get(i, j);
            }
        }
        out
    }

    /// Matrix times column vector.
    pub fn right_mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub(crate) fn check_stochastic(&self, what: &str) -> Result<()> {
        for r in 0..self.dim {
            let row = self.row(r);
            if let Some(x) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::InvalidModel(format!("{what} row {r}: entry {x} outside [0,1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidModel(format!("{what} row {r} sums to {s}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidModel(format!("{what}: entry {x} outside [0,1]")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// Anything that assigns weights to sequences as an initial vector times a
/// product of per-step matrices. The weights need not be normalized, which
/// lets algorithms run on pinned or restricted chains unchanged.
pub trait Chain: Sync {
    fn size(&self) -> usize;
    fn initial(&self) -> &[f64];
    /// Matrix taking position `t` to position `t + 1` (0-based).
    fn transition(&self, t: usize) -> &Matrix;
    /// Chains built for one specific length report it here.
    fn fixed_len(&self) -> Option<usize> {
        None
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Domain("sequence length must be at least 1".into()));
        }
        match self.fixed_len() {
            Some(m) if m != n => Err(Error::Domain(format!("chain is defined for length {m}, got {n}"))),
            _ => Ok(()),
        }
    }
}

/// Homogeneous first-order Markov model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct MarkovModel {
    alphabet: Alphabet,
    p0: Vec<f64>,
    t: Matrix,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    alphabet: Alphabet,
    p0: Vec<f64>,
    t: Vec<Vec<f64>>,
}

impl TryFrom<RawModel> for MarkovModel {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        MarkovModel::new(raw.alphabet, raw.p0, Matrix::from_rows(&raw.t)?)
    }
}

impl From<MarkovModel> for RawModel {
    fn from(m: MarkovModel) -> Self {
        RawModel { t: m.t.rows(), alphabet: m.alphabet, p0: m.p0 }
    }
}

impl MarkovModel {
    pub fn new(alphabet: Alphabet, p0: Vec<f64>, t: Matrix) -> Result<Self> {
        let k = alphabet.len();
        if p0.len() != k || t.dim() != k {
            return Err(Error::InvalidModel(format!(
                "alphabet has {k} symbols but p0 has {} entries and t is {}x{}",
                p0.len(),
                t.dim(),
                t.dim()
            )));
        }
        check_distribution(&p0, "p0")?;
        t.check_stochastic("t")?;
        Ok(MarkovModel { alphabet, p0, t })
    }

    pub fn from_rows(symbols: &[&str], p0: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        MarkovModel::new(Alphabet::new(symbols.iter().copied())?, p0, Matrix::from_rows(rows)?)
    }

    /// Uniform initial vector and uniform transitions.
    pub fn uniform(alphabet: Alphabet) -> Self {
        let k = alphabet.len();
        let u = 1.0 / k as f64;
        let rows = vec![vec![u; k]; k];
        MarkovModel { alphabet, p0: vec![u; k], t: Matrix::from_rows(&rows).expect("square") }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn t(&self) -> &Matrix {
        &self.t
    }
}

impl Chain for MarkovModel {
    fn size(&self) -> usize {
        self.alphabet.len()
    }
    fn initial(&self) -> &[f64] {
        &self.p0
    }
    fn transition(&self, _t: usize) -> &Matrix {
        &self.t
    }
}

/// Position-dependent chain of fixed length: one matrix per step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepChain {
    p0: Vec<f64>,
    steps: Vec<Matrix>,
}

impl StepChain {
    pub fn new(p0: Vec<f64>, steps: Vec<Matrix>) -> Result<Self> {
        let k = p0.len();
        if k == 0 {
            return Err(Error::InvalidModel("empty alphabet".into()));
        }
        if let Some(bad) = steps.iter().position(|m| m.dim() != k) {
            return Err(Error::InvalidModel(format!("step {bad} has wrong dimension")));
        }
        Ok(StepChain { p0, steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn steps(&self) -> &[Matrix] {
        &self.steps
    }
}

impl Chain for StepChain {
    fn size(&self) -> usize {
        self.p0.len()
    }
    fn initial(&self) -> &[f64] {
        &self.p0
    }
    fn transition(&self, t: usize) -> &Matrix {
        &self.steps[t]
    }
    fn fixed_len(&self) -> Option<usize> {
        Some(self.len())
    }
}

/// Restricts a chain so that position `pos` can only take value `letter`.
pub struct Pinned<'a, C: Chain + ?Sized> {
    inner: &'a C,
    pos: usize,
    p0: Vec<f64>,
    entering: Option<Matrix>,
}

impl<'a, C: Chain + ?Sized> Pinned<'a, C> {
    pub fn new(inner: &'a C, pos: usize, letter: usize) -> Self {
        let k = inner.size();
        let mut p0 = inner.initial().to_vec();
        let mut entering = None;
        if pos == 0 {
            for (x, p) in p0.iter_mut().enumerate() {
                if x != letter {
                    *p = 0.0;
                }
            }
        } else {
            let mut m = inner.transition(pos - 1).clone();
            for r in 0..k {
                for c in 0..k {
                    if c != letter {
                        m.set(r, c, 0.0);
                    }
                }
            }
            entering = Some(m);
        }
        Pinned { inner, pos, p0, entering }
    }
}

impl<C: Chain + ?Sized> Chain for Pinned<'_, C> {
    fn size(&self) -> usize {
        self.inner.size()
    }
    fn initial(&self) -> &[f64] {
        &self.p0
    }
    fn transition(&self, t: usize) -> &Matrix {
        match &self.entering {
            Some(m) if t + 1 == self.pos => m,
            _ => self.inner.transition(t),
        }
    }
    fn fixed_len(&self) -> Option<usize> {
        self.inner.fixed_len()
    }
}

/// P(w) = P0(w_1) · Π T(w_k → w_{k+1}).
pub fn sequence_probability<C: Chain + ?Sized>(chain: &C, w: &[usize]) -> Result<f64> {
    chain.check_len(w.len())?;
    let k = chain.size();
    if let Some(&bad) = w.iter().find(|&&s| s >= k) {
        return Err(Error::Domain(format!("symbol index {bad} out of range")));
    }
    let mut p = chain.initial()[w[0]];
    for (t, pair) in w.windows(2).enumerate() {
        if p == 0.0 {
            return Ok(0.0);
        }
        p *= chain.transition(t).get(pair[0], pair[1]);
    }
    Ok(p)
}

/// Unconstrained forward vectors: `out[t][x]` is the weight of all prefixes
/// ending in `x` at position `t`.
pub fn forward_marginals<C: Chain + ?Sized>(chain: &C, n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    out.push(chain.initial().to_vec());
    for t in 1..n {
        let next = chain.transition(t - 1).left_mul(&out[t - 1]);
        out.push(next);
    }
    out
}

/// Unconstrained backward vectors: `out[t][x]` is the total weight of all
/// suffixes starting from `x` at position `t`. All ones for stochastic chains.
pub fn backward_weights<C: Chain + ?Sized>(chain: &C, n: usize) -> Vec<Vec<f64>> {
    let k = chain.size();
    let mut out = vec![vec![1.0; k]; n];
    for t in (0..n.saturating_sub(1)).rev() {
        out[t] = chain.transition(t).right_mul(&out[t + 1]);
    }
    out
}

/// Product of step matrices taking position `from` to position `to`.
pub fn segment<C: Chain + ?Sized>(chain: &C, from: usize, to: usize) -> Matrix {
    let mut m = Matrix::identity(chain.size());
    for t in from..to {
        m = m.mul(chain.transition(t));
    }
    m
}

/// Draws an index with probability proportional to `weights`.
pub(crate) fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 || !total.is_finite() {
        return Err(Error::NullEvent);
    }
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if u < w {
            return Ok(i);
        }
        u -= w;
    }
    Ok(last)
}

/// Unconstrained ancestral sample of length `n`.
pub fn sample_unconstrained<C: Chain + ?Sized, R: Rng + ?Sized>(
    chain: &C,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    chain.check_len(n)?;
    let mut w = Vec::with_capacity(n);
    w.push(pick(chain.initial(), rng)?);
    for t in 1..n {
        let prev = w[t - 1];
        w.push(pick(chain.transition(t - 1).row(prev), rng)?);
    }
    Ok(w)
}

/// Samples every position not listed in `fixed` from the chain conditioned
/// on the fixed values. `fixed` holds `(position, letter)` pairs sorted by
/// position; the fixed assignment must have positive weight.
pub(crate) fn fill_free_positions<C: Chain + ?Sized, R: Rng + ?Sized>(
    chain: &C,
    n: usize,
    fixed: &[(usize, usize)],
    rng: &mut R,
) -> Result<Vec<usize>> {
    if fixed.is_empty() {
        let back = backward_weights(chain, n);
        return sample_with_backward(chain, n, &back, rng);
    }
    let k = chain.size();
    let mut w = vec![usize::MAX; n];
    for &(p, x) in fixed {
        w[p] = x;
    }

    // Prefix: sample right to left from the forward vectors.
    let first = fixed[0].0;
    if first > 0 {
        let fwd = forward_marginals(chain, first);
        for t in (0..first).rev() {
            let next = w[t + 1];
            let weights: Vec<f64> = (0..k).map(|x| fwd[t][x] * chain.transition(t).get(x, next)).collect();
            w[t] = pick(&weights, rng)?;
        }
    }

    // Bridges between consecutive fixed positions.
    for pair in fixed.windows(2) {
        let (a, _) = pair[0];
        let (b, xb) = pair[1];
        if b <= a + 1 {
            continue;
        }
        // reach[t][x]: weight of getting from x at t to xb at b.
        let mut reach = vec![vec![0.0; k]; b - a - 1];
        let mut col = vec![0.0; k];
        col[xb] = 1.0;
        reach[b - a - 2] = chain.transition(b - 1).right_mul(&col);
        for t in (a + 1..b - 1).rev() {
            reach[t - a - 1] = chain.transition(t).right_mul(&reach[t - a]);
        }
        for t in a + 1..b {
            let prev = w[t - 1];
            let row = chain.transition(t - 1).row(prev);
            let weights: Vec<f64> = (0..k).map(|x| row[x] * reach[t - a - 1][x]).collect();
            w[t] = pick(&weights, rng)?;
        }
    }

    // Suffix.
    let (last, _) = *fixed.last().expect("non-empty");
    if last + 1 < n {
        let back = backward_weights(chain, n);
        for t in last + 1..n {
            let prev = w[t - 1];
            let row = chain.transition(t - 1).row(prev);
            let weights: Vec<f64> = (0..k).map(|x| row[x] * back[t][x]).collect();
            w[t] = pick(&weights, rng)?;
        }
    }
    Ok(w)
}

fn sample_with_backward<C: Chain + ?Sized, R: Rng + ?Sized>(
    chain: &C,
    n: usize,
    back: &[Vec<f64>],
    rng: &mut R,
) -> Result<Vec<usize>> {
    let k = chain.size();
    let mut w = Vec::with_capacity(n);
    let first: Vec<f64> = (0..k).map(|x| chain.initial()[x] * back[0][x]).collect();
    w.push(pick(&first, rng)?);
    for t in 1..n {
        let row = chain.transition(t - 1).row(w[t - 1]);
        let weights: Vec<f64> = (0..k).map(|x| row[x] * back[t][x]).collect();
        w.push(pick(&weights, rng)?);
    }
    Ok(w)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Uniform model over {a, b}.
    pub fn m_u() -> MarkovModel {
        MarkovModel::uniform(Alphabet::new(["a", "b"]).unwrap())
    }

    /// Deterministic alternating model: starts with a, a→b, b→a.
    pub fn m_d() -> MarkovModel {
        MarkovModel::from_rows(&["a", "b"], vec![1.0, 0.0], &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }
}
