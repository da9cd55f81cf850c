//! Binary equality constraints `X_i = σ(X_j)` on Markov sequences.
//!
//! General equality sets are #P-hard; three topologies admit exact
//! polynomial inference and are implemented here:
//!
//! * non-crossing: the closed intervals `[i, j]` are pairwise disjoint;
//! * repeated section: the `j`s appear in the same order as the `i`s and
//!   every `i` precedes every `j`;
//! * palindromic: `i_1 < … < i_K < j_K < … < j_1`.
//!
//! Positions in [`EqualityConstraint`] are 1-based, as in the JSON format.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{
    backward_weights, fill_free_positions, forward_marginals, pick, segment, Alphabet, Chain, Matrix, Pinned,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqualityConstraint {
    pub i: usize,
    pub j: usize,
    /// Image list: the constraint holds when `w_i == sigma[w_j]`.
    /// `None` is the identity.
    pub sigma: Option<Vec<usize>>,
}

impl EqualityConstraint {
    pub fn new(i: usize, j: usize) -> Self {
        EqualityConstraint { i, j, sigma: None }
    }

    pub fn with_sigma(i: usize, j: usize, sigma: Vec<usize>) -> Self {
        EqualityConstraint { i, j, sigma: Some(sigma) }
    }

    pub fn holds(&self, w: &[usize]) -> bool {
        let xj = w[self.j - 1];
        let img = self.sigma.as_ref().map_or(xj, |s| s[xj]);
        w[self.i - 1] == img
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqualitySet {
    n: usize,
    constraints: Vec<EqualityConstraint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TopologyClass {
    NonCrossing,
    RepeatedSection,
    Palindromic,
    General,
}

impl fmt::Display for TopologyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TopologyClass::NonCrossing => "NonCrossing",
            TopologyClass::RepeatedSection => "RepeatedSection",
            TopologyClass::Palindromic => "Palindromic",
            TopologyClass::General => "General",
        };
        f.write_str(s)
    }
}

#[derive(Serialize, Deserialize)]
struct RawSet {
    n: usize,
    constraints: Vec<RawConstraint>,
}

#[derive(Serialize, Deserialize)]
struct RawConstraint {
    i: usize,
    j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<Vec<String>>,
}

impl EqualitySet {
    pub fn new(n: usize, constraints: Vec<EqualityConstraint>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("sequence length must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &constraints {
            if !(1 <= c.i && c.i < c.j && c.j <= n) {
                return Err(Error::Domain(format!("constraint ({}, {}) needs 1 <= i < j <= {n}", c.i, c.j)));
            }
            if !seen.insert((c.i, c.j)) {
                return Err(Error::Domain(format!("duplicate constraint ({}, {})", c.i, c.j)));
            }
            if let Some(s) = &c.sigma {
                let mut sorted = s.clone();
                sorted.sort_unstable();
                if sorted.iter().enumerate().any(|(a, &b)| a != b) {
                    return Err(Error::Domain(format!("sigma of ({}, {}) is not a permutation", c.i, c.j)));
                }
            }
        }
        Ok(EqualitySet { n, constraints })
    }

    /// Convenience constructor for identity constraints.
    pub fn identity(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        EqualitySet::new(n, pairs.iter().map(|&(i, j)| EqualityConstraint::new(i, j)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn constraints(&self) -> &[EqualityConstraint] {
        &self.constraints
    }

    pub fn is_satisfied(&self, w: &[usize]) -> bool {
        self.constraints.iter().all(|c| c.holds(w))
    }

    pub fn from_json(text: &str, alphabet: &Alphabet) -> Result<Self> {
        let raw: RawSet = serde_json::from_str(text)?;
        let mut constraints = Vec::with_capacity(raw.constraints.len());
        for c in raw.constraints {
            let sigma = match c.sigma {
                None => None,
                Some(names) => {
                    if names.len() != alphabet.len() {
                        return Err(Error::Domain(format!(
                            "sigma of ({}, {}) has {} entries, alphabet has {}",
                            c.i,
                            c.j,
                            names.len(),
                            alphabet.len()
                        )));
                    }
                    Some(alphabet.encode(&names)?.into_inner())
                }
            };
            constraints.push(EqualityConstraint { i: c.i, j: c.j, sigma });
        }
        EqualitySet::new(raw.n, constraints)
    }

    /// Parses only the structure, ignoring any sigma (enough to classify).
    pub fn structure_from_json(text: &str) -> Result<Self> {
        let raw: RawSet = serde_json::from_str(text)?;
        EqualitySet::new(raw.n, raw.constraints.into_iter().map(|c| EqualityConstraint::new(c.i, c.j)).collect())
    }

    pub fn to_json(&self, alphabet: &Alphabet) -> serde_json::Value {
        let raw = RawSet {
            n: self.n,
            constraints: self
                .constraints
                .iter()
                .map(|c| RawConstraint { i: c.i, j: c.j, sigma: c.sigma.as_ref().map(|s| alphabet.decode(s)) })
                .collect(),
        };
        serde_json::to_value(raw).expect("serializable")
    }

    fn sorted_by_i(&self) -> Vec<&EqualityConstraint> {
        let mut v: Vec<_> = self.constraints.iter().collect();
        v.sort_by_key(|c| (c.i, c.j));
        v
    }

    pub fn is_noncrossing(&self) -> bool {
        let v = self.sorted_by_i();
        v.windows(2).all(|p| p[0].j < p[1].i)
    }

    pub fn is_repeated_section(&self) -> bool {
        let v = self.sorted_by_i();
        let increasing = v.windows(2).all(|p| p[0].i < p[1].i && p[0].j < p[1].j);
        let separated = match (v.last(), v.first()) {
            (Some(last), Some(first)) => last.i < first.j,
            _ => true,
        };
        increasing && separated
    }

    pub fn is_palindromic(&self) -> bool {
        let v = self.sorted_by_i();
        let nested = v.windows(2).all(|p| p[0].i < p[1].i && p[0].j > p[1].j);
        let inner = v.last().is_none_or(|c| c.i < c.j);
        nested && inner
    }

    fn ties(&self, k: usize) -> Result<Vec<Tie>> {
        self.sorted_by_i()
            .into_iter()
            .map(|c| {
                let sigma = match &c.sigma {
                    Some(s) if s.len() != k => {
                        return Err(Error::AlphabetMismatch(format!(
                            "sigma of ({}, {}) has {} entries, chain has {k} symbols",
                            c.i,
                            c.j,
                            s.len()
                        )))
                    }
                    Some(s) => s.clone(),
                    None => (0..k).collect(),
                };
                Ok(Tie { i: c.i - 1, j: c.j - 1, sigma })
            })
            .collect()
    }
}

/// 0-based constraint with a materialized permutation.
struct Tie {
    i: usize,
    j: usize,
    sigma: Vec<usize>,
}

/// First matching class in the order NonCrossing, RepeatedSection,
/// Palindromic, General.
pub fn classify(eqs: &EqualitySet) -> TopologyClass {
    if eqs.is_noncrossing() {
        TopologyClass::NonCrossing
    } else if eqs.is_repeated_section() {
        TopologyClass::RepeatedSection
    } else if eqs.is_palindromic() {
        TopologyClass::Palindromic
    } else {
        TopologyClass::General
    }
}

fn check_chain<C: Chain + ?Sized>(chain: &C, eqs: &EqualitySet) -> Result<Vec<Tie>> {
    chain.check_len(eqs.n)?;
    eqs.ties(chain.size())
}

// ---------------------------------------------------------------------------
// Non-crossing
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Outside,
    Start(usize),
    Inside(usize),
    End(usize),
}

/// Backward messages. Positions strictly inside an interval, or at its right
/// end, carry the letter pinned at the interval's start.
enum Msg {
    Free(Vec<f64>),
    /// Indexed `[x * k + pinned]`.
    Pinned(Vec<f64>),
}

struct NonCrossingPass {
    roles: Vec<Role>,
    msgs: Vec<Msg>,
    k: usize,
}

impl NonCrossingPass {
    fn run<C: Chain + ?Sized>(chain: &C, n: usize, ties: &[Tie]) -> Self {
        let k = chain.size();
        let mut roles = vec![Role::Outside; n];
        for (idx, t) in ties.iter().enumerate() {
            roles[t.i] = Role::Start(idx);
            for r in &mut roles[t.i + 1..t.j] {
                *r = Role::Inside(idx);
            }
            roles[t.j] = Role::End(idx);
        }
        let mut msgs: Vec<Msg> = Vec::with_capacity(n);
        for t in (0..n).rev() {
            let next = msgs.last();
            let msg = match roles[t] {
                Role::Outside => Msg::Free(match next {
                    None => vec![1.0; k],
                    Some(Msg::Free(b)) => chain.transition(t).right_mul(b),
                    Some(Msg::Pinned(_)) => unreachable!("pinned message after a free position"),
                }),
                Role::Start(_) => {
                    let Some(Msg::Pinned(b)) = next else {
                        unreachable!("interval start must be followed by a pinned position")
                    };
                    let m = chain.transition(t);
                    Msg::Free((0..k).map(|x| (0..k).map(|y| m.get(x, y) * b[y * k + x]).sum()).collect())
                }
                Role::Inside(_) => {
                    let Some(Msg::Pinned(b)) = next else {
                        unreachable!("interval interior must be followed by a pinned position")
                    };
                    let m = chain.transition(t);
                    let mut out = vec![0.0; k * k];
                    for x in 0..k {
                        for y in 0..k {
                            let a = m.get(x, y);
                            if a == 0.0 {
                                continue;
                            }
                            for p in 0..k {
                                out[x * k + p] += a * b[y * k + p];
                            }
                        }
                    }
                    Msg::Pinned(out)
                }
                Role::End(idx) => {
                    let tail = match next {
                        None => vec![1.0; k],
                        Some(Msg::Free(b)) => chain.transition(t).right_mul(b),
                        Some(Msg::Pinned(_)) => unreachable!("intervals are disjoint"),
                    };
                    let sigma = &ties[idx].sigma;
                    let mut out = vec![0.0; k * k];
                    for x in 0..k {
                        out[x * k + sigma[x]] = tail[x];
                    }
                    Msg::Pinned(out)
                }
            };
            msgs.push(msg);
        }
        msgs.reverse();
        NonCrossingPass { roles, msgs, k }
    }

    fn weight(&self, t: usize, x: usize, pinned: Option<usize>) -> f64 {
        match (&self.msgs[t], pinned) {
            (Msg::Free(b), _) => b[x],
            (Msg::Pinned(b), Some(p)) => b[x * self.k + p],
            (Msg::Pinned(_), None) => unreachable!("pinned message needs a pinned letter"),
        }
    }

    fn partition<C: Chain + ?Sized>(&self, chain: &C) -> f64 {
        (0..self.k).map(|x| chain.initial()[x] * self.weight(0, x, None)).sum()
    }

    fn sample<C: Chain + ?Sized, R: Rng + ?Sized>(&self, chain: &C, ties: &[Tie], rng: &mut R) -> Result<Vec<usize>> {
        let n = self.roles.len();
        let k = self.k;
        let mut w = Vec::with_capacity(n);
        let first: Vec<f64> = (0..k).map(|x| chain.initial()[x] * self.weight(0, x, None)).collect();
        w.push(pick(&first, rng)?);
        for t in 1..n {
            let pinned = match self.roles[t] {
                Role::Inside(idx) | Role::End(idx) => Some(w[ties[idx].i]),
                _ => None,
            };
            let row = chain.transition(t - 1).row(w[t - 1]);
            let weights: Vec<f64> = (0..k).map(|x| row[x] * self.weight(t, x, pinned)).collect();
            w.push(pick(&weights, rng)?);
        }
        Ok(w)
    }
}

/// Exact partition for pairwise-disjoint intervals.
pub fn partition_noncrossing<C: Chain + ?Sized>(chain: &C, eqs: &EqualitySet) -> Result<f64> {
    if !eqs.is_noncrossing() {
        return Err(Error::Precondition("equalities are not non-crossing".into()));
    }
    let ties = check_chain(chain, eqs)?;
    Ok(NonCrossingPass::run(chain, eqs.n, &ties).partition(chain))
}

// ---------------------------------------------------------------------------
// Repeated sections
// ---------------------------------------------------------------------------

/// Quotient of a repeated-section set: a cycle through the merged variables
/// `y_m = X_{j_m}` (with `X_{i_m} = σ_m(y_m)`).
struct RepeatedCycle {
    alpha: Vec<f64>,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    bridge: Matrix,
    beta: Vec<f64>,
}

impl RepeatedCycle {
    fn build<C: Chain + ?Sized>(chain: &C, n: usize, ties: &[Tie]) -> Self {
        let kk = ties.len();
        let alpha = forward_marginals(chain, ties[0].i + 1).pop().expect("non-empty");
        let beta = backward_weights(chain, n)[ties[kk - 1].j].clone();
        let first = ties.windows(2).map(|p| segment(chain, p[0].i, p[1].i)).collect();
        let second = ties.windows(2).map(|p| segment(chain, p[0].j, p[1].j)).collect();
        let bridge = segment(chain, ties[kk - 1].i, ties[0].j);
        RepeatedCycle { alpha, first, second, bridge, beta }
    }

    /// Forward tables with `y_1` fixed to `c`; `d[m][y]` covers everything
    /// up to pair `m`.
    fn forward(&self, ties: &[Tie], c: usize) -> Vec<Vec<f64>> {
        let k = self.alpha.len();
        let mut d = Vec::with_capacity(ties.len());
        let mut d0 = vec![0.0; k];
        d0[c] = self.alpha[ties[0].sigma[c]];
        d.push(d0);
        for m in 0..ties.len() - 1 {
            let (s_now, s_next) = (&ties[m].sigma, &ties[m + 1].sigma);
            let prev = &d[m];
            let next: Vec<f64> = (0..k)
                .map(|y2| {
                    (0..k).map(|y| prev[y] * self.first[m].get(s_now[y], s_next[y2]) * self.second[m].get(y, y2)).sum()
                })
                .collect();
            d.push(next);
        }
        d
    }

    fn closing(&self, ties: &[Tie], c: usize, y_last: usize) -> f64 {
        let last = &ties[ties.len() - 1];
        self.bridge.get(last.sigma[y_last], c) * self.beta[y_last]
    }

    fn partition_given(&self, ties: &[Tie], c: usize) -> f64 {
        let d = self.forward(ties, c);
        let last = d.last().expect("non-empty");
        (0..last.len()).map(|y| last[y] * self.closing(ties, c, y)).sum()
    }

    fn partition(&self, ties: &[Tie]) -> f64 {
        (0..self.alpha.len()).map(|c| self.partition_given(ties, c)).sum()
    }

    fn sample<R: Rng + ?Sized>(&self, ties: &[Tie], rng: &mut R) -> Result<Vec<usize>> {
        let k = self.alpha.len();
        let by_c: Vec<f64> = (0..k).map(|c| self.partition_given(ties, c)).collect();
        let c = pick(&by_c, rng)?;
        let d = self.forward(ties, c);
        let kk = ties.len();
        let mut ys = vec![0; kk];
        let last: Vec<f64> = (0..k).map(|y| d[kk - 1][y] * self.closing(ties, c, y)).collect();
        ys[kk - 1] = pick(&last, rng)?;
        for m in (0..kk - 1).rev() {
            let y2 = ys[m + 1];
            let (s_now, s_next) = (&ties[m].sigma, &ties[m + 1].sigma);
            let weights: Vec<f64> =
                (0..k).map(|y| d[m][y] * self.first[m].get(s_now[y], s_next[y2]) * self.second[m].get(y, y2)).collect();
            ys[m] = pick(&weights, rng)?;
        }
        Ok(ys)
    }
}

/// Exact partition for repeated sections. Non-crossing inputs that are not
/// themselves repeated sections are routed to the non-crossing pass.
pub fn partition_repeated<C: Chain + ?Sized>(chain: &C, eqs: &EqualitySet) -> Result<f64> {
    if eqs.constraints.is_empty() || (!eqs.is_repeated_section() && eqs.is_noncrossing()) {
        return partition_noncrossing(chain, eqs);
    }
    if !eqs.is_repeated_section() {
        return Err(Error::Precondition("equalities are not a repeated section".into()));
    }
    let ties = check_chain(chain, eqs)?;
    Ok(RepeatedCycle::build(chain, eqs.n, &ties).partition(&ties))
}

// ---------------------------------------------------------------------------
// Palindromic sections
// ---------------------------------------------------------------------------

/// Quotient of a nested set: a path through `y_m = X_{j_m}` from the outer
/// pair to the inner one.
struct NestedPath {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// `outer[m]`: i_m → i_{m+1}; `back[m]`: j_{m+1} → j_m.
    outer: Vec<Matrix>,
    back: Vec<Matrix>,
    /// `inside[m][y]`: weight of everything strictly inside pair `m`.
    inside: Vec<Vec<f64>>,
}

impl NestedPath {
    fn build<C: Chain + ?Sized>(chain: &C, n: usize, ties: &[Tie]) -> Self {
        let k = chain.size();
        let kk = ties.len();
        let alpha = forward_marginals(chain, ties[0].i + 1).pop().expect("non-empty");
        let beta = backward_weights(chain, n)[ties[0].j].clone();
        let outer: Vec<Matrix> = ties.windows(2).map(|p| segment(chain, p[0].i, p[1].i)).collect();
        let back: Vec<Matrix> = ties.windows(2).map(|p| segment(chain, p[1].j, p[0].j)).collect();
        let middle = segment(chain, ties[kk - 1].i, ties[kk - 1].j);

        let mut inside = vec![vec![0.0; k]; kk];
        let s_last = &ties[kk - 1].sigma;
        inside[kk - 1] = (0..k).map(|y| middle.get(s_last[y], y)).collect();
        for m in (0..kk - 1).rev() {
            let (s_now, s_next) = (&ties[m].sigma, &ties[m + 1].sigma);
            inside[m] = (0..k)
                .map(|y| {
                    (0..k).map(|y2| outer[m].get(s_now[y], s_next[y2]) * inside[m + 1][y2] * back[m].get(y2, y)).sum()
                })
                .collect();
        }
        NestedPath { alpha, beta, outer, back, inside }
    }

    fn root_weights(&self, ties: &[Tie]) -> Vec<f64> {
        let s = &ties[0].sigma;
        (0..self.alpha.len()).map(|y| self.alpha[s[y]] * self.beta[y] * self.inside[0][y]).collect()
    }

    fn partition(&self, ties: &[Tie]) -> f64 {
        self.root_weights(ties).iter().sum()
    }

    fn sample<R: Rng + ?Sized>(&self, ties: &[Tie], rng: &mut R) -> Result<Vec<usize>> {
        let k = self.alpha.len();
        let mut ys = Vec::with_capacity(ties.len());
        ys.push(pick(&self.root_weights(ties), rng)?);
        for m in 0..ties.len() - 1 {
            let y = ys[m];
            let (s_now, s_next) = (&ties[m].sigma, &ties[m + 1].sigma);
            let weights: Vec<f64> = (0..k)
                .map(|y2| self.outer[m].get(s_now[y], s_next[y2]) * self.inside[m + 1][y2] * self.back[m].get(y2, y))
                .collect();
            ys.push(pick(&weights, rng)?);
        }
        Ok(ys)
    }
}

/// Exact partition for fully nested (palindromic) sets.
pub fn partition_palindromic<C: Chain + ?Sized>(chain: &C, eqs: &EqualitySet) -> Result<f64> {
    if !eqs.is_palindromic() {
        return Err(Error::Precondition("equalities are not palindromic".into()));
    }
    if eqs.constraints.is_empty() {
        return partition_noncrossing(chain, eqs);
    }
    let ties = check_chain(chain, eqs)?;
    Ok(NestedPath::build(chain, eqs.n, &ties).partition(&ties))
}

/// Dispatches on the topology class.
pub fn partition<C: Chain + ?Sized>(chain: &C, eqs: &EqualitySet) -> Result<f64> {
    match classify(eqs) {
        TopologyClass::NonCrossing => partition_noncrossing(chain, eqs),
        TopologyClass::RepeatedSection => partition_repeated(chain, eqs),
        TopologyClass::Palindromic => partition_palindromic(chain, eqs),
        TopologyClass::General => {
            Err(Error::Unsupported("exact inference for general equality topologies is #P-hard".into()))
        }
    }
}

fn pairs_to_fixed(ties: &[Tie], ys: &[usize]) -> Vec<(usize, usize)> {
    let mut fixed: Vec<(usize, usize)> =
        ties.iter().zip(ys).flat_map(|(t, &y)| [(t.i, t.sigma[y]), (t.j, y)]).collect();
    fixed.sort_unstable();
    fixed
}

/// Exact sample from P(w | all equalities hold).
pub fn sample_equality_constrained<C: Chain + ?Sized, R: Rng + ?Sized>(
    chain: &C,
    eqs: &EqualitySet,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let class = classify(eqs);
    if class == TopologyClass::General {
        return Err(Error::Unsupported("sampling under general equality topologies is #P-hard".into()));
    }
    let ties = check_chain(chain, eqs)?;
    let n = eqs.n;
    match class {
        TopologyClass::NonCrossing => {
            let pass = NonCrossingPass::run(chain, n, &ties);
            if pass.partition(chain) <= 0.0 {
                return Err(Error::NullEvent);
            }
            pass.sample(chain, &ties, rng)
        }
        TopologyClass::RepeatedSection => {
            let cycle = RepeatedCycle::build(chain, n, &ties);
            if cycle.partition(&ties) <= 0.0 {
                return Err(Error::NullEvent);
            }
            let ys = cycle.sample(&ties, rng)?;
            fill_free_positions(chain, n, &pairs_to_fixed(&ties, &ys), rng)
        }
        TopologyClass::Palindromic => {
            let path = NestedPath::build(chain, n, &ties);
            if path.partition(&ties) <= 0.0 {
                return Err(Error::NullEvent);
            }
            let ys = path.sample(&ties, rng)?;
            fill_free_positions(chain, n, &pairs_to_fixed(&ties, &ys), rng)
        }
        TopologyClass::General => unreachable!(),
    }
}

/// `out[t][a] = P(X_t = a | all equalities hold)`, from pinned partitions.
pub fn equality_marginals<C: Chain + ?Sized>(chain: &C, eqs: &EqualitySet) -> Result<Vec<Vec<f64>>> {
    let z = partition(chain, eqs)?;
    if z.is_nan() || z <= 0.0 {
        return Err(Error::NullEvent);
    }
    (0..eqs.n)
        .map(|t| {
            (0..chain.size())
                .map(|a| match partition(&Pinned::new(chain, t, a), eqs) {
                    Ok(p) => Ok(p / z),
                    Err(Error::NullEvent) => Ok(0.0),
                    Err(e) => Err(e),
                })
                .collect()
        })
        .collect()
}
