use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::equality::EqualitySet;
use crate::error::{Error, Result};
use crate::markov::{sequence_probability, Alphabet, Matrix, StepChain};
use crate::oracle::{check_enumeration, for_each_word, ENUMERATION_GUARD};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CspEdge {
    pub u: usize,
    pub v: usize,
    /// `factor[x][y]` for `u = x`, `v = y`.
    pub factor: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub dummy: bool,
}

/// Binary CSP over one shared domain with 0/1 factors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BinaryCsp {
    domain: Alphabet,
    variables: usize,
    edges: Vec<CspEdge>,
}

#[derive(Deserialize)]
struct RawCsp {
    domain: Alphabet,
    #[serde(default)]
    variables: Option<usize>,
    edges: Vec<CspEdge>,
}

impl BinaryCsp {
    pub fn new(domain: Alphabet, variables: usize, edges: Vec<CspEdge>) -> Result<Self> {
        let k = domain.len();
        for (i, e) in edges.iter().enumerate() {
            if e.u == e.v {
                return Err(Error::Domain(format!("edge {i} is a self-loop")));
            }
            if e.u >= variables || e.v >= variables {
                return Err(Error::Domain(format!("edge {i} references an unknown variable")));
            }
            if e.factor.len() != k || e.factor.iter().any(|r| r.len() != k) {
                return Err(Error::Domain(format!("edge {i} factor is not {k}×{k}")));
            }
            if e.factor.iter().flatten().any(|&f| f > 1) {
                return Err(Error::Domain(format!("edge {i} factor has entries other than 0/1")));
            }
        }
        if variables == 0 {
            return Err(Error::Domain("a CSP needs at least one variable".into()));
        }
        Ok(BinaryCsp { domain, variables, edges })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawCsp = serde_json::from_str(text)?;
        let variables = raw.variables.unwrap_or_else(|| raw.edges.iter().map(|e| e.u.max(e.v) + 1).max().unwrap_or(1));
        Self::new(raw.domain, variables, raw.edges)
    }

    /// Edges constraining their endpoints to differ.
    pub fn not_equal(domain: Alphabet, variables: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let k = domain.len();
        let factor: Vec<Vec<u8>> = (0..k).map(|x| (0..k).map(|y| (x != y) as u8).collect()).collect();
        let edges = pairs.iter().map(|&(u, v)| CspEdge { u, v, factor: factor.clone(), dummy: false }).collect();
        Self::new(domain, variables, edges)
    }

    pub fn domain(&self) -> &Alphabet {
        &self.domain
    }

    pub fn variables(&self) -> usize {
        self.variables
    }

    pub fn edges(&self) -> &[CspEdge] {
        &self.edges
    }

    pub fn is_satisfied(&self, a: &[usize]) -> bool {
        self.edges.iter().all(|e| e.factor[a[e.u]][a[e.v]] == 1)
    }

    pub fn brute_force_count(&self) -> Result<u64> {
        check_enumeration(self.domain.len(), self.variables, ENUMERATION_GUARD)?;
        let mut count = 0;
        for_each_word(self.domain.len(), self.variables, |a| count += self.is_satisfied(a) as u64);
        Ok(count)
    }

    fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.variables];
        for e in &self.edges {
            d[e.u] += 1;
            d[e.v] += 1;
        }
        d
    }

    fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.variables];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        let mut seen = vec![false; self.variables];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn odd_vertices(&self) -> Vec<usize> {
        self.degrees().iter().enumerate().filter(|(_, &d)| d % 2 == 1).map(|(v, _)| v).collect()
    }
}

/// Adds all-ones dummy edges until at most two vertices have odd degree.
/// The two lowest odd vertices stay odd; the rest are paired in index order.
pub fn eulerize(csp: &BinaryCsp) -> Result<BinaryCsp> {
    if !csp.is_connected() {
        return Err(Error::Unsupported("factor graph is not connected".into()));
    }
    let k = csp.domain.len();
    let mut out = csp.clone();
    let odd = csp.odd_vertices();
    for pair in odd.get(2..).unwrap_or(&[]).chunks(2) {
        out.edges.push(CspEdge { u: pair[0], v: pair[1], factor: vec![vec![1; k]; k], dummy: true });
    }
    Ok(out)
}

/// Eulerian walk: the vertex sequence and, per step, the edge used and
/// whether it was traversed from `v` to `u`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EulerWalk {
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, bool)>,
}

/// Hierholzer's algorithm, starting at the lowest odd vertex (else vertex
/// 0) and taking edges in declaration order.
pub fn eulerian_path(csp: &BinaryCsp) -> Result<EulerWalk> {
    let odd = csp.odd_vertices();
    if odd.len() > 2 {
        return Err(Error::Precondition(format!("{} odd-degree vertices; eulerize first", odd.len())));
    }
    if !csp.is_connected() {
        return Err(Error::Unsupported("factor graph is not connected".into()));
    }
    let mut adj = vec![Vec::new(); csp.variables];
    for (i, e) in csp.edges.iter().enumerate() {
        adj[e.u].push(i);
        adj[e.v].push(i);
    }
    let start = odd.first().copied().unwrap_or(0);
    let mut used = vec![false; csp.edges.len()];
    let mut next = vec![0usize; csp.variables];
    // (vertex, edge taken to reach it)
    let mut stack: Vec<(usize, Option<(usize, bool)>)> = vec![(start, None)];
    let mut walk = Vec::new();
    while let Some(&(v, _)) = stack.last() {
        while next[v] < adj[v].len() && used[adj[v][next[v]]] {
            next[v] += 1;
        }
        if next[v] < adj[v].len() {
            let ei = adj[v][next[v]];
            used[ei] = true;
            let e = &csp.edges[ei];
            let (to, reversed) = if e.u == v { (e.v, false) } else { (e.u, true) };
            stack.push((to, Some((ei, reversed))));
        } else {
            walk.push(stack.pop().unwrap());
        }
    }
    walk.reverse();
    Ok(EulerWalk { vertices: walk.iter().map(|w| w.0).collect(), edges: walk.iter().filter_map(|w| w.1).collect() })
}

/// A CSP unwrapped into a chain along an Eulerian walk.
#[derive(Clone, Debug)]
pub struct UnwrapResult {
    pub chain: StepChain,
    pub equalities: EqualitySet,
    /// `row_weights[t][x]`: row sum of the factor used at step `t` from `x`.
    pub row_weights: Vec<Vec<f64>>,
    /// Chain position (0-based) to CSP variable.
    pub vertex_map: Vec<usize>,
    /// `(step, letter)` rows with no allowed successor, filled uniformly.
    pub dead_rows: Vec<(usize, usize)>,
    pub dummy_edges: usize,
    pub domain: Alphabet,
}

impl UnwrapResult {
    pub fn len(&self) -> usize {
        self.vertex_map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_map.is_empty()
    }

    /// P(w) · |A| · Π_t r_t(w_t): the number of CSP solutions `w` stands for.
    pub fn weight(&self, w: &[usize]) -> Result<f64> {
        let p = sequence_probability(&self.chain, w)?;
        let r: f64 = w.iter().zip(&self.row_weights).map(|(&x, row)| row[x]).product();
        Ok(p * self.domain.len() as f64 * r)
    }

    /// Σ over chains satisfying the equalities of [`weight`](Self::weight).
    pub fn weighted_count(&self) -> Result<f64> {
        let n = self.len();
        check_enumeration(self.domain.len(), n, ENUMERATION_GUARD)?;
        let mut total = 0.0;
        for_each_word(self.domain.len(), n, |w| {
            if self.equalities.is_satisfied(w) {
                total += self.weight(w).expect("valid word");
            }
        });
        Ok(total)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let steps: Vec<Vec<Vec<f64>>> = self.chain.steps().iter().map(|m| m.rows()).collect();
        json!({
            "alphabet": self.domain.symbols(),
            "length": self.len(),
            "p0": vec![1.0 / self.domain.len() as f64; self.domain.len()],
            "steps": steps,
            "equalities": self.equalities.constraints().iter().map(|c| [c.i, c.j]).collect::<Vec<_>>(),
            "row_weights": self.row_weights,
            "vertex_map": self.vertex_map,
            "dead_rows": self.dead_rows,
            "dummy_edges": self.dummy_edges,
        })
    }
}

pub fn unwrap_csp(csp: &BinaryCsp) -> Result<UnwrapResult> {
    let g = eulerize(csp)?;
    let walk = eulerian_path(&g)?;
    let k = csp.domain.len();
    let mut steps = Vec::with_capacity(walk.edges.len());
    let mut row_weights = Vec::with_capacity(walk.vertices.len());
    let mut dead_rows = Vec::new();
    for (t, &(ei, reversed)) in walk.edges.iter().enumerate() {
        let e = &g.edges[ei];
        let f = |x: usize, y: usize| if reversed { e.factor[y][x] } else { e.factor[x][y] } as f64;
        let mut m = Matrix::zeros(k);
        let mut weights = vec![0.0; k];
        for (x, weight) in weights.iter_mut().enumerate() {
            let r: f64 = (0..k).map(|y| f(x, y)).sum();
            *weight = r;
            for y in 0..k {
                m.set(x, y, if r > 0.0 { f(x, y) / r } else { 1.0 / k as f64 });
            }
            if r == 0.0 {
                dead_rows.push((t, x));
            }
        }
        steps.push(m);
        row_weights.push(weights);
    }
    // The last position has no outgoing step.
    row_weights.push(vec![1.0; k]);
    let chain = StepChain::new(vec![1.0 / k as f64; k], steps)?;

    let mut pairs = Vec::new();
    let mut last_seen: Vec<Option<usize>> = vec![None; g.variables];
    for (pos, &v) in walk.vertices.iter().enumerate() {
        if let Some(prev) = last_seen[v] {
            pairs.push((prev + 1, pos + 1));
        }
        last_seen[v] = Some(pos);
    }
    let equalities = EqualitySet::identity(walk.vertices.len(), &pairs)?;
    Ok(UnwrapResult {
        chain,
        equalities,
        row_weights,
        vertex_map: walk.vertices,
        dead_rows,
        dummy_edges: g.edges.len() - csp.edges.len(),
        domain: csp.domain.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReductionReport {
    pub csp_count: u64,
    pub weighted_count: f64,
    pub positive_chains: u64,
    pub bijection: bool,
    pub pass: bool,
}

/// Checks the unwrap end to end: brute-force CSP count, the weighted chain
/// count, and a bijection between CSP solutions and positive-weight chains.
pub fn verify_reduction(csp: &BinaryCsp) -> Result<ReductionReport> {
    let csp_count = csp.brute_force_count()?;
    let u = unwrap_csp(csp)?;
    let weighted_count = u.weighted_count()?;

    let mut bijection = true;
    let mut positive_chains = 0u64;
    let n = u.len();
    for_each_word(csp.domain.len(), n, |w| {
        if !u.equalities.is_satisfied(w) {
            return;
        }
        let weight = u.weight(w).expect("valid word");
        if weight <= 0.0 {
            return;
        }
        positive_chains += 1;
        let mut a = vec![0; csp.variables];
        for (pos, &v) in u.vertex_map.iter().enumerate() {
            a[v] = w[pos];
        }
        bijection &= csp.is_satisfied(&a) && (weight - 1.0).abs() < 1e-9;
    });
    // Every solution maps onto a chain word; the map is injective since every
    // variable appears in the walk.
    for_each_word(csp.domain.len(), csp.variables, |a| {
        if csp.is_satisfied(a) {
            let w: Vec<usize> = u.vertex_map.iter().map(|&v| a[v]).collect();
            bijection &= u.equalities.is_satisfied(&w) && u.weight(&w).expect("valid word") > 0.0;
        }
    });
    bijection &= positive_chains == csp_count;
    let pass = bijection && (weighted_count - csp_count as f64).abs() <= 1e-9 * (csp_count as f64).max(1.0);
    Ok(ReductionReport { csp_count, weighted_count, positive_chains, bijection, pass })
}
