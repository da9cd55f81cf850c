use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of distinct subsets alive at one step.
pub const SUBSET_GUARD: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    /// 1-based variable index.
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn from_dimacs(v: i64) -> Self {
        Literal { var: v.unsigned_abs() as usize, positive: v > 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoSatFormula {
    num_vars: usize,
    clauses: Vec<[Literal; 2]>,
}

impl TwoSatFormula {
    pub fn new(num_vars: usize, clauses: Vec<[Literal; 2]>) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::Domain("a formula needs at least one variable".into()));
        }
        for c in &clauses {
            for l in c {
                if l.var == 0 || l.var > num_vars {
                    return Err(Error::Domain(format!("variable {} outside 1..={num_vars}", l.var)));
                }
            }
        }
        Ok(TwoSatFormula { num_vars, clauses })
    }

    /// Clauses as signed DIMACS literals.
    pub fn from_pairs(num_vars: usize, pairs: &[(i64, i64)]) -> Result<Self> {
        let clauses = pairs.iter().map(|&(a, b)| [Literal::from_dimacs(a), Literal::from_dimacs(b)]).collect();
        Self::new(num_vars, clauses)
    }

    /// DIMACS CNF with exactly two literals per clause.
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current: Vec<i64> = Vec::new();
        let mut last_line = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 || parts[1] != "cnf" {
                    return Err(Error::Parse { line: line_no, msg: "expected `p cnf <vars> <clauses>`".into() });
                }
                let parse = |s: &str| {
                    s.parse::<usize>().map_err(|_| Error::Parse { line: line_no, msg: format!("bad number {s:?}") })
                };
                header = Some((parse(parts[2])?, parse(parts[3])?));
                continue;
            }
            if header.is_none() {
                return Err(Error::Parse { line: line_no, msg: "clause before header".into() });
            }
            for tok in line.split_whitespace() {
                let v: i64 =
                    tok.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad literal {tok:?}") })?;
                if v == 0 {
                    if current.len() != 2 {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: format!("clause has {} literals, expected 2", current.len()),
                        });
                    }
                    clauses.push([Literal::from_dimacs(current[0]), Literal::from_dimacs(current[1])]);
                    current.clear();
                } else {
                    current.push(v);
                }
            }
            last_line = line_no;
        }
        let (n, k) = header.ok_or(Error::Parse { line: 0, msg: "missing header".into() })?;
        if !current.is_empty() {
            return Err(Error::Parse { line: last_line, msg: "unterminated clause".into() });
        }
        if clauses.len() != k {
            return Err(Error::Parse {
                line: last_line,
                msg: format!("header declares {k} clauses, found {}", clauses.len()),
            });
        }
        Self::new(n, clauses).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            let lit = |l: &Literal| if l.positive { l.var as i64 } else { -(l.var as i64) };
            let _ = writeln!(out, "{} {} 0", lit(&c[0]), lit(&c[1]));
        }
        out
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[[Literal; 2]] {
        &self.clauses
    }

    /// `bits[i]` is the value of variable `i + 1`; 1 is true.
    pub fn is_satisfied(&self, bits: &[u8]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|l| (bits[l.var - 1] == 1) == l.positive))
    }

    /// Satisfying assignments by enumeration.
    pub fn brute_force_count(&self) -> Result<u64> {
        if self.num_vars > 30 {
            return Err(Error::GuardExceeded { requested: 1u128 << self.num_vars.min(127), limit: 1 << 30 });
        }
        let mut bits = vec![0u8; self.num_vars];
        let mut count = 0;
        for mask in 0u64..(1 << self.num_vars) {
            for (i, b) in bits.iter_mut().enumerate() {
                *b = ((mask >> (self.num_vars - 1 - i)) & 1) as u8;
            }
            count += self.is_satisfied(&bits) as u64;
        }
        Ok(count)
    }
}

/// Nondeterministic automaton over the labels {0, 1}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nfa {
    pub num_states: usize,
    pub initial: usize,
    pub accepting: Vec<usize>,
    /// `(from, label, to)`
    pub transitions: Vec<(usize, u8, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub names: Vec<String>,
}

impl Nfa {
    pub fn new(
        num_states: usize,
        initial: usize,
        accepting: Vec<usize>,
        transitions: Vec<(usize, u8, usize)>,
    ) -> Result<Self> {
        if initial >= num_states
            || accepting.iter().any(|&s| s >= num_states)
            || transitions.iter().any(|&(a, l, b)| a >= num_states || b >= num_states || l > 1)
        {
            return Err(Error::Domain("transition or state out of range".into()));
        }
        Ok(Nfa { num_states, initial, accepting, transitions, names: Vec::new() })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Nfa = serde_json::from_str(text)?;
        let mut nfa = Nfa::new(raw.num_states, raw.initial, raw.accepting, raw.transitions)?;
        nfa.names = raw.names;
        Ok(nfa)
    }

    fn name(&self, s: usize) -> String {
        self.names.get(s).cloned().unwrap_or_else(|| format!("q{s}"))
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph nfa {\n  rankdir=LR;\n  start [shape=point];\n");
        for s in 0..self.num_states {
            let shape = if self.accepting.contains(&s) { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  {s} [label=\"{}\", shape={shape}];", self.name(s));
        }
        let _ = writeln!(out, "  start -> {};", self.initial);
        // Merge parallel edges into one "0,1" edge.
        let mut edges: BTreeMap<(usize, usize), Vec<u8>> = BTreeMap::new();
        for &(a, l, b) in &self.transitions {
            edges.entry((a, b)).or_default().push(l);
        }
        for ((a, b), mut labels) in edges {
            labels.sort();
            labels.dedup();
            let text: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
            let _ = writeln!(out, "  {a} -> {b} [label=\"{}\"];", text.join(","));
        }
        out.push_str("}\n");
        out
    }

    fn successors(&self) -> Vec<[Vec<usize>; 2]> {
        let mut succ = vec![[Vec::new(), Vec::new()]; self.num_states];
        for &(a, l, b) in &self.transitions {
            succ[a][l as usize].push(b);
        }
        succ
    }

    pub fn accepts(&self, word: &[u8]) -> bool {
        let succ = self.successors();
        let mut cur = vec![false; self.num_states];
        cur[self.initial] = true;
        for &c in word {
            let mut next = vec![false; self.num_states];
            for s in (0..self.num_states).filter(|&s| cur[s]) {
                for &t in &succ[s][c as usize] {
                    next[t] = true;
                }
            }
            cur = next;
        }
        self.accepting.iter().any(|&s| cur[s])
    }

    /// Number of distinct accepted strings of length `n`.
    pub fn count_accepted(&self, n: usize) -> Result<BigUint> {
        self.count_accepted_with_guard(n, SUBSET_GUARD)
    }

    /// Counts accepted strings by running the subset construction on the
    /// fly, tracking how many strings reach each subset. `guard` caps the
    /// number of distinct subsets alive at any step.
    pub fn count_accepted_with_guard(&self, n: usize, guard: usize) -> Result<BigUint> {
        let words = self.num_states.div_ceil(64).max(1);
        let succ = self.successors();
        let mut layer: BTreeMap<Vec<u64>, BigUint> = BTreeMap::new();
        let mut init = vec![0u64; words];
        init[self.initial / 64] |= 1 << (self.initial % 64);
        layer.insert(init, BigUint::one());
        for _ in 0..n {
            let mut next: BTreeMap<Vec<u64>, BigUint> = BTreeMap::new();
            for (set, count) in &layer {
                for label in [0, 1] {
                    let mut to = vec![0u64; words];
                    let mut any = false;
                    for s in 0..self.num_states {
                        if set[s / 64] >> (s % 64) & 1 == 1 {
                            for &t in &succ[s][label] {
                                to[t / 64] |= 1 << (t % 64);
                                any = true;
                            }
                        }
                    }
                    if any {
                        *next.entry(to).or_insert_with(BigUint::zero) += count;
                    }
                }
            }
            if next.len() > guard {
                return Err(Error::GuardExceeded { requested: next.len() as u128, limit: guard as u128 });
            }
            layer = next;
        }
        let mut total = BigUint::zero();
        for (set, count) in layer {
            if self.accepting.iter().any(|&s| set[s / 64] >> (s % 64) & 1 == 1) {
                total += count;
            }
        }
        Ok(total)
    }
}

/// Automaton accepting the length-n assignments (bit `i` = variable `i+1`,
/// 1 = true) that falsify at least one clause. One chain of `n` states per
/// clause; the step into position `i` of a chain reads the falsifying value
/// if variable `i` occurs in the clause and anything otherwise.
pub fn build_falsifying_nfa(phi: &TwoSatFormula) -> Nfa {
    let n = phi.num_vars();
    let k = phi.clauses().len();
    let state = |clause: usize, pos: usize| 1 + clause * n + pos;
    let mut transitions = Vec::new();
    let mut accepting = Vec::new();
    let mut names = vec!["s0".to_string()];
    for (c, clause) in phi.clauses().iter().enumerate() {
        for pos in 0..n {
            names.push(format!("s{}_{}", c + 1, pos + 1));
            let from = if pos == 0 { 0 } else { state(c, pos - 1) };
            let to = state(c, pos);
            // A literal is false when its variable takes 0 (positive) or 1.
            let mut allowed = [true, true];
            for l in clause.iter().filter(|l| l.var == pos + 1) {
                allowed[l.positive as usize] = false;
            }
            for label in 0..2u8 {
                if allowed[label as usize] {
                    transitions.push((from, label, to));
                }
            }
        }
        accepting.push(state(c, n - 1));
    }
    Nfa { num_states: 1 + n * k, initial: 0, accepting, transitions, names }
}

/// Number of satisfying assignments, as 2^n minus the falsifying strings.
pub fn count_sat(phi: &TwoSatFormula) -> Result<BigUint> {
    count_sat_with_guard(phi, SUBSET_GUARD)
}

pub fn count_sat_with_guard(phi: &TwoSatFormula, guard: usize) -> Result<BigUint> {
    let unsat = build_falsifying_nfa(phi).count_accepted_with_guard(phi.num_vars(), guard)?;
    Ok((BigUint::one() << phi.num_vars()) - unsat)
}
