//! Context-free grammars and their Chomsky normal form.
//!
//! Text format, one rule per line (alternatives with `|` are accepted):
//!
//! ```text
//! # Dyck language
//! D -> P D | A B | A Q
//! A -> '('
//! ```
//!
//! Quoted tokens are terminals, bare tokens are nonterminals, and the first
//! left-hand side is the start symbol. An empty alternative derives ε; the
//! normal form drops ε since only words of length ≥ 1 are ever queried.

mod cyk;
mod tree;

pub(crate) use cyk::Spans;
pub use cyk::{
    check_ambiguity_bounded, check_weak_ambiguity_bounded, count_derivations, cyk_member, ParseChart, WeakViolation,
};
pub use tree::{all_parse_trees, canonical_tree, tree_less, ParseTree};

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::Alphabet;

/// Identifier of the fixed symbol ordering: nonterminals by first appearance
/// as a left-hand side (start first), then terminals in model alphabet order.
pub const SYMBOL_ORDER: &str = "nonterminals:lhs-first-seen;terminals:alphabet-order;v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    N(usize),
    T(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub lhs: usize,
    pub rhs: Vec<Symbol>,
}

/// A general context-free grammar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cfg {
    nonterminals: Vec<String>,
    terminals: Vec<String>,
    rules: Vec<Rule>,
    start: usize,
}

#[derive(Serialize, Deserialize)]
struct RawGrammar {
    start: String,
    rules: Vec<RawRule>,
}

#[derive(Serialize, Deserialize)]
struct RawRule {
    lhs: String,
    rhs: Vec<String>,
}

fn unquote(tok: &str) -> Option<&str> {
    let b = tok.as_bytes();
    if b.len() >= 3 && (b[0] == b'\'' || b[0] == b'"') && b[b.len() - 1] == b[0] {
        Some(&tok[1..tok.len() - 1])
    } else {
        None
    }
}

/// Splits a right-hand side into tokens, keeping quoted terminals intact.
fn tokenize(text: &str, line: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '\'' || c == '"' {
            chars.next();
            let mut tok = String::from(c);
            loop {
                match chars.next() {
                    Some(q) if q == c => {
                        tok.push(q);
                        break;
                    }
                    Some(other) => tok.push(other),
                    None => return Err(Error::Parse { line, msg: "unterminated terminal".into() }),
                }
            }
            if tok.len() == 2 {
                return Err(Error::Parse { line, msg: "empty terminal".into() });
            }
            out.push(tok);
        } else {
            let mut tok = String::new();
            while let Some(&d) = chars.peek() {
                if d.is_whitespace() || d == '\'' || d == '"' {
                    break;
                }
                tok.push(d);
                chars.next();
            }
            if tok.contains("->") {
                return Err(Error::Parse { line, msg: "unexpected `->` on the right-hand side".into() });
            }
            out.push(tok);
        }
    }
    Ok(out)
}

impl Cfg {
    /// Builds a grammar from `(lhs, rhs)` pairs written in the text syntax
    /// (`'a'` for terminals). The first lhs is the start symbol.
    pub fn from_rules(rules: &[(&str, &[&str])]) -> Result<Self> {
        let mut b = Builder::default();
        for (lhs, rhs) in rules {
            b.rule(lhs, rhs.iter().map(|s| s.to_string()).collect(), 0)?;
        }
        b.finish(None)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut b = Builder::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = strip_comment(raw);
            if content.trim().is_empty() {
                continue;
            }
            let (lhs, rhs) =
                content.split_once("->").ok_or_else(|| Error::Parse { line, msg: "expected `->`".into() })?;
            let lhs = lhs.trim();
            if lhs.is_empty() || lhs.contains(char::is_whitespace) || unquote(lhs).is_some() {
                return Err(Error::Parse { line, msg: format!("bad left-hand side {lhs:?}") });
            }
            for alt in split_alternatives(rhs) {
                let toks = tokenize(&alt, line)?;
                let toks = if toks.len() == 1 && (toks[0] == "ε" || toks[0] == "eps") { Vec::new() } else { toks };
                b.rule(lhs, toks, line)?;
            }
        }
        b.finish(None)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawGrammar = serde_json::from_str(text)?;
        let mut b = Builder::default();
        for r in &raw.rules {
            b.rule(&r.lhs, r.rhs.clone(), 0)?;
        }
        b.finish(Some(&raw.start))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let raw = RawGrammar {
            start: self.nonterminals[self.start].clone(),
            rules: self
                .rules
                .iter()
                .map(|r| RawRule {
                    lhs: self.nonterminals[r.lhs].clone(),
                    rhs: r.rhs.iter().map(|s| self.symbol_text(*s)).collect(),
                })
                .collect(),
        };
        serde_json::to_value(raw).expect("serializable")
    }

    fn symbol_text(&self, s: Symbol) -> String {
        match s {
            Symbol::N(v) => self.nonterminals[v].clone(),
            Symbol::T(a) => quote(&self.terminals[a]),
        }
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Whether `w` (terminal indices of this grammar) is derivable from the
    /// start symbol, by exhaustive search over sentential forms. Exponential;
    /// used only as a test oracle for small words.
    pub fn derives_exhaustive(&self, w: &[usize]) -> bool {
        let mut memo = HashMap::new();
        self.derives_seq(&[Symbol::N(self.start)], w, &mut memo, &mut BTreeSet::new())
    }

    fn derives_seq(
        &self,
        form: &[Symbol],
        w: &[usize],
        memo: &mut HashMap<(Vec<Symbol>, Vec<usize>), bool>,
        active: &mut BTreeSet<(Vec<Symbol>, Vec<usize>)>,
    ) -> bool {
        let key = (form.to_vec(), w.to_vec());
        if let Some(&r) = memo.get(&key) {
            return r;
        }
        // A form already being expanded on the current path is a left
        // recursion through nullable or unit rules; it cannot add new words.
        if !active.insert(key.clone()) {
            return false;
        }
        let result = match form.split_first() {
            None => w.is_empty(),
            Some((&Symbol::T(a), rest)) => !w.is_empty() && w[0] == a && self.derives_seq(rest, &w[1..], memo, active),
            Some((&Symbol::N(v), rest)) => (0..=w.len()).any(|cut| {
                self.derives_nt(v, &w[..cut], memo, active) && self.derives_seq(rest, &w[cut..], memo, active)
            }),
        };
        active.remove(&key);
        if result || active.is_empty() {
            memo.insert(key, result);
        }
        result
    }

    fn derives_nt(
        &self,
        v: usize,
        w: &[usize],
        memo: &mut HashMap<(Vec<Symbol>, Vec<usize>), bool>,
        active: &mut BTreeSet<(Vec<Symbol>, Vec<usize>)>,
    ) -> bool {
        let key = (vec![Symbol::N(v), Symbol::N(usize::MAX)], w.to_vec());
        if let Some(&r) = memo.get(&key) {
            return r;
        }
        if !active.insert(key.clone()) {
            return false;
        }
        let result = self.rules.iter().filter(|r| r.lhs == v).any(|r| self.derives_seq(&r.rhs, w, memo, active));
        active.remove(&key);
        // Results computed while a left-recursive ancestor was cut off may be
        // too pessimistic, so only cache successes and top-level failures.
        if result || active.is_empty() {
            memo.insert(key, result);
        }
        result
    }
}

fn quote(s: &str) -> String {
    if s.contains('\'') {
        format!("\"{s}\"")
    } else {
        format!("'{s}'")
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quote: Option<char> = None;
    for (i, c) in line.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '\'' || c == '"' => quote = Some(c),
            None if c == '#' => return &line[..i],
            None => {}
        }
    }
    line
}

fn split_alternatives(rhs: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut quote: Option<char> = None;
    for c in rhs.chars() {
        match quote {
            Some(q) if c == q => {
                quote = None;
                out.last_mut().unwrap().push(c);
            }
            Some(_) => out.last_mut().unwrap().push(c),
            None if c == '\'' || c == '"' => {
                quote = Some(c);
                out.last_mut().unwrap().push(c);
            }
            None if c == '|' => out.push(String::new()),
            None => out.last_mut().unwrap().push(c),
        }
    }
    out
}

#[derive(Default)]
struct Builder {
    nonterminals: Vec<String>,
    nt_index: HashMap<String, usize>,
    terminals: Vec<String>,
    t_index: HashMap<String, usize>,
    lhs_seen: Vec<usize>,
    rules: Vec<Rule>,
}

impl Builder {
    fn nt(&mut self, name: &str) -> usize {
        if let Some(&i) = self.nt_index.get(name) {
            return i;
        }
        self.nonterminals.push(name.to_string());
        self.nt_index.insert(name.to_string(), self.nonterminals.len() - 1);
        self.nonterminals.len() - 1
    }

    fn t(&mut self, name: &str) -> usize {
        if let Some(&i) = self.t_index.get(name) {
            return i;
        }
        self.terminals.push(name.to_string());
        self.t_index.insert(name.to_string(), self.terminals.len() - 1);
        self.terminals.len() - 1
    }

    fn rule(&mut self, lhs: &str, rhs: Vec<String>, line: usize) -> Result<()> {
        if unquote(lhs).is_some() || lhs.is_empty() {
            return Err(Error::Parse { line, msg: format!("bad left-hand side {lhs:?}") });
        }
        let l = self.nt(lhs);
        if !self.lhs_seen.contains(&l) {
            self.lhs_seen.push(l);
        }
        let rhs = rhs
            .iter()
            .map(|tok| match unquote(tok) {
                Some(t) => Symbol::T(self.t(t)),
                None => Symbol::N(self.nt(tok)),
            })
            .collect();
        self.rules.push(Rule { lhs: l, rhs });
        Ok(())
    }

    fn finish(self, start: Option<&str>) -> Result<Cfg> {
        let start = match start {
            Some(s) => *self
                .nt_index
                .get(s)
                .ok_or_else(|| Error::Parse { line: 0, msg: format!("unknown start symbol {s:?}") })?,
            None => {
                *self.lhs_seen.first().ok_or_else(|| Error::Parse { line: 0, msg: "grammar has no rules".into() })?
            }
        };
        if self.terminals.iter().any(|t| self.nt_index.contains_key(t)) {
            return Err(Error::Parse { line: 0, msg: "terminal and nonterminal names overlap".into() });
        }
        // Declaration order: left-hand sides as they first appear, then
        // symbols that only occur on right-hand sides.
        let mut order = self.lhs_seen.clone();
        order.extend((0..self.nonterminals.len()).filter(|v| !self.lhs_seen.contains(v)));
        let mut remap = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let nonterminals = order.iter().map(|&v| self.nonterminals[v].clone()).collect();
        let rules = self
            .rules
            .into_iter()
            .map(|r| Rule {
                lhs: remap[r.lhs],
                rhs: r
                    .rhs
                    .into_iter()
                    .map(|s| match s {
                        Symbol::N(v) => Symbol::N(remap[v]),
                        t => t,
                    })
                    .collect(),
            })
            .collect();
        Ok(Cfg { nonterminals, terminals: self.terminals, rules, start: remap[start] })
    }
}

// ---------------------------------------------------------------------------
// Chomsky normal form
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinaryRule {
    pub lhs: usize,
    pub left: usize,
    pub right: usize,
}

/// Grammar with only `V → A B` and `V → a` rules, every nonterminal
/// productive and reachable.
#[derive(Clone, Debug, PartialEq)]
pub struct CnfGrammar {
    nonterminals: Vec<String>,
    terminals: Alphabet,
    binary: Vec<BinaryRule>,
    lexical: Vec<(usize, usize)>,
    start: usize,
    by_lhs: Vec<Vec<usize>>,
    /// `emits[v * |A| + a]`
    emits: Vec<bool>,
}

impl CnfGrammar {
    /// Builds a CNF grammar, dropping unproductive and unreachable symbols.
    pub fn new(
        nonterminals: Vec<String>,
        terminals: Alphabet,
        binary: Vec<BinaryRule>,
        lexical: Vec<(usize, usize)>,
        start: usize,
    ) -> Result<Self> {
        let nv = nonterminals.len();
        if start >= nv {
            return Err(Error::Domain("start symbol out of range".into()));
        }
        if binary.iter().any(|r| r.lhs >= nv || r.left >= nv || r.right >= nv)
            || lexical.iter().any(|&(v, a)| v >= nv || a >= terminals.len())
        {
            return Err(Error::Domain("rule references an unknown symbol".into()));
        }

        // Productive symbols.
        let mut productive = vec![false; nv];
        for &(v, _) in &lexical {
            productive[v] = true;
        }
        loop {
            let mut changed = false;
            for r in &binary {
                if !productive[r.lhs] && productive[r.left] && productive[r.right] {
                    productive[r.lhs] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !productive[start] {
            return Err(Error::EmptyLanguage);
        }
        let binary: Vec<BinaryRule> =
            binary.into_iter().filter(|r| productive[r.lhs] && productive[r.left] && productive[r.right]).collect();

        // Reachable symbols.
        let mut reachable = vec![false; nv];
        reachable[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for r in binary.iter().filter(|r| r.lhs == v) {
                for c in [r.left, r.right] {
                    if !reachable[c] {
                        reachable[c] = true;
                        stack.push(c);
                    }
                }
            }
        }

        let keep: Vec<usize> = (0..nv).filter(|&v| productive[v] && reachable[v]).collect();
        let mut remap = vec![usize::MAX; nv];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let names: Vec<String> = keep.iter().map(|&v| nonterminals[v].clone()).collect();
        let mut seen_b = BTreeSet::new();
        let binary: Vec<BinaryRule> = binary
            .into_iter()
            .filter(|r| reachable[r.lhs])
            .map(|r| BinaryRule { lhs: remap[r.lhs], left: remap[r.left], right: remap[r.right] })
            .filter(|r| seen_b.insert(*r))
            .collect();
        let mut seen_l = BTreeSet::new();
        let lexical: Vec<(usize, usize)> = lexical
            .into_iter()
            .filter(|&(v, _)| productive[v] && reachable[v])
            .map(|(v, a)| (remap[v], a))
            .filter(|p| seen_l.insert(*p))
            .collect();
        Ok(Self::assemble(names, terminals, binary, lexical, remap[start]))
    }

    fn assemble(
        nonterminals: Vec<String>,
        terminals: Alphabet,
        binary: Vec<BinaryRule>,
        lexical: Vec<(usize, usize)>,
        start: usize,
    ) -> Self {
        let nv = nonterminals.len();
        let k = terminals.len();
        let mut by_lhs = vec![Vec::new(); nv];
        for (idx, r) in binary.iter().enumerate() {
            by_lhs[r.lhs].push(idx);
        }
        let mut emits = vec![false; nv * k];
        for &(v, a) in &lexical {
            emits[v * k + a] = true;
        }
        CnfGrammar { nonterminals, terminals, binary, lexical, start, by_lhs, emits }
    }

    /// Parses the text format and normalizes.
    pub fn parse(text: &str) -> Result<Self> {
        to_cnf(&Cfg::parse(text)?)
    }

    pub fn from_rules(rules: &[(&str, &[&str])]) -> Result<Self> {
        to_cnf(&Cfg::from_rules(rules)?)
    }

    /// Re-indexes terminals into `alphabet`, which must contain every
    /// terminal of the grammar. Extra alphabet symbols derive nothing.
    pub fn align_to(&self, alphabet: &Alphabet) -> Result<Self> {
        let map = self
            .terminals
            .symbols()
            .iter()
            .map(|t| {
                alphabet.index_of(t).ok_or_else(|| {
                    Error::AlphabetMismatch(format!("grammar terminal {t:?} is not in the model alphabet"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let lexical = self.lexical.iter().map(|&(v, a)| (v, map[a])).collect();
        Ok(Self::assemble(self.nonterminals.clone(), alphabet.clone(), self.binary.clone(), lexical, self.start))
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn num_nonterminals(&self) -> usize {
        self.nonterminals.len()
    }

    pub fn nonterminal_index(&self, name: &str) -> Option<usize> {
        self.nonterminals.iter().position(|n| n == name)
    }

    pub fn terminals(&self) -> &Alphabet {
        &self.terminals
    }

    pub fn binary_rules(&self) -> &[BinaryRule] {
        &self.binary
    }

    pub fn lexical_rules(&self) -> &[(usize, usize)] {
        &self.lexical
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Indices into [`binary_rules`](Self::binary_rules) with the given lhs.
    pub fn rules_for(&self, lhs: usize) -> &[usize] {
        &self.by_lhs[lhs]
    }

    #[inline]
    pub fn emits(&self, v: usize, a: usize) -> bool {
        self.emits[v * self.terminals.len() + a]
    }

    /// Terminal indices that appear in some lexical rule, ascending.
    pub fn used_terminals(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.lexical.iter().map(|&(_, a)| a).collect();
        set.into_iter().collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut order: Vec<usize> = (0..self.nonterminals.len()).collect();
        order.sort_by_key(|&v| (v != self.start, v));
        for v in order {
            let mut alts: Vec<String> = self.by_lhs[v]
                .iter()
                .map(|&r| {
                    let r = self.binary[r];
                    format!("{} {}", self.nonterminals[r.left], self.nonterminals[r.right])
                })
                .collect();
            alts.extend(self.lexical.iter().filter(|&&(l, _)| l == v).map(|&(_, a)| quote(self.terminals.symbol(a))));
            if !alts.is_empty() {
                let _ = writeln!(out, "{} -> {}", self.nonterminals[v], alts.join(" | "));
            }
        }
        out
    }

    pub fn to_cfg(&self) -> Cfg {
        let mut rules: Vec<Rule> =
            self.binary.iter().map(|r| Rule { lhs: r.lhs, rhs: vec![Symbol::N(r.left), Symbol::N(r.right)] }).collect();
        rules.extend(self.lexical.iter().map(|&(v, a)| Rule { lhs: v, rhs: vec![Symbol::T(a)] }));
        Cfg {
            nonterminals: self.nonterminals.clone(),
            terminals: self.terminals.symbols().to_vec(),
            rules,
            start: self.start,
        }
    }
}

struct Names {
    taken: BTreeSet<String>,
}

impl Names {
    fn fresh(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        let mut n = 1;
        while self.taken.contains(&name) {
            name = format!("{base}_{n}");
            n += 1;
        }
        self.taken.insert(name.clone());
        name
    }
}

/// Normalizes a grammar to Chomsky normal form. The language is preserved
/// up to ε.
pub fn to_cnf(g: &Cfg) -> Result<CnfGrammar> {
    let mut names = Names { taken: g.nonterminals.iter().chain(&g.terminals).cloned().collect() };
    let mut nts = g.nonterminals.clone();
    let mut rules: Vec<Rule> = g.rules.clone();

    // Terminals inside longer right-hand sides get their own nonterminal.
    let mut term_nt: HashMap<usize, usize> = HashMap::new();
    let mut extra = Vec::new();
    for r in &mut rules {
        if r.rhs.len() < 2 {
            continue;
        }
        for s in &mut r.rhs {
            if let Symbol::T(a) = *s {
                let v = *term_nt.entry(a).or_insert_with(|| {
                    let t = &g.terminals[a];
                    let upper = t.to_uppercase();
                    let base =
                        if !upper.is_empty() && upper != *t && upper.chars().all(|c| c.is_alphanumeric() || c == '_') {
                            upper
                        } else {
                            format!("T_{t}")
                        };
                    nts.push(names.fresh(&base));
                    extra.push(Rule { lhs: nts.len() - 1, rhs: vec![Symbol::T(a)] });
                    nts.len() - 1
                });
                *s = Symbol::N(v);
            }
        }
    }
    rules.extend(extra);

    // Binarize.
    let mut binarized = Vec::with_capacity(rules.len());
    for r in rules {
        if r.rhs.len() <= 2 {
            binarized.push(r);
            continue;
        }
        let mut lhs = r.lhs;
        let base = g.nonterminals.get(r.lhs).cloned().unwrap_or_else(|| nts[r.lhs].clone());
        for s in &r.rhs[..r.rhs.len() - 2] {
            nts.push(names.fresh(&format!("{base}_bin")));
            let next = nts.len() - 1;
            binarized.push(Rule { lhs, rhs: vec![*s, Symbol::N(next)] });
            lhs = next;
        }
        binarized.push(Rule { lhs, rhs: r.rhs[r.rhs.len() - 2..].to_vec() });
    }
    let rules = binarized;

    // Remove ε-rules.
    let nv = nts.len();
    let mut nullable = vec![false; nv];
    loop {
        let mut changed = false;
        for r in &rules {
            if !nullable[r.lhs] && r.rhs.iter().all(|s| matches!(s, Symbol::N(v) if nullable[*v])) {
                nullable[r.lhs] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut no_eps: BTreeSet<(usize, Vec<Symbol>)> = BTreeSet::new();
    let mut ordered = Vec::new();
    let mut push = |lhs: usize, rhs: Vec<Symbol>, ordered: &mut Vec<Rule>| {
        if !rhs.is_empty() && no_eps.insert((lhs, rhs.clone())) {
            ordered.push(Rule { lhs, rhs });
        }
    };
    for r in &rules {
        push(r.lhs, r.rhs.clone(), &mut ordered);
        if r.rhs.len() == 2 {
            for (keep, drop) in [(1, 0), (0, 1)] {
                if let Symbol::N(v) = r.rhs[drop] {
                    if nullable[v] {
                        push(r.lhs, vec![r.rhs[keep]], &mut ordered);
                    }
                }
            }
        }
    }
    let rules = ordered;

    // Remove unit rules via the unit closure of every nonterminal.
    let mut binary = Vec::new();
    let mut lexical = Vec::new();
    for a in 0..nv {
        let mut closure = vec![a];
        let mut seen = vec![false; nv];
        seen[a] = true;
        let mut i = 0;
        while i < closure.len() {
            let b = closure[i];
            for r in rules.iter().filter(|r| r.lhs == b) {
                if let [Symbol::N(c)] = r.rhs[..] {
                    if !seen[c] {
                        seen[c] = true;
                        closure.push(c);
                    }
                }
            }
            i += 1;
        }
        for &b in &closure {
            for r in rules.iter().filter(|r| r.lhs == b) {
                match r.rhs[..] {
                    [Symbol::T(t)] => lexical.push((a, t)),
                    [Symbol::N(x), Symbol::N(y)] => binary.push(BinaryRule { lhs: a, left: x, right: y }),
                    [Symbol::N(_)] => {}
                    _ => unreachable!("rules are binarized and terminals isolated"),
                }
            }
        }
    }

    let terminals = Alphabet::new(g.terminals.clone()).map_err(|_| Error::EmptyLanguage)?;
    CnfGrammar::new(nts, terminals, binary, lexical, g.start)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const DYCK: &str = "\
# balanced parentheses
D -> P D | A B | A Q
P -> A B | A Q
Q -> D B
A -> '('
B -> ')'
";

    pub fn dyck() -> CnfGrammar {
        CnfGrammar::parse(DYCK).unwrap()
    }

    /// S → S S | a
    pub fn catalan() -> CnfGrammar {
        CnfGrammar::parse("S -> S S | 'a'").unwrap()
    }
}
