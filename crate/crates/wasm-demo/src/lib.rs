//! Browser bindings for the demo page in `www/`. Every entry point takes the
//! same text formats as the command-line tool and returns a JSON string.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use constrained_markov::equality::{self, classify, equality_marginals, EqualitySet, TopologyClass};
use constrained_markov::grammar::{check_ambiguity_bounded, check_weak_ambiguity_bounded, to_cnf, Cfg, CnfGrammar};
use constrained_markov::inside::{
    build_chart, partition_unambiguous, positional_marginals, sample_word_unambiguous, ChartOptions,
};
use constrained_markov::weak::{build_weak_chart, partition_weak, positional_marginals_weak, sample_word_weak};
use constrained_markov::{Error, MarkovModel};

/// Longest words screened by the page before it picks a DP.
const SCREEN_BOUND: usize = 8;

fn js(e: Error) -> JsError {
    JsError::new(&format!("{}: {e}", e.code()))
}

fn load(grammar: &str, model: &str) -> Result<(CnfGrammar, MarkovModel), Error> {
    let model = MarkovModel::from_json(model)?;
    let cfg = if grammar.trim_start().starts_with('{') { Cfg::from_json(grammar)? } else { Cfg::parse(grammar)? };
    let g = to_cnf(&cfg)?.align_to(model.alphabet())?;
    Ok((g, model))
}

fn weak_mode(mode: &str) -> Result<bool, Error> {
    match mode {
        "unambiguous" => Ok(false),
        "weak" => Ok(true),
        other => Err(Error::Domain(format!("unknown mode {other:?}"))),
    }
}

fn options() -> ChartOptions {
    ChartOptions { ambiguity_bound: 0, threads: 1 }
}

/// Word mass under both DPs for n = 1..=max_n, with the bounded screens.
#[wasm_bindgen]
pub fn grammar_partitions(grammar: &str, model: &str, max_n: usize) -> Result<String, JsError> {
    let (g, m) = load(grammar, model).map_err(js)?;
    let bound = SCREEN_BOUND.min(max_n.max(1));
    let ambiguous = check_ambiguity_bounded(&g, bound).map_err(js)?;
    let overlap = check_weak_ambiguity_bounded(&g, bound).map_err(js)?;
    let mut rows = Vec::new();
    for n in 1..=max_n {
        let tree_sum = partition_unambiguous(&build_chart(&m, &g, n, options()).map_err(js)?, &g);
        let table = build_weak_chart(&m, &g, n, options()).map_err(js)?;
        rows.push(json!({
            "n": n,
            "unambiguous": tree_sum,
            "weak": partition_weak(&table, &g),
            "corrections": table.corrections_applied(),
        }));
    }
    let alphabet = g.terminals();
    Ok(json!({
        "cnf": g.to_text(),
        "bound": bound,
        "ambiguity_witness": ambiguous.map(|w| alphabet.render(&w)),
        "overlap": overlap.map(|v| json!({
            "first": g.nonterminals()[v.first],
            "second": g.nonterminals()[v.second],
            "word": alphabet.render(&v.word),
        })),
        "rows": rows,
    })
    .to_string())
}

fn histogram(words: &[Vec<usize>], render: impl Fn(&[usize]) -> String) -> Value {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for w in words {
        *counts.entry(render(w)).or_default() += 1;
    }
    let mut pairs: Vec<(String, usize)> = counts.into_iter().collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    json!(pairs)
}

/// Positional marginals and a histogram of exact samples for `w ∈ L_G^n`.
#[wasm_bindgen]
pub fn grammar_explore(
    grammar: &str,
    model: &str,
    n: usize,
    mode: &str,
    count: usize,
    seed: u64,
) -> Result<String, JsError> {
    let (g, m) = load(grammar, model).map_err(js)?;
    let weak = weak_mode(mode).map_err(js)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (z, marginals, words) = if weak {
        let table = build_weak_chart(&m, &g, n, options()).map_err(js)?;
        let words: Vec<Vec<usize>> =
            (0..count).map(|_| sample_word_weak(&table, &m, &g, &mut rng)).collect::<Result<_, _>>().map_err(js)?;
        (partition_weak(&table, &g), positional_marginals_weak(&m, &g, n, options()).map_err(js)?, words)
    } else {
        let chart = build_chart(&m, &g, n, options()).map_err(js)?;
        let words: Vec<Vec<usize>> = (0..count)
            .map(|_| sample_word_unambiguous(&chart, &m, &g, &mut rng))
            .collect::<Result<_, _>>()
            .map_err(js)?;
        (partition_unambiguous(&chart, &g), positional_marginals(&chart, &m, &g).map_err(js)?, words)
    };
    let alphabet = m.alphabet();
    Ok(json!({
        "alphabet": alphabet.symbols(),
        "partition": z,
        "marginals": marginals,
        "samples": histogram(&words, |w| alphabet.render(w)),
    })
    .to_string())
}

/// Topology, partition, marginals and samples under equality constraints.
#[wasm_bindgen]
pub fn equality_explore(model: &str, equalities: &str, count: usize, seed: u64) -> Result<String, JsError> {
    let m = MarkovModel::from_json(model).map_err(js)?;
    let eqs = EqualitySet::from_json(equalities, m.alphabet()).map_err(js)?;
    let class = classify(&eqs);
    if class == TopologyClass::General {
        return Ok(json!({ "topology": class.to_string() }).to_string());
    }
    let z = equality::partition(&m, &eqs).map_err(js)?;
    let alphabet = m.alphabet();
    let mut out = json!({ "topology": class.to_string(), "partition": z, "alphabet": alphabet.symbols() });
    if z > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words: Vec<Vec<usize>> = (0..count)
            .map(|_| equality::sample_equality_constrained(&m, &eqs, &mut rng))
            .collect::<Result<_, _>>()
            .map_err(js)?;
        out["marginals"] = json!(equality_marginals(&m, &eqs).map_err(js)?);
        out["samples"] = histogram(&words, |w| alphabet.render(w));
    }
    Ok(out.to_string())
}
