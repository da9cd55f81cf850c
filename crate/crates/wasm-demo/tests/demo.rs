use constrained_markov_wasm::{equality_explore, grammar_explore, grammar_partitions};
use serde_json::{json, Value};

const MODEL: &str = r#"{"alphabet":["a","b"],"p0":[0.5,0.5],"t":[[0.5,0.5],[0.5,0.5]]}"#;

#[test]
fn catalan_curve_separates_the_two_dps() {
    let v: Value = serde_json::from_str(&grammar_partitions("S -> S S | 'a'", MODEL, 4).unwrap()).unwrap();
    let row = &v["rows"][3];
    assert_eq!(row["weak"], 0.0625);
    assert_eq!(row["unambiguous"], 5.0 * 0.0625);
    assert_eq!(v["ambiguity_witness"], "aaa");
}

#[test]
fn explore_is_seeded() {
    let g = "S -> 'a' S 'b' | 'a' 'b'";
    let a = grammar_explore(g, MODEL, 4, "unambiguous", 50, 3).unwrap();
    assert_eq!(a, grammar_explore(g, MODEL, 4, "unambiguous", 50, 3).unwrap());
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["samples"], json!([["aabb", 50]]));
    let marginals = v["marginals"].as_array().unwrap();
    assert_eq!(marginals[0], json!([1.0, 0.0]));
}

#[test]
fn weak_mode_samples_only_members() {
    let v: Value = serde_json::from_str(&grammar_explore("S -> S S | 'a'", MODEL, 5, "weak", 20, 9).unwrap()).unwrap();
    assert_eq!(v["partition"], 0.03125);
    assert_eq!(v["samples"], json!([["aaaaa", 20]]));
}

#[test]
fn equality_page_reports_topology() {
    let eqs = r#"{"n":4,"constraints":[{"i":1,"j":4},{"i":2,"j":3}]}"#;
    let v: Value = serde_json::from_str(&equality_explore(MODEL, eqs, 10, 1).unwrap()).unwrap();
    assert_eq!(v["topology"], "Palindromic");
    assert_eq!(v["partition"], 0.25);

    let crossing = r#"{"n":5,"constraints":[{"i":1,"j":3},{"i":2,"j":5},{"i":4,"j":5}]}"#;
    let v: Value = serde_json::from_str(&equality_explore(MODEL, crossing, 10, 1).unwrap()).unwrap();
    assert_eq!(v["topology"], "General");
}
