//! Browser bindings for the featsat demo page. Each entry point takes the
//! page's text inputs and returns a JSON string; failures come back as
//! `{"error": ...}` so the page has a single code path.

use featsat::avm::{format_avm, graph_to_avm, parse_avm, unify};
use featsat::formula::parse_formula;
use featsat::grammar::builtin_unification_grammar;
use featsat::sat::{equivalence_check_with, parse_dimacs, CheckOptions};
use featsat::solver::feature_graph_sat;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

fn error(e: impl std::fmt::Display) -> Value {
    json!({ "error": e.to_string() })
}

pub fn solve_value(formula: &str) -> Value {
    let f = match parse_formula(formula) {
        Ok(f) => f,
        Err(e) => return error(e),
    };
    let v = feature_graph_sat(&f);
    match v.graph() {
        Some(g) => json!({
            "answer": v.answer.to_string(),
            "avm": format_avm(&graph_to_avm(g)),
            "graph": g,
            "applications": v.simplified.applications,
        }),
        None => json!({ "answer": v.answer.to_string(), "applications": v.simplified.applications }),
    }
}

pub fn unify_value(a: &str, b: &str) -> Value {
    let (x, y) = match (parse_avm(a), parse_avm(b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) => return error(format!("first AVM: {e}")),
        (_, Err(e)) => return error(format!("second AVM: {e}")),
    };
    match unify(&x, &y) {
        Ok(u) => json!({ "unified": true, "avm": u.to_string() }),
        Err(_) => json!({ "unified": false }),
    }
}

pub fn check_cnf_value(cnf: &str) -> Value {
    let parsed = match parse_dimacs(cnf) {
        Ok(p) => p,
        Err(e) => return error(e),
    };
    // Keep the page responsive on inputs the search cannot finish quickly.
    let opts = CheckOptions {
        max_states: Some(2_000_000),
        ..CheckOptions::default()
    };
    match equivalence_check_with(&builtin_unification_grammar(), &parsed.formula, &opts) {
        Ok(r) => json!({ "report": r, "warnings": parsed.warnings }),
        Err(e) => error(e),
    }
}

/// Decides a path-equation formula and describes its model.
#[wasm_bindgen]
pub fn solve(formula: &str) -> String {
    solve_value(formula).to_string()
}

/// Unifies two AVMs written in bracket notation.
#[wasm_bindgen]
pub fn unify_avms(a: &str, b: &str) -> String {
    unify_value(a, b).to_string()
}

/// Reduces a CNF formula to a string and compares brute-force SAT with
/// recognition of that string.
#[wasm_bindgen]
pub fn check_cnf(cnf: &str) -> String {
    check_cnf_value(cnf).to_string()
}
