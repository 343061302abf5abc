mod common;

use featsat::avm::{avm_graph, avm_to_formula, format_avm, graph_to_avm, parse_avm, unify, Avm, UnifyFailure};
use featsat::graph::{graph_isomorphic, FeatureGraph};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph(seed: u64) -> FeatureGraph {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let nodes = r.gen_range(1..=6);
    let extra = r.gen_range(0..=6);
    common::random_graph(&mut r, nodes, 3, 2, extra)
}

fn avm(seed: u64) -> Avm {
    graph_to_avm(&graph(seed))
}

fn same(a: &Result<Avm, UnifyFailure>, b: &Result<Avm, UnifyFailure>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => graph_isomorphic(&avm_graph(x).unwrap(), &avm_graph(y).unwrap()),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 300,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn printing_round_trips(seed in any::<u64>()) {
        let a = avm(seed);
        prop_assert_eq!(parse_avm(&format_avm(&a)).unwrap(), a);
    }

    #[test]
    fn graph_round_trips_through_avm(seed in any::<u64>()) {
        let g = graph(seed);
        let back = avm_graph(&graph_to_avm(&g)).unwrap();
        prop_assert!(graph_isomorphic(&g, &back));
    }

    #[test]
    fn unification_matches_graph_oracle(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (g1, g2) = (graph(s1), graph(s2));
        let ours = unify(&graph_to_avm(&g1), &graph_to_avm(&g2));
        let oracle = common::graph_unify_oracle(&g1, &g2);
        match (&ours, &oracle) {
            (Ok(a), Some(g)) => prop_assert!(graph_isomorphic(&avm_graph(a).unwrap(), g), "{}", a),
            (Err(_), None) => {}
            _ => prop_assert!(false, "unify {:?} vs oracle {:?}", ours, oracle.is_some()),
        }
    }

    #[test]
    fn unification_is_commutative(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (avm(s1), avm(s2));
        prop_assert!(same(&unify(&a, &b), &unify(&b, &a)));
    }

    #[test]
    fn unification_is_associative(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let (a, b, c) = (avm(s1), avm(s2), avm(s3));
        let left = unify(&a, &b).and_then(|ab| unify(&ab, &c));
        let right = unify(&b, &c).and_then(|bc| unify(&a, &bc));
        prop_assert!(same(&left, &right));
    }

    #[test]
    fn empty_matrix_is_the_identity(seed in any::<u64>()) {
        let a = avm(seed);
        prop_assert!(same(&unify(&a, &Avm::empty()), &Ok(a.clone())));
        prop_assert!(same(&unify(&a, &a), &Ok(a)));
    }
}

#[test]
fn described_formula_is_rooted_at_x0() {
    let a = parse_avm("[subject: [number: #1 singular], predicate: [number: #1]]").unwrap();
    let f = avm_to_formula(&a);
    assert_eq!(f.first_term(), &featsat::Term::var("x0"));
}

#[test]
fn oracle_comparison_sees_both_outcomes() {
    let (mut ok, mut fail) = (0, 0);
    for s in 0..500u64 {
        let (g1, g2) = (graph(s), graph(s + 10_000));
        let ours = unify(&graph_to_avm(&g1), &graph_to_avm(&g2));
        assert_eq!(ours.is_ok(), common::graph_unify_oracle(&g1, &g2).is_some());
        if ours.is_ok() {
            ok += 1;
        } else {
            fail += 1;
        }
    }
    assert!(ok > 50 && fail > 50, "ok {ok} fail {fail}");
}
