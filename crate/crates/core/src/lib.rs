//! Feature-graph satisfiability for path-equation formulas, attribute-value
//! matrices, annotated right-linear grammars, and a reduction from CNF
//! satisfiability to recognition for one fixed grammar.

pub mod avm;
pub mod formula;
pub mod grammar;
pub mod graph;
pub mod recognizer;
pub mod sat;
pub mod solver;
pub mod store;

pub use avm::{format_avm, graph_to_avm, parse_avm, unify, Avm};
pub use formula::{format_formula, parse_formula, transform, Formula, PrimitiveFormula, PrimitiveSet, Term};
pub use grammar::{builtin_unification_grammar, parse_grammar, UnificationGrammar};
pub use graph::{graph_isomorphic, FeatureGraph};
pub use recognizer::{recognize, verify_certificate, Derivation};
pub use sat::{brute_force_sat, parse_dimacs, reduce_to_string, CnfFormula};
pub use solver::{feature_graph_sat, simplify, Answer, RuleOrder};
