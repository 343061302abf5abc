//! Recognition for annotated right-linear grammars.
//!
//! The search walks derivations depth first in grammar order. Each applied
//! production consumes its terminals, instantiates its annotation with the
//! node variables `?n<i>` (head) and `?n<i+1>` (tail), and adds the result to
//! an incremental constraint store; a clash prunes the branch immediately.
//! Acyclicity is checked once the input is used up. A found derivation
//! doubles as a certificate that [`verify_certificate`] re-checks from
//! scratch.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::formula::{transform_into, Equation, Formula, FreshVars, Path, PrimitiveSet, Term};
use crate::grammar::{backbone, check_offline_parsability, instantiate, NonTerminal, UnificationGrammar, UnknownSymbol};
use crate::graph::{FeatureGraph, Target};
use crate::solver::{extract_model, feature_graph_sat};
use crate::store::ConstraintStore;

pub fn node_var(i: usize) -> Term {
    Term::var(&format!("n{i}"))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivationStep {
    pub rule: usize,
    pub node: Term,
    /// Present iff the production has a tail nonterminal.
    pub child: Option<Term>,
}

/// A leftmost derivation: the production applied at each step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub steps: Vec<DerivationStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DerivationError {
    #[error("empty derivation")]
    Empty,
    #[error("step {step}: no production {rule}")]
    NoSuchRule { step: usize, rule: usize },
    #[error("step {step}: expected a production for {expected}, got one for {found}")]
    HeadMismatch {
        step: usize,
        expected: String,
        found: String,
    },
    #[error("derivation ends at step {step} but the production still has a tail")]
    Unfinished { step: usize },
    #[error("step {step}: production has no tail but the derivation continues")]
    Overrun { step: usize },
    #[error("malformed certificate: {0}")]
    Syntax(String),
}

impl Derivation {
    /// Rebuilds node variables for a list of production indices, checking
    /// that the productions chain from the start symbol to a tail-less end.
    pub fn from_rules(g: &UnificationGrammar, rules: &[usize]) -> Result<Self, DerivationError> {
        if rules.is_empty() {
            return Err(DerivationError::Empty);
        }
        let mut expected = &g.start;
        let mut steps = Vec::with_capacity(rules.len());
        for (i, &r) in rules.iter().enumerate() {
            let prod = g
                .rules
                .get(r)
                .ok_or(DerivationError::NoSuchRule { step: i, rule: r })?;
            if &prod.head != expected {
                return Err(DerivationError::HeadMismatch {
                    step: i,
                    expected: expected.to_string(),
                    found: prod.head.to_string(),
                });
            }
            let last = i + 1 == rules.len();
            match (&prod.body.tail, last) {
                (Some(_), true) => return Err(DerivationError::Unfinished { step: i }),
                (None, false) => return Err(DerivationError::Overrun { step: i }),
                (Some(t), false) => expected = t,
                (None, true) => {}
            }
            steps.push(DerivationStep {
                rule: r,
                node: node_var(i),
                child: prod.body.tail.as_ref().map(|_| node_var(i + 1)),
            });
        }
        Ok(Derivation { steps })
    }

    pub fn rules(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.rule).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Concatenated terminals of the applied productions.
    pub fn yield_text(&self, g: &UnificationGrammar) -> String {
        self.steps
            .iter()
            .map(|s| g.rules[s.rule].body.yield_text())
            .collect()
    }

    /// Parses the one-line certificate form `d: 1 9 11 14 2`.
    pub fn parse_certificate(g: &UnificationGrammar, text: &str) -> Result<Self, DerivationError> {
        let body = text
            .trim()
            .strip_prefix("d:")
            .ok_or_else(|| DerivationError::Syntax("expected 'd:' prefix".into()))?;
        let rules = body
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| DerivationError::Syntax(format!("{t:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rules(g, &rules)
    }
}

/// The certificate line `d: r0 r1 ...` of production indices.
impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("d:")?;
        for s in &self.steps {
            write!(f, " {}", s.rule)?;
        }
        Ok(())
    }
}

/// Conjoins every step's instantiated annotation. A derivation whose
/// productions are all unannotated yields the trivially true `?n0 = ?n0`.
pub fn derivation_formula(g: &UnificationGrammar, d: &Derivation) -> Result<Formula, DerivationError> {
    let checked = Derivation::from_rules(g, &d.rules())?;
    let mut eqs = Vec::new();
    for s in &checked.steps {
        if let Some(f) = instantiate(&g.rules[s.rule].annotation, &s.node, s.child.as_ref()) {
            eqs.extend(f.conjuncts().iter().cloned());
        }
    }
    let n0 = node_var(0);
    Ok(Formula::new(eqs)
        .unwrap_or_else(|| Formula::single(Equation::new(Path::empty(), n0.clone(), Path::empty(), n0))))
}

#[derive(Clone, Debug)]
pub struct RecognitionResult {
    pub accepted: bool,
    pub derivation: Option<Derivation>,
    pub states_explored: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecognizeError {
    #[error("the grammar has a nonterminal that derives itself without consuming input")]
    NotOfflineParsable,
    #[error(transparent)]
    UnknownSymbol(#[from] UnknownSymbol),
    #[error("derivation length bound {bound} reached; the grammar's unit chains are longer than assumed")]
    DerivationBoundExceeded { bound: usize },
    #[error("search budget of {states} states exhausted")]
    BudgetExhausted { states: u64 },
}

#[derive(Clone, Debug, Default)]
pub struct RecognizeOptions {
    /// Stop with [`RecognizeError::BudgetExhausted`] after this many states.
    pub max_states: Option<u64>,
}

/// Safety cutoff on derivation length for an input of length `n`.
///
/// Without detours, a run of productions that consume nothing is a path in
/// the acyclic graph of unit productions, so at most `longest_unit_chain + 1`
/// steps separate consecutive terminals. For the builtin grammar this stays
/// under `3n + 3`, which is kept as a floor.
pub fn derivation_bound(g: &UnificationGrammar, n: usize) -> usize {
    let per_symbol = longest_unit_chain(g) + 1;
    (3 * n + 3).max((n + 1) * per_symbol)
}

/// Number of productions on the longest chain of unit productions. Only
/// meaningful for grammars without detours.
fn longest_unit_chain(g: &UnificationGrammar) -> usize {
    let mut succ: HashMap<&NonTerminal, Vec<&NonTerminal>> = HashMap::new();
    for r in &g.rules {
        if let (true, Some(t)) = (r.body.terminals.is_empty(), &r.body.tail) {
            succ.entry(&r.head).or_default().push(t);
        }
    }
    fn depth<'a>(
        n: &'a NonTerminal,
        succ: &HashMap<&'a NonTerminal, Vec<&'a NonTerminal>>,
        memo: &mut HashMap<&'a NonTerminal, usize>,
    ) -> usize {
        if let Some(&d) = memo.get(n) {
            return d;
        }
        let d = succ
            .get(n)
            .into_iter()
            .flatten()
            .map(|m| 1 + depth(m, succ, memo))
            .max()
            .unwrap_or(0);
        memo.insert(n, d);
        d
    }
    let mut memo = HashMap::new();
    g.rules.iter().map(|r| depth(&r.head, &succ, &mut memo)).max().unwrap_or(0)
}

struct Search<'g> {
    g: &'g UnificationGrammar,
    input: Vec<char>,
    yields: Vec<Vec<char>>,
    by_head: HashMap<&'g NonTerminal, Vec<usize>>,
    store: ConstraintStore,
    fresh: FreshVars,
    steps: Vec<usize>,
    states: u64,
    bound: usize,
    max_states: Option<u64>,
}

impl Search<'_> {
    fn dfs(&mut self, pos: usize, nt: &NonTerminal) -> Result<bool, RecognizeError> {
        let candidates = self.by_head.get(nt).cloned().unwrap_or_default();
        for r in candidates {
            self.states += 1;
            if self.max_states.is_some_and(|m| self.states > m) {
                return Err(RecognizeError::BudgetExhausted { states: self.states - 1 });
            }
            let y = &self.yields[r];
            if !self.input[pos..].starts_with(y) {
                continue;
            }
            let next = pos + y.len();
            let prod = &self.g.rules[r];
            if prod.body.tail.is_none() && next != self.input.len() {
                continue;
            }
            let depth = self.steps.len();
            if depth + 1 > self.bound {
                return Err(RecognizeError::DerivationBoundExceeded { bound: self.bound });
            }
            let node = node_var(depth);
            let child = prod.body.tail.as_ref().map(|_| node_var(depth + 1));
            let checkpoint = self.store.checkpoint();
            let fresh_mark = self.fresh.next_index();
            if let Some(f) = instantiate(&prod.annotation, &node, child.as_ref()) {
                let mut ps = PrimitiveSet::new();
                transform_into(&f, &mut self.fresh, &mut ps);
                if self.store.add_all(&ps).is_err() {
                    self.store.rollback(checkpoint);
                    self.fresh = FreshVars::starting_at(fresh_mark);
                    continue;
                }
            }
            self.steps.push(r);
            let found = match &prod.body.tail {
                None => self.store.is_acyclic(),
                Some(t) => self.dfs(next, t)?,
            };
            if found {
                return Ok(true);
            }
            self.steps.pop();
            self.store.rollback(checkpoint);
            self.fresh = FreshVars::starting_at(fresh_mark);
        }
        Ok(false)
    }
}

pub fn recognize(g: &UnificationGrammar, w: &str) -> Result<RecognitionResult, RecognizeError> {
    recognize_with(g, w, &RecognizeOptions::default())
}

pub fn recognize_with(
    g: &UnificationGrammar,
    w: &str,
    opts: &RecognizeOptions,
) -> Result<RecognitionResult, RecognizeError> {
    if !check_offline_parsability(g) {
        return Err(RecognizeError::NotOfflineParsable);
    }
    let sigma = crate::grammar::alphabet(&backbone(g));
    if let Some((position, symbol)) = w.chars().enumerate().find(|(_, c)| !sigma.contains(c)) {
        return Err(UnknownSymbol { symbol, position }.into());
    }
    let mut by_head: HashMap<&NonTerminal, Vec<usize>> = HashMap::new();
    for (i, r) in g.rules.iter().enumerate() {
        by_head.entry(&r.head).or_default().push(i);
    }
    let input: Vec<char> = w.chars().collect();
    let mut search = Search {
        g,
        bound: derivation_bound(g, input.len()),
        input,
        yields: g.rules.iter().map(|r| r.body.yield_text().chars().collect()).collect(),
        by_head,
        store: ConstraintStore::new(),
        fresh: FreshVars::new(),
        steps: Vec::new(),
        states: 0,
        max_states: opts.max_states,
    };
    let accepted = search.dfs(0, &g.start)?;
    let derivation = accepted.then(|| {
        Derivation::from_rules(g, &search.steps).expect("search only builds chained derivations")
    });
    Ok(RecognitionResult {
        accepted,
        derivation,
        states_explored: search.states,
    })
}

/// Checks a guessed derivation: its yield must be `w` and its conjoined
/// annotations must describe an acyclic feature-graph.
pub fn verify_certificate(g: &UnificationGrammar, w: &str, d: &Derivation) -> bool {
    let Ok(checked) = Derivation::from_rules(g, &d.rules()) else {
        return false;
    };
    if checked.yield_text(g) != w {
        return false;
    }
    derivation_formula(g, &checked).is_ok_and(|f| feature_graph_sat(&f).is_yes())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssignmentError {
    #[error(transparent)]
    Derivation(#[from] DerivationError),
    #[error("the derivation's constraints are unsatisfiable")]
    Unsatisfiable,
    #[error("value at assign {path} is neither + nor -")]
    NotATruthValue { path: String },
}

/// Reads the truth assignment encoded under `assign` in the derivation's
/// feature-graph: a `v` value of `+` or `-` below bit path `b1...bl` sets the
/// variable with binary index `b1...bl`. The unindexed `v` directly under
/// `assign` is not a variable and is skipped.
pub fn extract_assignment(
    g: &UnificationGrammar,
    d: &Derivation,
) -> Result<BTreeMap<String, bool>, AssignmentError> {
    let f = derivation_formula(g, d)?;
    let verdict = feature_graph_sat(&f);
    if !verdict.is_yes() {
        return Err(AssignmentError::Unsatisfiable);
    }
    let model = extract_model(&verdict.simplified, &node_var(0)).map_err(|_| AssignmentError::Unsatisfiable)?;
    let graph = &model.graph;
    let attr = |s: &str| crate::formula::Attribute::new(s);
    let mut out = BTreeMap::new();
    let Some(assign) = graph.step(&graph.root_target(), &attr("assign")) else {
        return Ok(out);
    };
    let mut stack = vec![(assign, String::new())];
    while let Some((at, path)) = stack.pop() {
        if !path.is_empty() {
            if let Some(v) = graph.step(&at, &attr("v")) {
                let value = match &v {
                    Target::Constant(c) if c.as_str() == "+" => true,
                    Target::Constant(c) if c.as_str() == "-" => false,
                    _ => return Err(AssignmentError::NotATruthValue { path }),
                };
                out.insert(path.clone(), value);
            }
        }
        for bit in ["1", "0"] {
            if let Some(next) = graph.step(&at, &attr(bit)) {
                stack.push((next, format!("{path}{bit}")));
            }
        }
    }
    Ok(out)
}

/// The model graph of an accepted derivation, rooted at the start node.
pub fn derivation_graph(g: &UnificationGrammar, d: &Derivation) -> Option<FeatureGraph> {
    let f = derivation_formula(g, d).ok()?;
    let verdict = feature_graph_sat(&f);
    verdict.is_yes().then_some(())?;
    extract_model(&verdict.simplified, &node_var(0)).ok().map(|m| m.graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::format_formula;
    use crate::grammar::{builtin_unification_grammar, parse_grammar};

    fn g() -> UnificationGrammar {
        builtin_unification_grammar()
    }

    fn accepted(w: &str) -> Derivation {
        let r = recognize(&g(), w).unwrap();
        assert!(r.accepted, "{w} should be accepted");
        r.derivation.unwrap()
    }

    #[test]
    fn single_epsilon_step_formula() {
        let d = Derivation::from_rules(&g(), &[2]).unwrap();
        assert_eq!(format_formula(&derivation_formula(&g(), &d).unwrap()), "v assign ?n0 = +");
    }

    #[test]
    fn chained_steps_share_node_variables() {
        let d = Derivation::from_rules(&g(), &[1, 11, 14, 2]).unwrap();
        assert_eq!(d.steps[0].child, Some(node_var(1)));
        assert_eq!(d.steps[1].node, node_var(1));
        let f = format_formula(&derivation_formula(&g(), &d).unwrap());
        assert!(f.starts_with("assign ?n0 = assign ?n1 & assign ?n0 = new ?n1 & assign ?n1 = assign ?n2"));
    }

    #[test]
    fn structural_errors() {
        assert_eq!(Derivation::from_rules(&g(), &[]), Err(DerivationError::Empty));
        assert!(matches!(Derivation::from_rules(&g(), &[3]), Err(DerivationError::HeadMismatch { .. })));
        assert!(matches!(Derivation::from_rules(&g(), &[0]), Err(DerivationError::Unfinished { .. })));
        assert!(matches!(Derivation::from_rules(&g(), &[2, 2]), Err(DerivationError::Overrun { .. })));
        assert!(matches!(Derivation::from_rules(&g(), &[99]), Err(DerivationError::NoSuchRule { .. })));
    }

    #[test]
    fn recognizes_examples() {
        accepted("#10q");
        accepted("");
        accepted("#1p");
        let r = recognize(&g(), "#10p#10q").unwrap();
        assert!(!r.accepted);
        assert!(r.derivation.is_none());
        assert!(r.states_explored > 0);
    }

    #[test]
    fn first_found_derivation_is_stable() {
        let d = accepted("#1p");
        assert_eq!(d.to_string(), "d: 1 10 11 14 2");
        assert_eq!(Derivation::parse_certificate(&g(), "d: 1 10 11 14 2").unwrap(), d);
    }

    #[test]
    fn found_derivation_path_of_model() {
        let d = accepted("#10q");
        let graph = derivation_graph(&g(), &d).unwrap();
        let attr = crate::formula::Attribute::new;
        let path = ["assign", "1", "0", "v"];
        let end = path
            .iter()
            .try_fold(graph.root_target(), |at, a| graph.step(&at, &attr(a)));
        assert_eq!(end, Some(Target::Constant(crate::formula::Constant::new("-"))));
    }

    #[test]
    fn certificate_checks() {
        let d = accepted("#1p");
        assert!(verify_certificate(&g(), "#1p", &d));
        assert!(!verify_certificate(&g(), "#1q", &d));
        // Two blocks that each pass alone, spliced into one derivation.
        let first = accepted("#10p").rules();
        let second = accepted("#10q").rules();
        let spliced: Vec<usize> = first[..first.len() - 1].iter().chain(&second).copied().collect();
        let d = Derivation::from_rules(&g(), &spliced).unwrap();
        assert_eq!(d.yield_text(&g()), "#10p#10q");
        assert!(!verify_certificate(&g(), "#10p#10q", &d));
    }

    #[test]
    fn assignment_extraction() {
        let one = |s: &str, v: bool| BTreeMap::from([(s.to_string(), v)]);
        assert_eq!(extract_assignment(&g(), &accepted("#1p")).unwrap(), one("1", true));
        assert_eq!(extract_assignment(&g(), &accepted("#1q")).unwrap(), one("1", false));
        assert_eq!(extract_assignment(&g(), &accepted("")).unwrap(), BTreeMap::new());
        let both = extract_assignment(&g(), &accepted("#10p#11q")).unwrap();
        assert_eq!(both, BTreeMap::from([("10".to_string(), true), ("11".to_string(), false)]));
    }

    #[test]
    fn rejects_detour_grammars_and_foreign_symbols() {
        let looped = parse_grammar("S -> A\nA -> S\nS -> 'a'").unwrap();
        assert_eq!(recognize(&looped, "a").unwrap_err(), RecognizeError::NotOfflineParsable);
        assert!(matches!(recognize(&g(), "#1x"), Err(RecognizeError::UnknownSymbol(_))));
    }

    #[test]
    fn budget_is_reported_distinctly() {
        let opts = RecognizeOptions { max_states: Some(3) };
        assert_eq!(
            recognize_with(&g(), "#1p#1p#1p", &opts).unwrap_err(),
            RecognizeError::BudgetExhausted { states: 3 }
        );
    }

    #[test]
    fn bound_covers_long_unit_chains() {
        assert_eq!(derivation_bound(&g(), 4), 15);
        let chain = parse_grammar("S -> A\nA -> B\nB -> C\nC -> D\nD -> 'a' S\nD -> _").unwrap();
        assert_eq!(derivation_bound(&chain, 0), 5);
        assert!(recognize(&chain, "").unwrap().accepted);
        assert_eq!(recognize(&chain, "aa").unwrap().derivation.unwrap().len(), 15);
    }

    #[test]
    fn cyclic_constraints_are_rejected_at_the_end() {
        let cyc = parse_grammar("S -> 'a' T @ f ?x0 = ?x1\nT -> _ @ g ?x0 = ?x0").unwrap();
        assert!(!recognize(&cyc, "a").unwrap().accepted);
        let ok = parse_grammar("S -> 'a' T @ f ?x0 = ?x1\nT -> _ @ g ?x0 = b").unwrap();
        assert!(recognize(&ok, "a").unwrap().accepted);
    }
}
