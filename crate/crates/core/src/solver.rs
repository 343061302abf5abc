//! Satisfiability of path-equation formulas over acyclic feature-graphs.
//!
//! A formula is flattened by [`transform`], rewritten to solved form by
//! [`simplify`], and accepted iff the solved form is clash-free and acyclic.
//! The solved form then directly describes the model graph.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::{transform, Attribute, Formula, PrimitiveFormula, PrimitiveSet, Term, Var};
use crate::graph::{Edge, FeatureGraph, NodeId, RootedGraph, Target};

/// The four simplification rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    /// `x = s & P  ->  x = s & [x/s]P` when `x` occurs in `P` and `x != s`.
    Substitute = 1,
    /// `a = x  ->  x = a`.
    Orient = 2,
    /// `f x = s & f x = t  ->  f x = s & s = t`.
    Merge = 3,
    /// `s = s & P  ->  P`.
    Delete = 4,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

/// How the next rule firing is chosen when several apply.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleOrder {
    /// Try rules in this priority; within a rule take the earliest formula.
    Priority([Rule; 4]),
    /// Pick uniformly among all applicable firings.
    Random { seed: u64 },
}

impl Default for RuleOrder {
    fn default() -> Self {
        RuleOrder::Priority([Rule::Delete, Rule::Orient, Rule::Merge, Rule::Substitute])
    }
}

/// One rule firing and the formulas its left-hand side matched.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleFiring {
    pub rule: Rule,
    pub consumed: Vec<PrimitiveFormula>,
}

impl fmt::Display for RuleFiring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {}:", self.rule)?;
        for (i, p) in self.consumed.iter().enumerate() {
            write!(f, "{} {p}", if i == 0 { "" } else { " &" })?;
        }
        Ok(())
    }
}

/// A primitive set on which no simplification rule applies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplifiedSet {
    pub formulas: PrimitiveSet,
    /// Number of rule firings it took to get here.
    pub applications: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Firing {
    Substitute(usize),
    Orient(usize),
    Merge(usize, usize),
    Delete(usize),
}

impl Firing {
    fn rule(self) -> Rule {
        match self {
            Firing::Substitute(_) => Rule::Substitute,
            Firing::Orient(_) => Rule::Orient,
            Firing::Merge(..) => Rule::Merge,
            Firing::Delete(_) => Rule::Delete,
        }
    }
}

/// Slot storage that keeps insertion order, set semantics and per-variable
/// occurrence counts up to date under rewriting.
struct Work {
    slots: Vec<Option<PrimitiveFormula>>,
    index: HashMap<PrimitiveFormula, usize>,
    occurrences: HashMap<Var, usize>,
}

impl Work {
    fn new(p: &PrimitiveSet) -> Self {
        let mut w = Work {
            slots: Vec::with_capacity(p.len()),
            index: HashMap::with_capacity(p.len()),
            occurrences: HashMap::new(),
        };
        for f in p {
            w.push(f.clone());
        }
        w
    }

    fn count(&mut self, p: &PrimitiveFormula, up: bool) {
        for t in p.terms() {
            if let Term::Var(v) = t {
                let n = self.occurrences.entry(v.clone()).or_insert(0);
                if up {
                    *n += 1;
                } else {
                    *n -= 1;
                }
            }
        }
    }

    fn push(&mut self, p: PrimitiveFormula) {
        if self.index.contains_key(&p) {
            return;
        }
        self.count(&p, true);
        self.index.insert(p.clone(), self.slots.len());
        self.slots.push(Some(p));
    }

    fn take(&mut self, i: usize) -> PrimitiveFormula {
        let p = self.slots[i].take().expect("live slot");
        self.index.remove(&p);
        self.count(&p, false);
        p
    }

    /// Puts `p` into slot `i`, or leaves the slot empty if `p` is already present.
    fn put(&mut self, i: usize, p: PrimitiveFormula) {
        debug_assert!(self.slots[i].is_none());
        if self.index.contains_key(&p) {
            return;
        }
        self.count(&p, true);
        self.index.insert(p.clone(), i);
        self.slots[i] = Some(p);
    }

    fn get(&self, i: usize) -> &PrimitiveFormula {
        self.slots[i].as_ref().expect("live slot")
    }

    fn occurrences(&self, v: &Var) -> usize {
        self.occurrences.get(v).copied().unwrap_or(0)
    }

    /// All applicable firings in slot order, or just the first per rule.
    fn candidates(&self, first_only: bool) -> Vec<Firing> {
        let mut out = Vec::new();
        let mut first_of = [false; 4];
        let mut feature_heads: HashMap<(&Attribute, &Var), usize> = HashMap::new();
        for (i, slot) in self.slots.iter().enumerate() {
            let Some(p) = slot else { continue };
            let mut push = |f: Firing, out: &mut Vec<Firing>| {
                let r = f.rule() as usize - 1;
                if !first_only || !first_of[r] {
                    first_of[r] = true;
                    out.push(f);
                }
            };
            match p {
                PrimitiveFormula::TermEq(s, t) if s == t => push(Firing::Delete(i), &mut out),
                PrimitiveFormula::TermEq(Term::Const(_), Term::Var(_)) => {
                    push(Firing::Orient(i), &mut out)
                }
                PrimitiveFormula::TermEq(Term::Var(x), _) if self.occurrences(x) >= 2 => {
                    push(Firing::Substitute(i), &mut out)
                }
                PrimitiveFormula::FeatureEq(f, Term::Var(x), _) => {
                    match feature_heads.get(&(f, x)) {
                        Some(&first) => {
                            push(Firing::Merge(first, i), &mut out);
                            if !first_only {
                                push(Firing::Merge(i, first), &mut out);
                            }
                        }
                        None => {
                            feature_heads.insert((f, x), i);
                        }
                    }
                }
                _ => {}
            }
        }
        out
    }

    fn fire(&mut self, firing: Firing) -> RuleFiring {
        match firing {
            Firing::Delete(i) => RuleFiring {
                rule: Rule::Delete,
                consumed: vec![self.take(i)],
            },
            Firing::Orient(i) => {
                let p = self.take(i);
                let PrimitiveFormula::TermEq(a, x) = &p else {
                    unreachable!()
                };
                self.put(i, PrimitiveFormula::TermEq(x.clone(), a.clone()));
                RuleFiring {
                    rule: Rule::Orient,
                    consumed: vec![p],
                }
            }
            Firing::Merge(keep, drop) => {
                let kept = self.get(keep).clone();
                let dropped = self.take(drop);
                let (PrimitiveFormula::FeatureEq(_, _, s), PrimitiveFormula::FeatureEq(_, _, t)) =
                    (&kept, &dropped)
                else {
                    unreachable!()
                };
                self.push(PrimitiveFormula::TermEq(s.clone(), t.clone()));
                RuleFiring {
                    rule: Rule::Merge,
                    consumed: vec![kept, dropped],
                }
            }
            Firing::Substitute(i) => {
                let binding = self.get(i).clone();
                let PrimitiveFormula::TermEq(Term::Var(x), s) = &binding else {
                    unreachable!()
                };
                for k in 0..self.slots.len() {
                    if k == i || !self.slots[k].as_ref().is_some_and(|p| p.mentions(x)) {
                        continue;
                    }
                    let old = self.take(k);
                    self.put(k, substitute(&old, x, s));
                }
                RuleFiring {
                    rule: Rule::Substitute,
                    consumed: vec![binding],
                }
            }
        }
    }

    fn into_set(self) -> PrimitiveSet {
        self.slots.into_iter().flatten().collect()
    }
}

fn substitute(p: &PrimitiveFormula, x: &Var, s: &Term) -> PrimitiveFormula {
    let sub = |t: &Term| {
        if t.as_var() == Some(x) {
            s.clone()
        } else {
            t.clone()
        }
    };
    match p {
        PrimitiveFormula::TermEq(a, b) => PrimitiveFormula::TermEq(sub(a), sub(b)),
        PrimitiveFormula::FeatureEq(f, a, b) => PrimitiveFormula::FeatureEq(f.clone(), sub(a), sub(b)),
    }
}

fn run_simplify(p: &PrimitiveSet, order: &RuleOrder, mut trace: Option<&mut Vec<RuleFiring>>) -> SimplifiedSet {
    let mut work = Work::new(p);
    let mut rng = match order {
        RuleOrder::Random { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        RuleOrder::Priority(_) => None,
    };
    let mut applications = 0;
    loop {
        let next = match (order, rng.as_mut()) {
            (RuleOrder::Priority(priority), _) => {
                let cands = work.candidates(true);
                priority
                    .iter()
                    .find_map(|r| cands.iter().copied().find(|c| c.rule() == *r))
            }
            (RuleOrder::Random { .. }, Some(rng)) => work.candidates(false).choose(rng).copied(),
            (RuleOrder::Random { .. }, None) => unreachable!(),
        };
        let Some(firing) = next else { break };
        let record = work.fire(firing);
        applications += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(record);
        }
    }
    SimplifiedSet {
        formulas: work.into_set(),
        applications,
    }
}

/// Applies the simplification rules until none is applicable.
pub fn simplify(p: &PrimitiveSet, order: &RuleOrder) -> SimplifiedSet {
    run_simplify(p, order, None)
}

/// [`simplify`], also returning every rule firing in order.
pub fn simplify_traced(p: &PrimitiveSet, order: &RuleOrder) -> (SimplifiedSet, Vec<RuleFiring>) {
    let mut trace = Vec::new();
    let s = run_simplify(p, order, Some(&mut trace));
    (s, trace)
}

/// No attribute applied to a constant and no two distinct constants equated.
pub fn is_clash_free(s: &SimplifiedSet) -> bool {
    s.formulas.iter().all(|p| match p {
        PrimitiveFormula::FeatureEq(_, Term::Const(_), _) => false,
        PrimitiveFormula::TermEq(Term::Const(a), Term::Const(b)) => a == b,
        _ => true,
    })
}

/// No sequence `f1 x1 = x2, ..., fn xn = x1` of feature equations.
pub fn is_acyclic(s: &SimplifiedSet) -> bool {
    let mut succ: HashMap<&Var, Vec<&Var>> = HashMap::new();
    for p in &s.formulas {
        if let PrimitiveFormula::FeatureEq(_, Term::Var(x), Term::Var(y)) = p {
            succ.entry(x).or_default().push(y);
        }
    }
    acyclic_from(&succ)
}

pub(crate) fn acyclic_from<K: std::hash::Hash + Eq + Copy>(succ: &HashMap<K, Vec<K>>) -> bool {
    let mut done: HashMap<K, bool> = HashMap::new();
    for &start in succ.keys() {
        if done.contains_key(&start) {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        done.insert(start, false);
        while let Some((v, i)) = stack.pop() {
            let next = succ.get(&v).map_or(&[][..], |n| n.as_slice());
            if i == next.len() {
                done.insert(v, true);
                continue;
            }
            stack.push((v, i + 1));
            let w = next[i];
            match done.get(&w) {
                Some(false) => return false,
                Some(true) => {}
                None => {
                    done.insert(w, false);
                    stack.push((w, 0));
                }
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("the simplified set contains a clash")]
    Clash,
    #[error("the simplified set describes a cyclic graph")]
    Cyclic,
}

/// A model graph together with where each variable landed in it.
/// Variables whose node is unreachable from the root are absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    pub graph: FeatureGraph,
    pub valuation: BTreeMap<Var, Target>,
}

/// Reads the described graph off a solved form, rooted at the first
/// variable of the set.
pub fn extract_graph(s: &SimplifiedSet) -> Result<FeatureGraph, ExtractError> {
    let root = s
        .formulas
        .iter()
        .flat_map(|p| p.terms())
        .find(|t| !t.is_const())
        .or_else(|| s.formulas.iter().next().map(|p| p.terms()[0]))
        .cloned();
    match root {
        Some(root) => extract_model(s, &root).map(|m| m.graph),
        None => Ok(FeatureGraph::empty()),
    }
}

/// Reads the described graph off a solved form with an explicit root term.
pub fn extract_model(s: &SimplifiedSet, root: &Term) -> Result<Model, ExtractError> {
    if !is_clash_free(s) {
        return Err(ExtractError::Clash);
    }
    if !is_acyclic(s) {
        return Err(ExtractError::Cyclic);
    }
    let mut bound: HashMap<&Var, &Term> = HashMap::new();
    for p in &s.formulas {
        if let PrimitiveFormula::TermEq(Term::Var(x), t) = p {
            bound.insert(x, t);
        }
    }
    let resolve = |t: &Term| -> Term {
        let mut cur = t.clone();
        for _ in 0..=bound.len() {
            match &cur {
                Term::Var(v) => match bound.get(v) {
                    Some(next) => cur = (*next).clone(),
                    None => break,
                },
                Term::Const(_) => break,
            }
        }
        cur
    };

    let mut out_edges: HashMap<Var, Vec<(Attribute, Term)>> = HashMap::new();
    for p in &s.formulas {
        if let PrimitiveFormula::FeatureEq(f, Term::Var(x), t) = p {
            if let Term::Var(rx) = resolve(&Term::Var(x.clone())) {
                out_edges.entry(rx).or_default().push((f.clone(), resolve(t)));
            }
        }
    }

    let root_rep = match resolve(root) {
        Term::Const(c) => {
            let mut valuation = BTreeMap::new();
            if let Term::Var(v) = root {
                valuation.insert(v.clone(), Target::Constant(c.clone()));
            }
            for v in s.formulas.variables() {
                if let Term::Const(d) = resolve(&Term::Var(v.clone())) {
                    if d == c {
                        valuation.insert(v, Target::Constant(d));
                    }
                }
            }
            return Ok(Model {
                graph: FeatureGraph::atomic(c),
                valuation,
            });
        }
        Term::Var(v) => v,
    };

    // Depth-first preorder numbering from the root.
    let mut ids: HashMap<Var, NodeId> = HashMap::new();
    let mut order = Vec::new();
    let mut stack = vec![root_rep.clone()];
    while let Some(v) = stack.pop() {
        if ids.contains_key(&v) {
            continue;
        }
        ids.insert(v.clone(), NodeId(order.len() as u32));
        order.push(v.clone());
        if let Some(es) = out_edges.get(&v) {
            for (_, t) in es.iter().rev() {
                if let Term::Var(w) = t {
                    if !ids.contains_key(w) {
                        stack.push(w.clone());
                    }
                }
            }
        }
    }

    let mut edges = Vec::new();
    let mut constants = std::collections::BTreeSet::new();
    for v in &order {
        for (f, t) in out_edges.get(v).into_iter().flatten() {
            let to = match t {
                Term::Var(w) => Target::Node(ids[w]),
                Term::Const(c) => {
                    constants.insert(c.clone());
                    Target::Constant(c.clone())
                }
            };
            edges.push(Edge {
                from: ids[v],
                label: f.clone(),
                to,
            });
        }
    }

    let mut valuation = BTreeMap::new();
    let mut vars = s.formulas.variables();
    if let Term::Var(v) = root {
        vars.insert(v.clone());
    }
    for v in vars {
        let target = match resolve(&Term::Var(v.clone())) {
            Term::Var(w) => ids.get(&w).map(|id| Target::Node(*id)),
            Term::Const(c) => constants.contains(&c).then_some(Target::Constant(c)),
        };
        if let Some(t) = target {
            valuation.insert(v, t);
        }
    }

    Ok(Model {
        graph: FeatureGraph::Rooted(RootedGraph {
            root: ids[&root_rep],
            nodes: (0..order.len() as u32).map(NodeId).collect(),
            constants,
            edges,
        }),
        valuation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Answer {
    Yes,
    No,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Yes => "Yes",
            Answer::No => "No",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SatVerdict {
    pub answer: Answer,
    /// Present iff the answer is yes.
    pub model: Option<Model>,
    pub simplified: SimplifiedSet,
    pub trace: Option<Vec<RuleFiring>>,
}

impl SatVerdict {
    pub fn is_yes(&self) -> bool {
        self.answer == Answer::Yes
    }

    pub fn graph(&self) -> Option<&FeatureGraph> {
        self.model.as_ref().map(|m| &m.graph)
    }
}

#[derive(Clone, Debug, Default)]
pub struct SatOptions {
    pub order: RuleOrder,
    pub trace: bool,
}

/// Decides whether `f` describes an acyclic feature-graph, and if so returns it.
pub fn feature_graph_sat(f: &Formula) -> SatVerdict {
    feature_graph_sat_with(f, &SatOptions::default())
}

pub fn feature_graph_sat_with(f: &Formula, opts: &SatOptions) -> SatVerdict {
    let primitives = transform(f);
    let (simplified, trace) = if opts.trace {
        let (s, t) = simplify_traced(&primitives, &opts.order);
        (s, Some(t))
    } else {
        (simplify(&primitives, &opts.order), None)
    };
    let model = if is_clash_free(&simplified) && is_acyclic(&simplified) {
        Some(extract_model(&simplified, f.first_term()).expect("checked clash-free and acyclic"))
    } else {
        None
    };
    SatVerdict {
        answer: if model.is_some() { Answer::Yes } else { Answer::No },
        model,
        simplified,
        trace,
    }
}

/// The yes/no answer for an already-flattened set under a given rule order.
pub fn verdict_for(p: &PrimitiveSet, order: &RuleOrder) -> Answer {
    let s = simplify(p, order);
    if is_clash_free(&s) && is_acyclic(&s) {
        Answer::Yes
    } else {
        Answer::No
    }
}
