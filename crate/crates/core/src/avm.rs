//! Attribute-value matrices and their conversions to formulas and graphs.
//!
//! Text syntax: `[attr: value, ...]`, where a value is a bare constant, a
//! nested matrix, or a box label `#n` optionally followed by a value. Equal
//! box labels denote the same value.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::formula::{is_token_char, Attribute, Constant, Equation, Formula, Path, Term, Var};
use crate::graph::{FeatureGraph, NodeId, Target};
use crate::solver::feature_graph_sat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoxLabel(pub u32);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Avm {
    Atomic(Constant),
    Matrix(Vec<(Attribute, Avm)>),
    Tagged(BoxLabel, Option<Box<Avm>>),
}

impl Avm {
    pub fn empty() -> Self {
        Avm::Matrix(Vec::new())
    }

    /// Number of values, a linear size measure.
    pub fn size(&self) -> usize {
        match self {
            Avm::Atomic(_) => 1,
            Avm::Matrix(es) => 1 + es.iter().map(|(_, v)| v.size()).sum::<usize>(),
            Avm::Tagged(_, v) => 1 + v.as_ref().map_or(0, |v| v.size()),
        }
    }
}

impl fmt::Display for Avm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Avm::Atomic(c) => write!(f, "{c}"),
            Avm::Matrix(es) => {
                f.write_str("[")?;
                for (i, (a, v)) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}: {v}")?;
                }
                f.write_str("]")
            }
            Avm::Tagged(BoxLabel(n), None) => write!(f, "#{n}"),
            Avm::Tagged(BoxLabel(n), Some(v)) => write!(f, "#{n} {v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AvmError {
    #[error("offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("attribute {0} appears twice in one matrix")]
    DuplicateAttribute(String),
    #[error("box label #{0} is given a value more than once")]
    LabelBoundTwice(u32),
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    bound: BTreeSet<u32>,
}

impl Parser {
    fn err(&self, message: impl Into<String>) -> AvmError {
        AvmError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, c: char) -> Result<(), AvmError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    fn token(&mut self) -> Result<String, AvmError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && is_token_char(self.chars[self.pos]) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a name"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn value(&mut self) -> Result<Avm, AvmError> {
        match self.peek() {
            Some('[') => {
                self.pos += 1;
                let mut entries: Vec<(Attribute, Avm)> = Vec::new();
                if self.peek() == Some(']') {
                    self.pos += 1;
                    return Ok(Avm::Matrix(entries));
                }
                loop {
                    let name = self.token()?;
                    self.expect(':')?;
                    let v = self.value()?;
                    if entries.iter().any(|(a, _)| a.as_str() == name) {
                        return Err(AvmError::DuplicateAttribute(name));
                    }
                    entries.push((Attribute::new(&name), v));
                    match self.peek() {
                        Some(',') => {
                            self.pos += 1;
                            if self.peek() == Some(']') {
                                self.pos += 1;
                                break;
                            }
                        }
                        Some(']') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.err("expected ',' or ']'")),
                    }
                }
                Ok(Avm::Matrix(entries))
            }
            Some('#') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let digits: String = self.chars[start..self.pos].iter().collect();
                let n: u32 = digits
                    .parse()
                    .ok()
                    .filter(|n| *n > 0)
                    .ok_or_else(|| self.err("box label must be a positive integer"))?;
                let inner = match self.peek() {
                    None | Some(',') | Some(']') => None,
                    Some(_) => {
                        if !self.bound.insert(n) {
                            return Err(AvmError::LabelBoundTwice(n));
                        }
                        Some(Box::new(self.value()?))
                    }
                };
                Ok(Avm::Tagged(BoxLabel(n), inner))
            }
            Some(_) => Ok(Avm::Atomic(Constant::new(&self.token()?))),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

pub fn parse_avm(text: &str) -> Result<Avm, AvmError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        bound: BTreeSet::new(),
    };
    let v = p.value()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    Ok(v)
}

pub fn format_avm(a: &Avm) -> String {
    a.to_string()
}

/// Variable naming for one AVM's description.
struct Namer {
    node_prefix: &'static str,
    tag_prefix: &'static str,
    next: u32,
}

impl Namer {
    fn node(&mut self) -> Term {
        self.next += 1;
        Term::Var(Var::Named(format!("{}{}", self.node_prefix, self.next).into()))
    }

    fn tag(&self, BoxLabel(n): BoxLabel) -> Term {
        Term::Var(Var::Named(format!("{}{n}", self.tag_prefix).into()))
    }
}

fn edge_eq(from: &Term, attr: &Attribute, to: Term) -> Equation {
    Equation::new(Path(vec![attr.clone()]), from.clone(), Path::empty(), to)
}

fn same(a: &Term, b: Term) -> Equation {
    Equation::new(Path::empty(), a.clone(), Path::empty(), b)
}

/// Describes `value` as sitting at `at`.
fn describe(value: &Avm, at: &Term, namer: &mut Namer, out: &mut Vec<Equation>) {
    match value {
        Avm::Atomic(c) => out.push(same(at, Term::Const(c.clone()))),
        Avm::Matrix(es) => {
            for (attr, v) in es {
                match v {
                    Avm::Atomic(c) => out.push(edge_eq(at, attr, Term::Const(c.clone()))),
                    Avm::Tagged(label, inner) => {
                        let t = namer.tag(*label);
                        out.push(edge_eq(at, attr, t.clone()));
                        if let Some(inner) = inner {
                            describe(inner, &t, namer, out);
                        }
                    }
                    Avm::Matrix(_) => {
                        let child = namer.node();
                        out.push(edge_eq(at, attr, child.clone()));
                        describe(v, &child, namer, out);
                    }
                }
            }
        }
        Avm::Tagged(label, inner) => {
            let t = namer.tag(*label);
            out.push(same(at, t.clone()));
            if let Some(inner) = inner {
                describe(inner, &t, namer, out);
            }
        }
    }
}

fn avm_formula(a: &Avm, root: &Term, node_prefix: &'static str, tag_prefix: &'static str) -> Vec<Equation> {
    let mut namer = Namer {
        node_prefix,
        tag_prefix,
        next: 0,
    };
    let mut out = Vec::new();
    describe(a, root, &mut namer, &mut out);
    out
}

/// Describes an AVM as a formula rooted at `?x0`. Nested matrices get
/// variables `?x1, ?x2, ...` and box label `#n` becomes `?bn`. An empty
/// matrix becomes the trivially true `?x0 = ?x0`.
pub fn avm_to_formula(a: &Avm) -> Formula {
    let root = Term::var("x0");
    let eqs = avm_formula(a, &root, "x", "b");
    Formula::new(eqs).unwrap_or_else(|| Formula::single(same(&root, root.clone())))
}

/// Writes a graph as an AVM. Values reached more than once get box labels,
/// numbered in depth-first discovery order from 1.
pub fn graph_to_avm(g: &FeatureGraph) -> Avm {
    let r = match g {
        FeatureGraph::Atomic { value } => return Avm::Atomic(value.clone()),
        FeatureGraph::Rooted(r) => r,
    };
    let mut out: HashMap<NodeId, Vec<(&Attribute, &Target)>> = HashMap::new();
    let mut indegree: HashMap<Target, usize> = HashMap::new();
    for e in &r.edges {
        out.entry(e.from).or_default().push((&e.label, &e.to));
        *indegree.entry(e.to.clone()).or_default() += 1;
    }

    struct Writer<'g> {
        out: HashMap<NodeId, Vec<(&'g Attribute, &'g Target)>>,
        indegree: HashMap<Target, usize>,
        labels: HashMap<Target, BoxLabel>,
    }

    impl Writer<'_> {
        fn node(&mut self, n: NodeId) -> Avm {
            let entries = self.out.get(&n).cloned().unwrap_or_default();
            Avm::Matrix(
                entries
                    .into_iter()
                    .map(|(a, t)| (a.clone(), self.value(t)))
                    .collect(),
            )
        }

        fn value(&mut self, t: &Target) -> Avm {
            if self.indegree.get(t).copied().unwrap_or(0) > 1 {
                if let Some(l) = self.labels.get(t) {
                    return Avm::Tagged(*l, None);
                }
                let l = BoxLabel(self.labels.len() as u32 + 1);
                self.labels.insert(t.clone(), l);
                return Avm::Tagged(l, Some(Box::new(self.plain(t))));
            }
            self.plain(t)
        }

        fn plain(&mut self, t: &Target) -> Avm {
            match t {
                Target::Constant(c) => Avm::Atomic(c.clone()),
                Target::Node(n) => self.node(*n),
            }
        }
    }

    let mut w = Writer {
        out,
        indegree,
        labels: HashMap::new(),
    };
    w.node(r.root)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("the structures do not unify")]
pub struct UnifyFailure;

/// The most general AVM carrying the information of both, computed by
/// solving the conjunction of their descriptions with shared root.
pub fn unify(a: &Avm, b: &Avm) -> Result<Avm, UnifyFailure> {
    let root = Term::var("x0");
    let mut eqs = avm_formula(a, &root, "x", "b");
    eqs.extend(avm_formula(b, &root, "y", "c"));
    let f = Formula::new(eqs).unwrap_or_else(|| Formula::single(same(&root, root.clone())));
    let verdict = feature_graph_sat(&f);
    verdict
        .model
        .map(|m| graph_to_avm(&m.graph))
        .ok_or(UnifyFailure)
}

/// The graph an AVM describes, if it is consistent.
pub fn avm_graph(a: &Avm) -> Option<FeatureGraph> {
    feature_graph_sat(&avm_to_formula(a)).model.map(|m| m.graph)
}

/// Box labels used anywhere in `a`.
pub fn box_labels(a: &Avm) -> BTreeMap<u32, usize> {
    fn walk(a: &Avm, out: &mut BTreeMap<u32, usize>) {
        match a {
            Avm::Atomic(_) => {}
            Avm::Matrix(es) => es.iter().for_each(|(_, v)| walk(v, out)),
            Avm::Tagged(BoxLabel(n), v) => {
                *out.entry(*n).or_default() += 1;
                if let Some(v) = v {
                    walk(v, out);
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(a, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{format_formula, parse_formula};
    use crate::graph::graph_isomorphic;

    const MAN_WALKS_AVM: &str =
        "[subject: [number: #1 singular], predicate: [number: #1], tense: present]";

    #[test]
    fn parses_examples() {
        let a = parse_avm("[number: #1 singular]").unwrap();
        assert_eq!(
            a,
            Avm::Matrix(vec![(
                Attribute::new("number"),
                Avm::Tagged(BoxLabel(1), Some(Box::new(Avm::Atomic(Constant::new("singular")))))
            )])
        );
        assert_eq!(parse_avm("[]").unwrap(), Avm::empty());
        let full = parse_avm(MAN_WALKS_AVM).unwrap();
        assert_eq!(format_avm(&full), MAN_WALKS_AVM);
        assert_eq!(parse_avm("[v: +, w: -,]").unwrap().to_string(), "[v: +, w: -]");
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            parse_avm("[f: a, f: b]"),
            Err(AvmError::DuplicateAttribute("f".into()))
        );
        assert_eq!(parse_avm("[f: #1 a, g: #1 a]"), Err(AvmError::LabelBoundTwice(1)));
        assert!(matches!(parse_avm("[f a]"), Err(AvmError::Syntax { .. })));
        assert!(matches!(parse_avm("[f: #0 a]"), Err(AvmError::Syntax { .. })));
        assert!(matches!(parse_avm("[f: a] x"), Err(AvmError::Syntax { .. })));
        assert!(matches!(parse_avm(""), Err(AvmError::Syntax { .. })));
    }

    #[test]
    fn single_pair_formula() {
        let f = avm_to_formula(&parse_avm("[tense: present]").unwrap());
        assert_eq!(format_formula(&f), "tense ?x0 = present");
    }

    #[test]
    fn man_walks_avm_matches_formula_model() {
        let from_avm = avm_graph(&parse_avm(MAN_WALKS_AVM).unwrap()).unwrap();
        let text = "subject ?x = ?y & predicate ?x = ?z & number ?y = number ?z \
                    & number subject ?x = singular & tense ?x = present";
        let from_formula = feature_graph_sat(&parse_formula(text).unwrap()).model.unwrap().graph;
        assert!(graph_isomorphic(&from_avm, &from_formula));
        assert_eq!(graph_to_avm(&from_formula).to_string(), MAN_WALKS_AVM);
    }

    #[test]
    fn reentrance_shares_one_node() {
        let g = avm_graph(&parse_avm("[f: #1, g: #1]").unwrap()).unwrap();
        let FeatureGraph::Rooted(r) = &g else { panic!() };
        assert_eq!(r.edges.len(), 2);
        assert_eq!(r.edges[0].to, r.edges[1].to);
        assert_eq!(graph_to_avm(&g).to_string(), "[f: #1 [], g: #1]");
    }

    #[test]
    fn graph_to_avm_small_cases() {
        assert_eq!(graph_to_avm(&FeatureGraph::atomic(Constant::new("a"))).to_string(), "a");
        let g = avm_graph(&parse_avm("[f: []]").unwrap()).unwrap();
        assert_eq!(graph_to_avm(&g).to_string(), "[f: []]");
        let g = avm_graph(&parse_avm("[f: c]").unwrap()).unwrap();
        assert_eq!(graph_to_avm(&g).to_string(), "[f: c]");
    }

    #[test]
    fn unify_examples() {
        let sg = parse_avm("[number: singular]").unwrap();
        let pl = parse_avm("[number: plural]").unwrap();
        assert_eq!(unify(&sg, &sg).unwrap(), sg);
        assert_eq!(unify(&sg, &pl), Err(UnifyFailure));
        assert_eq!(unify(&Avm::empty(), &sg).unwrap(), sg);
    }

    #[test]
    fn unify_reproduces_assignment_merge() {
        // The structure under T for a chosen literal 1p, merged with the
        // structure S contributes once the input is used up.
        let t = parse_avm("[new: [1: [v: +]]]").unwrap();
        let s = parse_avm("[assign: [v: +]]").unwrap();
        let merged = unify(&t, &s).unwrap();
        // Both v values reach the one `+` node, so it is shared.
        assert_eq!(merged.to_string(), "[new: [1: [v: #1 +]], assign: [v: #1]]");
        // Identifying new with assign, as the rule S -> # T does.
        let shared = parse_avm("[new: #1, assign: #1 [v: +]]").unwrap();
        let merged = unify(&t, &shared).unwrap();
        assert_eq!(merged.to_string(), "[new: #1 [1: [v: #2 +], v: #2], assign: #1]");
        let conflict = parse_avm("[new: #1, assign: #1 [1: [v: -]]]").unwrap();
        assert_eq!(unify(&t, &conflict), Err(UnifyFailure));
    }

    #[test]
    fn atomic_against_matrix_fails() {
        let a = parse_avm("a").unwrap();
        assert_eq!(unify(&a, &parse_avm("[f: b]").unwrap()), Err(UnifyFailure));
        assert_eq!(unify(&a, &a).unwrap(), a);
    }
}
