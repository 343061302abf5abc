//! The path-equation description language: concrete syntax, abstract syntax,
//! and the flattening of arbitrary equations into primitive formulas.
//!
//! Concrete syntax:
//!
//! ```text
//! formula := eq ('&' eq)*
//! eq      := path? term '=' path? term
//! path    := token+
//! term    := '?' token | token
//! ```
//!
//! Variables carry a `?` sigil, constants are bare tokens in term position,
//! and attributes are bare tokens in path position. A path is written
//! outermost attribute first, so `number subject ?x` denotes the `number`
//! of the `subject` of `?x`. `#` starts a comment that runs to end of line.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characters that can never appear inside a token.
const RESERVED: &[char] = &[
    '=', '&', '?', '[', ']', '#', '%', ':', ',', '(', ')', '@', '\'', '"',
];

pub(crate) fn is_token_char(c: char) -> bool {
    !c.is_whitespace() && !RESERVED.contains(&c)
}

pub(crate) fn is_valid_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_token_char)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Attribute(Arc<str>);

impl Attribute {
    /// Panics if `name` is not a valid token; use [`Attribute::try_new`] for input.
    pub fn new(name: &str) -> Self {
        Self::try_new(name).unwrap_or_else(|| panic!("invalid attribute name {name:?}"))
    }

    pub fn try_new(name: &str) -> Option<Self> {
        is_valid_token(name).then(|| Attribute(name.into()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Constant(Arc<str>);

impl Constant {
    pub fn new(name: &str) -> Self {
        Self::try_new(name).unwrap_or_else(|| panic!("invalid constant name {name:?}"))
    }

    pub fn try_new(name: &str) -> Option<Self> {
        is_valid_token(name).then(|| Constant(name.into()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A variable. Named variables come from user text; fresh variables are
/// minted by [`transform`] and print as `%n`, which no parser accepts.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Named(Arc<str>),
    Fresh(u32),
}

impl Var {
    pub fn named(name: &str) -> Self {
        assert!(is_valid_token(name), "invalid variable name {name:?}");
        Var::Named(name.into())
    }

    pub fn is_fresh(&self) -> bool {
        matches!(self, Var::Fresh(_))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Named(n) => write!(f, "?{n}"),
            Var::Fresh(i) => write!(f, "%{i}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Var),
    Const(Constant),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Var::named(name))
    }

    pub fn constant(name: &str) -> Self {
        Term::Const(Constant::new(name))
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => v.fmt(f),
            Term::Const(c) => c.fmt(f),
        }
    }
}

/// A possibly empty attribute sequence, stored outermost attribute first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Path(pub Vec<Attribute>);

impl Path {
    pub fn empty() -> Self {
        Path(Vec::new())
    }

    pub fn from_names(names: &[&str]) -> Self {
        Path(names.iter().map(|n| Attribute::new(n)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Attributes in the order they are applied to the term.
    pub fn application_order(&self) -> impl Iterator<Item = &Attribute> {
        self.0.iter().rev()
    }
}

/// `left_path left_term = right_path right_term`, kept exactly as written.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Equation {
    pub left_path: Path,
    pub left_term: Term,
    pub right_path: Path,
    pub right_term: Term,
}

impl Equation {
    pub fn new(left_path: Path, left_term: Term, right_path: Path, right_term: Term) -> Self {
        Equation {
            left_path,
            left_term,
            right_path,
            right_term,
        }
    }

    pub fn terms(&self) -> [&Term; 2] {
        [&self.left_term, &self.right_term]
    }

    fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Equation {
        Equation {
            left_path: self.left_path.clone(),
            left_term: f(&self.left_term),
            right_path: self.right_path.clone(),
            right_term: f(&self.right_term),
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.left_path.0 {
            write!(f, "{a} ")?;
        }
        write!(f, "{} = ", self.left_term)?;
        for a in &self.right_path.0 {
            write!(f, "{a} ")?;
        }
        write!(f, "{}", self.right_term)
    }
}

/// A non-empty conjunction of equations in source order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Formula {
    conjuncts: Vec<Equation>,
}

impl Formula {
    /// Returns `None` for an empty conjunction.
    pub fn new(conjuncts: Vec<Equation>) -> Option<Self> {
        (!conjuncts.is_empty()).then_some(Formula { conjuncts })
    }

    pub fn single(eq: Equation) -> Self {
        Formula {
            conjuncts: vec![eq],
        }
    }

    pub fn conjuncts(&self) -> &[Equation] {
        &self.conjuncts
    }

    pub fn and(mut self, other: &Formula) -> Formula {
        self.conjuncts.extend(other.conjuncts.iter().cloned());
        self
    }

    /// Variables in order of first occurrence.
    pub fn variables(&self) -> Vec<Var> {
        let mut seen = IndexSet::new();
        for eq in &self.conjuncts {
            for t in eq.terms() {
                if let Term::Var(v) = t {
                    seen.insert(v.clone());
                }
            }
        }
        seen.into_iter().collect()
    }

    /// The first variable in the formula, or failing that the first constant.
    pub fn first_term(&self) -> &Term {
        self.conjuncts
            .iter()
            .flat_map(|eq| eq.terms())
            .find(|t| !t.is_const())
            .unwrap_or(&self.conjuncts[0].left_term)
    }

    pub fn total_path_length(&self) -> usize {
        self.conjuncts
            .iter()
            .map(|eq| eq.left_path.len() + eq.right_path.len())
            .sum()
    }

    /// Applies `f` to every term.
    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Formula {
        Formula {
            conjuncts: self.conjuncts.iter().map(|eq| eq.map_terms(&mut f)).collect(),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, eq) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            eq.fmt(f)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimitiveFormula {
    /// `s = t`
    TermEq(Term, Term),
    /// `f s = t`
    FeatureEq(Attribute, Term, Term),
}

impl PrimitiveFormula {
    pub fn term_eq(s: Term, t: Term) -> Self {
        PrimitiveFormula::TermEq(s, t)
    }

    pub fn feature_eq(f: &str, s: Term, t: Term) -> Self {
        PrimitiveFormula::FeatureEq(Attribute::new(f), s, t)
    }

    pub fn terms(&self) -> [&Term; 2] {
        match self {
            PrimitiveFormula::TermEq(s, t) | PrimitiveFormula::FeatureEq(_, s, t) => [s, t],
        }
    }

    pub fn mentions(&self, v: &Var) -> bool {
        self.terms().iter().any(|t| t.as_var() == Some(v))
    }

    pub fn to_equation(&self) -> Equation {
        match self {
            PrimitiveFormula::TermEq(s, t) => {
                Equation::new(Path::empty(), s.clone(), Path::empty(), t.clone())
            }
            PrimitiveFormula::FeatureEq(f, s, t) => {
                Equation::new(Path(vec![f.clone()]), s.clone(), Path::empty(), t.clone())
            }
        }
    }
}

impl fmt::Display for PrimitiveFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrimitiveFormula::TermEq(s, t) => write!(f, "{s} = {t}"),
            PrimitiveFormula::FeatureEq(a, s, t) => write!(f, "{a} {s} = {t}"),
        }
    }
}

/// A duplicate-free, insertion-ordered set of primitive formulas.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrimitiveSet {
    formulas: IndexSet<PrimitiveFormula>,
}

impl PrimitiveSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the formula was already present.
    pub fn insert(&mut self, p: PrimitiveFormula) -> bool {
        self.formulas.insert(p)
    }

    pub fn contains(&self, p: &PrimitiveFormula) -> bool {
        self.formulas.contains(p)
    }

    pub fn len(&self) -> usize {
        self.formulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PrimitiveFormula> {
        self.formulas.iter()
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = PrimitiveFormula>) {
        self.formulas.extend(other);
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        self.iter()
            .flat_map(|p| p.terms())
            .filter_map(|t| t.as_var().cloned())
            .collect()
    }
}

impl FromIterator<PrimitiveFormula> for PrimitiveSet {
    fn from_iter<I: IntoIterator<Item = PrimitiveFormula>>(iter: I) -> Self {
        PrimitiveSet {
            formulas: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a PrimitiveSet {
    type Item = &'a PrimitiveFormula;
    type IntoIter = indexmap::set::Iter<'a, PrimitiveFormula>;

    fn into_iter(self) -> Self::IntoIter {
        self.formulas.iter()
    }
}

impl fmt::Display for PrimitiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, p) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("}")
    }
}

/// Mints fresh variables `%0, %1, ...`.
#[derive(Clone, Debug, Default)]
pub struct FreshVars {
    next: u32,
}

impl FreshVars {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(next: u32) -> Self {
        FreshVars { next }
    }

    pub fn next_index(&self) -> u32 {
        self.next
    }

    pub fn mint(&mut self) -> Term {
        let v = Var::Fresh(self.next);
        self.next += 1;
        Term::Var(v)
    }
}

/// Flattens a formula into primitive formulas.
///
/// Each equation `p s = q t` becomes `(p s = y) ∪ (q t = y)` for a fresh `y`,
/// and each side `f_n ... f_1 s = y` unrolls into
/// `{s = y0, y_n = y} ∪ {f_i y_(i-1) = y_i}` with fresh `y_0 .. y_n`.
/// Fresh variables are numbered from `%0` for every call.
pub fn transform(f: &Formula) -> PrimitiveSet {
    let mut out = PrimitiveSet::new();
    transform_into(f, &mut FreshVars::new(), &mut out);
    out
}

/// [`transform`] with a caller-owned fresh-variable supply.
pub fn transform_into(f: &Formula, fresh: &mut FreshVars, out: &mut PrimitiveSet) {
    for eq in f.conjuncts() {
        let joint = fresh.mint();
        unroll_side(&eq.left_path, &eq.left_term, &joint, fresh, out);
        unroll_side(&eq.right_path, &eq.right_term, &joint, fresh, out);
    }
}

fn unroll_side(
    path: &Path,
    start: &Term,
    joint: &Term,
    fresh: &mut FreshVars,
    out: &mut PrimitiveSet,
) {
    let mut prev = fresh.mint();
    out.insert(PrimitiveFormula::TermEq(start.clone(), prev.clone()));
    for attr in path.application_order() {
        let next = fresh.mint();
        out.insert(PrimitiveFormula::FeatureEq(attr.clone(), prev, next.clone()));
        prev = next;
    }
    out.insert(PrimitiveFormula::TermEq(prev, joint.clone()));
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty formula")]
    Empty,
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Var(String),
    Eq,
    And,
}

struct Lexed {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Lexed>, ParseError> {
    let mut out = Vec::new();
    for (li, raw_line) in text.lines().enumerate() {
        let line = li + 1;
        let content = raw_line.split('#').next().unwrap_or("");
        let chars: Vec<char> = content.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            match c {
                '=' => {
                    out.push(Lexed { tok: Tok::Eq, line, column });
                    i += 1;
                }
                '&' => {
                    out.push(Lexed { tok: Tok::And, line, column });
                    i += 1;
                }
                '?' => {
                    let start = i + 1;
                    let mut j = start;
                    while j < chars.len() && is_token_char(chars[j]) {
                        j += 1;
                    }
                    if j == start {
                        return Err(syntax(line, column, "expected variable name after '?'"));
                    }
                    let name: String = chars[start..j].iter().collect();
                    out.push(Lexed { tok: Tok::Var(name), line, column });
                    i = j;
                }
                c if is_token_char(c) => {
                    let mut j = i;
                    while j < chars.len() && is_token_char(chars[j]) {
                        j += 1;
                    }
                    let word: String = chars[i..j].iter().collect();
                    out.push(Lexed { tok: Tok::Word(word), line, column });
                    i = j;
                }
                other => {
                    return Err(syntax(line, column, format!("unexpected character {other:?}")));
                }
            }
        }
    }
    Ok(out)
}

/// Splits `path? term` into its path and term.
fn side(toks: &[Lexed], line: usize, column: usize) -> Result<(Path, Term), ParseError> {
    let Some((last, path)) = toks.split_last() else {
        return Err(syntax(line, column, "expected a term"));
    };
    let mut attrs = Vec::with_capacity(path.len());
    for t in path {
        match &t.tok {
            Tok::Word(w) => attrs.push(Attribute(w.as_str().into())),
            Tok::Var(_) => {
                return Err(syntax(t.line, t.column, "a variable can only end a path expression"))
            }
            _ => unreachable!(),
        }
    }
    let term = match &last.tok {
        Tok::Word(w) => Term::Const(Constant(w.as_str().into())),
        Tok::Var(v) => Term::Var(Var::Named(v.as_str().into())),
        _ => unreachable!(),
    };
    Ok((Path(attrs), term))
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(ParseError::Empty);
    }
    let (end_line, end_col) = {
        let lines: Vec<&str> = text.lines().collect();
        (lines.len().max(1), lines.last().map_or(0, |l| l.chars().count()) + 1)
    };
    let mut conjuncts = Vec::new();
    for group in toks.split(|t| t.tok == Tok::And) {
        let (line, column) = group
            .first()
            .map_or((end_line, end_col), |t| (t.line, t.column));
        let eq_positions: Vec<usize> = group
            .iter()
            .enumerate()
            .filter(|(_, t)| t.tok == Tok::Eq)
            .map(|(i, _)| i)
            .collect();
        let split = match eq_positions.as_slice() {
            [i] => *i,
            [] => return Err(syntax(line, column, "expected '=' in equation")),
            [_, second, ..] => {
                let t = &group[*second];
                return Err(syntax(t.line, t.column, "more than one '=' in equation"));
            }
        };
        let eq_tok = &group[split];
        let (lp, lt) = side(&group[..split], eq_tok.line, eq_tok.column)?;
        let (rp, rt) = side(&group[split + 1..], eq_tok.line, eq_tok.column + 1)?;
        conjuncts.push(Equation::new(lp, lt, rp, rt));
    }
    Ok(Formula { conjuncts })
}

pub fn format_formula(f: &Formula) -> String {
    f.to_string()
}
