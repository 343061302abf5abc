//! Right-linear grammars, optionally annotated with path-equation formulas.
//!
//! File format, one production per line:
//!
//! ```text
//! S -> '#' F @ assign ?x0 = assign ?x1
//! S -> _ @ v assign ?x0 = +
//! ```
//!
//! Terminals are quoted, nonterminals are bare capitalized names, `_` is the
//! empty body, and the optional `@ formula` annotation may only use the
//! variables `?x0` (the head's node) and `?x1` (the tail's node). `#` outside
//! quotes starts a comment.
//!
//! In the builtin grammars `q` spells the negated literal marker p̄.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::formula::{parse_formula, Formula, ParseError, Term, Var};
use crate::solver::acyclic_from;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NonTerminal(Arc<str>);

impl NonTerminal {
    pub fn new(name: &str) -> Self {
        assert!(is_nonterminal_name(name), "invalid nonterminal {name:?}");
        NonTerminal(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NonTerminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_nonterminal_name(s: &str) -> bool {
    let mut cs = s.chars();
    cs.next().is_some_and(|c| c.is_ascii_uppercase())
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Terminal(Arc<str>);

impl Terminal {
    pub fn new(glyph: &str) -> Self {
        assert!(is_terminal_text(glyph), "invalid terminal {glyph:?}");
        Terminal(glyph.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn is_terminal_text(s: &str) -> bool {
    !s.is_empty() && !s.contains(['\'', '\n'])
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "'{}'", self.0)
    }
}

/// Terminals followed by at most one nonterminal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RuleBody {
    pub terminals: Vec<Terminal>,
    pub tail: Option<NonTerminal>,
}

impl RuleBody {
    pub fn epsilon() -> Self {
        RuleBody {
            terminals: Vec::new(),
            tail: None,
        }
    }

    /// The concatenated terminal text.
    pub fn yield_text(&self) -> String {
        self.terminals.iter().map(|t| t.as_str()).collect()
    }

    pub fn is_unit(&self) -> bool {
        self.terminals.is_empty() && self.tail.is_some()
    }
}

impl fmt::Display for RuleBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terminals.is_empty() && self.tail.is_none() {
            return f.write_str("_");
        }
        let mut parts: Vec<String> = self.terminals.iter().map(|t| t.to_string()).collect();
        if let Some(nt) = &self.tail {
            parts.push(nt.to_string());
        }
        f.write_str(&parts.join(" "))
    }
}

/// A production's constraint over `?x0` and `?x1`; `None` is the true constraint.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Annotation(pub Option<Formula>);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Production {
    pub head: NonTerminal,
    pub body: RuleBody,
    pub annotation: Annotation,
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.head, self.body)?;
        if let Some(a) = &self.annotation.0 {
            write!(f, " @ {a}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnificationGrammar {
    pub start: NonTerminal,
    pub rules: Vec<Production>,
}

/// A right-linear grammar with no annotations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularGrammar {
    pub start: NonTerminal,
    pub rules: Vec<(NonTerminal, RuleBody)>,
}

impl fmt::Display for UnificationGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.rules.iter().try_for_each(|r| writeln!(f, "{r}"))
    }
}

impl fmt::Display for RegularGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.rules
            .iter()
            .try_for_each(|(h, b)| writeln!(f, "{h} -> {b}"))
    }
}

pub fn format_grammar(g: &UnificationGrammar) -> String {
    g.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: annotation: {source}")]
    Annotation { line: usize, source: ParseError },
    #[error("line {line}: variable {var} is not allowed; annotations use ?x0 and ?x1 only")]
    ForeignVariable { line: usize, var: String },
    #[error("line {line}: ?x1 used in a production without a tail nonterminal")]
    TailVariableWithoutTail { line: usize },
    #[error("line {line}: nonterminal {name} has no productions")]
    UnknownNonterminal { line: usize, name: String },
    #[error("grammar has no productions")]
    Empty,
}

fn syntax(line: usize, message: impl Into<String>) -> GrammarError {
    GrammarError::Syntax {
        line,
        message: message.into(),
    }
}

/// Strips a `#` comment that is not inside quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn split_annotation(line: &str) -> (&str, Option<&str>) {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' => quoted = !quoted,
            '@' if !quoted => return (&line[..i], Some(&line[i + 1..])),
            _ => {}
        }
    }
    (line, None)
}

fn parse_body(text: &str, line: usize) -> Result<RuleBody, GrammarError> {
    let mut terminals = Vec::new();
    let mut tail = None;
    let mut epsilon = false;
    let mut rest = text.trim_start();
    while !rest.is_empty() {
        if tail.is_some() {
            return Err(syntax(line, "a nonterminal may only end a production body"));
        }
        if let Some(after) = rest.strip_prefix('\'') {
            let end = after
                .find('\'')
                .ok_or_else(|| syntax(line, "unterminated terminal quote"))?;
            let glyph = &after[..end];
            if glyph.is_empty() {
                return Err(syntax(line, "empty terminal"));
            }
            terminals.push(Terminal(glyph.into()));
            rest = after[end + 1..].trim_start();
            continue;
        }
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let word = &rest[..end];
        rest = rest[end..].trim_start();
        if word == "_" {
            epsilon = true;
        } else if is_nonterminal_name(word) {
            tail = Some(NonTerminal(word.into()));
        } else {
            return Err(syntax(line, format!("{word:?} is neither a quoted terminal nor a nonterminal")));
        }
    }
    match (epsilon, terminals.is_empty() && tail.is_none()) {
        (true, true) => Ok(RuleBody::epsilon()),
        (true, false) => Err(syntax(line, "'_' must stand alone")),
        (false, true) => Err(syntax(line, "empty body; write '_' for the empty production")),
        (false, false) => Ok(RuleBody { terminals, tail }),
    }
}

fn check_annotation(f: &Formula, has_tail: bool, line: usize) -> Result<(), GrammarError> {
    for v in f.variables() {
        match &v {
            Var::Named(n) if &**n == "x0" => {}
            Var::Named(n) if &**n == "x1" => {
                if !has_tail {
                    return Err(GrammarError::TailVariableWithoutTail { line });
                }
            }
            other => {
                return Err(GrammarError::ForeignVariable {
                    line,
                    var: other.to_string(),
                })
            }
        }
    }
    Ok(())
}

pub fn parse_grammar(text: &str) -> Result<UnificationGrammar, GrammarError> {
    let mut rules = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        let (rule_text, annotation_text) = split_annotation(content);
        let (head, body) = rule_text
            .split_once("->")
            .ok_or_else(|| syntax(line, "expected 'Head -> body'"))?;
        let head = head.trim();
        if !is_nonterminal_name(head) {
            return Err(syntax(line, format!("{head:?} is not a nonterminal name")));
        }
        let body = parse_body(body, line)?;
        let annotation = match annotation_text {
            None => Annotation(None),
            Some(a) => {
                let f = parse_formula(a).map_err(|source| GrammarError::Annotation { line, source })?;
                check_annotation(&f, body.tail.is_some(), line)?;
                Annotation(Some(f))
            }
        };
        rules.push(Production {
            head: NonTerminal(head.into()),
            body,
            annotation,
        });
        lines.push(line);
    }
    let start = rules.first().ok_or(GrammarError::Empty)?.head.clone();
    let heads: BTreeSet<&NonTerminal> = rules.iter().map(|r| &r.head).collect();
    for (r, line) in rules.iter().zip(&lines) {
        if let Some(t) = &r.body.tail {
            if !heads.contains(t) {
                return Err(GrammarError::UnknownNonterminal {
                    line: *line,
                    name: t.to_string(),
                });
            }
        }
    }
    Ok(UnificationGrammar { start, rules })
}

pub fn backbone(g: &UnificationGrammar) -> RegularGrammar {
    RegularGrammar {
        start: g.start.clone(),
        rules: g
            .rules
            .iter()
            .map(|r| (r.head.clone(), r.body.clone()))
            .collect(),
    }
}

/// Terminal-only / unit / empty productions of the fixed grammar, in table order.
const FIXED_RULES: [(&str, &[&str], Option<&str>); 19] = [
    ("S", &["#"], Some("F")),
    ("S", &["#"], Some("T")),
    ("S", &[], None),
    ("F", &["0"], Some("F")),
    ("F", &["1"], Some("F")),
    ("F", &["p"], Some("F")),
    ("F", &["q"], Some("F")),
    ("F", &["p"], Some("T")),
    ("F", &["q"], Some("T")),
    ("T", &["0"], Some("T")),
    ("T", &["1"], Some("T")),
    ("T", &["p"], Some("A")),
    ("T", &["q"], Some("A")),
    ("A", &[], Some("B")),
    ("A", &[], Some("S")),
    ("B", &["0"], Some("B")),
    ("B", &["1"], Some("B")),
    ("B", &["p"], Some("A")),
    ("B", &["q"], Some("A")),
];

/// Annotations for [`FIXED_RULES`], index for index.
///
/// Every production carries `assign` over. Moving from S or F into T points
/// `new` at `assign`; each bit read in T descends `new` by that bit; and the
/// final p or q of the chosen literal sets `v` below the bits to + or -.
const FIXED_ANNOTATIONS: [&str; 19] = [
    "assign ?x0 = assign ?x1",
    "assign ?x0 = assign ?x1 & assign ?x0 = new ?x1",
    "v assign ?x0 = +",
    "assign ?x0 = assign ?x1",
    "assign ?x0 = assign ?x1",
    "assign ?x0 = assign ?x1",
    "assign ?x0 = assign ?x1",
    "assign ?x0 = assign ?x1 & assign ?x0 = new ?x1",
    "assign ?x0 = assign ?x1 & assign ?x0 = new ?x1",
    "assign ?x0 = assign ?x1 & 0 new ?x0 = new ?x1",
    "assign ?x0 = assign ?x1 & 1 new ?x0 = new ?x1",
    "assign ?x0 = assign ?x1 & v new ?x0 = +",
    "assign ?x0 = assign ?x1 & v new ?x0 = -",
    "assign ?x0 = assign ?x1",
    "assign ?x0 = assign ?x1",
    "assign ?x0 = assign ?x1",
    "assign ?x0 = assign ?x1",
    "assign ?x0 = assign ?x1",
    "assign ?x0 = assign ?x1",
];

fn fixed_body(terminals: &[&str], tail: Option<&str>) -> RuleBody {
    RuleBody {
        terminals: terminals.iter().map(|t| Terminal::new(t)).collect(),
        tail: tail.map(NonTerminal::new),
    }
}

/// The fixed regular grammar for `(#((0|1)*(p|q))+)*`.
pub fn builtin_regular_grammar() -> RegularGrammar {
    RegularGrammar {
        start: NonTerminal::new("S"),
        rules: FIXED_RULES
            .iter()
            .map(|(h, ts, tail)| (NonTerminal::new(h), fixed_body(ts, *tail)))
            .collect(),
    }
}

/// The fixed regular grammar annotated so that each `#` block must pick one
/// literal and all picked literals must agree on their variable's value.
pub fn builtin_unification_grammar() -> UnificationGrammar {
    UnificationGrammar {
        start: NonTerminal::new("S"),
        rules: FIXED_RULES
            .iter()
            .zip(FIXED_ANNOTATIONS)
            .map(|((h, ts, tail), a)| Production {
                head: NonTerminal::new(h),
                body: fixed_body(ts, *tail),
                annotation: Annotation(Some(parse_formula(a).expect("builtin annotation parses"))),
            })
            .collect(),
    }
}

/// True iff no nonterminal can derive itself without consuming input.
pub fn check_offline_parsability(g: &UnificationGrammar) -> bool {
    regular_offline_parsable(&backbone(g))
}

pub fn regular_offline_parsable(g: &RegularGrammar) -> bool {
    let mut succ: HashMap<&NonTerminal, Vec<&NonTerminal>> = HashMap::new();
    for (h, b) in &g.rules {
        if let (true, Some(t)) = (b.terminals.is_empty(), &b.tail) {
            if h == t {
                return false;
            }
            succ.entry(h).or_default().push(t);
        }
    }
    acyclic_from(&succ)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("symbol {symbol:?} at position {position} is not in the grammar's alphabet")]
pub struct UnknownSymbol {
    pub symbol: char,
    pub position: usize,
}

/// Characters appearing in any terminal.
pub fn alphabet(g: &RegularGrammar) -> BTreeSet<char> {
    g.rules
        .iter()
        .flat_map(|(_, b)| b.terminals.iter().flat_map(|t| t.as_str().chars()))
        .collect()
}

/// Nondeterministic recognition by simulating all positions inside all
/// productions at once; linear in the input length.
pub fn backbone_recognize(g: &RegularGrammar, w: &str) -> Result<bool, UnknownSymbol> {
    let sigma = alphabet(g);
    if let Some((position, symbol)) = w.chars().enumerate().find(|(_, c)| !sigma.contains(c)) {
        return Err(UnknownSymbol { symbol, position });
    }
    let texts: Vec<Vec<char>> = g.rules.iter().map(|(_, b)| b.yield_text().chars().collect()).collect();
    let mut by_head: HashMap<&NonTerminal, Vec<usize>> = HashMap::new();
    for (i, (h, _)) in g.rules.iter().enumerate() {
        by_head.entry(h).or_default().push(i);
    }
    let offsets: Vec<usize> = texts
        .iter()
        .scan(0, |acc, t| {
            let o = *acc;
            *acc += t.len() + 1;
            Some(o)
        })
        .collect();
    let item_count = offsets.last().map_or(0, |o| o + texts.last().unwrap().len() + 1);

    // An item is (production, chars consumed); `accept` marks a finished
    // production with no tail.
    let close = |seed: Vec<(usize, usize)>, set: &mut Vec<bool>, accept: &mut bool| {
        let mut stack = seed;
        while let Some((p, k)) = stack.pop() {
            let idx = offsets[p] + k;
            if set[idx] {
                continue;
            }
            set[idx] = true;
            if k == texts[p].len() {
                match &g.rules[p].1.tail {
                    None => *accept = true,
                    Some(nt) => {
                        for &q in by_head.get(nt).into_iter().flatten() {
                            stack.push((q, 0));
                        }
                    }
                }
            }
        }
    };

    let mut current = vec![false; item_count];
    let mut accept = false;
    let start: Vec<(usize, usize)> = by_head
        .get(&g.start)
        .into_iter()
        .flatten()
        .map(|&q| (q, 0))
        .collect();
    close(start, &mut current, &mut accept);
    for c in w.chars() {
        let mut seed = Vec::new();
        for (p, text) in texts.iter().enumerate() {
            for k in 0..text.len() {
                if current[offsets[p] + k] && text[k] == c {
                    seed.push((p, k + 1));
                }
            }
        }
        if seed.is_empty() {
            return Ok(false);
        }
        let mut next = vec![false; item_count];
        accept = false;
        close(seed, &mut next, &mut accept);
        current = next;
    }
    Ok(accept)
}

/// Rules whose annotation mentions `?x1` must have a tail; used by callers
/// that build grammars programmatically.
pub fn validate_annotations(g: &UnificationGrammar) -> Result<(), GrammarError> {
    for (i, r) in g.rules.iter().enumerate() {
        if let Some(f) = &r.annotation.0 {
            check_annotation(f, r.body.tail.is_some(), i + 1)?;
        }
    }
    Ok(())
}

/// Substitutes the rule-local variables of an annotation.
pub fn instantiate(a: &Annotation, node: &Term, child: Option<&Term>) -> Option<Formula> {
    a.0.as_ref().map(|f| {
        f.map_terms(|t| match t.as_var() {
            Some(Var::Named(n)) if &**n == "x0" => node.clone(),
            Some(Var::Named(n)) if &**n == "x1" => child.cloned().unwrap_or_else(|| t.clone()),
            _ => t.clone(),
        })
    })
}
