//! CNF formulas, the reduction from SAT to recognition for the builtin
//! grammar, a brute-force oracle, and a harness comparing the two.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grammar::{builtin_unification_grammar, UnificationGrammar};
use crate::recognizer::{extract_assignment, recognize_with, AssignmentError, RecognizeError, RecognizeOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub var: u32,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: u32) -> Self {
        assert!(var >= 1, "variable indices start at 1");
        Literal { var, negated: false }
    }

    pub fn neg(var: u32) -> Self {
        assert!(var >= 1, "variable indices start at 1");
        Literal { var, negated: true }
    }

    /// DIMACS-style signed form.
    pub fn from_signed(n: i64) -> Option<Self> {
        let var = u32::try_from(n.unsigned_abs()).ok().filter(|&v| v >= 1)?;
        Some(Literal { var, negated: n < 0 })
    }

    pub fn to_signed(self) -> i64 {
        if self.negated {
            -(self.var as i64)
        } else {
            self.var as i64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause(Vec<Literal>);

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Option<Self> {
        (!literals.is_empty()).then_some(Clause(literals))
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CnfFormula {
    pub clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(clauses: Vec<Clause>) -> Self {
        CnfFormula { clauses }
    }

    /// Builds a formula from signed literals; `None` if a clause is empty
    /// or a literal is zero.
    pub fn from_signed(clauses: &[&[i64]]) -> Option<Self> {
        clauses
            .iter()
            .map(|c| Clause::new(c.iter().map(|&n| Literal::from_signed(n)).collect::<Option<_>>()?))
            .collect::<Option<_>>()
            .map(CnfFormula::new)
    }

    pub fn variables(&self) -> BTreeSet<u32> {
        self.clauses
            .iter()
            .flat_map(|c| c.literals().iter().map(|l| l.var))
            .collect()
    }

    pub fn max_var(&self) -> u32 {
        self.variables().last().copied().unwrap_or(0)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.max_var(), self.clauses.len());
        for c in &self.clauses {
            for l in c.literals() {
                out.push_str(&l.to_signed().to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

/// The compact inline form, e.g. `(1 -2)(2)`.
impl fmt::Display for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            f.write_str("(")?;
            for (i, l) in c.literals().iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{}", l.to_signed())?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

pub type Assignment = BTreeMap<u32, bool>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DimacsError {
    #[error("line {line}: malformed header: {text:?}")]
    Header { line: usize, text: String },
    #[error("missing 'p cnf' header")]
    MissingHeader,
    #[error("line {line}: bad literal {text:?}")]
    Literal { line: usize, text: String },
    #[error("line {line}: literal {value} exceeds the declared {declared} variables")]
    Overflow { line: usize, value: i64, declared: u32 },
    #[error("line {line}: empty clause")]
    EmptyClause { line: usize },
    #[error("unbalanced parentheses in inline formula")]
    Unbalanced,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedCnf {
    pub formula: CnfFormula,
    pub warnings: Vec<String>,
}

/// Reads DIMACS CNF, or the inline form `(1 -2)(2)` when the first
/// non-comment character is `(`.
pub fn parse_dimacs(text: &str) -> Result<ParsedCnf, DimacsError> {
    let body = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('c'))
        .collect::<Vec<_>>()
        .join("\n");
    if body.trim_start().starts_with('(') {
        return parse_inline(&body);
    }
    let mut declared: Option<(u32, usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    let mut current_line = 0;
    let mut warnings = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('c') || l == "%" {
            continue;
        }
        if l.starts_with('p') {
            let parts: Vec<&str> = l.split_whitespace().collect();
            let header = match parts.as_slice() {
                ["p", "cnf", v, c] => v.parse::<u32>().ok().zip(c.parse::<usize>().ok()),
                _ => None,
            };
            match (header, declared) {
                (Some((v, c)), None) => declared = Some((v, c, line)),
                _ => return Err(DimacsError::Header { line, text: l.to_string() }),
            }
            continue;
        }
        let Some((vars, _, _)) = declared else {
            return Err(DimacsError::MissingHeader);
        };
        for tok in l.split_whitespace() {
            let n: i64 = tok.parse().map_err(|_| DimacsError::Literal { line, text: tok.to_string() })?;
            if n == 0 {
                let lits = std::mem::take(&mut current);
                clauses.push(Clause::new(lits).ok_or(DimacsError::EmptyClause { line })?);
                continue;
            }
            let lit = Literal::from_signed(n).ok_or(DimacsError::Literal { line, text: tok.to_string() })?;
            if lit.var > vars {
                return Err(DimacsError::Overflow { line, value: n, declared: vars });
            }
            if current.is_empty() {
                current_line = line;
            }
            current.push(lit);
        }
    }
    let Some((_, count, header_line)) = declared else {
        return Err(DimacsError::MissingHeader);
    };
    if !current.is_empty() {
        warnings.push(format!("line {current_line}: last clause not terminated by 0"));
        clauses.push(Clause(current));
    }
    if clauses.len() != count {
        warnings.push(format!(
            "line {header_line}: header declares {count} clauses, found {}",
            clauses.len()
        ));
    }
    Ok(ParsedCnf {
        formula: CnfFormula::new(clauses),
        warnings,
    })
}

fn parse_inline(body: &str) -> Result<ParsedCnf, DimacsError> {
    let mut clauses = Vec::new();
    let mut rest = body.trim();
    while !rest.is_empty() {
        let inner = rest.strip_prefix('(').ok_or(DimacsError::Unbalanced)?;
        let close = inner.find(')').ok_or(DimacsError::Unbalanced)?;
        let lits = inner[..close]
            .split_whitespace()
            .map(|tok| {
                tok.parse::<i64>()
                    .ok()
                    .and_then(Literal::from_signed)
                    .ok_or(DimacsError::Literal { line: 1, text: tok.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        clauses.push(Clause::new(lits).ok_or(DimacsError::EmptyClause { line: 1 })?);
        rest = inner[close + 1..].trim_start();
    }
    Ok(ParsedCnf {
        formula: CnfFormula::new(clauses),
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("assignment has no value for variable {0}")]
pub struct MissingVariable(pub u32);

pub fn evaluate(f: &CnfFormula, a: &Assignment) -> Result<bool, MissingVariable> {
    let mut all = true;
    for c in &f.clauses {
        let mut any = false;
        for l in c.literals() {
            let v = *a.get(&l.var).ok_or(MissingVariable(l.var))?;
            any |= v != l.negated;
        }
        all &= any;
    }
    Ok(all)
}

pub const DEFAULT_VAR_CAP: u32 = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Satisfiable(Assignment),
    Unsatisfiable,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Satisfiable(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{vars} variables exceed the brute-force cap of {cap}")]
pub struct CapExceeded {
    pub vars: u32,
    pub cap: u32,
}

pub fn brute_force_sat(f: &CnfFormula) -> Result<SatResult, CapExceeded> {
    brute_force_sat_capped(f, DEFAULT_VAR_CAP)
}

/// Tries every assignment of variables `1..=max_var`, counting upward with
/// variable 1 as the least significant bit.
pub fn brute_force_sat_capped(f: &CnfFormula, cap: u32) -> Result<SatResult, CapExceeded> {
    let n = f.max_var();
    if n > cap {
        return Err(CapExceeded { vars: n, cap });
    }
    for mask in 0u64..(1u64 << n) {
        let a: Assignment = (1..=n).map(|v| (v, mask >> (v - 1) & 1 == 1)).collect();
        if evaluate(f, &a).expect("assignment is total") {
            return Ok(SatResult::Satisfiable(a));
        }
    }
    Ok(SatResult::Unsatisfiable)
}

/// `#` before each clause, then for each literal the variable index in
/// binary followed by `p` (positive) or `q` (negated).
pub fn reduce_to_string(f: &CnfFormula) -> String {
    let mut out = String::with_capacity(reduction_length(f));
    for c in &f.clauses {
        out.push('#');
        for l in c.literals() {
            out.push_str(&format!("{:b}", l.var));
            out.push(if l.negated { 'q' } else { 'p' });
        }
    }
    out
}

pub fn bit_length(v: u32) -> usize {
    (u32::BITS - v.leading_zeros()) as usize
}

pub fn reduction_length(f: &CnfFormula) -> usize {
    f.clauses
        .iter()
        .map(|c| 1 + c.literals().iter().map(|l| bit_length(l.var) + 1).sum::<usize>())
        .sum()
}

/// Turns binary index strings from the recognizer into variable numbers.
pub fn decode_assignment(raw: &BTreeMap<String, bool>) -> Assignment {
    raw.iter()
        .filter_map(|(bits, &v)| u32::from_str_radix(bits, 2).ok().map(|i| (i, v)))
        .collect()
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct Report {
    pub formula: String,
    pub image: String,
    pub oracle_sat: bool,
    pub recognizer_accepts: bool,
    pub agree: bool,
    pub derivation: Option<String>,
    /// Extracted from the derivation, padded with `false` for formula
    /// variables the derivation leaves open.
    pub assignment: Option<Assignment>,
    pub assignment_satisfies: Option<bool>,
    pub states_explored: u64,
}

impl Report {
    /// Agreement, and when both accept, the extracted assignment satisfies.
    pub fn passed(&self) -> bool {
        self.agree && self.assignment_satisfies != Some(false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error(transparent)]
    OracleCap(#[from] CapExceeded),
    #[error("recognizer budget exhausted after {states} states")]
    BudgetExhausted { states: u64 },
    #[error(transparent)]
    Recognizer(RecognizeError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

impl From<RecognizeError> for CheckError {
    fn from(e: RecognizeError) -> Self {
        match e {
            RecognizeError::BudgetExhausted { states } => CheckError::BudgetExhausted { states },
            other => CheckError::Recognizer(other),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub var_cap: u32,
    pub max_states: Option<u64>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            var_cap: DEFAULT_VAR_CAP,
            max_states: None,
        }
    }
}

pub fn equivalence_check(f: &CnfFormula) -> Result<Report, CheckError> {
    equivalence_check_with(&builtin_unification_grammar(), f, &CheckOptions::default())
}

/// Compares the brute-force verdict on `f` with recognition of its image
/// under `g`, and checks the assignment read off an accepting derivation.
pub fn equivalence_check_with(
    g: &UnificationGrammar,
    f: &CnfFormula,
    opts: &CheckOptions,
) -> Result<Report, CheckError> {
    let oracle = brute_force_sat_capped(f, opts.var_cap)?;
    let image = reduce_to_string(f);
    assert_eq!(image.len(), reduction_length(f));
    let result = recognize_with(
        g,
        &image,
        &RecognizeOptions {
            max_states: opts.max_states,
        },
    )?;
    let (assignment, satisfies) = match &result.derivation {
        Some(d) => {
            let mut a = decode_assignment(&extract_assignment(g, d)?);
            for v in f.variables() {
                a.entry(v).or_insert(false);
            }
            let ok = evaluate(f, &a).expect("assignment padded to every variable");
            (Some(a), Some(ok))
        }
        None => (None, None),
    };
    Ok(Report {
        formula: f.to_string(),
        agree: oracle.is_sat() == result.accepted,
        oracle_sat: oracle.is_sat(),
        recognizer_accepts: result.accepted,
        derivation: result.derivation.map(|d| d.to_string()),
        image,
        assignment,
        assignment_satisfies: satisfies,
        states_explored: result.states_explored,
    })
}

/// Runs [`equivalence_check_with`] over many formulas in parallel; results
/// come back in input order. `jobs` of `None` uses all cores.
pub fn check_all(
    g: &UnificationGrammar,
    formulas: &[CnfFormula],
    opts: &CheckOptions,
    jobs: Option<usize>,
) -> Vec<Result<Report, CheckError>> {
    let run = || {
        formulas
            .par_iter()
            .map(|f| equivalence_check_with(g, f, opts))
            .collect()
    };
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(run),
        None => run(),
    }
}

/// One line per report: `<id> <verdict> oracle=.. recognizer=.. image`.
pub fn format_report_line(id: usize, r: &Result<Report, CheckError>) -> String {
    match r {
        Ok(r) => {
            let verdict = if r.passed() { "agree" } else { "DISAGREE" };
            let sat = if r.oracle_sat { "SAT" } else { "UNSAT" };
            let rec = if r.recognizer_accepts { "ACCEPT" } else { "REJECT" };
            let mut line = format!("{id} {verdict} oracle={sat} recognizer={rec} image={:?}", r.image);
            if let Some(ok) = r.assignment_satisfies {
                line.push_str(if ok { " assignment=satisfies" } else { " assignment=FAILS" });
            }
            line
        }
        Err(e) => format!("{id} error {e}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cnf(c: &[&[i64]]) -> CnfFormula {
        CnfFormula::from_signed(c).unwrap()
    }

    #[test]
    fn parses_dimacs_and_inline() {
        let p = parse_dimacs("c example\np cnf 2 2\n1 -2 0\n2 0\n").unwrap();
        assert_eq!(p.formula, cnf(&[&[1, -2], &[2]]));
        assert!(p.warnings.is_empty());
        assert_eq!(parse_dimacs("(1)").unwrap().formula, cnf(&[&[1]]));
        assert_eq!(parse_dimacs("(1 -2)(2)").unwrap().formula, cnf(&[&[1, -2], &[2]]));
        assert_eq!(cnf(&[&[1, -2], &[2]]).to_string(), "(1 -2)(2)");
    }

    #[test]
    fn dimacs_errors_and_warnings() {
        assert_eq!(parse_dimacs("p cnf 1 1\n0\n"), Err(DimacsError::EmptyClause { line: 2 }));
        assert_eq!(parse_dimacs("()"), Err(DimacsError::EmptyClause { line: 1 }));
        assert_eq!(parse_dimacs("1 0\n"), Err(DimacsError::MissingHeader));
        assert!(matches!(parse_dimacs("p cnf x 1\n"), Err(DimacsError::Header { .. })));
        assert!(matches!(parse_dimacs("p cnf 1 1\n2 0\n"), Err(DimacsError::Overflow { .. })));
        assert!(matches!(parse_dimacs("p cnf 1 1\n1a 0\n"), Err(DimacsError::Literal { .. })));
        let p = parse_dimacs("p cnf 2 3\n1 0\n2 0\n").unwrap();
        assert_eq!(p.warnings.len(), 1);
        let roundtrip = parse_dimacs(&cnf(&[&[1, -3], &[2]]).to_dimacs()).unwrap();
        assert_eq!(roundtrip.formula, cnf(&[&[1, -3], &[2]]));
    }

    #[test]
    fn evaluation() {
        let a = |pairs: &[(u32, bool)]| pairs.iter().copied().collect::<Assignment>();
        assert_eq!(evaluate(&cnf(&[&[1]]), &a(&[(1, true)])), Ok(true));
        for v in [true, false] {
            assert_eq!(evaluate(&cnf(&[&[1], &[-1]]), &a(&[(1, v)])), Ok(false));
        }
        assert_eq!(evaluate(&cnf(&[&[1, -2], &[2]]), &a(&[(1, true), (2, true)])), Ok(true));
        assert_eq!(evaluate(&cnf(&[&[1, -2]]), &a(&[(1, false)])), Err(MissingVariable(2)));
        assert_eq!(evaluate(&CnfFormula::default(), &a(&[])), Ok(true));
    }

    #[test]
    fn oracle() {
        assert_eq!(
            brute_force_sat(&cnf(&[&[1]])),
            Ok(SatResult::Satisfiable(Assignment::from([(1, true)])))
        );
        assert_eq!(brute_force_sat(&cnf(&[&[1], &[-1]])), Ok(SatResult::Unsatisfiable));
        // Variable 1 is least significant, so {1: true, 2: false} comes first.
        assert_eq!(
            brute_force_sat(&cnf(&[&[1, 2]])),
            Ok(SatResult::Satisfiable(Assignment::from([(1, true), (2, false)])))
        );
        assert_eq!(
            brute_force_sat_capped(&cnf(&[&[3]]), 2),
            Err(CapExceeded { vars: 3, cap: 2 })
        );
    }

    #[test]
    fn reduction() {
        assert_eq!(reduce_to_string(&cnf(&[&[2], &[-2]])), "#10p#10q");
        assert_eq!(reduce_to_string(&cnf(&[&[1, -2], &[2]])), "#1p10q#10p");
        assert_eq!(reduce_to_string(&cnf(&[&[1]])), "#1p");
        assert_eq!(reduction_length(&cnf(&[&[1]])), 3);
        assert_eq!(reduction_length(&cnf(&[&[2], &[-2]])), 8);
        assert_eq!(reduction_length(&CnfFormula::default()), 0);
        assert_eq!(reduce_to_string(&CnfFormula::default()), "");
    }

    #[test]
    fn equivalence_examples() {
        let r = equivalence_check(&cnf(&[&[2], &[-2]])).unwrap();
        assert!(r.agree && !r.oracle_sat && !r.recognizer_accepts);
        let r = equivalence_check(&cnf(&[&[1]])).unwrap();
        assert!(r.agree && r.recognizer_accepts);
        assert_eq!(r.assignment, Some(Assignment::from([(1, true)])));
        assert_eq!(r.assignment_satisfies, Some(true));
        let r = equivalence_check(&CnfFormula::default()).unwrap();
        assert!(r.agree && r.oracle_sat && r.recognizer_accepts);
    }

    #[test]
    fn budget_is_not_a_disagreement() {
        let opts = CheckOptions {
            max_states: Some(2),
            ..CheckOptions::default()
        };
        let r = equivalence_check_with(&builtin_unification_grammar(), &cnf(&[&[1, 2], &[-1]]), &opts);
        assert!(matches!(r, Err(CheckError::BudgetExhausted { .. })));
    }

    #[test]
    fn harness_keeps_input_order() {
        let fs = vec![cnf(&[&[1]]), cnf(&[&[1], &[-1]]), cnf(&[&[2, 3]])];
        let rs = check_all(&builtin_unification_grammar(), &fs, &CheckOptions::default(), Some(2));
        let images: Vec<_> = rs.iter().map(|r| r.as_ref().unwrap().image.clone()).collect();
        assert_eq!(images, ["#1p", "#1p#1q", "#10p11p"]);
        assert_eq!(
            format_report_line(1, &rs[1]),
            "1 agree oracle=UNSAT recognizer=REJECT image=\"#1p#1q\""
        );
    }
}
