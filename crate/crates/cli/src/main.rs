use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use featsat::avm::{format_avm, graph_to_avm, parse_avm, unify};
use featsat::formula::parse_formula;
use featsat::grammar::{
    backbone, backbone_recognize, builtin_unification_grammar, check_offline_parsability, parse_grammar,
    UnificationGrammar,
};
use featsat::recognizer::{recognize_with, RecognizeOptions};
use featsat::sat::{
    check_all, format_report_line, parse_dimacs, reduce_to_string, CheckOptions, CnfFormula, DEFAULT_VAR_CAP,
};
use featsat::solver::feature_graph_sat;
use serde_json::json;

#[derive(Parser)]
#[command(name = "featsat", version, about = "Feature-graph satisfiability and the SAT-to-grammar reduction")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a formula describes a feature-graph.
    Solve {
        /// Formula file, or `-` for standard input.
        file: PathBuf,
        /// Also print the model as an AVM and a graph.
        #[arg(long)]
        model: bool,
    },
    /// Unify two AVMs.
    Unify { a: PathBuf, b: PathBuf },
    /// Recognize a string with an annotated grammar.
    Recognize {
        string: String,
        /// Grammar file; defaults to the builtin grammar.
        #[arg(long)]
        grammar: Option<PathBuf>,
        /// Print the derivation found.
        #[arg(long)]
        cert: bool,
        /// Give up after this many search states.
        #[arg(long)]
        max_states: Option<u64>,
    },
    /// Print the string a CNF formula reduces to.
    Reduce { file: PathBuf },
    /// Compare brute-force SAT with recognition of the reduced string.
    Verify {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        grammar: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_VAR_CAP)]
        var_cap: u32,
        #[arg(long)]
        max_states: Option<u64>,
    },
    /// Check a grammar for off-line parsability.
    CheckGrammar { file: PathBuf },
    /// Walk through the main examples.
    Demo,
}

/// Exit status for a positive or a negative answer.
fn status(positive: bool) -> ExitCode {
    if positive {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_grammar(path: Option<&Path>) -> Result<UnificationGrammar> {
    match path {
        None => Ok(builtin_unification_grammar()),
        Some(p) => parse_grammar(&read_input(p)?).with_context(|| format!("in grammar {}", p.display())),
    }
}

fn load_cnf(path: &Path) -> Result<CnfFormula> {
    let parsed = parse_dimacs(&read_input(path)?).with_context(|| format!("in {}", path.display()))?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(parsed.formula)
}

fn solve(out: &mut impl Write, format: Format, file: &Path, model: bool) -> Result<ExitCode> {
    let f = parse_formula(&read_input(file)?).with_context(|| format!("in {}", file.display()))?;
    let v = feature_graph_sat(&f);
    let graph = v.graph().filter(|_| model);
    match format {
        Format::Text => {
            writeln!(out, "{}", v.answer)?;
            if let Some(g) = graph {
                writeln!(out, "{}", format_avm(&graph_to_avm(g)))?;
                writeln!(out, "{}", g.to_json_string())?;
            }
        }
        Format::Json => {
            let mut j = json!({ "answer": v.answer.to_string() });
            if let Some(g) = graph {
                j["avm"] = json!(format_avm(&graph_to_avm(g)));
                j["graph"] = serde_json::to_value(g)?;
            }
            writeln!(out, "{j}")?;
        }
    }
    Ok(status(v.is_yes()))
}

fn unify_cmd(out: &mut impl Write, format: Format, a: &Path, b: &Path) -> Result<ExitCode> {
    let x = parse_avm(&read_input(a)?).with_context(|| format!("in {}", a.display()))?;
    let y = parse_avm(&read_input(b)?).with_context(|| format!("in {}", b.display()))?;
    let r = unify(&x, &y);
    match (format, &r) {
        (Format::Text, Ok(u)) => writeln!(out, "{u}")?,
        (Format::Text, Err(_)) => writeln!(out, "FAIL")?,
        (Format::Json, Ok(u)) => writeln!(out, "{}", json!({ "unified": true, "avm": u.to_string() }))?,
        (Format::Json, Err(_)) => writeln!(out, "{}", json!({ "unified": false }))?,
    }
    Ok(status(r.is_ok()))
}

fn recognize_cmd(
    out: &mut impl Write,
    format: Format,
    w: &str,
    grammar: Option<&Path>,
    cert: bool,
    max_states: Option<u64>,
) -> Result<ExitCode> {
    let g = load_grammar(grammar)?;
    let r = recognize_with(&g, w, &RecognizeOptions { max_states })?;
    let verdict = if r.accepted { "ACCEPT" } else { "REJECT" };
    match format {
        Format::Text => {
            writeln!(out, "{verdict}")?;
            if let (true, Some(d)) = (cert, &r.derivation) {
                writeln!(out, "{d}")?;
            }
        }
        Format::Json => {
            let d = r.derivation.as_ref().filter(|_| cert).map(|d| d.to_string());
            writeln!(
                out,
                "{}",
                json!({ "accepted": r.accepted, "derivation": d, "states_explored": r.states_explored })
            )?;
        }
    }
    Ok(status(r.accepted))
}

fn reduce_cmd(out: &mut impl Write, format: Format, file: &Path) -> Result<ExitCode> {
    let image = reduce_to_string(&load_cnf(file)?);
    match format {
        Format::Text => writeln!(out, "{image}")?,
        Format::Json => writeln!(out, "{}", json!({ "image": image }))?,
    }
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(
    out: &mut impl Write,
    format: Format,
    files: &[PathBuf],
    grammar: Option<&Path>,
    jobs: Option<usize>,
    opts: &CheckOptions,
) -> Result<ExitCode> {
    let g = load_grammar(grammar)?;
    let formulas = files.iter().map(|f| load_cnf(f)).collect::<Result<Vec<_>>>()?;
    let reports = check_all(&g, &formulas, opts, jobs);
    let all_pass = reports.iter().all(|r| r.as_ref().is_ok_and(|r| r.passed()));
    match format {
        Format::Text => {
            for (i, r) in reports.iter().enumerate() {
                writeln!(out, "{}  {}", format_report_line(i, r), files[i].display())?;
            }
        }
        Format::Json => {
            let items: Vec<_> = reports
                .iter()
                .zip(files)
                .enumerate()
                .map(|(i, (r, f))| match r {
                    Ok(r) => json!({ "id": i, "file": f.display().to_string(), "report": r }),
                    Err(e) => json!({ "id": i, "file": f.display().to_string(), "error": e.to_string() }),
                })
                .collect();
            writeln!(out, "{}", serde_json::Value::Array(items))?;
        }
    }
    Ok(status(all_pass))
}

fn check_grammar_cmd(out: &mut impl Write, format: Format, file: &Path) -> Result<ExitCode> {
    let g = load_grammar(Some(file))?;
    let ok = check_offline_parsability(&g);
    match format {
        Format::Text if ok => writeln!(out, "offline-parsable")?,
        Format::Text => writeln!(out, "not offline-parsable: some nonterminal derives itself without input")?,
        Format::Json => writeln!(out, "{}", json!({ "offline_parsable": ok, "rules": g.rules.len() }))?,
    }
    Ok(status(ok))
}

const DEMO_FORMULA: &str = "subject ?x = ?y & predicate ?x = ?z & number ?y = number ?z \
                            & number subject ?x = singular & tense ?x = present";

fn demo_corpus() -> Vec<CnfFormula> {
    let cases: [&[&[i64]]; 7] = [
        &[],
        &[&[1]],
        &[&[1], &[-1]],
        &[&[2], &[-2]],
        &[&[1, -2], &[2]],
        &[&[1, 2], &[-1, 2], &[1, -2], &[-1, -2]],
        &[&[1, 2, 3], &[-1], &[-2]],
    ];
    cases.iter().map(|c| CnfFormula::from_signed(c).unwrap()).collect()
}

fn demo(out: &mut impl Write, format: Format) -> Result<ExitCode> {
    let f = parse_formula(DEMO_FORMULA)?;
    let v = feature_graph_sat(&f);
    let avm = v.graph().map(|g| format_avm(&graph_to_avm(g))).unwrap_or_default();
    let plural = parse_formula(&format!("{DEMO_FORMULA} & number subject ?x = plural"))?;
    let plural_answer = feature_graph_sat(&plural).answer;

    let g = builtin_unification_grammar();
    let w = "#10p#10q";
    let in_backbone = backbone_recognize(&backbone(&g), w)?;
    let in_g = recognize_with(&g, w, &RecognizeOptions::default())?.accepted;

    let corpus = demo_corpus();
    let reports = check_all(&g, &corpus, &CheckOptions::default(), Some(1));
    let all_pass = v.is_yes() && !in_g && reports.iter().all(|r| r.as_ref().is_ok_and(|r| r.passed()));

    match format {
        Format::Text => {
            writeln!(out, "Description of \"A man walks\"")?;
            writeln!(out, "  {DEMO_FORMULA}")?;
            writeln!(out, "  answer: {}", v.answer)?;
            writeln!(out, "  model: {avm}")?;
            writeln!(out, "  with number subject ?x = plural added: {plural_answer}")?;
            writeln!(out)?;
            writeln!(out, "The string {w}")?;
            writeln!(out, "  regular backbone: {}", if in_backbone { "ACCEPT" } else { "REJECT" })?;
            writeln!(out, "  annotated grammar: {}", if in_g { "ACCEPT" } else { "REJECT" })?;
            writeln!(out)?;
            writeln!(out, "SAT against recognition")?;
            for (i, (r, f)) in reports.iter().zip(&corpus).enumerate() {
                let shown = if f.clauses.is_empty() { "(empty)".to_string() } else { f.to_string() };
                writeln!(out, "  {:<28} {}", shown, format_report_line(i, r))?;
            }
        }
        Format::Json => {
            let rows: Vec<_> = reports
                .iter()
                .map(|r| match r {
                    Ok(r) => serde_json::to_value(r).unwrap(),
                    Err(e) => json!({ "error": e.to_string() }),
                })
                .collect();
            let j = json!({
                "formula": DEMO_FORMULA,
                "answer": v.answer.to_string(),
                "avm": avm,
                "plural_answer": plural_answer.to_string(),
                "string": w,
                "backbone_accepts": in_backbone,
                "grammar_accepts": in_g,
                "corpus": rows,
            });
            writeln!(out, "{j}")?;
        }
    }
    Ok(status(all_pass))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let out = &mut io::stdout().lock();
    let fmt = cli.format;
    match cli.command {
        Command::Solve { file, model } => solve(out, fmt, &file, model),
        Command::Unify { a, b } => unify_cmd(out, fmt, &a, &b),
        Command::Recognize {
            string,
            grammar,
            cert,
            max_states,
        } => recognize_cmd(out, fmt, &string, grammar.as_deref(), cert, max_states),
        Command::Reduce { file } => reduce_cmd(out, fmt, &file),
        Command::Verify {
            files,
            grammar,
            jobs,
            var_cap,
            max_states,
        } => verify_cmd(
            out,
            fmt,
            &files,
            grammar.as_deref(),
            jobs,
            &CheckOptions { var_cap, max_states },
        ),
        Command::CheckGrammar { file } => check_grammar_cmd(out, fmt, &file),
        Command::Demo => demo(out, fmt),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
