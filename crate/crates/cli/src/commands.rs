//! The subcommands. Each returns the text destined for standard output,
//! or a [`Failure`] carrying the exit code.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use realeq::bes::{boolean_value, embed_const, embed_literal, solve_bes_direct, BesError};
use realeq::modal::{check_formula, translate as translate_formula, ModalError};
use realeq::normal_form::{NormalFormError, Normalizer};
use realeq::oracle::{crosscheck_single, residual_check};
use realeq::res::{GaussOutcome, ResError, TraceStep};
use realeq::syntax::{parse_bes, parse_formula_file, parse_plts, parse_res, SyntaxError};
use realeq::{Equation, Execution, ExtReal, Gauss, Polarity, Res};
use serde::Serialize;

/// Random instantiations per single-equation cross-check.
const CROSSCHECK_TRIALS: usize = 64;

/// Why a command failed, with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
    /// Report that is still printed, e.g. a solution that failed to verify.
    output: Option<String>,
}

impl Failure {
    const PARSE: u8 = 1;
    const NOT_CLOSED: u8 = 2;
    const BLOWUP: u8 = 3;
    const VERIFICATION: u8 = 4;
    const SEMANTIC: u8 = 5;

    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
            output: None,
        }
    }

    fn with_output(mut self, output: String) -> Self {
        self.output = Some(output);
        self
    }

    fn syntax(path: &Path, e: SyntaxError) -> Self {
        Failure::new(Failure::PARSE, format!("{}:{e}", path.display()))
    }

    pub fn code(&self) -> u8 {
        self.code
    }

    pub fn partial_output(&self) -> Option<&str> {
        self.output.as_deref()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ResError> for Failure {
    fn from(e: ResError) -> Self {
        let code = match e {
            ResError::NotClosed(_) => Failure::NOT_CLOSED,
            ResError::TermBlowup { .. } => Failure::BLOWUP,
            _ => Failure::SEMANTIC,
        };
        Failure::new(code, e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(Failure::PARSE, format!("cannot read {}: {e}", path.display())))
}

fn ensure_closed(system: &Res) -> Result<(), Failure> {
    match system.first_free_variable() {
        Some(x) => Err(ResError::NotClosed(x).into()),
        None => Ok(()),
    }
}

pub struct SolveOptions {
    pub cap: usize,
    pub verify: bool,
    pub json: bool,
    pub trace: bool,
}

#[derive(Serialize)]
struct JsonValue {
    var: String,
    value: String,
}

#[derive(Serialize)]
struct JsonReport {
    solution: Vec<JsonValue>,
    verified: Option<bool>,
}

pub fn solve(path: &Path, opts: &SolveOptions) -> Result<String, Failure> {
    let system = parse_res(&read(path)?).map_err(|e| Failure::syntax(path, e))?;
    ensure_closed(&system)?;
    let mut gauss = Gauss::default().with_cap(opts.cap);
    if opts.trace {
        gauss = gauss.with_trace();
    }
    let outcome = gauss.solve(&system)?;
    // The derivation goes to standard error in JSON mode so that standard
    // output stays a single JSON document.
    let mut out = String::new();
    if opts.trace {
        let log = render_trace(&system, &outcome.trace);
        if opts.json {
            eprint!("{log}");
        } else {
            out = log;
        }
    }
    let problems = if opts.verify {
        Some(verify(&system, &outcome)?)
    } else {
        None
    };
    let verified = problems.as_ref().map(|p| p.is_empty());
    if opts.json {
        let report = JsonReport {
            solution: outcome
                .solution
                .iter()
                .map(|(x, v)| JsonValue {
                    var: x.to_string(),
                    value: v.to_string(),
                })
                .collect(),
            verified,
        };
        out.push_str(&serde_json::to_string(&report).expect("report serializes"));
        out.push('\n');
    } else {
        for (x, v) in outcome.solution.iter() {
            let _ = writeln!(out, "{x} = {v}");
        }
    }
    match problems {
        Some(p) if !p.is_empty() => {
            Err(Failure::new(Failure::VERIFICATION, format!("verification failed:\n  {}", p.join("\n  "))).with_output(out))
        }
        _ => Ok(out),
    }
}

/// Residual check of the whole system plus an oracle cross-check of every
/// single-equation solve. Returns one line per problem found.
fn verify(system: &Res, outcome: &GaussOutcome) -> Result<Vec<String>, Failure> {
    let mut problems = Vec::new();
    let residual = residual_check(system, &outcome.solution).map_err(|e| Failure::new(Failure::VERIFICATION, e.to_string()))?;
    for row in residual.failures() {
        problems.push(format!("residual: {} = {} but its right-hand side is {}", row.var, row.lhs, row.rhs));
    }
    for (i, solve) in outcome.solves.iter().enumerate() {
        let report = crosscheck_single(solve.op, &solve.var, &solve.rhs, CROSSCHECK_TRIALS, i as u64, Execution::Parallel)
            .map_err(|e| Failure::new(Failure::BLOWUP, e.to_string()))?;
        if let Some(d) = report.discrepancy {
            let at: Vec<String> = d.valuation.iter().map(|(v, x)| format!("{v} = {x}")).collect();
            problems.push(format!(
                "cross-check of {} {} = {}: solver gives {}, oracle gives {} at [{}]",
                solve.op.keyword(),
                solve.var,
                solve.rhs,
                d.solver,
                d.oracle,
                at.join(", ")
            ));
        }
    }
    Ok(problems)
}

fn render_trace(system: &Res, steps: &[TraceStep]) -> String {
    let eqs = system.equations();
    let mut s = String::new();
    for step in steps {
        let _ = match step {
            TraceStep::Solve { index, before, after } => {
                let Equation { op, lhs, .. } = &eqs[*index];
                writeln!(s, "# solve  {} {lhs} = {before}\n#   gives {lhs} = {after}", op.keyword())
            }
            TraceStep::Substitute { target, source, after, .. } => {
                writeln!(s, "# {}  {} := {after}   [{} substituted]", step.rule(), eqs[*target].lhs, eqs[*source].lhs)
            }
            TraceStep::Constant { index, after, .. } => {
                writeln!(s, "# {}  {} = {after}", step.rule(), eqs[*index].lhs)
            }
        };
    }
    s
}

pub fn translate(formula: &Path, model: &Path, output: Option<&Path>) -> Result<String, Failure> {
    let phi = parse_formula_file(&read(formula)?).map_err(|e| Failure::syntax(formula, e))?;
    let m = parse_plts(&read(model)?).map_err(|e| Failure::syntax(model, e))?;
    let diagnostics = check_formula(&phi, Some(&m));
    for d in &diagnostics {
        let level = if d.is_error() { "error" } else { "warning" };
        eprintln!("{level}: {}: {d}", formula.display());
    }
    if let Some(d) = diagnostics.iter().find(|d| d.is_error()) {
        return Err(Failure::new(Failure::SEMANTIC, d.to_string()));
    }
    let system = translate_formula(&phi, &m).map_err(|e| match e {
        ModalError::Solve(e) => Failure::from(e),
        other => Failure::new(Failure::SEMANTIC, other.to_string()),
    })?;
    let text = system.to_string();
    match output {
        Some(path) => {
            fs::write(path, text)
                .map_err(|e| Failure::new(Failure::PARSE, format!("cannot write {}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

pub fn normalize(path: &Path, polarity: Polarity, cap: usize) -> Result<String, Failure> {
    let system = parse_res(&read(path)?).map_err(|e| Failure::syntax(path, e))?;
    let norm = Normalizer::with_cap(polarity, cap);
    let equations = system
        .equations()
        .iter()
        .map(|eq| {
            let nf = norm.full(&eq.rhs).map_err(|e| match e {
                NormalFormError::TermBlowup { .. } => Failure::new(Failure::BLOWUP, e.to_string()),
                other => Failure::new(Failure::SEMANTIC, other.to_string()),
            })?;
            Ok(Equation::new(eq.op, eq.lhs.clone(), nf.to_expr()))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    Ok(Res::new(equations)?.to_string())
}

/// How a BES is turned into a RES.
#[derive(Debug, Clone)]
pub enum Encoding {
    Literal,
    Const { ct: ExtReal, cf: ExtReal },
}

pub fn bes(path: &Path, encoding: &Encoding, cap: usize) -> Result<String, Failure> {
    let b = parse_bes(&read(path)?).map_err(|e| Failure::syntax(path, e))?;
    let bes_failure = |e: BesError| match e {
        BesError::NotClosed(x) => Failure::from(ResError::NotClosed(x)),
        other => Failure::new(Failure::SEMANTIC, other.to_string()),
    };
    let (system, ct, cf) = match encoding {
        Encoding::Literal => (embed_literal(&b), ExtReal::PosInf, ExtReal::NegInf),
        Encoding::Const { ct, cf } => (embed_const(&b, ct, cf).map_err(bes_failure)?, ct.clone(), cf.clone()),
    };
    let direct = solve_bes_direct(&b).map_err(bes_failure)?;
    ensure_closed(&system)?;
    let embedded = Gauss::default().with_cap(cap).solve(&system)?.solution;
    let mut out = String::new();
    let mut disagreements = Vec::new();
    for (x, value) in embedded.iter() {
        let verdict = direct[x];
        let expected = boolean_value(verdict, &ct, &cf);
        let agrees = *value == expected;
        let _ = writeln!(out, "{x}: direct {verdict}, embedded {value}{}", if agrees { "" } else { "  MISMATCH" });
        if !agrees {
            disagreements.push(format!("{x}: expected {expected}, embedding gives {value}"));
        }
    }
    if disagreements.is_empty() {
        out.push_str("agree\n");
        Ok(out)
    } else {
        out.push_str("disagree\n");
        Err(Failure::new(
            Failure::VERIFICATION,
            format!("direct and embedded solutions differ:\n  {}", disagreements.join("\n  ")),
        )
        .with_output(out))
    }
}
