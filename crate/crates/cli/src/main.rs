//! `realeq`: solve, translate, normalize and cross-check fixed-point
//! equation systems over the extended reals.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::TypedValueParser;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use realeq::normal_form::DEFAULT_TERM_CAP;
use realeq::ExtReal;

use crate::commands::{Encoding, Failure};

#[derive(Debug, Parser)]
#[command(name = "realeq", version, about = "Exact solver for real equation systems")]
struct Cli {
    /// Maximum term size, in expression nodes, before giving up.
    #[arg(long, global = true, default_value_t = DEFAULT_TERM_CAP,
          value_parser = clap::value_parser!(u64).range(1000..).map(|n| n as usize))]
    cap: usize,

    /// Worker threads for batch verification work.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..).map(|n| n as usize))]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a closed RES file and print every bound variable's value.
    Solve(SolveArgs),
    /// Translate a formula over a probabilistic transition system into a RES file.
    Translate(TranslateArgs),
    /// Print every right-hand side of a RES file in normal form.
    Normalize(NormalizeArgs),
    /// Solve a BES file directly and through a real embedding, and compare.
    Bes(BesArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    path: PathBuf,
    /// Check the solution by residual evaluation and cross-check every
    /// single-equation solve against the geometric oracle.
    #[arg(long)]
    verify: bool,
    /// Emit machine-readable JSON.
    #[arg(long)]
    json: bool,
    /// Print the elimination steps.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Args)]
struct TranslateArgs {
    formula: PathBuf,
    model: PathBuf,
    /// Write the system here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Form {
    Cnf,
    Dnf,
}

#[derive(Debug, Args)]
struct NormalizeArgs {
    path: PathBuf,
    #[arg(long, value_enum)]
    form: Form,
}

#[derive(Debug, Args)]
struct BesArgs {
    path: PathBuf,
    /// `literal` (true ↦ inf, false ↦ -inf) or `const:CT,CF`.
    #[arg(long, default_value = "literal", value_parser = parse_encoding)]
    encoding: Encoding,
}

fn parse_encoding(s: &str) -> Result<Encoding, String> {
    if s == "literal" {
        return Ok(Encoding::Literal);
    }
    let rest = s
        .strip_prefix("const:")
        .ok_or_else(|| format!("expected `literal` or `const:CT,CF`, got `{s}`"))?;
    let (ct, cf) = rest
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated constants, got `{rest}`"))?;
    let value = |v: &str| v.trim().parse::<ExtReal>().map_err(|e| format!("bad constant `{v}`: {e}"));
    Ok(Encoding::Const {
        ct: value(ct)?,
        cf: value(cf)?,
    })
}

fn run(cli: Cli) -> Result<String, Failure> {
    let cap = cli.cap;
    match cli.command {
        Command::Solve(a) => commands::solve(
            &a.path,
            &commands::SolveOptions {
                cap,
                verify: a.verify,
                json: a.json,
                trace: a.trace,
            },
        ),
        Command::Translate(a) => commands::translate(&a.formula, &a.model, a.output.as_deref()),
        Command::Normalize(a) => {
            let polarity = match a.form {
                Form::Cnf => realeq::Polarity::Cnf,
                Form::Dnf => realeq::Polarity::Dnf,
            };
            commands::normalize(&a.path, polarity, cap)
        }
        Command::Bes(a) => commands::bes(&a.path, &a.encoding, cap),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors share the exit code of malformed input; exit
            // code 2 is reserved for open systems.
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let jobs = cli.jobs;
    let outcome = match jobs {
        Some(n) => realeq::parallel::with_jobs(n, || run(cli)),
        None => run(cli),
    };
    match outcome {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            if let Some(out) = failure.partial_output() {
                print!("{out}");
            }
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
