//! Text formats for equation systems, formulas, models and boolean
//! systems, with printers whose output parses back to the same structure.
//!
//! All four formats share one lexer: `#` starts a comment running to the
//! end of the line, numbers are integers or `p/q`, and `inf` is a keyword.
//! Binary operators associate to the left.

use std::fmt;

use thiserror::Error;

use crate::bes::{Bes, BesEquation, BoolExpr};
use crate::expr::{eliminate_negation, Expr, ExprError, Var};
use crate::extreal::{parse_rational, ExtReal, PosRational, Rational};
use crate::modal::{Distribution, Formula, ModalError, Plts, Transition};
use crate::res::{Equation, FixOp, Res};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Num(s) => write!(f, "`{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const SYMBOLS: [&str; 21] = [
    "\\/", "/\\", "->", "||", "&&", "+", "-", "*", "(", ")", ",", ";", "=", ".", "<", ">", "[", "]", ":", "|", "&",
];

/// Identifier characters beyond `[A-Za-z0-9_]`.
#[derive(Clone, Copy)]
enum IdentStyle {
    Plain,
    /// Also allows `.`, as in generated state variables `X.s1`.
    Dotted,
}

fn lex(src: &str, style: IdentStyle) -> Result<Vec<(Tok, usize, usize)>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let ident_char = |ch: char, first: bool| {
            ch.is_ascii_alphabetic() || ch == '_' || (!first && (ch.is_ascii_digit() || (ch == '.' && matches!(style, IdentStyle::Dotted))))
        };
        if ident_char(c, true) {
            let mut j = i;
            while j < chars.len() && ident_char(chars[j], j == i) {
                j += 1;
            }
            // A trailing dot belongs to the punctuation, not the name.
            while chars[j - 1] == '.' {
                j -= 1;
            }
            let word: String = chars[i..j].iter().collect();
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            out.push((Tok::Ident(word), start_line, start_col));
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j + 1 < chars.len() && chars[j] == '/' && chars[j + 1].is_ascii_digit() {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            let word: String = chars[i..j].iter().collect();
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            out.push((Tok::Num(word), start_line, start_col));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                advance(&mut i, &mut line, &mut col, s.chars().count());
                out.push((Tok::Sym(s), start_line, start_col));
            }
            None => {
                return Err(SyntaxError {
                    line,
                    column: col,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push((Tok::Eof, line, col));
    Ok(out)
}

const RES_KEYWORDS: [&str; 8] = ["res", "mu", "nu", "inf", "cond", "conda", "eqinf", "eqninf"];
const FORM_KEYWORDS: [&str; 4] = ["form", "mu", "nu", "inf"];
const PLTS_KEYWORDS: [&str; 3] = ["plts", "init", "trans"];
const BES_KEYWORDS: [&str; 5] = ["bes", "mu", "nu", "true", "false"];

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    keywords: &'static [&'static str],
}

impl Parser {
    fn new(src: &str, style: IdentStyle, keywords: &'static [&'static str]) -> Result<Self, SyntaxError> {
        Ok(Parser {
            toks: lex(src, style)?,
            pos: 0,
            keywords,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        let (_, line, column) = self.toks[self.pos];
        SyntaxError {
            line,
            column,
            message: message.into(),
        }
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, SyntaxError> {
        Err(self.error(format!("expected {wanted}, found {}", self.peek())))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let found = self.is_sym(s);
        if found {
            self.bump();
        }
        found
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SyntaxError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.unexpected(&format!("`{s}`"))
        }
    }

    fn expect_keyword(&mut self, k: &str) -> Result<(), SyntaxError> {
        if self.is_keyword(k) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{k}`"))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek() {
            Tok::Ident(s) if !self.keywords.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.unexpected(what),
        }
    }

    fn expect_eof(&mut self) -> Result<(), SyntaxError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => self.unexpected("end of input"),
        }
    }

    fn fix_op(&mut self) -> Result<FixOp, SyntaxError> {
        if self.is_keyword("mu") {
            self.bump();
            Ok(FixOp::Mu)
        } else if self.is_keyword("nu") {
            self.bump();
            Ok(FixOp::Nu)
        } else {
            self.unexpected("`mu` or `nu`")
        }
    }

    fn rational(&mut self) -> Result<Rational, SyntaxError> {
        match self.peek().clone() {
            Tok::Num(s) => {
                let r = parse_rational(&s).map_err(|e| self.error(e.to_string()))?;
                self.bump();
                Ok(r)
            }
            _ => self.unexpected("a number"),
        }
    }

    /// A possibly negated literal: number or `inf`.
    fn literal(&mut self) -> Result<Option<ExtReal>, SyntaxError> {
        let negative = self.is_sym("-") && matches!(self.peek_at(1), Tok::Num(_)) || self.is_sym("-") && matches!(self.peek_at(1), Tok::Ident(s) if s == "inf");
        if negative {
            self.bump();
        }
        let value = match self.peek() {
            Tok::Num(_) => ExtReal::Finite(self.rational()?),
            Tok::Ident(s) if s == "inf" => {
                self.bump();
                ExtReal::PosInf
            }
            _ => return Ok(None),
        };
        Ok(Some(if negative { value.negate() } else { value }))
    }

    /// `c *` prefix of a scaling, if present.
    fn scale_prefix(&mut self) -> Result<Option<PosRational>, SyntaxError> {
        if matches!(self.peek(), Tok::Num(_)) && matches!(self.peek_at(1), Tok::Sym("*")) {
            let r = self.rational()?;
            self.bump();
            let c = PosRational::new(r).map_err(|e| self.error(e.to_string()))?;
            return Ok(Some(c));
        }
        if self.is_sym("-") && matches!(self.peek_at(1), Tok::Num(_)) && matches!(self.peek_at(2), Tok::Sym("*")) {
            return Err(self.error("scaling factors must be positive"));
        }
        Ok(None)
    }
}

// ---------------------------------------------------------------------
// Expressions and RES files

fn parse_expr(p: &mut Parser) -> Result<Expr, SyntaxError> {
    let mut e = parse_meet(p)?;
    while p.eat_sym("\\/") {
        e = Expr::max(e, parse_meet(p)?);
    }
    Ok(e)
}

fn parse_meet(p: &mut Parser) -> Result<Expr, SyntaxError> {
    let mut e = parse_sum(p)?;
    while p.eat_sym("/\\") {
        e = Expr::min(e, parse_sum(p)?);
    }
    Ok(e)
}

fn parse_sum(p: &mut Parser) -> Result<Expr, SyntaxError> {
    let mut e = parse_scaled(p)?;
    loop {
        if p.eat_sym("+") {
            e = Expr::add(e, parse_scaled(p)?);
        } else if p.eat_sym("-") {
            // `a - b` is `a + -b`.
            let rhs = match parse_scaled(p)? {
                Expr::Const(d) => Expr::Const(d.negate()),
                other => Expr::neg(other),
            };
            e = Expr::add(e, rhs);
        } else {
            return Ok(e);
        }
    }
}

fn parse_scaled(p: &mut Parser) -> Result<Expr, SyntaxError> {
    match p.scale_prefix()? {
        Some(c) => Ok(Expr::scale(c, parse_scaled(p)?)),
        None => parse_unary(p),
    }
}

fn parse_unary(p: &mut Parser) -> Result<Expr, SyntaxError> {
    if let Some(d) = p.literal()? {
        return Ok(Expr::Const(d));
    }
    if p.eat_sym("-") {
        return Ok(Expr::neg(parse_unary(p)?));
    }
    parse_atom(p)
}

fn parse_atom(p: &mut Parser) -> Result<Expr, SyntaxError> {
    if p.eat_sym("(") {
        let e = parse_expr(p)?;
        p.expect_sym(")")?;
        return Ok(e);
    }
    let Tok::Ident(word) = p.peek().clone() else {
        return p.unexpected("an expression");
    };
    let args = |p: &mut Parser, n: usize| -> Result<Vec<Expr>, SyntaxError> {
        p.bump();
        p.expect_sym("(")?;
        let mut out = vec![parse_expr(p)?];
        while out.len() < n {
            p.expect_sym(",")?;
            out.push(parse_expr(p)?);
        }
        p.expect_sym(")")?;
        Ok(out)
    };
    match word.as_str() {
        "cond" | "conda" => {
            let mut a = args(p, 3)?.into_iter();
            let (g, x, y) = (a.next().unwrap(), a.next().unwrap(), a.next().unwrap());
            Ok(if word == "cond" { Expr::cond(g, x, y) } else { Expr::conda(g, x, y) })
        }
        "eqinf" => Ok(Expr::eq_inf(args(p, 1)?.remove(0))),
        "eqninf" => Ok(Expr::eq_neg_inf(args(p, 1)?.remove(0))),
        _ => Ok(Expr::Var(Var::new(p.expect_ident("an expression")?))),
    }
}

/// Parses a single expression. Negations are kept.
pub fn parse_expr_str(src: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser::new(src, IdentStyle::Dotted, &RES_KEYWORDS)?;
    let e = parse_expr(&mut p)?;
    p.expect_eof()?;
    Ok(e)
}

/// Parses a RES file. Negations are eliminated; a variable under an odd
/// number of negations is rejected, as are repeated binders.
pub fn parse_res(src: &str) -> Result<Res, SyntaxError> {
    let mut p = Parser::new(src, IdentStyle::Dotted, &RES_KEYWORDS)?;
    p.expect_keyword("res")?;
    let mut equations = Vec::new();
    while !matches!(p.peek(), Tok::Eof) {
        let op = p.fix_op()?;
        let lhs = p.expect_ident("a variable")?;
        p.expect_sym("=")?;
        let start = p.pos;
        let raw = parse_expr(&mut p)?;
        let rhs = eliminate_negation(&raw).map_err(|e| {
            let mut err = p.error("");
            (err.line, err.column) = (p.toks[start].1, p.toks[start].2);
            err.message = match e {
                ExprError::OddNegation(x) => format!("`{x}` occurs under an odd number of negations"),
                other => other.to_string(),
            };
            err
        })?;
        p.expect_sym(";")?;
        equations.push(Equation::new(op, lhs, rhs));
    }
    Res::new(equations).map_err(|e| SyntaxError {
        line: 1,
        column: 1,
        message: e.to_string(),
    })
}

const JOIN: u8 = 1;
const MEET: u8 = 2;
const SUM: u8 = 3;
const SCALE: u8 = 4;
const UNARY: u8 = 5;
const ATOM: u8 = 6;

fn expr_level(e: &Expr) -> u8 {
    match e {
        Expr::Max(..) => JOIN,
        Expr::Min(..) => MEET,
        Expr::Add(..) => SUM,
        Expr::Scale(..) => SCALE,
        Expr::Neg(..) => UNARY,
        Expr::Const(d) if d.signum().is_lt() => UNARY,
        _ => ATOM,
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, min_level: u8) -> fmt::Result {
    if expr_level(e) < min_level {
        f.write_str("(")?;
        write_expr(f, e, 0)?;
        return f.write_str(")");
    }
    let binary = |f: &mut fmt::Formatter<'_>, a: &Expr, op: &str, b: &Expr, level: u8| {
        write_expr(f, a, level)?;
        write!(f, " {op} ")?;
        write_expr(f, b, level + 1)
    };
    match e {
        Expr::Var(x) => write!(f, "{x}"),
        Expr::Const(d) => write!(f, "{d}"),
        Expr::Scale(c, a) => {
            write!(f, "{c} * ")?;
            write_expr(f, a, SCALE)
        }
        Expr::Add(a, b) => binary(f, a, "+", b, SUM),
        Expr::Min(a, b) => binary(f, a, "/\\", b, MEET),
        Expr::Max(a, b) => binary(f, a, "\\/", b, JOIN),
        Expr::Neg(a) => {
            f.write_str("-")?;
            // `-3` would read back as a constant.
            let level = if matches!(a.as_ref(), Expr::Const(_)) { ATOM + 1 } else { UNARY };
            write_expr(f, a, level)
        }
        Expr::Cond(g, a, b) | Expr::CondA(g, a, b) => {
            let name = if matches!(e, Expr::Cond(..)) { "cond" } else { "conda" };
            write!(f, "{name}(")?;
            write_expr(f, g, 0)?;
            f.write_str(", ")?;
            write_expr(f, a, 0)?;
            f.write_str(", ")?;
            write_expr(f, b, 0)?;
            f.write_str(")")
        }
        Expr::EqInf(a) => {
            f.write_str("eqinf(")?;
            write_expr(f, a, 0)?;
            f.write_str(")")
        }
        Expr::EqNegInf(a) => {
            f.write_str("eqninf(")?;
            write_expr(f, a, 0)?;
            f.write_str(")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} = {};", self.op, self.lhs, self.rhs)
    }
}

impl fmt::Display for Res {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "res")?;
        for eq in self.equations() {
            writeln!(f, "{eq}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------
// Formulas

fn parse_formula(p: &mut Parser) -> Result<Formula, SyntaxError> {
    let mut e = parse_formula_meet(p)?;
    while p.eat_sym("\\/") {
        e = Formula::or(e, parse_formula_meet(p)?);
    }
    Ok(e)
}

fn parse_formula_meet(p: &mut Parser) -> Result<Formula, SyntaxError> {
    let mut e = parse_formula_sum(p)?;
    while p.eat_sym("/\\") {
        e = Formula::and(e, parse_formula_sum(p)?);
    }
    Ok(e)
}

fn parse_formula_sum(p: &mut Parser) -> Result<Formula, SyntaxError> {
    let mut e = parse_formula_scaled(p)?;
    loop {
        if p.eat_sym("+") {
            e = Formula::add(e, parse_formula_scaled(p)?);
        } else if p.is_sym("-") {
            // Only constants can be subtracted: `φ - d` is `φ + (-d)`.
            match p.literal()? {
                Some(d) => e = Formula::add(e, Formula::Const(d)),
                None => return Err(p.error("only a constant can be subtracted from a formula")),
            }
        } else {
            return Ok(e);
        }
    }
}

fn parse_formula_scaled(p: &mut Parser) -> Result<Formula, SyntaxError> {
    match p.scale_prefix()? {
        Some(c) => Ok(Formula::scale(c, parse_formula_scaled(p)?)),
        None => parse_formula_unary(p),
    }
}

fn parse_formula_unary(p: &mut Parser) -> Result<Formula, SyntaxError> {
    if let Some(d) = p.literal()? {
        return Ok(Formula::Const(d));
    }
    if p.eat_sym("<") {
        let a = p.expect_ident("an action")?;
        p.expect_sym(">")?;
        return Ok(Formula::diamond(a, parse_formula_unary(p)?));
    }
    if p.eat_sym("[") {
        let a = p.expect_ident("an action")?;
        p.expect_sym("]")?;
        return Ok(Formula::boxed(a, parse_formula_unary(p)?));
    }
    if p.is_keyword("mu") || p.is_keyword("nu") {
        // The binder extends as far to the right as possible.
        let op = p.fix_op()?;
        let x = p.expect_ident("a variable")?;
        p.expect_sym(".")?;
        let body = parse_formula(p)?;
        return Ok(match op {
            FixOp::Mu => Formula::mu(x, body),
            FixOp::Nu => Formula::nu(x, body),
        });
    }
    if p.eat_sym("(") {
        let e = parse_formula(p)?;
        p.expect_sym(")")?;
        return Ok(e);
    }
    Ok(Formula::Var(Var::new(p.expect_ident("a formula")?)))
}

pub fn parse_formula_str(src: &str) -> Result<Formula, SyntaxError> {
    let mut p = Parser::new(src, IdentStyle::Plain, &FORM_KEYWORDS)?;
    let e = parse_formula(&mut p)?;
    p.expect_eof()?;
    Ok(e)
}

/// Parses a formula file: the header `form` followed by one formula.
pub fn parse_formula_file(src: &str) -> Result<Formula, SyntaxError> {
    let mut p = Parser::new(src, IdentStyle::Plain, &FORM_KEYWORDS)?;
    p.expect_keyword("form")?;
    let e = parse_formula(&mut p)?;
    p.eat_sym(";");
    p.expect_eof()?;
    Ok(e)
}

fn formula_level(e: &Formula) -> u8 {
    match e {
        Formula::Or(..) => JOIN,
        Formula::And(..) => MEET,
        Formula::Add(..) => SUM,
        Formula::Scale(..) => SCALE,
        Formula::Const(d) if d.signum().is_lt() => UNARY,
        Formula::Diamond(..) | Formula::Box(..) => UNARY,
        // Binders swallow everything to their right, so they only stand
        // unparenthesized where nothing can follow.
        Formula::Mu(..) | Formula::Nu(..) => 0,
        _ => ATOM,
    }
}

fn write_formula(f: &mut fmt::Formatter<'_>, e: &Formula, min_level: u8) -> fmt::Result {
    if formula_level(e) < min_level {
        f.write_str("(")?;
        write_formula(f, e, 0)?;
        return f.write_str(")");
    }
    let binary = |f: &mut fmt::Formatter<'_>, a: &Formula, op: &str, b: &Formula, level: u8| {
        write_formula(f, a, level)?;
        write!(f, " {op} ")?;
        write_formula(f, b, level + 1)
    };
    match e {
        Formula::Var(x) => write!(f, "{x}"),
        Formula::Const(d) => write!(f, "{d}"),
        Formula::Scale(c, a) => {
            write!(f, "{c} * ")?;
            write_formula(f, a, SCALE)
        }
        Formula::Add(a, b) => binary(f, a, "+", b, SUM),
        Formula::And(a, b) => binary(f, a, "/\\", b, MEET),
        Formula::Or(a, b) => binary(f, a, "\\/", b, JOIN),
        Formula::Diamond(act, a) => {
            write!(f, "<{act}> ")?;
            write_formula(f, a, UNARY)
        }
        Formula::Box(act, a) => {
            write!(f, "[{act}] ")?;
            write_formula(f, a, UNARY)
        }
        Formula::Mu(x, a) | Formula::Nu(x, a) => {
            let op = if matches!(e, Formula::Mu(..)) { "mu" } else { "nu" };
            write!(f, "{op} {x} . ")?;
            write_formula(f, a, 0)
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self, 0)
    }
}

/// Renders a formula file.
pub fn print_formula_file(phi: &Formula) -> String {
    format!("form\n{phi}\n")
}

// ---------------------------------------------------------------------
// Probabilistic transition systems

fn parse_distribution(p: &mut Parser) -> Result<Distribution, SyntaxError> {
    let mut entries = Vec::new();
    loop {
        let state = p.expect_ident("a state")?;
        p.expect_sym(":")?;
        let prob = p.rational()?;
        entries.push((state, prob));
        if !p.eat_sym(",") {
            break;
        }
    }
    Distribution::new(entries).map_err(|e: ModalError| p.error(e.to_string()))
}

pub fn parse_plts(src: &str) -> Result<Plts, SyntaxError> {
    let mut p = Parser::new(src, IdentStyle::Plain, &PLTS_KEYWORDS)?;
    p.expect_keyword("plts")?;
    let mut initial = None;
    let mut transitions = Vec::new();
    while !matches!(p.peek(), Tok::Eof) {
        if p.is_keyword("init") {
            if initial.is_some() {
                return Err(p.error("more than one `init` line"));
            }
            p.bump();
            initial = Some(parse_distribution(&mut p)?);
        } else if p.is_keyword("trans") {
            p.bump();
            let source = p.expect_ident("a state")?;
            let action = p.expect_ident("an action")?;
            p.expect_sym("->")?;
            transitions.push(Transition::new(source, action, parse_distribution(&mut p)?));
        } else {
            return p.unexpected("`init` or `trans`");
        }
        p.expect_sym(";")?;
    }
    let initial = initial.ok_or_else(|| p.error("missing `init` line"))?;
    Ok(Plts::new(initial, transitions))
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (s, prob)) in self.entries().iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{s}:{}", ExtReal::Finite(prob.clone()))?;
        }
        Ok(())
    }
}

impl fmt::Display for Plts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "plts")?;
        writeln!(f, "init {};", self.initial())?;
        for t in self.transitions() {
            writeln!(f, "trans {} {} -> {};", t.source, t.action, t.target)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------
// Boolean equation systems

fn parse_bool(p: &mut Parser) -> Result<BoolExpr, SyntaxError> {
    let mut e = parse_bool_and(p)?;
    while p.eat_sym("||") {
        e = BoolExpr::or(e, parse_bool_and(p)?);
    }
    Ok(e)
}

fn parse_bool_and(p: &mut Parser) -> Result<BoolExpr, SyntaxError> {
    let mut e = parse_bool_atom(p)?;
    while p.eat_sym("&&") {
        e = BoolExpr::and(e, parse_bool_atom(p)?);
    }
    Ok(e)
}

fn parse_bool_atom(p: &mut Parser) -> Result<BoolExpr, SyntaxError> {
    if p.eat_sym("(") {
        let e = parse_bool(p)?;
        p.expect_sym(")")?;
        return Ok(e);
    }
    for (word, value) in [("true", true), ("false", false)] {
        if p.is_keyword(word) {
            p.bump();
            return Ok(BoolExpr::Const(value));
        }
    }
    Ok(BoolExpr::var(p.expect_ident("a boolean expression")?))
}

pub fn parse_bes(src: &str) -> Result<Bes, SyntaxError> {
    let mut p = Parser::new(src, IdentStyle::Dotted, &BES_KEYWORDS)?;
    p.expect_keyword("bes")?;
    let mut equations = Vec::new();
    while !matches!(p.peek(), Tok::Eof) {
        let op = p.fix_op()?;
        let lhs = p.expect_ident("a variable")?;
        p.expect_sym("=")?;
        let rhs = parse_bool(&mut p)?;
        p.expect_sym(";")?;
        equations.push(BesEquation::new(op, lhs, rhs));
    }
    Bes::new(equations).map_err(|e| SyntaxError {
        line: 1,
        column: 1,
        message: e.to_string(),
    })
}

fn write_bool(f: &mut fmt::Formatter<'_>, e: &BoolExpr, min_level: u8) -> fmt::Result {
    let level = match e {
        BoolExpr::Or(..) => 1,
        BoolExpr::And(..) => 2,
        _ => 3,
    };
    if level < min_level {
        f.write_str("(")?;
        write_bool(f, e, 0)?;
        return f.write_str(")");
    }
    match e {
        BoolExpr::Var(x) => write!(f, "{x}"),
        BoolExpr::Const(b) => write!(f, "{b}"),
        BoolExpr::Or(a, b) => {
            write_bool(f, a, 1)?;
            f.write_str(" || ")?;
            write_bool(f, b, 2)
        }
        BoolExpr::And(a, b) => {
            write_bool(f, a, 2)?;
            f.write_str(" && ")?;
            write_bool(f, b, 3)
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bool(f, self, 0)
    }
}

impl fmt::Display for Bes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "bes")?;
        for eq in self.equations() {
            writeln!(f, "{} {} = {};", eq.op, eq.lhs, eq.rhs)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::examples;
    use crate::testing::{arb_expr, ExprShape};
    use proptest::prelude::*;

    #[test]
    fn res_file() {
        let src = "# intro\nres\nmu X = 1/2 * X + 1 \\/ 1/5 * Y + 3;\nnu Y = (1/10 * Y - 10 \\/ 2 * X + 5) /\\ 17;\n";
        let r = parse_res(src).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.equations()[1].op, FixOp::Nu);
        assert_eq!(parse_res(&r.to_string()).unwrap(), r);
        let y = &r.equations()[1].rhs;
        assert!(y.to_string().contains("-10"), "{y}");
    }

    #[test]
    fn even_negations_are_eliminated() {
        let r = parse_res("res mu X = -(-X) + 1;").unwrap();
        assert!(!r.equations()[0].rhs.contains_negation());
        let err = parse_res("res mu X = 0 - X;").unwrap_err();
        assert!(err.message.contains("odd"), "{err}");
    }

    #[test]
    fn literals_and_keywords() {
        assert_eq!(parse_expr_str("-inf").unwrap(), Expr::neg_inf());
        assert_eq!(parse_expr_str("inf").unwrap(), Expr::pos_inf());
        assert_eq!(parse_expr_str("-3/4").unwrap(), Expr::constant(ExtReal::ratio(-3, 4)));
        assert_eq!(
            parse_expr_str("eqninf(X.s1)").unwrap(),
            Expr::eq_neg_inf(Expr::var("X.s1"))
        );
        assert!(parse_expr_str("0 * X").is_err());
        assert!(parse_expr_str("-2 * X").is_err());
        assert!(parse_res("res mu X = X; mu X = 1;").is_err());
        let err = parse_res("res\nmu X = X $ 1;").unwrap_err();
        assert_eq!((err.line, err.column), (2, 10));
    }

    #[test]
    fn printing_respects_precedence() {
        let e = Expr::add(Expr::var("X"), Expr::add(Expr::var("Y"), Expr::constant(1)));
        assert_eq!(e.to_string(), "X + (Y + 1)");
        let e = Expr::min(Expr::max(Expr::var("X"), Expr::var("Y")), Expr::constant(2));
        assert_eq!(e.to_string(), "(X \\/ Y) /\\ 2");
        let e = Expr::neg(Expr::constant(3));
        assert_eq!(parse_expr_str(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn formulas_round_trip() {
        for phi in [
            examples::a_sequence_formula(),
            examples::loop_probability_formula(),
            examples::reward_formula(),
        ] {
            let text = print_formula_file(&phi);
            assert_eq!(parse_formula_file(&text).unwrap(), phi, "{text}");
        }
        let phi = parse_formula_str("mu R . <a> (R - 1) \\/ 0").unwrap();
        assert_eq!(
            phi,
            Formula::mu(
                "R",
                Formula::or(
                    Formula::diamond("a", Formula::add(Formula::var("R"), Formula::constant(-1))),
                    Formula::constant(0)
                )
            )
        );
        let phi = parse_formula_str("1 + mu X . X \\/ 2").unwrap();
        assert_eq!(
            phi,
            Formula::add(Formula::constant(1), Formula::mu("X", Formula::or(Formula::var("X"), Formula::constant(2))))
        );
        assert!(parse_formula_str("X - Y").is_err());
    }

    #[test]
    fn models_round_trip() {
        for m in [
            examples::a_sequence_model(),
            examples::loop_probability_model(),
            examples::reward_model(),
        ] {
            assert_eq!(parse_plts(&m.to_string()).unwrap(), m);
        }
        let m = parse_plts("plts init s1:1/3, s2:2/3; trans s1 a -> s2:1;").unwrap();
        assert_eq!(m.states(), ["s1".to_string(), "s2".to_string()]);
        assert!(parse_plts("plts init s1:1/3;").is_err());
        assert!(parse_plts("plts trans s1 a -> s1:1;").is_err());
        assert!(parse_plts("plts init s1:0, s2:1;").is_err());
    }

    #[test]
    fn bes_round_trip() {
        let b = parse_bes("bes\nmu X = X || Y && false;\nnu Y = (X || true) && Y;").unwrap();
        assert_eq!(
            b.equations()[0].rhs,
            BoolExpr::or(BoolExpr::var("X"), BoolExpr::and(BoolExpr::var("Y"), BoolExpr::Const(false)))
        );
        assert_eq!(parse_bes(&b.to_string()).unwrap(), b);
    }

    proptest! {
        #[test]
        fn expressions_round_trip(e in arb_expr(ExprShape::with_conditionals())) {
            prop_assert_eq!(parse_expr_str(&e.to_string()).unwrap(), e);
        }
    }
}
