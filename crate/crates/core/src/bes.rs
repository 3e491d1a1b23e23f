//! Boolean equation systems: their two embeddings into real equation
//! systems and a direct boolean Gauss elimination used for differential
//! testing.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::expr::{Expr, Var};
use crate::extreal::ExtReal;
use crate::res::{Equation, FixOp, Res};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BesError {
    #[error("the constant for true ({ct}) must exceed the constant for false ({cf})")]
    BadConstants { ct: ExtReal, cf: ExtReal },
    #[error("system is not closed: `{0}` occurs free")]
    NotClosed(Var),
    #[error("variable `{0}` is bound by more than one equation")]
    DuplicateBinder(Var),
}

/// Boolean expression over `X | true | false | ∨ | ∧`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoolExpr {
    Var(Var),
    Const(bool),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn var(name: impl AsRef<str>) -> BoolExpr {
        BoolExpr::Var(Var::new(name))
    }

    pub fn or(a: BoolExpr, b: BoolExpr) -> BoolExpr {
        BoolExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: BoolExpr, b: BoolExpr) -> BoolExpr {
        BoolExpr::And(Box::new(a), Box::new(b))
    }

    pub fn occ(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            BoolExpr::Var(v) => {
                out.insert(v.clone());
            }
            BoolExpr::Const(_) => {}
            BoolExpr::Or(a, b) | BoolExpr::And(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn substitute(&self, x: &Var, f: &BoolExpr) -> BoolExpr {
        match self {
            BoolExpr::Var(v) if v == x => f.clone(),
            BoolExpr::Var(_) | BoolExpr::Const(_) => self.clone(),
            BoolExpr::Or(a, b) => BoolExpr::or(a.substitute(x, f), b.substitute(x, f)),
            BoolExpr::And(a, b) => BoolExpr::and(a.substitute(x, f), b.substitute(x, f)),
        }
    }

    pub fn evaluate(&self, env: &BTreeMap<Var, bool>) -> bool {
        match self {
            BoolExpr::Var(v) => env.get(v).copied().unwrap_or(false),
            BoolExpr::Const(b) => *b,
            BoolExpr::Or(a, b) => a.evaluate(env) || b.evaluate(env),
            BoolExpr::And(a, b) => a.evaluate(env) && b.evaluate(env),
        }
    }

    /// Constant folding, flattening, duplicate removal and absorption
    /// (`a ∨ (a ∧ b) = a`, `a ∧ (a ∨ b) = a`).
    pub fn simplify(&self) -> BoolExpr {
        match self {
            BoolExpr::Var(_) | BoolExpr::Const(_) => self.clone(),
            BoolExpr::Or(..) => lattice(self, true),
            BoolExpr::And(..) => lattice(self, false),
        }
    }
}

fn operands(e: &BoolExpr, is_or: bool, out: &mut Vec<BoolExpr>) {
    match (e, is_or) {
        (BoolExpr::Or(a, b), true) | (BoolExpr::And(a, b), false) => {
            operands(a, is_or, out);
            operands(b, is_or, out);
        }
        _ => out.push(e.simplify()),
    }
}

fn lattice(e: &BoolExpr, is_or: bool) -> BoolExpr {
    let mut raw = Vec::new();
    operands(e, is_or, &mut raw);
    let mut terms = BTreeSet::new();
    for t in raw {
        match t {
            BoolExpr::Const(b) if b == is_or => return BoolExpr::Const(is_or),
            BoolExpr::Const(_) => {}
            // Re-flatten operands that simplified into the same operator.
            other => {
                let mut inner = Vec::new();
                operands(&other, is_or, &mut inner);
                terms.extend(inner);
            }
        }
    }
    // Absorption: drop a compound operand of the dual operator that
    // contains another operand directly.
    let snapshot: Vec<BoolExpr> = terms.iter().cloned().collect();
    terms.retain(|t| {
        let mut parts = Vec::new();
        match (t, is_or) {
            (BoolExpr::And(..), true) => operands(t, false, &mut parts),
            (BoolExpr::Or(..), false) => operands(t, true, &mut parts),
            _ => return true,
        }
        !snapshot.iter().any(|s| s != t && parts.contains(s))
    });
    let mut iter = terms.into_iter().rev();
    match iter.next() {
        None => BoolExpr::Const(!is_or),
        Some(last) => iter.fold(last, |acc, t| if is_or { BoolExpr::or(t, acc) } else { BoolExpr::and(t, acc) }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BesEquation {
    pub op: FixOp,
    pub lhs: Var,
    pub rhs: BoolExpr,
}

impl BesEquation {
    pub fn new(op: FixOp, lhs: impl Into<Var>, rhs: BoolExpr) -> Self {
        BesEquation {
            op,
            lhs: lhs.into(),
            rhs,
        }
    }
}

/// An ordered boolean equation system with distinct left-hand sides.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Bes {
    equations: Vec<BesEquation>,
}

impl Bes {
    pub fn new(equations: Vec<BesEquation>) -> Result<Self, BesError> {
        let mut seen = BTreeSet::new();
        for eq in &equations {
            if !seen.insert(eq.lhs.clone()) {
                return Err(BesError::DuplicateBinder(eq.lhs.clone()));
            }
        }
        Ok(Bes { equations })
    }

    pub fn equations(&self) -> &[BesEquation] {
        &self.equations
    }

    pub fn first_free_variable(&self) -> Option<Var> {
        let bound: BTreeSet<Var> = self.equations.iter().map(|eq| eq.lhs.clone()).collect();
        self.equations
            .iter()
            .flat_map(|eq| eq.rhs.occ())
            .find(|v| !bound.contains(v))
    }
}

fn to_expr(e: &BoolExpr) -> Expr {
    match e {
        BoolExpr::Var(v) => Expr::Var(v.clone()),
        BoolExpr::Const(true) => Expr::pos_inf(),
        BoolExpr::Const(false) => Expr::neg_inf(),
        BoolExpr::Or(a, b) => Expr::max(to_expr(a), to_expr(b)),
        BoolExpr::And(a, b) => Expr::min(to_expr(a), to_expr(b)),
    }
}

fn embed(b: &Bes, wrap: impl Fn(Expr) -> Expr) -> Res {
    let equations = b
        .equations
        .iter()
        .map(|eq| Equation::new(eq.op, eq.lhs.clone(), wrap(to_expr(&eq.rhs))))
        .collect();
    Res::new(equations).expect("left-hand sides are distinct")
}

/// `true ↦ ∞`, `false ↦ -∞`, `∨ ↦ max`, `∧ ↦ min`.
pub fn embed_literal(b: &Bes) -> Res {
    embed(b, |e| e)
}

/// Every right-hand side `e` becomes `cf ∨ (ct ∧ e)`.
pub fn embed_const(b: &Bes, ct: &ExtReal, cf: &ExtReal) -> Result<Res, BesError> {
    if ct <= cf {
        return Err(BesError::BadConstants {
            ct: ct.clone(),
            cf: cf.clone(),
        });
    }
    Ok(embed(b, |e| {
        Expr::max(Expr::Const(cf.clone()), Expr::min(Expr::Const(ct.clone()), e))
    }))
}

/// Classical Gauss elimination over the booleans: a `μ` variable is
/// replaced by `false` in its own right-hand side, a `ν` variable by
/// `true`; the result is substituted into all earlier equations and the
/// closed values are then propagated forwards.
pub fn solve_bes_direct(b: &Bes) -> Result<BTreeMap<Var, bool>, BesError> {
    if let Some(v) = b.first_free_variable() {
        return Err(BesError::NotClosed(v));
    }
    let mut rhs: Vec<BoolExpr> = b.equations.iter().map(|eq| eq.rhs.simplify()).collect();
    for k in (0..rhs.len()).rev() {
        let eq = &b.equations[k];
        let own = BoolExpr::Const(eq.op == FixOp::Nu);
        rhs[k] = rhs[k].substitute(&eq.lhs, &own).simplify();
        for i in 0..k {
            if rhs[i].occ().contains(&eq.lhs) {
                rhs[i] = rhs[i].substitute(&eq.lhs, &rhs[k]).simplify();
            }
        }
    }
    let mut env = BTreeMap::new();
    for (eq, e) in b.equations.iter().zip(&rhs) {
        let value = e.evaluate(&env);
        env.insert(eq.lhs.clone(), value);
    }
    Ok(env)
}

/// Maps a boolean verdict to its value under an embedding.
pub fn boolean_value(b: bool, ct: &ExtReal, cf: &ExtReal) -> ExtReal {
    if b {
        ct.clone()
    } else {
        cf.clone()
    }
}
