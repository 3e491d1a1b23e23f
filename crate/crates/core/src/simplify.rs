//! Value-preserving expression cleanup.
//!
//! Every node is rebuilt bottom-up through a smart constructor that folds
//! constants, flattens and canonically orders joins, meets and sums, removes
//! identities, and resolves conditionals with constant guards. The
//! constructors map canonical inputs to canonical outputs, which makes
//! [`simplify`] idempotent.

use std::collections::BTreeSet;

use crate::expr::Expr;
use crate::extreal::{ExtReal, PosRational};
use crate::normal_form::CondKind;

pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Var(_) | Expr::Const(_) => e.clone(),
        Expr::Scale(c, a) => scale(c, simplify(a)),
        Expr::Add(a, b) => sum(vec![simplify(a), simplify(b)]),
        Expr::Min(a, b) => meet(vec![simplify(a), simplify(b)]),
        Expr::Max(a, b) => join(vec![simplify(a), simplify(b)]),
        Expr::Cond(g, a, b) => conditional(CondKind::Cond, simplify(g), simplify(a), simplify(b)),
        Expr::CondA(g, a, b) => conditional(CondKind::CondA, simplify(g), simplify(a), simplify(b)),
        Expr::EqInf(a) => eq_inf(simplify(a)),
        Expr::EqNegInf(a) => eq_neg_inf(simplify(a)),
        Expr::Neg(a) => match simplify(a) {
            Expr::Const(d) => Expr::Const(d.negate()),
            Expr::Neg(inner) => (*inner).clone(),
            other => Expr::neg(other),
        },
    }
}

pub(crate) fn scale(c: &PosRational, a: Expr) -> Expr {
    if c.is_one() {
        return a;
    }
    match a {
        Expr::Const(d) => Expr::Const(d.scale(c)),
        Expr::Scale(k, inner) => {
            let merged = c.mul(&k);
            if merged.is_one() {
                (*inner).clone()
            } else {
                Expr::Scale(merged, inner)
            }
        }
        other => Expr::scale(c.clone(), other),
    }
}

pub(crate) fn sum(items: Vec<Expr>) -> Expr {
    let mut terms = Vec::new();
    let mut constant = ExtReal::zero();
    let mut stack = items;
    while let Some(item) = stack.pop() {
        match item {
            Expr::Add(a, b) => {
                stack.push((*a).clone());
                stack.push((*b).clone());
            }
            Expr::Const(d) => constant = constant.add(&d),
            other => terms.push(other),
        }
    }
    if constant.is_pos_inf() {
        return Expr::pos_inf();
    }
    terms.sort();
    if terms.is_empty() || constant != ExtReal::zero() {
        terms.push(Expr::Const(constant));
    }
    Expr::sum(terms)
}

pub(crate) fn join(items: Vec<Expr>) -> Expr {
    lattice(items, true)
}

pub(crate) fn meet(items: Vec<Expr>) -> Expr {
    lattice(items, false)
}

fn lattice(items: Vec<Expr>, is_join: bool) -> Expr {
    let (identity, absorber) = if is_join {
        (ExtReal::NegInf, ExtReal::PosInf)
    } else {
        (ExtReal::PosInf, ExtReal::NegInf)
    };
    let mut terms = BTreeSet::new();
    let mut constant: Option<ExtReal> = None;
    let mut stack = items;
    while let Some(item) = stack.pop() {
        match item {
            Expr::Max(a, b) if is_join => {
                stack.push((*a).clone());
                stack.push((*b).clone());
            }
            Expr::Min(a, b) if !is_join => {
                stack.push((*a).clone());
                stack.push((*b).clone());
            }
            Expr::Const(d) => {
                constant = Some(match constant {
                    None => d,
                    Some(c) if is_join => c.join(&d),
                    Some(c) => c.meet(&d),
                })
            }
            other => {
                terms.insert(other);
            }
        }
    }
    match constant {
        Some(c) if c == absorber => return Expr::Const(absorber),
        Some(c) if c != identity => {
            terms.insert(Expr::Const(c));
        }
        _ => {}
    }
    if is_join {
        Expr::join_all(terms)
    } else {
        Expr::meet_all(terms)
    }
}

pub(crate) fn conditional(kind: CondKind, g: Expr, a: Expr, b: Expr) -> Expr {
    if a == b {
        return a;
    }
    match (&g, kind) {
        (Expr::Const(d), CondKind::Cond) if d.signum().is_le() => meet(vec![a, b]),
        (Expr::Const(_), CondKind::Cond) => b,
        (Expr::Const(d), CondKind::CondA) if d.signum().is_lt() => a,
        (Expr::Const(_), CondKind::CondA) => join(vec![a, b]),
        _ => kind.build(g, a, b),
    }
}

pub(crate) fn eq_inf(a: Expr) -> Expr {
    match a {
        Expr::Const(d) => Expr::Const(d.eq_inf()),
        Expr::EqInf(_) | Expr::EqNegInf(_) => a,
        Expr::Scale(_, inner) => eq_inf((*inner).clone()),
        other => Expr::eq_inf(other),
    }
}

pub(crate) fn eq_neg_inf(a: Expr) -> Expr {
    match a {
        Expr::Const(d) => Expr::Const(d.eq_neg_inf()),
        Expr::EqInf(_) | Expr::EqNegInf(_) => a,
        Expr::Scale(_, inner) => eq_neg_inf((*inner).clone()),
        other => Expr::eq_neg_inf(other),
    }
}
