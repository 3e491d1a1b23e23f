//! Independent verification.
//!
//! [`residual_check`] confirms that a claimed solution satisfies every
//! equation exactly. [`extremal_fixed_point`] computes least and greatest
//! fixed points of a univariate function geometrically: the right-hand side
//! is turned into an explicit piecewise-linear function of `x`, every point
//! where it may cross the diagonal is enumerated, and each candidate is
//! checked by exact evaluation. Only the value domain and expression
//! evaluation are shared with the symbolic solver.

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{evaluate, occ, Expr, Valuation, Var};
use crate::extreal::{ExtReal, Rational};
use crate::parallel::{map_range, Execution};
use crate::res::{FixOp, Res, SolvedRes};
use crate::solver::{ClauseDecomposition, SolveError, Solver};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("solution has no value for `{0}`")]
    MissingVariable(Var),
}

/// One equation of a residual report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualRow {
    pub var: Var,
    pub lhs: ExtReal,
    pub rhs: ExtReal,
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Residual {
    pub rows: Vec<ResidualRow>,
}

impl Residual {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.equal)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ResidualRow> {
        self.rows.iter().filter(|r| !r.equal)
    }
}

/// Evaluates every right-hand side under the claimed solution and compares
/// it with the value of the left-hand side.
pub fn residual_check(system: &Res, solution: &SolvedRes) -> Result<Residual, OracleError> {
    let mut env = Valuation::default();
    for eq in system.equations() {
        let value = solution
            .get(&eq.lhs)
            .ok_or_else(|| OracleError::MissingVariable(eq.lhs.clone()))?;
        env.set(eq.lhs.clone(), value.clone());
    }
    for x in system.equations().iter().flat_map(|eq| occ(&eq.rhs)) {
        if solution.get(&x).is_none() {
            return Err(OracleError::MissingVariable(x));
        }
    }
    let rows = system
        .equations()
        .iter()
        .map(|eq| {
            let lhs = env.get(&eq.lhs).clone();
            let rhs = evaluate(&eq.rhs, &env).unwrap_or(ExtReal::NegInf);
            let equal = !eq.rhs.contains_negation() && lhs == rhs;
            ResidualRow {
                var: eq.lhs.clone(),
                lhs,
                rhs,
                equal,
            }
        })
        .collect();
    Ok(Residual { rows })
}

/// Shape of a function of `x` on an open interval of finite reals.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Line {
    /// `a·x + b` with `a > 0`.
    Affine { a: Rational, b: Rational },
    Flat(ExtReal),
}

impl Line {
    fn affine(a: Rational, b: Rational) -> Line {
        if a.is_zero() {
            Line::Flat(ExtReal::Finite(b))
        } else {
            Line::Affine { a, b }
        }
    }

    fn at(&self, x: &Rational) -> ExtReal {
        match self {
            Line::Affine { a, b } => ExtReal::Finite(a * x + b),
            Line::Flat(d) => d.clone(),
        }
    }

    /// Slope and intercept when the line is finite everywhere.
    fn finite_parts(&self) -> Option<(Rational, Rational)> {
        match self {
            Line::Affine { a, b } => Some((a.clone(), b.clone())),
            Line::Flat(ExtReal::Finite(d)) => Some((Rational::zero(), d.clone())),
            Line::Flat(_) => None,
        }
    }

    fn add(&self, other: &Line) -> Line {
        match (self, other) {
            (Line::Flat(p), Line::Flat(q)) => Line::Flat(p.add(q)),
            (Line::Flat(ExtReal::PosInf), _) | (_, Line::Flat(ExtReal::PosInf)) => Line::Flat(ExtReal::PosInf),
            (Line::Flat(ExtReal::NegInf), _) | (_, Line::Flat(ExtReal::NegInf)) => Line::Flat(ExtReal::NegInf),
            _ => {
                let (a1, b1) = self.finite_parts().expect("finite");
                let (a2, b2) = other.finite_parts().expect("finite");
                Line::affine(a1 + a2, b1 + b2)
            }
        }
    }

    fn scale(&self, c: &Rational) -> Line {
        match self {
            Line::Affine { a, b } => Line::affine(a * c, b * c),
            Line::Flat(ExtReal::Finite(d)) => Line::Flat(ExtReal::Finite(d * c)),
            Line::Flat(d) => Line::Flat(d.clone()),
        }
    }

    fn map_value(&self, f: impl Fn(&ExtReal) -> ExtReal) -> Line {
        match self {
            // Finite everywhere on the interval.
            Line::Affine { .. } => Line::Flat(f(&ExtReal::zero())),
            Line::Flat(d) => Line::Flat(f(d)),
        }
    }

    /// Where two lines meet, if they are finite and not parallel.
    fn crossing(&self, other: &Line) -> Option<Rational> {
        let (a1, b1) = self.finite_parts()?;
        let (a2, b2) = other.finite_parts()?;
        if a1 == a2 {
            None
        } else {
            Some((b2 - b1) / (a1 - a2))
        }
    }

    /// Where the line crosses zero.
    fn root(&self) -> Option<Rational> {
        match self {
            Line::Affine { a, b } => Some(-b / a),
            Line::Flat(_) => None,
        }
    }

    /// Where the line meets the diagonal `y = x`.
    fn diagonal_crossing(&self) -> Option<Rational> {
        let (a, b) = self.finite_parts()?;
        if a.is_one() {
            None
        } else {
            Some(b / (Rational::one() - a))
        }
    }
}

/// A piecewise description of a function on the finite reals: line `i`
/// is valid strictly between `cuts[i-1]` and `cuts[i]`. The value at a cut
/// itself is not described and must be evaluated directly.
#[derive(Debug, Clone)]
struct Piecewise {
    cuts: Vec<Rational>,
    lines: Vec<Line>,
}

type Bound = Option<Rational>;

fn midpoint(lo: &Bound, hi: &Bound) -> Rational {
    let two = Rational::from_integer(2.into());
    match (lo, hi) {
        (Some(l), Some(h)) => (l + h) / two,
        (Some(l), None) => l + Rational::one(),
        (None, Some(h)) => h - Rational::one(),
        (None, None) => Rational::zero(),
    }
}

fn strictly_inside(x: &Rational, lo: &Bound, hi: &Bound) -> bool {
    lo.as_ref().is_none_or(|l| l < x) && hi.as_ref().is_none_or(|h| x < h)
}

impl Piecewise {
    fn uniform(line: Line) -> Self {
        Piecewise {
            cuts: Vec::new(),
            lines: vec![line],
        }
    }

    fn line_near(&self, x: &Rational) -> &Line {
        &self.lines[self.cuts.partition_point(|c| c < x)]
    }

    /// Combines several functions interval by interval. `f` receives the
    /// interval and the lines of every part, and returns extra cuts inside
    /// the interval together with one line per resulting sub-interval.
    fn combine(
        parts: &[&Piecewise],
        f: impl Fn(&Bound, &Bound, &[&Line]) -> (Vec<Rational>, Vec<Line>),
    ) -> Piecewise {
        let cuts: BTreeSet<Rational> = parts.iter().flat_map(|p| p.cuts.iter().cloned()).collect();
        let cuts: Vec<Rational> = cuts.into_iter().collect();
        let mut out_cuts = Vec::new();
        let mut out_lines = Vec::new();
        for i in 0..=cuts.len() {
            let lo: Bound = if i == 0 { None } else { Some(cuts[i - 1].clone()) };
            let hi: Bound = cuts.get(i).cloned();
            let m = midpoint(&lo, &hi);
            let lines: Vec<&Line> = parts.iter().map(|p| p.line_near(&m)).collect();
            let (inner, pieces) = f(&lo, &hi, &lines);
            debug_assert_eq!(inner.len() + 1, pieces.len());
            if i > 0 {
                out_cuts.push(cuts[i - 1].clone());
            }
            out_cuts.extend(inner);
            out_lines.extend(pieces);
        }
        Piecewise {
            cuts: out_cuts,
            lines: out_lines,
        }
    }

    fn map(&self, f: impl Fn(&Line) -> Line) -> Piecewise {
        Piecewise {
            cuts: self.cuts.clone(),
            lines: self.lines.iter().map(f).collect(),
        }
    }
}

/// Pointwise minimum or maximum of two lines on an interval.
fn lattice_split(lo: &Bound, hi: &Bound, p: &Line, q: &Line, take_max: bool) -> (Vec<Rational>, Vec<Line>) {
    let pick = |lo: &Bound, hi: &Bound| {
        let m = midpoint(lo, hi);
        let (vp, vq) = (p.at(&m), q.at(&m));
        if (vp >= vq) == take_max {
            p.clone()
        } else {
            q.clone()
        }
    };
    match p.crossing(q).filter(|x| strictly_inside(x, lo, hi)) {
        Some(x) => {
            let at = Some(x.clone());
            (vec![x], vec![pick(lo, &at), pick(&at, hi)])
        }
        None => (vec![], vec![pick(lo, hi)]),
    }
}

/// Builds the piecewise description of `e` as a function of `x`, with all
/// other variables read from `env`.
fn piecewise(e: &Expr, x: &Var, env: &Valuation) -> Piecewise {
    let go = |a: &Expr| piecewise(a, x, env);
    match e {
        Expr::Var(v) if v == x => Piecewise::uniform(Line::affine(Rational::one(), Rational::zero())),
        Expr::Var(v) => Piecewise::uniform(Line::Flat(env.get(v).clone())),
        Expr::Const(d) => Piecewise::uniform(Line::Flat(d.clone())),
        Expr::Scale(c, a) => go(a).map(|l| l.scale(c.value())),
        Expr::Add(a, b) => Piecewise::combine(&[&go(a), &go(b)], |_, _, ls| (vec![], vec![ls[0].add(ls[1])])),
        Expr::Min(a, b) => Piecewise::combine(&[&go(a), &go(b)], |lo, hi, ls| lattice_split(lo, hi, ls[0], ls[1], false)),
        Expr::Max(a, b) => Piecewise::combine(&[&go(a), &go(b)], |lo, hi, ls| lattice_split(lo, hi, ls[0], ls[1], true)),
        Expr::EqInf(a) => go(a).map(|l| l.map_value(ExtReal::eq_inf)),
        Expr::EqNegInf(a) => go(a).map(|l| l.map_value(ExtReal::eq_neg_inf)),
        Expr::Neg(a) => go(a).map(|l| match l {
            Line::Flat(d) => Line::Flat(d.negate()),
            // Negation of an increasing line is decreasing; kept as a
            // flat marker would be wrong, so evaluate pointwise instead.
            Line::Affine { .. } => panic!("negation of a variable term"),
        }),
        Expr::Cond(g, a, b) | Expr::CondA(g, a, b) => {
            let strict = matches!(e, Expr::CondA(..));
            let parts = [&go(g), &go(a), &go(b)];
            Piecewise::combine(&parts, |lo, hi, ls| {
                let (guard, p, q) = (ls[0], ls[1], ls[2]);
                let choose = |lo: &Bound, hi: &Bound| -> (Vec<Rational>, Vec<Line>) {
                    let sign = guard.at(&midpoint(lo, hi)).signum();
                    match (strict, sign.is_lt(), sign.is_le()) {
                        (false, _, true) => lattice_split(lo, hi, p, q, false),
                        (false, _, false) => (vec![], vec![q.clone()]),
                        (true, true, _) => (vec![], vec![p.clone()]),
                        (true, false, _) => lattice_split(lo, hi, p, q, true),
                    }
                };
                match guard.root().filter(|r| strictly_inside(r, lo, hi)) {
                    Some(r) => {
                        let at = Some(r.clone());
                        let (mut c1, mut l1) = choose(lo, &at);
                        let (c2, l2) = choose(&at, hi);
                        c1.push(r);
                        c1.extend(c2);
                        l1.extend(l2);
                        (c1, l1)
                    }
                    None => choose(lo, hi),
                }
            })
        }
    }
}

/// Every point at which `g(x) = evaluate(e, env[x := ·])` may meet the
/// diagonal or change shape, plus both infinities.
fn candidates(e: &Expr, x: &Var, env: &Valuation) -> Vec<ExtReal> {
    let pw = piecewise(e, x, env);
    let mut out: BTreeSet<ExtReal> = [ExtReal::NegInf, ExtReal::PosInf].into();
    out.extend(pw.cuts.iter().cloned().map(ExtReal::Finite));
    out.extend(pw.lines.iter().filter_map(Line::diagonal_crossing).map(ExtReal::Finite));
    out.into_iter().collect()
}

/// Extremal fixed point together with the evidence used to find it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPointReport {
    pub value: ExtReal,
    pub candidates: Vec<ExtReal>,
}

/// Least (`μ`) or greatest (`ν`) fixed point of `x ↦ e` under `env`.
///
/// The least fixed point of a monotone map is the infimum of its prefixed
/// points `{x | g(x) ≤ x}`. Between consecutive candidates `g(x) - x` is
/// affine, so that infimum is always one of the candidates.
pub fn extremal_fixed_point_report(op: FixOp, x: &Var, e: &Expr, env: &Valuation) -> FixedPointReport {
    let g = |v: &ExtReal| evaluate(e, &env.updated(x, v.clone())).expect("negation-free right-hand side");
    let cands = candidates(e, x, env);
    let value = match op {
        FixOp::Mu => cands.iter().find(|c| g(c) <= **c).cloned(),
        FixOp::Nu => cands.iter().rev().find(|c| g(c) >= **c).cloned(),
    }
    .expect("infinities are always pre- and post-fixed points");
    FixedPointReport {
        value,
        candidates: cands,
    }
}

pub fn extremal_fixed_point(op: FixOp, x: &Var, e: &Expr, env: &Valuation) -> ExtReal {
    extremal_fixed_point_report(op, x, e, env).value
}

/// Fixed point of a decomposed single equation.
pub fn univariate_fixed_point(op: FixOp, x: &Var, dec: &ClauseDecomposition, env: &Valuation) -> ExtReal {
    extremal_fixed_point(op, x, &dec.to_expr(), env)
}

/// Checks the extremality evidence: `g(r) = r`, every candidate on the
/// wrong side of `r` is strictly off the diagonal, and so is one probe
/// point inside every segment between such candidates.
pub fn confirm_extremal(op: FixOp, x: &Var, e: &Expr, env: &Valuation, report: &FixedPointReport) -> bool {
    let g = |v: &ExtReal| evaluate(e, &env.updated(x, v.clone())).expect("negation-free right-hand side");
    let r = &report.value;
    if g(r) != *r {
        return false;
    }
    let beyond: Vec<&ExtReal> = match op {
        FixOp::Mu => report.candidates.iter().filter(|c| *c < r).collect(),
        FixOp::Nu => report.candidates.iter().filter(|c| *c > r).collect(),
    };
    let strictly_off = |c: &ExtReal| match op {
        FixOp::Mu => g(c) > *c,
        FixOp::Nu => g(c) < *c,
    };
    if !beyond.iter().all(|c| strictly_off(c)) {
        return false;
    }
    let mut points: Vec<&ExtReal> = beyond;
    points.push(r);
    points.sort();
    points.windows(2).all(|w| match (w[0], w[1]) {
        (ExtReal::Finite(a), ExtReal::Finite(b)) => {
            let two = Rational::from_integer(2.into());
            strictly_off(&ExtReal::Finite((a + b) / two))
        }
        (ExtReal::NegInf, ExtReal::Finite(b)) => strictly_off(&ExtReal::Finite(b - Rational::one())),
        (ExtReal::Finite(a), ExtReal::PosInf) => strictly_off(&ExtReal::Finite(a + Rational::one())),
        (ExtReal::NegInf, ExtReal::PosInf) => strictly_off(&ExtReal::zero()),
        _ => true,
    })
}

/// Values random instantiations draw from.
pub fn sample_grid() -> Vec<ExtReal> {
    vec![
        ExtReal::NegInf,
        ExtReal::int(-7),
        ExtReal::int(-1),
        ExtReal::zero(),
        ExtReal::ratio(1, 3),
        ExtReal::int(1),
        ExtReal::int(5),
        ExtReal::PosInf,
    ]
}

/// A valuation on which solver and oracle disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discrepancy {
    pub valuation: Vec<(Var, ExtReal)>,
    pub solver: ExtReal,
    pub oracle: ExtReal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrosscheckReport {
    pub trials: usize,
    pub agreements: usize,
    /// The first disagreement found, minimized.
    pub discrepancy: Option<Discrepancy>,
}

impl CrosscheckReport {
    pub fn agreed(&self) -> bool {
        self.discrepancy.is_none()
    }
}

/// Compares the symbolic solution of `op x = e` with the oracle on
/// `trials` random instantiations of the other variables.
pub fn crosscheck_single(
    op: FixOp,
    x: &Var,
    e: &Expr,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<CrosscheckReport, SolveError> {
    let solution = Solver::default().solve_single(op, x, e)?.rhs;
    let others: Vec<Var> = occ(e).into_iter().filter(|v| v != x).collect();
    let grid = sample_grid();
    let check = |assignment: &[(Var, ExtReal)]| -> Option<Discrepancy> {
        let env: Valuation = assignment.iter().cloned().collect();
        let symbolic = evaluate(&solution, &env).expect("negation-free solution");
        let geometric = extremal_fixed_point(op, x, e, &env);
        (symbolic != geometric).then(|| Discrepancy {
            valuation: assignment.to_vec(),
            solver: symbolic,
            oracle: geometric,
        })
    };
    let outcomes = map_range(exec, trials, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let assignment: Vec<(Var, ExtReal)> = others
            .iter()
            .map(|v| (v.clone(), grid.choose(&mut rng).expect("non-empty grid").clone()))
            .collect();
        check(&assignment)
    });
    let agreements = outcomes.iter().filter(|o| o.is_none()).count();
    let discrepancy = outcomes.into_iter().flatten().next().map(|d| minimize(d, &check));
    Ok(CrosscheckReport {
        trials,
        agreements,
        discrepancy,
    })
}

/// Greedily replaces values by simpler ones while the disagreement
/// persists.
/// Re-checks one assignment, reporting a disagreement if there is one.
type Probe<'a> = &'a dyn Fn(&[(Var, ExtReal)]) -> Option<Discrepancy>;

fn minimize(mut d: Discrepancy, check: Probe<'_>) -> Discrepancy {
    let simple = [ExtReal::zero(), ExtReal::int(1), ExtReal::int(-1), ExtReal::NegInf, ExtReal::PosInf];
    let complexity = |v: &ExtReal| simple.iter().position(|s| s == v).unwrap_or(simple.len());
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..d.valuation.len() {
            for s in &simple {
                if complexity(s) >= complexity(&d.valuation[i].1) {
                    continue;
                }
                let mut trial = d.valuation.clone();
                trial[i].1 = s.clone();
                if let Some(found) = check(&trial) {
                    d = found;
                    improved = true;
                    break;
                }
            }
        }
    }
    d
}
