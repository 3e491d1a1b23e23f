//! Closed-form solutions of single fixed-point equations `σX = e`.
//!
//! The right-hand side is brought into normal form (CNF for `μ`, DNF for
//! `ν`), the occurrences of `X` in every clause are exposed, and each clause
//! is replaced by a conditional expression over the remaining parts that
//! selects the extremal intersection with the diagonal. Conditional
//! normal-form trees are solved by recursion into their branches.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::expr::{substitute, substitute_all, Expr, Var};
use crate::extreal::{ExtReal, PosRational, Rational};
use crate::normal_form::{
    simplify, CondKind, LinearAtom, NormalFormError, Normalizer, Polarity, SimpleNF, DEFAULT_TERM_CAP, NF,
};
use crate::res::FixOp;
use crate::simplify as smart;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("term size cap of {cap} exceeded")]
    TermBlowup { cap: usize },
    #[error("right-hand side contains a negation")]
    NegationPresent,
}

impl From<NormalFormError> for SolveError {
    fn from(e: NormalFormError) -> Self {
        match e {
            NormalFormError::TermBlowup { cap } => SolveError::TermBlowup { cap },
            _ => SolveError::NegationPresent,
        }
    }
}

/// An atom `c·X + c'·eq₋∞(X) + f` of a clause, with `f` free of `X`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExposedAtom {
    /// Coefficient of `X`; zero when `X` occurs only inside the test.
    pub c: Rational,
    /// Whether `eq₋∞(X)` is present.
    pub c_prime: bool,
    pub f: Expr,
}

impl ExposedAtom {
    pub fn to_expr(&self, x: &Var) -> Expr {
        let mut terms = Vec::new();
        if !self.c.is_zero() {
            let c = PosRational::new(self.c.clone()).expect("positive coefficient");
            terms.push(smart::scale(&c, Expr::Var(x.clone())));
        }
        if self.c_prime {
            terms.push(Expr::eq_neg_inf(Expr::Var(x.clone())));
        }
        terms.push(self.f.clone());
        smart::sum(terms)
    }
}

/// One clause: the atoms mentioning `X` and the `X`-free residue `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExposedClause {
    pub atoms: Vec<ExposedAtom>,
    pub residue: Expr,
}

/// A simple normal form with the occurrences of one variable exposed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseDecomposition {
    pub var: Var,
    pub polarity: Polarity,
    pub clauses: Vec<ExposedClause>,
}

impl ClauseDecomposition {
    /// The expression the decomposition stands for.
    pub fn to_expr(&self) -> Expr {
        let x = &self.var;
        let clauses = self.clauses.iter().map(|cl| {
            let mut parts: Vec<Expr> = cl.atoms.iter().map(|a| a.to_expr(x)).collect();
            parts.push(cl.residue.clone());
            match self.polarity {
                Polarity::Cnf => Expr::join_all(parts),
                Polarity::Dnf => Expr::meet_all(parts),
            }
        });
        match self.polarity {
            Polarity::Cnf => Expr::meet_all(clauses),
            Polarity::Dnf => Expr::join_all(clauses),
        }
    }
}

/// Splits every clause into the atoms that mention `x` and the residue.
pub fn expose(x: &Var, nf: &SimpleNF) -> ClauseDecomposition {
    let clauses = nf
        .clauses
        .iter()
        .map(|clause| {
            let mut atoms = Vec::new();
            let mut rest = Vec::new();
            for atom in clause {
                if !atom.mentions(x) {
                    rest.push(atom.to_expr());
                    continue;
                }
                let mut f = atom.clone();
                let c = f.coeffs.remove(x).map(PosRational::into_inner).unwrap_or_else(Rational::zero);
                let c_prime = f.tests.remove(x);
                atoms.push(ExposedAtom {
                    c,
                    c_prime,
                    f: atom_remainder(&f),
                });
            }
            let residue = match nf.polarity {
                Polarity::Cnf => smart::join(rest),
                Polarity::Dnf => smart::meet(rest),
            };
            ExposedClause { atoms, residue }
        })
        .collect();
    ClauseDecomposition {
        var: x.clone(),
        polarity: nf.polarity,
        clauses,
    }
}

fn atom_remainder(atom: &LinearAtom) -> Expr {
    smart::sum(vec![atom.to_expr()])
}

/// `(c - 1)·U` for `c ≥ 1`, where the case `c = 1` is the constant `0`.
fn excess(c: &Rational, u: &Expr) -> Expr {
    let k = c - Rational::one();
    match PosRational::new(k) {
        Ok(k) => smart::scale(&k, u.clone()),
        Err(_) => Expr::constant(0),
    }
}

/// `1/(1 - c)·f` for `0 ≤ c < 1`.
fn contraction(c: &Rational, f: &Expr) -> Expr {
    let k = PosRational::new(Rational::one() - c).expect("coefficient below one").recip();
    smart::scale(&k, f.clone())
}

/// Least solution of `μX = e` for a CNF `e`.
pub fn sol_mu_simple(dec: &ClauseDecomposition) -> Expr {
    let one = Rational::one();
    let clause_solutions = dec.clauses.iter().map(|cl| {
        let m = cl.residue.clone();
        if cl.atoms.is_empty() {
            return m;
        }
        let mut u_parts = vec![m.clone()];
        u_parts.extend(cl.atoms.iter().filter(|a| a.c < one).map(|a| contraction(&a.c, &a.f)));
        let u = smart::join(u_parts);
        let mut steep: Vec<Expr> = cl
            .atoms
            .iter()
            .filter(|a| a.c >= one)
            .map(|a| smart::sum(vec![a.f.clone(), excess(&a.c, &u)]))
            .collect();
        if cl.atoms.iter().any(|a| a.c_prime) {
            steep.push(Expr::pos_inf());
        }
        let innermost = smart::conditional(CondKind::Cond, smart::join(steep), u, Expr::pos_inf());
        let middle = smart::conditional(
            CondKind::Cond,
            smart::eq_neg_inf(m),
            Expr::neg_inf(),
            innermost,
        );
        let any_f = smart::join(cl.atoms.iter().map(|a| a.f.clone()).collect());
        smart::conditional(CondKind::Cond, smart::eq_inf(any_f), middle, Expr::pos_inf())
    });
    smart::meet(clause_solutions.collect())
}

/// Greatest solution of `νX = e` for a DNF `e`.
pub fn sol_nu_simple(dec: &ClauseDecomposition) -> Expr {
    let one = Rational::one();
    let clause_solutions = dec.clauses.iter().map(|cl| {
        let m = cl.residue.clone();
        if cl.atoms.is_empty() {
            return m;
        }
        let plain: Vec<&ExposedAtom> = cl.atoms.iter().filter(|a| !a.c_prime).collect();
        let mut u_parts = vec![m.clone()];
        u_parts.extend(plain.iter().filter(|a| a.c < one).map(|a| contraction(&a.c, &a.f)));
        let u = smart::meet(u_parts);
        let steep: Vec<Expr> = plain
            .iter()
            .filter(|a| a.c >= one)
            .map(|a| smart::sum(vec![a.f.clone(), excess(&a.c, &u)]))
            .collect();
        let inner = smart::conditional(CondKind::CondA, smart::meet(steep), Expr::neg_inf(), u);
        smart::conditional(CondKind::Cond, smart::eq_inf(m), inner, Expr::pos_inf())
    });
    smart::join(clause_solutions.collect())
}

/// The solution `σX = e` is equivalent to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub rhs: Expr,
}

/// Single-equation solver with a configurable term cap.
#[derive(Debug, Clone, Copy)]
pub struct Solver {
    pub cap: usize,
}

impl Default for Solver {
    fn default() -> Self {
        Solver { cap: DEFAULT_TERM_CAP }
    }
}

impl Solver {
    pub fn with_cap(cap: usize) -> Self {
        Solver { cap }
    }

    fn normalizer(&self, op: FixOp) -> Normalizer {
        let polarity = match op {
            FixOp::Mu => Polarity::Cnf,
            FixOp::Nu => Polarity::Dnf,
        };
        Normalizer::with_cap(polarity, self.cap)
    }

    /// Solves `op x = e`, returning an expression free of `x`.
    pub fn solve_single(&self, op: FixOp, x: &Var, e: &Expr) -> Result<Solution, SolveError> {
        if e.contains_negation() {
            return Err(SolveError::NegationPresent);
        }
        if !e.mentions(x) {
            return Ok(Solution { rhs: simplify(e) });
        }
        // Subterms without `x` behave as opaque values throughout; naming
        // them keeps the normal form small.
        let mut names = BTreeMap::new();
        let abstracted = abstract_free_subterms(x, e, &mut names);
        let nf = self.normalizer(op).full(&abstracted)?;
        let solved = self.sol_nf(op, x, &nf)?;
        let back: BTreeMap<Var, Expr> = names.into_iter().map(|(expr, name)| (name, expr)).collect();
        let rhs = simplify(&substitute_all(&solved, &back));
        assert!(!rhs.mentions(x), "solution still mentions {x}");
        if rhs.size_capped(self.cap) > self.cap {
            return Err(SolveError::TermBlowup { cap: self.cap });
        }
        Ok(Solution { rhs })
    }

    /// Solution for a normal-form tree.
    pub fn sol_nf(&self, op: FixOp, x: &Var, nf: &NF) -> Result<Expr, SolveError> {
        let norm = self.normalizer(op);
        match nf {
            NF::Leaf(s) => {
                let dec = expose(x, s);
                Ok(match op {
                    FixOp::Mu => sol_mu_simple(&dec),
                    FixOp::Nu => sol_nu_simple(&dec),
                })
            }
            NF::Cond { kind, guard, then, other } => {
                let g = guard.to_expr();
                let guard_at = |value: Expr| simplify(&substitute(&g, x, &value));
                let solved = match (op, kind) {
                    (FixOp::Mu, CondKind::Cond) => {
                        let s2 = self.sol_nf(op, x, then)?;
                        let s3 = self.sol_nf(op, x, other)?;
                        let g = guard_at(smart::meet(vec![s2.clone(), s3.clone()]));
                        smart::conditional(CondKind::Cond, g, s2, s3)
                    }
                    (FixOp::Nu, CondKind::Cond) => {
                        let s3 = self.sol_nf(op, x, other)?;
                        // Normal forms never nest a guard under a node of the
                        // same kind and guard, so this recursion shrinks.
                        let both = norm.meet_nf(then, other)?;
                        debug_assert!(!both.has_node(*kind, guard));
                        let s23 = self.sol_nf(op, x, &both)?;
                        smart::conditional(CondKind::Cond, guard_at(s3.clone()), s23, s3)
                    }
                    (FixOp::Mu, CondKind::CondA) => {
                        let s2 = self.sol_nf(op, x, then)?;
                        let either = norm.join_nf(then, other)?;
                        debug_assert!(!either.has_node(*kind, guard));
                        let s23 = self.sol_nf(op, x, &either)?;
                        smart::conditional(CondKind::CondA, guard_at(s2.clone()), s2, s23)
                    }
                    (FixOp::Nu, CondKind::CondA) => {
                        let s2 = self.sol_nf(op, x, then)?;
                        let s3 = self.sol_nf(op, x, other)?;
                        let g = guard_at(smart::join(vec![s2.clone(), s3.clone()]));
                        smart::conditional(CondKind::CondA, g, s2, s3)
                    }
                };
                if solved.size_capped(self.cap) > self.cap {
                    return Err(SolveError::TermBlowup { cap: self.cap });
                }
                Ok(solved)
            }
        }
    }
}

/// Replaces every maximal compound subterm not mentioning `x` by a fresh
/// variable, recording the naming in `names`. Fresh names start with `#`,
/// which no input identifier can.
fn abstract_free_subterms(x: &Var, e: &Expr, names: &mut BTreeMap<Expr, Var>) -> Expr {
    if !e.mentions(x) {
        return match e {
            Expr::Var(_) | Expr::Const(_) => e.clone(),
            _ => {
                let next = names.len();
                Expr::Var(names.entry(e.clone()).or_insert_with(|| Var::new(format!("#{next}"))).clone())
            }
        };
    }
    let mut go = |a: &Expr| abstract_free_subterms(x, a, names);
    match e {
        Expr::Var(_) | Expr::Const(_) => e.clone(),
        Expr::Scale(c, a) => Expr::scale(c.clone(), go(a)),
        Expr::Add(a, b) => {
            let a = go(a);
            Expr::add(a, go(b))
        }
        Expr::Min(a, b) => {
            let a = go(a);
            Expr::min(a, go(b))
        }
        Expr::Max(a, b) => {
            let a = go(a);
            Expr::max(a, go(b))
        }
        Expr::Cond(g, a, b) => {
            let (g, a) = (go(g), go(a));
            Expr::cond(g, a, go(b))
        }
        Expr::CondA(g, a, b) => {
            let (g, a) = (go(g), go(a));
            Expr::conda(g, a, go(b))
        }
        Expr::EqInf(a) => Expr::eq_inf(go(a)),
        Expr::EqNegInf(a) => Expr::eq_neg_inf(go(a)),
        Expr::Neg(a) => Expr::neg(go(a)),
    }
}

/// Solves `op x = e` with the default term cap.
pub fn solve_single(op: FixOp, x: &Var, e: &Expr) -> Result<Solution, SolveError> {
    Solver::default().solve_single(op, x, e)
}

/// Solution of a conditional normal-form node.
pub fn sol_conditional(op: FixOp, x: &Var, node: &NF) -> Result<Expr, SolveError> {
    Solver::default().sol_nf(op, x, node).map(|e| simplify(&e))
}

/// Checks `r = e[x := r]` at `env`, used by tests and the verifier.
pub fn is_fixed_point(x: &Var, e: &Expr, r: &ExtReal, env: &crate::expr::Valuation) -> bool {
    crate::expr::evaluate(e, &env.updated(x, r.clone())).as_ref() == Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate, Valuation};
    use crate::normal_form::{to_nf, to_simple_nf};

    fn x() -> Expr {
        Expr::var("X")
    }
    fn y() -> Expr {
        Expr::var("Y")
    }
    fn k(n: i64) -> Expr {
        Expr::constant(n)
    }
    fn c(n: i64, d: i64) -> PosRational {
        PosRational::ratio(n, d)
    }
    fn xv() -> Var {
        Var::new("X")
    }
    fn closed_value(op: FixOp, e: &Expr) -> ExtReal {
        let sol = solve_single(op, &xv(), e).unwrap();
        evaluate(&sol.rhs, &Valuation::default()).unwrap()
    }

    #[test]
    fn exposes_occurrences() {
        let e = Expr::max(Expr::add(Expr::scale(c(1, 2), x()), k(1)), k(0));
        let dec = expose(&xv(), &to_simple_nf(&e, Polarity::Cnf).unwrap());
        assert_eq!(dec.clauses.len(), 1);
        let cl = &dec.clauses[0];
        assert_eq!(cl.atoms.len(), 1);
        assert_eq!(cl.atoms[0].c, Rational::new(1.into(), 2.into()));
        assert!(!cl.atoms[0].c_prime);
        assert_eq!(cl.atoms[0].f, k(1));
        assert_eq!(cl.residue, k(0));

        let dec = expose(&xv(), &to_simple_nf(&Expr::max(y(), k(2)), Polarity::Cnf).unwrap());
        assert!(dec.clauses[0].atoms.is_empty());
        assert_eq!(dec.clauses[0].residue, Expr::max(y(), k(2)));
    }

    #[test]
    fn exposes_intro_disjunctive_form() {
        let body = Expr::min(
            Expr::max(
                Expr::add(Expr::scale(c(1, 10), y()), k(-10)),
                Expr::add(Expr::scale(c(2, 1), x()), k(5)),
            ),
            k(17),
        );
        let dec = expose(&Var::new("Y"), &to_simple_nf(&body, Polarity::Dnf).unwrap());
        assert_eq!(dec.clauses.len(), 2);
        let with_y = dec.clauses.iter().find(|cl| !cl.atoms.is_empty()).unwrap();
        assert_eq!(with_y.atoms[0].c, Rational::new(1.into(), 10.into()));
        assert_eq!(with_y.atoms[0].f, k(-10));
        assert_eq!(with_y.residue, k(17));
        let without = dec.clauses.iter().find(|cl| cl.atoms.is_empty()).unwrap();
        let env: Valuation = [("X", ExtReal::int(1))].into_iter().collect();
        assert_eq!(evaluate(&without.residue, &env).unwrap(), ExtReal::int(7));
    }

    #[test]
    fn least_solutions() {
        let e = Expr::max(Expr::add(Expr::scale(c(1, 2), x()), k(1)), k(0));
        assert_eq!(closed_value(FixOp::Mu, &e), ExtReal::int(2));
        let e = Expr::max(Expr::add(x(), k(1)), k(0));
        assert_eq!(closed_value(FixOp::Mu, &e), ExtReal::PosInf);
        let e = Expr::join_all([
            Expr::add(Expr::scale(c(1, 2), x()), k(4)),
            Expr::add(Expr::scale(c(9, 10), x()), k(1)),
            k(0),
        ]);
        assert_eq!(closed_value(FixOp::Mu, &e), ExtReal::int(10));
        let e = Expr::join_all([
            Expr::add(Expr::scale(c(1, 2), x()), k(1)),
            Expr::constant(ExtReal::ratio(7, 9)),
            Expr::min(
                Expr::add(Expr::scale(c(2, 5), x()), k(4)),
                Expr::constant(ExtReal::ratio(32, 5)),
            ),
        ]);
        assert_eq!(closed_value(FixOp::Mu, &e), ExtReal::ratio(32, 5));
    }

    #[test]
    fn greatest_solutions() {
        assert_eq!(closed_value(FixOp::Nu, &x()), ExtReal::PosInf);
        assert_eq!(closed_value(FixOp::Mu, &x()), ExtReal::NegInf);
        let yv = Var::new("Y");
        let e = Expr::min(Expr::add(x(), k(1)), y());
        let sol = solve_single(FixOp::Nu, &yv, &e).unwrap();
        for v in [ExtReal::NegInf, ExtReal::int(-3), ExtReal::int(5), ExtReal::PosInf] {
            let env: Valuation = [("X", v.clone())].into_iter().collect();
            assert_eq!(evaluate(&sol.rhs, &env).unwrap(), v.add(&ExtReal::int(1)));
        }
    }

    #[test]
    fn intro_nu_equation() {
        let yv = Var::new("Y");
        let body = Expr::min(
            Expr::max(
                Expr::add(Expr::scale(c(1, 10), y()), k(-10)),
                Expr::add(Expr::scale(c(2, 1), x()), k(5)),
            ),
            k(17),
        );
        let sol = solve_single(FixOp::Nu, &yv, &body).unwrap();
        assert!(!sol.rhs.mentions(&yv));
        let expected = Expr::max(
            Expr::constant(ExtReal::ratio(-100, 9)),
            Expr::min(Expr::add(Expr::scale(c(2, 1), x()), k(5)), k(17)),
        );
        for n in -30..30 {
            let env: Valuation = [("X", ExtReal::ratio(n, 3))].into_iter().collect();
            assert_eq!(evaluate(&sol.rhs, &env).unwrap(), evaluate(&expected, &env).unwrap());
        }
    }

    #[test]
    fn intro_mu_equation_with_parameter() {
        let e = Expr::max(
            Expr::add(Expr::scale(c(1, 2), x()), k(1)),
            Expr::add(Expr::scale(c(1, 5), y()), k(3)),
        );
        let sol = solve_single(FixOp::Mu, &xv(), &e).unwrap();
        let env: Valuation = [("Y", ExtReal::int(17))].into_iter().collect();
        assert_eq!(evaluate(&sol.rhs, &env).unwrap(), ExtReal::ratio(32, 5));
    }

    #[test]
    fn conditional_equations() {
        let e = Expr::cond(k(1), Expr::add(x(), k(1)), Expr::scale(c(1, 2), x()));
        assert_eq!(closed_value(FixOp::Mu, &e), ExtReal::NegInf);
        let nf = NF::Cond {
            kind: CondKind::Cond,
            guard: SimpleNF::constant(Polarity::Cnf, ExtReal::int(1)),
            then: std::sync::Arc::new(to_nf(&Expr::add(x(), k(1)), Polarity::Cnf).unwrap()),
            other: std::sync::Arc::new(to_nf(&Expr::scale(c(1, 2), x()), Polarity::Cnf).unwrap()),
        };
        assert_eq!(sol_conditional(FixOp::Mu, &xv(), &nf).unwrap(), Expr::neg_inf());

        let free = Expr::cond(y(), Expr::var("Z"), k(3));
        assert_eq!(solve_single(FixOp::Mu, &xv(), &free).unwrap().rhs, free);

        let yv = Var::new("Y");
        let e = Expr::conda(k(0), y(), k(5));
        let sol = solve_single(FixOp::Nu, &yv, &e).unwrap();
        assert_eq!(evaluate(&sol.rhs, &Valuation::default()).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn guard_mentions_the_variable() {
        // μX = cond(X - 2, 5, X/2 + 3): at x=2 the guard switches.
        for (op, g_shift) in [(FixOp::Mu, -2), (FixOp::Nu, -2), (FixOp::Mu, 10), (FixOp::Nu, 10)] {
            for kind in [CondKind::Cond, CondKind::CondA] {
                let e = kind.build(
                    Expr::add(x(), k(g_shift)),
                    k(5),
                    Expr::add(Expr::scale(c(1, 2), x()), k(3)),
                );
                let sol = solve_single(op, &xv(), &e).unwrap();
                let r = evaluate(&sol.rhs, &Valuation::default()).unwrap();
                assert!(is_fixed_point(&xv(), &e, &r, &Valuation::default()), "{op:?} {kind:?} {r}");
            }
        }
    }
}
