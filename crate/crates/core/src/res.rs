//! Real equation systems and their solution by Gauss elimination.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::expr::{evaluate, occ, substitute, Expr, ExprError, Valuation, Var};
use crate::extreal::ExtReal;
use crate::normal_form::{simplify, DEFAULT_TERM_CAP};
use crate::solver::{SolveError, Solver};

/// Least (`mu`) or greatest (`nu`) fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FixOp {
    Mu,
    Nu,
}

impl FixOp {
    pub fn keyword(self) -> &'static str {
        match self {
            FixOp::Mu => "mu",
            FixOp::Nu => "nu",
        }
    }

    pub fn dual(self) -> FixOp {
        match self {
            FixOp::Mu => FixOp::Nu,
            FixOp::Nu => FixOp::Mu,
        }
    }
}

impl fmt::Display for FixOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Equation {
    pub op: FixOp,
    pub lhs: Var,
    pub rhs: Expr,
}

impl Equation {
    pub fn new(op: FixOp, lhs: impl Into<Var>, rhs: Expr) -> Self {
        Equation {
            op,
            lhs: lhs.into(),
            rhs,
        }
    }

    pub fn mu(lhs: &str, rhs: Expr) -> Self {
        Equation::new(FixOp::Mu, lhs, rhs)
    }

    pub fn nu(lhs: &str, rhs: Expr) -> Self {
        Equation::new(FixOp::Nu, lhs, rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResError {
    #[error("variable `{0}` is bound by more than one equation")]
    DuplicateBinder(Var),
    #[error("system is not closed: `{0}` occurs free")]
    NotClosed(Var),
    #[error("substitution must go from a later equation into an earlier one (got {target} <- {from})")]
    IndexOrder { target: usize, from: usize },
    #[error("equation index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("term size cap of {cap} exceeded while solving")]
    TermBlowup { cap: usize },
    #[error("right-hand side of `{0}` contains a negation")]
    NegationPresent(Var),
}

/// An ordered sequence of fixed-point equations with distinct left-hand
/// sides. Order matters: earlier equations have priority.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Res {
    equations: Vec<Equation>,
}

impl Res {
    pub fn new(equations: Vec<Equation>) -> Result<Self, ResError> {
        let mut seen = BTreeSet::new();
        for eq in &equations {
            if !seen.insert(eq.lhs.clone()) {
                return Err(ResError::DuplicateBinder(eq.lhs.clone()));
            }
        }
        Ok(Res { equations })
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    pub fn bnd(&self) -> BTreeSet<Var> {
        self.equations.iter().map(|e| e.lhs.clone()).collect()
    }

    /// The first right-hand-side variable that no equation binds.
    pub fn first_free_variable(&self) -> Option<Var> {
        let bound = self.bnd();
        self.equations
            .iter()
            .flat_map(|e| occ(&e.rhs))
            .find(|x| !bound.contains(x))
    }

    pub fn is_closed(&self) -> bool {
        self.first_free_variable().is_none()
    }

    /// Replaces the left-hand side of equation `source` by its right-hand
    /// side inside equation `target`, which must come earlier.
    pub fn substitute_later_into_earlier(&self, target: usize, source: usize) -> Result<Res, ResError> {
        if target >= source {
            return Err(ResError::IndexOrder { target, from: source });
        }
        if source >= self.len() {
            return Err(ResError::IndexOutOfRange(source));
        }
        let mut out = self.clone();
        let Equation { lhs, rhs, .. } = &self.equations[source];
        out.equations[target].rhs = substitute(&self.equations[target].rhs, lhs, rhs);
        Ok(out)
    }

    /// Swaps equations `i` and `i + 1`.
    pub fn swapped(&self, i: usize) -> Res {
        let mut out = self.clone();
        out.equations.swap(i, i + 1);
        out
    }
}

/// Exact values of all bound variables, in equation order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SolvedRes {
    values: Vec<(Var, ExtReal)>,
}

impl SolvedRes {
    pub fn from_pairs(values: Vec<(Var, ExtReal)>) -> Self {
        SolvedRes { values }
    }

    pub fn get(&self, x: &Var) -> Option<&ExtReal> {
        self.values.iter().find(|(v, _)| v == x).map(|(_, r)| r)
    }

    pub fn value(&self, name: &str) -> Option<&ExtReal> {
        self.get(&Var::new(name))
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Var, ExtReal)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_valuation(&self) -> Valuation {
        self.values.iter().cloned().collect()
    }
}

/// One rewriting step of the elimination, for derivation logs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceStep {
    /// Equation `index` was replaced by its closed-form solution.
    Solve { index: usize, before: Expr, after: Expr },
    /// The solution of `source` was substituted into equation `target`.
    Substitute { target: usize, source: usize, before: Expr, after: Expr },
    /// Equation `index` became constant and its value was propagated.
    Constant { index: usize, before: Expr, after: ExtReal },
}

impl TraceStep {
    pub fn rule(&self) -> &'static str {
        match self {
            TraceStep::Solve { .. } => "solve",
            TraceStep::Substitute { .. } => "E3",
            TraceStep::Constant { .. } => "E4",
        }
    }
}

/// A single-equation solve performed during elimination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingleSolve {
    pub op: FixOp,
    pub var: Var,
    pub rhs: Expr,
    pub solution: Expr,
}

/// Outcome of [`Gauss::solve`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaussOutcome {
    pub solution: SolvedRes,
    pub trace: Vec<TraceStep>,
    pub solves: Vec<SingleSolve>,
}

/// Outcome of the symbolic backward pass alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackwardOutcome {
    /// The system after elimination: equation `k` mentions only variables
    /// bound before `k` and free variables of the input.
    pub system: Res,
    pub trace: Vec<TraceStep>,
    pub solves: Vec<SingleSolve>,
}

/// Gauss elimination driver.
#[derive(Debug, Clone, Copy)]
pub struct Gauss {
    pub cap: usize,
    pub record_trace: bool,
}

impl Default for Gauss {
    fn default() -> Self {
        Gauss {
            cap: DEFAULT_TERM_CAP,
            record_trace: false,
        }
    }
}

impl Gauss {
    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    /// Backward pass: solve the equations from last to first, substituting
    /// each solution into all earlier equations. Also works on open systems.
    pub fn backward(&self, system: &Res) -> Result<BackwardOutcome, ResError> {
        let solver = Solver::with_cap(self.cap);
        let mut eqs = system.equations.clone();
        let mut trace = Vec::new();
        let mut solves = Vec::new();
        for k in (0..eqs.len()).rev() {
            let Equation { op, lhs, rhs } = eqs[k].clone();
            let solution = solver.solve_single(op, &lhs, &rhs).map_err(|e| match e {
                SolveError::TermBlowup { cap } => ResError::TermBlowup { cap },
                SolveError::NegationPresent => ResError::NegationPresent(lhs.clone()),
            })?;
            let after = solution.rhs;
            if self.record_trace {
                trace.push(TraceStep::Solve {
                    index: k,
                    before: rhs.clone(),
                    after: after.clone(),
                });
            }
            solves.push(SingleSolve {
                op,
                var: lhs.clone(),
                rhs,
                solution: after.clone(),
            });
            eqs[k].rhs = after.clone();
            for (i, earlier) in eqs.iter_mut().enumerate().take(k) {
                if !earlier.rhs.mentions(&lhs) {
                    continue;
                }
                let substituted = simplify(&substitute(&earlier.rhs, &lhs, &after));
                check_size(&substituted, self.cap)?;
                if self.record_trace {
                    trace.push(TraceStep::Substitute {
                        target: i,
                        source: k,
                        before: earlier.rhs.clone(),
                        after: substituted.clone(),
                    });
                }
                earlier.rhs = substituted;
            }
        }
        Ok(BackwardOutcome {
            system: Res { equations: eqs },
            trace,
            solves,
        })
    }

    /// Solves a closed system exactly.
    pub fn solve(&self, system: &Res) -> Result<GaussOutcome, ResError> {
        if let Some(x) = system.first_free_variable() {
            return Err(ResError::NotClosed(x));
        }
        let BackwardOutcome {
            system: reduced,
            mut trace,
            solves,
        } = self.backward(system)?;
        // Forward pass: each right-hand side only mentions earlier
        // variables, which already have values.
        let n = reduced.len();
        let mut env = Valuation::default();
        let mut values = Vec::with_capacity(n);
        for (k, eq) in reduced.equations.iter().enumerate() {
            let value = evaluate(&eq.rhs, &env).map_err(|e| match e {
                ExprError::NegationPresent | ExprError::OddNegation(_) => {
                    ResError::NegationPresent(eq.lhs.clone())
                }
            })?;
            if self.record_trace && (k + 1 < n || eq.rhs.as_const().is_none()) {
                trace.push(TraceStep::Constant {
                    index: k,
                    before: eq.rhs.clone(),
                    after: value.clone(),
                });
            }
            env.set(eq.lhs.clone(), value.clone());
            values.push((eq.lhs.clone(), value));
        }
        Ok(GaussOutcome {
            solution: SolvedRes { values },
            trace,
            solves,
        })
    }
}

fn check_size(e: &Expr, cap: usize) -> Result<(), ResError> {
    if e.size_capped(cap) > cap {
        Err(ResError::TermBlowup { cap })
    } else {
        Ok(())
    }
}

/// Solves a closed system with the default term cap.
pub fn gauss_solve(system: &Res) -> Result<SolvedRes, ResError> {
    Gauss::default().solve(system).map(|o| o.solution)
}

/// Derivation log of solving a closed system.
pub fn trace(system: &Res) -> Result<Vec<TraceStep>, ResError> {
    Gauss::default().with_trace().solve(system).map(|o| o.trace)
}

/// Symbolic backward pass only; the result may still mention free
/// variables of the input.
pub fn solve_partially(system: &Res) -> Result<Res, ResError> {
    Gauss::default().backward(system).map(|o| o.system)
}

/// Values for a valuation keyed by name, convenient in tests.
pub fn values_by_name(solved: &SolvedRes) -> BTreeMap<String, ExtReal> {
    solved.iter().map(|(x, v)| (x.name().to_string(), v.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extreal::PosRational;

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

    pub(crate) fn intro_system() -> Res {
        Res::new(vec![
            Equation::mu(
                "X",
                Expr::max(
                    Expr::add(Expr::scale(c(1, 2), x()), k(1)),
                    Expr::add(Expr::scale(c(1, 5), y()), k(3)),
                ),
            ),
            Equation::nu(
                "Y",
                Expr::min(
                    Expr::max(
                        Expr::add(Expr::scale(c(1, 10), y()), k(-10)),
                        Expr::add(Expr::scale(c(2, 1), x()), k(5)),
                    ),
                    k(17),
                ),
            ),
        ])
        .unwrap()
    }

    fn order_system() -> Res {
        Res::new(vec![
            Equation::mu("X", y()),
            Equation::nu("Y", Expr::min(Expr::add(x(), k(1)), y())),
        ])
        .unwrap()
    }

    #[test]
    fn bound_variables_and_closedness() {
        assert!(Res::default().bnd().is_empty());
        let s = Res::new(vec![Equation::mu("X", y()), Equation::nu("Y", x())]).unwrap();
        assert_eq!(s.bnd(), [Var::new("X"), Var::new("Y")].into());
        assert!(s.is_closed());
        let open = Res::new(vec![Equation::mu("X", Expr::var("Z"))]).unwrap();
        assert!(!open.is_closed());
        assert!(intro_system().is_closed());
        assert_eq!(
            Res::new(vec![Equation::mu("X", k(1)), Equation::nu("X", k(2))]),
            Err(ResError::DuplicateBinder(Var::new("X")))
        );
    }

    #[test]
    fn substitution_between_equations() {
        let s = Res::new(vec![Equation::mu("X", y()), Equation::nu("Y", Expr::add(x(), k(1)))]).unwrap();
        let out = s.substitute_later_into_earlier(0, 1).unwrap();
        assert_eq!(out.equations()[0].rhs, Expr::add(x(), k(1)));
        assert_eq!(out.equations()[1], s.equations()[1]);
        assert_eq!(
            s.substitute_later_into_earlier(1, 0),
            Err(ResError::IndexOrder { target: 1, from: 0 })
        );
        let unrelated = Res::new(vec![Equation::mu("X", k(3)), Equation::nu("Y", x())]).unwrap();
        assert_eq!(unrelated.substitute_later_into_earlier(0, 1).unwrap(), unrelated);
    }

    #[test]
    fn intro_example() {
        let s = gauss_solve(&intro_system()).unwrap();
        assert_eq!(s.value("X"), Some(&ExtReal::ratio(32, 5)));
        assert_eq!(s.value("Y"), Some(&ExtReal::int(17)));
    }

    #[test]
    fn order_example() {
        let s = gauss_solve(&order_system()).unwrap();
        assert_eq!(s.value("X"), Some(&ExtReal::NegInf));
        assert_eq!(s.value("Y"), Some(&ExtReal::NegInf));
    }

    #[test]
    fn order_matters() {
        let a = Res::new(vec![Equation::mu("X", y()), Equation::nu("Y", x())]).unwrap();
        let b = Res::new(vec![Equation::nu("X", y()), Equation::nu("Y", x())]).unwrap();
        let sa = gauss_solve(&a).unwrap();
        let sb = gauss_solve(&b).unwrap();
        assert_eq!(sa.value("X"), Some(&ExtReal::NegInf));
        assert_eq!(sa.value("Y"), Some(&ExtReal::NegInf));
        assert_eq!(sb.value("X"), Some(&ExtReal::PosInf));
        assert_eq!(sb.value("Y"), Some(&ExtReal::PosInf));
    }

    #[test]
    fn open_systems_are_rejected() {
        let open = Res::new(vec![Equation::mu("X", Expr::max(x(), Expr::var("Z")))]).unwrap();
        assert_eq!(gauss_solve(&open), Err(ResError::NotClosed(Var::new("Z"))));
        let partial = solve_partially(&open).unwrap();
        assert!(!partial.equations()[0].rhs.mentions(&Var::new("X")));
    }

    #[test]
    fn trace_shapes() {
        assert!(trace(&Res::default()).unwrap().is_empty());
        let steps = trace(&order_system()).unwrap();
        assert_eq!(steps.len(), 5, "{steps:#?}");
        let rules: Vec<_> = steps.iter().map(TraceStep::rule).collect();
        assert_eq!(rules, ["solve", "E3", "solve", "E4", "E4"]);
        let steps = trace(&intro_system()).unwrap();
        assert!(steps.len() >= 2);
    }

    #[test]
    fn same_sign_swap_is_harmless() {
        let s = Res::new(vec![
            Equation::nu("A", Expr::min(Expr::var("B"), k(4))),
            Equation::nu("B", Expr::add(Expr::var("A"), k(-1))),
        ])
        .unwrap();
        let v1 = values_by_name(&gauss_solve(&s).unwrap());
        let v2 = values_by_name(&gauss_solve(&s.swapped(0)).unwrap());
        assert_eq!(v1, v2);
    }
}
