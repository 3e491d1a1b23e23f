//! Quantitative modal mu-calculus: formulas, probabilistic labelled
//! transition systems, and the translation of a formula over a model into
//! a real equation system.
//!
//! Every fixed-point binder `σX.φ` contributes one equation `σ X.s` per
//! state `s`, in the model's state order, followed by the equations of
//! `φ`. The value of the formula is the solution of the extra leading
//! equation for [`INIT_VAR`].

use std::collections::BTreeSet;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::expr::{Expr, Var};
use crate::extreal::{format_rational, ExtReal, PosRational, Rational};
use crate::res::{gauss_solve, Equation, FixOp, Res, ResError};

/// Name of the variable carrying the value of the whole formula. State
/// variables always contain a `.`, so this name can never collide.
pub const INIT_VAR: &str = "X_init";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModalError {
    #[error("variable `{0}` is not bound by an enclosing fixed point")]
    UnboundVariable(Var),
    #[error("variable `{0}` is bound more than once")]
    DuplicateBinder(Var),
    #[error("probability {probability} of state `{state}` is not positive")]
    NonPositiveProbability { state: String, probability: String },
    #[error("state `{0}` occurs twice in one distribution")]
    RepeatedState(String),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(String),
    #[error(transparent)]
    Solve(#[from] ResError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Var(Var),
    Const(ExtReal),
    Scale(PosRational, Arc<Formula>),
    Add(Arc<Formula>, Arc<Formula>),
    Or(Arc<Formula>, Arc<Formula>),
    And(Arc<Formula>, Arc<Formula>),
    Diamond(String, Arc<Formula>),
    Box(String, Arc<Formula>),
    Mu(Var, Arc<Formula>),
    Nu(Var, Arc<Formula>),
}

impl Formula {
    pub fn var(name: impl AsRef<str>) -> Formula {
        Formula::Var(Var::new(name))
    }

    pub fn constant(value: impl Into<ExtReal>) -> Formula {
        Formula::Const(value.into())
    }

    pub fn scale(c: PosRational, f: Formula) -> Formula {
        Formula::Scale(c, Arc::new(f))
    }

    pub fn add(a: Formula, b: Formula) -> Formula {
        Formula::Add(Arc::new(a), Arc::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Arc::new(a), Arc::new(b))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Arc::new(a), Arc::new(b))
    }

    pub fn diamond(action: impl Into<String>, f: Formula) -> Formula {
        Formula::Diamond(action.into(), Arc::new(f))
    }

    pub fn boxed(action: impl Into<String>, f: Formula) -> Formula {
        Formula::Box(action.into(), Arc::new(f))
    }

    pub fn mu(x: impl AsRef<str>, f: Formula) -> Formula {
        Formula::Mu(Var::new(x), Arc::new(f))
    }

    pub fn nu(x: impl AsRef<str>, f: Formula) -> Formula {
        Formula::Nu(Var::new(x), Arc::new(f))
    }

    /// Actions mentioned by modalities, in syntactic order.
    pub fn actions(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Diamond(a, _) | Formula::Box(a, _) = f {
                if !out.contains(a) {
                    out.push(a.clone());
                }
            }
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        match self {
            Formula::Var(_) | Formula::Const(_) => {}
            Formula::Scale(_, a)
            | Formula::Diamond(_, a)
            | Formula::Box(_, a)
            | Formula::Mu(_, a)
            | Formula::Nu(_, a) => a.visit(f),
            Formula::Add(a, b) | Formula::Or(a, b) | Formula::And(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }
}

/// A finite distribution over states, in the order written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distribution {
    entries: Vec<(String, Rational)>,
}

impl Distribution {
    /// Checks that all probabilities are positive, states are distinct,
    /// and the probabilities sum to exactly one.
    pub fn new(entries: Vec<(String, Rational)>) -> Result<Self, ModalError> {
        let mut seen = BTreeSet::new();
        let mut total = Rational::zero();
        for (state, p) in &entries {
            if !p.is_positive() {
                return Err(ModalError::NonPositiveProbability {
                    state: state.clone(),
                    probability: format_rational(p),
                });
            }
            if !seen.insert(state.clone()) {
                return Err(ModalError::RepeatedState(state.clone()));
            }
            total += p;
        }
        if !total.is_one() {
            return Err(ModalError::NotNormalized(format_rational(&total)));
        }
        Ok(Distribution { entries })
    }

    pub fn dirac(state: impl Into<String>) -> Self {
        Distribution {
            entries: vec![(state.into(), Rational::one())],
        }
    }

    pub fn entries(&self) -> &[(String, Rational)] {
        &self.entries
    }

    pub fn probability(&self, state: &str) -> Option<&Rational> {
        self.entries.iter().find(|(s, _)| s == state).map(|(_, p)| p)
    }

    /// Order-insensitive identity, used to deduplicate transitions.
    fn key(&self) -> Vec<(String, Rational)> {
        let mut key = self.entries.clone();
        key.sort();
        key
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub source: String,
    pub action: String,
    pub target: Distribution,
}

impl Transition {
    pub fn new(source: impl Into<String>, action: impl Into<String>, target: Distribution) -> Self {
        Transition {
            source: source.into(),
            action: action.into(),
            target,
        }
    }
}

/// Probabilistic labelled transition system. States are ordered by first
/// appearance: the initial distribution first, then each transition's
/// source and targets in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plts {
    states: Vec<String>,
    transitions: Vec<Transition>,
    initial: Distribution,
}

impl Plts {
    pub fn new(initial: Distribution, transitions: Vec<Transition>) -> Self {
        let mut states: Vec<String> = Vec::new();
        let mut note = |s: &String| {
            if !states.contains(s) {
                states.push(s.clone());
            }
        };
        initial.entries.iter().for_each(|(s, _)| note(s));
        for t in &transitions {
            note(&t.source);
            t.target.entries.iter().for_each(|(s, _)| note(s));
        }
        Plts {
            states,
            transitions,
            initial,
        }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn initial(&self) -> &Distribution {
        &self.initial
    }

    pub fn actions(&self) -> BTreeSet<String> {
        self.transitions.iter().map(|t| t.action.clone()).collect()
    }

    /// The distinct distributions reachable from `state` by `action`.
    pub fn successors(&self, state: &str, action: &str) -> Vec<&Distribution> {
        let mut keys = Vec::new();
        let mut out = Vec::new();
        for t in &self.transitions {
            if t.source == state && t.action == action {
                let key = t.target.key();
                if !keys.contains(&key) {
                    keys.push(key);
                    out.push(&t.target);
                }
            }
        }
        out
    }
}

/// A finding of [`check_formula`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    UnboundVariable(Var),
    DuplicateBinder(Var),
    /// The model has no transition with this action, so every diamond over
    /// it is `-∞` and every box `∞`.
    UnknownAction(String),
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        !matches!(self, Diagnostic::UnknownAction(_))
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diagnostic::UnboundVariable(x) => write!(f, "error: variable `{x}` is not bound"),
            Diagnostic::DuplicateBinder(x) => write!(f, "error: variable `{x}` is bound more than once"),
            Diagnostic::UnknownAction(a) => {
                write!(f, "warning: action `{a}` does not occur in the model; its diamonds are -inf")
            }
        }
    }
}

/// Closedness, binder uniqueness and, given a model, the action alphabet.
pub fn check_formula(phi: &Formula, model: Option<&Plts>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut bound = Vec::new();
    let mut all_binders = BTreeSet::new();
    scope_check(phi, &mut bound, &mut all_binders, &mut out);
    if let Some(m) = model {
        let known = m.actions();
        out.extend(
            phi.actions()
                .into_iter()
                .filter(|a| !known.contains(a))
                .map(Diagnostic::UnknownAction),
        );
    }
    out
}

fn scope_check(phi: &Formula, bound: &mut Vec<Var>, all: &mut BTreeSet<Var>, out: &mut Vec<Diagnostic>) {
    match phi {
        Formula::Var(x) => {
            let d = Diagnostic::UnboundVariable(x.clone());
            if !bound.contains(x) && !out.contains(&d) {
                out.push(d);
            }
        }
        Formula::Const(_) => {}
        Formula::Scale(_, a) | Formula::Diamond(_, a) | Formula::Box(_, a) => scope_check(a, bound, all, out),
        Formula::Add(a, b) | Formula::Or(a, b) | Formula::And(a, b) => {
            scope_check(a, bound, all, out);
            scope_check(b, bound, all, out);
        }
        Formula::Mu(x, a) | Formula::Nu(x, a) => {
            if !all.insert(x.clone()) {
                out.push(Diagnostic::DuplicateBinder(x.clone()));
            }
            bound.push(x.clone());
            scope_check(a, bound, all, out);
            bound.pop();
        }
    }
}

/// The variable standing for `x` in state `s`.
pub fn state_var(x: &Var, state: &str) -> Var {
    Var::new(format!("{}.{}", x.name(), state))
}

/// Right-hand side expressing the value of `phi` in `state`.
fn rhs(m: &Plts, state: &str, phi: &Formula) -> Expr {
    match phi {
        Formula::Var(x) | Formula::Mu(x, _) | Formula::Nu(x, _) => Expr::Var(state_var(x, state)),
        Formula::Const(d) => Expr::Const(d.clone()),
        Formula::Scale(c, a) => Expr::scale(c.clone(), rhs(m, state, a)),
        Formula::Add(a, b) => Expr::add(rhs(m, state, a), rhs(m, state, b)),
        Formula::Or(a, b) => Expr::max(rhs(m, state, a), rhs(m, state, b)),
        Formula::And(a, b) => Expr::min(rhs(m, state, a), rhs(m, state, b)),
        Formula::Diamond(action, a) => Expr::join_all(expectations(m, state, action, a)),
        Formula::Box(action, a) => Expr::meet_all(expectations(m, state, action, a)),
    }
}

/// One weighted sum per distinct successor distribution.
fn expectations(m: &Plts, state: &str, action: &str, phi: &Formula) -> Vec<Expr> {
    m.successors(state, action)
        .into_iter()
        .map(|d| weighted_sum(m, d, phi))
        .collect()
}

/// `Σ d(s)·rhs(s, φ)` over the support of `d`, in state order. Weights of
/// one are left out.
fn weighted_sum(m: &Plts, d: &Distribution, phi: &Formula) -> Expr {
    Expr::sum(m.states.iter().filter_map(|s| {
        d.probability(s).map(|p| {
            let term = rhs(m, s, phi);
            if p.is_one() {
                term
            } else {
                Expr::scale(PosRational::new(p.clone()).expect("probabilities are positive"), term)
            }
        })
    }))
}

fn equations(m: &Plts, phi: &Formula, out: &mut Vec<Equation>) {
    match phi {
        Formula::Var(_) | Formula::Const(_) => {}
        Formula::Scale(_, a) | Formula::Diamond(_, a) | Formula::Box(_, a) => equations(m, a, out),
        Formula::Add(a, b) | Formula::Or(a, b) | Formula::And(a, b) => {
            equations(m, a, out);
            equations(m, b, out);
        }
        Formula::Mu(x, a) | Formula::Nu(x, a) => {
            let op = if matches!(phi, Formula::Mu(..)) { FixOp::Mu } else { FixOp::Nu };
            for s in &m.states {
                out.push(Equation::new(op, state_var(x, s), rhs(m, s, a)));
            }
            equations(m, a, out);
        }
    }
}

/// Translates `phi` over `m` into the system
/// `μ X_init = Σ d0(s)·rhs(s, φ), Eq(φ)`.
pub fn translate(phi: &Formula, m: &Plts) -> Result<Res, ModalError> {
    if let Some(d) = check_formula(phi, None).into_iter().find(Diagnostic::is_error) {
        return Err(match d {
            Diagnostic::UnboundVariable(x) => ModalError::UnboundVariable(x),
            Diagnostic::DuplicateBinder(x) => ModalError::DuplicateBinder(x),
            Diagnostic::UnknownAction(_) => unreachable!("warnings are filtered out"),
        });
    }
    let mut eqs = vec![Equation::new(FixOp::Mu, INIT_VAR, weighted_sum(m, &m.initial, phi))];
    equations(m, phi, &mut eqs);
    Ok(Res::new(eqs)?)
}

/// The value of `phi` in `m`: the solution for [`INIT_VAR`].
pub fn evaluate_formula(phi: &Formula, m: &Plts) -> Result<ExtReal, ModalError> {
    let system = translate(phi, m)?;
    let solved = gauss_solve(&system)?;
    Ok(solved.value(INIT_VAR).expect("initial equation is bound").clone())
}

/// Models and formulas of the worked applications, shared by tests and
/// benchmarks.
pub mod examples {
    use super::*;

    fn edge(s: &str, a: &str, t: &str) -> Transition {
        Transition::new(s, a, Distribution::dirac(t))
    }

    fn split(pairs: &[(&str, i64, i64)]) -> Distribution {
        Distribution::new(
            pairs
                .iter()
                .map(|(s, n, d)| (s.to_string(), Rational::new((*n).into(), (*d).into())))
                .collect(),
        )
        .expect("well-formed distribution")
    }

    /// Six states; `s3` has a `b`-loop, `a`-paths of lengths up to three.
    pub fn a_sequence_model() -> Plts {
        Plts::new(
            Distribution::dirac("s1"),
            vec![
                edge("s1", "a", "s2"),
                edge("s1", "a", "s3"),
                edge("s1", "a", "s4"),
                edge("s1", "a", "s6"),
                edge("s2", "a", "s3"),
                edge("s3", "b", "s3"),
                edge("s4", "a", "s5"),
                edge("s5", "a", "s6"),
            ],
        )
    }

    /// `μX.(1 + ⟨a⟩X) ∨ (0 ∧ νY.⟨b⟩Y)`: the longest `a`-sequence to a
    /// `b`-loop.
    pub fn a_sequence_formula() -> Formula {
        Formula::mu(
            "X",
            Formula::or(
                Formula::add(Formula::constant(1), Formula::diamond("a", Formula::var("X"))),
                Formula::and(Formula::constant(0), Formula::nu("Y", Formula::diamond("b", Formula::var("Y")))),
            ),
        )
    }

    /// Two probabilistic `a`-choices from `s1`; `s2` and `s4` have
    /// `b`-loops.
    pub fn loop_probability_model() -> Plts {
        Plts::new(
            Distribution::dirac("s1"),
            vec![
                Transition::new("s1", "a", split(&[("s2", 1, 3), ("s3", 2, 3)])),
                Transition::new("s1", "a", split(&[("s4", 1, 2), ("s5", 1, 2)])),
                edge("s2", "b", "s2"),
                edge("s4", "b", "s4"),
            ],
        )
    }

    /// `μX.⟨a⟩X ∨ ⟨b⟩X ∨ ((νY.⟨b⟩Y ∨ 0) ∧ 1)`: maximal probability of
    /// reaching a `b`-loop.
    pub fn loop_probability_formula() -> Formula {
        Formula::mu(
            "X",
            Formula::or(
                Formula::or(
                    Formula::diamond("a", Formula::var("X")),
                    Formula::diamond("b", Formula::var("X")),
                ),
                Formula::and(
                    Formula::or(Formula::nu("Y", Formula::diamond("b", Formula::var("Y"))), Formula::constant(0)),
                    Formula::constant(1),
                ),
            ),
        )
    }

    /// `s1 -a-> s2`, and `s2 -b-> s1`, `s2 -c-> s1`.
    pub fn reward_model() -> Plts {
        Plts::new(
            Distribution::dirac("s1"),
            vec![edge("s1", "a", "s2"), edge("s2", "b", "s1"), edge("s2", "c", "s1")],
        )
    }

    /// `μR.⟨a⟩(R - 1) ∨ ⟨b⟩(1/2·R + 5) ∨ ⟨c⟩(9/10·R + 2) ∨ 0`: the maximal
    /// stable reward.
    pub fn reward_formula() -> Formula {
        let r = || Formula::var("R");
        Formula::mu(
            "R",
            Formula::or(
                Formula::or(
                    Formula::or(
                        Formula::diamond("a", Formula::add(r(), Formula::constant(-1))),
                        Formula::diamond(
                            "b",
                            Formula::add(Formula::scale(PosRational::ratio(1, 2), r()), Formula::constant(5)),
                        ),
                    ),
                    Formula::diamond(
                        "c",
                        Formula::add(Formula::scale(PosRational::ratio(9, 10), r()), Formula::constant(2)),
                    ),
                ),
                Formula::constant(0),
            ),
        )
    }
}
