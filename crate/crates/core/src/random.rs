//! Seeded random instances for differential testing and benchmarks.
//!
//! Every generator takes an explicit RNG, so a seed reproduces an instance
//! exactly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bes::{Bes, BesEquation, BoolExpr};
use crate::expr::{Expr, Valuation, Var};
use crate::extreal::{ExtReal, PosRational};
use crate::res::{Equation, FixOp, Res};

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Values used for constants and valuations: both infinities, zero, and
/// a few rationals of either sign.
pub fn value_grid() -> Vec<ExtReal> {
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

/// Coefficients for scalings.
pub fn scale_grid() -> Vec<PosRational> {
    vec![
        PosRational::ratio(1, 3),
        PosRational::ratio(1, 2),
        PosRational::one(),
        PosRational::ratio(2, 1),
        PosRational::ratio(3, 1),
    ]
}

/// Which constructors a random expression may use.
#[derive(Debug, Clone)]
pub struct ExprShape {
    pub max_depth: u32,
    pub vars: Vec<Var>,
    pub conditionals: bool,
    pub eq_tests: bool,
}

impl ExprShape {
    fn over(names: &[&str], max_depth: u32, conditionals: bool) -> Self {
        ExprShape {
            max_depth,
            vars: names.iter().map(Var::new).collect(),
            conditionals,
            eq_tests: true,
        }
    }

    pub fn without_conditionals() -> Self {
        Self::over(&["X", "Y", "Z", "W"], 4, false)
    }

    pub fn with_conditionals() -> Self {
        Self::over(&["X", "Y", "Z", "W"], 4, true)
    }

    pub fn small() -> Self {
        Self::over(&["X", "Y", "Z", "W"], 2, false)
    }

    pub fn with_vars(mut self, vars: Vec<Var>) -> Self {
        self.vars = vars;
        self
    }

    pub fn with_depth(mut self, max_depth: u32) -> Self {
        self.max_depth = max_depth;
        self
    }
}

fn pick<T: Clone>(rng: &mut Rng8, items: &[T]) -> T {
    items.choose(rng).expect("non-empty choice").clone()
}

fn leaf(rng: &mut Rng8, shape: &ExprShape) -> Expr {
    if !shape.vars.is_empty() && rng.gen_bool(0.6) {
        Expr::Var(pick(rng, &shape.vars))
    } else {
        Expr::Const(pick(rng, &value_grid()))
    }
}

/// A random expression of depth at most `shape.max_depth`.
pub fn expr(rng: &mut Rng8, shape: &ExprShape) -> Expr {
    expr_at(rng, shape, shape.max_depth)
}

fn expr_at(rng: &mut Rng8, shape: &ExprShape, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return leaf(rng, shape);
    }
    let sub = |rng: &mut Rng8| expr_at(rng, shape, depth - 1);
    let mut kinds = vec![0, 1, 2, 3];
    if shape.eq_tests {
        kinds.extend([4, 5]);
    }
    if shape.conditionals {
        kinds.extend([6, 7]);
    }
    match pick(rng, &kinds) {
        0 => Expr::scale(pick(rng, &scale_grid()), sub(rng)),
        1 => Expr::add(sub(rng), sub(rng)),
        2 => Expr::min(sub(rng), sub(rng)),
        3 => Expr::max(sub(rng), sub(rng)),
        4 => Expr::eq_inf(sub(rng)),
        5 => Expr::eq_neg_inf(sub(rng)),
        6 => Expr::cond(sub(rng), sub(rng), sub(rng)),
        _ => Expr::conda(sub(rng), sub(rng), sub(rng)),
    }
}

/// Assigns every variable of `vars` a value from [`value_grid`].
pub fn valuation(rng: &mut Rng8, vars: &[Var]) -> Valuation {
    let grid = value_grid();
    vars.iter().map(|v| (v.clone(), pick(rng, &grid))).collect()
}

/// Coefficients of single-equation instances.
pub fn equation_coefficients() -> Vec<PosRational> {
    vec![
        PosRational::ratio(1, 3),
        PosRational::ratio(1, 2),
        PosRational::one(),
        PosRational::ratio(2, 1),
    ]
}

/// Constants of single-equation instances.
pub fn equation_constants() -> Vec<ExtReal> {
    vec![ExtReal::NegInf, ExtReal::int(-2), ExtReal::zero(), ExtReal::int(1), ExtReal::PosInf]
}

/// One linear atom over `x` and `others`: a sum of scaled variables,
/// occasional infinity tests, and a constant.
fn linear_atom(rng: &mut Rng8, x: &Var, others: &[Var]) -> Expr {
    let coeffs = equation_coefficients();
    let mut terms = Vec::new();
    if rng.gen_bool(0.7) {
        terms.push(Expr::scale(pick(rng, &coeffs), Expr::Var(x.clone())));
    }
    for y in others {
        if rng.gen_bool(0.3) {
            terms.push(Expr::scale(pick(rng, &coeffs), Expr::Var(y.clone())));
        }
    }
    if rng.gen_bool(0.15) {
        let v = if rng.gen_bool(0.5) || others.is_empty() {
            x.clone()
        } else {
            pick(rng, others)
        };
        let test = if rng.gen_bool(0.5) { Expr::eq_neg_inf } else { Expr::eq_inf };
        terms.push(test(Expr::Var(v)));
    }
    if terms.is_empty() || rng.gen_bool(0.8) {
        terms.push(Expr::Const(pick(rng, &equation_constants())));
    }
    Expr::sum(terms)
}

/// A random single equation `op x = e`: at most three clauses of at most
/// three linear atoms, shaped as a meet of joins or a join of meets.
pub fn single_equation(rng: &mut Rng8, others: &[Var]) -> (FixOp, Var, Expr) {
    let x = Var::new("X");
    let op = if rng.gen_bool(0.5) { FixOp::Mu } else { FixOp::Nu };
    let outer_meet = rng.gen_bool(0.5);
    let clauses: Vec<Expr> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let atoms: Vec<Expr> = (0..rng.gen_range(1..=3)).map(|_| linear_atom(rng, &x, others)).collect();
            if outer_meet {
                Expr::join_all(atoms)
            } else {
                Expr::meet_all(atoms)
            }
        })
        .collect();
    let rhs = if outer_meet {
        Expr::meet_all(clauses)
    } else {
        Expr::join_all(clauses)
    };
    (op, x, rhs)
}

fn alternating_ops(rng: &mut Rng8, n: usize) -> Vec<FixOp> {
    let first = if rng.gen_bool(0.5) { FixOp::Mu } else { FixOp::Nu };
    (0..n)
        .map(|i| if i % 2 == 0 { first } else { first.dual() })
        .collect()
}

/// A closed system of one to `max_len` equations with alternating
/// fixed-point signs over the variables `X0, X1, …`.
pub fn closed_res(rng: &mut Rng8, max_len: usize) -> Res {
    let n = rng.gen_range(1..=max_len);
    let vars: Vec<Var> = (0..n).map(|i| Var::new(format!("X{i}"))).collect();
    let shape = ExprShape {
        max_depth: 3,
        vars: vars.clone(),
        conditionals: false,
        eq_tests: true,
    };
    let equations = alternating_ops(rng, n)
        .into_iter()
        .zip(&vars)
        .map(|(op, v)| Equation::new(op, v.clone(), expr(rng, &shape)))
        .collect();
    Res::new(equations).expect("distinct variables")
}

fn bool_expr(rng: &mut Rng8, vars: &[Var], depth: u32) -> BoolExpr {
    if depth == 0 || rng.gen_bool(0.3) {
        return if rng.gen_bool(0.8) {
            BoolExpr::Var(pick(rng, vars))
        } else {
            BoolExpr::Const(rng.gen_bool(0.5))
        };
    }
    let (a, b) = (bool_expr(rng, vars, depth - 1), bool_expr(rng, vars, depth - 1));
    if rng.gen_bool(0.5) {
        BoolExpr::or(a, b)
    } else {
        BoolExpr::and(a, b)
    }
}

/// A closed boolean system of one to `max_len` equations with alternating
/// signs.
pub fn closed_bes(rng: &mut Rng8, max_len: usize) -> Bes {
    let n = rng.gen_range(1..=max_len);
    let vars: Vec<Var> = (0..n).map(|i| Var::new(format!("B{i}"))).collect();
    let equations = alternating_ops(rng, n)
        .into_iter()
        .zip(&vars)
        .map(|(op, v)| BesEquation::new(op, v.clone(), bool_expr(rng, &vars, 3)))
        .collect();
    Bes::new(equations).expect("distinct variables")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_reproduce_instances() {
        let a = closed_res(&mut rng(11), 5);
        let b = closed_res(&mut rng(11), 5);
        assert_eq!(a, b);
        assert!(a.is_closed());
        assert!(closed_bes(&mut rng(3), 6).first_free_variable().is_none());
    }

    #[test]
    fn single_equations_mention_only_known_variables() {
        let others = [Var::new("Y")];
        for seed in 0..50 {
            let (_, x, e) = single_equation(&mut rng(seed), &others);
            assert!(crate::expr::occ(&e).iter().all(|v| *v == x || *v == others[0]));
        }
    }
}
