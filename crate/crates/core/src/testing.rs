//! Proptest strategies shared by the unit tests.

use proptest::prelude::*;

use crate::expr::{Expr, Valuation, Var};
use crate::extreal::{ExtReal, PosRational};
pub use crate::random::ExprShape;
use crate::random::{scale_grid, value_grid};

pub fn arb_ext_real() -> impl Strategy<Value = ExtReal> {
    prop_oneof![
        1 => Just(ExtReal::NegInf),
        1 => Just(ExtReal::PosInf),
        6 => (-40i64..40, 1i64..7).prop_map(|(n, d)| ExtReal::ratio(n, d)),
    ]
}

fn arb_scale() -> impl Strategy<Value = PosRational> {
    proptest::sample::select(scale_grid())
}

/// Random expressions with shrinking towards smaller trees.
pub fn arb_expr(shape: ExprShape) -> impl Strategy<Value = Expr> {
    let vars = shape.vars.clone();
    let leaf = prop_oneof![
        proptest::sample::select(vars).prop_map(Expr::Var),
        proptest::sample::select(value_grid()).prop_map(Expr::Const),
    ];
    let (conditionals, eq_tests) = (shape.conditionals, shape.eq_tests);
    leaf.prop_recursive(shape.max_depth, 48, 3, move |inner| {
        let mut options: Vec<BoxedStrategy<Expr>> = vec![
            (arb_scale(), inner.clone()).prop_map(|(c, a)| Expr::scale(c, a)).boxed(),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)).boxed(),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::min(a, b)).boxed(),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::max(a, b)).boxed(),
        ];
        if eq_tests {
            options.push(inner.clone().prop_map(Expr::eq_inf).boxed());
            options.push(inner.clone().prop_map(Expr::eq_neg_inf).boxed());
        }
        if conditionals {
            options.push(
                (inner.clone(), inner.clone(), inner.clone())
                    .prop_map(|(g, a, b)| Expr::cond(g, a, b))
                    .boxed(),
            );
            options.push(
                (inner.clone(), inner.clone(), inner)
                    .prop_map(|(g, a, b)| Expr::conda(g, a, b))
                    .boxed(),
            );
        }
        proptest::strategy::Union::new(options)
    })
}

/// Expressions with negations in which every variable sits under an even
/// number of them: double negations are wrapped around random subterms
/// and constants are negated singly.
pub fn arb_even_negation_expr() -> impl Strategy<Value = Expr> {
    (arb_expr(ExprShape::with_conditionals()), any::<u64>()).prop_map(|(e, seed)| {
        let mut bits = seed;
        wrap_negations(&e, &mut bits)
    })
}

fn wrap_negations(e: &Expr, bits: &mut u64) -> Expr {
    let mut coin = || {
        *bits = bits.rotate_left(7) ^ 0x9e37_79b9_7f4a_7c15;
        bits.is_multiple_of(3)
    };
    let rebuilt = match e {
        Expr::Const(d) if coin() => Expr::neg(Expr::Const(d.negate())),
        Expr::Var(_) | Expr::Const(_) => e.clone(),
        Expr::Scale(c, a) => Expr::scale(c.clone(), wrap_negations(a, bits)),
        Expr::Add(a, b) => Expr::add(wrap_negations(a, bits), wrap_negations(b, bits)),
        Expr::Min(a, b) => Expr::min(wrap_negations(a, bits), wrap_negations(b, bits)),
        Expr::Max(a, b) => Expr::max(wrap_negations(a, bits), wrap_negations(b, bits)),
        Expr::Cond(g, a, b) => Expr::cond(wrap_negations(g, bits), wrap_negations(a, bits), wrap_negations(b, bits)),
        Expr::CondA(g, a, b) => Expr::conda(wrap_negations(g, bits), wrap_negations(a, bits), wrap_negations(b, bits)),
        Expr::EqInf(a) => Expr::eq_inf(wrap_negations(a, bits)),
        Expr::EqNegInf(a) => Expr::eq_neg_inf(wrap_negations(a, bits)),
        Expr::Neg(a) => Expr::neg(wrap_negations(a, bits)),
    };
    let mut coin = || {
        *bits = bits.rotate_left(11) ^ 0x2545_f491_4f6c_dd1d;
        bits.is_multiple_of(4)
    };
    if coin() {
        Expr::neg(Expr::neg(rebuilt))
    } else {
        rebuilt
    }
}

/// Valuations of `X, Y, Z, W` with arbitrary values.
pub fn arb_valuation() -> impl Strategy<Value = Valuation> {
    proptest::collection::vec(arb_ext_real(), 4).prop_map(|values| {
        ["X", "Y", "Z", "W"].into_iter().zip(values).collect()
    })
}

/// Every assignment of grid values to `names`.
pub fn grid_valuations(names: &[&str]) -> Vec<Valuation> {
    let grid = value_grid();
    let mut out = vec![Valuation::default()];
    for name in names {
        let v = Var::new(name);
        out = out
            .into_iter()
            .flat_map(|env| grid.iter().map(|d| env.updated(&v, d.clone())).collect::<Vec<_>>())
            .collect();
    }
    out
}
