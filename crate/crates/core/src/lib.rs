//! Exact symbolic solving of real equation systems: nested least and
//! greatest fixed-point equations over the extended reals, built from
//! variables, constants, positive scaling, addition, minimum, maximum,
//! infinity tests and two conditional operators.
//!
//! The pipeline is: [`syntax`] parses text into a [`res::Res`];
//! [`res::gauss_solve`] eliminates equations one by one, using
//! [`solver::solve_single`] to replace each equation by a closed form
//! obtained from the [`normal_form`] of its right-hand side; [`oracle`]
//! independently checks the result. [`modal`] and [`bes`] translate
//! quantitative modal formulas and boolean equation systems into this
//! setting.

pub mod bes;
pub mod expr;
pub mod extreal;
pub mod modal;
pub mod normal_form;
pub mod oracle;
pub mod parallel;
pub mod random;
pub mod res;
mod simplify;
pub mod solver;
pub mod syntax;

#[cfg(test)]
mod testing;

pub use expr::{evaluate, Expr, Valuation, Var};
pub use extreal::{ExtReal, PosRational, Rational};
pub use normal_form::{to_nf, to_simple_nf, Polarity, NF};
pub use parallel::Execution;
pub use res::{gauss_solve, Equation, FixOp, Gauss, Res, SolvedRes};
pub use solver::solve_single;
