//! The extended reals `ℝ ∪ {-∞, ∞}` with exact rational finite values.
//!
//! Addition is ∞-dominant (`-∞ + ∞ = ∞`); [`ExtReal::hat_add`] is the
//! −∞-dominant variant. Both conditional operators and the two infinity
//! tests are defined here so that every other module evaluates through the
//! same primitives.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Arbitrary precision rational used for every finite quantity.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtRealError {
    #[error("scale constant must be strictly positive, got {0}")]
    NonPositiveScale(String),
    #[error("malformed number literal `{0}`")]
    BadLiteral(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// A value of the extended reals.
///
/// The derived order is the intended total order: `NegInf` is below every
/// finite value, which are in turn below `PosInf`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtReal {
    NegInf,
    Finite(Rational),
    PosInf,
}

impl ExtReal {
    pub fn zero() -> Self {
        ExtReal::Finite(Rational::zero())
    }

    pub fn int(n: i64) -> Self {
        ExtReal::Finite(Rational::from_integer(BigInt::from(n)))
    }

    /// `n/d` in lowest terms. Panics on `d == 0`.
    pub fn ratio(n: i64, d: i64) -> Self {
        ExtReal::Finite(Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn finite(r: Rational) -> Self {
        ExtReal::Finite(r)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_pos_inf(&self) -> bool {
        matches!(self, ExtReal::PosInf)
    }

    pub fn is_neg_inf(&self) -> bool {
        matches!(self, ExtReal::NegInf)
    }

    pub fn as_finite(&self) -> Option<&Rational> {
        match self {
            ExtReal::Finite(r) => Some(r),
            _ => None,
        }
    }

    /// Sign relative to zero, with `-∞ < 0 < ∞`.
    pub fn signum(&self) -> Ordering {
        match self {
            ExtReal::NegInf => Ordering::Less,
            ExtReal::PosInf => Ordering::Greater,
            ExtReal::Finite(r) => r.cmp(&Rational::zero()),
        }
    }

    /// ∞-dominant addition.
    pub fn add(&self, other: &ExtReal) -> ExtReal {
        match (self, other) {
            (ExtReal::PosInf, _) | (_, ExtReal::PosInf) => ExtReal::PosInf,
            (ExtReal::NegInf, _) | (_, ExtReal::NegInf) => ExtReal::NegInf,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
        }
    }

    /// −∞-dominant addition.
    pub fn hat_add(&self, other: &ExtReal) -> ExtReal {
        match (self, other) {
            (ExtReal::NegInf, _) | (_, ExtReal::NegInf) => ExtReal::NegInf,
            (ExtReal::PosInf, _) | (_, ExtReal::PosInf) => ExtReal::PosInf,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
        }
    }

    pub fn scale(&self, c: &PosRational) -> ExtReal {
        match self {
            ExtReal::Finite(r) => ExtReal::Finite(r * c.value()),
            inf => inf.clone(),
        }
    }

    pub fn meet(&self, other: &ExtReal) -> ExtReal {
        if self <= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn join(&self, other: &ExtReal) -> ExtReal {
        if self >= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// `cond(g, a, b)`: `a ∧ b` when `g ≤ 0`, otherwise `b`.
    pub fn cond(guard: &ExtReal, a: &ExtReal, b: &ExtReal) -> ExtReal {
        if guard.signum() != Ordering::Greater {
            a.meet(b)
        } else {
            b.clone()
        }
    }

    /// `conda(g, a, b)`: `a` when `g < 0`, otherwise `a ∨ b`.
    pub fn conda(guard: &ExtReal, a: &ExtReal, b: &ExtReal) -> ExtReal {
        if guard.signum() == Ordering::Less {
            a.clone()
        } else {
            a.join(b)
        }
    }

    pub fn eq_inf(&self) -> ExtReal {
        if self.is_pos_inf() {
            ExtReal::PosInf
        } else {
            ExtReal::NegInf
        }
    }

    pub fn eq_neg_inf(&self) -> ExtReal {
        if self.is_neg_inf() {
            ExtReal::NegInf
        } else {
            ExtReal::PosInf
        }
    }

    pub fn negate(&self) -> ExtReal {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::PosInf => ExtReal::NegInf,
            ExtReal::Finite(r) => ExtReal::Finite(-r),
        }
    }
}

impl From<i64> for ExtReal {
    fn from(n: i64) -> Self {
        ExtReal::int(n)
    }
}

impl From<Rational> for ExtReal {
    fn from(r: Rational) -> Self {
        ExtReal::Finite(r)
    }
}

/// Renders a rational as an integer or `p/q` in lowest terms.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses an unsigned-or-signed integer or `p/q` literal.
pub fn parse_rational(s: &str) -> Result<Rational, ExtRealError> {
    let bad = || ExtRealError::BadLiteral(s.to_string());
    let valid_int = |t: &str| {
        let digits = t.strip_prefix('-').unwrap_or(t);
        !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
    };
    match s.split_once('/') {
        None => {
            if !valid_int(s) {
                return Err(bad());
            }
            Ok(Rational::from_integer(s.parse::<BigInt>().map_err(|_| bad())?))
        }
        Some((n, d)) => {
            if !valid_int(n) || d.is_empty() || !d.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let n: BigInt = n.parse().map_err(|_| bad())?;
            let d: BigInt = d.parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(ExtRealError::ZeroDenominator(s.to_string()));
            }
            Ok(Rational::new(n, d))
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => f.write_str("-inf"),
            ExtReal::PosInf => f.write_str("inf"),
            ExtReal::Finite(r) => f.write_str(&format_rational(r)),
        }
    }
}

impl FromStr for ExtReal {
    type Err = ExtRealError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" => Ok(ExtReal::PosInf),
            "-inf" => Ok(ExtReal::NegInf),
            _ => parse_rational(s).map(ExtReal::Finite),
        }
    }
}

/// A strictly positive rational, the only kind of constant allowed as a
/// multiplier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PosRational(Rational);

impl PosRational {
    pub fn new(r: Rational) -> Result<Self, ExtRealError> {
        if r.is_positive() {
            Ok(PosRational(r))
        } else {
            Err(ExtRealError::NonPositiveScale(format_rational(&r)))
        }
    }

    /// `n/d`; panics if the ratio is not strictly positive.
    pub fn ratio(n: i64, d: i64) -> Self {
        PosRational::new(Rational::new(BigInt::from(n), BigInt::from(d)))
            .expect("positive ratio")
    }

    pub fn one() -> Self {
        PosRational(Rational::one())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn into_inner(self) -> Rational {
        self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn mul(&self, other: &PosRational) -> PosRational {
        PosRational(&self.0 * &other.0)
    }

    pub fn recip(&self) -> PosRational {
        PosRational(self.0.recip())
    }
}

impl fmt::Display for PosRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl FromStr for PosRational {
    type Err = ExtRealError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PosRational::new(parse_rational(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> ExtReal {
        ExtReal::ratio(n, d)
    }

    /// The −∞-dominant sum written as the conditional expression it abbreviates.
    fn hat_add_by_definition(a: &ExtReal, b: &ExtReal) -> ExtReal {
        let inner = ExtReal::cond(&b.eq_neg_inf(), &ExtReal::NegInf, &a.add(b));
        ExtReal::cond(&a.eq_neg_inf(), &ExtReal::NegInf, &inner)
    }

    #[test]
    fn addition_table() {
        assert_eq!(ExtReal::int(3).add(&ExtReal::int(5)), ExtReal::int(8));
        assert_eq!(ExtReal::NegInf.add(&ExtReal::PosInf), ExtReal::PosInf);
        assert_eq!(ExtReal::NegInf.add(&ExtReal::int(4)), ExtReal::NegInf);
    }

    #[test]
    fn hat_addition_table() {
        assert_eq!(ExtReal::PosInf.hat_add(&ExtReal::NegInf), ExtReal::NegInf);
        assert_eq!(ExtReal::int(2).hat_add(&ExtReal::int(3)), ExtReal::int(5));
        assert_eq!(ExtReal::PosInf.hat_add(&ExtReal::int(1)), ExtReal::PosInf);
        assert_eq!(
            hat_add_by_definition(&ExtReal::PosInf, &ExtReal::int(1)),
            ExtReal::PosInf
        );
    }

    #[test]
    fn scaling_keeps_infinities() {
        let half = PosRational::ratio(1, 2);
        assert_eq!(ExtReal::PosInf.scale(&half), ExtReal::PosInf);
        assert_eq!(ExtReal::int(3).scale(&PosRational::ratio(2, 1)), ExtReal::int(6));
        assert_eq!(ExtReal::NegInf.scale(&PosRational::ratio(3, 1)), ExtReal::NegInf);
        assert!(PosRational::new(Rational::zero()).is_err());
        assert!("-1/2".parse::<PosRational>().is_err());
    }

    #[test]
    fn lattice_operations() {
        assert_eq!(ExtReal::NegInf.meet(&ExtReal::int(7)), ExtReal::NegInf);
        assert_eq!(r(21, 5).join(&r(32, 5)), r(32, 5));
        assert_eq!(ExtReal::PosInf.join(&ExtReal::zero()), ExtReal::PosInf);
        assert!(ExtReal::NegInf < r(-1000, 1));
        assert!(r(1000, 1) < ExtReal::PosInf);
    }

    #[test]
    fn conditionals() {
        let (two, five) = (ExtReal::int(2), ExtReal::int(5));
        assert_eq!(ExtReal::cond(&ExtReal::zero(), &two, &five), two);
        assert_eq!(ExtReal::cond(&ExtReal::int(1), &two, &five), five);
        assert_eq!(
            ExtReal::cond(&ExtReal::NegInf, &ExtReal::PosInf, &ExtReal::int(3)),
            ExtReal::int(3)
        );
        assert_eq!(ExtReal::conda(&ExtReal::int(-1), &two, &five), two);
        assert_eq!(ExtReal::conda(&ExtReal::zero(), &two, &five), five);
        assert_eq!(
            ExtReal::conda(&ExtReal::PosInf, &ExtReal::NegInf, &ExtReal::int(7)),
            ExtReal::int(7)
        );
    }

    #[test]
    fn infinity_tests() {
        assert_eq!(ExtReal::PosInf.eq_inf(), ExtReal::PosInf);
        assert_eq!(ExtReal::int(3).eq_inf(), ExtReal::NegInf);
        assert_eq!(ExtReal::NegInf.eq_neg_inf(), ExtReal::NegInf);
        assert_eq!(ExtReal::int(3).eq_neg_inf(), ExtReal::PosInf);
        assert_eq!(ExtReal::int(5).eq_inf(), ExtReal::int(5).add(&ExtReal::NegInf));
    }

    #[test]
    fn negation() {
        assert_eq!(ExtReal::NegInf.negate(), ExtReal::PosInf);
        assert_eq!(r(3, 4).negate(), r(-3, 4));
        let sum = ExtReal::PosInf.add(&ExtReal::NegInf);
        assert_eq!(sum.negate(), ExtReal::NegInf.hat_add(&ExtReal::PosInf));
        assert_eq!(sum.negate(), ExtReal::NegInf);
    }

    #[test]
    fn text_form() {
        for (text, value) in [
            ("inf", ExtReal::PosInf),
            ("-inf", ExtReal::NegInf),
            ("17", ExtReal::int(17)),
            ("-100/9", r(-100, 9)),
            ("32/5", r(64, 10)),
        ] {
            assert_eq!(text.parse::<ExtReal>().unwrap(), value);
        }
        assert_eq!(r(64, 10).to_string(), "32/5");
        assert_eq!(r(-4, 2).to_string(), "-2");
        assert!("1/0".parse::<ExtReal>().is_err());
        assert!("1.5".parse::<ExtReal>().is_err());
        assert!("/3".parse::<ExtReal>().is_err());
    }

    pub(crate) fn ext_real() -> impl Strategy<Value = ExtReal> {
        prop_oneof![
            1 => Just(ExtReal::NegInf),
            1 => Just(ExtReal::PosInf),
            6 => (-40i64..40, 1i64..7).prop_map(|(n, d)| ExtReal::ratio(n, d)),
        ]
    }

    proptest! {
        #[test]
        fn text_round_trip(v in ext_real()) {
            prop_assert_eq!(v.to_string().parse::<ExtReal>().unwrap(), v);
        }

        #[test]
        fn hat_add_matches_its_definition(a in ext_real(), b in ext_real()) {
            prop_assert_eq!(a.hat_add(&b), hat_add_by_definition(&a, &b));
        }

        #[test]
        fn eq_inf_is_sum_with_neg_inf(a in ext_real()) {
            prop_assert_eq!(a.eq_inf(), a.add(&ExtReal::NegInf));
        }
    }
}
