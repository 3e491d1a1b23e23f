//! Expression trees over the extended reals, valuations and evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::extreal::{ExtReal, PosRational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("expression still contains a negation node")]
    NegationPresent,
    #[error("variable `{0}` occurs under an odd number of negations")]
    OddNegation(Var),
}

/// A fixed-point variable name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: impl AsRef<str>) -> Self {
        let name = name.as_ref();
        assert!(!name.is_empty(), "variable names are non-empty");
        Var(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<String> for Var {
    fn from(name: String) -> Self {
        Var(name.into())
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

/// Expression syntax tree. Subtrees are reference counted so substitution
/// can share unchanged parts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Var(Var),
    Const(ExtReal),
    Scale(PosRational, Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Min(Arc<Expr>, Arc<Expr>),
    Max(Arc<Expr>, Arc<Expr>),
    /// `cond(g, a, b)`: `a ∧ b` if `g ≤ 0`, else `b`.
    Cond(Arc<Expr>, Arc<Expr>, Arc<Expr>),
    /// `conda(g, a, b)`: `a` if `g < 0`, else `a ∨ b`.
    CondA(Arc<Expr>, Arc<Expr>, Arc<Expr>),
    EqInf(Arc<Expr>),
    EqNegInf(Arc<Expr>),
    /// Only produced by the parser; removed by [`eliminate_negation`].
    Neg(Arc<Expr>),
}

impl Expr {
    pub fn var(name: impl AsRef<str>) -> Expr {
        Expr::Var(Var::new(name))
    }

    pub fn constant(value: impl Into<ExtReal>) -> Expr {
        Expr::Const(value.into())
    }

    pub fn neg_inf() -> Expr {
        Expr::Const(ExtReal::NegInf)
    }

    pub fn pos_inf() -> Expr {
        Expr::Const(ExtReal::PosInf)
    }

    pub fn scale(c: PosRational, e: Expr) -> Expr {
        Expr::Scale(c, Arc::new(e))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Arc::new(a), Arc::new(b))
    }

    pub fn min(a: Expr, b: Expr) -> Expr {
        Expr::Min(Arc::new(a), Arc::new(b))
    }

    pub fn max(a: Expr, b: Expr) -> Expr {
        Expr::Max(Arc::new(a), Arc::new(b))
    }

    pub fn cond(g: Expr, a: Expr, b: Expr) -> Expr {
        Expr::Cond(Arc::new(g), Arc::new(a), Arc::new(b))
    }

    pub fn conda(g: Expr, a: Expr, b: Expr) -> Expr {
        Expr::CondA(Arc::new(g), Arc::new(a), Arc::new(b))
    }

    pub fn eq_inf(e: Expr) -> Expr {
        Expr::EqInf(Arc::new(e))
    }

    pub fn eq_neg_inf(e: Expr) -> Expr {
        Expr::EqNegInf(Arc::new(e))
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::Neg(Arc::new(e))
    }

    /// Right-nested sum; the empty sum is `0`.
    pub fn sum(items: impl IntoIterator<Item = Expr>) -> Expr {
        fold_right(items, Expr::add).unwrap_or_else(|| Expr::constant(0))
    }

    /// Right-nested join; the empty join is `-∞`.
    pub fn join_all(items: impl IntoIterator<Item = Expr>) -> Expr {
        fold_right(items, Expr::max).unwrap_or_else(Expr::neg_inf)
    }

    /// Right-nested meet; the empty meet is `∞`.
    pub fn meet_all(items: impl IntoIterator<Item = Expr>) -> Expr {
        fold_right(items, Expr::min).unwrap_or_else(Expr::pos_inf)
    }

    pub fn as_const(&self) -> Option<&ExtReal> {
        match self {
            Expr::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_conditional(&self) -> bool {
        matches!(self, Expr::Cond(..) | Expr::CondA(..))
    }

    fn children(&self) -> Vec<&Arc<Expr>> {
        match self {
            Expr::Var(_) | Expr::Const(_) => vec![],
            Expr::Scale(_, e) | Expr::EqInf(e) | Expr::EqNegInf(e) | Expr::Neg(e) => vec![e],
            Expr::Add(a, b) | Expr::Min(a, b) | Expr::Max(a, b) => vec![a, b],
            Expr::Cond(g, a, b) | Expr::CondA(g, a, b) => vec![g, a, b],
        }
    }

    /// Rebuilds this node with new children, in [`Expr::children`] order.
    fn with_children(&self, mut kids: Vec<Arc<Expr>>) -> Expr {
        let mut next = || kids.remove(0);
        match self {
            Expr::Var(_) | Expr::Const(_) => self.clone(),
            Expr::Scale(c, _) => Expr::Scale(c.clone(), next()),
            Expr::EqInf(_) => Expr::EqInf(next()),
            Expr::EqNegInf(_) => Expr::EqNegInf(next()),
            Expr::Neg(_) => Expr::Neg(next()),
            Expr::Add(..) => Expr::Add(next(), next()),
            Expr::Min(..) => Expr::Min(next(), next()),
            Expr::Max(..) => Expr::Max(next(), next()),
            Expr::Cond(..) => Expr::Cond(next(), next(), next()),
            Expr::CondA(..) => Expr::CondA(next(), next(), next()),
        }
    }

    /// Number of tree nodes, counting shared subtrees once per occurrence.
    /// Stops counting once `cap` is exceeded.
    pub fn size_capped(&self, cap: usize) -> usize {
        fn go(e: &Expr, cap: usize, acc: &mut usize) {
            *acc += 1;
            if *acc > cap {
                return;
            }
            for c in e.children() {
                go(c, cap, acc);
                if *acc > cap {
                    return;
                }
            }
        }
        let mut acc = 0;
        go(self, cap, &mut acc);
        acc
    }

    pub fn size(&self) -> usize {
        self.size_capped(usize::MAX)
    }

    pub fn contains_negation(&self) -> bool {
        matches!(self, Expr::Neg(_)) || self.children().into_iter().any(|c| c.contains_negation())
    }

    pub fn contains_conditional(&self) -> bool {
        self.is_conditional() || self.children().into_iter().any(|c| c.contains_conditional())
    }

    pub fn mentions(&self, x: &Var) -> bool {
        match self {
            Expr::Var(v) => v == x,
            _ => self.children().into_iter().any(|c| c.mentions(x)),
        }
    }
}

fn fold_right(items: impl IntoIterator<Item = Expr>, op: fn(Expr, Expr) -> Expr) -> Option<Expr> {
    let mut items: Vec<Expr> = items.into_iter().collect();
    let mut acc = items.pop()?;
    while let Some(e) = items.pop() {
        acc = op(e, acc);
    }
    Some(acc)
}

/// A total map from variables to values: unmapped variables read as the
/// default.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Valuation {
    values: BTreeMap<Var, ExtReal>,
    default: ExtReal,
}

impl Default for Valuation {
    fn default() -> Self {
        Valuation::new(ExtReal::NegInf)
    }
}

impl Valuation {
    pub fn new(default: ExtReal) -> Self {
        Valuation {
            values: BTreeMap::new(),
            default,
        }
    }

    pub fn get(&self, x: &Var) -> &ExtReal {
        self.values.get(x).unwrap_or(&self.default)
    }

    pub fn set(&mut self, x: Var, value: ExtReal) {
        self.values.insert(x, value);
    }

    /// `η[X := r]`.
    pub fn updated(&self, x: &Var, value: ExtReal) -> Valuation {
        let mut next = self.clone();
        next.set(x.clone(), value);
        next
    }

    pub fn default_value(&self) -> &ExtReal {
        &self.default
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &ExtReal)> {
        self.values.iter()
    }
}

impl<V: Into<Var>> FromIterator<(V, ExtReal)> for Valuation {
    fn from_iter<I: IntoIterator<Item = (V, ExtReal)>>(iter: I) -> Self {
        let mut val = Valuation::default();
        for (x, v) in iter {
            val.set(x.into(), v);
        }
        val
    }
}

/// Evaluates a negation-free expression.
pub fn evaluate(e: &Expr, env: &Valuation) -> Result<ExtReal, ExprError> {
    Ok(match e {
        Expr::Var(x) => env.get(x).clone(),
        Expr::Const(d) => d.clone(),
        Expr::Scale(c, a) => evaluate(a, env)?.scale(c),
        Expr::Add(a, b) => evaluate(a, env)?.add(&evaluate(b, env)?),
        Expr::Min(a, b) => evaluate(a, env)?.meet(&evaluate(b, env)?),
        Expr::Max(a, b) => evaluate(a, env)?.join(&evaluate(b, env)?),
        Expr::Cond(g, a, b) => {
            ExtReal::cond(&evaluate(g, env)?, &evaluate(a, env)?, &evaluate(b, env)?)
        }
        Expr::CondA(g, a, b) => {
            ExtReal::conda(&evaluate(g, env)?, &evaluate(a, env)?, &evaluate(b, env)?)
        }
        Expr::EqInf(a) => evaluate(a, env)?.eq_inf(),
        Expr::EqNegInf(a) => evaluate(a, env)?.eq_neg_inf(),
        Expr::Neg(_) => return Err(ExprError::NegationPresent),
    })
}

/// Evaluates an expression that may still contain negation, giving `-e` its
/// ordinary meaning.
pub fn evaluate_with_negation(e: &Expr, env: &Valuation) -> ExtReal {
    let ev = |x: &Expr| evaluate_with_negation(x, env);
    match e {
        Expr::Var(x) => env.get(x).clone(),
        Expr::Const(d) => d.clone(),
        Expr::Scale(c, a) => ev(a).scale(c),
        Expr::Add(a, b) => ev(a).add(&ev(b)),
        Expr::Min(a, b) => ev(a).meet(&ev(b)),
        Expr::Max(a, b) => ev(a).join(&ev(b)),
        Expr::Cond(g, a, b) => ExtReal::cond(&ev(g), &ev(a), &ev(b)),
        Expr::CondA(g, a, b) => ExtReal::conda(&ev(g), &ev(a), &ev(b)),
        Expr::EqInf(a) => ev(a).eq_inf(),
        Expr::EqNegInf(a) => ev(a).eq_neg_inf(),
        Expr::Neg(a) => ev(a).negate(),
    }
}

/// Set of variables occurring in `e`.
pub fn occ(e: &Expr) -> BTreeSet<Var> {
    fn go(e: &Expr, acc: &mut BTreeSet<Var>) {
        if let Expr::Var(x) = e {
            acc.insert(x.clone());
        }
        for c in e.children() {
            go(c, acc);
        }
    }
    let mut acc = BTreeSet::new();
    go(e, &mut acc);
    acc
}

/// `e[X := f]`.
pub fn substitute(e: &Expr, x: &Var, f: &Expr) -> Expr {
    let f = Arc::new(f.clone());
    match subst_shared(e, x, &f) {
        Some(changed) => changed,
        None => e.clone(),
    }
}

/// Simultaneous substitution of several variables.
pub fn substitute_all(e: &Expr, map: &BTreeMap<Var, Expr>) -> Expr {
    if map.is_empty() {
        return e.clone();
    }
    let shared: BTreeMap<&Var, Arc<Expr>> = map.iter().map(|(k, v)| (k, Arc::new(v.clone()))).collect();
    subst_all_shared(e, &shared).unwrap_or_else(|| e.clone())
}

fn subst_all_shared(e: &Expr, map: &BTreeMap<&Var, Arc<Expr>>) -> Option<Expr> {
    if let Expr::Var(v) = e {
        return map.get(v).map(|f| (**f).clone());
    }
    let children = e.children();
    let replaced: Vec<Option<Arc<Expr>>> =
        children.iter().map(|c| subst_all_shared(c, map).map(Arc::new)).collect();
    if replaced.iter().all(Option::is_none) {
        return None;
    }
    let kids: Vec<Arc<Expr>> = children
        .iter()
        .zip(replaced)
        .map(|(old, new)| new.unwrap_or_else(|| (*old).clone()))
        .collect();
    Some(e.with_children(kids))
}

// Returns `None` when `x` does not occur, so untouched subtrees keep their Arc.
fn subst_shared(e: &Expr, x: &Var, f: &Arc<Expr>) -> Option<Expr> {
    let re = |a: &Arc<Expr>| -> Option<Arc<Expr>> { subst_shared(a, x, f).map(Arc::new) };
    let pick = |a: &Arc<Expr>, new: &Option<Arc<Expr>>| new.clone().unwrap_or_else(|| a.clone());
    match e {
        Expr::Var(v) if v == x => Some((**f).clone()),
        Expr::Var(_) | Expr::Const(_) => None,
        Expr::Scale(c, a) => re(a).map(|a| Expr::Scale(c.clone(), a)),
        Expr::EqInf(a) => re(a).map(Expr::EqInf),
        Expr::EqNegInf(a) => re(a).map(Expr::EqNegInf),
        Expr::Neg(a) => re(a).map(Expr::Neg),
        Expr::Add(a, b) | Expr::Min(a, b) | Expr::Max(a, b) => {
            let (na, nb) = (re(a), re(b));
            if na.is_none() && nb.is_none() {
                return None;
            }
            let (a, b) = (pick(a, &na), pick(b, &nb));
            Some(match e {
                Expr::Add(..) => Expr::Add(a, b),
                Expr::Min(..) => Expr::Min(a, b),
                _ => Expr::Max(a, b),
            })
        }
        Expr::Cond(g, a, b) | Expr::CondA(g, a, b) => {
            let (ng, na, nb) = (re(g), re(a), re(b));
            if ng.is_none() && na.is_none() && nb.is_none() {
                return None;
            }
            let (g, a, b) = (pick(g, &ng), pick(a, &na), pick(b, &nb));
            Some(if matches!(e, Expr::Cond(..)) {
                Expr::Cond(g, a, b)
            } else {
                Expr::CondA(g, a, b)
            })
        }
    }
}

/// Pushes every negation down to the constants.
///
/// `-(a + b)` has no primary counterpart, so it becomes the conditional
/// expansion of the −∞-dominant sum of `-a` and `-b`.
pub fn eliminate_negation(e: &Expr) -> Result<Expr, ExprError> {
    push_negation(e, false)
}

fn push_negation(e: &Expr, negated: bool) -> Result<Expr, ExprError> {
    let go = |a: &Expr| push_negation(a, negated);
    let flip = |a: &Expr| push_negation(a, !negated);
    Ok(match e {
        Expr::Var(x) if negated => return Err(ExprError::OddNegation(x.clone())),
        Expr::Var(_) => e.clone(),
        Expr::Const(d) if negated => Expr::Const(d.negate()),
        Expr::Const(_) => e.clone(),
        Expr::Scale(c, a) => Expr::scale(c.clone(), go(a)?),
        Expr::Add(a, b) if negated => hat_sum(go(a)?, go(b)?),
        Expr::Add(a, b) => Expr::add(go(a)?, go(b)?),
        Expr::Min(a, b) if negated => Expr::max(go(a)?, go(b)?),
        Expr::Min(a, b) => Expr::min(go(a)?, go(b)?),
        Expr::Max(a, b) if negated => Expr::min(go(a)?, go(b)?),
        Expr::Max(a, b) => Expr::max(go(a)?, go(b)?),
        Expr::Cond(g, a, b) if negated => Expr::conda(go(g)?, go(b)?, go(a)?),
        Expr::Cond(g, a, b) => Expr::cond(go(g)?, go(a)?, go(b)?),
        Expr::CondA(g, a, b) if negated => Expr::cond(go(g)?, go(b)?, go(a)?),
        Expr::CondA(g, a, b) => Expr::conda(go(g)?, go(a)?, go(b)?),
        Expr::EqInf(a) if negated => Expr::eq_neg_inf(go(a)?),
        Expr::EqInf(a) => Expr::eq_inf(go(a)?),
        Expr::EqNegInf(a) if negated => Expr::eq_inf(go(a)?),
        Expr::EqNegInf(a) => Expr::eq_neg_inf(go(a)?),
        Expr::Neg(a) => flip(a)?,
    })
}

/// `a +̂ b = cond(eq₋∞(a), -∞, cond(eq₋∞(b), -∞, a + b))`.
pub fn hat_sum(a: Expr, b: Expr) -> Expr {
    let inner = Expr::cond(Expr::eq_neg_inf(b.clone()), Expr::neg_inf(), Expr::add(a.clone(), b));
    Expr::cond(Expr::eq_neg_inf(a), Expr::neg_inf(), inner)
}
