//! Simple conjunctive/disjunctive normal forms and conditional normal-form
//! trees.
//!
//! A [`SimpleNF`] is a min-of-max (CNF) or max-of-min (DNF) of
//! [`LinearAtom`]s `Σ c·X + Σ eq₋∞(Y) + d`. An [`NF`] is a tree of
//! conditionals whose guards are simple normal forms and whose leaves are
//! simple normal forms of one polarity.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{Expr, ExprError, Valuation, Var};
use crate::extreal::{ExtReal, PosRational};

pub use crate::simplify::simplify;

/// Default bound on the number of atoms a normal form may contain.
pub const DEFAULT_TERM_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalFormError {
    #[error("conditional operator where a simple normal form is required")]
    ConditionalPresent,
    #[error("expression still contains a negation node")]
    NegationPresent,
    #[error("normal form exceeds the term size cap of {cap} atoms")]
    TermBlowup { cap: usize },
    #[error("expression is not a conditional")]
    NotConditional,
}

impl From<ExprError> for NormalFormError {
    fn from(_: ExprError) -> Self {
        NormalFormError::NegationPresent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    /// Conjunction of disjunctions.
    Cnf,
    /// Disjunction of conjunctions.
    Dnf,
}

impl Polarity {
    /// Value of an empty outer list.
    fn outer_empty(self) -> ExtReal {
        match self {
            Polarity::Cnf => ExtReal::PosInf,
            Polarity::Dnf => ExtReal::NegInf,
        }
    }

    /// Value of an empty clause.
    fn inner_empty(self) -> ExtReal {
        match self {
            Polarity::Cnf => ExtReal::NegInf,
            Polarity::Dnf => ExtReal::PosInf,
        }
    }
}

/// `Σ c·X + Σ eq₋∞(Y) + d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinearAtom {
    pub coeffs: BTreeMap<Var, PosRational>,
    pub tests: BTreeSet<Var>,
    pub constant: ExtReal,
}

impl LinearAtom {
    pub fn constant(d: ExtReal) -> Self {
        LinearAtom {
            coeffs: BTreeMap::new(),
            tests: BTreeSet::new(),
            constant: d,
        }
    }

    pub fn var(x: Var) -> Self {
        LinearAtom {
            coeffs: [(x, PosRational::one())].into(),
            tests: BTreeSet::new(),
            constant: ExtReal::zero(),
        }
    }

    pub fn test(x: Var) -> Self {
        LinearAtom {
            coeffs: BTreeMap::new(),
            tests: [x].into(),
            constant: ExtReal::zero(),
        }
    }

    /// The constant value when the atom mentions no variable.
    pub fn as_constant(&self) -> Option<&ExtReal> {
        (self.coeffs.is_empty() && self.tests.is_empty()).then_some(&self.constant)
    }

    pub fn mentions(&self, x: &Var) -> bool {
        self.coeffs.contains_key(x) || self.tests.contains(x)
    }

    pub fn variables(&self) -> impl Iterator<Item = &Var> {
        self.coeffs.keys().chain(self.tests.iter())
    }

    pub fn add(&self, other: &LinearAtom) -> LinearAtom {
        let mut coeffs = self.coeffs.clone();
        for (x, c) in &other.coeffs {
            let merged = match coeffs.get(x) {
                Some(old) => PosRational::new(old.value() + c.value()).expect("sum of positives"),
                None => c.clone(),
            };
            coeffs.insert(x.clone(), merged);
        }
        LinearAtom {
            coeffs,
            tests: self.tests.union(&other.tests).cloned().collect(),
            constant: self.constant.add(&other.constant),
        }
        .canonical()
    }

    /// `c·atom`; the tests are unaffected because they only take ±∞.
    pub fn scale(&self, c: &PosRational) -> LinearAtom {
        LinearAtom {
            coeffs: self.coeffs.iter().map(|(x, k)| (x.clone(), k.mul(c))).collect(),
            tests: self.tests.clone(),
            constant: self.constant.scale(c),
        }
        .canonical()
    }

    /// Rewrites the atom into a canonical representative of its value:
    /// a `∞` constant absorbs everything, `c·X + eq₋∞(X)` equals
    /// `eq₋∞(X)`, and with a `-∞` constant every coefficient is irrelevant.
    pub fn canonical(mut self) -> LinearAtom {
        if self.constant.is_pos_inf() {
            return LinearAtom::constant(ExtReal::PosInf);
        }
        let tests = &self.tests;
        self.coeffs.retain(|x, _| !tests.contains(x));
        if self.constant.is_neg_inf() {
            for c in self.coeffs.values_mut() {
                *c = PosRational::one();
            }
        }
        self
    }

    /// Whether the two atoms differ at most in their constant.
    fn same_shape(&self, other: &LinearAtom) -> bool {
        self.coeffs == other.coeffs && self.tests == other.tests
    }

    /// Pointwise `self ≤ other`, detected syntactically.
    fn below(&self, other: &LinearAtom) -> bool {
        self.same_shape(other) && self.constant <= other.constant
    }

    pub fn evaluate(&self, env: &Valuation) -> ExtReal {
        let mut acc = self.constant.clone();
        for (x, c) in &self.coeffs {
            acc = acc.add(&env.get(x).scale(c));
        }
        for x in &self.tests {
            acc = acc.add(&env.get(x).eq_neg_inf());
        }
        acc
    }

    pub fn to_expr(&self) -> Expr {
        let mut terms: Vec<Expr> = self
            .coeffs
            .iter()
            .map(|(x, c)| {
                if c.is_one() {
                    Expr::Var(x.clone())
                } else {
                    Expr::scale(c.clone(), Expr::Var(x.clone()))
                }
            })
            .collect();
        terms.extend(self.tests.iter().map(|x| Expr::eq_neg_inf(Expr::Var(x.clone()))));
        if terms.is_empty() || self.constant != ExtReal::zero() {
            terms.push(Expr::Const(self.constant.clone()));
        }
        Expr::sum(terms)
    }

    /// `eq₋∞(atom)` as `(⋀ eq₋∞(parts)) ∨ ⋁ eq_∞(parts)`, returned as the
    /// two atom lists.
    fn eq_neg_inf_parts(&self) -> (Vec<LinearAtom>, Vec<LinearAtom>) {
        let mut meet = Vec::new();
        let mut join = Vec::new();
        for x in self.coeffs.keys() {
            meet.push(LinearAtom::test(x.clone()));
            let mut line = LinearAtom::var(x.clone());
            line.constant = ExtReal::NegInf;
            join.push(line);
        }
        for y in &self.tests {
            meet.push(LinearAtom::test(y.clone()));
            join.push(LinearAtom::test(y.clone()));
        }
        // A finite constant contributes ∞ to the meet and -∞ to the join,
        // the respective identities.
        if !self.constant.is_finite() {
            meet.push(LinearAtom::constant(self.constant.eq_neg_inf()));
            join.push(LinearAtom::constant(self.constant.eq_inf()));
        }
        (meet, join)
    }
}

/// A simple normal form of a fixed polarity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimpleNF {
    pub polarity: Polarity,
    pub clauses: Vec<Vec<LinearAtom>>,
}

impl SimpleNF {
    pub fn atom(polarity: Polarity, atom: LinearAtom) -> Self {
        SimpleNF {
            polarity,
            clauses: vec![vec![atom]],
        }
        .simplify()
    }

    pub fn constant(polarity: Polarity, d: ExtReal) -> Self {
        SimpleNF::atom(polarity, LinearAtom::constant(d))
    }

    pub fn var(polarity: Polarity, x: Var) -> Self {
        SimpleNF::atom(polarity, LinearAtom::var(x))
    }

    /// The value when the normal form mentions no variable.
    pub fn as_constant(&self) -> Option<ExtReal> {
        if self.clauses.iter().flatten().all(|a| a.as_constant().is_some()) {
            Some(self.evaluate(&Valuation::default()))
        } else {
            None
        }
    }

    pub fn atom_count(&self) -> usize {
        self.clauses.iter().map(|c| c.len().max(1)).sum::<usize>().max(1)
    }

    pub fn mentions(&self, x: &Var) -> bool {
        self.clauses.iter().flatten().any(|a| a.mentions(x))
    }

    pub fn evaluate(&self, env: &Valuation) -> ExtReal {
        let inner = |clause: &Vec<LinearAtom>| {
            let values = clause.iter().map(|a| a.evaluate(env));
            match self.polarity {
                Polarity::Cnf => values.fold(ExtReal::NegInf, |acc, v| acc.join(&v)),
                Polarity::Dnf => values.fold(ExtReal::PosInf, |acc, v| acc.meet(&v)),
            }
        };
        let values = self.clauses.iter().map(inner);
        match self.polarity {
            Polarity::Cnf => values.fold(ExtReal::PosInf, |acc, v| acc.meet(&v)),
            Polarity::Dnf => values.fold(ExtReal::NegInf, |acc, v| acc.join(&v)),
        }
    }

    pub fn to_expr(&self) -> Expr {
        let inner = |clause: &Vec<LinearAtom>| {
            let atoms = clause.iter().map(LinearAtom::to_expr);
            match self.polarity {
                Polarity::Cnf => Expr::join_all(atoms),
                Polarity::Dnf => Expr::meet_all(atoms),
            }
        };
        let clauses = self.clauses.iter().map(inner);
        match self.polarity {
            Polarity::Cnf => Expr::meet_all(clauses),
            Polarity::Dnf => Expr::join_all(clauses),
        }
    }

    /// Same-polarity concatenation: meet for CNF, join for DNF.
    fn concat(&self, other: &SimpleNF) -> SimpleNF {
        let mut clauses = self.clauses.clone();
        clauses.extend(other.clauses.iter().cloned());
        SimpleNF {
            polarity: self.polarity,
            clauses,
        }
        .simplify()
    }

    /// Cross-polarity combination by distributivity: each pair of clauses
    /// is merged.
    fn cross(&self, other: &SimpleNF, cap: usize) -> Result<SimpleNF, NormalFormError> {
        // Every clause of one side is merged with every clause of the other.
        let atoms = self
            .clauses
            .len()
            .saturating_mul(other.atom_count())
            .saturating_add(other.clauses.len().saturating_mul(self.atom_count()));
        check_cap(atoms, cap)?;
        let mut clauses = Vec::with_capacity(self.clauses.len() * other.clauses.len());
        for a in &self.clauses {
            for b in &other.clauses {
                let mut merged = a.clone();
                merged.extend(b.iter().cloned());
                clauses.push(merged);
            }
        }
        let out = SimpleNF {
            polarity: self.polarity,
            clauses,
        }
        .simplify();
        check_cap(out.atom_count(), cap)?;
        Ok(out)
    }

    pub fn meet(&self, other: &SimpleNF, cap: usize) -> Result<SimpleNF, NormalFormError> {
        debug_assert_eq!(self.polarity, other.polarity);
        match self.polarity {
            Polarity::Cnf => Ok(self.concat(other)),
            Polarity::Dnf => self.cross(other, cap),
        }
    }

    pub fn join(&self, other: &SimpleNF, cap: usize) -> Result<SimpleNF, NormalFormError> {
        debug_assert_eq!(self.polarity, other.polarity);
        match self.polarity {
            Polarity::Cnf => self.cross(other, cap),
            Polarity::Dnf => Ok(self.concat(other)),
        }
    }

    /// Replaces empty lists by explicit constant atoms, so that sums see the
    /// value each empty list stands for.
    fn materialized(&self) -> Vec<Vec<LinearAtom>> {
        if self.clauses.is_empty() {
            return vec![vec![LinearAtom::constant(self.polarity.outer_empty())]];
        }
        self.clauses
            .iter()
            .map(|c| {
                if c.is_empty() {
                    vec![LinearAtom::constant(self.polarity.inner_empty())]
                } else {
                    c.clone()
                }
            })
            .collect()
    }

    /// Sum by distributing `+` over both lattice operators.
    pub fn add(&self, other: &SimpleNF, cap: usize) -> Result<SimpleNF, NormalFormError> {
        debug_assert_eq!(self.polarity, other.polarity);
        let (left, right) = (self.materialized(), other.materialized());
        check_cap(left.len().saturating_mul(right.len()), cap)?;
        let mut clauses = Vec::with_capacity(left.len() * right.len());
        let mut atoms = 0usize;
        for a in &left {
            for b in &right {
                atoms = atoms.saturating_add(a.len() * b.len());
                check_cap(atoms, cap)?;
                clauses.push(
                    a.iter()
                        .flat_map(|x| b.iter().map(move |y| x.add(y)))
                        .collect(),
                );
            }
        }
        Ok(SimpleNF {
            polarity: self.polarity,
            clauses,
        }
        .simplify())
    }

    pub fn scale(&self, c: &PosRational) -> SimpleNF {
        SimpleNF {
            polarity: self.polarity,
            clauses: self
                .clauses
                .iter()
                .map(|cl| cl.iter().map(|a| a.scale(c)).collect())
                .collect(),
        }
        .simplify()
    }

    /// `eq_∞(e) = e + (-∞)`.
    pub fn eq_inf(&self, cap: usize) -> Result<SimpleNF, NormalFormError> {
        self.add(&SimpleNF::constant(self.polarity, ExtReal::NegInf), cap)
    }

    /// `eq₋∞` commutes with both lattice operators, so it is applied atom by
    /// atom and the results are recombined.
    pub fn eq_neg_inf(&self, cap: usize) -> Result<SimpleNF, NormalFormError> {
        let p = self.polarity;
        let combine_all = |atoms: Vec<SimpleNF>, meet: bool| -> Result<SimpleNF, NormalFormError> {
            let unit = if meet { ExtReal::PosInf } else { ExtReal::NegInf };
            let mut acc = SimpleNF::constant(p, unit);
            for a in atoms {
                acc = if meet { acc.meet(&a, cap)? } else { acc.join(&a, cap)? };
            }
            Ok(acc)
        };
        let mut clauses = Vec::new();
        for clause in &self.clauses {
            let mut tested = Vec::new();
            for atom in clause {
                let nf = match atom.as_constant() {
                    Some(d) => SimpleNF::constant(p, d.eq_neg_inf()),
                    None => {
                        let (meet, join) = atom.eq_neg_inf_parts();
                        let lift = |v: Vec<LinearAtom>| v.into_iter().map(|a| SimpleNF::atom(p, a)).collect();
                        combine_all(lift(meet), true)?.join(&combine_all(lift(join), false)?, cap)?
                    }
                };
                tested.push(nf);
            }
            // Within a clause atoms are joined (CNF) or met (DNF).
            clauses.push(combine_all(tested, p == Polarity::Dnf)?);
        }
        combine_all(clauses, p == Polarity::Cnf)
    }

    /// Semantics-preserving cleanup: identity and absorbing constants,
    /// dominated atoms, duplicate and subsumed clauses, canonical order.
    pub fn simplify(&self) -> SimpleNF {
        let mut current = self.clone();
        loop {
            let next = current.simplify_once();
            if next == current {
                return next;
            }
            current = next;
        }
    }

    fn simplify_once(&self) -> SimpleNF {
        let p = self.polarity;
        // Inside a clause: `absorber` makes the clause equal to the outer
        // identity, `identity` atoms can be dropped.
        let (absorber, identity) = (p.outer_empty(), p.inner_empty());
        let mut clauses: Vec<Vec<LinearAtom>> = Vec::new();
        for clause in &self.clauses {
            let mut atoms: Vec<LinearAtom> = Vec::new();
            let mut absorbed = false;
            for atom in clause.iter().cloned().map(LinearAtom::canonical) {
                match atom.as_constant() {
                    Some(d) if *d == absorber => {
                        absorbed = true;
                        break;
                    }
                    Some(d) if *d == identity => continue,
                    _ => {}
                }
                // Keep only the dominating atom among atoms of one shape.
                if let Some(existing) = atoms.iter_mut().find(|a| a.same_shape(&atom)) {
                    let keep_new = match p {
                        Polarity::Cnf => atom.constant > existing.constant,
                        Polarity::Dnf => atom.constant < existing.constant,
                    };
                    if keep_new {
                        *existing = atom;
                    }
                } else {
                    atoms.push(atom);
                }
            }
            if absorbed {
                continue;
            }
            if atoms.is_empty() {
                // The whole form collapses to the value of an empty clause.
                return SimpleNF {
                    polarity: p,
                    clauses: vec![vec![]],
                };
            }
            atoms.sort();
            clauses.push(atoms);
        }
        clauses.sort();
        clauses.dedup();
        if clauses.len() <= ABSORPTION_LIMIT {
            let n = clauses.len();
            let mut redundant = vec![false; n];
            for i in 0..n {
                for j in 0..n {
                    if i != j && !redundant[j] && !redundant[i] && subsumes(p, &clauses[j], &clauses[i]) {
                        redundant[i] = true;
                    }
                }
            }
            let mut k = 0;
            clauses.retain(|_| {
                k += 1;
                !redundant[k - 1]
            });
        }
        SimpleNF { polarity: p, clauses }
    }
}

const ABSORPTION_LIMIT: usize = 2000;

/// Whether clause `keep` makes clause `drop` redundant in the outer
/// combination.
fn subsumes(p: Polarity, keep: &[LinearAtom], drop: &[LinearAtom]) -> bool {
    match p {
        // keep ≤ drop pointwise, so keep ∧ drop = keep.
        Polarity::Cnf => keep.iter().all(|a| drop.iter().any(|b| a.below(b))),
        // drop ≤ keep pointwise, so keep ∨ drop = keep.
        Polarity::Dnf => keep.iter().all(|a| drop.iter().any(|b| b.below(a))),
    }
}

/// Possible signs of a guard, as a bit set.
const NEG: u8 = 1;
const ZERO: u8 = 2;
const POS: u8 = 4;

/// What `path` says about the sign of `guard`; later entries refine earlier
/// ones, so the innermost entry is the most precise.
fn known_signs(path: &[(SimpleNF, u8)], guard: &SimpleNF) -> u8 {
    path.iter()
        .rev()
        .find(|(g, _)| g == guard)
        .map_or(NEG | ZERO | POS, |(_, s)| *s)
}

fn check_cap(size: usize, cap: usize) -> Result<(), NormalFormError> {
    if size > cap {
        Err(NormalFormError::TermBlowup { cap })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CondKind {
    /// `cond(g, a, b)`: `a ∧ b` if `g ≤ 0`, else `b`.
    Cond,
    /// `conda(g, a, b)`: `a` if `g < 0`, else `a ∨ b`.
    CondA,
}

impl CondKind {
    pub fn apply(self, g: &ExtReal, a: &ExtReal, b: &ExtReal) -> ExtReal {
        match self {
            CondKind::Cond => ExtReal::cond(g, a, b),
            CondKind::CondA => ExtReal::conda(g, a, b),
        }
    }

    pub fn build(self, g: Expr, a: Expr, b: Expr) -> Expr {
        match self {
            CondKind::Cond => Expr::cond(g, a, b),
            CondKind::CondA => Expr::conda(g, a, b),
        }
    }
}

/// A normal form: a tree of conditionals with simple normal forms as guards
/// and leaves.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NF {
    Leaf(SimpleNF),
    Cond {
        kind: CondKind,
        guard: SimpleNF,
        then: Arc<NF>,
        other: Arc<NF>,
    },
}

impl NF {
    pub fn polarity(&self) -> Polarity {
        match self {
            NF::Leaf(s) => s.polarity,
            NF::Cond { guard, .. } => guard.polarity,
        }
    }

    pub fn as_leaf(&self) -> Option<&SimpleNF> {
        match self {
            NF::Leaf(s) => Some(s),
            NF::Cond { .. } => None,
        }
    }

    pub fn evaluate(&self, env: &Valuation) -> ExtReal {
        match self {
            NF::Leaf(s) => s.evaluate(env),
            NF::Cond { kind, guard, then, other } => {
                kind.apply(&guard.evaluate(env), &then.evaluate(env), &other.evaluate(env))
            }
        }
    }

    pub fn to_expr(&self) -> Expr {
        match self {
            NF::Leaf(s) => s.to_expr(),
            NF::Cond { kind, guard, then, other } => {
                kind.build(guard.to_expr(), then.to_expr(), other.to_expr())
            }
        }
    }

    /// Number of atoms, counting shared subtrees once per occurrence;
    /// stops once `cap` is exceeded.
    pub fn size_capped(&self, cap: usize) -> usize {
        fn go(nf: &NF, cap: usize, acc: &mut usize) {
            if *acc > cap {
                return;
            }
            match nf {
                NF::Leaf(s) => *acc += s.atom_count(),
                NF::Cond { guard, then, other, .. } => {
                    *acc += guard.atom_count();
                    go(then, cap, acc);
                    go(other, cap, acc);
                }
            }
        }
        let mut acc = 0;
        go(self, cap, &mut acc);
        acc
    }

    /// Largest number of nested conditionals along any path.
    fn collect_guards<'a>(&'a self, out: &mut BTreeSet<&'a SimpleNF>) {
        if let NF::Cond { guard, then, other, .. } = self {
            out.insert(guard);
            then.collect_guards(out);
            other.collect_guards(out);
        }
    }

    /// Whether some node of this tree has the given kind and guard.
    pub fn has_node(&self, kind: CondKind, guard: &SimpleNF) -> bool {
        match self {
            NF::Leaf(_) => false,
            NF::Cond { kind: k, guard: g, then, other } => {
                (k == &kind && g == guard) || then.has_node(kind, guard) || other.has_node(kind, guard)
            }
        }
    }

    pub fn conditional_depth(&self) -> usize {
        match self {
            NF::Leaf(_) => 0,
            NF::Cond { then, other, .. } => 1 + then.conditional_depth().max(other.conditional_depth()),
        }
    }
}

/// Rewrites expressions into normal forms of one polarity under a size cap.
#[derive(Debug, Clone, Copy)]
pub struct Normalizer {
    pub polarity: Polarity,
    pub cap: usize,
}

impl Normalizer {
    pub fn new(polarity: Polarity) -> Self {
        Normalizer {
            polarity,
            cap: DEFAULT_TERM_CAP,
        }
    }

    pub fn with_cap(polarity: Polarity, cap: usize) -> Self {
        Normalizer { polarity, cap }
    }

    /// Normal form of a conditional-free expression.
    pub fn simple(&self, e: &Expr) -> Result<SimpleNF, NormalFormError> {
        let p = self.polarity;
        let cap = self.cap;
        Ok(match e {
            Expr::Var(x) => SimpleNF::var(p, x.clone()),
            Expr::Const(d) => SimpleNF::constant(p, d.clone()),
            Expr::Scale(c, a) => self.simple(a)?.scale(c),
            Expr::Add(a, b) => self.simple(a)?.add(&self.simple(b)?, cap)?,
            Expr::Min(a, b) => self.simple(a)?.meet(&self.simple(b)?, cap)?,
            Expr::Max(a, b) => self.simple(a)?.join(&self.simple(b)?, cap)?,
            Expr::EqInf(a) => self.simple(a)?.eq_inf(cap)?,
            Expr::EqNegInf(a) => self.simple(a)?.eq_neg_inf(cap)?,
            Expr::Cond(..) | Expr::CondA(..) => return Err(NormalFormError::ConditionalPresent),
            Expr::Neg(_) => return Err(NormalFormError::NegationPresent),
        })
    }

    /// Full normal form: operators are pushed into the branches of
    /// conditionals and nested conditionals in guards are collapsed.
    pub fn full(&self, e: &Expr) -> Result<NF, NormalFormError> {
        let cap = self.cap;
        let nf = match e {
            Expr::Var(_) | Expr::Const(_) => NF::Leaf(self.simple(e)?),
            Expr::Scale(c, a) => self.map(&self.full(a)?, &|s| Ok(s.scale(c)))?,
            Expr::Add(a, b) => self.combine(&self.full(a)?, &self.full(b)?, &|x, y| x.add(y, cap))?,
            Expr::Min(a, b) => self.combine(&self.full(a)?, &self.full(b)?, &|x, y| x.meet(y, cap))?,
            Expr::Max(a, b) => self.combine(&self.full(a)?, &self.full(b)?, &|x, y| x.join(y, cap))?,
            Expr::EqInf(a) => self.map(&self.full(a)?, &|s| s.eq_inf(cap))?,
            Expr::EqNegInf(a) => self.map(&self.full(a)?, &|s| s.eq_neg_inf(cap))?,
            Expr::Cond(g, a, b) => {
                self.collapse(CondKind::Cond, &self.full(g)?, Arc::new(self.full(a)?), Arc::new(self.full(b)?))?
            }
            Expr::CondA(g, a, b) => {
                self.collapse(CondKind::CondA, &self.full(g)?, Arc::new(self.full(a)?), Arc::new(self.full(b)?))?
            }
            Expr::Neg(_) => return Err(NormalFormError::NegationPresent),
        };
        let nf = Pruner::new(self).prune(&nf)?;
        check_cap(nf.size_capped(cap), cap)?;
        Ok(nf)
    }

    /// Guard-normalized form of a conditional expression, as an expression.
    pub fn normalize_guard(&self, e: &Expr) -> Result<Expr, NormalFormError> {
        if !e.is_conditional() {
            return Err(NormalFormError::NotConditional);
        }
        Ok(self.full(e)?.to_expr())
    }

    fn map(
        &self,
        nf: &NF,
        f: &dyn Fn(&SimpleNF) -> Result<SimpleNF, NormalFormError>,
    ) -> Result<NF, NormalFormError> {
        match nf {
            NF::Leaf(s) => Ok(NF::Leaf(f(s)?)),
            NF::Cond { kind, guard, then, other } => self.make_cond(
                *kind,
                guard.clone(),
                Arc::new(self.map(then, f)?),
                Arc::new(self.map(other, f)?),
            ),
        }
    }

    fn combine(
        &self,
        a: &NF,
        b: &NF,
        op: &dyn Fn(&SimpleNF, &SimpleNF) -> Result<SimpleNF, NormalFormError>,
    ) -> Result<NF, NormalFormError> {
        match (a, b) {
            (NF::Cond { kind, guard, then, other }, _) => self.make_cond(
                *kind,
                guard.clone(),
                Arc::new(self.combine(then, b, op)?),
                Arc::new(self.combine(other, b, op)?),
            ),
            (NF::Leaf(_), NF::Cond { kind, guard, then, other }) => self.make_cond(
                *kind,
                guard.clone(),
                Arc::new(self.combine(a, then, op)?),
                Arc::new(self.combine(a, other, op)?),
            ),
            (NF::Leaf(x), NF::Leaf(y)) => {
                let out = NF::Leaf(op(x, y)?);
                Ok(out)
            }
        }
    }

    pub(crate) fn meet_nf(&self, a: &NF, b: &NF) -> Result<NF, NormalFormError> {
        let nf = self.combine(a, b, &|x, y| x.meet(y, self.cap))?;
        check_cap(nf.size_capped(self.cap), self.cap)?;
        Pruner::new(self).prune(&nf)
    }

    pub(crate) fn join_nf(&self, a: &NF, b: &NF) -> Result<NF, NormalFormError> {
        let nf = self.combine(a, b, &|x, y| x.join(y, self.cap))?;
        check_cap(nf.size_capped(self.cap), self.cap)?;
        Pruner::new(self).prune(&nf)
    }


    /// Builds a conditional node, resolving constant guards and identical
    /// branches.
    fn make_cond(
        &self,
        kind: CondKind,
        guard: SimpleNF,
        then: Arc<NF>,
        other: Arc<NF>,
    ) -> Result<NF, NormalFormError> {
        if then == other {
            return Ok((*then).clone());
        }
        if let Some(g) = guard.as_constant() {
            let strict = kind == CondKind::CondA;
            let below = if strict { g.signum().is_lt() } else { g.signum().is_le() };
            return match (kind, below) {
                (CondKind::Cond, true) => self.meet_nf(&then, &other),
                (CondKind::Cond, false) => Ok((*other).clone()),
                (CondKind::CondA, true) => Ok((*then).clone()),
                (CondKind::CondA, false) => self.join_nf(&then, &other),
            };
        }
        Ok(NF::Cond { kind, guard, then, other })
    }

    /// `kind(g, a, b)` where the guard `g` is itself a normal-form tree:
    /// nested conditionals in the guard are moved outward until every guard
    /// is simple.
    fn collapse(&self, kind: CondKind, g: &NF, a: Arc<NF>, b: Arc<NF>) -> Result<NF, NormalFormError> {
        let cap = self.cap;
        let NF::Cond { kind: inner, guard: s, then: t1, other: t2 } = g else {
            let NF::Leaf(s) = g else { unreachable!() };
            return self.make_cond(kind, s.clone(), a, b);
        };
        if kind == *inner {
            if let (Some(l1), Some(l2)) = (t1.as_leaf(), t2.as_leaf()) {
                // Same-kind collapse into a single simple guard.
                let guard = match kind {
                    CondKind::Cond => s.join(l1, cap)?.meet(l2, cap)?,
                    CondKind::CondA => l1.join(&s.meet(l2, cap)?, cap)?,
                };
                return self.make_cond(kind, guard, a, b);
            }
        }
        match (kind, inner) {
            (CondKind::Cond, CondKind::Cond) => {
                // cond(cond(s,t1,t2),a,b) = cond(t2, a, cond(s, cond(t1,a,b), b))
                let i1 = Arc::new(self.collapse(CondKind::Cond, t1, a.clone(), b.clone())?);
                let i2 = Arc::new(self.make_cond(CondKind::Cond, s.clone(), i1, b)?);
                self.collapse(CondKind::Cond, t2, a, i2)
            }
            (CondKind::CondA, CondKind::CondA) => {
                // conda(conda(s,t1,t2),a,b) = conda(t1, conda(s, a, conda(t2,a,b)), b)
                let i1 = Arc::new(self.collapse(CondKind::CondA, t2, a.clone(), b.clone())?);
                let i2 = Arc::new(self.make_cond(CondKind::CondA, s.clone(), a, i1)?);
                self.collapse(CondKind::CondA, t1, i2, b)
            }
            (CondKind::CondA, CondKind::Cond) => {
                // conda(cond(s,t1,t2),a,b) = conda(t2, a, cond(s, conda(t1,a,b), a∨b))
                let i1 = Arc::new(self.collapse(CondKind::CondA, t1, a.clone(), b.clone())?);
                let ab = Arc::new(self.join_nf(&a, &b)?);
                let i2 = Arc::new(self.make_cond(CondKind::Cond, s.clone(), i1, ab)?);
                self.collapse(CondKind::CondA, t2, a, i2)
            }
            (CondKind::Cond, CondKind::CondA) => {
                // cond(conda(s,t1,t2),a,b) = cond(t1, conda(s, a, cond(t2,a,b)), b)
                let i1 = Arc::new(self.collapse(CondKind::Cond, t2, a.clone(), b.clone())?);
                let i2 = Arc::new(self.make_cond(CondKind::CondA, s.clone(), a, i1)?);
                self.collapse(CondKind::Cond, t1, i2, b)
            }
        }
    }
}

/// Rewrites conditional nodes whose guard sign is already known from an
/// enclosing node, so that no node has a node of the same kind and
/// guard anywhere below it. The walk records what is known about the sign of
/// each enclosing guard.
///
/// A branch that is evaluated on both sides of its guard (the second one
/// of `cond`, the first one of `conda`) cannot be simplified with either
/// side's knowledge; if it mentions the same guard it is split instead:
///
/// ```text
/// cond(g, t, o)  = cond(g, t ∧ o|g≤0, o|g>0)
/// conda(g, t, o) = conda(g, t|g<0, t|g≥0 ∨ o|g≥0)
/// ```
///
/// Both hold because restricting to the lower side never yields a larger
/// value than restricting to the upper side.
///
/// Afterwards combining the two branches of a node yields a tree without
/// that node's (kind, guard) pair, so the conditional cases of the
/// solver, which recurse on such combinations, terminate.
struct Pruner<'a> {
    norm: &'a Normalizer,
    /// Known signs of enclosing guards; later entries refine earlier ones.
    path: Vec<(SimpleNF, u8)>,
    /// Results by subtree and by what is known about that subtree's guards.
    memo: HashMap<(NF, Vec<(SimpleNF, u8)>), NF>,
}

impl<'a> Pruner<'a> {
    fn new(norm: &'a Normalizer) -> Self {
        Pruner {
            norm,
            path: Vec::new(),
            memo: HashMap::new(),
        }
    }

    /// The part of the path that concerns guards occurring in `nf`.
    fn relevant(&self, nf: &NF) -> Vec<(SimpleNF, u8)> {
        let mut guards = BTreeSet::new();
        nf.collect_guards(&mut guards);
        guards
            .into_iter()
            .filter_map(|g| {
                let s = known_signs(&self.path, g);
                (s != NEG | ZERO | POS).then(|| (g.clone(), s))
            })
            .collect()
    }

    fn combine(&self, a: &NF, b: &NF, join: bool) -> Result<NF, NormalFormError> {
        let cap = self.norm.cap;
        let nf = if join {
            self.norm.combine(a, b, &|x, y| x.join(y, cap))?
        } else {
            self.norm.combine(a, b, &|x, y| x.meet(y, cap))?
        };
        check_cap(nf.size_capped(cap), cap)?;
        Ok(nf)
    }

    fn prune(&mut self, nf: &NF) -> Result<NF, NormalFormError> {
        if matches!(nf, NF::Leaf(_)) {
            return Ok(nf.clone());
        }
        let key = (nf.clone(), self.relevant(nf));
        if let Some(done) = self.memo.get(&key) {
            return Ok(done.clone());
        }
        let out = self.prune_node(nf)?;
        self.memo.insert(key, out.clone());
        Ok(out)
    }

    fn prune_node(&mut self, nf: &NF) -> Result<NF, NormalFormError> {
        let NF::Cond { kind, guard, then, other } = nf else {
            return Ok(nf.clone());
        };
        let signs = known_signs(&self.path, guard);
        match kind {
            CondKind::Cond => {
                if signs & POS == 0 {
                    let (t, o) = (self.prune(then)?, self.prune(other)?);
                    let both = self.combine(&t, &o, false)?;
                    return self.prune(&both);
                }
                if signs & (NEG | ZERO) == 0 {
                    return self.prune(other);
                }
                let t = self.under(guard, NEG | ZERO, |p| p.prune(then))?;
                let o = self.prune(other)?;
                if !o.has_node(CondKind::Cond, guard) {
                    return self.norm.make_cond(CondKind::Cond, guard.clone(), Arc::new(t), Arc::new(o));
                }
                let o_le = self.under(guard, NEG | ZERO, |p| p.prune(&o))?;
                let o_gt = self.under(guard, POS, |p| p.prune(&o))?;
                let first = self.combine(&t, &o_le, false)?;
                let first = self.under(guard, NEG | ZERO, |p| p.prune(&first))?;
                self.norm.make_cond(CondKind::Cond, guard.clone(), Arc::new(first), Arc::new(o_gt))
            }
            CondKind::CondA => {
                if signs & (ZERO | POS) == 0 {
                    return self.prune(then);
                }
                if signs & NEG == 0 {
                    let (t, o) = (self.prune(then)?, self.prune(other)?);
                    let either = self.combine(&t, &o, true)?;
                    return self.prune(&either);
                }
                let o = self.under(guard, ZERO | POS, |p| p.prune(other))?;
                let t = self.prune(then)?;
                if !t.has_node(CondKind::CondA, guard) {
                    return self.norm.make_cond(CondKind::CondA, guard.clone(), Arc::new(t), Arc::new(o));
                }
                let t_lt = self.under(guard, NEG, |p| p.prune(&t))?;
                let t_ge = self.under(guard, ZERO | POS, |p| p.prune(&t))?;
                let second = self.combine(&t_ge, &o, true)?;
                let second = self.under(guard, ZERO | POS, |p| p.prune(&second))?;
                self.norm.make_cond(CondKind::CondA, guard.clone(), Arc::new(t_lt), Arc::new(second))
            }
        }
    }

    /// Runs `f` with the additional knowledge that the sign of `guard` lies
    /// in `signs`.
    fn under<R>(&mut self, guard: &SimpleNF, signs: u8, f: impl FnOnce(&mut Self) -> R) -> R {
        let signs = known_signs(&self.path, guard) & signs;
        self.path.push((guard.clone(), signs));
        let out = f(self);
        self.path.pop();
        out
    }
}

/// Simple normal form of a conditional-free expression.
pub fn to_simple_nf(e: &Expr, polarity: Polarity) -> Result<SimpleNF, NormalFormError> {
    Normalizer::new(polarity).simple(e)
}

/// Full normal form of a negation-free expression.
pub fn to_nf(e: &Expr, polarity: Polarity) -> Result<NF, NormalFormError> {
    Normalizer::new(polarity).full(e)
}

/// Equivalent conditional whose guards are all simple normal forms.
pub fn normalize_guard(e: &Expr, polarity: Polarity) -> Result<Expr, NormalFormError> {
    Normalizer::new(polarity).normalize_guard(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::evaluate;
    use crate::testing::{arb_expr, arb_valuation, grid_valuations, ExprShape};
    use proptest::prelude::*;

    fn x() -> Expr {
        Expr::var("X")
    }
    fn y() -> Expr {
        Expr::var("Y")
    }
    fn k(n: i64) -> Expr {
        Expr::constant(n)
    }

    fn assert_equivalent(a: &Expr, b: &Expr) {
        for env in grid_valuations(&["X", "Y", "Z"]) {
            assert_eq!(evaluate(a, &env).unwrap(), evaluate(b, &env).unwrap(), "at {env:?}");
        }
    }

    #[test]
    fn distributes_join_over_meet() {
        let nf = to_simple_nf(&Expr::max(x(), Expr::min(y(), k(2))), Polarity::Cnf).unwrap();
        let expected = SimpleNF {
            polarity: Polarity::Cnf,
            clauses: vec![
                vec![LinearAtom::constant(ExtReal::int(2)), LinearAtom::var(Var::new("X"))],
                vec![LinearAtom::var(Var::new("X")), LinearAtom::var(Var::new("Y"))],
            ],
        }
        .simplify();
        assert_eq!(nf, expected);
        assert_equivalent(&nf.to_expr(), &Expr::min(Expr::max(x(), y()), Expr::max(x(), k(2))));
    }

    #[test]
    fn distributes_addition_over_meet() {
        let nf = to_simple_nf(&Expr::add(Expr::min(x(), y()), k(3)), Polarity::Cnf).unwrap();
        assert_eq!(nf.clauses.len(), 2);
        assert!(nf.clauses.iter().all(|c| c.len() == 1 && c[0].constant == ExtReal::int(3)));
        assert_equivalent(
            &nf.to_expr(),
            &Expr::min(Expr::add(x(), k(3)), Expr::add(y(), k(3))),
        );
    }

    #[test]
    fn distributes_scaling_over_join() {
        let two = PosRational::ratio(2, 1);
        let nf = to_simple_nf(&Expr::scale(two.clone(), Expr::max(x(), k(1))), Polarity::Dnf).unwrap();
        assert_eq!(nf.clauses.len(), 2);
        assert_equivalent(&nf.to_expr(), &Expr::max(Expr::scale(two, x()), k(2)));
    }

    #[test]
    fn simple_form_rejects_conditionals() {
        let e = Expr::cond(x(), k(1), k(2));
        assert_eq!(to_simple_nf(&e, Polarity::Cnf), Err(NormalFormError::ConditionalPresent));
        assert_eq!(
            to_simple_nf(&Expr::neg(x()), Polarity::Dnf),
            Err(NormalFormError::NegationPresent)
        );
    }

    #[test]
    fn nested_guards_collapse() {
        let e = Expr::cond(Expr::cond(x(), k(1), k(2)), y(), Expr::var("Z"));
        let out = normalize_guard(&e, Polarity::Cnf).unwrap();
        let expected = Expr::cond(Expr::min(Expr::max(x(), k(1)), k(2)), y(), Expr::var("Z"));
        assert_equivalent(&out, &expected);
        let Expr::Cond(g, _, _) = &out else { panic!("expected cond, got {out:?}") };
        assert!(!g.contains_conditional());

        let e = Expr::conda(Expr::conda(x(), k(1), k(2)), y(), Expr::var("Z"));
        let out = normalize_guard(&e, Polarity::Cnf).unwrap();
        assert_equivalent(&out, &Expr::conda(Expr::max(k(1), Expr::min(x(), k(2))), y(), Expr::var("Z")));

        let scaled = Expr::scale(PosRational::ratio(5, 1), Expr::cond(x(), k(0), k(1)));
        let e = Expr::cond(scaled, y(), Expr::var("Z"));
        let out = normalize_guard(&e, Polarity::Dnf).unwrap();
        let five_x = Expr::scale(PosRational::ratio(5, 1), x());
        assert_equivalent(&out, &Expr::cond(Expr::min(Expr::max(five_x, k(0)), k(5)), y(), Expr::var("Z")));
        assert_eq!(normalize_guard(&x(), Polarity::Cnf), Err(NormalFormError::NotConditional));
    }

    #[test]
    fn mixed_guard_collapse_is_sound() {
        // Nesting of opposite kinds in guard position.
        let (a, b) = (y(), Expr::var("Z"));
        for inner in [Expr::cond(x(), k(1), k(-1)), Expr::conda(x(), k(-1), k(5))] {
            for outer in [CondKind::Cond, CondKind::CondA] {
                let e = outer.build(inner.clone(), a.clone(), b.clone());
                for p in [Polarity::Cnf, Polarity::Dnf] {
                    assert_equivalent(&to_nf(&e, p).unwrap().to_expr(), &e);
                }
            }
        }
    }

    #[test]
    fn operators_push_into_branches() {
        let e = Expr::add(Expr::cond(x(), k(1), k(2)), k(5));
        let nf = to_nf(&e, Polarity::Cnf).unwrap();
        assert_eq!(
            nf.to_expr(),
            Expr::cond(x(), k(6), k(7)),
        );
        let nf = to_nf(&Expr::max(x(), k(3)), Polarity::Cnf).unwrap();
        assert_eq!(nf.as_leaf().unwrap().clauses.len(), 1);
        assert_eq!(nf.as_leaf().unwrap().clauses[0].len(), 2);
        let e = Expr::eq_inf(Expr::cond(x(), y(), Expr::var("Z")));
        let nf = to_nf(&e, Polarity::Dnf).unwrap();
        let NF::Cond { then, other, .. } = &nf else { panic!("expected conditional") };
        assert!(then.as_leaf().is_some() && other.as_leaf().is_some());
        assert_equivalent(&nf.to_expr(), &e);
    }

    #[test]
    fn constant_guards_fold() {
        let e = Expr::cond(k(1), x(), y());
        assert_eq!(to_nf(&e, Polarity::Cnf).unwrap().to_expr(), y());
        let e = Expr::conda(k(-1), x(), y());
        assert_eq!(to_nf(&e, Polarity::Cnf).unwrap().to_expr(), x());
    }

    #[test]
    fn eq_neg_inf_of_sums() {
        let e = Expr::eq_neg_inf(Expr::add(Expr::scale(PosRational::ratio(1, 2), x()), y()));
        for p in [Polarity::Cnf, Polarity::Dnf] {
            assert_equivalent(&to_simple_nf(&e, p).unwrap().to_expr(), &e);
        }
        let e = Expr::eq_neg_inf(Expr::add(x(), Expr::neg_inf()));
        assert_equivalent(&to_simple_nf(&e, Polarity::Cnf).unwrap().to_expr(), &e);
    }

    #[test]
    fn empty_lists_survive_sums() {
        // -∞ + ∞ must stay ∞ in both polarities.
        let e = Expr::add(Expr::min(x(), Expr::neg_inf()), Expr::max(y(), Expr::pos_inf()));
        for p in [Polarity::Cnf, Polarity::Dnf] {
            assert_equivalent(&to_simple_nf(&e, p).unwrap().to_expr(), &e);
        }
    }

    #[test]
    fn blowup_is_reported() {
        let mut e = Expr::max(x(), y());
        for i in 0..12 {
            let v = Expr::var(format!("V{i}"));
            e = Expr::min(e, Expr::max(v, Expr::var(format!("W{i}"))));
        }
        let tight = Normalizer::with_cap(Polarity::Dnf, 1000);
        assert_eq!(tight.simple(&e), Err(NormalFormError::TermBlowup { cap: 1000 }));
        assert!(Normalizer::with_cap(Polarity::Cnf, 1000).simple(&e).is_ok());
    }

    proptest! {
        #[test]
        fn simple_forms_preserve_value(
            e in arb_expr(ExprShape::without_conditionals()),
            env in arb_valuation(),
        ) {
            let expected = evaluate(&e, &env).unwrap();
            for p in [Polarity::Cnf, Polarity::Dnf] {
                let nf = to_simple_nf(&e, p).unwrap();
                prop_assert_eq!(nf.evaluate(&env), expected.clone());
                prop_assert_eq!(evaluate(&nf.to_expr(), &env).unwrap(), expected.clone());
            }
        }

        #[test]
        fn full_forms_preserve_value(
            e in arb_expr(ExprShape::with_conditionals()),
            env in arb_valuation(),
        ) {
            let expected = evaluate(&e, &env).unwrap();
            for p in [Polarity::Cnf, Polarity::Dnf] {
                let nf = to_nf(&e, p).unwrap();
                prop_assert_eq!(nf.evaluate(&env), expected.clone());
            }
        }

        #[test]
        fn guards_are_simple(e in arb_expr(ExprShape::with_conditionals())) {
            fn check(nf: &NF) -> bool {
                match nf {
                    NF::Leaf(s) => s.clauses.iter().flatten().all(|a| a.coeffs.values().all(|c| c.value() > &num_traits::Zero::zero())),
                    NF::Cond { then, other, .. } => check(then) && check(other),
                }
            }
            prop_assert!(check(&to_nf(&e, Polarity::Cnf).unwrap()));
        }

        #[test]
        fn simple_form_simplification_is_idempotent(e in arb_expr(ExprShape::without_conditionals())) {
            let nf = to_simple_nf(&e, Polarity::Cnf).unwrap();
            prop_assert_eq!(nf.simplify(), nf);
        }
    }
}
