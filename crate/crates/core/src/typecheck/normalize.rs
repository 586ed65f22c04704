// SPDX-License-Identifier: Apache-2.0

//! Canonical forms for size expressions.
//!
//! An expression is turned into a polynomial with integer coefficients over
//! atoms: parameter names and opaque heads (truncated subtraction that could
//! not be resolved, division, exponentiation with a symbolic exponent,
//! conditionals and sums). Equal polynomials denote equal functions, so size
//! equality is decided by comparing canonical forms. Truncated subtraction
//! `a - b` is expanded to the exact difference only when `a >= b` can be
//! shown, either structurally or from the guard facts in scope.

use std::collections::{BTreeMap, BTreeSet};

use crate::nat::{NatEnv, NatError, NatExpr, NatOp};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Var(String),
    Opaque(NatExpr),
}

/// Product of atoms with multiplicities.
pub type Monomial = BTreeMap<Atom, u32>;

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Poly {
    terms: BTreeMap<Monomial, i128>,
}

impl Poly {
    pub fn constant(c: i128) -> Poly {
        let mut p = Poly::default();
        if c != 0 {
            p.terms.insert(Monomial::new(), c);
        }
        p
    }

    fn atom(a: Atom) -> Poly {
        let mut p = Poly::default();
        p.terms.insert(BTreeMap::from([(a, 1)]), 1);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_const(&self) -> Option<i128> {
        match self.terms.len() {
            0 => Some(0),
            1 => self.terms.get(&Monomial::new()).copied(),
            _ => None,
        }
    }

    /// All coefficients non-negative, so the value is non-negative for
    /// every assignment of naturals to atoms.
    pub fn is_nonneg(&self) -> bool {
        self.terms.values().all(|&c| c >= 0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            let e = out.terms.entry(m.clone()).or_insert(0);
            *e += c;
            if *e == 0 {
                out.terms.remove(m);
            }
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut m = m1.clone();
                for (a, k) in m2 {
                    *m.entry(a.clone()).or_insert(0) += k;
                }
                let mut single = Poly::default();
                single.terms.insert(m, c1 * c2);
                out = out.add(&single);
            }
        }
        out
    }

    /// Single atom with coefficient one, if that is all the polynomial is.
    fn single_atom(&self) -> Option<&Atom> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next()?;
        if *c != 1 || m.len() != 1 {
            return None;
        }
        let (a, k) = m.iter().next()?;
        (*k == 1).then_some(a)
    }

    /// Reads the polynomial back as an expression. Negative coefficients are
    /// rendered with truncated subtraction, which is exact whenever the
    /// polynomial came from normalizing an expression under consistent facts.
    pub fn to_expr(&self) -> NatExpr {
        let mono = |m: &Monomial, c: u128| -> NatExpr {
            let mut e = NatExpr::Const(c as u64);
            for (a, k) in m {
                let base = match a {
                    Atom::Var(x) => NatExpr::Var(x.clone()),
                    Atom::Opaque(o) => o.clone(),
                };
                for _ in 0..*k {
                    e = NatExpr::mul(e, base.clone());
                }
            }
            e
        };
        let mut pos = NatExpr::Const(0);
        let mut neg = NatExpr::Const(0);
        for (m, c) in &self.terms {
            if *c > 0 {
                pos = NatExpr::add(pos, mono(m, *c as u128));
            } else {
                neg = NatExpr::add(neg, mono(m, c.unsigned_abs()));
            }
        }
        NatExpr::sub(pos, neg)
    }

    /// Exact integer value under an environment.
    pub fn eval(&self, env: &NatEnv) -> Result<i128, NatError> {
        let mut total: i128 = 0;
        for (m, c) in &self.terms {
            let mut v: i128 = *c;
            for (a, k) in m {
                let base = match a {
                    Atom::Var(x) => NatExpr::Var(x.clone()).eval(env)?,
                    Atom::Opaque(o) => o.eval(env)?,
                } as i128;
                for _ in 0..*k {
                    v = v.checked_mul(base).ok_or(NatError::Overflow)?;
                }
            }
            total = total.checked_add(v).ok_or(NatError::Overflow)?;
        }
        Ok(total)
    }
}

/// Facts known to hold in the current branch of the program.
#[derive(Debug, Clone, Default)]
pub struct Facts {
    /// Each polynomial is at least one.
    positive: Vec<Poly>,
    /// Each polynomial is at least zero (beyond what its shape implies).
    nonneg: Vec<Poly>,
    /// Atoms known to be zero.
    zero: BTreeSet<Atom>,
    /// The facts contradict each other: the branch is dead.
    inconsistent: bool,
}

impl Facts {
    pub fn new() -> Self {
        Facts::default()
    }

    pub fn is_inconsistent(&self) -> bool {
        self.inconsistent
    }

    /// `d >= 0`, either structurally or because `d >= p - 1` for a fact
    /// `p >= 1` (resp. `d >= p` for a fact `p >= 0`).
    pub fn proves_nonneg(&self, d: &Poly) -> bool {
        if d.is_nonneg() {
            return true;
        }
        self.positive
            .iter()
            .any(|p| d.sub(p).add(&Poly::constant(1)).is_nonneg())
            || self.nonneg.iter().any(|p| d.sub(p).is_nonneg())
    }

    pub fn proves_positive(&self, d: &Poly) -> bool {
        self.proves_nonneg(&d.sub(&Poly::constant(1)))
    }

    /// Adds the fact `e = 0`.
    pub fn assume_zero(&mut self, e: &NatExpr) {
        let p = normalize_with(e, self);
        if let Some(c) = p.as_const() {
            if c != 0 {
                self.inconsistent = true;
            }
            return;
        }
        if self.proves_positive(&p) {
            self.inconsistent = true;
            return;
        }
        // A sum of non-negative monomials is zero only if each one is.
        if p.is_nonneg() && !p.terms.contains_key(&Monomial::new()) {
            for m in p.terms.keys() {
                if m.len() == 1 {
                    let a = m.keys().next().unwrap().clone();
                    self.assume_atom_zero(a);
                }
            }
        } else if let Some(a) = p.single_atom() {
            self.assume_atom_zero(a.clone());
        }
    }

    fn assume_atom_zero(&mut self, a: Atom) {
        if let Atom::Opaque(NatExpr::Bin(NatOp::Sub, lhs, rhs)) = &a {
            // a - b = 0 means b >= a.
            let d = normalize_with(rhs, self).sub(&normalize_with(lhs, self));
            self.nonneg.push(d);
        }
        self.zero.insert(a);
    }

    /// Adds the fact `e >= 1`.
    pub fn assume_positive(&mut self, e: &NatExpr) {
        let p = normalize_with(e, self);
        if p.is_zero() || (self.proves_nonneg(&p.neg())) {
            self.inconsistent = true;
            return;
        }
        if let Some(Atom::Opaque(NatExpr::Bin(NatOp::Sub, lhs, rhs))) = p.single_atom() {
            // a - b >= 1 means a - b (exactly) >= 1.
            let d = normalize_with(lhs, self).sub(&normalize_with(rhs, self));
            self.positive.push(d);
        }
        self.positive.push(p);
    }
}

/// Canonical form without any facts.
pub fn normalize(e: &NatExpr) -> Poly {
    normalize_with(e, &Facts::new())
}

pub fn normalize_with(e: &NatExpr, facts: &Facts) -> Poly {
    match e {
        NatExpr::Const(c) => Poly::constant(*c as i128),
        NatExpr::Var(x) => {
            let a = Atom::Var(x.clone());
            if facts.zero.contains(&a) {
                Poly::default()
            } else {
                Poly::atom(a)
            }
        }
        NatExpr::Bin(op, a, b) => {
            let pa = normalize_with(a, facts);
            let pb = normalize_with(b, facts);
            match op {
                NatOp::Add => pa.add(&pb),
                NatOp::Mul => pa.mul(&pb),
                NatOp::Sub => {
                    let d = pa.sub(&pb);
                    if facts.proves_nonneg(&d) {
                        d
                    } else if facts.proves_nonneg(&d.neg()) {
                        Poly::default()
                    } else {
                        opaque(NatExpr::bin(NatOp::Sub, pa.to_expr(), pb.to_expr()), facts)
                    }
                }
                NatOp::Div => match (pa.as_const(), pb.as_const()) {
                    (Some(x), Some(y)) if y != 0 => Poly::constant(x / y),
                    (_, Some(1)) => pa,
                    (Some(0), _) => Poly::default(),
                    _ => opaque(NatExpr::bin(NatOp::Div, pa.to_expr(), pb.to_expr()), facts),
                },
                NatOp::Pow => match pb.as_const() {
                    Some(k) if (0..=16).contains(&k) => {
                        let mut out = Poly::constant(1);
                        for _ in 0..k {
                            out = out.mul(&pa);
                        }
                        out
                    }
                    _ => match pa.as_const() {
                        Some(1) => Poly::constant(1),
                        _ => opaque(NatExpr::bin(NatOp::Pow, pa.to_expr(), pb.to_expr()), facts),
                    },
                },
            }
        }
        NatExpr::Ite0 { guard, then, els } => {
            let pg = normalize_with(guard, facts);
            if pg.is_zero() {
                return normalize_with(then, facts);
            }
            if facts.proves_positive(&pg) {
                return normalize_with(els, facts);
            }
            let mut tf = facts.clone();
            tf.assume_zero(guard);
            let mut ef = facts.clone();
            ef.assume_positive(guard);
            let pt = normalize_with(then, &tf);
            let pe = normalize_with(els, &ef);
            if pt == pe {
                return pt;
            }
            opaque(
                NatExpr::Ite0 {
                    guard: Box::new(pg.to_expr()),
                    then: Box::new(pt.to_expr()),
                    els: Box::new(pe.to_expr()),
                },
                facts,
            )
        }
        NatExpr::Sum { index, list, body } => opaque(
            NatExpr::Sum {
                index: index.clone(),
                list: list.clone(),
                body: Box::new(normalize(body).to_expr()),
            },
            facts,
        ),
    }
}

fn opaque(e: NatExpr, facts: &Facts) -> Poly {
    let a = Atom::Opaque(e);
    if facts.zero.contains(&a) {
        Poly::default()
    } else {
        Poly::atom(a)
    }
}

/// Whether two size expressions are equal in every environment satisfying
/// the facts. Sound but incomplete.
pub fn nat_equal(a: &NatExpr, b: &NatExpr, facts: &Facts) -> bool {
    nat_equal_split(a, b, facts, 6)
}

/// Compares canonical forms, splitting on an unresolved `ite0` guard when
/// they differ.
fn nat_equal_split(a: &NatExpr, b: &NatExpr, facts: &Facts, depth: u32) -> bool {
    if facts.inconsistent {
        return true;
    }
    let pa = normalize_with(a, facts);
    let pb = normalize_with(b, facts);
    if pa == pb {
        return true;
    }
    if depth == 0 {
        return false;
    }
    let guard = first_guard(&pa.to_expr()).or_else(|| first_guard(&pb.to_expr()));
    let Some(g) = guard else {
        return false;
    };
    let mut zero = facts.clone();
    zero.assume_zero(&g);
    let mut pos = facts.clone();
    pos.assume_positive(&g);
    nat_equal_split(a, b, &zero, depth - 1) && nat_equal_split(a, b, &pos, depth - 1)
}

fn first_guard(e: &NatExpr) -> Option<NatExpr> {
    match e {
        NatExpr::Ite0 { guard, .. } => Some((**guard).clone()),
        NatExpr::Bin(_, a, b) => first_guard(a).or_else(|| first_guard(b)),
        _ => None,
    }
}

/// The canonical form read back as an expression.
pub fn nat_normalize(e: &NatExpr) -> NatExpr {
    normalize(e).to_expr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nat::ParamVal;

    fn v(x: &str) -> NatExpr {
        NatExpr::var(x)
    }
    fn c(k: u64) -> NatExpr {
        NatExpr::Const(k)
    }
    fn sub(a: NatExpr, b: NatExpr) -> NatExpr {
        NatExpr::bin(NatOp::Sub, a, b)
    }
    fn add(a: NatExpr, b: NatExpr) -> NatExpr {
        NatExpr::bin(NatOp::Add, a, b)
    }

    #[test]
    fn simple_identities() {
        let f = Facts::new();
        assert!(nat_equal(&sub(add(v("n"), c(1)), c(1)), &v("n"), &f));
        let two_n = NatExpr::bin(NatOp::Mul, c(2), v("n"));
        assert!(nat_equal(&two_n, &add(v("n"), v("n")), &f));
        assert!(nat_equal(&sub(v("k"), add(v("k"), c(1))), &c(0), &f));
    }

    #[test]
    fn monus_needs_guard() {
        let lhs = add(v("k"), sub(v("n"), v("k")));
        assert!(!nat_equal(&lhs, &v("n"), &Facts::new()));
        let mut f = Facts::new();
        f.assume_positive(&sub(v("n"), v("k")));
        assert!(nat_equal(&lhs, &v("n"), &f));
        // and it really is only true under the guard
        for n in 0..=6u64 {
            for k in 0..=6u64 {
                let env = NatEnv::from([
                    ("n".to_string(), ParamVal::Nat(n)),
                    ("k".to_string(), ParamVal::Nat(k)),
                ]);
                let holds = lhs.eval(&env).unwrap() == n;
                if n > k {
                    assert!(holds);
                }
                if k > n {
                    assert!(!holds);
                }
            }
        }
    }

    #[test]
    fn guarded_tail_lengths() {
        let mut f = Facts::new();
        f.assume_positive(&sub(v("n"), v("k")));
        let nk = sub(v("n"), v("k"));
        let tail = sub(nk.clone(), c(1));
        assert!(nat_equal(&add(tail.clone(), c(1)), &nk, &f));
        let range_len = sub(add(nk.clone(), c(1)), c(2));
        assert!(nat_equal(&range_len, &tail, &f));
    }

    #[test]
    fn zero_guard() {
        let mut f = Facts::new();
        f.assume_zero(&v("n"));
        assert!(nat_equal(&add(v("n"), v("m")), &v("m"), &f));
        let mut f = Facts::new();
        f.assume_zero(&c(3));
        assert!(f.is_inconsistent());
    }

    #[test]
    fn ite0_collapses_equal_branches() {
        let e = NatExpr::ite0(v("g"), v("a"), v("a"));
        assert_eq!(normalize(&e), normalize(&v("a")));
        let e = NatExpr::ite0(v("g"), v("g"), c(5));
        assert_ne!(normalize(&e), normalize(&c(5)));
    }
}
