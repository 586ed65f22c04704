// SPDX-License-Identifier: Apache-2.0

//! Symbolic natural-number expressions and lists of naturals.
//!
//! These index vector types and tag diagram wires. Evaluation is total on
//! closed expressions apart from division by zero: subtraction is truncated
//! at zero, division rounds down and `0^0 = 1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NatOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl NatOp {
    pub fn symbol(self) -> &'static str {
        match self {
            NatOp::Add => "+",
            NatOp::Sub => "-",
            NatOp::Mul => "*",
            NatOp::Div => "/",
            NatOp::Pow => "^",
        }
    }

    /// Applies the operator to two naturals. `None` on division by zero or
    /// overflow.
    pub fn apply(self, a: u64, b: u64) -> Result<u64, NatError> {
        match self {
            NatOp::Add => a.checked_add(b).ok_or(NatError::Overflow),
            NatOp::Sub => Ok(a.saturating_sub(b)),
            NatOp::Mul => a.checked_mul(b).ok_or(NatError::Overflow),
            NatOp::Div => {
                if b == 0 {
                    Err(NatError::DivisionByZero)
                } else {
                    Ok(a / b)
                }
            }
            NatOp::Pow => {
                let exp = u32::try_from(b).map_err(|_| NatError::Overflow)?;
                a.checked_pow(exp).ok_or(NatError::Overflow)
            }
        }
    }

    fn precedence(self) -> u8 {
        match self {
            NatOp::Add | NatOp::Sub => 1,
            NatOp::Mul | NatOp::Div => 2,
            NatOp::Pow => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NatExpr {
    Const(u64),
    Var(String),
    Bin(NatOp, Box<NatExpr>, Box<NatExpr>),
    /// `then` when the guard evaluates to zero, `els` otherwise.
    Ite0 {
        guard: Box<NatExpr>,
        then: Box<NatExpr>,
        els: Box<NatExpr>,
    },
    /// Sum of `body` over every element of `list`, bound to `index`.
    Sum {
        index: String,
        list: Box<NatListExpr>,
        body: Box<NatExpr>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NatListExpr {
    Nil,
    Cons(NatExpr, Box<NatListExpr>),
    /// `[lo, lo+1, ..., hi-1]`
    Range(NatExpr, NatExpr),
    For {
        index: String,
        over: Box<NatListExpr>,
        body: NatExpr,
    },
    Reverse(Box<NatListExpr>),
    Var(String),
}

/// Value bound to a parameter name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamVal {
    Nat(u64),
    List(Vec<u64>),
}

pub type NatEnv = BTreeMap<String, ParamVal>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NatError {
    #[error("unbound parameter `{0}`")]
    Unbound(String),
    #[error("parameter `{0}` is a list where a natural was expected")]
    NotANat(String),
    #[error("parameter `{0}` is a natural where a list was expected")]
    NotAList(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    Overflow,
}

impl NatExpr {
    pub fn var(name: impl Into<String>) -> Self {
        NatExpr::Var(name.into())
    }

    pub fn bin(op: NatOp, a: NatExpr, b: NatExpr) -> Self {
        NatExpr::Bin(op, Box::new(a), Box::new(b))
    }

    /// Adds with constant folding of the trivial cases.
    pub fn add(a: NatExpr, b: NatExpr) -> Self {
        match (&a, &b) {
            (NatExpr::Const(0), _) => b,
            (_, NatExpr::Const(0)) => a,
            (NatExpr::Const(x), NatExpr::Const(y)) if x.checked_add(*y).is_some() => {
                NatExpr::Const(x + y)
            }
            _ => NatExpr::bin(NatOp::Add, a, b),
        }
    }

    pub fn sub(a: NatExpr, b: NatExpr) -> Self {
        match (&a, &b) {
            (_, NatExpr::Const(0)) => a,
            (NatExpr::Const(x), NatExpr::Const(y)) => NatExpr::Const(x.saturating_sub(*y)),
            _ => NatExpr::bin(NatOp::Sub, a, b),
        }
    }

    pub fn mul(a: NatExpr, b: NatExpr) -> Self {
        match (&a, &b) {
            (NatExpr::Const(0), _) | (_, NatExpr::Const(0)) => NatExpr::Const(0),
            (NatExpr::Const(1), _) => b,
            (_, NatExpr::Const(1)) => a,
            (NatExpr::Const(x), NatExpr::Const(y)) if x.checked_mul(*y).is_some() => {
                NatExpr::Const(x * y)
            }
            _ => NatExpr::bin(NatOp::Mul, a, b),
        }
    }

    pub fn ite0(guard: NatExpr, then: NatExpr, els: NatExpr) -> Self {
        if let NatExpr::Const(g) = guard {
            return if g == 0 { then } else { els };
        }
        NatExpr::Ite0 {
            guard: Box::new(guard),
            then: Box::new(then),
            els: Box::new(els),
        }
    }

    /// `Σ_{index ∈ list} body`, folded to `len(list) * body` shapes where
    /// `body` does not mention the index.
    pub fn sum(index: impl Into<String>, list: NatListExpr, body: NatExpr) -> Self {
        let index = index.into();
        if let NatExpr::Const(0) = body {
            return NatExpr::Const(0);
        }
        if !body.free_vars().contains(&index) {
            if let Some(len) = list.len_expr() {
                return NatExpr::mul(len, body);
            }
        }
        NatExpr::Sum {
            index,
            list: Box::new(list),
            body: Box::new(body),
        }
    }

    pub fn as_const(&self) -> Option<u64> {
        match self {
            NatExpr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn eval(&self, env: &NatEnv) -> Result<u64, NatError> {
        match self {
            NatExpr::Const(c) => Ok(*c),
            NatExpr::Var(x) => match env.get(x) {
                Some(ParamVal::Nat(v)) => Ok(*v),
                Some(ParamVal::List(_)) => Err(NatError::NotANat(x.clone())),
                None => Err(NatError::Unbound(x.clone())),
            },
            NatExpr::Bin(op, a, b) => op.apply(a.eval(env)?, b.eval(env)?),
            NatExpr::Ite0 { guard, then, els } => {
                if guard.eval(env)? == 0 {
                    then.eval(env)
                } else {
                    els.eval(env)
                }
            }
            NatExpr::Sum { index, list, body } => {
                let items = list.eval(env)?;
                let mut inner = env.clone();
                let mut total: u64 = 0;
                for item in items {
                    inner.insert(index.clone(), ParamVal::Nat(item));
                    total = total
                        .checked_add(body.eval(&inner)?)
                        .ok_or(NatError::Overflow)?;
                }
                Ok(total)
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<String>) {
        match self {
            NatExpr::Const(_) => {}
            NatExpr::Var(x) => {
                out.insert(x.clone());
            }
            NatExpr::Bin(_, a, b) => {
                a.collect_free(out);
                b.collect_free(out);
            }
            NatExpr::Ite0 { guard, then, els } => {
                guard.collect_free(out);
                then.collect_free(out);
                els.collect_free(out);
            }
            NatExpr::Sum { index, list, body } => {
                list.collect_free(out);
                let mut inner = body.free_vars();
                inner.remove(index);
                out.extend(inner);
            }
        }
    }

    /// Capture-avoiding substitution of a natural expression for `name`.
    pub fn subst(&self, name: &str, value: &NatExpr) -> NatExpr {
        self.subst_param(name, &ParamSubst::Nat(value.clone()))
    }

    pub fn subst_param(&self, name: &str, value: &ParamSubst) -> NatExpr {
        match self {
            NatExpr::Const(_) => self.clone(),
            NatExpr::Var(x) => match value {
                ParamSubst::Nat(v) if x == name => v.clone(),
                _ => self.clone(),
            },
            NatExpr::Bin(op, a, b) => {
                NatExpr::bin(*op, a.subst_param(name, value), b.subst_param(name, value))
            }
            NatExpr::Ite0 { guard, then, els } => NatExpr::Ite0 {
                guard: Box::new(guard.subst_param(name, value)),
                then: Box::new(then.subst_param(name, value)),
                els: Box::new(els.subst_param(name, value)),
            },
            NatExpr::Sum { index, list, body } => {
                let list = list.subst_param(name, value);
                if index == name {
                    return NatExpr::Sum {
                        index: index.clone(),
                        list: Box::new(list),
                        body: body.clone(),
                    };
                }
                let (index, body) = avoid_capture(index, body, value);
                NatExpr::Sum {
                    index,
                    list: Box::new(list),
                    body: Box::new(body.subst_param(name, value)),
                }
            }
        }
    }

    /// Simultaneous substitution of several parameter names.
    pub fn subst_all(&self, map: &BTreeMap<String, ParamSubst>) -> NatExpr {
        let mut out = self.clone();
        // Rename first so replacements never see each other's variables.
        let mut staged = Vec::new();
        for (i, name) in map.keys().enumerate() {
            let tmp = format!("%subst{i}");
            out = out
                .subst_param(name, &ParamSubst::Nat(NatExpr::Var(tmp.clone())))
                .subst_param(name, &ParamSubst::List(NatListExpr::Var(tmp.clone())));
            staged.push((tmp, name));
        }
        for (tmp, name) in staged {
            out = out.subst_param(&tmp, &map[name]);
        }
        out
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        match self {
            NatExpr::Const(c) => write!(f, "{c}"),
            NatExpr::Var(x) => write!(f, "{x}"),
            NatExpr::Bin(op, a, b) => {
                let p = op.precedence();
                let paren = p < ctx;
                if paren {
                    write!(f, "(")?;
                }
                // Left-associative except for exponentiation.
                if *op == NatOp::Pow {
                    a.fmt_prec(f, p + 1)?;
                    write!(f, "^")?;
                    b.fmt_prec(f, p)?;
                } else {
                    a.fmt_prec(f, p)?;
                    write!(f, " {} ", op.symbol())?;
                    b.fmt_prec(f, p + 1)?;
                }
                if paren {
                    write!(f, ")")?;
                }
                Ok(())
            }
            NatExpr::Ite0 { guard, then, els } => {
                write!(f, "(ifz {guard} then {then} else {els})")
            }
            NatExpr::Sum { index, list, body } => write!(f, "sum({index} in {list}, {body})"),
        }
    }
}

/// What a parameter name can be replaced with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamSubst {
    Nat(NatExpr),
    List(NatListExpr),
}

impl ParamSubst {
    fn free_vars(&self) -> BTreeSet<String> {
        match self {
            ParamSubst::Nat(e) => e.free_vars(),
            ParamSubst::List(l) => l.free_vars(),
        }
    }
}

fn avoid_capture(index: &str, body: &NatExpr, value: &ParamSubst) -> (String, NatExpr) {
    if !value.free_vars().contains(index) {
        return (index.to_string(), body.clone());
    }
    let mut avoid = value.free_vars();
    avoid.extend(body.free_vars());
    let fresh = fresh_name(index, &avoid);
    let body = body.subst(index, &NatExpr::Var(fresh.clone()));
    (fresh, body)
}

/// `base'`, `base''`, ... until the name is not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut candidate = format!("{base}'");
    while avoid.contains(&candidate) {
        candidate.push('\'');
    }
    candidate
}

impl NatListExpr {
    pub fn cons(head: NatExpr, tail: NatListExpr) -> Self {
        NatListExpr::Cons(head, Box::new(tail))
    }

    pub fn eval(&self, env: &NatEnv) -> Result<Vec<u64>, NatError> {
        match self {
            NatListExpr::Nil => Ok(Vec::new()),
            NatListExpr::Cons(h, t) => {
                let mut out = vec![h.eval(env)?];
                out.extend(t.eval(env)?);
                Ok(out)
            }
            NatListExpr::Range(lo, hi) => {
                let lo = lo.eval(env)?;
                let hi = hi.eval(env)?;
                Ok((lo..hi.max(lo)).collect())
            }
            NatListExpr::For { index, over, body } => {
                let items = over.eval(env)?;
                let mut inner = env.clone();
                items
                    .into_iter()
                    .map(|k| {
                        inner.insert(index.clone(), ParamVal::Nat(k));
                        body.eval(&inner)
                    })
                    .collect()
            }
            NatListExpr::Reverse(l) => {
                let mut v = l.eval(env)?;
                v.reverse();
                Ok(v)
            }
            NatListExpr::Var(x) => match env.get(x) {
                Some(ParamVal::List(v)) => Ok(v.clone()),
                Some(ParamVal::Nat(_)) => Err(NatError::NotAList(x.clone())),
                None => Err(NatError::Unbound(x.clone())),
            },
        }
    }

    /// Symbolic length, when it can be read off the structure.
    pub fn len_expr(&self) -> Option<NatExpr> {
        match self {
            NatListExpr::Nil => Some(NatExpr::Const(0)),
            NatListExpr::Cons(_, t) => Some(NatExpr::add(t.len_expr()?, NatExpr::Const(1))),
            NatListExpr::Range(lo, hi) => Some(NatExpr::sub(hi.clone(), lo.clone())),
            NatListExpr::For { over, .. } => over.len_expr(),
            NatListExpr::Reverse(l) => l.len_expr(),
            NatListExpr::Var(_) => None,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<String>) {
        match self {
            NatListExpr::Nil => {}
            NatListExpr::Cons(h, t) => {
                h.collect_free(out);
                t.collect_free(out);
            }
            NatListExpr::Range(lo, hi) => {
                lo.collect_free(out);
                hi.collect_free(out);
            }
            NatListExpr::For { index, over, body } => {
                over.collect_free(out);
                let mut inner = body.free_vars();
                inner.remove(index);
                out.extend(inner);
            }
            NatListExpr::Reverse(l) => l.collect_free(out),
            NatListExpr::Var(x) => {
                out.insert(x.clone());
            }
        }
    }

    pub fn subst_param(&self, name: &str, value: &ParamSubst) -> NatListExpr {
        match self {
            NatListExpr::Nil => NatListExpr::Nil,
            NatListExpr::Cons(h, t) => {
                NatListExpr::cons(h.subst_param(name, value), t.subst_param(name, value))
            }
            NatListExpr::Range(lo, hi) => {
                NatListExpr::Range(lo.subst_param(name, value), hi.subst_param(name, value))
            }
            NatListExpr::For { index, over, body } => {
                let over = Box::new(over.subst_param(name, value));
                if index == name {
                    return NatListExpr::For {
                        index: index.clone(),
                        over,
                        body: body.clone(),
                    };
                }
                let (index, body) = avoid_capture(index, body, value);
                NatListExpr::For {
                    index,
                    over,
                    body: body.subst_param(name, value),
                }
            }
            NatListExpr::Reverse(l) => NatListExpr::Reverse(Box::new(l.subst_param(name, value))),
            NatListExpr::Var(x) => match value {
                ParamSubst::List(l) if x == name => l.clone(),
                _ => self.clone(),
            },
        }
    }
}

impl fmt::Display for NatExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl fmt::Display for NatListExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NatListExpr::Nil => write!(f, "[]"),
            NatListExpr::Cons(h, t) => write!(f, "({h}) :: {t}"),
            NatListExpr::Range(lo, hi) => write!(f, "({lo})..({hi})"),
            NatListExpr::For { index, over, body } => {
                write!(f, "[{body} | {index} <- {over}]")
            }
            NatListExpr::Reverse(l) => write!(f, "reverse({l})"),
            NatListExpr::Var(x) => write!(f, "{x}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: u64) -> NatExpr {
        NatExpr::Const(v)
    }

    #[test]
    fn constant_arithmetic() {
        let e = NatExpr::bin(NatOp::Add, c(3), c(4));
        assert_eq!(e.eval(&NatEnv::new()), Ok(7));
    }

    #[test]
    fn truncated_subtraction() {
        let e = NatExpr::bin(NatOp::Sub, c(2), c(5));
        assert_eq!(e.eval(&NatEnv::new()), Ok(0));
    }

    #[test]
    fn power_of_variable() {
        let e = NatExpr::bin(NatOp::Pow, c(2), NatExpr::var("n"));
        let env = NatEnv::from([("n".to_string(), ParamVal::Nat(3))]);
        assert_eq!(e.eval(&env), Ok(8));
        assert_eq!(NatExpr::bin(NatOp::Pow, c(0), c(0)).eval(&env), Ok(1));
    }

    #[test]
    fn errors() {
        let env = NatEnv::new();
        assert_eq!(
            NatExpr::var("x").eval(&env),
            Err(NatError::Unbound("x".into()))
        );
        assert_eq!(
            NatExpr::bin(NatOp::Div, c(1), c(0)).eval(&env),
            Err(NatError::DivisionByZero)
        );
    }

    #[test]
    fn monus_matches_brute_force() {
        let env = NatEnv::new();
        for a in 0..=20u64 {
            for b in 0..=20u64 {
                let e = NatExpr::bin(NatOp::Sub, c(a), c(b));
                let expected = a.saturating_sub(b);
                assert_eq!(e.eval(&env).unwrap(), expected);
            }
        }
    }

    #[test]
    fn ranges_and_comprehensions() {
        let env = NatEnv::from([("n".to_string(), ParamVal::Nat(5))]);
        let r = NatListExpr::Range(c(2), NatExpr::var("n"));
        assert_eq!(r.eval(&env).unwrap(), vec![2, 3, 4]);
        assert!(NatListExpr::Range(c(3), c(3)).eval(&env).unwrap().is_empty());
        assert!(NatListExpr::Range(c(4), c(1)).eval(&env).unwrap().is_empty());
        let sq = NatListExpr::For {
            index: "k".into(),
            over: Box::new(NatListExpr::Range(c(0), c(3))),
            body: NatExpr::bin(NatOp::Mul, NatExpr::var("k"), NatExpr::var("k")),
        };
        assert_eq!(sq.eval(&env).unwrap(), vec![0, 1, 4]);
        let rev = NatListExpr::Reverse(Box::new(NatListExpr::Range(c(0), c(3))));
        assert_eq!(rev.eval(&env).unwrap(), vec![2, 1, 0]);
    }

    #[test]
    fn sum_over_list() {
        let s = NatExpr::sum(
            "k",
            NatListExpr::Range(c(1), c(4)),
            NatExpr::var("k"),
        );
        assert_eq!(s.eval(&NatEnv::new()), Ok(6));
        // Index-free bodies fold to a product with the length.
        let s = NatExpr::sum("k", NatListExpr::Range(c(1), c(4)), c(2));
        assert_eq!(s.eval(&NatEnv::new()), Ok(6));
    }

    #[test]
    fn substitution_avoids_capture() {
        // sum(k in [0, n), n) [n := k]  must not capture k
        let s = NatExpr::Sum {
            index: "k".into(),
            list: Box::new(NatListExpr::Range(c(0), c(2))),
            body: Box::new(NatExpr::var("n")),
        };
        let r = s.subst("n", &NatExpr::var("k"));
        let env = NatEnv::from([("k".to_string(), ParamVal::Nat(7))]);
        assert_eq!(r.eval(&env), Ok(14));
    }

    #[test]
    fn display_respects_precedence() {
        let e = NatExpr::bin(
            NatOp::Sub,
            NatExpr::bin(NatOp::Sub, NatExpr::var("n"), NatExpr::var("k")),
            c(1),
        );
        assert_eq!(e.to_string(), "n - k - 1");
        let e = NatExpr::bin(
            NatOp::Sub,
            NatExpr::var("n"),
            NatExpr::bin(NatOp::Sub, NatExpr::var("k"), c(1)),
        );
        assert_eq!(e.to_string(), "n - (k - 1)");
        let e = NatExpr::bin(NatOp::Pow, c(2), NatExpr::var("n"));
        assert_eq!(e.to_string(), "2^n");
    }
}
