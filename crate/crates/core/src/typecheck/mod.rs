// SPDX-License-Identifier: Apache-2.0

//! Bidirectional type checking with linear state contexts.
//!
//! State variables are tracked with a usage flag and consumed at most once;
//! the context left over by one premise is threaded into the next, so no
//! context split has to be guessed. Parameter variables are unrestricted.
//! Checking also elaborates the term: every binder comes out annotated.

pub mod normalize;

use std::fmt;

use thiserror::Error;

use crate::nat::{fresh_name, NatExpr, NatListExpr, ParamSubst};
use crate::parser::Program;
use crate::reduce::{normalize as reduce_term, DEFAULT_FUEL};
use crate::syntax::{
    term_to_nat, term_to_natlist, Gate, Macro, ParamContext, Prim, Span, StateContext, Term,
    TermKind, Type,
};

pub use normalize::{nat_equal, nat_normalize, Facts};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeErrorKind {
    Linearity,
    Mismatch,
    Size,
    Unbound,
    NonNatParameter,
    Unsupported,
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeErrorKind::Linearity => "linearity violation",
            TypeErrorKind::Mismatch => "type mismatch",
            TypeErrorKind::Size => "size mismatch",
            TypeErrorKind::Unbound => "unbound variable",
            TypeErrorKind::NonNatParameter => "non-Nat parameter",
            TypeErrorKind::Unsupported => "unsupported",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {kind}: {message}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub span: Span,
    pub message: String,
    pub expected: Option<String>,
    pub found: Option<String>,
}

impl TypeError {
    fn new(kind: TypeErrorKind, span: Span, message: impl Into<String>) -> Self {
        TypeError {
            kind,
            span,
            message: message.into(),
            expected: None,
            found: None,
        }
    }

    fn mismatch(kind: TypeErrorKind, span: Span, expected: &Type, found: &Type) -> Self {
        TypeError {
            kind,
            span,
            message: format!("expected `{expected}`, found `{found}`"),
            expected: Some(expected.to_string()),
            found: Some(found.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, TypeError>;

#[derive(Debug, Clone)]
enum Entry {
    Param {
        name: String,
        ty: Type,
    },
    State {
        name: String,
        ty: Type,
        used: bool,
    },
}

impl Entry {
    fn name(&self) -> &str {
        match self {
            Entry::Param { name, .. } | Entry::State { name, .. } => name,
        }
    }
}

/// Why state variables are currently out of reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Barrier {
    /// Inside a parameter position: `@` arguments, guards, lists.
    Parameter,
    /// Inside the body of a `for`, which is replicated.
    ForBody,
}

struct Checker {
    scope: Vec<Entry>,
    /// `(scope length, reason)`: state entries below the length are blocked.
    barriers: Vec<(usize, Barrier)>,
    facts: Facts,
}

/// Signature of a primitive, with binder names fresh for its type arguments.
pub fn prim_type(p: &Prim) -> Type {
    let mut avoid = std::collections::BTreeSet::new();
    for t in p.type_args() {
        avoid.extend(t.free_vars());
    }
    let n = pick("n", &avoid);
    let m = pick("m", &avoid);
    let nv = NatExpr::Var(n.clone());
    let mv = NatExpr::Var(m.clone());
    match p {
        Prim::AccuMap(a, b, c) => {
            let f = Type::lolli(a.clone(), Type::lolli(c.clone(), Type::tensor(b.clone(), c.clone())));
            Type::pi(
                n,
                Type::Nat,
                Type::lolli(
                    Type::vec(a.clone(), nv.clone()),
                    Type::lolli(
                        Type::vec(f, nv.clone()),
                        Type::lolli(c.clone(), Type::tensor(Type::vec(b.clone(), nv), c.clone())),
                    ),
                ),
            )
        }
        Prim::Split(a) => Type::pi(
            n,
            Type::Nat,
            Type::pi(
                m,
                Type::Nat,
                Type::lolli(
                    Type::vec(a.clone(), NatExpr::add(nv.clone(), mv.clone())),
                    Type::tensor(Type::vec(a.clone(), nv), Type::vec(a.clone(), mv)),
                ),
            ),
        ),
        Prim::Append(a) => Type::pi(
            n,
            Type::Nat,
            Type::pi(
                m,
                Type::Nat,
                Type::lolli(
                    Type::vec(a.clone(), nv.clone()),
                    Type::lolli(
                        Type::vec(a.clone(), mv.clone()),
                        Type::vec(a.clone(), NatExpr::add(nv, mv)),
                    ),
                ),
            ),
        ),
        Prim::Drop => Type::pi(
            n,
            Type::Nat,
            Type::lolli(Type::vec(Type::Unit, nv), Type::Unit),
        ),
        Prim::Range => Type::pi(
            n,
            Type::Nat,
            Type::pi(
                m,
                Type::Nat,
                Type::vec(Type::Nat, NatExpr::sub(mv, nv)),
            ),
        ),
        // Only meaningful applied; see the `@` rule.
        Prim::Reverse => {
            let l = pick("l", &avoid);
            Type::pi(
                n.clone(),
                Type::vec(Type::Nat, NatExpr::Var(l.clone())),
                Type::vec(Type::Nat, NatExpr::Var(l)),
            )
        }
    }
}

/// Signature of a vector macro.
pub fn macro_type(m: &Macro) -> Type {
    let mut avoid = std::collections::BTreeSet::new();
    for t in m.type_args() {
        avoid.extend(t.free_vars());
    }
    let n = pick("n", &avoid);
    let nv = NatExpr::Var(n.clone());
    let body = match m {
        Macro::Map(a, b) => Type::lolli(
            Type::vec(a.clone(), nv.clone()),
            Type::lolli(
                Type::vec(Type::lolli(a.clone(), b.clone()), nv.clone()),
                Type::vec(b.clone(), nv),
            ),
        ),
        Macro::Fold(a, c) => Type::lolli(
            Type::vec(a.clone(), nv.clone()),
            Type::lolli(
                Type::vec(Type::lolli(a.clone(), Type::lolli(c.clone(), c.clone())), nv),
                Type::lolli(c.clone(), c.clone()),
            ),
        ),
        Macro::Compose(a) => Type::lolli(
            Type::vec(Type::lolli(a.clone(), a.clone()), nv),
            Type::lolli(a.clone(), a.clone()),
        ),
    };
    Type::pi(n, Type::Nat, body)
}

fn pick(base: &str, avoid: &std::collections::BTreeSet<String>) -> String {
    if avoid.contains(base) {
        fresh_name(base, avoid)
    } else {
        base.to_string()
    }
}

pub fn gate_type(g: Gate) -> Type {
    match g {
        Gate::H => Type::lolli(Type::Qubit, Type::Qubit),
        Gate::Cnot => Type::lolli(
            Type::Qubit,
            Type::lolli(Type::Qubit, Type::tensor(Type::Qubit, Type::Qubit)),
        ),
    }
}

pub fn rotation_type() -> Type {
    Type::pi("n", Type::Nat, Type::lolli(Type::Qubit, Type::Qubit))
}

/// Structural type equality with sizes compared under the facts. On failure
/// reports whether only sizes differed.
pub fn types_equal(a: &Type, b: &Type, facts: &Facts) -> std::result::Result<(), TypeErrorKind> {
    match (a, b) {
        (Type::Bit, Type::Bit)
        | (Type::Qubit, Type::Qubit)
        | (Type::Unit, Type::Unit)
        | (Type::Nat, Type::Nat) => Ok(()),
        (Type::Tensor(a1, a2), Type::Tensor(b1, b2)) | (Type::Lolli(a1, a2), Type::Lolli(b1, b2)) => {
            let r1 = types_equal(a1, b1, facts);
            let r2 = types_equal(a2, b2, facts);
            combine(r1, r2)
        }
        (Type::Vec(a1, n1), Type::Vec(b1, n2)) => {
            let r1 = types_equal(a1, b1, facts);
            let r2 = if nat_equal(n1, n2, facts) {
                Ok(())
            } else {
                Err(TypeErrorKind::Size)
            };
            combine(r1, r2)
        }
        (
            Type::Pi {
                var: v1,
                dom: d1,
                body: b1,
            },
            Type::Pi {
                var: v2,
                dom: d2,
                body: b2,
            },
        ) => {
            let r1 = types_equal(d1, d2, facts);
            let b2 = if v1 == v2 {
                (**b2).clone()
            } else {
                b2.subst_nat(v2, &NatExpr::Var(v1.clone()))
            };
            combine(r1, types_equal(b1, &b2, facts))
        }
        _ => Err(TypeErrorKind::Mismatch),
    }
}

fn combine(
    a: std::result::Result<(), TypeErrorKind>,
    b: std::result::Result<(), TypeErrorKind>,
) -> std::result::Result<(), TypeErrorKind> {
    match (a, b) {
        (Err(TypeErrorKind::Mismatch), _) | (_, Err(TypeErrorKind::Mismatch)) => {
            Err(TypeErrorKind::Mismatch)
        }
        (Err(e), _) | (_, Err(e)) => Err(e),
        _ => Ok(()),
    }
}

/// The type of `term` under Φ and Γ, together with the elaborated term.
/// Every variable of Γ must be used exactly once.
pub fn typecheck(phi: &ParamContext, gamma: &StateContext, term: &Term) -> Result<(Type, Term)> {
    let mut ck = Checker::new(phi, gamma)?;
    let (ty, t) = ck.synth(term)?;
    ck.finish(gamma, term.span)?;
    Ok((ty, t))
}

/// Checks `term` against `ty` under Φ and Γ and returns the elaborated term.
pub fn typecheck_against(
    phi: &ParamContext,
    gamma: &StateContext,
    term: &Term,
    ty: &Type,
) -> Result<Term> {
    let mut ck = Checker::new(phi, gamma)?;
    ck.well_formed(ty, term.span)?;
    let t = ck.check(term, ty)?;
    ck.finish(gamma, term.span)?;
    Ok(t)
}

/// A checked definition: its type and fully inlined, elaborated body.
#[derive(Debug, Clone)]
pub struct CheckedDef {
    pub name: String,
    pub ty: Type,
    pub body: Term,
}

/// Checks every definition of a program after inlining.
pub fn check_program(prog: &Program) -> Result<Vec<CheckedDef>> {
    let mut out = Vec::new();
    for d in &prog.defs {
        let body = prog.inlined(&d.name).expect("definition exists");
        let (ty, body) = match &d.ty {
            Some(ty) => {
                let b = typecheck_against(&ParamContext::default(), &StateContext::default(), &body, ty)?;
                (ty.clone(), b)
            }
            None => typecheck(&ParamContext::default(), &StateContext::default(), &body)?,
        };
        out.push(CheckedDef {
            name: d.name.clone(),
            ty,
            body,
        });
    }
    Ok(out)
}

fn err<T>(kind: TypeErrorKind, span: Span, message: impl Into<String>) -> Result<T> {
    Err(TypeError::new(kind, span, message))
}

impl Checker {
    fn new(phi: &ParamContext, gamma: &StateContext) -> Result<Self> {
        let mut ck = Checker {
            scope: Vec::new(),
            barriers: Vec::new(),
            facts: Facts::new(),
        };
        for (name, ty) in &phi.entries {
            if !ty.is_param() {
                return err(
                    TypeErrorKind::NonNatParameter,
                    Span::UNKNOWN,
                    format!("parameter `{name}` must have type Nat or Vec Nat n, not `{ty}`"),
                );
            }
            ck.well_formed(ty, Span::UNKNOWN)?;
            ck.scope.push(Entry::Param {
                name: name.clone(),
                ty: ty.clone(),
            });
        }
        for (name, ty) in &gamma.entries {
            if !ty.is_state() {
                return err(
                    TypeErrorKind::Mismatch,
                    Span::UNKNOWN,
                    format!("state variable `{name}` must have a state type, not `{ty}`"),
                );
            }
            ck.well_formed(ty, Span::UNKNOWN)?;
            ck.scope.push(Entry::State {
                name: name.clone(),
                ty: ty.clone(),
                used: false,
            });
        }
        let mut names: Vec<&str> = ck.scope.iter().map(|e| e.name()).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return err(
                TypeErrorKind::Mismatch,
                Span::UNKNOWN,
                format!("`{}` is declared twice in the context", w[0]),
            );
        }
        Ok(ck)
    }

    fn finish(&self, gamma: &StateContext, span: Span) -> Result<()> {
        for (name, _) in &gamma.entries {
            let used = self.scope.iter().any(|e| {
                matches!(e, Entry::State { name: n, used: true, .. } if n == name)
            });
            if !used {
                return err(
                    TypeErrorKind::Linearity,
                    span,
                    format!("state variable `{name}` is never used"),
                );
            }
        }
        Ok(())
    }

    /// Size indices may only mention parameters in scope.
    fn well_formed(&self, ty: &Type, span: Span) -> Result<()> {
        for x in ty.free_vars() {
            match self.lookup(&x) {
                Some((_, Entry::Param { ty: Type::Nat, .. })) => {}
                Some(_) => {
                    return err(
                        TypeErrorKind::NonNatParameter,
                        span,
                        format!("`{x}` in a size index is not a Nat parameter"),
                    )
                }
                None => {
                    return err(
                        TypeErrorKind::Unbound,
                        span,
                        format!("size variable `{x}` is not bound"),
                    )
                }
            }
        }
        if let Type::Pi { var, dom, body } = ty {
            if !dom.is_param() {
                return err(
                    TypeErrorKind::NonNatParameter,
                    span,
                    format!("dependent arrow over `{dom}`; only Nat and Vec Nat n are allowed"),
                );
            }
            let mut inner = Checker {
                scope: self.scope.clone(),
                barriers: vec![],
                facts: Facts::new(),
            };
            inner.scope.push(Entry::Param {
                name: var.clone(),
                ty: (**dom).clone(),
            });
            inner.well_formed(body, span)?;
        }
        Ok(())
    }

    fn lookup(&self, name: &str) -> Option<(usize, &Entry)> {
        self.scope
            .iter()
            .enumerate()
            .rev()
            .find(|(_, e)| e.name() == name)
    }

    fn barrier_for(&self, idx: usize) -> Option<Barrier> {
        self.barriers
            .iter()
            .rev()
            .find(|(len, _)| idx < *len)
            .map(|(_, b)| *b)
    }

    fn with_barrier<T>(&mut self, b: Barrier, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        self.barriers.push((self.scope.len(), b));
        let r = f(self);
        self.barriers.pop();
        r
    }

    fn usage(&self) -> Vec<bool> {
        self.scope
            .iter()
            .map(|e| matches!(e, Entry::State { used: true, .. }))
            .collect()
    }

    fn restore_usage(&mut self, usage: &[bool]) {
        for (e, u) in self.scope.iter_mut().zip(usage) {
            if let Entry::State { used, .. } = e {
                *used = *u;
            }
        }
    }

    fn push_state(&mut self, name: &str, ty: &Type, span: Span) -> Result<()> {
        if !ty.is_state() {
            return err(
                TypeErrorKind::Mismatch,
                span,
                format!("`{name}` is bound by a linear binder but has non-state type `{ty}`"),
            );
        }
        self.well_formed(ty, span)?;
        self.scope.push(Entry::State {
            name: name.to_string(),
            ty: ty.clone(),
            used: false,
        });
        Ok(())
    }

    fn pop_state(&mut self, span: Span) -> Result<()> {
        match self.scope.pop() {
            Some(Entry::State {
                name, used: false, ..
            }) => err(
                TypeErrorKind::Linearity,
                span,
                format!("state variable `{name}` is never used"),
            ),
            _ => Ok(()),
        }
    }

    fn expect_eq(&self, expected: &Type, found: &Type, span: Span) -> Result<()> {
        types_equal(expected, found, &self.facts)
            .map_err(|kind| TypeError::mismatch(kind, span, expected, found))
    }

    fn check(&mut self, t: &Term, ty: &Type) -> Result<Term> {
        let span = t.span;
        let mk = |kind: TermKind| Term::new(kind, span);
        match (&t.kind, ty) {
            (TermKind::Lam { var, ty: ann, body }, Type::Lolli(a, b)) => {
                if let Some(ann) = ann {
                    self.expect_eq(a, ann, span)?;
                }
                self.push_state(var, a, span)?;
                let body = self.check(body, b)?;
                self.pop_state(span)?;
                Ok(mk(TermKind::Lam {
                    var: var.clone(),
                    ty: Some(ann.clone().unwrap_or_else(|| (**a).clone())),
                    body: Box::new(body),
                }))
            }
            (TermKind::PLam { var, ty: ann, body }, Type::Pi { var: pv, dom, body: pb }) => {
                let dom_ty = ann.clone().unwrap_or_else(|| (**dom).clone());
                self.expect_eq(dom, &dom_ty, span)?;
                let body_ty = if var == pv {
                    (**pb).clone()
                } else {
                    pb.subst_nat(pv, &NatExpr::Var(var.clone()))
                };
                self.scope.push(Entry::Param {
                    name: var.clone(),
                    ty: dom_ty.clone(),
                });
                let body = self.check(body, &body_ty);
                self.scope.pop();
                Ok(mk(TermKind::PLam {
                    var: var.clone(),
                    ty: Some(dom_ty),
                    body: Box::new(body?),
                }))
            }
            (TermKind::Pair(l, r), Type::Tensor(a, b)) => {
                let l = self.check(l, a)?;
                let r = self.check(r, b)?;
                Ok(mk(TermKind::Pair(Box::new(l), Box::new(r))))
            }
            (TermKind::Cons(h, tl), Type::Vec(a, n)) => {
                let h = self.check(h, a)?;
                let tail_len = NatExpr::sub(n.clone(), NatExpr::Const(1));
                if !nat_equal(&NatExpr::add(tail_len.clone(), NatExpr::Const(1)), n, &self.facts) {
                    return err(
                        TypeErrorKind::Size,
                        span,
                        format!("a cons cell has length at least 1, but `{n}` may be 0"),
                    );
                }
                let tl = self.check(tl, &Type::vec((**a).clone(), tail_len))?;
                Ok(mk(TermKind::Cons(Box::new(h), Box::new(tl))))
            }
            (TermKind::App(f, arg), _) if is_plain_let(f) => {
                let (var, body) = match &f.kind {
                    TermKind::Lam { var, body, .. } => (var, body),
                    _ => unreachable!(),
                };
                let (aty, arg) = self.synth_let_bound(f, arg)?;
                self.push_state(var, &aty, span)?;
                let body = self.check(body, ty)?;
                self.pop_state(span)?;
                Ok(rebuild_plain_let(f, var, aty, body, arg))
            }
            (
                TermKind::LetPair {
                    left,
                    left_ty,
                    right,
                    right_ty,
                    bound,
                    body,
                },
                _,
            ) => {
                let (lt, rt, bound) = self.let_pair_head(bound, left_ty, right_ty, span)?;
                self.push_state(left, &lt, span)?;
                self.push_state(right, &rt, span)?;
                let body = self.check(body, ty)?;
                self.pop_state(span)?;
                self.pop_state(span)?;
                Ok(mk(TermKind::LetPair {
                    left: left.clone(),
                    left_ty: Some(lt),
                    right: right.clone(),
                    right_ty: Some(rt),
                    bound: Box::new(bound),
                    body: Box::new(body),
                }))
            }
            (
                TermKind::LetCons {
                    head,
                    head_ty,
                    tail,
                    tail_ty,
                    bound,
                    body,
                },
                _,
            ) => {
                let (ht, tt, bound) = self.let_cons_head(bound, head_ty, tail_ty, span)?;
                let body = self.cons_binders(head, &ht, tail, &tt, span, |ck| ck.check(body, ty))?;
                Ok(mk(TermKind::LetCons {
                    head: head.clone(),
                    head_ty: Some(ht),
                    tail: tail.clone(),
                    tail_ty: Some(tt),
                    bound: Box::new(bound),
                    body: Box::new(body),
                }))
            }
            (TermKind::Seq(a, b), _) => {
                let a = self.check(a, &Type::Unit)?;
                let b = self.check(b, ty)?;
                Ok(mk(TermKind::Seq(Box::new(a), Box::new(b))))
            }
            (TermKind::SeqV(a, b), _) => {
                let a = self.seqv_head(a)?;
                let b = self.check(b, ty)?;
                Ok(mk(TermKind::SeqV(Box::new(a), Box::new(b))))
            }
            (TermKind::Ifz { guard, then, els }, _) => {
                let (g, l) = self.guard(guard)?;
                let (then, els) = self.ifz_branches(l.as_ref(), span, |ck| ck.check(then, ty), |ck, _| ck.check(els, ty))?;
                Ok(mk(TermKind::Ifz {
                    guard: Box::new(g),
                    then: Box::new(then),
                    els: Box::new(els),
                }))
            }
            (TermKind::For { index, list, body }, Type::Vec(a, n)) => {
                let (list, len) = self.iteration_list(list)?;
                if !nat_equal(&len, n, &self.facts) {
                    return Err(TypeError::mismatch(
                        TypeErrorKind::Size,
                        span,
                        ty,
                        &Type::vec((**a).clone(), len),
                    ));
                }
                let body = self.for_body(index, body, Some(a), span)?.1;
                Ok(mk(TermKind::For {
                    index: index.clone(),
                    list: Box::new(list),
                    body: Box::new(body),
                }))
            }
            _ => {
                let (found, t2) = self.synth(t)?;
                self.expect_eq(ty, &found, span)?;
                Ok(t2)
            }
        }
    }

    fn synth_let_bound(&mut self, f: &Term, arg: &Term) -> Result<(Type, Term)> {
        let ann = match &f.kind {
            TermKind::Lam { ty, .. } => ty.clone(),
            _ => None,
        };
        match ann {
            Some(a) => {
                self.well_formed(&a, f.span)?;
                let arg = self.check(arg, &a)?;
                Ok((a, arg))
            }
            None => self.synth(arg),
        }
    }

    fn let_pair_head(
        &mut self,
        bound: &Term,
        left_ty: &Option<Type>,
        right_ty: &Option<Type>,
        span: Span,
    ) -> Result<(Type, Type, Term)> {
        if let (Some(a), Some(b)) = (left_ty, right_ty) {
            let bound = self.check(bound, &Type::tensor(a.clone(), b.clone()))?;
            return Ok((a.clone(), b.clone(), bound));
        }
        let (bt, bound) = self.synth(bound)?;
        match bt {
            Type::Tensor(a, b) => {
                if let Some(la) = left_ty {
                    self.expect_eq(la, &a, span)?;
                }
                if let Some(rb) = right_ty {
                    self.expect_eq(rb, &b, span)?;
                }
                Ok((*a, *b, bound))
            }
            other => err(
                TypeErrorKind::Mismatch,
                bound.span,
                format!("`let x (*) y` needs a tensor, found `{other}`"),
            ),
        }
    }

    fn let_cons_head(
        &mut self,
        bound: &Term,
        head_ty: &Option<Type>,
        tail_ty: &Option<Type>,
        span: Span,
    ) -> Result<(Type, Type, Term)> {
        let (bt, bound) = self.synth(bound)?;
        let (elem, n) = match bt {
            Type::Vec(a, n) => (*a, n),
            other => {
                return err(
                    TypeErrorKind::Mismatch,
                    bound.span,
                    format!("`let x :: y` needs a vector, found `{other}`"),
                )
            }
        };
        if let Some(h) = head_ty {
            self.expect_eq(h, &elem, span)?;
        }
        let tail_len = match tail_ty {
            Some(Type::Vec(a, m)) => {
                self.expect_eq(a, &elem, span)?;
                m.clone()
            }
            Some(other) => {
                return Err(TypeError::mismatch(
                    TypeErrorKind::Mismatch,
                    span,
                    &Type::vec(elem, NatExpr::sub(n, NatExpr::Const(1))),
                    other,
                ))
            }
            None => NatExpr::sub(n.clone(), NatExpr::Const(1)),
        };
        if !nat_equal(&NatExpr::add(tail_len.clone(), NatExpr::Const(1)), &n, &self.facts) {
            return err(
                TypeErrorKind::Size,
                bound.span,
                format!("cannot destructure a vector of length `{n}`: it may be empty"),
            );
        }
        Ok((elem.clone(), Type::vec(elem, tail_len), bound))
    }

    fn seqv_head(&mut self, a: &Term) -> Result<Term> {
        let (at, a2) = self.synth(a)?;
        match &at {
            Type::Vec(_, n) if nat_equal(n, &NatExpr::Const(0), &self.facts) => Ok(a2),
            Type::Vec(..) => err(
                TypeErrorKind::Size,
                a.span,
                format!("`;v` discards only empty vectors, found `{at}`"),
            ),
            _ => err(
                TypeErrorKind::Mismatch,
                a.span,
                format!("`;v` discards a vector, found `{at}`"),
            ),
        }
    }

    /// Types a parameter-position term: no state may be consumed.
    fn param_term(&mut self, t: &Term) -> Result<(Type, Term)> {
        self.with_barrier(Barrier::Parameter, |ck| ck.synth(t))
    }

    /// Types a guard and, when it has one, its size expression. A guard
    /// without one gives the branches no facts.
    fn guard(&mut self, guard: &Term) -> Result<(Term, Option<NatExpr>)> {
        let (gt, g) = self.param_term(guard)?;
        if gt != Type::Nat {
            return err(
                TypeErrorKind::NonNatParameter,
                guard.span,
                format!("`ifz` tests a Nat, found `{gt}`"),
            );
        }
        let l = size_expr(&g);
        Ok((g, l))
    }

    /// Checks both branches of an `ifz` under their guard facts; they must
    /// consume the same state variables.
    fn ifz_branches<A, B>(
        &mut self,
        l: Option<&NatExpr>,
        span: Span,
        then: impl FnOnce(&mut Self) -> Result<A>,
        els: impl FnOnce(&mut Self, &A) -> Result<B>,
    ) -> Result<(A, B)> {
        let before = self.usage();
        let saved = self.facts.clone();
        if let Some(l) = l {
            self.facts.assume_zero(l);
        }
        let then_r = then(self);
        self.facts = saved.clone();
        let a = then_r?;
        let after_then = self.usage();
        self.restore_usage(&before);
        if let Some(l) = l {
            self.facts.assume_positive(l);
        }
        let els_r = els(self, &a);
        self.facts = saved;
        let b = els_r?;
        self.same_usage(&after_then, span)?;
        Ok((a, b))
    }

    fn iteration_list(&mut self, list: &Term) -> Result<(Term, NatExpr)> {
        let (lt, l2) = self.param_term(list)?;
        match lt {
            Type::Vec(a, n) if *a == Type::Nat => Ok((l2, n)),
            other => err(
                TypeErrorKind::NonNatParameter,
                list.span,
                format!("`for` iterates over a Vec Nat, found `{other}`"),
            ),
        }
    }

    fn for_body(
        &mut self,
        index: &str,
        body: &Term,
        expected: Option<&Type>,
        span: Span,
    ) -> Result<(Type, Term)> {
        self.scope.push(Entry::Param {
            name: index.to_string(),
            ty: Type::Nat,
        });
        // The index is the newest entry, so everything before it is blocked.
        self.barriers.push((self.scope.len() - 1, Barrier::ForBody));
        let r = match expected {
            Some(a) => self.check(body, a).map(|b| (a.clone(), b)),
            None => self.synth(body),
        };
        self.barriers.pop();
        self.scope.pop();
        let (ty, body) = r?;
        if ty.free_vars().contains(index) {
            return err(
                TypeErrorKind::Mismatch,
                span,
                format!("element type `{ty}` of a `for` depends on the index `{index}`"),
            );
        }
        Ok((ty, body))
    }

    fn synth(&mut self, t: &Term) -> Result<(Type, Term)> {
        let span = t.span;
        let same = |ty: Type| Ok((ty, t.clone()));
        let mk = |kind: TermKind| Term::new(kind, span);
        match &t.kind {
            TermKind::Var(x) => self.use_var(x, span).map(|ty| (ty, t.clone())),
            TermKind::Bit(_) => same(Type::Bit),
            TermKind::Num(_) => same(Type::Nat),
            TermKind::Unit => same(Type::Unit),
            TermKind::Nil(a) => {
                self.well_formed(a, span)?;
                same(Type::vec(a.clone(), NatExpr::Const(0)))
            }
            TermKind::Meas => same(Type::lolli(Type::Qubit, Type::Bit)),
            TermKind::New => same(Type::lolli(Type::Bit, Type::Qubit)),
            TermKind::Gate(g) => same(gate_type(*g)),
            TermKind::Rot(_) => same(rotation_type()),
            TermKind::Prim(p) => {
                for a in p.type_args() {
                    self.well_formed(a, span)?;
                    if !a.is_state() {
                        return err(
                            TypeErrorKind::Mismatch,
                            span,
                            format!("type argument `{a}` of `{}` is not a state type", p.name()),
                        );
                    }
                }
                if matches!(p, Prim::Reverse) {
                    return err(
                        TypeErrorKind::Unsupported,
                        span,
                        "`reverse` must be applied to a parameter vector with `@`",
                    );
                }
                same(prim_type(p))
            }
            TermKind::Macro(m) => {
                for a in m.type_args() {
                    self.well_formed(a, span)?;
                    if !a.is_state() {
                        return err(
                            TypeErrorKind::Mismatch,
                            span,
                            format!("type argument `{a}` of `{}` is not a state type", m.name()),
                        );
                    }
                }
                same(macro_type(m))
            }
            TermKind::Lam { var, ty, body } => {
                let a = ty.clone().ok_or_else(|| {
                    TypeError::new(
                        TypeErrorKind::Unsupported,
                        span,
                        format!("cannot infer the type of `{var}`; annotate it as `\\{var}:T.`"),
                    )
                })?;
                self.push_state(var, &a, span)?;
                let (b, body) = self.synth(body)?;
                self.pop_state(span)?;
                Ok((
                    Type::lolli(a.clone(), b),
                    mk(TermKind::Lam {
                        var: var.clone(),
                        ty: Some(a),
                        body: Box::new(body),
                    }),
                ))
            }
            TermKind::PLam { var, ty, body } => {
                let dom = ty.clone().unwrap_or(Type::Nat);
                if !dom.is_param() {
                    return err(
                        TypeErrorKind::NonNatParameter,
                        span,
                        format!("parameter `{var}` must have type Nat or Vec Nat n, not `{dom}`"),
                    );
                }
                self.well_formed(&dom, span)?;
                self.scope.push(Entry::Param {
                    name: var.clone(),
                    ty: dom.clone(),
                });
                let r = self.synth(body);
                self.scope.pop();
                let (b, body) = r?;
                Ok((
                    Type::pi(var.clone(), dom.clone(), b),
                    mk(TermKind::PLam {
                        var: var.clone(),
                        ty: Some(dom),
                        body: Box::new(body),
                    }),
                ))
            }
            TermKind::App(f, arg) if is_plain_let(f) => {
                let (var, body) = match &f.kind {
                    TermKind::Lam { var, body, .. } => (var, body),
                    _ => unreachable!(),
                };
                let (aty, arg) = self.synth_let_bound(f, arg)?;
                self.push_state(var, &aty, span)?;
                let (bty, body) = self.synth(body)?;
                self.pop_state(span)?;
                Ok((bty, rebuild_plain_let(f, var, aty, body, arg)))
            }
            TermKind::App(f, arg) => {
                let (ft, f2) = self.synth(f)?;
                match ft {
                    Type::Lolli(a, b) => {
                        let arg = self.check(arg, &a)?;
                        Ok((*b, mk(TermKind::App(Box::new(f2), Box::new(arg)))))
                    }
                    Type::Pi { .. } => err(
                        TypeErrorKind::NonNatParameter,
                        span,
                        "function expects a parameter; apply it with `@`",
                    ),
                    other => err(
                        TypeErrorKind::Mismatch,
                        f.span,
                        format!("applying a non-function of type `{other}`"),
                    ),
                }
            }
            TermKind::PApp(f, arg) => {
                if matches!(f.kind, TermKind::Prim(Prim::Reverse)) {
                    let (at, a2) = self.param_term(arg)?;
                    return match at {
                        Type::Vec(e, n) if *e == Type::Nat => Ok((
                            Type::vec(Type::Nat, n),
                            mk(TermKind::PApp(f.clone(), Box::new(a2))),
                        )),
                        other => err(
                            TypeErrorKind::NonNatParameter,
                            arg.span,
                            format!("`reverse` takes a Vec Nat, found `{other}`"),
                        ),
                    };
                }
                let (ft, f2) = self.synth(f)?;
                let (var, dom, body) = match ft {
                    Type::Pi { var, dom, body } => (var, dom, body),
                    other => {
                        return err(
                            TypeErrorKind::Mismatch,
                            f.span,
                            format!("`@` applied to a term of type `{other}`, which takes no parameter"),
                        )
                    }
                };
                let (at, a2) = self.param_term(arg)?;
                // Only a dependent result needs the argument as a size.
                let dependent = body.free_vars().contains(&var);
                let value = match (&*dom, &at) {
                    (Type::Nat, Type::Nat) if !dependent => None,
                    (Type::Vec(..), Type::Vec(e, _)) if **e == Type::Nat && !dependent => {
                        self.expect_eq(&dom, &at, arg.span)?;
                        None
                    }
                    (Type::Nat, Type::Nat) => Some(ParamSubst::Nat(size_expr(&a2).ok_or_else(|| {
                        TypeError::new(
                            TypeErrorKind::Unsupported,
                            arg.span,
                            "parameter argument is not a size expression",
                        )
                    })?)),
                    (Type::Vec(..), Type::Vec(e, _)) if **e == Type::Nat => {
                        self.expect_eq(&dom, &at, arg.span)?;
                        Some(ParamSubst::List(list_expr(&a2).ok_or_else(|| {
                            TypeError::new(
                                TypeErrorKind::Unsupported,
                                arg.span,
                                "parameter argument is not a list expression",
                            )
                        })?))
                    }
                    _ => {
                        return Err(TypeError::mismatch(
                            TypeErrorKind::NonNatParameter,
                            arg.span,
                            &dom,
                            &at,
                        ))
                    }
                };
                let result = match value {
                    Some(value) => body.subst_param(&var, &value),
                    None => *body,
                };
                Ok((
                    result,
                    mk(TermKind::PApp(Box::new(f2), Box::new(a2))),
                ))
            }
            TermKind::Pair(l, r) => {
                let (a, l) = self.synth(l)?;
                let (b, r) = self.synth(r)?;
                Ok((Type::tensor(a, b), mk(TermKind::Pair(Box::new(l), Box::new(r)))))
            }
            TermKind::LetPair {
                left,
                left_ty,
                right,
                right_ty,
                bound,
                body,
            } => {
                let (lt, rt, bound) = self.let_pair_head(bound, left_ty, right_ty, span)?;
                self.push_state(left, &lt, span)?;
                self.push_state(right, &rt, span)?;
                let (ct, body) = self.synth(body)?;
                self.pop_state(span)?;
                self.pop_state(span)?;
                self.escape_check(&ct, &[left, right], span)?;
                Ok((
                    ct,
                    mk(TermKind::LetPair {
                        left: left.clone(),
                        left_ty: Some(lt),
                        right: right.clone(),
                        right_ty: Some(rt),
                        bound: Box::new(bound),
                        body: Box::new(body),
                    }),
                ))
            }
            TermKind::Seq(a, b) => {
                let a = self.check(a, &Type::Unit)?;
                let (bt, b) = self.synth(b)?;
                Ok((bt, mk(TermKind::Seq(Box::new(a), Box::new(b)))))
            }
            TermKind::SeqV(a, b) => {
                let a = self.seqv_head(a)?;
                let (bt, b) = self.synth(b)?;
                Ok((bt, mk(TermKind::SeqV(Box::new(a), Box::new(b)))))
            }
            TermKind::Cons(h, tl) => {
                let (a, h) = self.synth(h)?;
                let (tt, tl2) = self.synth(tl)?;
                match tt {
                    Type::Vec(a2, n) => {
                        self.expect_eq(&a, &a2, tl.span)?;
                        Ok((
                            Type::vec(a, NatExpr::add(n, NatExpr::Const(1))),
                            mk(TermKind::Cons(Box::new(h), Box::new(tl2))),
                        ))
                    }
                    other => err(
                        TypeErrorKind::Mismatch,
                        tl.span,
                        format!("the tail of `::` must be a vector, found `{other}`"),
                    ),
                }
            }
            TermKind::LetCons {
                head,
                head_ty,
                tail,
                tail_ty,
                bound,
                body,
            } => {
                let (ht, tt, bound) = self.let_cons_head(bound, head_ty, tail_ty, span)?;
                let (ct, body) = self.cons_binders(head, &ht, tail, &tt, span, |ck| ck.synth(body))?;
                if ht.is_param() {
                    let free = ct.free_vars();
                    if free.contains(head) || free.contains(tail) {
                        return err(
                            TypeErrorKind::Size,
                            span,
                            format!("the type `{ct}` depends on `{head}` or `{tail}` outside their scope"),
                        );
                    }
                }
                Ok((
                    ct,
                    mk(TermKind::LetCons {
                        head: head.clone(),
                        head_ty: Some(ht),
                        tail: tail.clone(),
                        tail_ty: Some(tt),
                        bound: Box::new(bound),
                        body: Box::new(body),
                    }),
                ))
            }
            TermKind::Arith(op, a, b) => {
                let (at, a2) = self.param_term(a)?;
                let (bt, b2) = self.param_term(b)?;
                for (ty, sub) in [(&at, a), (&bt, b)] {
                    if *ty != Type::Nat {
                        return err(
                            TypeErrorKind::NonNatParameter,
                            sub.span,
                            format!("arithmetic on a non-Nat operand of type `{ty}`"),
                        );
                    }
                }
                Ok((Type::Nat, mk(TermKind::Arith(*op, Box::new(a2), Box::new(b2)))))
            }
            TermKind::Ifz { guard, then, els } => {
                let (g, l) = self.guard(guard)?;
                let ((_, then), (b, els)) = self.ifz_branches(
                    l.as_ref(),
                    span,
                    |ck| ck.synth(then),
                    |ck, (a, _)| {
                        let before = ck.usage();
                        match ck.check(els, a) {
                            Ok(e) => Ok((a.clone(), e)),
                            // Branch sizes may differ; they are merged below.
                            Err(e) if e.kind == TypeErrorKind::Size => {
                                ck.restore_usage(&before);
                                let (b, e2) = ck.synth(els)?;
                                l.as_ref()
                                    .and_then(|l| merge_branch_types(a, &b, l))
                                    .map(|m| (m, e2))
                                    .ok_or(e)
                            }
                            Err(e) => Err(e),
                        }
                    },
                )?;
                Ok((
                    b,
                    mk(TermKind::Ifz {
                        guard: Box::new(g),
                        then: Box::new(then),
                        els: Box::new(els),
                    }),
                ))
            }
            TermKind::For { index, list, body } => {
                let (list, len) = self.iteration_list(list)?;
                let (a, body) = self.for_body(index, body, None, span)?;
                Ok((
                    Type::vec(a, len),
                    mk(TermKind::For {
                        index: index.clone(),
                        list: Box::new(list),
                        body: Box::new(body),
                    }),
                ))
            }
        }
    }

    /// Types in this calculus never mention state variables, so nothing can
    /// escape a linear binder.
    /// Binds the head and tail of a `let ::` around `f`: as parameters when
    /// the elements are naturals, else as linear state variables.
    fn cons_binders<T>(
        &mut self,
        head: &str,
        ht: &Type,
        tail: &str,
        tt: &Type,
        span: Span,
        f: impl FnOnce(&mut Self) -> Result<T>,
    ) -> Result<T> {
        if ht.is_param() {
            for (name, ty) in [(head, ht), (tail, tt)] {
                self.scope.push(Entry::Param {
                    name: name.to_string(),
                    ty: ty.clone(),
                });
            }
            let out = f(self);
            self.scope.pop();
            self.scope.pop();
            return out;
        }
        self.push_state(head, ht, span)?;
        self.push_state(tail, tt, span)?;
        let out = f(self)?;
        self.pop_state(span)?;
        self.pop_state(span)?;
        Ok(out)
    }

    fn escape_check(&self, _ty: &Type, _names: &[&String], _span: Span) -> Result<()> {
        Ok(())
    }

    fn same_usage(&self, other: &[bool], span: Span) -> Result<()> {
        let now = self.usage();
        for (i, (a, b)) in now.iter().zip(other).enumerate() {
            if a != b {
                let name = self.scope[i].name();
                return err(
                    TypeErrorKind::Linearity,
                    span,
                    format!("state variable `{name}` is used in only one branch of `ifz`"),
                );
            }
        }
        Ok(())
    }

    fn use_var(&mut self, x: &str, span: Span) -> Result<Type> {
        let (idx, entry) = match self.lookup(x) {
            Some(found) => found,
            None => {
                return err(
                    TypeErrorKind::Unbound,
                    span,
                    format!("`{x}` is not bound"),
                )
            }
        };
        match entry {
            Entry::Param { ty, .. } => Ok(ty.clone()),
            Entry::State { ty, used, .. } => {
                let ty = ty.clone();
                match self.barrier_for(idx) {
                    Some(Barrier::Parameter) => {
                        return err(
                            TypeErrorKind::NonNatParameter,
                            span,
                            format!("state variable `{x}` used in a parameter position"),
                        )
                    }
                    Some(Barrier::ForBody) => {
                        return err(
                            TypeErrorKind::Linearity,
                            span,
                            format!("state variable `{x}` is captured by a `for` body, which is replicated"),
                        )
                    }
                    None => {}
                }
                if *used {
                    return err(
                        TypeErrorKind::Linearity,
                        span,
                        format!("state variable `{x}` is used more than once"),
                    );
                }
                if let Entry::State { used, .. } = &mut self.scope[idx] {
                    *used = true;
                }
                Ok(ty)
            }
        }
    }
}

/// The type of an `ifz` whose branches agree up to sizes: differing sizes
/// become `ite0` on the guard.
/// The size that is `zero` when `guard` is zero and `positive` otherwise,
/// without a conditional when the facts of one branch make both agree.
pub fn merge_sizes(zero: &NatExpr, positive: &NatExpr, guard: &NatExpr) -> NatExpr {
    if nat_equal(zero, positive, &Facts::new()) {
        return zero.clone();
    }
    let mut facts = Facts::new();
    facts.assume_positive(guard);
    if nat_equal(zero, positive, &facts) {
        return zero.clone();
    }
    let mut facts = Facts::new();
    facts.assume_zero(guard);
    if nat_equal(zero, positive, &facts) {
        return positive.clone();
    }
    NatExpr::ite0(guard.clone(), zero.clone(), positive.clone())
}

fn merge_branch_types(a: &Type, b: &Type, guard: &NatExpr) -> Option<Type> {
    match (a, b) {
        (Type::Vec(x, n), Type::Vec(y, m)) => {
            let elem = merge_branch_types(x, y, guard)?;
            Some(Type::vec(elem, merge_sizes(n, m, guard)))
        }
        (Type::Tensor(a1, a2), Type::Tensor(b1, b2)) => Some(Type::tensor(
            merge_branch_types(a1, b1, guard)?,
            merge_branch_types(a2, b2, guard)?,
        )),
        (Type::Lolli(a1, a2), Type::Lolli(b1, b2)) => Some(Type::lolli(
            merge_branch_types(a1, b1, guard)?,
            merge_branch_types(a2, b2, guard)?,
        )),
        _ if a == b => Some(a.clone()),
        _ => None,
    }
}

fn is_plain_let(f: &Term) -> bool {
    matches!(f.kind, TermKind::Lam { ty: None, .. })
}

fn rebuild_plain_let(f: &Term, var: &str, aty: Type, body: Term, arg: Term) -> Term {
    let lam = Term::new(
        TermKind::Lam {
            var: var.to_string(),
            ty: Some(aty),
            body: Box::new(body),
        },
        f.span,
    );
    Term::new(TermKind::App(Box::new(lam), Box::new(arg)), f.span)
}

/// Length of an evaluated parameter list, symbolically.
pub fn list_length(l: &NatListExpr) -> Option<NatExpr> {
    l.len_expr()
}

/// A parameter term as a size, reducing it first when it uses constructs
/// sizes lack, such as `let ::`.
fn size_expr(t: &Term) -> Option<NatExpr> {
    term_to_nat(t).or_else(|| term_to_nat(&reduce_term(t, DEFAULT_FUEL).ok()?))
}

fn list_expr(t: &Term) -> Option<NatListExpr> {
    term_to_natlist(t).or_else(|| term_to_natlist(&reduce_term(t, DEFAULT_FUEL).ok()?))
}

