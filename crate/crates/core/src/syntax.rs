// SPDX-License-Identifier: Apache-2.0

//! Abstract syntax of the calculus: types, terms and contexts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::nat::{fresh_name, NatExpr, NatListExpr, NatOp, ParamSubst};

/// Source position, 1-based. `line == 0` means unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub const UNKNOWN: Span = Span { line: 0, col: 0 };

    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Type {
    Bit,
    Qubit,
    Unit,
    Tensor(Box<Type>, Box<Type>),
    Lolli(Box<Type>, Box<Type>),
    Vec(Box<Type>, NatExpr),
    Nat,
    /// `(var : dom) -> body`, where `dom` is `Nat` or `Vec Nat e`.
    Pi {
        var: String,
        dom: Box<Type>,
        body: Box<Type>,
    },
}

/// Whether a type denotes compile-time data or a quantum map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Evaluable,
    Translatable,
}

impl Type {
    pub fn tensor(a: Type, b: Type) -> Type {
        Type::Tensor(Box::new(a), Box::new(b))
    }

    pub fn lolli(a: Type, b: Type) -> Type {
        Type::Lolli(Box::new(a), Box::new(b))
    }

    pub fn vec(a: Type, n: NatExpr) -> Type {
        Type::Vec(Box::new(a), n)
    }

    pub fn pi(var: impl Into<String>, dom: Type, body: Type) -> Type {
        Type::Pi {
            var: var.into(),
            dom: Box::new(dom),
            body: Box::new(body),
        }
    }

    /// `Nat` or `Vec Nat e`.
    pub fn is_param(&self) -> bool {
        match self {
            Type::Nat => true,
            Type::Vec(elem, _) => **elem == Type::Nat,
            _ => false,
        }
    }

    /// Built only from bits, qubits, unit, tensors, linear arrows and vectors.
    pub fn is_state(&self) -> bool {
        match self {
            Type::Bit | Type::Qubit | Type::Unit => true,
            Type::Tensor(a, b) | Type::Lolli(a, b) => a.is_state() && b.is_state(),
            Type::Vec(a, _) => a.is_state(),
            Type::Nat | Type::Pi { .. } => false,
        }
    }

    /// Codomain after stripping every dependent arrow.
    pub fn final_codomain(&self) -> &Type {
        match self {
            Type::Pi { body, .. } => body.final_codomain(),
            other => other,
        }
    }

    pub fn classify(&self) -> Option<Classification> {
        let cod = self.final_codomain();
        if cod.is_param() {
            Some(Classification::Evaluable)
        } else if cod.is_state() {
            Some(Classification::Translatable)
        } else {
            None
        }
    }

    /// Free parameter names occurring in size indices.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<String>) {
        match self {
            Type::Bit | Type::Qubit | Type::Unit | Type::Nat => {}
            Type::Tensor(a, b) | Type::Lolli(a, b) => {
                a.collect_free(out);
                b.collect_free(out);
            }
            Type::Vec(a, n) => {
                a.collect_free(out);
                out.extend(n.free_vars());
            }
            Type::Pi { var, dom, body } => {
                dom.collect_free(out);
                let mut inner = body.free_vars();
                inner.remove(var);
                out.extend(inner);
            }
        }
    }

    pub fn subst_nat(&self, name: &str, value: &NatExpr) -> Type {
        self.subst_param(name, &ParamSubst::Nat(value.clone()))
    }

    pub fn subst_param(&self, name: &str, value: &ParamSubst) -> Type {
        match self {
            Type::Bit | Type::Qubit | Type::Unit | Type::Nat => self.clone(),
            Type::Tensor(a, b) => Type::tensor(a.subst_param(name, value), b.subst_param(name, value)),
            Type::Lolli(a, b) => Type::lolli(a.subst_param(name, value), b.subst_param(name, value)),
            Type::Vec(a, n) => Type::vec(a.subst_param(name, value), n.subst_param(name, value)),
            Type::Pi { var, dom, body } => {
                let dom = dom.subst_param(name, value);
                if var == name {
                    return Type::pi(var.clone(), dom, (**body).clone());
                }
                let value_fv = match value {
                    ParamSubst::Nat(e) => e.free_vars(),
                    ParamSubst::List(l) => l.free_vars(),
                };
                let (var, body) = if value_fv.contains(var) {
                    let mut avoid = value_fv;
                    avoid.extend(body.free_vars());
                    let fresh = fresh_name(var, &avoid);
                    let renamed = body.subst_nat(var, &NatExpr::Var(fresh.clone()));
                    (fresh, renamed)
                } else {
                    (var.clone(), (**body).clone())
                };
                Type::pi(var, dom, body.subst_param(name, value))
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        // 0: arrows allowed, 1: tensor operand, 2: atom
        match self {
            Type::Bit => write!(f, "B"),
            Type::Qubit => write!(f, "Q"),
            Type::Unit => write!(f, "Unit"),
            Type::Nat => write!(f, "Nat"),
            Type::Vec(a, n) => {
                if ctx >= 2 {
                    write!(f, "(")?;
                }
                write!(f, "Vec ")?;
                a.fmt_prec(f, 2)?;
                write!(f, " ")?;
                fmt_nat_atom(f, n)?;
                if ctx >= 2 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Type::Tensor(a, b) => {
                if ctx >= 2 {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, 2)?;
                write!(f, " * ")?;
                b.fmt_prec(f, 1)?;
                if ctx >= 2 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Type::Lolli(a, b) => {
                if ctx >= 1 {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, 1)?;
                write!(f, " -o ")?;
                b.fmt_prec(f, 0)?;
                if ctx >= 1 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Type::Pi { var, dom, body } => {
                if ctx >= 1 {
                    write!(f, "(")?;
                }
                write!(f, "({var} : {dom}) -> ")?;
                body.fmt_prec(f, 0)?;
                if ctx >= 1 {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

fn fmt_nat_atom(f: &mut fmt::Formatter<'_>, n: &NatExpr) -> fmt::Result {
    match n {
        NatExpr::Const(_) | NatExpr::Var(_) => write!(f, "{n}"),
        _ => write!(f, "({n})"),
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    H,
    Cnot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rotation {
    Rz,
    RzInv,
    Rx,
    RxInv,
}

impl Rotation {
    pub fn name(self) -> &'static str {
        match self {
            Rotation::Rz => "Rz",
            Rotation::RzInv => "RzInv",
            Rotation::Rx => "Rx",
            Rotation::RxInv => "RxInv",
        }
    }

    /// Sign of the phase: `+1` for the rotation, `-1` for its inverse.
    pub fn sign(self) -> i64 {
        match self {
            Rotation::Rz | Rotation::Rx => 1,
            Rotation::RzInv | Rotation::RxInv => -1,
        }
    }

    pub fn is_x(self) -> bool {
        matches!(self, Rotation::Rx | Rotation::RxInv)
    }
}

/// Built-in bounded recursion schemes, decorated with their element types.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Prim {
    AccuMap(Type, Type, Type),
    Split(Type),
    Append(Type),
    Drop,
    Range,
    Reverse,
}

/// Derived vector combinators, expanded before reduction and translation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Macro {
    Map(Type, Type),
    Fold(Type, Type),
    Compose(Type),
}

impl Prim {
    pub fn name(&self) -> &'static str {
        match self {
            Prim::AccuMap(..) => "accuMap",
            Prim::Split(_) => "split",
            Prim::Append(_) => "append",
            Prim::Drop => "drop",
            Prim::Range => "range",
            Prim::Reverse => "reverse",
        }
    }

    pub fn type_args(&self) -> Vec<&Type> {
        match self {
            Prim::AccuMap(a, b, c) => vec![a, b, c],
            Prim::Split(a) | Prim::Append(a) => vec![a],
            Prim::Drop | Prim::Range | Prim::Reverse => vec![],
        }
    }

    /// Number of parameter arguments followed by state arguments.
    pub fn arity(&self) -> (usize, usize) {
        match self {
            Prim::AccuMap(..) => (1, 3),
            Prim::Split(_) => (2, 1),
            Prim::Append(_) => (2, 2),
            Prim::Drop => (1, 1),
            Prim::Range => (2, 0),
            Prim::Reverse => (1, 0),
        }
    }

    fn map_types(&self, f: &impl Fn(&Type) -> Type) -> Prim {
        match self {
            Prim::AccuMap(a, b, c) => Prim::AccuMap(f(a), f(b), f(c)),
            Prim::Split(a) => Prim::Split(f(a)),
            Prim::Append(a) => Prim::Append(f(a)),
            other => other.clone(),
        }
    }
}

impl Macro {
    pub fn name(&self) -> &'static str {
        match self {
            Macro::Map(..) => "map",
            Macro::Fold(..) => "fold",
            Macro::Compose(_) => "compose",
        }
    }

    pub fn type_args(&self) -> Vec<&Type> {
        match self {
            Macro::Map(a, b) | Macro::Fold(a, b) => vec![a, b],
            Macro::Compose(a) => vec![a],
        }
    }

    fn map_types(&self, f: &impl Fn(&Type) -> Type) -> Macro {
        match self {
            Macro::Map(a, b) => Macro::Map(f(a), f(b)),
            Macro::Fold(a, b) => Macro::Fold(f(a), f(b)),
            Macro::Compose(a) => Macro::Compose(f(a)),
        }
    }
}

/// A term with its source position. Positions never affect equality.
#[derive(Debug, Clone)]
pub struct Term {
    pub kind: TermKind,
    pub span: Span,
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for Term {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermKind {
    Var(String),
    Bit(bool),
    Num(u64),
    Unit,
    Nil(Type),
    Meas,
    New,
    Gate(Gate),
    Rot(Rotation),
    Prim(Prim),
    Macro(Macro),
    Lam {
        var: String,
        ty: Option<Type>,
        body: Box<Term>,
    },
    App(Box<Term>, Box<Term>),
    PLam {
        var: String,
        ty: Option<Type>,
        body: Box<Term>,
    },
    PApp(Box<Term>, Box<Term>),
    Pair(Box<Term>, Box<Term>),
    LetPair {
        left: String,
        left_ty: Option<Type>,
        right: String,
        right_ty: Option<Type>,
        bound: Box<Term>,
        body: Box<Term>,
    },
    Seq(Box<Term>, Box<Term>),
    SeqV(Box<Term>, Box<Term>),
    Cons(Box<Term>, Box<Term>),
    LetCons {
        head: String,
        head_ty: Option<Type>,
        tail: String,
        tail_ty: Option<Type>,
        bound: Box<Term>,
        body: Box<Term>,
    },
    Arith(NatOp, Box<Term>, Box<Term>),
    Ifz {
        guard: Box<Term>,
        then: Box<Term>,
        els: Box<Term>,
    },
    For {
        index: String,
        list: Box<Term>,
        body: Box<Term>,
    },
}

/// Shorthand constructors with unknown spans, used by tests and expansions.
pub mod build {
    use super::*;

    pub fn t(kind: TermKind) -> Term {
        Term {
            kind,
            span: Span::UNKNOWN,
        }
    }
    pub fn var(x: &str) -> Term {
        t(TermKind::Var(x.to_string()))
    }
    pub fn num(n: u64) -> Term {
        t(TermKind::Num(n))
    }
    pub fn bit(b: bool) -> Term {
        t(TermKind::Bit(b))
    }
    pub fn unit() -> Term {
        t(TermKind::Unit)
    }
    pub fn nil(ty: Type) -> Term {
        t(TermKind::Nil(ty))
    }
    pub fn lam(x: &str, ty: Type, body: Term) -> Term {
        t(TermKind::Lam {
            var: x.to_string(),
            ty: Some(ty),
            body: Box::new(body),
        })
    }
    pub fn plam(x: &str, body: Term) -> Term {
        t(TermKind::PLam {
            var: x.to_string(),
            ty: Some(Type::Nat),
            body: Box::new(body),
        })
    }
    pub fn app(f: Term, a: Term) -> Term {
        t(TermKind::App(Box::new(f), Box::new(a)))
    }
    pub fn apps(f: Term, args: Vec<Term>) -> Term {
        args.into_iter().fold(f, app)
    }
    pub fn papp(f: Term, a: Term) -> Term {
        t(TermKind::PApp(Box::new(f), Box::new(a)))
    }
    pub fn pair(a: Term, b: Term) -> Term {
        t(TermKind::Pair(Box::new(a), Box::new(b)))
    }
    pub fn cons(a: Term, b: Term) -> Term {
        t(TermKind::Cons(Box::new(a), Box::new(b)))
    }
    pub fn seq(a: Term, b: Term) -> Term {
        t(TermKind::Seq(Box::new(a), Box::new(b)))
    }
    pub fn seqv(a: Term, b: Term) -> Term {
        t(TermKind::SeqV(Box::new(a), Box::new(b)))
    }
    pub fn arith(op: NatOp, a: Term, b: Term) -> Term {
        t(TermKind::Arith(op, Box::new(a), Box::new(b)))
    }
    pub fn ifz(g: Term, a: Term, b: Term) -> Term {
        t(TermKind::Ifz {
            guard: Box::new(g),
            then: Box::new(a),
            els: Box::new(b),
        })
    }
    pub fn for_(k: &str, list: Term, body: Term) -> Term {
        t(TermKind::For {
            index: k.to_string(),
            list: Box::new(list),
            body: Box::new(body),
        })
    }
    pub fn let_pair(x: &str, ty_x: Option<Type>, y: &str, ty_y: Option<Type>, m: Term, n: Term) -> Term {
        t(TermKind::LetPair {
            left: x.to_string(),
            left_ty: ty_x,
            right: y.to_string(),
            right_ty: ty_y,
            bound: Box::new(m),
            body: Box::new(n),
        })
    }
    pub fn let_cons(x: &str, ty_x: Option<Type>, y: &str, ty_y: Option<Type>, m: Term, n: Term) -> Term {
        t(TermKind::LetCons {
            head: x.to_string(),
            head_ty: ty_x,
            tail: y.to_string(),
            tail_ty: ty_y,
            bound: Box::new(m),
            body: Box::new(n),
        })
    }
    pub fn prim(p: Prim) -> Term {
        t(TermKind::Prim(p))
    }
    pub fn range(lo: Term, hi: Term) -> Term {
        papp(papp(prim(Prim::Range), lo), hi)
    }
}

/// Free variables, split by the position they occur in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FreeVars {
    /// Names used as parameters: arithmetic, guards, `@` arguments,
    /// iteration lists and size indices.
    pub params: BTreeSet<String>,
    /// Names used in state positions.
    pub states: BTreeSet<String>,
}

impl FreeVars {
    pub fn all(&self) -> BTreeSet<String> {
        self.params.union(&self.states).cloned().collect()
    }
}

impl Term {
    pub fn new(kind: TermKind, span: Span) -> Self {
        Term { kind, span }
    }

    fn with_kind(&self, kind: TermKind) -> Term {
        Term {
            kind,
            span: self.span,
        }
    }

    pub fn is_value(&self) -> bool {
        matches!(
            self.kind,
            TermKind::Var(_)
                | TermKind::Bit(_)
                | TermKind::Num(_)
                | TermKind::Unit
                | TermKind::Nil(_)
                | TermKind::Meas
                | TermKind::New
                | TermKind::Gate(_)
                | TermKind::Rot(_)
                | TermKind::Prim(_)
                | TermKind::Macro(_)
                | TermKind::Lam { .. }
                | TermKind::PLam { .. }
                | TermKind::Pair(..)
                | TermKind::Cons(..)
        )
    }

    pub fn free_vars(&self) -> FreeVars {
        let mut fv = FreeVars::default();
        self.collect_free(false, &mut fv);
        fv
    }

    /// Every free name, of either kind, including those in annotations.
    pub fn free_names(&self) -> BTreeSet<String> {
        self.free_vars().all()
    }

    fn collect_free(&self, param_pos: bool, fv: &mut FreeVars) {
        let bind = |names: &[&String], inner: FreeVars, fv: &mut FreeVars| {
            for (src, dst) in [(inner.params, &mut fv.params), (inner.states, &mut fv.states)] {
                dst.extend(src.into_iter().filter(|x| !names.contains(&x)));
            }
        };
        let ty_vars = |ty: &Option<Type>, fv: &mut FreeVars| {
            if let Some(t) = ty {
                fv.params.extend(t.free_vars());
            }
        };
        match &self.kind {
            TermKind::Var(x) => {
                if param_pos {
                    fv.params.insert(x.clone());
                } else {
                    fv.states.insert(x.clone());
                }
            }
            TermKind::Bit(_)
            | TermKind::Num(_)
            | TermKind::Unit
            | TermKind::Meas
            | TermKind::New
            | TermKind::Gate(_)
            | TermKind::Rot(_) => {}
            TermKind::Nil(ty) => fv.params.extend(ty.free_vars()),
            TermKind::Prim(p) => {
                for ty in p.type_args() {
                    fv.params.extend(ty.free_vars());
                }
            }
            TermKind::Macro(m) => {
                for ty in m.type_args() {
                    fv.params.extend(ty.free_vars());
                }
            }
            TermKind::Lam { var, ty, body } | TermKind::PLam { var, ty, body } => {
                ty_vars(ty, fv);
                let mut inner = FreeVars::default();
                body.collect_free(param_pos, &mut inner);
                bind(&[var], inner, fv);
            }
            TermKind::App(a, b)
            | TermKind::Pair(a, b)
            | TermKind::Seq(a, b)
            | TermKind::SeqV(a, b)
            | TermKind::Cons(a, b) => {
                a.collect_free(param_pos, fv);
                b.collect_free(param_pos, fv);
            }
            TermKind::PApp(a, b) => {
                a.collect_free(param_pos, fv);
                b.collect_free(true, fv);
            }
            TermKind::Arith(_, a, b) => {
                a.collect_free(true, fv);
                b.collect_free(true, fv);
            }
            TermKind::LetPair {
                left,
                left_ty,
                right,
                right_ty,
                bound,
                body,
            }
            | TermKind::LetCons {
                head: left,
                head_ty: left_ty,
                tail: right,
                tail_ty: right_ty,
                bound,
                body,
            } => {
                ty_vars(left_ty, fv);
                ty_vars(right_ty, fv);
                bound.collect_free(param_pos, fv);
                let mut inner = FreeVars::default();
                body.collect_free(param_pos, &mut inner);
                bind(&[left, right], inner, fv);
            }
            TermKind::Ifz { guard, then, els } => {
                guard.collect_free(true, fv);
                then.collect_free(param_pos, fv);
                els.collect_free(param_pos, fv);
            }
            TermKind::For { index, list, body } => {
                list.collect_free(true, fv);
                let mut inner = FreeVars::default();
                body.collect_free(param_pos, &mut inner);
                bind(&[index], inner, fv);
            }
        }
    }

    /// Applies `f` to every type annotation in the term.
    fn map_types(&self, f: &impl Fn(&Type) -> Type) -> Term {
        let opt = |ty: &Option<Type>| ty.as_ref().map(f);
        let kind = match &self.kind {
            TermKind::Nil(ty) => TermKind::Nil(f(ty)),
            TermKind::Prim(p) => TermKind::Prim(p.map_types(f)),
            TermKind::Macro(m) => TermKind::Macro(m.map_types(f)),
            TermKind::Lam { var, ty, body } => TermKind::Lam {
                var: var.clone(),
                ty: opt(ty),
                body: Box::new(body.map_types(f)),
            },
            TermKind::PLam { var, ty, body } => TermKind::PLam {
                var: var.clone(),
                ty: opt(ty),
                body: Box::new(body.map_types(f)),
            },
            TermKind::LetPair {
                left,
                left_ty,
                right,
                right_ty,
                bound,
                body,
            } => TermKind::LetPair {
                left: left.clone(),
                left_ty: opt(left_ty),
                right: right.clone(),
                right_ty: opt(right_ty),
                bound: Box::new(bound.map_types(f)),
                body: Box::new(body.map_types(f)),
            },
            TermKind::LetCons {
                head,
                head_ty,
                tail,
                tail_ty,
                bound,
                body,
            } => TermKind::LetCons {
                head: head.clone(),
                head_ty: opt(head_ty),
                tail: tail.clone(),
                tail_ty: opt(tail_ty),
                bound: Box::new(bound.map_types(f)),
                body: Box::new(body.map_types(f)),
            },
            _ => return self.map_children(|c| c.map_types(f)),
        };
        self.with_kind(kind)
    }

    /// Rebuilds the node with `f` applied to each direct subterm. Binder
    /// names and annotations are kept as they are.
    pub fn map_children(&self, mut f: impl FnMut(&Term) -> Term) -> Term {
        let b = |t: &Term, f: &mut dyn FnMut(&Term) -> Term| Box::new(f(t));
        let kind = match &self.kind {
            TermKind::Var(_)
            | TermKind::Bit(_)
            | TermKind::Num(_)
            | TermKind::Unit
            | TermKind::Nil(_)
            | TermKind::Meas
            | TermKind::New
            | TermKind::Gate(_)
            | TermKind::Rot(_)
            | TermKind::Prim(_)
            | TermKind::Macro(_) => self.kind.clone(),
            TermKind::Lam { var, ty, body } => TermKind::Lam {
                var: var.clone(),
                ty: ty.clone(),
                body: b(body, &mut f),
            },
            TermKind::PLam { var, ty, body } => TermKind::PLam {
                var: var.clone(),
                ty: ty.clone(),
                body: b(body, &mut f),
            },
            TermKind::App(x, y) => TermKind::App(b(x, &mut f), b(y, &mut f)),
            TermKind::PApp(x, y) => TermKind::PApp(b(x, &mut f), b(y, &mut f)),
            TermKind::Pair(x, y) => TermKind::Pair(b(x, &mut f), b(y, &mut f)),
            TermKind::Seq(x, y) => TermKind::Seq(b(x, &mut f), b(y, &mut f)),
            TermKind::SeqV(x, y) => TermKind::SeqV(b(x, &mut f), b(y, &mut f)),
            TermKind::Cons(x, y) => TermKind::Cons(b(x, &mut f), b(y, &mut f)),
            TermKind::Arith(op, x, y) => TermKind::Arith(*op, b(x, &mut f), b(y, &mut f)),
            TermKind::LetPair {
                left,
                left_ty,
                right,
                right_ty,
                bound,
                body,
            } => TermKind::LetPair {
                left: left.clone(),
                left_ty: left_ty.clone(),
                right: right.clone(),
                right_ty: right_ty.clone(),
                bound: b(bound, &mut f),
                body: b(body, &mut f),
            },
            TermKind::LetCons {
                head,
                head_ty,
                tail,
                tail_ty,
                bound,
                body,
            } => TermKind::LetCons {
                head: head.clone(),
                head_ty: head_ty.clone(),
                tail: tail.clone(),
                tail_ty: tail_ty.clone(),
                bound: b(bound, &mut f),
                body: b(body, &mut f),
            },
            TermKind::Ifz { guard, then, els } => TermKind::Ifz {
                guard: b(guard, &mut f),
                then: b(then, &mut f),
                els: b(els, &mut f),
            },
            TermKind::For { index, list, body } => TermKind::For {
                index: index.clone(),
                list: b(list, &mut f),
                body: b(body, &mut f),
            },
        };
        self.with_kind(kind)
    }

    /// Direct subterms, left to right.
    pub fn children(&self) -> Vec<&Term> {
        match &self.kind {
            TermKind::Lam { body, .. } | TermKind::PLam { body, .. } => vec![body],
            TermKind::App(x, y)
            | TermKind::PApp(x, y)
            | TermKind::Pair(x, y)
            | TermKind::Seq(x, y)
            | TermKind::SeqV(x, y)
            | TermKind::Cons(x, y)
            | TermKind::Arith(_, x, y) => vec![x, y],
            TermKind::LetPair { bound, body, .. } | TermKind::LetCons { bound, body, .. } => {
                vec![bound, body]
            }
            TermKind::Ifz { guard, then, els } => vec![guard, then, els],
            TermKind::For { list, body, .. } => vec![list, body],
            _ => vec![],
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Capture-avoiding substitution `self[value/name]`. When `value` is a
    /// parameter expression, size indices in annotations are rewritten too.
    pub fn subst(&self, name: &str, value: &Term) -> Term {
        let param = term_to_param(value);
        let value_fv = value.free_names();
        self.subst_inner(name, value, param.as_ref(), &value_fv)
    }

    fn subst_inner(
        &self,
        name: &str,
        value: &Term,
        param: Option<&ParamSubst>,
        value_fv: &BTreeSet<String>,
    ) -> Term {
        let sub_ty = |ty: &Type| match param {
            Some(p) => ty.subst_param(name, p),
            None => ty.clone(),
        };
        let sub_opt = |ty: &Option<Type>| ty.as_ref().map(sub_ty);
        let rec = |t: &Term| t.subst_inner(name, value, param, value_fv);
        // Renames binder `var` away from the value's free names if needed,
        // returning the new name and the renamed scope terms.
        let fresh_for = |var: &String, scopes: &[&Term], extra_avoid: &[&String]| -> String {
            if !value_fv.contains(var) {
                return var.clone();
            }
            let mut avoid = value_fv.clone();
            for s in scopes {
                avoid.extend(s.free_names());
            }
            avoid.extend(extra_avoid.iter().map(|s| s.to_string()));
            avoid.insert(name.to_string());
            fresh_name(var, &avoid)
        };
        match &self.kind {
            TermKind::Var(x) => {
                if x == name {
                    let mut v = value.clone();
                    if v.span == Span::UNKNOWN {
                        v.span = self.span;
                    }
                    v
                } else {
                    self.clone()
                }
            }
            TermKind::Nil(_) | TermKind::Prim(_) | TermKind::Macro(_) => self.map_types(&sub_ty),
            TermKind::Lam { var, ty, body } | TermKind::PLam { var, ty, body } => {
                let is_param = matches!(self.kind, TermKind::PLam { .. });
                let ty = sub_opt(ty);
                let mk = |var: String, body: Term| {
                    let body = Box::new(body);
                    if is_param {
                        TermKind::PLam { var, ty: ty.clone(), body }
                    } else {
                        TermKind::Lam { var, ty: ty.clone(), body }
                    }
                };
                if var == name {
                    return self.with_kind(mk(var.clone(), (**body).clone()));
                }
                let fresh = fresh_for(var, &[body], &[]);
                let body = if &fresh != var {
                    body.rename(var, &fresh)
                } else {
                    (**body).clone()
                };
                self.with_kind(mk(fresh, rec(&body)))
            }
            TermKind::LetPair {
                left,
                left_ty,
                right,
                right_ty,
                bound,
                body,
            }
            | TermKind::LetCons {
                head: left,
                head_ty: left_ty,
                tail: right,
                tail_ty: right_ty,
                bound,
                body,
            } => {
                let is_pair = matches!(self.kind, TermKind::LetPair { .. });
                let bound = Box::new(rec(bound));
                let (left_ty, right_ty) = (sub_opt(left_ty), sub_opt(right_ty));
                let body = if left == name || right == name {
                    (**body).clone()
                } else {
                    let l2 = fresh_for(left, &[body], &[right]);
                    let mut body2 = body.rename(left, &l2);
                    let r2 = fresh_for(right, &[&body2], &[&l2]);
                    body2 = body2.rename(right, &r2);
                    return self.with_kind(mk_let(is_pair, l2, left_ty, r2, right_ty, bound, Box::new(rec(&body2))));
                };
                self.with_kind(mk_let(
                    is_pair,
                    left.clone(),
                    left_ty,
                    right.clone(),
                    right_ty,
                    bound,
                    Box::new(body),
                ))
            }
            TermKind::For { index, list, body } => {
                let list = Box::new(rec(list));
                if index == name {
                    return self.with_kind(TermKind::For {
                        index: index.clone(),
                        list,
                        body: body.clone(),
                    });
                }
                let fresh = fresh_for(index, &[body], &[]);
                let body = if &fresh != index {
                    body.rename(index, &fresh)
                } else {
                    (**body).clone()
                };
                self.with_kind(TermKind::For {
                    index: fresh,
                    list,
                    body: Box::new(rec(&body)),
                })
            }
            _ => self.map_children(rec),
        }
    }

    /// Renames free occurrences of `old` to `new`, in terms and annotations.
    pub fn rename(&self, old: &str, new: &str) -> Term {
        self.subst(
            old,
            &Term {
                kind: TermKind::Var(new.to_string()),
                span: Span::UNKNOWN,
            },
        )
    }

    /// α-equivalence, ignoring spans.
    pub fn alpha_eq(&self, other: &Term) -> bool {
        let mut counter = 0;
        let a = self.canonical(&mut counter);
        let mut counter = 0;
        let b = other.canonical(&mut counter);
        a == b
    }

    /// Renames every binder to a positional name.
    fn canonical(&self, counter: &mut usize) -> Term {
        let next = |counter: &mut usize| {
            *counter += 1;
            format!("%{counter}")
        };
        match &self.kind {
            TermKind::Lam { var, ty, body } | TermKind::PLam { var, ty, body } => {
                let fresh = next(counter);
                let body = Box::new(body.rename(var, &fresh).canonical(counter));
                let var = fresh;
                let ty = ty.clone();
                self.with_kind(if matches!(self.kind, TermKind::Lam { .. }) {
                    TermKind::Lam { var, ty, body }
                } else {
                    TermKind::PLam { var, ty, body }
                })
            }
            TermKind::LetPair {
                left,
                left_ty,
                right,
                right_ty,
                bound,
                body,
            }
            | TermKind::LetCons {
                head: left,
                head_ty: left_ty,
                tail: right,
                tail_ty: right_ty,
                bound,
                body,
            } => {
                let is_pair = matches!(self.kind, TermKind::LetPair { .. });
                let bound = Box::new(bound.canonical(counter));
                let l2 = next(counter);
                let r2 = next(counter);
                // Two-step rename so that `left == right` shadowing is honoured.
                let tmp = format!("{r2}tmp");
                let body = body.rename(right, &tmp).rename(left, &l2).rename(&tmp, &r2);
                let body = Box::new(body.canonical(counter));
                self.with_kind(mk_let(is_pair, l2, left_ty.clone(), r2, right_ty.clone(), bound, body))
            }
            TermKind::For { index, list, body } => {
                let list = Box::new(list.canonical(counter));
                let fresh = next(counter);
                let body = Box::new(body.rename(index, &fresh).canonical(counter));
                self.with_kind(TermKind::For {
                    index: fresh,
                    list,
                    body,
                })
            }
            _ => self.map_children(|c| c.canonical(counter)),
        }
    }
}

fn mk_let(
    is_pair: bool,
    left: String,
    left_ty: Option<Type>,
    right: String,
    right_ty: Option<Type>,
    bound: Box<Term>,
    body: Box<Term>,
) -> TermKind {
    if is_pair {
        TermKind::LetPair {
            left,
            left_ty,
            right,
            right_ty,
            bound,
            body,
        }
    } else {
        TermKind::LetCons {
            head: left,
            head_ty: left_ty,
            tail: right,
            tail_ty: right_ty,
            bound,
            body,
        }
    }
}

/// Reads a parameter term as a symbolic natural, if it is one.
pub fn term_to_nat(term: &Term) -> Option<NatExpr> {
    match &term.kind {
        TermKind::Num(n) => Some(NatExpr::Const(*n)),
        TermKind::Var(x) => Some(NatExpr::Var(x.clone())),
        TermKind::Arith(op, a, b) => Some(NatExpr::bin(*op, term_to_nat(a)?, term_to_nat(b)?)),
        TermKind::Ifz { guard, then, els } => Some(NatExpr::Ite0 {
            guard: Box::new(term_to_nat(guard)?),
            then: Box::new(term_to_nat(then)?),
            els: Box::new(term_to_nat(els)?),
        }),
        TermKind::PApp(f, arg) => match &f.kind {
            TermKind::PLam { var, body, .. } => term_to_nat(&body.subst(var, arg)),
            _ => None,
        },
        _ => None,
    }
}

/// Reads a parameter term as a symbolic list of naturals, if it is one.
pub fn term_to_natlist(term: &Term) -> Option<NatListExpr> {
    match &term.kind {
        TermKind::Nil(_) => Some(NatListExpr::Nil),
        TermKind::Var(x) => Some(NatListExpr::Var(x.clone())),
        TermKind::Cons(h, t) => Some(NatListExpr::cons(term_to_nat(h)?, term_to_natlist(t)?)),
        TermKind::For { index, list, body } => Some(NatListExpr::For {
            index: index.clone(),
            over: Box::new(term_to_natlist(list)?),
            body: term_to_nat(body)?,
        }),
        TermKind::PApp(f, arg) => match &f.kind {
            TermKind::Prim(Prim::Reverse) => {
                Some(NatListExpr::Reverse(Box::new(term_to_natlist(arg)?)))
            }
            TermKind::PApp(g, lo) if matches!(g.kind, TermKind::Prim(Prim::Range)) => {
                Some(NatListExpr::Range(term_to_nat(lo)?, term_to_nat(arg)?))
            }
            TermKind::PLam { var, body, .. } => term_to_natlist(&body.subst(var, arg)),
            _ => None,
        },
        TermKind::Ifz { .. } => None,
        _ => None,
    }
}

fn term_to_param(term: &Term) -> Option<ParamSubst> {
    if let Some(e) = term_to_nat(term) {
        return Some(ParamSubst::Nat(e));
    }
    term_to_natlist(term).map(ParamSubst::List)
}

/// Converts a symbolic natural back into a term.
pub fn nat_to_term(e: &NatExpr) -> Term {
    use build::*;
    match e {
        NatExpr::Const(c) => num(*c),
        NatExpr::Var(x) => var(x),
        NatExpr::Bin(op, a, b) => arith(*op, nat_to_term(a), nat_to_term(b)),
        NatExpr::Ite0 { guard, then, els } => {
            ifz(nat_to_term(guard), nat_to_term(then), nat_to_term(els))
        }
        NatExpr::Sum { .. } => panic!("sums have no term form"),
    }
}

/// Parameter context Φ: ordered, non-linear.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamContext {
    pub entries: Vec<(String, Type)>,
}

/// State context Γ: ordered, linear.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateContext {
    pub entries: Vec<(String, Type)>,
}

impl ParamContext {
    pub fn new(entries: Vec<(String, Type)>) -> Self {
        ParamContext { entries }
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }
}

impl StateContext {
    pub fn new(entries: Vec<(String, Type)>) -> Self {
        StateContext { entries }
    }
}

/// A substitution of parameter names by expressions.
pub type ParamMap = BTreeMap<String, ParamSubst>;

#[cfg(test)]
mod tests {
    use super::build::*;
    use super::*;

    #[test]
    fn subst_in_pair() {
        let m = pair(var("x"), var("y"));
        assert_eq!(m.subst("x", &bit(false)), pair(bit(false), var("y")));
    }

    #[test]
    fn subst_respects_shadowing() {
        let m = lam("x", Type::Qubit, var("x"));
        assert_eq!(m.subst("x", &bit(true)), m);
    }

    #[test]
    fn subst_under_ifz() {
        let m = ifz(var("n"), var("a"), var("n"));
        let r = m.subst("n", &num(0));
        assert_eq!(r, ifz(num(0), var("a"), num(0)));
    }

    #[test]
    fn subst_avoids_capture() {
        // (\y. x y)[x := y] must rename the binder
        let m = lam("y", Type::Qubit, app(var("x"), var("y")));
        let r = m.subst("x", &var("y"));
        match &r.kind {
            TermKind::Lam { var: v, body, .. } => {
                assert_ne!(v, "y");
                assert_eq!(**body, app(var("y"), var(v)));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn subst_rewrites_annotations() {
        let m = plam("k", lam("xs", Type::vec(Type::Qubit, NatExpr::var("n")), var("xs")));
        let r = m.subst("n", &num(3));
        let expected = plam("k", lam("xs", Type::vec(Type::Qubit, NatExpr::Const(3)), var("xs")));
        assert_eq!(r, expected);
    }

    #[test]
    fn free_vars_classified() {
        let fv = pair(var("x"), var("y")).free_vars();
        assert!(fv.params.is_empty());
        assert_eq!(fv.states, BTreeSet::from(["x".to_string(), "y".to_string()]));

        let m = plam("n", papp(t(TermKind::Rot(Rotation::Rz)), var("n")));
        assert_eq!(m.free_vars(), FreeVars::default());

        let m = for_("k", var("ns"), app(var("k"), var("x")));
        let fv = m.free_vars();
        assert_eq!(fv.params, BTreeSet::from(["ns".to_string()]));
        assert_eq!(fv.states, BTreeSet::from(["x".to_string()]));
    }

    #[test]
    fn alpha_equivalence() {
        let a = lam("x", Type::Qubit, var("x"));
        let b = lam("y", Type::Qubit, var("y"));
        assert!(a.alpha_eq(&b));
        let c = lam("y", Type::Qubit, var("z"));
        assert!(!a.alpha_eq(&c));
        let p = let_pair("a", None, "b", None, var("m"), pair(var("b"), var("a")));
        let q = let_pair("c", None, "d", None, var("m"), pair(var("d"), var("c")));
        assert!(p.alpha_eq(&q));
    }

    #[test]
    fn classification() {
        let evaluable = Type::pi("n", Type::Nat, Type::vec(Type::Nat, NatExpr::var("n")));
        assert_eq!(evaluable.classify(), Some(Classification::Evaluable));
        let vq = Type::vec(Type::Qubit, NatExpr::var("n"));
        let qft = Type::pi("n", Type::Nat, Type::lolli(vq.clone(), vq));
        assert_eq!(qft.classify(), Some(Classification::Translatable));
        assert_eq!(Type::Nat.classify(), Some(Classification::Evaluable));
    }

    #[test]
    fn nat_terms() {
        let e = arith(NatOp::Pow, num(2), var("n"));
        assert_eq!(
            term_to_nat(&e),
            Some(NatExpr::bin(NatOp::Pow, NatExpr::Const(2), NatExpr::var("n")))
        );
        let r = range(num(0), var("n"));
        assert_eq!(
            term_to_natlist(&r),
            Some(NatListExpr::Range(NatExpr::Const(0), NatExpr::var("n")))
        );
    }
}
