// SPDX-License-Identifier: Apache-2.0

//! Translation of well-typed terms into families of scalable ZX diagrams.
//!
//! Every state type has a width, the number of qubit wires carrying it.
//! Terms are translated in place into one diagram: a translated subterm is
//! the port its value leaves from. Function values are their Choi states,
//! with the argument wires first. Applications of constants and primitives
//! to enough arguments are wired directly instead. `for` becomes a box over
//! its list, and `ifz` a pair of boxes over lists of length one or zero.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::nat::{fresh_name, NatExpr, NatListExpr};
use crate::reduce::{expand_macro, normalize, DEFAULT_FUEL};
use crate::syntax::{
    term_to_nat, term_to_natlist, Gate, Prim, Span, Term, TermKind, Type,
};
use crate::szx::perm::PermSpec;
use crate::szx::{
    Color, Diagram, Family, FamilyBox, NodeKind, Phase, PhaseExpr, PhaseVec, PortRef,
    RotationConvention,
};
use crate::typecheck::{gate_type, merge_sizes, prim_type, rotation_type, CheckedDef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct TranslateError {
    pub span: Span,
    pub message: String,
}

type Result<T> = std::result::Result<T, TranslateError>;

fn fail<T>(span: Span, message: impl Into<String>) -> Result<T> {
    Err(TranslateError {
        span,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TranslateOptions {
    pub convention: RotationConvention,
}

/// Number of qubit wires of a state type.
pub fn type_width(ty: &Type) -> Option<NatExpr> {
    Some(match ty {
        Type::Bit | Type::Qubit => NatExpr::Const(1),
        Type::Unit => NatExpr::Const(0),
        Type::Tensor(a, b) | Type::Lolli(a, b) => NatExpr::add(type_width(a)?, type_width(b)?),
        Type::Vec(a, n) => NatExpr::mul(n.clone(), type_width(a)?),
        Type::Nat | Type::Pi { .. } => return None,
    })
}

/// A translated family: parameters, inputs and the output type.
#[derive(Debug, Clone)]
pub struct Translation {
    pub diagram: Diagram<Family>,
    pub params: Vec<(String, Type)>,
    pub inputs: Vec<(String, Type)>,
    pub output: Type,
}

/// Splits `Π params. A1 -o ... -o Am -o B` into its parts, renaming the
/// parameters apart from nothing: the names of the type are kept.
pub fn signature(ty: &Type) -> (Vec<(String, Type)>, Vec<Type>, Type) {
    let mut params = Vec::new();
    let mut cur = ty.clone();
    while let Type::Pi { var, dom, body } = cur {
        params.push((var, *dom));
        cur = *body;
    }
    let mut inputs = Vec::new();
    while let Type::Lolli(a, b) = cur {
        inputs.push(*a);
        cur = *b;
    }
    (params, inputs, cur)
}

/// Translates a checked definition: its leading parameters become family
/// parameters and its curried arguments become inputs.
pub fn translate_def(def: &CheckedDef, opts: TranslateOptions) -> Result<Translation> {
    let (params, input_tys, output) = signature(&def.ty);
    let mut head = def.body.clone();
    for (p, _) in &params {
        head = Term::new(
            TermKind::PApp(
                Box::new(head),
                Box::new(Term::new(TermKind::Var(p.clone()), Span::UNKNOWN)),
            ),
            def.body.span,
        );
    }
    let avoid: BTreeSet<String> = params.iter().map(|(p, _)| p.clone()).collect();
    let inputs: Vec<(String, Type)> = input_tys
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let base = format!("x{i}");
            let name = if avoid.contains(&base) { fresh_name(&base, &avoid) } else { base };
            (name, t)
        })
        .collect();
    let mut d = Diagram::<Family>::new(params.iter().map(|(p, _)| p.clone()).collect());
    let mut args = Vec::new();
    for (_, ty) in &inputs {
        let w = width(ty, def.body.span)?;
        args.push(Pending::State(d.add_input(w), ty.clone()));
    }
    let mut tr = Translator {
        phi: params.clone(),
        opts,
    };
    let mut env = Env::new();
    let (port, ty) = tr.term(&mut d, &mut env, &head, args)?;
    let w = width(&ty, def.body.span)?;
    let out = d.add_output(w.clone());
    d.connect(port, out, w);
    Ok(Translation {
        diagram: d,
        params,
        inputs,
        output,
    })
}

/// Translates an elaborated term with free parameters `phi` and free state
/// variables `gamma`, which become the inputs in order.
pub fn translate_term(
    phi: &[(String, Type)],
    gamma: &[(String, Type)],
    term: &Term,
    opts: TranslateOptions,
) -> Result<(Diagram<Family>, Type)> {
    let mut d = Diagram::<Family>::new(phi.iter().map(|(p, _)| p.clone()).collect());
    let mut env = Env::new();
    for (x, ty) in gamma {
        let w = width(ty, term.span)?;
        env.insert(x.clone(), (d.add_input(w), ty.clone()));
    }
    let mut tr = Translator {
        phi: phi.to_vec(),
        opts,
    };
    let (port, ty) = tr.term(&mut d, &mut env, term, Vec::new())?;
    let w = width(&ty, term.span)?;
    let out = d.add_output(w.clone());
    d.connect(port, out, w);
    Ok((d, ty))
}

fn width(ty: &Type, span: Span) -> Result<NatExpr> {
    match type_width(ty) {
        Some(w) => Ok(w),
        None => fail(span, format!("`{ty}` is not a state type")),
    }
}

/// State variables in scope: where their wires leave from, and their types.
type Env = BTreeMap<String, (PortRef, Type)>;

/// Arguments waiting for the head of an application spine.
#[derive(Debug, Clone)]
enum Pending {
    Param(Term),
    State(PortRef, Type),
}

struct Translator {
    phi: Vec<(String, Type)>,
    opts: TranslateOptions,
}

fn gather(d: &mut Diagram<Family>, parts: Vec<(PortRef, NatExpr)>) -> PortRef {
    let g = d.add_node(NodeKind::Gather {
        parts: parts.iter().map(|(_, w)| w.clone()).collect(),
        split: false,
    });
    for (j, (p, w)) in parts.into_iter().enumerate() {
        d.connect(p, (g, j + 1), w);
    }
    (g, 0)
}

/// Splits the register on `from` into parts of the given widths.
fn split(d: &mut Diagram<Family>, from: PortRef, widths: Vec<NatExpr>) -> Vec<PortRef> {
    let total = widths.iter().cloned().fold(NatExpr::Const(0), NatExpr::add);
    let n = widths.len();
    let s = d.add_node(NodeKind::Gather {
        parts: widths,
        split: true,
    });
    d.connect(from, (s, 0), total);
    (1..=n).map(|j| (s, j)).collect()
}

fn spider(d: &mut Diagram<Family>, color: Color, phase: PhaseExpr, legs: usize) -> usize {
    d.add_node(NodeKind::Spider {
        color,
        phases: PhaseVec::single(phase),
        legs,
    })
}

fn zero_phase() -> PhaseExpr {
    PhaseExpr::Const(Phase::ZERO)
}

/// Where the sizes of two branch types differ, selects by the guard.
fn merge_types(a: &Type, b: &Type, guard: &NatExpr) -> Type {
    match (a, b) {
        (Type::Tensor(a1, a2), Type::Tensor(b1, b2)) => {
            Type::tensor(merge_types(a1, b1, guard), merge_types(a2, b2, guard))
        }
        (Type::Lolli(a1, a2), Type::Lolli(b1, b2)) => {
            Type::lolli(merge_types(a1, b1, guard), merge_types(a2, b2, guard))
        }
        (Type::Vec(a1, n), Type::Vec(b1, m)) => {
            Type::vec(merge_types(a1, b1, guard), merge_sizes(n, m, guard))
        }
        _ => a.clone(),
    }
}

impl Translator {
    fn nat(&self, t: &Term) -> Result<NatExpr> {
        if let Some(e) = term_to_nat(t) {
            return Ok(e);
        }
        let n = normalize(t, DEFAULT_FUEL).map_err(|e| TranslateError {
            span: t.span,
            message: e.to_string(),
        })?;
        match term_to_nat(&n) {
            Some(e) => Ok(e),
            None => fail(t.span, format!("`{}` is not a size expression", crate::parser::pretty_print(t))),
        }
    }

    fn list(&self, t: &Term) -> Result<NatListExpr> {
        if let Some(l) = term_to_natlist(t) {
            return Ok(l);
        }
        let n = normalize(t, DEFAULT_FUEL).map_err(|e| TranslateError {
            span: t.span,
            message: e.to_string(),
        })?;
        match term_to_natlist(&n) {
            Some(l) => Ok(l),
            None => fail(t.span, format!("`{}` is not a list expression", crate::parser::pretty_print(t))),
        }
    }

    fn list_len(&self, l: &NatListExpr, span: Span) -> Result<NatExpr> {
        match l {
            NatListExpr::Var(x) => match self.phi.iter().rev().find(|(p, _)| p == x) {
                Some((_, Type::Vec(_, n))) => Ok(n.clone()),
                _ => fail(span, format!("`{x}` is not a list parameter")),
            },
            NatListExpr::Cons(_, t) => Ok(NatExpr::add(self.list_len(t, span)?, NatExpr::Const(1))),
            NatListExpr::For { over, .. } | NatListExpr::Reverse(over) => self.list_len(over, span),
            other => match other.len_expr() {
                Some(n) => Ok(n),
                None => fail(span, format!("cannot tell the length of `{other}`")),
            },
        }
    }

    fn term(
        &mut self,
        d: &mut Diagram<Family>,
        env: &mut Env,
        t: &Term,
        mut args: Vec<Pending>,
    ) -> Result<(PortRef, Type)> {
        let span = t.span;
        match &t.kind {
            TermKind::App(f, a) => {
                let (p, ty) = self.term(d, env, a, Vec::new())?;
                args.insert(0, Pending::State(p, ty));
                self.term(d, env, f, args)
            }
            TermKind::PApp(f, a) => {
                args.insert(0, Pending::Param((**a).clone()));
                self.term(d, env, f, args)
            }
            TermKind::Lam { var, ty, body } => {
                let Some(ty) = ty else {
                    return fail(span, format!("binder `{var}` has no type annotation"));
                };
                if args.is_empty() {
                    let w = width(ty, span)?;
                    let cup = d.add_node(NodeKind::Cup);
                    let saved = env.insert(var.clone(), ((cup, 0), ty.clone()));
                    let (pb, tb) = self.term(d, env, body, Vec::new())?;
                    restore(env, var, saved);
                    let wb = width(&tb, span)?;
                    let g = gather(d, vec![((cup, 1), w), (pb, wb)]);
                    return Ok((g, Type::lolli(ty.clone(), tb)));
                }
                match args.remove(0) {
                    Pending::State(p, pty) => {
                        let saved = env.insert(var.clone(), (p, pty));
                        let r = self.term(d, env, body, args)?;
                        restore(env, var, saved);
                        Ok(r)
                    }
                    Pending::Param(_) => fail(span, "parameter applied to a state abstraction"),
                }
            }
            TermKind::PLam { var, body, .. } => match args.first() {
                Some(Pending::Param(a)) => {
                    let a = a.clone();
                    args.remove(0);
                    self.term(d, env, &body.subst(var, &a), args)
                }
                _ => fail(span, "parameter abstraction in a state position"),
            },
            TermKind::Var(x) => {
                let Some((p, ty)) = env.remove(x) else {
                    return fail(span, format!("`{x}` is not a state variable in scope"));
                };
                self.apply(d, p, ty, args, span)
            }
            TermKind::Macro(m) => {
                let mut e = expand_macro(m);
                e.span = span;
                self.term(d, env, &e, args)
            }
            TermKind::Meas | TermKind::New | TermKind::Gate(_) | TermKind::Rot(_) | TermKind::Prim(_) => {
                self.constant(d, t, args)
            }
            TermKind::LetPair {
                left,
                right,
                bound,
                body,
                ..
            } => {
                let (p, ty) = self.term(d, env, bound, Vec::new())?;
                let Type::Tensor(a, b) = ty else {
                    return fail(span, format!("`{ty}` is not a tensor"));
                };
                let parts = split(d, p, vec![width(&a, span)?, width(&b, span)?]);
                let s1 = env.insert(left.clone(), (parts[0], *a));
                let s2 = env.insert(right.clone(), (parts[1], *b));
                let r = self.term(d, env, body, args)?;
                restore(env, right, s2);
                restore(env, left, s1);
                Ok(r)
            }
            TermKind::LetCons {
                head,
                tail,
                tail_ty,
                bound,
                body,
                ..
            } => {
                let (p, ty) = self.term(d, env, bound, Vec::new())?;
                let Type::Vec(a, n) = ty else {
                    return fail(span, format!("`{ty}` is not a vector"));
                };
                let tail_ty = tail_ty
                    .clone()
                    .unwrap_or_else(|| Type::vec((*a).clone(), NatExpr::sub(n, NatExpr::Const(1))));
                let parts = split(d, p, vec![width(&a, span)?, width(&tail_ty, span)?]);
                let s1 = env.insert(head.clone(), (parts[0], *a));
                let s2 = env.insert(tail.clone(), (parts[1], tail_ty));
                let r = self.term(d, env, body, args)?;
                restore(env, tail, s2);
                restore(env, head, s1);
                Ok(r)
            }
            TermKind::Seq(a, b) | TermKind::SeqV(a, b) => {
                let (p, _) = self.term(d, env, a, Vec::new())?;
                split(d, p, vec![]);
                self.term(d, env, b, args)
            }
            TermKind::Ifz { guard, then, els } => self.ifz(d, env, guard, then, els, args, span),
            _ if !args.is_empty() => fail(span, "a value is applied to arguments"),
            TermKind::Bit(b) => {
                let phase = if *b {
                    PhaseExpr::Const(Phase::HALF)
                } else {
                    zero_phase()
                };
                Ok(((spider(d, Color::X, phase, 1), 0), Type::Bit))
            }
            TermKind::Unit => Ok((gather(d, vec![]), Type::Unit)),
            TermKind::Nil(ty) => Ok((gather(d, vec![]), Type::vec(ty.clone(), NatExpr::Const(0)))),
            TermKind::Pair(a, b) => {
                let (pa, ta) = self.term(d, env, a, Vec::new())?;
                let (pb, tb) = self.term(d, env, b, Vec::new())?;
                let g = gather(d, vec![(pa, width(&ta, span)?), (pb, width(&tb, span)?)]);
                Ok((g, Type::tensor(ta, tb)))
            }
            TermKind::Cons(h, tl) => {
                let (ph, th) = self.term(d, env, h, Vec::new())?;
                let (pt, tt) = self.term(d, env, tl, Vec::new())?;
                let Type::Vec(_, n) = &tt else {
                    return fail(span, format!("`{tt}` is not a vector"));
                };
                let ty = Type::vec(th.clone(), NatExpr::add(n.clone(), NatExpr::Const(1)));
                let g = gather(d, vec![(ph, width(&th, span)?), (pt, width(&tt, span)?)]);
                Ok((g, ty))
            }
            TermKind::For { index, list, body } => self.for_loop(d, index, list, body, span),
            TermKind::Num(_) | TermKind::Arith(..) => {
                fail(span, "a parameter expression appears where a state is expected")
            }
        }
    }

    /// Applies a function value on `p` to pending state arguments.
    fn apply(
        &mut self,
        d: &mut Diagram<Family>,
        mut p: PortRef,
        mut ty: Type,
        args: Vec<Pending>,
        span: Span,
    ) -> Result<(PortRef, Type)> {
        for a in args {
            let Pending::State(q, _) = a else {
                return fail(span, "parameter applied to a state value");
            };
            let Type::Lolli(dom, cod) = ty else {
                return fail(span, format!("`{ty}` is not a function type"));
            };
            let wd = width(&dom, span)?;
            let parts = split(d, p, vec![wd.clone(), width(&cod, span)?]);
            d.connect(parts[0], q, wd);
            p = parts[1];
            ty = *cod;
        }
        Ok((p, ty))
    }

    /// Constants and primitives, wired directly once enough arguments are
    /// present and wrapped as Choi states otherwise.
    fn constant(&mut self, d: &mut Diagram<Family>, head: &Term, args: Vec<Pending>) -> Result<(PortRef, Type)> {
        let span = head.span;
        let mut sig = match &head.kind {
            TermKind::Meas => Type::lolli(Type::Qubit, Type::Bit),
            TermKind::New => Type::lolli(Type::Bit, Type::Qubit),
            TermKind::Gate(g) => gate_type(*g),
            TermKind::Rot(_) => rotation_type(),
            TermKind::Prim(p) => prim_type(p),
            _ => unreachable!(),
        };
        if matches!(head.kind, TermKind::Prim(Prim::Range) | TermKind::Prim(Prim::Reverse)) {
            return fail(span, "`range` and `reverse` build parameters, not states");
        }
        let mut args = args.into_iter();
        let mut params = Vec::new();
        while let Type::Pi { var, body, .. } = sig {
            let Some(Pending::Param(a)) = args.next() else {
                return fail(span, "a primitive needs all of its parameters before state arguments");
            };
            let e = self.nat(&a)?;
            sig = body.subst_nat(&var, &e);
            params.push(e);
        }
        let mut doms = Vec::new();
        let mut cur = sig.clone();
        while let Type::Lolli(a, b) = cur {
            doms.push(*a);
            cur = *b;
        }
        let result = cur;
        let mut given: Vec<(PortRef, Type)> = Vec::new();
        for _ in 0..doms.len() {
            match args.next() {
                Some(Pending::State(p, t)) => given.push((p, t)),
                Some(Pending::Param(_)) => return fail(span, "parameter given where a state is expected"),
                None => break,
            }
        }
        let mut cups = Vec::new();
        for dom in &doms[given.len()..] {
            let cup = d.add_node(NodeKind::Cup);
            cups.push(((cup, 1), width(dom, span)?));
            given.push(((cup, 0), dom.clone()));
        }
        let out = self.direct(d, head, &params, &given, span)?;
        let (p, ty) = if cups.is_empty() {
            (out, result.clone())
        } else {
            let mut ty = result.clone();
            for dom in doms[doms.len() - cups.len()..].iter().rev() {
                ty = Type::lolli(dom.clone(), ty);
            }
            let mut parts = cups;
            parts.push((out, width(&result, span)?));
            (gather(d, parts), ty)
        };
        let rest: Vec<Pending> = args.collect();
        self.apply(d, p, ty, rest, span)
    }

    /// A saturated constant or primitive application.
    fn direct(
        &mut self,
        d: &mut Diagram<Family>,
        head: &Term,
        params: &[NatExpr],
        args: &[(PortRef, Type)],
        span: Span,
    ) -> Result<PortRef> {
        let one = NatExpr::Const(1);
        Ok(match &head.kind {
            TermKind::Gate(Gate::H) => {
                let h = d.add_node(NodeKind::Hadamard);
                d.connect(args[0].0, (h, 0), one);
                (h, 1)
            }
            TermKind::Gate(Gate::Cnot) => {
                let z = spider(d, Color::Z, zero_phase(), 3);
                let x = spider(d, Color::X, zero_phase(), 3);
                d.connect(args[0].0, (z, 0), one.clone());
                d.connect(args[1].0, (x, 0), one.clone());
                d.connect((z, 2), (x, 2), one.clone());
                gather(d, vec![((z, 1), one.clone()), ((x, 1), one)])
            }
            TermKind::Meas | TermKind::New => {
                let z = spider(d, Color::Z, zero_phase(), 3);
                let g = d.add_node(NodeKind::Ground);
                d.connect(args[0].0, (z, 0), one.clone());
                d.connect((z, 2), (g, 0), one);
                (z, 1)
            }
            TermKind::Rot(r) => {
                let color = if r.is_x() { Color::X } else { Color::Z };
                let phase = PhaseExpr::Turn {
                    negative: r.sign() < 0,
                    den: self.opts.convention.denominator(params[0].clone()),
                };
                let s = spider(d, color, phase, 2);
                d.connect(args[0].0, (s, 0), one);
                (s, 1)
            }
            TermKind::Prim(Prim::Split(_)) => args[0].0,
            TermKind::Prim(Prim::Append(a)) => {
                let wa = width(a, span)?;
                gather(
                    d,
                    vec![
                        (args[0].0, NatExpr::mul(params[0].clone(), wa.clone())),
                        (args[1].0, NatExpr::mul(params[1].clone(), wa)),
                    ],
                )
            }
            TermKind::Prim(Prim::Drop) => {
                split(d, args[0].0, vec![]);
                gather(d, vec![])
            }
            TermKind::Prim(Prim::AccuMap(a, b, c)) => {
                let n = params[0].clone();
                let (wa, wb, wc) = (width(a, span)?, width(b, span)?, width(c, span)?);
                self.accumulating_map(d, n, wa, wb, wc, args)
            }
            _ => return fail(span, "not a state constant"),
        })
    }

    /// `xs`, `fs` and `z` in; `ys ⊗ z'` out. Each function arrives as the
    /// Choi state `A C B C`; the functions are regrouped, their `A` wires
    /// capped with `xs`, and the carried `C` wires threaded from one to the
    /// next through a shifted copy of the register.
    fn accumulating_map(
        &mut self,
        d: &mut Diagram<Family>,
        n: NatExpr,
        wa: NatExpr,
        wb: NatExpr,
        wc: NatExpr,
        args: &[(PortRef, Type)],
    ) -> PortRef {
        let (xs, fs, z) = (args[0].0, args[1].0, args[2].0);
        let times = |w: &NatExpr| NatExpr::mul(n.clone(), w.clone());
        let fw = NatExpr::add(NatExpr::add(wa.clone(), wc.clone()), NatExpr::add(wb.clone(), wc.clone()));
        let tau = d.add_node(NodeKind::Perm(PermSpec::Tau {
            n: n.clone(),
            a: wa.clone(),
            b: wb.clone(),
            c: wc.clone(),
        }));
        d.connect(fs, (tau, 0), times(&fw));
        let parts = split(d, (tau, 1), vec![times(&wa), times(&wc), times(&wb), times(&wc)]);
        let (f_in, f_carry_in, f_out, f_carry_out) = (parts[0], parts[1], parts[2], parts[3]);
        d.connect(f_in, xs, times(&wa));
        // [z, c1 .. cn] regrouped as [z, c1 .. c(n-1)] and [cn].
        let carried = gather(d, vec![(z, wc.clone()), (f_carry_out, times(&wc))]);
        let shifted = split(d, carried, vec![times(&wc), wc.clone()]);
        d.connect(f_carry_in, shifted[0], times(&wc));
        gather(d, vec![(f_out, times(&wb)), (shifted[1], wc)])
    }

    fn for_loop(
        &mut self,
        d: &mut Diagram<Family>,
        index: &str,
        list: &Term,
        body: &Term,
        span: Span,
    ) -> Result<(PortRef, Type)> {
        let l = self.list(list)?;
        let len = self.list_len(&l, span)?;
        let mut inner_params = d.params.clone();
        inner_params.push(index.to_string());
        let mut bd = Diagram::<Family>::new(inner_params);
        let mut sub = Translator {
            phi: {
                let mut phi = self.phi.clone();
                phi.push((index.to_string(), Type::Nat));
                phi
            },
            opts: self.opts,
        };
        let (p, ty) = sub.term(&mut bd, &mut Env::new(), body, Vec::new())?;
        if ty.free_vars().contains(index) {
            return fail(span, format!("element type `{ty}` of a `for` depends on the index `{index}`"));
        }
        let w = width(&ty, span)?;
        let o = bd.add_output(w.clone());
        bd.connect(p, o, w);
        let b = FamilyBox {
            index: index.to_string(),
            list: l,
            body: bd,
        };
        let id = d.add_node(NodeKind::Box(b));
        Ok(((id, 0), Type::vec(ty, len)))
    }

    #[allow(clippy::too_many_arguments)]
    fn ifz(
        &mut self,
        d: &mut Diagram<Family>,
        env: &mut Env,
        guard: &Term,
        then: &Term,
        els: &Term,
        args: Vec<Pending>,
        span: Span,
    ) -> Result<(PortRef, Type)> {
        let g = self.nat(guard)?;
        if let Some(c) = g.as_const() {
            let live = if c == 0 { then } else { els };
            return self.term(d, env, live, args);
        }
        // State variables of the branches and state arguments are routed
        // into both boxes.
        let mut free: BTreeSet<String> = then.free_names();
        free.extend(els.free_names());
        let mut routed: Vec<(Option<String>, PortRef, Type)> = Vec::new();
        for x in free {
            if let Some((p, ty)) = env.remove(&x) {
                routed.push((Some(x), p, ty));
            }
        }
        let mut params_after = Vec::new();
        for a in args {
            match a {
                Pending::State(p, ty) => routed.push((None, p, ty)),
                Pending::Param(t) => params_after.push(t),
            }
        }
        if !params_after.is_empty() && routed.iter().any(|r| r.0.is_none()) {
            return fail(span, "mixed parameter and state arguments to a conditional");
        }
        let mut avoid: BTreeSet<String> = d.params.iter().cloned().collect();
        avoid.extend(then.free_names());
        avoid.extend(els.free_names());
        let index = fresh_name("i", &avoid);
        let branch_list = |live_on_zero: bool| {
            let (a, b) = if live_on_zero { (1, 0) } else { (0, 1) };
            NatListExpr::Range(
                NatExpr::Const(0),
                NatExpr::ite0(g.clone(), NatExpr::Const(a), NatExpr::Const(b)),
            )
        };
        let mut boxes = Vec::new();
        let mut types = Vec::new();
        for (branch, on_zero) in [(then, true), (els, false)] {
            let mut inner_params = d.params.clone();
            inner_params.push(index.clone());
            let mut bd = Diagram::<Family>::new(inner_params);
            let mut inner_env = Env::new();
            let mut inner_args = Vec::new();
            for (name, _, ty) in &routed {
                let port = bd.add_input(width(ty, span)?);
                match name {
                    Some(x) => {
                        inner_env.insert(x.clone(), (port, ty.clone()));
                    }
                    None => inner_args.push(Pending::State(port, ty.clone())),
                }
            }
            inner_args.extend(params_after.iter().cloned().map(Pending::Param));
            let mut sub = Translator {
                phi: {
                    let mut phi = self.phi.clone();
                    phi.push((index.clone(), Type::Nat));
                    phi
                },
                opts: self.opts,
            };
            let (p, ty) = sub.term(&mut bd, &mut inner_env, branch, inner_args)?;
            let w = width(&ty, span)?;
            let o = bd.add_output(w.clone());
            bd.connect(p, o, w);
            boxes.push(FamilyBox {
                index: index.clone(),
                list: branch_list(on_zero),
                body: bd,
            });
            types.push(ty);
        }
        let ins = routed.len();
        let box_ids: Vec<(usize, Vec<NatExpr>)> = boxes
            .into_iter()
            .map(|b| {
                let mults = (0..=ins).map(|p| b.port_mult(p)).collect();
                (d.add_node(NodeKind::Box(b)), mults)
            })
            .collect();
        for (j, (_, p, _)) in routed.iter().enumerate() {
            let parts = split(d, *p, vec![box_ids[0].1[j].clone(), box_ids[1].1[j].clone()]);
            for (k, (id, mults)) in box_ids.iter().enumerate() {
                d.connect(parts[k], (*id, j), mults[j].clone());
            }
        }
        let out = gather(
            d,
            box_ids
                .iter()
                .map(|(id, mults)| ((*id, ins), mults[ins].clone()))
                .collect(),
        );
        Ok((out, merge_types(&types[0], &types[1], &g)))
    }
}

fn restore(env: &mut Env, name: &str, saved: Option<(PortRef, Type)>) {
    env.remove(name);
    if let Some(s) = saved {
        env.insert(name.to_string(), s);
    }
}
