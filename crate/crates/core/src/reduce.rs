// SPDX-License-Identifier: Apache-2.0

//! Weak call-by-value small-step reduction, including primitive unfoldings
//! and the vector macros.
//!
//! Reduction is purely syntactic: `meas`, `new`, gates and rotations are
//! inert, and their applications to values are treated as values so that
//! reduction can proceed past them. A hook can intercept those applications
//! instead, which is how circuits are extracted.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::nat::{fresh_name, NatExpr, NatOp};
use crate::parser::parse_term;
use crate::syntax::build::*;
use crate::syntax::{term_to_nat, Gate, Macro, ParamContext, Prim, StateContext, Term, TermKind, Type};

pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("no normal form within {0} steps")]
    FuelExhausted(u64),
}

/// An argument in an application spine.
#[derive(Debug, Clone, Copy)]
pub enum Arg<'a> {
    Param(&'a Term),
    State(&'a Term),
}

impl<'a> Arg<'a> {
    pub fn term(self) -> &'a Term {
        match self {
            Arg::Param(t) | Arg::State(t) => t,
        }
    }
}

/// Splits `f @a b c` into its head and arguments in application order.
pub fn spine(t: &Term) -> (&Term, Vec<Arg<'_>>) {
    let mut args = Vec::new();
    let mut head = t;
    loop {
        match &head.kind {
            TermKind::App(f, a) => {
                args.push(Arg::State(a));
                head = f;
            }
            TermKind::PApp(f, a) => {
                args.push(Arg::Param(a));
                head = f;
            }
            _ => break,
        }
    }
    args.reverse();
    (head, args)
}

/// Parameter and state arity of a quantum constant, if `head` is one.
fn constant_arity(head: &Term) -> Option<(usize, usize)> {
    match &head.kind {
        TermKind::Meas | TermKind::New | TermKind::Gate(Gate::H) => Some((0, 1)),
        TermKind::Gate(Gate::Cnot) => Some((0, 2)),
        TermKind::Rot(_) => Some((1, 1)),
        _ => None,
    }
}

/// A quantum constant applied to at most its arity of value arguments.
pub fn is_neutral(t: &Term) -> bool {
    let (head, args) = spine(t);
    let Some((np, ns)) = constant_arity(head) else {
        return false;
    };
    if args.is_empty() || args.len() > np + ns {
        return false;
    }
    args.iter().enumerate().all(|(i, a)| match a {
        Arg::Param(p) => i < np && p.is_value(),
        Arg::State(s) => i >= np && is_rvalue(s),
    })
}

/// A quantum constant applied to exactly its arity of value arguments.
pub fn is_saturated_constant(t: &Term) -> bool {
    let (head, args) = spine(t);
    matches!(constant_arity(head), Some((np, ns)) if args.len() == np + ns) && is_neutral(t)
}

/// Values together with inert applications of quantum constants.
pub fn is_rvalue(t: &Term) -> bool {
    t.is_value() || is_neutral(t)
}

pub type Hook<'a> = dyn FnMut(&Term) -> Option<Term> + 'a;

/// One reduction step at the leftmost-outermost redex.
pub fn step(t: &Term) -> Option<Term> {
    step_in(t, &mut |_| None)
}

/// One step, offering every saturated constant application to `hook` first.
pub fn step_with(t: &Term, hook: &mut Hook<'_>) -> Option<Term> {
    step_in(t, hook)
}

fn rebuild(t: &Term, kind: TermKind) -> Term {
    Term::new(kind, t.span)
}

fn step_in(t: &Term, hook: &mut Hook<'_>) -> Option<Term> {
    match &t.kind {
        TermKind::App(f, a) => {
            if !is_rvalue(a) {
                let a2 = step_in(a, hook)?;
                return Some(rebuild(t, TermKind::App(f.clone(), Box::new(a2))));
            }
            if let TermKind::Lam { var, body, .. } = &f.kind {
                return Some(body.subst(var, a));
            }
            if let Some(r) = step_primitive(t) {
                return Some(r);
            }
            if is_saturated_constant(t) {
                return hook(t);
            }
            let f2 = step_in(f, hook)?;
            Some(rebuild(t, TermKind::App(Box::new(f2), a.clone())))
        }
        TermKind::PApp(f, a) => {
            if matches!(f.kind, TermKind::Prim(Prim::Reverse)) {
                return step_reverse(t, a, hook);
            }
            if !a.is_value() {
                let a2 = step_in(a, hook)?;
                return Some(rebuild(t, TermKind::PApp(f.clone(), Box::new(a2))));
            }
            if let TermKind::PLam { var, body, .. } = &f.kind {
                return Some(body.subst(var, a));
            }
            if let Some(r) = step_primitive(t) {
                return Some(r);
            }
            let f2 = step_in(f, hook)?;
            Some(rebuild(t, TermKind::PApp(Box::new(f2), a.clone())))
        }
        TermKind::LetPair {
            left,
            right,
            bound,
            body,
            ..
        } => match &bound.kind {
            TermKind::Pair(m1, m2) => Some(subst_two(body, left, m1, right, m2)),
            _ => {
                let b2 = step_in(bound, hook)?;
                let mut kind = t.kind.clone();
                if let TermKind::LetPair { bound, .. } = &mut kind {
                    **bound = b2;
                }
                Some(rebuild(t, kind))
            }
        },
        TermKind::LetCons {
            head,
            tail,
            bound,
            body,
            ..
        } => match &bound.kind {
            TermKind::Cons(m1, m2) => Some(subst_two(body, head, m1, tail, m2)),
            _ => {
                let b2 = step_in(bound, hook)?;
                let mut kind = t.kind.clone();
                if let TermKind::LetCons { bound, .. } = &mut kind {
                    **bound = b2;
                }
                Some(rebuild(t, kind))
            }
        },
        TermKind::Ifz { guard, then, els } => match &guard.kind {
            TermKind::Num(0) => Some((**then).clone()),
            TermKind::Num(_) => Some((**els).clone()),
            _ => {
                let g2 = step_in(guard, hook)?;
                Some(rebuild(
                    t,
                    TermKind::Ifz {
                        guard: Box::new(g2),
                        then: then.clone(),
                        els: els.clone(),
                    },
                ))
            }
        },
        TermKind::Seq(a, b) => match &a.kind {
            TermKind::Unit => Some((**b).clone()),
            _ => {
                let a2 = step_in(a, hook)?;
                Some(rebuild(t, TermKind::Seq(Box::new(a2), b.clone())))
            }
        },
        TermKind::SeqV(a, b) => match &a.kind {
            TermKind::Nil(_) => Some((**b).clone()),
            _ => {
                let a2 = step_in(a, hook)?;
                Some(rebuild(t, TermKind::SeqV(Box::new(a2), b.clone())))
            }
        },
        TermKind::Arith(op, a, b) => {
            if !b.is_value() {
                let b2 = step_in(b, hook)?;
                return Some(rebuild(t, TermKind::Arith(*op, a.clone(), Box::new(b2))));
            }
            if let (TermKind::Num(x), TermKind::Num(y)) = (&a.kind, &b.kind) {
                return op.apply(*x, *y).ok().map(|v| rebuild(t, TermKind::Num(v)));
            }
            let a2 = step_in(a, hook)?;
            Some(rebuild(t, TermKind::Arith(*op, Box::new(a2), b.clone())))
        }
        TermKind::For { index, list, body } => match &list.kind {
            TermKind::Cons(h, tl) => Some(rebuild(
                t,
                TermKind::Cons(
                    Box::new(body.subst(index, h)),
                    Box::new(rebuild(
                        t,
                        TermKind::For {
                            index: index.clone(),
                            list: tl.clone(),
                            body: body.clone(),
                        },
                    )),
                ),
            )),
            TermKind::Nil(_) => Some(rebuild(t, TermKind::Nil(for_element_type(index, body)))),
            _ => {
                let l2 = step_in(list, hook)?;
                Some(rebuild(
                    t,
                    TermKind::For {
                        index: index.clone(),
                        list: Box::new(l2),
                        body: body.clone(),
                    },
                ))
            }
        },
        _ => None,
    }
}

/// `N[M1/x][M2/y]` without letting `M1` capture `y`.
fn subst_two(body: &Term, x: &str, m1: &Term, y: &str, m2: &Term) -> Term {
    let fv1 = m1.free_names();
    if fv1.contains(y) {
        let mut avoid = body.free_names();
        avoid.extend(fv1);
        avoid.extend(m2.free_names());
        avoid.insert(x.to_string());
        let y2 = fresh_name(y, &avoid);
        body.rename(y, &y2).subst(x, m1).subst(&y2, m2)
    } else {
        body.subst(x, m1).subst(y, m2)
    }
}

/// Element type of a `for` over the empty list, recovered by checking the
/// body with every free name taken as a Nat parameter.
fn for_element_type(index: &str, body: &Term) -> Type {
    let mut names: BTreeSet<String> = body.free_names();
    names.insert(index.to_string());
    let phi = ParamContext::new(names.into_iter().map(|n| (n, Type::Nat)).collect());
    crate::typecheck::typecheck(&phi, &StateContext::default(), body)
        .map(|(ty, _)| ty)
        .unwrap_or(Type::Unit)
}

fn literal_nat_list(t: &Term) -> Option<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = t;
    loop {
        match &cur.kind {
            TermKind::Nil(_) => return Some(out),
            TermKind::Cons(h, tl) => match h.kind {
                TermKind::Num(n) => {
                    out.push(n);
                    cur = tl;
                }
                _ => return None,
            },
            _ => return None,
        }
    }
}

/// Steps the first unevaluated position along a list spine.
fn step_list_spine(t: &Term, hook: &mut Hook<'_>) -> Option<Term> {
    match &t.kind {
        TermKind::Cons(h, tl) => {
            if !matches!(h.kind, TermKind::Num(_)) {
                let h2 = step_in(h, hook)?;
                return Some(rebuild(t, TermKind::Cons(Box::new(h2), tl.clone())));
            }
            let tl2 = step_list_spine(tl, hook)?;
            Some(rebuild(t, TermKind::Cons(h.clone(), Box::new(tl2))))
        }
        _ => step_in(t, hook),
    }
}

fn step_reverse(t: &Term, arg: &Term, hook: &mut Hook<'_>) -> Option<Term> {
    if let Some(mut xs) = literal_nat_list(arg) {
        xs.reverse();
        return Some(
            xs.into_iter()
                .rev()
                .fold(nil(Type::Nat), |acc, x| cons(num(x), acc)),
        );
    }
    let a2 = step_list_spine(arg, hook)?;
    let f = match &t.kind {
        TermKind::PApp(f, _) => f.clone(),
        _ => unreachable!(),
    };
    Some(rebuild(t, TermKind::PApp(f, Box::new(a2))))
}

/// Unfolds a saturated primitive application whose arguments are values.
pub fn step_primitive(t: &Term) -> Option<Term> {
    let (head, args) = spine(t);
    let TermKind::Prim(p) = &head.kind else {
        return None;
    };
    let (np, ns) = p.arity();
    if args.len() != np + ns || matches!(p, Prim::Reverse) {
        return None;
    }
    let mut params = Vec::new();
    let mut states = Vec::new();
    for (i, a) in args.iter().enumerate() {
        match (i < np, a) {
            (true, Arg::Param(x)) if x.is_value() => params.push((*x).clone()),
            (false, Arg::State(x)) if is_rvalue(x) => states.push((*x).clone()),
            _ => return None,
        }
    }
    let mut avoid = BTreeSet::new();
    for a in params.iter().chain(&states) {
        avoid.extend(a.free_names());
    }
    for ty in p.type_args() {
        avoid.extend(ty.free_vars());
    }
    let sizes: Vec<NatExpr> = params.iter().map(term_to_nat).collect::<Option<_>>()?;
    Some(unfold(p, &params, &sizes, &states, &mut avoid))
}

fn fresh(base: &str, avoid: &mut BTreeSet<String>) -> String {
    let name = if avoid.contains(base) {
        fresh_name(base, avoid)
    } else {
        base.to_string()
    };
    avoid.insert(name.clone());
    name
}

fn minus_one(n: &Term) -> Term {
    arith(NatOp::Sub, n.clone(), num(1))
}

fn unfold(
    p: &Prim,
    params: &[Term],
    sizes: &[NatExpr],
    states: &[Term],
    avoid: &mut BTreeSet<String>,
) -> Term {
    let dec = |e: &NatExpr| NatExpr::sub(e.clone(), NatExpr::Const(1));
    match p {
        Prim::AccuMap(a, b, c) => {
            let (n, nn) = (&params[0], &sizes[0]);
            let (xs, fs, z) = (&states[0], &states[1], &states[2]);
            let fty = Type::lolli(a.clone(), Type::lolli(c.clone(), Type::tensor(b.clone(), c.clone())));
            let [x, xs1, f, fs1, y, z1, ys, z2] =
                ["x", "xs", "f", "fs", "y", "z", "ys", "z"].map(|s| fresh(s, avoid));
            let rec = apps(
                papp(prim(p.clone()), minus_one(n)),
                vec![var(&xs1), var(&fs1), var(&z1)],
            );
            ifz(
                n.clone(),
                seqv(xs.clone(), seqv(fs.clone(), pair(nil(b.clone()), z.clone()))),
                let_cons(
                    &x,
                    Some(a.clone()),
                    &xs1,
                    Some(Type::vec(a.clone(), dec(nn))),
                    xs.clone(),
                    let_cons(
                        &f,
                        Some(fty.clone()),
                        &fs1,
                        Some(Type::vec(fty, dec(nn))),
                        fs.clone(),
                        let_pair(
                            &y,
                            Some(b.clone()),
                            &z1,
                            Some(c.clone()),
                            apps(var(&f), vec![var(&x), z.clone()]),
                            let_pair(
                                &ys,
                                Some(Type::vec(b.clone(), dec(nn))),
                                &z2,
                                Some(c.clone()),
                                rec,
                                pair(cons(var(&y), var(&ys)), var(&z2)),
                            ),
                        ),
                    ),
                ),
            )
        }
        Prim::Split(a) => {
            let (n, m) = (&params[0], &params[1]);
            let (nn, mm) = (&sizes[0], &sizes[1]);
            let xs = &states[0];
            let [y, xs1, ys1, ys2] = ["y", "xs", "ys", "ys"].map(|s| fresh(s, avoid));
            ifz(
                n.clone(),
                pair(nil(a.clone()), xs.clone()),
                let_cons(
                    &y,
                    Some(a.clone()),
                    &xs1,
                    Some(Type::vec(a.clone(), dec(&NatExpr::add(nn.clone(), mm.clone())))),
                    xs.clone(),
                    let_pair(
                        &ys1,
                        Some(Type::vec(a.clone(), dec(nn))),
                        &ys2,
                        Some(Type::vec(a.clone(), mm.clone())),
                        app(papp(papp(prim(p.clone()), minus_one(n)), m.clone()), var(&xs1)),
                        pair(cons(var(&y), var(&ys1)), var(&ys2)),
                    ),
                ),
            )
        }
        Prim::Append(a) => {
            let (n, m) = (&params[0], &params[1]);
            let (xs, ys) = (&states[0], &states[1]);
            let [x, xs1] = ["x", "xs"].map(|s| fresh(s, avoid));
            ifz(
                n.clone(),
                seqv(xs.clone(), ys.clone()),
                let_cons(
                    &x,
                    Some(a.clone()),
                    &xs1,
                    Some(Type::vec(a.clone(), dec(&sizes[0]))),
                    xs.clone(),
                    cons(
                        var(&x),
                        apps(
                            papp(papp(prim(p.clone()), minus_one(n)), m.clone()),
                            vec![var(&xs1), ys.clone()],
                        ),
                    ),
                ),
            )
        }
        Prim::Drop => {
            let n = &params[0];
            let xs = &states[0];
            let [x, xs1] = ["x", "xs"].map(|s| fresh(s, avoid));
            ifz(
                n.clone(),
                seqv(xs.clone(), unit()),
                let_cons(
                    &x,
                    Some(Type::Unit),
                    &xs1,
                    Some(Type::vec(Type::Unit, dec(&sizes[0]))),
                    xs.clone(),
                    seq(var(&x), app(papp(prim(Prim::Drop), minus_one(n)), var(&xs1))),
                ),
            )
        }
        Prim::Range => {
            let (n, m) = (&params[0], &params[1]);
            ifz(
                arith(NatOp::Sub, m.clone(), n.clone()),
                nil(Type::Nat),
                cons(n.clone(), range(arith(NatOp::Add, n.clone(), num(1)), m.clone())),
            )
        }
        Prim::Reverse => unreachable!("reverse is evaluated directly"),
    }
}

fn pick(base: &str, avoid: &BTreeSet<String>) -> String {
    if avoid.contains(base) {
        fresh_name(base, avoid)
    } else {
        base.to_string()
    }
}

/// The definition of a vector macro as a closed, fully annotated term.
pub fn expand_macro(m: &Macro) -> Term {
    let mut avoid = BTreeSet::new();
    for t in m.type_args() {
        avoid.extend(t.free_vars());
    }
    let n = pick("n", &avoid);
    let k = pick("k", &avoid);
    let src = match m {
        Macro::Map(a, b) => format!(
            "\\'{n}. \\xs:Vec ({a}) {n}. \\fs:Vec (({a}) -o ({b})) {n}.
             let fs2 (*) u1 = accuMap[({a}) -o ({b}), ({a}) -o Unit -o ({b}) * Unit, Unit] @{n} fs
                 (for {k} in 0..{n} do \\f:({a}) -o ({b}). \\u:Unit. (\\x:({a}). \\v:Unit. f x (*) v) (*) u) () in
             let xs2 (*) u2 = accuMap[({a}), ({b}), Unit] @{n} xs fs2 () in
             u1 ; u2 ; xs2"
        ),
        Macro::Fold(a, c) => format!(
            "\\'{n}. \\xs:Vec ({a}) {n}. \\fs:Vec (({a}) -o ({c}) -o ({c})) {n}. \\z:({c}).
             let fs2 (*) u = accuMap[({a}) -o ({c}) -o ({c}), ({a}) -o ({c}) -o Unit * ({c}), Unit] @{n} fs
                 (for {k} in 0..{n} do \\f:({a}) -o ({c}) -o ({c}). \\u:Unit. (\\x:({a}). \\y:({c}). () (*) f x y) (*) u) () in
             let us (*) r = accuMap[({a}), Unit, ({c})] @{n} xs fs2 z in
             u ; drop @{n} us ; r"
        ),
        Macro::Compose(a) => format!(
            "\\'{n}. \\xs:Vec (({a}) -o ({a})) {n}.
             fold[({a}) -o ({a}), ({a}) -o ({a})] @{n} xs
                 (for {k} in 0..{n} do \\f:({a}) -o ({a}). \\g:({a}) -o ({a}). \\x:({a}). f (g x))
                 (\\x:({a}). x)"
        ),
    };
    let t = parse_term(&src).unwrap_or_else(|e| panic!("macro template: {e}\n{src}"));
    annotate_lets(&expand_macros(&t), &avoid)
}

/// Fills the annotations of the `let` binders in a macro template. Size
/// variables of the type arguments are bound as parameters.
fn annotate_lets(t: &Term, sizes: &BTreeSet<String>) -> Term {
    let phi = ParamContext::new(sizes.iter().map(|n| (n.clone(), Type::Nat)).collect());
    crate::typecheck::typecheck(&phi, &StateContext::default(), t)
        .map(|(_, e)| e)
        .unwrap_or_else(|e| panic!("macro expansion does not typecheck: {e}"))
}

/// Replaces every macro occurrence by its definition.
pub fn expand_macros(t: &Term) -> Term {
    match &t.kind {
        TermKind::Macro(m) => {
            let mut e = expand_macro(m);
            e.span = t.span;
            e
        }
        _ => t.map_children(expand_macros),
    }
}

/// Steps inside tensors and cons cells once the head is a value.
fn step_deep(t: &Term, hook: &mut Hook<'_>) -> Option<Term> {
    if let Some(r) = step_in(t, hook) {
        return Some(r);
    }
    match &t.kind {
        TermKind::Pair(a, b) | TermKind::Cons(a, b) => {
            let mk = |a: Term, b: Term| match &t.kind {
                TermKind::Pair(..) => rebuild(t, TermKind::Pair(Box::new(a), Box::new(b))),
                _ => rebuild(t, TermKind::Cons(Box::new(a), Box::new(b))),
            };
            if let Some(a2) = step_deep(a, hook) {
                return Some(mk(a2, (**b).clone()));
            }
            step_deep(b, hook).map(|b2| mk((**a).clone(), b2))
        }
        _ => None,
    }
}

/// Reduces to a normal form, descending into tensors and cons cells.
/// Macros are expanded first.
pub fn normalize(t: &Term, fuel: u64) -> Result<Term, ReduceError> {
    normalize_with(t, fuel, &mut |_| None)
}

pub fn normalize_with(t: &Term, fuel: u64, hook: &mut Hook<'_>) -> Result<Term, ReduceError> {
    let mut cur = expand_macros(t);
    for _ in 0..fuel {
        match step_deep(&cur, hook) {
            Some(next) => cur = next,
            None => return Ok(cur),
        }
    }
    Err(ReduceError::FuelExhausted(fuel))
}

/// Every intermediate term of the reduction, starting with the expanded input.
pub fn trace(t: &Term, fuel: u64) -> Result<Vec<Term>, ReduceError> {
    let mut out = vec![expand_macros(t)];
    for _ in 0..fuel {
        match step_deep(out.last().expect("nonempty"), &mut |_| None) {
            Some(next) => out.push(next),
            None => return Ok(out),
        }
    }
    Err(ReduceError::FuelExhausted(fuel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::pretty_print;

    fn norm(src: &str) -> Term {
        normalize(&parse_term(src).unwrap(), DEFAULT_FUEL).unwrap()
    }

    #[test]
    fn beta_and_arith() {
        assert_eq!(step(&parse_term("(\\x:B. x) #0").unwrap()), Some(bit(false)));
        assert_eq!(norm("5 - 2"), num(3));
    }

    #[test]
    fn for_rules() {
        let t = parse_term("for k in 1 :: VNil[Nat] do k + 1").unwrap();
        assert_eq!(pretty_print(&step(&t).unwrap()), "1 + 1 :: (for k in VNil[Nat] do k + 1)");
        let t = parse_term("for k in VNil[Nat] do k").unwrap();
        assert_eq!(step(&t), Some(nil(Type::Nat)));
    }

    #[test]
    fn primitives() {
        assert_eq!(pretty_print(&norm("range @1 @3")), "1 :: 2 :: VNil[Nat]");
        assert_eq!(norm("drop @0 VNil[Unit]"), unit());
        assert_eq!(pretty_print(&norm("reverse @(0..3)")), "2 :: 1 :: 0 :: VNil[Nat]");
    }

    #[test]
    fn gates_are_inert() {
        let t = norm("(\\q:Q. H (H q))");
        assert!(matches!(t.kind, TermKind::Lam { .. }));
        let t = parse_term("H (new #0)").unwrap();
        assert!(is_rvalue(&t));
        assert_eq!(step(&t), None);
    }
}
