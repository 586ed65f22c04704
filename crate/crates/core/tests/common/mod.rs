// SPDX-License-Identifier: Apache-2.0

//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;

use szxc::eval::{eval, Env, ParamValue};
use szxc::nat::{NatEnv, NatExpr, NatListExpr, NatOp, ParamVal};
use szxc::oracle::{cpm_distance_mod_scalar, interpret, CpMap};
use szxc::parser::{parse_term, pretty_print};
use szxc::pipeline::{self, compile_source};
use szxc::reduce::{step, trace, DEFAULT_FUEL};
use szxc::syntax::{build, Classification, ParamContext, StateContext, Term, Type};
use szxc::szx::{self, Color, Concrete, Diagram, Family, FamilyBox, NodeKind, Phase, PortRef};
use szxc::translate::{translate_term, TranslateOptions};
use szxc::typecheck::typecheck;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn corpus(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap()
}

/// Every valid corpus program, by file name.
pub fn corpus_programs() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "ld"))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub fn qubits(names: &[&str]) -> Vec<(String, Type)> {
    names.iter().map(|x| (x.to_string(), Type::Qubit)).collect()
}

/// Typechecks, translates, instantiates and simplifies a term without
/// free parameters, then interprets it.
pub fn term_channel(term: &Term, gamma: &[(String, Type)]) -> CpMap {
    let (_, elab) = typecheck(&ParamContext::default(), &StateContext::new(gamma.to_vec()), term)
        .unwrap_or_else(|e| panic!("{e}"));
    let (d, _) = translate_term(&[], gamma, &elab, TranslateOptions::default())
        .unwrap_or_else(|e| panic!("{e}"));
    let c = szx::instantiate(&d, &NatEnv::new()).unwrap();
    interpret(&szx::simplify(&c), 8).unwrap()
}

pub fn src_channel(src: &str, gamma: &[(String, Type)]) -> CpMap {
    term_channel(&parse_term(src).unwrap(), gamma)
}

/// A random concrete diagram with at most `budget` boundary qubits, built
/// by wiring generators onto a pool of open wire ends.
pub fn random_diagram<R: Rng>(rng: &mut R, budget: u64) -> Diagram<Concrete> {
    let mut d = Diagram::<Concrete>::default();
    let mut open: Vec<(PortRef, u64)> = Vec::new();
    let n_inputs = rng.gen_range(0..=2);
    let mut used = 0;
    for _ in 0..n_inputs {
        let w = rng.gen_range(0..=2).min(budget.saturating_sub(used) / 2);
        used += w;
        open.push((d.add_input(w), w));
    }
    let steps = rng.gen_range(1..=8);
    for _ in 0..steps {
        let total: u64 = open.iter().map(|(_, w)| w).sum();
        match rng.gen_range(0..10) {
            0 if !open.is_empty() => {
                // Spider on one or two ends of equal width.
                let (p, w) = take(rng, &mut open);
                if w == 0 {
                    let g = d.add_node(NodeKind::Ground);
                    d.connect(p, (g, 0), 0);
                    continue;
                }
                let mut ins = vec![p];
                if let Some(i) = open.iter().position(|&(_, w2)| w2 == w) {
                    if rng.gen_bool(0.5) {
                        ins.push(open.remove(i).0);
                    }
                }
                let outs = rng.gen_range(0..=2usize);
                let color = if rng.gen_bool(0.5) { Color::Z } else { Color::X };
                let phases = (0..w).map(|_| Phase::turns(rng.gen_range(0..8), 8)).collect();
                let s = d.add_node(NodeKind::Spider {
                    color,
                    phases,
                    legs: ins.len() + outs,
                });
                for (i, p) in ins.iter().enumerate() {
                    d.connect(*p, (s, i), w);
                }
                for j in 0..outs {
                    open.push(((s, ins.len() + j), w));
                }
            }
            1 if !open.is_empty() => {
                let (p, w) = take(rng, &mut open);
                let h = d.add_node(NodeKind::Hadamard);
                d.connect(p, (h, 0), w);
                open.push(((h, 1), w));
            }
            2 if open.len() >= 2 => {
                let (p1, w1) = take(rng, &mut open);
                let (p2, w2) = take(rng, &mut open);
                let g = d.add_node(NodeKind::Gather {
                    parts: vec![w1, w2],
                    split: false,
                });
                d.connect(p1, (g, 1), w1);
                d.connect(p2, (g, 2), w2);
                open.push(((g, 0), w1 + w2));
            }
            3 if !open.is_empty() => {
                let (p, w) = take(rng, &mut open);
                let a = rng.gen_range(0..=w);
                let g = d.add_node(NodeKind::Gather {
                    parts: vec![a, w - a],
                    split: true,
                });
                d.connect(p, (g, 0), w);
                open.push(((g, 1), a));
                open.push(((g, 2), w - a));
            }
            4 if !open.is_empty() => {
                let (p, w) = take(rng, &mut open);
                let mut perm: Vec<usize> = (0..w as usize).collect();
                perm.shuffle(rng);
                let n = d.add_node(NodeKind::Perm(perm));
                d.connect(p, (n, 0), w);
                open.push(((n, 1), w));
            }
            5 if open.len() >= 2 => {
                let (p1, w1) = take(rng, &mut open);
                let (p2, w2) = take(rng, &mut open);
                let s = d.add_node(NodeKind::Swap);
                d.connect(p1, (s, 0), w1);
                d.connect(p2, (s, 1), w2);
                open.push(((s, 2), w2));
                open.push(((s, 3), w1));
            }
            6 if total < 4 => {
                let w = rng.gen_range(0..=1);
                let c = d.add_node(NodeKind::Cup);
                open.push(((c, 0), w));
                open.push(((c, 1), w));
            }
            7 => {
                let w: u64 = rng.gen_range(1..=2);
                if let Some(i) = open.iter().position(|&(_, w2)| w2 == w) {
                    let (p1, _) = open.remove(i);
                    if let Some(j) = open.iter().position(|&(_, w2)| w2 == w) {
                        let (p2, _) = open.remove(j);
                        let c = d.add_node(NodeKind::Cap);
                        d.connect(p1, (c, 0), w);
                        d.connect(p2, (c, 1), w);
                    } else {
                        open.push((p1, w));
                    }
                }
            }
            8 if !open.is_empty() => {
                // A split straight into a gather, possibly of another shape.
                let (p, w) = take(rng, &mut open);
                let a = rng.gen_range(0..=w);
                let s = d.add_node(NodeKind::Gather {
                    parts: vec![a, w - a],
                    split: true,
                });
                d.connect(p, (s, 0), w);
                let b = if rng.gen_bool(0.5) { a } else { rng.gen_range(0..=w) };
                if b == a {
                    let g = d.add_node(NodeKind::Gather {
                        parts: vec![a, w - a],
                        split: false,
                    });
                    d.connect((s, 1), (g, 1), a);
                    d.connect((s, 2), (g, 2), w - a);
                    open.push(((g, 0), w));
                } else {
                    open.push(((s, 1), a));
                    open.push(((s, 2), w - a));
                }
            }
            _ if !open.is_empty() && rng.gen_bool(0.3) => {
                let (p, w) = take(rng, &mut open);
                let g = d.add_node(NodeKind::Ground);
                d.connect(p, (g, 0), w);
            }
            _ => {}
        }
    }
    // Ground whatever does not fit in the boundary budget.
    open.shuffle(rng);
    for (p, w) in open {
        if used + w <= budget {
            used += w;
            let o = d.add_output(w);
            d.connect(p, o, w);
        } else {
            let g = d.add_node(NodeKind::Ground);
            d.connect(p, (g, 0), w);
        }
    }
    d
}

fn take<R: Rng>(rng: &mut R, open: &mut Vec<(PortRef, u64)>) -> (PortRef, u64) {
    let i = rng.gen_range(0..open.len());
    open.swap_remove(i)
}

/// Random closed terms of evaluable type, built so that every generated
/// term is well typed.
pub struct TermGen<'a, R: Rng> {
    pub rng: &'a mut R,
    fresh: usize,
}

impl<'a, R: Rng> TermGen<'a, R> {
    pub fn new(rng: &'a mut R) -> Self {
        TermGen { rng, fresh: 0 }
    }

    fn name(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{base}{}", self.fresh)
    }

    pub fn nat(&mut self, depth: u32, scope: &[String]) -> Term {
        let leaf = depth == 0 || self.rng.gen_bool(0.25);
        if leaf {
            return if !scope.is_empty() && self.rng.gen_bool(0.5) {
                build::var(scope.choose(self.rng).unwrap())
            } else {
                build::num(self.rng.gen_range(0..5))
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..6) {
            0 | 1 => {
                let op = *[NatOp::Add, NatOp::Sub, NatOp::Mul].choose(self.rng).unwrap();
                build::arith(op, self.nat(d, scope), self.nat(d, scope))
            }
            2 => build::ifz(self.nat(d, scope), self.nat(d, scope), self.nat(d, scope)),
            3 => {
                // A parameter redex.
                let x = self.name("p");
                let mut inner = scope.to_vec();
                inner.push(x.clone());
                let body = self.nat(d, &inner);
                build::papp(build::plam(&x, body), self.nat(d, scope))
            }
            4 => {
                // Take the head of a nonempty list.
                let len = self.rng.gen_range(1..=3);
                let list = self.list(len, d, scope);
                let (h, t) = (self.name("h"), self.name("t"));
                let mut inner = scope.to_vec();
                inner.push(h.clone());
                let body = self.nat(d, &inner);
                build::let_cons(&h, None, &t, None, list, body)
            }
            _ => build::num(self.rng.gen_range(0..5)),
        }
    }

    /// A list of exactly `len` naturals.
    pub fn list(&mut self, len: u64, depth: u32, scope: &[String]) -> Term {
        let leaf = depth == 0 || self.rng.gen_bool(0.2);
        if leaf {
            return self.literal(len, scope);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..5) {
            0 => {
                let lo = self.rng.gen_range(0..3);
                build::papp(
                    build::papp(build::prim(szxc::syntax::Prim::Range), build::num(lo)),
                    build::num(lo + len),
                )
            }
            1 => build::papp(build::prim(szxc::syntax::Prim::Reverse), self.list(len, d, scope)),
            2 => {
                let k = self.name("k");
                let src = self.list(len, d, scope);
                let mut inner = scope.to_vec();
                inner.push(k.clone());
                let body = self.nat(d, &inner);
                build::for_(&k, src, body)
            }
            3 if len > 0 => build::cons(self.nat(d, scope), self.list(len - 1, d, scope)),
            _ => {
                let x = self.name("p");
                let mut inner = scope.to_vec();
                inner.push(x.clone());
                let body = self.list(len, d, &inner);
                build::papp(build::plam(&x, body), self.nat(d, scope))
            }
        }
    }

    fn literal(&mut self, len: u64, scope: &[String]) -> Term {
        let mut t = build::nil(Type::Nat);
        for _ in 0..len {
            let h = self.nat(0, scope);
            t = build::cons(h, t);
        }
        t
    }

    /// A natural or a list, with equal probability.
    pub fn evaluable(&mut self, depth: u32) -> Term {
        if self.rng.gen_bool(0.5) {
            self.nat(depth, &[])
        } else {
            let len = self.rng.gen_range(0..=3);
            self.list(len, depth, &[])
        }
    }
}

/// Small family bodies over the index `k`, for checks on list
/// instantiation. Each has at most three generators.
pub fn sample_bodies() -> Vec<(&'static str, Diagram<szx::Family>)> {
    use szx::{Family, PhaseExpr, PhaseVec};
    use szxc::nat::NatExpr;
    let k = || NatExpr::var("k");
    let k1 = || NatExpr::add(NatExpr::var("k"), NatExpr::Const(1));
    let mut out = Vec::new();

    let mut d = Diagram::<Family>::new(vec![]);
    let i = d.add_input(k());
    let o = d.add_output(k());
    let s = d.add_node(NodeKind::Spider {
        color: Color::Z,
        phases: PhaseVec::Uniform(PhaseExpr::Turn { negative: false, den: k1() }, k()),
        legs: 2,
    });
    d.connect(i, (s, 0), k());
    d.connect((s, 1), o, k());
    out.push(("z-phase", d));

    let mut d = Diagram::<Family>::new(vec![]);
    let i = d.add_input(k1());
    let o = d.add_output(k1());
    let h = d.add_node(NodeKind::Hadamard);
    let x = d.add_node(NodeKind::Spider {
        color: Color::X,
        phases: PhaseVec::Uniform(PhaseExpr::Const(Phase::turns(1, 4)), k1()),
        legs: 2,
    });
    d.connect(i, (h, 0), k1());
    d.connect((h, 1), (x, 0), k1());
    d.connect((x, 1), o, k1());
    out.push(("hadamard-x", d));

    let mut d = Diagram::<Family>::new(vec![]);
    let a = d.add_input(k());
    let b = d.add_input(NatExpr::Const(1));
    let o = d.add_output(k1());
    let g = d.add_node(NodeKind::Gather {
        parts: vec![k(), NatExpr::Const(1)],
        split: false,
    });
    let h = d.add_node(NodeKind::Hadamard);
    d.connect(a, (g, 1), k());
    d.connect(b, (g, 2), NatExpr::Const(1));
    d.connect((g, 0), (h, 0), k1());
    d.connect((h, 1), o, k1());
    out.push(("gather", d));

    let mut d = Diagram::<Family>::new(vec![]);
    let i = d.add_input(k1());
    let o = d.add_output(k1());
    let z = d.add_node(NodeKind::Spider {
        color: Color::Z,
        phases: PhaseVec::Uniform(PhaseExpr::Const(Phase::ZERO), k1()),
        legs: 3,
    });
    let gr = d.add_node(NodeKind::Ground);
    d.connect(i, (z, 0), k1());
    d.connect((z, 1), o, k1());
    d.connect((z, 2), (gr, 0), k1());
    out.push(("measure", d));
    out
}

pub fn boxed(body: &Diagram<szx::Family>, list: &[u64]) -> szx::FamilyBox {
    use szxc::nat::{NatExpr, NatListExpr};
    let list = list
        .iter()
        .rev()
        .fold(NatListExpr::Nil, |acc, &x| NatListExpr::cons(NatExpr::Const(x), acc));
    szx::FamilyBox {
        index: "k".into(),
        list,
        body: body.clone(),
    }
}

/// Splits each combined boundary into a head part and a rest part, or the
/// reverse, as a concrete diagram.
fn regroup(heads: &[u64], rests: &[u64], splitting: bool) -> Diagram<Concrete> {
    let mut d = Diagram::<Concrete>::default();
    let n = heads.len();
    let combined: Vec<u64> = heads.iter().zip(rests).map(|(a, b)| a + b).collect();
    let mut nodes = Vec::new();
    if splitting {
        let ins: Vec<PortRef> = combined.iter().map(|&w| d.add_input(w)).collect();
        for j in 0..n {
            let g = d.add_node(NodeKind::Gather {
                parts: vec![heads[j], rests[j]],
                split: true,
            });
            d.connect(ins[j], (g, 0), combined[j]);
            nodes.push(g);
        }
        for j in 0..n {
            let o = d.add_output(heads[j]);
            d.connect((nodes[j], 1), o, heads[j]);
        }
        for j in 0..n {
            let o = d.add_output(rests[j]);
            d.connect((nodes[j], 2), o, rests[j]);
        }
    } else {
        let hs: Vec<PortRef> = heads.iter().map(|&w| d.add_input(w)).collect();
        let rs: Vec<PortRef> = rests.iter().map(|&w| d.add_input(w)).collect();
        for j in 0..n {
            let g = d.add_node(NodeKind::Gather {
                parts: vec![heads[j], rests[j]],
                split: false,
            });
            d.connect(hs[j], (g, 1), heads[j]);
            d.connect(rs[j], (g, 2), rests[j]);
            nodes.push(g);
        }
        for j in 0..n {
            let o = d.add_output(combined[j]);
            d.connect((nodes[j], 0), o, combined[j]);
        }
    }
    d
}

/// Distance between the box over `head :: rest` and the instance at
/// `head` beside the box over `rest`, joined by boundary splits and
/// gathers.
pub fn list_decomposition_distance(body: &Diagram<szx::Family>, head: u64, rest: &[u64]) -> f64 {
    let mut list = vec![head];
    list.extend_from_slice(rest);
    let whole = szx::instantiate_box(&boxed(body, &list), &NatEnv::new()).unwrap();
    let mut env = NatEnv::new();
    env.insert("k".into(), szxc::nat::ParamVal::Nat(head));
    let first = szx::instantiate(body, &env).unwrap();
    let others = szx::instantiate_box(&boxed(body, rest), &NatEnv::new()).unwrap();
    let side = first.tensor(&others);
    let pre = regroup(&first.input_mults(), &others.input_mults(), true);
    let post = regroup(&first.output_mults(), &others.output_mults(), false);
    let rhs = pre.compose(&side).unwrap().compose(&post).unwrap();
    let a = interpret(&whole, 10).unwrap();
    let b = interpret(&rhs, 10).unwrap();
    szxc::oracle::cpm_distance_mod_scalar(&a, &b)
}

/// `k` controlled-NOTs from each wire of a `k`-register onto one target,
/// in order, drawn generator by generator. Inputs are the register and
/// the target; the output is the register followed by the target.
pub fn cnot_chain(k: u64) -> Diagram<Concrete> {
    let mut d = Diagram::<Concrete>::default();
    let xs = d.add_input(k);
    let c = d.add_input(1);
    let split = d.add_node(NodeKind::Gather {
        parts: vec![1; k as usize],
        split: true,
    });
    d.connect(xs, (split, 0), k);
    let gather = d.add_node(NodeKind::Gather {
        parts: vec![1; k as usize + 1],
        split: false,
    });
    let mut target = c;
    for i in 0..k as usize {
        let z = d.add_node(NodeKind::Spider {
            color: Color::Z,
            phases: vec![Phase::ZERO],
            legs: 3,
        });
        let x = d.add_node(NodeKind::Spider {
            color: Color::X,
            phases: vec![Phase::ZERO],
            legs: 3,
        });
        d.connect((split, i + 1), (z, 0), 1);
        d.connect((z, 1), (gather, i + 1), 1);
        d.connect((z, 2), (x, 2), 1);
        d.connect(target, (x, 0), 1);
        target = (x, 1);
    }
    d.connect(target, (gather, k as usize + 1), 1);
    let o = d.add_output(k + 1);
    d.connect((gather, 0), o, k + 1);
    d
}

/// The accumulating map of `CNOT` over a `k`-register, translated as a
/// family in `k` and instantiated.
pub fn accumulating_cnot(k: u64) -> Diagram<Concrete> {
    let term = parse_term("accuMap[Q, Q, Q] @k xs (for i in 0..k do CNOT) c").unwrap();
    let phi = vec![("k".to_string(), Type::Nat)];
    let gamma = vec![
        ("xs".to_string(), Type::vec(Type::Qubit, szxc::nat::NatExpr::var("k"))),
        ("c".to_string(), Type::Qubit),
    ];
    let (_, elab) = typecheck(
        &ParamContext::new(phi.clone()),
        &StateContext::new(gamma.clone()),
        &term,
    )
    .unwrap_or_else(|e| panic!("{e}"));
    let (d, _) = translate_term(&phi, &gamma, &elab, TranslateOptions::default()).unwrap();
    let mut env = NatEnv::new();
    env.insert("k".into(), szxc::nat::ParamVal::Nat(k));
    szx::simplify(&szx::instantiate(&d, &env).unwrap())
}

/// Subterms of the corpus that have a parameter type once their free
/// names are set to 2, closed that way.
pub fn evaluable_corpus_subterms() -> Vec<Term> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for (_, src) in corpus_programs() {
        let prog = szxc::parser::parse_program(&src).unwrap();
        for d in &prog.defs {
            let mut stack = vec![prog.inlined(&d.name).unwrap()];
            while let Some(t) = stack.pop() {
                stack.extend(t.children().into_iter().cloned());
                let mut closed = t.clone();
                for x in t.free_names() {
                    closed = closed.subst(&x, &build::num(2));
                }
                let ok = typecheck(&ParamContext::default(), &StateContext::default(), &closed)
                    .is_ok_and(|(ty, _)| ty.is_param());
                if ok && seen.insert(szxc::parser::pretty_print(&closed)) {
                    out.push(closed);
                }
            }
        }
    }
    out
}

/// Follows the reduction of `src` to its normal form, inside tensors and
/// cons cells too, checking every intermediate term. Returns them all.
pub fn every_step(src: &str, g: &[(String, Type)]) -> Vec<String> {
    let terms = trace(&parse_term(src).unwrap(), DEFAULT_FUEL).unwrap();
    let start = term_channel(&terms[0], g);
    for (i, t) in terms.iter().enumerate().skip(1) {
        let dist = cpm_distance_mod_scalar(&start, &term_channel(t, g));
        assert!(dist <= 1e-9, "step {i} of {src}: {} : {dist}", pretty_print(t));
    }
    terms.iter().map(pretty_print).collect()
}

/// The corpus programs whose entry is compiled to a diagram.
pub fn translatable_corpus() -> Vec<(String, pipeline::Compiled)> {
    let mut out = Vec::new();
    for (name, src) in corpus_programs() {
        let (defs, idx) = pipeline::check_source(&src, None).unwrap();
        if defs[idx].ty.classify() == Some(Classification::Evaluable) {
            continue;
        }
        let c = compile_source(&src, None, TranslateOptions::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
        out.push((name, c));
    }
    out
}

/// Every box in a family diagram, including nested ones.
pub fn boxes(d: &Diagram<Family>, out: &mut Vec<FamilyBox>) {
    for n in &d.nodes {
        if let NodeKind::Box(b) = n {
            out.push(b.clone());
            boxes(&b.body, out);
        }
    }
}

pub fn gathers(d: &Diagram<szx::Concrete>) -> usize {
    d.count_kind(|k| matches!(k, NodeKind::Gather { .. }))
}

/// Instantiates every box of the translated corpus over lists of length
/// 0 to 8 and checks that merging adds at most one node per gather of the
/// body. Returns the number of checks made.
pub fn list_growth_checks() -> usize {
    let mut checked = 0;
    for (name, c) in translatable_corpus() {
        let mut found = Vec::new();
        boxes(&c.translation.diagram, &mut found);
        for b in found {
            let mut env = NatEnv::new();
            for p in b.body.params.iter().chain(&c.translation.diagram.params) {
                env.insert(p.clone(), ParamVal::Nat(3));
            }
            for len in 0..=8u64 {
                let list: Vec<u64> = (0..len).map(|i| i % 3 + 1).collect();
                let boxed = FamilyBox {
                    index: b.index.clone(),
                    list: list
                        .iter()
                        .rev()
                        .fold(NatListExpr::Nil, |acc, &x| NatListExpr::cons(NatExpr::Const(x), acc)),
                    body: b.body.clone(),
                };
                let Ok(whole) = szx::instantiate_box(&boxed, &env) else {
                    // Bodies whose shape depends on the index cannot merge.
                    continue;
                };
                let mut inner = env.clone();
                inner.insert(b.index.clone(), ParamVal::Nat(list.first().copied().unwrap_or(0)));
                let single = szx::instantiate(&b.body, &inner).unwrap();
                let grown = whole.node_count() as i64 - single.node_count() as i64;
                assert!(
                    grown <= gathers(&single) as i64,
                    "{name}: |N| = {len}: {} vs {} with {} gathers",
                    whole.node_count(),
                    single.node_count(),
                    gathers(&single)
                );
                checked += 1;
            }
        }
    }
    checked
}

/// Follows the reduction of `t`, checking that every step keeps the value.
pub fn value_is_stable(t: &Term) -> (ParamValue, usize) {
    let v = eval(t, &Env::new()).unwrap_or_else(|e| panic!("{}: {e}", pretty_print(t)));
    let mut cur = t.clone();
    let mut steps = 0;
    while let Some(next) = step(&cur) {
        let w = eval(&next, &Env::new())
            .unwrap_or_else(|e| panic!("{} -> {}: {e}", pretty_print(&cur), pretty_print(&next)));
        assert_eq!(w, v, "{} -> {}", pretty_print(&cur), pretty_print(&next));
        cur = next;
        steps += 1;
    }
    (v, steps)
}
