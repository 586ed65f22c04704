// SPDX-License-Identifier: Apache-2.0

mod common;

use szxc::nat::{NatEnv, ParamVal};
use szxc::oracle::{cpm_distance_mod_scalar, extract_circuit, interpret, CircuitOp, CpMap};
use szxc::parser::{parse_program, parse_term, parse_type, pretty_print};
use szxc::pipeline::{self, compile_source};
use szxc::reduce::{expand_macros, step};
use szxc::syntax::{Term, Type};
use szxc::szx::{self, Color, Diagram, NodeKind, Phase, RotationConvention};
use szxc::translate::TranslateOptions;

fn gamma(entries: &[(&str, &str)]) -> Vec<(String, Type)> {
    entries
        .iter()
        .map(|(x, ty)| (x.to_string(), parse_type(ty).unwrap()))
        .collect()
}

/// Takes one step from `src` and checks both sides denote the same map.
/// Returns the reduct for the caller to inspect.
fn one_step(src: &str, g: &[(String, Type)]) -> Term {
    let t = expand_macros(&parse_term(src).unwrap());
    let next = step(&t).unwrap_or_else(|| panic!("{src} is stuck"));
    let before = common::term_channel(&t, g);
    let after = common::term_channel(&next, g);
    let dist = cpm_distance_mod_scalar(&before, &after);
    assert!(dist <= 1e-9, "{src} -> {}: {dist}", pretty_print(&next));
    next
}

#[test]
fn beta() {
    let g = gamma(&[("q", "Q")]);
    assert_eq!(pretty_print(&one_step("(\\x:Q. meas (H x)) q", &g)), "meas (H q)");
}

#[test]
fn parameter_beta() {
    let g = gamma(&[("q", "Q")]);
    let r = one_step("(\\'n. \\x:Q. Rz @n x) @4 q", &g);
    // An applied abstraction prints as a `let`.
    assert_eq!(pretty_print(&r), "let (x : Q) = q in Rz @4 x");
}

#[test]
fn let_pair() {
    let g = gamma(&[("a", "Q"), ("b", "Q")]);
    assert_eq!(pretty_print(&one_step("let x (*) y = a (*) H b in CNOT y x", &g)), "CNOT (H b) a");
}

#[test]
fn let_cons() {
    let g = gamma(&[("a", "Q"), ("qs", "Vec Q 2")]);
    let r = one_step("let h :: t = a :: qs in append[Q] @1 @2 (H h :: VNil[Q]) t", &g);
    assert_eq!(pretty_print(&r), "append[Q] @1 @2 (H a :: VNil[Q]) qs");
    let g = gamma(&[("a", "Q"), ("b", "Q")]);
    one_step("let h :: t = a :: b :: VNil[Q] in let u :: e = t in e ;v CNOT h (H u)", &g);
}

#[test]
fn ifz_zero_and_positive() {
    let g = gamma(&[("q", "Q")]);
    assert_eq!(pretty_print(&one_step("ifz 0 then H q else q", &g)), "H q");
    assert_eq!(pretty_print(&one_step("ifz 3 then H q else q", &g)), "q");
}

#[test]
fn ifz_on_a_parameter() {
    // The guard is symbolic in the body, so translation builds both branches.
    let g = gamma(&[("q", "Q")]);
    for n in [0, 2] {
        let src = format!("(\\'n. \\x:Q. ifz n then H x else Rz @n x) @{n} q");
        assert!(common::every_step(&src, &g).len() > 2);
    }
}

#[test]
fn sequence() {
    let g = gamma(&[("q", "Q")]);
    assert_eq!(pretty_print(&one_step("() ; H q", &g)), "H q");
    let g = gamma(&[("q", "Q")]);
    assert!(common::every_step("drop @2 (() :: () :: VNil[Unit]) ; H q", &g).len() > 6);
}

#[test]
fn vector_sequence() {
    let g = gamma(&[("q", "Q")]);
    assert_eq!(pretty_print(&one_step("VNil[Q] ;v H q", &g)), "H q");
}

// Weak reduction stops at a `let` over a gate application, so the step
// functions return syntactic pairs.
const STEP_FN: &str = "\\x:Q. \\c:Q. Rz @4 c (*) H x";

#[test]
fn for_over_cons_and_nil() {
    let g = gamma(&[("x0", "Q"), ("x1", "Q"), ("c", "Q")]);
    let src = format!("accuMap[Q, Q, Q] @2 (x0 :: x1 :: VNil[Q]) (for k in 1 :: 2 :: VNil[Nat] do {STEP_FN}) c");
    let r = one_step(&src, &g);
    let printed = pretty_print(&r);
    assert!(printed.contains("for k in 2 :: VNil[Nat]"), "{printed}");
    let terms = common::every_step(&src, &g);
    assert!(terms.iter().any(|t| t.contains("for k in VNil[Nat]")));
    assert!(!terms.last().unwrap().contains("for "));
    let g = gamma(&[("xs", "Vec Q 0"), ("c", "Q")]);
    let src = format!("accuMap[Q, Q, Q] @0 xs (for k in VNil[Nat] do {STEP_FN}) c");
    let r = one_step(&src, &g);
    assert!(!pretty_print(&r).contains("for "));
}

#[test]
fn accumulating_map_unfolds() {
    let g = gamma(&[("x0", "Q"), ("x1", "Q"), ("c", "Q")]);
    let src = format!("accuMap[Q, Q, Q] @2 (x0 :: x1 :: VNil[Q]) (({STEP_FN}) :: ({STEP_FN}) :: VNil[Q -o Q -o Q * Q]) c");
    let r = one_step(&src, &g);
    assert!(pretty_print(&r).starts_with("ifz 2"));
    assert!(common::every_step(&src, &g).len() > 10);
}

#[test]
fn split_unfolds() {
    let g = gamma(&[("qs", "Vec Q 3")]);
    let r = one_step("split[Q] @1 @2 qs", &g);
    assert!(pretty_print(&r).starts_with("ifz 1"));
    let g = gamma(&[("a", "Q"), ("b", "Q"), ("c", "Q")]);
    let src = "let l (*) r = split[Q] @1 @2 (a :: b :: c :: VNil[Q]) in \
               let h :: t = l in t ;v append[Q] @2 @1 r (H h :: VNil[Q])";
    assert!(common::every_step(src, &g).len() > 10);
}

#[test]
fn append_unfolds() {
    let g = gamma(&[("a", "Vec Q 2"), ("b", "Vec Q 1")]);
    let r = one_step("append[Q] @2 @1 a b", &g);
    assert!(pretty_print(&r).starts_with("ifz 2"));
    let g = gamma(&[("a", "Q"), ("b", "Q"), ("c", "Q")]);
    let src = "append[Q] @2 @1 (a :: H b :: VNil[Q]) (c :: VNil[Q])";
    assert!(common::every_step(src, &g).len() > 5);
}

#[test]
fn drop_unfolds() {
    let g = gamma(&[("us", "Vec Unit 2"), ("q", "Q")]);
    let r = one_step("drop @2 us ; q", &g);
    assert!(pretty_print(&r).starts_with("(ifz 2"), "{}", pretty_print(&r));
}

#[test]
fn range_and_reverse_unfold() {
    let g = gamma(&[("a", "Q"), ("b", "Q")]);
    let src = "map[Q, Q] @2 (a :: b :: VNil[Q]) (for k in 0..2 do \\q:Q. Rz @(k + 2) q)";
    assert!(common::every_step(src, &g).len() > 10);
    let src = "map[Q, Q] @2 (a :: b :: VNil[Q]) (for k in reverse @(0..2) do \\q:Q. Rz @(k + 2) q)";
    assert!(common::every_step(src, &g).len() > 10);
}

#[test]
fn fold_and_compose_unfold() {
    let g = gamma(&[("a", "Q"), ("b", "Q")]);
    let src = "compose[Vec Q 2] @2 (for k in 0..2 do \\r:Vec Q 2. map[Q, Q] @2 r (for j in 0..2 do \\q:Q. Rz @(j + k + 1) q)) (a :: b :: VNil[Q])";
    assert!(common::every_step(src, &g).len() > 10);
}

#[test]
fn qft_steps_preserve_the_map() {
    let prog = parse_program(&common::corpus("qft.ld")).unwrap();
    let qft = pretty_print(&prog.inlined("qft").unwrap());
    let g = gamma(&[("q0", "Q"), ("q1", "Q")]);
    let src = format!("({qft}) @2 (q0 :: q1 :: VNil[Q])");
    assert!(common::every_step(&src, &g).len() > 20);
}

#[test]
fn qft_at_one_is_the_hadamard_channel() {
    let c = compile_source(&common::corpus("qft.ld"), Some("qft"), TranslateOptions::default()).unwrap();
    let env = pipeline::param_env(&c.translation.params, &[("n".to_string(), ParamVal::Nat(1))].into()).unwrap();
    let m = pipeline::diagram_channel(&c.translation, &env, 8).unwrap();
    let h = common::src_channel("H q", &common::qubits(&["q"]));
    assert!(cpm_distance_mod_scalar(&m, &h) <= 1e-12);
    let mut hd = Diagram::<szx::Concrete>::default();
    let i = hd.add_input(1);
    let o = hd.add_output(1);
    let n = hd.add_node(NodeKind::Hadamard);
    hd.connect(i, (n, 0), 1);
    hd.connect((n, 1), o, 1);
    assert!(cpm_distance_mod_scalar(&m, &interpret(&hd, 8).unwrap()) <= 1e-12);
}

#[test]
fn controlled_rotation_circuit() {
    let prog = parse_program(&common::corpus("qft.ld")).unwrap();
    let crot = prog.inlined("crot").unwrap();
    let t = szxc::syntax::build::app(
        szxc::syntax::build::papp(crot, szxc::syntax::build::num(2)),
        szxc::syntax::build::var("qs"),
    );
    let inputs = gamma(&[("qs", "Q * Q")]);
    let c = extract_circuit(&t, &inputs, RotationConvention::TwoPi).unwrap();
    let rot = |p: Phase| CircuitOp::Rotate {
        wire: 1,
        color: Color::Z,
        phase: p,
    };
    let cnot = CircuitOp::Cnot { control: 0, target: 1 };
    assert_eq!(
        c.ops,
        vec![rot(Phase::turns(1, 4)), cnot.clone(), rot(Phase::turns(-1, 4)), cnot]
    );
    assert_eq!(c.outputs, vec![0, 1]);
}

#[test]
fn list_instantiation_adds_at_most_one_node_per_gather() {
    let checked = common::list_growth_checks();
    assert!(checked >= 9, "only {checked} checks");
}

fn type_width(ty: &Type, env: &NatEnv) -> u64 {
    match ty {
        Type::Qubit | Type::Bit => 1,
        Type::Tensor(a, b) => type_width(a, env) + type_width(b, env),
        Type::Vec(a, n) => type_width(a, env) * n.eval(env).unwrap(),
        Type::Lolli(a, b) => type_width(a, env) + type_width(b, env),
        _ => 0,
    }
}

#[test]
fn boundaries_match_types() {
    for (name, c) in common::translatable_corpus() {
        for n in 0..=3u64 {
            let mut values = std::collections::BTreeMap::new();
            for (p, _) in &c.translation.params {
                values.insert(p.clone(), ParamVal::Nat(n));
            }
            let Ok(env) = pipeline::param_env(&c.translation.params, &values) else {
                continue;
            };
            let d = pipeline::instantiate(&c.translation, &env, false).unwrap();
            let ins: u64 = c.translation.inputs.iter().map(|(_, t)| type_width(t, &env)).sum();
            let outs = type_width(&c.translation.output, &env);
            assert_eq!(d.boundary_widths(), (ins, outs), "{name} at {n}");
        }
    }
}

#[test]
fn empty_vector_is_the_empty_map() {
    let m = common::src_channel("VNil[Q]", &[]);
    assert_eq!(m, CpMap::identity(0));
}
