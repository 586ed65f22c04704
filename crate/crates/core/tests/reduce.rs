// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use szxc::parser::{parse_program, parse_term, parse_type, pretty_print};
use szxc::reduce::{expand_macro, normalize, step, DEFAULT_FUEL};
use szxc::syntax::{build::*, Macro, ParamContext, StateContext, Term, Type};
use szxc::typecheck::{macro_type, typecheck, types_equal, Facts};

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name);
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn macro_expansions_typecheck() {
    let q = Type::Qubit;
    let vq = parse_type("Vec Q n").unwrap();
    let cases = [
        Macro::Map(q.clone(), Type::Bit),
        Macro::Fold(q.clone(), Type::tensor(q.clone(), q.clone())),
        Macro::Compose(q.clone()),
        Macro::Compose(vq.clone()),
        Macro::Map(vq, Type::Unit),
    ];
    for m in cases {
        let e = expand_macro(&m);
        let phi = ParamContext::new(vec![("n".into(), Type::Nat)]);
        let (ty, _) = typecheck(&phi, &StateContext::default(), &e)
            .unwrap_or_else(|err| panic!("{}: {err}", m.name()));
        assert!(
            types_equal(&ty, &macro_type(&m), &Facts::new()).is_ok(),
            "{}: {ty} vs {}",
            m.name(),
            macro_type(&m)
        );
    }
}

#[test]
fn map_applies_pointwise() {
    let t = parse_term(
        "(\\f:Q -o B. \\g:Q -o B. \\x:Q. \\y:Q. map[Q, B] @2 (x :: y :: VNil[Q]) (f :: g :: VNil[Q -o B])) ",
    )
    .unwrap();
    let body = apps(t, vec![var("f"), var("g"), var("x"), var("y")]);
    let n = normalize(&body, DEFAULT_FUEL).unwrap();
    assert_eq!(pretty_print(&n), "f x :: g y :: VNil[B]");
}

fn subject_reduction(term: &Term, gamma: &StateContext, ty: &Type) -> usize {
    let mut cur = szxc::reduce::expand_macros(term);
    let mut steps = 0;
    while let Some(next) = step(&cur) {
        let (t2, _) = typecheck(&ParamContext::default(), gamma, &next)
            .unwrap_or_else(|e| panic!("after {steps} steps: {e}\n{}", pretty_print(&next)));
        assert!(types_equal(&t2, ty, &Facts::new()).is_ok(), "{t2} vs {ty}");
        cur = next;
        steps += 1;
    }
    steps
}

#[test]
fn qft_subject_reduction() {
    let prog = parse_program(&corpus("qft.ld")).unwrap();
    let qft = prog.inlined("qft").unwrap();
    for n in 1..=3u64 {
        let names: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
        let list = names
            .iter()
            .rev()
            .fold(nil(Type::Qubit), |acc, x| cons(var(x), acc));
        let t = app(papp(qft.clone(), num(n)), list);
        let gamma = StateContext::new(names.iter().map(|x| (x.clone(), Type::Qubit)).collect());
        let ty = Type::vec(Type::Qubit, szxc::nat::NatExpr::Const(n));
        let steps = subject_reduction(&t, &gamma, &ty);
        assert!(steps > 10);
    }
}

#[test]
fn qft_at_one_is_a_hadamard() {
    let prog = parse_program(&corpus("qft.ld")).unwrap();
    let qft = prog.inlined("qft").unwrap();
    let t = app(papp(qft, num(1)), cons(var("q"), nil(Type::Qubit)));
    let n = normalize(&t, DEFAULT_FUEL).unwrap();
    assert_eq!(pretty_print(&n), "H q :: VNil[Q]");
}
