// SPDX-License-Identifier: Apache-2.0

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use szxc::nat::NatEnv;
use szxc::oracle::{cpm_distance_mod_scalar, interpret, CpMap};
use szxc::szx::perm::{build_sigma, build_sigma_parts, build_tau, is_bijection, is_identity};
use szxc::szx::{self, simplify_with_stats, Color, Concrete, Diagram, NodeKind, Phase};

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 200,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn simplify_preserves_semantics(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = common::random_diagram(&mut rng, 5);
        d.validate().unwrap();
        let (s, stats) = simplify_with_stats(&d);
        s.validate().unwrap();
        prop_assert!(stats.rewrites() <= d.nodes.len() + d.edges.len());
        let before = interpret(&d, 8).unwrap();
        let after = interpret(&s, 8).unwrap();
        prop_assert!(cpm_distance_mod_scalar(&before, &after) <= 1e-9, "{:?}", d);
    }

    #[test]
    fn simplify_is_idempotent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = szx::simplify(&common::random_diagram(&mut rng, 5));
        let (_, stats) = simplify_with_stats(&s);
        prop_assert_eq!(stats.rewrites(), 0);
    }

    #[test]
    fn sigma_is_a_bijection(list in prop::collection::vec(0u64..=5, 0..=5), a in 0u64..3, b in 0u64..3) {
        let p = build_sigma(&list, |x| a * x + 1, |x| b + x);
        let total: u64 = list.iter().map(|&x| a * x + 1 + b + x).sum();
        prop_assert_eq!(p.len() as u64, total);
        prop_assert!(is_bijection(&p));
    }

    #[test]
    fn sigma_over_parts_is_a_bijection(parts in prop::collection::vec(prop::collection::vec(0u64..=3, 3), 0..=5)) {
        prop_assert!(is_bijection(&build_sigma_parts(&parts)));
    }

    #[test]
    fn tau_is_a_bijection(n in 0u64..=5, a in 0u64..=5, b in 0u64..=5, c in 0u64..=5) {
        let p = build_tau(n, a, b, c);
        prop_assert_eq!(p.len() as u64, n * (a + b + 2 * c));
        prop_assert!(is_bijection(&p));
    }

}

proptest! {
    // Each case interprets two diagrams of up to eight boundary qubits.
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn list_instantiation_decomposes(head in 0u64..=2, rest in prop::collection::vec(0u64..=1, 0..=1), which in 0usize..4) {
        let (name, body) = common::sample_bodies().swap_remove(which);
        let dist = common::list_decomposition_distance(&body, head, &rest);
        prop_assert!(dist <= 1e-9, "{name}: {dist}");
    }
}

#[test]
fn degenerate_permutations() {
    assert!(build_sigma(&[], |x| x, |x| x).is_empty());
    for (a, b, c) in [(0, 0, 0), (1, 2, 3), (2, 0, 1), (3, 3, 0)] {
        assert!(is_identity(&build_tau(1, a, b, c)));
    }
    assert!(is_identity(&build_sigma(&[4], |x| x, |_| 2)));
}

fn spider(color: Color, phase: Phase, width: u64) -> Diagram<Concrete> {
    let mut d = Diagram::<Concrete>::default();
    let i = d.add_input(width);
    let o = d.add_output(width);
    let s = d.add_node(NodeKind::Spider {
        color,
        phases: vec![phase; width as usize],
        legs: 2,
    });
    d.connect(i, (s, 0), width);
    d.connect((s, 1), o, width);
    d
}

fn hadamard(width: u64) -> Diagram<Concrete> {
    let mut d = Diagram::<Concrete>::default();
    let i = d.add_input(width);
    let o = d.add_output(width);
    let h = d.add_node(NodeKind::Hadamard);
    d.connect(i, (h, 0), width);
    d.connect((h, 1), o, width);
    d
}

#[test]
fn x_spiders_are_hadamard_conjugated_z_spiders() {
    for w in 1..=2 {
        for k in 0..8 {
            let p = Phase::turns(k, 8);
            let x = interpret(&spider(Color::X, p, w), 8).unwrap();
            let hzh = hadamard(w)
                .compose(&spider(Color::Z, p, w))
                .unwrap()
                .compose(&hadamard(w))
                .unwrap();
            let hzh = interpret(&hzh, 8).unwrap();
            assert!(cpm_distance_mod_scalar(&x, &hzh) < 1e-12);
        }
    }
}

#[test]
fn interpretation_is_functorial() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 40 {
        let a = common::random_diagram(&mut rng, 4);
        let b = common::random_diagram(&mut rng, 4);
        let (ma, mb) = (interpret(&a, 8).unwrap(), interpret(&b, 8).unwrap());
        let t = interpret(&a.tensor(&b), 8).unwrap();
        assert!(cpm_distance_mod_scalar(&t, &ma.tensor(&mb)) < 1e-9);
        // Compose `a` with a chain of the same boundary widths.
        let widths = a.output_mults();
        if widths.iter().sum::<u64>() + a.input_mults().iter().sum::<u64>() <= 4 {
            let mut h = Diagram::<Concrete>::identity(&widths);
            for (j, &w) in widths.iter().enumerate() {
                if w > 0 {
                    let mut one = Diagram::<Concrete>::identity(&widths[..j]);
                    one = one.tensor(&spider(Color::Z, Phase::turns(1, 8), w).compose(&hadamard(w)).unwrap());
                    one = one.tensor(&Diagram::identity(&widths[j + 1..]));
                    h = h.compose(&one).unwrap();
                }
            }
            let mh = interpret(&h, 8).unwrap();
            let c = interpret(&a.compose(&h).unwrap(), 8).unwrap();
            assert!(cpm_distance_mod_scalar(&c, &ma.then(&mh)) < 1e-9);
            checked += 1;
        }
    }
}

#[test]
fn empty_list_instantiates_to_the_empty_map() {
    for (name, body) in common::sample_bodies() {
        let d = szx::instantiate_box(&common::boxed(&body, &[]), &NatEnv::new()).unwrap();
        let m = interpret(&szx::simplify(&d), 8).unwrap();
        assert_eq!(m, CpMap::identity(0), "{name}");
        let m = interpret(&d, 8).unwrap();
        assert_eq!(m, CpMap::identity(0), "{name} before simplification");
    }
}

#[test]
fn split_then_gather_is_a_wire() {
    let mut d = Diagram::<Concrete>::default();
    let i = d.add_input(5);
    let o = d.add_output(5);
    let s = d.add_node(NodeKind::Gather { parts: vec![2, 3], split: true });
    let g = d.add_node(NodeKind::Gather { parts: vec![2, 3], split: false });
    d.connect(i, (s, 0), 5);
    d.connect((s, 1), (g, 1), 2);
    d.connect((s, 2), (g, 2), 3);
    d.connect((g, 0), o, 5);
    let s = szx::simplify(&d);
    assert_eq!(s.node_count(), 0);
    assert_eq!(s.edges.len(), 1);
}

#[test]
fn accumulating_map_is_a_chain_of_cnots() {
    for k in 1..=3 {
        let a = interpret(&common::accumulating_cnot(k), 8).unwrap();
        let b = interpret(&common::cnot_chain(k), 8).unwrap();
        assert!(cpm_distance_mod_scalar(&a, &b) <= 1e-9, "k = {k}");
    }
}
