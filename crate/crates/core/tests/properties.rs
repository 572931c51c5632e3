mod common;

use common::*;
use num_complex::Complex64 as C64;
use nvgate::optics::{apply_hwp, apply_pbs_fs, apply_pbs_rl, Couplings, Element, Pauli, Port};
use nvgate::{parse_netlist, GateKind, HybridState, Mode, ReflectionPair, SpinConfig, SpinState};
use proptest::prelude::*;

const MODES: [Mode; 4] = [Mode(0), Mode(1), Mode(2), Mode(3)];

fn amp() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b))
}

/// Arbitrary normalized state over modes 0..4 with two spins.
fn state() -> impl Strategy<Value = HybridState> {
    prop::collection::vec(amp(), 2 * 4 * 4).prop_filter_map("nonzero", |v| {
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        (n > 1e-3).then(|| {
            let v = v.into_iter().map(|z| z / n).collect();
            HybridState::from_amplitudes(&MODES, 2, v).unwrap()
        })
    })
}

/// Elements that map modes {0, 1} to modes {2, 3} or act in place.
fn element() -> impl Strategy<Value = Element> {
    let m = |x: u16| Port::Mode(Mode(x));
    prop_oneof![
        Just(Element::Pbs { inputs: [m(0), m(1)], outputs: [m(2), m(3)] }),
        Just(Element::Pbs { inputs: [m(0), Port::Open], outputs: [m(2), m(3)] }),
        Just(Element::BeamSplitter { inputs: [m(0), m(1)], outputs: [m(2), m(3)] }),
        Just(Element::BeamSplitter { inputs: [m(1), m(0)], outputs: [m(3), m(2)] }),
        Just(Element::PbsFs { input: Mode(0), outputs: [m(2), m(3)] }),
        (0..4u16).prop_map(|x| Element::Hwp { input: Mode(x), output: Mode(x) }),
        (0..4u16, 0..2usize).prop_map(|(x, spin)| Element::NvScatter { input: Mode(x), output: Mode(x), spin }),
        (0..2usize).prop_map(|spin| Element::SpinHadamard { spin }),
        (0..2usize, prop_oneof![Just(Pauli::I), Just(Pauli::Z), Just(Pauli::MinusZ)])
            .prop_map(|(spin, op)| Element::SpinPauli { spin, op }),
    ]
}

fn pair() -> impl Strategy<Value = ReflectionPair> {
    (0.0..=1.0f64, 0.0..6.3f64, 0.0..=1.0f64, 0.0..6.3f64)
        .prop_map(|(a, p, b, q)| ReflectionPair::new(C64::from_polar(a, p), C64::from_polar(b, q)))
}

/// Clears modes 2 and 3 so that elements writing there do not merge light.
fn clear_outputs(s: &HybridState) -> HybridState {
    let mut v = s.amplitudes().to_vec();
    for (i, z) in v.iter_mut().enumerate() {
        let mode = (i / 4) % 4;
        if mode >= 2 {
            *z = C64::new(0.0, 0.0);
        }
    }
    HybridState::from_amplitudes(&MODES, 2, v).unwrap()
}

proptest! {
    #[test]
    fn elements_are_linear(e in element(), a in state(), b in state(), x in amp(), y in amp(), p in pair()) {
        let (a, b) = (clear_outputs(&a), clear_outputs(&b));
        let cp = Couplings::Uniform(p);
        let lhs = e.apply(&a.combine(x, &b, y).unwrap(), &cp).unwrap();
        let rhs = e.apply(&a, &cp).unwrap().combine(x, &e.apply(&b, &cp).unwrap(), y).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn norm_never_grows(e in element(), s in state(), p in pair()) {
        let s = clear_outputs(&s);
        let out = e.apply(&s, &Couplings::Uniform(p)).unwrap();
        prop_assert!(out.norm_sqr() <= s.norm_sqr() + 1e-12);
    }

    #[test]
    fn passive_elements_are_unitary(e in element(), s in state()) {
        let s = clear_outputs(&s);
        let out = e.apply(&s, &Couplings::ideal()).unwrap();
        prop_assert!((out.norm_sqr() - s.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn scatter_commutes_with_disjoint_elements(s in state(), p in pair(), spin in 0..2usize) {
        let s = clear_outputs(&s);
        // NV on mode 1 with spin `spin`, against optics on modes 0 -> 2, 3
        // and a Hadamard on the other spin
        let nv = Element::NvScatter { input: Mode(1), output: Mode(1), spin };
        let others = [
            Element::Pbs { inputs: [Port::Mode(Mode(0)), Port::Open], outputs: [Port::Mode(Mode(2)), Port::Mode(Mode(3))] },
            Element::Hwp { input: Mode(0), output: Mode(0) },
            Element::SpinHadamard { spin: 1 - spin },
        ];
        let cp = Couplings::Uniform(p);
        for o in &others {
            let ab = o.apply(&nv.apply(&s, &cp).unwrap(), &cp).unwrap();
            let ba = nv.apply(&o.apply(&s, &cp).unwrap(), &cp).unwrap();
            prop_assert!(ab.max_abs_diff(&ba).unwrap() < 1e-12);
        }
    }

    #[test]
    fn photon_optics_commute_with_spin_ops(s in state(), spin in 0..2usize) {
        let s = clear_outputs(&s);
        let cp = Couplings::ideal();
        let spin_op = Element::SpinHadamard { spin };
        let m = |x: u16| Port::Mode(Mode(x));
        for o in [
            Element::Pbs { inputs: [m(0), m(1)], outputs: [m(2), m(3)] },
            Element::BeamSplitter { inputs: [m(0), m(1)], outputs: [m(2), m(3)] },
        ] {
            let ab = o.apply(&spin_op.apply(&s, &cp).unwrap(), &cp).unwrap();
            let ba = spin_op.apply(&o.apply(&s, &cp).unwrap(), &cp).unwrap();
            prop_assert!(ab.max_abs_diff(&ba).unwrap() < 1e-12);
        }
    }

    #[test]
    fn pauli_relations(s in state(), spin in 0..2usize) {
        let cp = Couplings::ideal();
        let z = Element::SpinPauli { spin, op: Pauli::Z };
        let mz = Element::SpinPauli { spin, op: Pauli::MinusZ };
        let zz = z.apply(&z.apply(&s, &cp).unwrap(), &cp).unwrap();
        prop_assert!(zz.max_abs_diff(&s).unwrap() < 1e-15);
        let neg = mz.apply(&s, &cp).unwrap();
        let minus_z = z.apply(&s, &cp).unwrap().combine(C64::new(-1.0, 0.0), &s, C64::new(0.0, 0.0)).unwrap();
        prop_assert!(neg.max_abs_diff(&minus_z).unwrap() < 1e-15);
    }

    #[test]
    fn parser_never_panics(text in "\\PC{0,200}") {
        let _ = parse_netlist(&text);
    }

    #[test]
    fn parser_never_panics_on_near_miss_lines(lines in prop::collection::vec(
        prop_oneof![
            Just("spins 2".to_string()),
            Just("modes 0 1 2 3".to_string()),
            Just("pbs 0 _ -> 1 2".to_string()),
            Just("nv 2 -> 3 spin_2".to_string()),
            Just("detect 3".to_string()),
            Just("feedforward 3S: spin_1 -Z".to_string()),
            "[a-z_0-9 >:-]{0,20}",
        ],
        0..8,
    )) {
        let _ = parse_netlist(&lines.join("\n"));
    }
}

#[test]
fn pbs_fs_is_hwp_pbs_hwp() {
    let modes = [Mode(0), Mode(1), Mode(2)];
    for photon in [R, L] {
        for cfg in SpinConfig::all(1) {
            let s = HybridState::with_photon(&modes, photon, Mode(0), &SpinState::basis(cfg)).unwrap();
            let direct = apply_pbs_fs(&s, Mode(0), [Port::Mode(Mode(1)), Port::Mode(Mode(2))]).unwrap();
            let h = apply_hwp(&s, Mode(0)).unwrap();
            let split = apply_pbs_rl(&h, [Port::Mode(Mode(0)), Port::Open], [Port::Mode(Mode(1)), Port::Mode(Mode(2))]).unwrap();
            let composed = apply_hwp(&apply_hwp(&split, Mode(1)).unwrap(), Mode(2)).unwrap();
            assert!(direct.max_abs_diff(&composed).unwrap() < 1e-15);
        }
    }
}

#[test]
fn random_circuits_conserve_probability() {
    let mut rng = rng(2024);
    for _ in 0..300 {
        let net = random_circuit(&mut rng, 2);
        let input = random_input(&mut rng, &net);
        let cp = Couplings::Uniform(random_pair(&mut rng));
        let run = net.run(&input, &cp).unwrap();
        assert!((run.detected_probability() - run.final_state.norm_sqr()).abs() < 1e-12);
        let ideal = net.propagate(&input, &Couplings::ideal()).unwrap();
        // with only open PBS/BS ports losing light, ideal norm is bounded by 1
        assert!(ideal.norm_sqr() <= 1.0 + 1e-12);
    }
}

#[test]
fn random_circuits_round_trip() {
    let mut rng = rng(99);
    for _ in 0..200 {
        let net = random_circuit(&mut rng, 3);
        let text = net.to_string();
        assert_eq!(parse_netlist(&text).unwrap(), net, "{text}");
    }
}

#[test]
fn ideal_gate_circuits_preserve_norm() {
    let mut rng = rng(5);
    for kind in GateKind::ALL {
        let net = nvgate::build_gate_circuit(kind);
        for _ in 0..20 {
            let spins: Vec<[C64; 2]> = (0..kind.n_spins()).map(|_| nvgate::analysis::random_qubit(&mut rng)).collect();
            let input = net.product_input(F, &spins).unwrap();
            let trace = net.trace(&input, &Couplings::ideal()).unwrap();
            for s in &trace {
                assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            }
        }
    }
}
