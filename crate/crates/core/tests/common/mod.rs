//! Hand-written expected states for the gate circuits.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use nvgate::analysis::random_qubit;
use nvgate::optics::{Couplings, Element, Port};
use nvgate::{build_gate_circuit, GateKind, HybridState, Mode, Netlist, SpinState};
use rand::rngs::StdRng;
use rand::SeedableRng;

pub const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub const R: [C64; 2] = [C64 { re: 1.0, im: 0.0 }, C64 { re: 0.0, im: 0.0 }];
pub const L: [C64; 2] = [C64 { re: 0.0, im: 0.0 }, C64 { re: 1.0, im: 0.0 }];
pub const F: [C64; 2] = [C64 { re: H, im: 0.0 }, C64 { re: H, im: 0.0 }];
pub const S: [C64; 2] = [C64 { re: H, im: 0.0 }, C64 { re: -H, im: 0.0 }];
pub const PLUS: [C64; 2] = R;
pub const MINUS: [C64; 2] = L;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_spins(seed: u64, n: usize) -> Vec<[C64; 2]> {
    let mut rng = rng(seed);
    (0..n).map(|_| random_qubit(&mut rng)).collect()
}

/// Unnormalized product of single-spin vectors; spin 0 is the leftmost factor.
pub fn kron(factors: &[[C64; 2]]) -> SpinState {
    let mut v = vec![c(1.0)];
    for f in factors {
        v = v.iter().flat_map(|a| [a * f[0], a * f[1]]).collect();
    }
    SpinState::from_amplitudes(factors.len(), v).unwrap()
}

pub struct Expect {
    pub state: HybridState,
}

impl Expect {
    pub fn new(net: &Netlist) -> Self {
        Expect {
            state: HybridState::vacuum(net.modes(), net.n_spins()).unwrap(),
        }
    }

    /// Adds `coef * photon_mode ⊗ spins`.
    pub fn add(mut self, coef: C64, photon: [C64; 2], mode: u16, spins: &[[C64; 2]]) -> Self {
        let term = HybridState::with_photon(self.state.modes(), photon, Mode(mode), &kron(spins)).unwrap();
        self.state = self.state.combine(c(1.0), &term, coef).unwrap();
        self
    }
}

pub fn flip(p: [C64; 2]) -> [C64; 2] {
    [p[1], p[0]]
}

pub fn neg_minus(p: [C64; 2]) -> [C64; 2] {
    [p[0], -p[1]]
}

/// Single-spin basis vector scaled by the matching amplitude of `p`.
pub fn pick(p: [C64; 2], bit: usize) -> [C64; 2] {
    if bit == 0 {
        [p[0], c(0.0)]
    } else {
        [c(0.0), p[1]]
    }
}

/// State after the first element equal to `target`.
pub fn state_after(net: &Netlist, trace: &[HybridState], target: &Element) -> HybridState {
    let i = net.elements().iter().position(|e| e == target).expect("element present");
    trace[i].clone()
}

/// State after the last element equal to `target`.
pub fn state_after_last(net: &Netlist, trace: &[HybridState], target: &Element) -> HybridState {
    let i = net.elements().iter().rposition(|e| e == target).expect("element present");
    trace[i].clone()
}

pub fn pbs(a: u16, b: Option<u16>, c: u16, d: Option<u16>) -> Element {
    let port = |m: Option<u16>| m.map_or(Port::Open, |m| Port::Mode(Mode(m)));
    Element::Pbs {
        inputs: [Port::Mode(Mode(a)), port(b)],
        outputs: [Port::Mode(Mode(c)), port(d)],
    }
}

pub fn hwp(a: u16, b: u16) -> Element {
    Element::Hwp {
        input: Mode(a),
        output: Mode(b),
    }
}

pub type Check = (&'static str, HybridState, HybridState);

/// (label, expected, simulated) for every traced CNOT state.
pub fn cnot_traces(spins: &[[C64; 2]]) -> Vec<Check> {
    let net = build_gate_circuit(GateKind::Cnot);
    let [ctl, tgt] = [spins[0], spins[1]];
    let input = net.product_input(F, spins).unwrap();
    let trace = net.trace(&input, &Couplings::ideal()).unwrap();
    let (a, b) = (ctl[0], ctl[1]);

    let psi3 = Expect::new(&net)
        .add(c(H), R, 4, &[ctl, tgt])
        .add(c(H), L, 4, &[[-a, b], tgt]);
    let psi4 = Expect::new(&net).add(a, L, 5, &[PLUS, tgt]).add(b, R, 5, &[MINUS, tgt]);
    let psi5 = Expect::new(&net).add(a, L, 9, &[PLUS, tgt]).add(b, R, 9, &[MINUS, flip(tgt)]);
    vec![
        ("cnot: after the NV1 interferometer (mode 4)", psi3.state, state_after(&net, &trace, &pbs(1, Some(3), 4, None))),
        ("cnot: after the photon Hadamard (mode 5)", psi4.state, state_after(&net, &trace, &hwp(4, 5))),
        ("cnot: after the NV2 interferometer (mode 9)", psi5.state, trace.last().unwrap().clone()),
    ]
}

pub fn toffoli_traces(spins: &[[C64; 2]]) -> Vec<Check> {
    let net = build_gate_circuit(GateKind::Toffoli);
    let [c1, c2, t] = [spins[0], spins[1], spins[2]];
    let input = net.product_input(F, spins).unwrap();
    let trace = net.trace(&input, &Couplings::ideal()).unwrap();
    let (a1, b1) = (c1[0], c1[1]);
    let (a2, b2) = (c2[0], c2[1]);

    let xi1 = Expect::new(&net)
        .add(c(H), R, 1, &[c1, c2, t])
        .add(c(H), L, 1, &[[-a1, b1], c2, t]);
    let xi2 = Expect::new(&net).add(a1, L, 2, &[PLUS, c2, t]).add(b1, R, 2, &[MINUS, c2, t]);
    let xi3 = Expect::new(&net).add(a1, L, 4, &[PLUS, c2, t]).add(b1, R, 3, &[MINUS, c2, t]);
    let xi4 = Expect::new(&net)
        .add(a1 * a2, R, 10, &[PLUS, PLUS, t])
        .add(a1 * b2, L, 10, &[PLUS, MINUS, t])
        .add(b1 * a2, R, 9, &[MINUS, PLUS, t])
        .add(-b1 * b2, L, 9, &[MINUS, MINUS, t]);
    let xi5 = Expect::new(&net)
        .add(a1 * a2, R, 10, &[PLUS, PLUS, t])
        .add(a1 * b2, L, 10, &[PLUS, MINUS, t])
        .add(b1 * a2, R, 11, &[MINUS, PLUS, t])
        .add(b1 * b2, L, 11, &[MINUS, MINUS, flip(t)]);
    // four brackets of terms A, B, C, D with the listed signs per outcome
    let mut xi6 = Expect::new(&net);
    for (photon, mode, signs) in [
        (F, 12, [1.0, 1.0, 1.0, 1.0]),
        (S, 12, [1.0, -1.0, 1.0, -1.0]),
        (F, 13, [-1.0, -1.0, 1.0, 1.0]),
        (S, 13, [-1.0, 1.0, 1.0, -1.0]),
    ] {
        xi6 = xi6
            .add(c(0.5 * signs[0]) * a1 * a2, photon, mode, &[PLUS, PLUS, t])
            .add(c(0.5 * signs[1]) * a1 * b2, photon, mode, &[PLUS, MINUS, t])
            .add(c(0.5 * signs[2]) * b1 * a2, photon, mode, &[MINUS, PLUS, t])
            .add(c(0.5 * signs[3]) * b1 * b2, photon, mode, &[MINUS, MINUS, flip(t)]);
    }
    vec![
        ("toffoli: after the NV1 interferometer (mode 1)", xi1.state, state_after(&net, &trace, &pbs(101, Some(102), 1, None))),
        ("toffoli: after the first photon Hadamard (mode 2)", xi2.state, state_after(&net, &trace, &hwp(1, 2))),
        ("toffoli: after the polarization split (modes 3, 4)", xi3.state, state_after(&net, &trace, &pbs(2, None, 3, Some(4)))),
        ("toffoli: after both NV2 arms (modes 9, 10)", xi4.state, state_after(&net, &trace, &hwp(8, 10))),
        ("toffoli: after the NV3 interferometer (modes 10, 11)", xi5.state, trace[trace.len() - 2].clone()),
        ("toffoli: after the beam splitter (modes 12, 13)", xi6.state, trace.last().unwrap().clone()),
    ]
}

pub fn fredkin_traces(spins: &[[C64; 2]]) -> Vec<Check> {
    let net = build_gate_circuit(GateKind::Fredkin);
    let [ctl, t1, t2] = [spins[0], spins[1], spins[2]];
    let input = net.product_input(F, spins).unwrap();
    let trace = net.trace(&input, &Couplings::ideal()).unwrap();

    let pi1 = Expect::new(&net)
        .add(ctl[0], L, 4, &[PLUS, t1, t2])
        .add(ctl[1], R, 3, &[MINUS, t1, t2]);
    // (sign, bits of c t1 t2, polarization, mode) as listed term by term
    let term_list = |lower: u16| {
        vec![
            (1.0, [0, 0, 0], L, 10u16),
            (-1.0, [0, 0, 1], R, 10),
            (-1.0, [0, 1, 0], R, 10),
            (1.0, [0, 1, 1], L, 10),
            (1.0, [1, 0, 0], R, lower),
            (-1.0, [1, 0, 1], L, lower),
            (-1.0, [1, 1, 0], L, lower),
            (1.0, [1, 1, 1], R, lower),
        ]
    };
    let build = |terms: Vec<(f64, [usize; 3], [C64; 2], u16)>, relabel: &dyn Fn([usize; 3]) -> [usize; 3]| {
        let mut e = Expect::new(&net);
        for (sign, bits, pol, mode) in terms {
            let amp = c(sign) * ctl[bits[0]] * t1[bits[1]] * t2[bits[2]];
            let ket = relabel(bits);
            let unit = |b: usize| if b == 0 { PLUS } else { MINUS };
            e = e.add(amp, pol, mode, &[unit(ket[0]), unit(ket[1]), unit(ket[2])]);
        }
        e.state
    };
    let pi2 = build(term_list(9), &|b| b);
    // on the control-minus branch the target kets trade places while the
    // amplitudes keep their labels
    let pi3 = build(term_list(11), &|b| if b[0] == 1 { [b[0], b[2], b[1]] } else { b });

    let mut pi4 = Expect::new(&net);
    let swapped_minus = |x: [C64; 2], y: [C64; 2]| [neg_minus(y), neg_minus(x)];
    for (photon, mode, s_plus, s_minus, negated) in [
        (F, 12, 1.0, 1.0, true),
        (S, 12, -1.0, 1.0, false),
        (F, 13, -1.0, 1.0, true),
        (S, 13, 1.0, 1.0, false),
    ] {
        let (a, b) = if negated { (neg_minus(t1), neg_minus(t2)) } else { (t1, t2) };
        let [sa, sb] = if negated { swapped_minus(t1, t2) } else { [t2, t1] };
        pi4 = pi4
            .add(c(0.5 * s_plus) * ctl[0], photon, mode, &[PLUS, a, b])
            .add(c(0.5 * s_minus) * ctl[1], photon, mode, &[MINUS, sa, sb]);
    }
    vec![
        ("fredkin: after the polarization split (modes 3, 4)", pi1.state, state_after(&net, &trace, &pbs(2, None, 3, Some(4)))),
        ("fredkin: after both NV2/NV3 arms (modes 9, 10)", pi2, state_after(&net, &trace, &hwp(8, 10))),
        ("fredkin: after the NV3/NV2 interferometer (modes 10, 11)", pi3, trace[trace.len() - 2].clone()),
        ("fredkin: after the beam splitter (modes 12, 13)", pi4.state, trace.last().unwrap().clone()),
    ]
}

/// Random feed-forward optical circuit on `n_spins` spins, with a detector
/// on every mode still carrying light at the end.
pub fn random_circuit<G: rand::Rng>(rng: &mut G, n_spins: usize) -> Netlist {
    use nvgate::optics::Pauli;
    let mut live = vec![Mode(0)];
    let mut next = 1u16;
    let mut fresh = || {
        next += 1;
        Mode(next - 1)
    };
    let mut elements = Vec::new();
    let steps = rng.random_range(1..14);
    for _ in 0..steps {
        let pick_live = |rng: &mut G, live: &[Mode]| live[rng.random_range(0..live.len())];
        match rng.random_range(0..7) {
            0 => {
                let m = pick_live(rng, &live);
                let out = if rng.random_bool(0.5) { m } else { fresh() };
                live.retain(|&x| x != m);
                live.push(out);
                elements.push(Element::Hwp { input: m, output: out });
            }
            1 | 2 => {
                let m = pick_live(rng, &live);
                let out = if rng.random_bool(0.5) { m } else { fresh() };
                live.retain(|&x| x != m);
                live.push(out);
                elements.push(Element::NvScatter { input: m, output: out, spin: rng.random_range(0..n_spins) });
            }
            3 | 4 => {
                let a = pick_live(rng, &live);
                let others: Vec<Mode> = live.iter().copied().filter(|&x| x != a).collect();
                let b = if !others.is_empty() && rng.random_bool(0.5) {
                    Port::Mode(others[rng.random_range(0..others.len())])
                } else {
                    Port::Open
                };
                live.retain(|&x| x != a && Port::Mode(x) != b);
                let o1 = fresh();
                let o2 = if rng.random_bool(0.8) { Port::Mode(fresh()) } else { Port::Open };
                live.push(o1);
                if let Port::Mode(m) = o2 {
                    live.push(m);
                }
                let inputs = [Port::Mode(a), b];
                let outputs = [Port::Mode(o1), o2];
                elements.push(if rng.random_bool(0.5) {
                    Element::Pbs { inputs, outputs }
                } else {
                    Element::BeamSplitter { inputs, outputs }
                });
            }
            5 => elements.push(Element::SpinHadamard { spin: rng.random_range(0..n_spins) }),
            _ => {
                let op = [Pauli::I, Pauli::Z, Pauli::MinusZ][rng.random_range(0..3)];
                elements.push(Element::SpinPauli { spin: rng.random_range(0..n_spins), op });
            }
        }
    }
    let modes: Vec<Mode> = (0..next).map(Mode).collect();
    live.sort();
    Netlist::new(n_spins, &modes, elements, live, None).expect("generator keeps the wiring valid")
}

/// Random normalized photon + spin product state for `net`.
pub fn random_input<G: rand::Rng>(rng: &mut G, net: &Netlist) -> HybridState {
    let photon = random_qubit(rng);
    let spins: Vec<[C64; 2]> = (0..net.n_spins()).map(|_| random_qubit(rng)).collect();
    // the photon always starts in mode 0, even if no element reads it
    HybridState::product(net.modes(), photon, Mode(0), &spins).unwrap()
}

/// Random reflection pair inside the unit disk.
pub fn random_pair<G: rand::Rng>(rng: &mut G) -> nvgate::ReflectionPair {
    let mut z = || C64::from_polar(rng.random_range(0.0..=1.0), rng.random_range(0.0..std::f64::consts::TAU));
    nvgate::ReflectionPair::new(z(), z())
}
