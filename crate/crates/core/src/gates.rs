//! The CNOT, Toffoli and Fredkin circuits, their interferometer blocks and
//! target permutations.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::cavity::ReflectionPair;
use crate::netlist::{FeedforwardTable, Netlist, Outcome};
use crate::optics::{Couplings, Element, Pauli, Port};
use crate::state::{FsOutcome, HybridState, Mode, Polarization, Spin, SpinConfig, SpinState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    Cnot,
    Toffoli,
    Fredkin,
}

impl GateKind {
    pub const ALL: [GateKind; 3] = [GateKind::Cnot, GateKind::Toffoli, GateKind::Fredkin];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Cnot => "cnot",
            GateKind::Toffoli => "toffoli",
            GateKind::Fredkin => "fredkin",
        }
    }

    pub fn n_spins(self) -> usize {
        match self {
            GateKind::Cnot => 2,
            GateKind::Toffoli | GateKind::Fredkin => 3,
        }
    }

    /// Source text of the circuit file shipped in `circuits/`.
    pub fn shipped_netlist(self) -> &'static str {
        match self {
            GateKind::Cnot => include_str!("../circuits/cnot.nv"),
            GateKind::Toffoli => include_str!("../circuits/toffoli.nv"),
            GateKind::Fredkin => include_str!("../circuits/fredkin.nv"),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cnot" => Ok(GateKind::Cnot),
            "toffoli" => Ok(GateKind::Toffoli),
            "fredkin" => Ok(GateKind::Fredkin),
            _ => Err(format!("unknown gate `{s}` (expected cnot, toffoli or fredkin)")),
        }
    }
}

/// A classical reversible gate on spin configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetGate {
    pub kind: GateKind,
    /// `permutation[i]` is the output configuration index for input `i`.
    pub permutation: Vec<usize>,
    pub unitary: DMatrix<f64>,
}

impl TargetGate {
    pub fn apply(&self, state: &SpinState) -> SpinState {
        let mut amps = vec![C64::new(0.0, 0.0); state.amplitudes().len()];
        for (i, a) in state.amplitudes().iter().enumerate() {
            amps[self.permutation[i]] = *a;
        }
        SpinState::from_amplitudes(state.n_spins(), amps).expect("permutation keeps the length")
    }

    pub fn map_config(&self, cfg: SpinConfig) -> SpinConfig {
        SpinConfig::from_index(self.permutation[cfg.index()], cfg.len())
    }
}

/// CNOT flips the target iff the control is `-`; Toffoli flips the target iff
/// both controls are `-`; Fredkin swaps the targets iff the control is `-`.
pub fn ideal_gate_unitary(kind: GateKind) -> TargetGate {
    let n = kind.n_spins();
    let flip = |s: Spin| match s {
        Spin::Plus => Spin::Minus,
        Spin::Minus => Spin::Plus,
    };
    let permutation: Vec<usize> = SpinConfig::all(n)
        .map(|cfg| {
            let mut s: Vec<Spin> = (0..n).map(|k| cfg.spin(k)).collect();
            match kind {
                GateKind::Cnot if s[0] == Spin::Minus => s[1] = flip(s[1]),
                GateKind::Toffoli if s[0] == Spin::Minus && s[1] == Spin::Minus => s[2] = flip(s[2]),
                GateKind::Fredkin if s[0] == Spin::Minus => s.swap(1, 2),
                _ => {}
            }
            SpinConfig::new(&s).index()
        })
        .collect();
    let dim = 1 << n;
    let unitary = DMatrix::from_fn(dim, dim, |row, col| if permutation[col] == row { 1.0 } else { 0.0 });
    TargetGate {
        kind,
        permutation,
        unitary,
    }
}

/// Order in which the photon meets NV2 and NV3 inside a two-NV block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NvOrder {
    SecondThenThird,
    ThirdThenSecond,
}

/// Operator of a `PBS -> NV -> PBS` interferometer on photon polarization ⊗
/// one spin, in the basis `{R+, R-, L+, L-}`. The `routed` polarization is
/// the one sent past the NV.
pub fn build_mz_block(routed: Polarization, pair: ReflectionPair) -> DMatrix<C64> {
    block_operator(1, routed, &[0], &Couplings::Uniform(pair))
}

/// Two-NV version of [`build_mz_block`] on polarization ⊗ NV2 ⊗ NV3, basis
/// `{R++, R+-, R-+, R--, L++, L+-, L-+, L--}`.
pub fn build_two_nv_mz_block(
    order: NvOrder,
    routed: Polarization,
    r2: ReflectionPair,
    r3: ReflectionPair,
) -> DMatrix<C64> {
    let spins = match order {
        NvOrder::SecondThenThird => [0, 1],
        NvOrder::ThirdThenSecond => [1, 0],
    };
    block_operator(2, routed, &spins, &Couplings::PerSpin(vec![r2, r3]))
}

/// Runs every basis input through `pbs 0 _ -> a b`, the NV reflections on the
/// routed arm, and `pbs a b -> 3 _`, reading the operator off mode 3.
fn block_operator(n_spins: usize, routed: Polarization, spins: &[usize], couplings: &Couplings) -> DMatrix<C64> {
    let (input, out) = (Mode(0), Mode(3));
    let (a, b) = (Mode(1), Mode(2));
    let arm = match routed {
        Polarization::R => a,
        Polarization::L => b,
    };
    let mut elements = vec![Element::Pbs {
        inputs: [Port::Mode(input), Port::Open],
        outputs: [Port::Mode(a), Port::Mode(b)],
    }];
    elements.extend(spins.iter().map(|&spin| Element::NvScatter {
        input: arm,
        output: arm,
        spin,
    }));
    elements.push(Element::Pbs {
        inputs: [Port::Mode(a), Port::Mode(b)],
        outputs: [Port::Mode(out), Port::Open],
    });
    let net = Netlist::new(n_spins, &[input, a, b, out], elements, vec![], None).expect("block wiring is valid");

    let size = 1usize << n_spins;
    let dim = 2 * size;
    let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for pol in Polarization::ALL {
        for cfg in SpinConfig::all(n_spins) {
            let col = pol.index() * size + cfg.index();
            let mut photon = [C64::new(0.0, 0.0); 2];
            photon[pol.index()] = C64::new(1.0, 0.0);
            let psi = HybridState::with_photon(net.modes(), photon, input, &SpinState::basis(cfg)).expect("valid basis input");
            let psi = net.propagate(&psi, couplings).expect("block runs");
            for p in Polarization::ALL {
                for c in SpinConfig::all(n_spins) {
                    m[(p.index() * size + c.index(), col)] = psi.amplitude(p, out, c).expect("declared mode");
                }
            }
        }
    }
    m
}

/// Corrections applied after each detector outcome.
pub fn feedforward_table(kind: GateKind) -> FeedforwardTable {
    let o = |m: u16, r: FsOutcome| Outcome::new(Mode(m), r);
    use FsOutcome::{F, S};
    use Pauli::{MinusZ, Z};
    match kind {
        GateKind::Cnot => FeedforwardTable::new()
            .with_rule(o(9, F), &[])
            .with_rule(o(9, S), &[(0, MinusZ)]),
        GateKind::Toffoli => FeedforwardTable::new()
            .with_rule(o(12, F), &[])
            .with_rule(o(12, S), &[(1, Z)])
            .with_rule(o(13, F), &[(0, MinusZ)])
            .with_rule(o(13, S), &[(0, MinusZ), (1, Z)]),
        GateKind::Fredkin => FeedforwardTable::new()
            .with_rule(o(12, F), &[(1, Z), (2, Z)])
            .with_rule(o(12, S), &[(0, MinusZ)])
            .with_rule(o(13, F), &[(0, MinusZ), (1, Z), (2, Z)])
            .with_rule(o(13, S), &[]),
    }
}

fn pbs(a: u16, b: Option<u16>, c: u16, d: Option<u16>) -> Element {
    let port = |m: Option<u16>| m.map_or(Port::Open, |m| Port::Mode(Mode(m)));
    Element::Pbs {
        inputs: [Port::Mode(Mode(a)), port(b)],
        outputs: [Port::Mode(Mode(c)), port(d)],
    }
}

fn hwp(a: u16, b: u16) -> Element {
    Element::Hwp {
        input: Mode(a),
        output: Mode(b),
    }
}

fn nv(a: u16, b: u16, spin: usize) -> Element {
    Element::NvScatter {
        input: Mode(a),
        output: Mode(b),
        spin,
    }
}

fn spinh(spin: usize) -> Element {
    Element::SpinHadamard { spin }
}

/// `PBS -> NV(s) -> PBS` block from `input` to `output`, with `routed`
/// sent through arm `base+1` (R) or `base+2` (L).
fn mz(input: u16, output: u16, base: u16, routed: Polarization, spins: &[usize]) -> Vec<Element> {
    let (a, b) = (base + 1, base + 2);
    let arm = if routed == Polarization::R { a } else { b };
    let mut v = vec![pbs(input, None, a, Some(b))];
    v.extend(spins.iter().map(|&s| nv(arm, arm, s)));
    v.push(pbs(a, Some(b), output, None));
    v
}

/// The gate's full circuit including detectors and feedforward.
pub fn build_gate_circuit(kind: GateKind) -> Netlist {
    use Polarization::{L, R};
    let mut e = Vec::new();
    let (modes, detectors): (Vec<u16>, Vec<u16>) = match kind {
        GateKind::Cnot => {
            e.extend([pbs(0, None, 1, Some(2)), nv(2, 3, 0), pbs(1, Some(3), 4, None), hwp(4, 5)]);
            e.extend([spinh(1), pbs(5, None, 7, Some(6)), nv(7, 8, 1), pbs(8, Some(6), 9, None), spinh(1)]);
            ((0..=9).collect(), vec![9])
        }
        GateKind::Toffoli | GateKind::Fredkin => {
            let (arm_spins, lower_routed, third_spins, third_h): (&[usize], _, &[usize], &[usize]) = match kind {
                GateKind::Toffoli => (&[1], L, &[2], &[2]),
                _ => (&[1, 2], R, &[2, 1], &[1, 2]),
            };
            e.extend(mz(0, 1, 100, L, &[0]));
            e.extend([hwp(1, 2), pbs(2, None, 3, Some(4))]);
            e.push(hwp(3, 5));
            e.extend(mz(5, 7, 400, R, arm_spins));
            e.push(hwp(7, 9));
            e.push(hwp(4, 6));
            e.extend(mz(6, 8, 500, lower_routed, arm_spins));
            e.push(hwp(8, 10));
            e.extend(third_h.iter().map(|&s| spinh(s)));
            e.extend(mz(9, 11, 800, L, third_spins));
            e.extend(third_h.iter().map(|&s| spinh(s)));
            e.push(Element::BeamSplitter {
                inputs: [Port::Mode(Mode(10)), Port::Mode(Mode(11))],
                outputs: [Port::Mode(Mode(12)), Port::Mode(Mode(13))],
            });
            let mut modes: Vec<u16> = (0..=13).collect();
            modes.extend([101, 102, 401, 402, 501, 502, 801, 802]);
            (modes, vec![12, 13])
        }
    };
    let modes: Vec<Mode> = modes.into_iter().map(Mode).collect();
    Netlist::new(
        kind.n_spins(),
        &modes,
        e,
        detectors.into_iter().map(Mode).collect(),
        Some(feedforward_table(kind)),
    )
    .expect("gate circuits are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;

    fn diag(entries: &[f64]) -> DMatrix<C64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            entries.len(),
            entries.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    #[test]
    fn generator_matches_shipped_files() {
        for kind in GateKind::ALL {
            let parsed = parse_netlist(kind.shipped_netlist()).unwrap();
            assert_eq!(parsed, build_gate_circuit(kind), "{kind}");
        }
    }

    #[test]
    fn ideal_blocks() {
        let i = ReflectionPair::IDEAL;
        assert_eq!(build_mz_block(Polarization::L, i), diag(&[1.0, 1.0, -1.0, 1.0]));
        assert_eq!(build_mz_block(Polarization::R, i), diag(&[1.0, -1.0, 1.0, 1.0]));
        assert_eq!(
            build_two_nv_mz_block(NvOrder::SecondThenThird, Polarization::R, i, i),
            diag(&[1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
        );
        assert_eq!(
            build_two_nv_mz_block(NvOrder::ThirdThenSecond, Polarization::L, i, i),
            diag(&[1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0])
        );
    }

    #[test]
    fn lossy_blocks() {
        let p = ReflectionPair::resonant(0.5);
        assert_eq!(build_mz_block(Polarization::L, p), diag(&[1.0, 1.0, -1.0, 0.5]));
        let p = ReflectionPair::resonant(0.8);
        let m = build_two_nv_mz_block(NvOrder::SecondThenThird, Polarization::R, p, p);
        assert!((m[(0, 0)] - C64::new(0.64, 0.0)).norm() < 1e-15);
        assert!((m[(3, 3)] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn target_permutations() {
        let cfg = |s: &str| {
            let v: Vec<Spin> = s.chars().map(|c| if c == '+' { Spin::Plus } else { Spin::Minus }).collect();
            SpinConfig::new(&v)
        };
        let cnot = ideal_gate_unitary(GateKind::Cnot);
        assert_eq!(cnot.map_config(cfg("-+")), cfg("--"));
        assert_eq!(cnot.map_config(cfg("+-")), cfg("+-"));
        let toffoli = ideal_gate_unitary(GateKind::Toffoli);
        assert_eq!(toffoli.map_config(cfg("+-+")), cfg("+-+"));
        assert_eq!(toffoli.map_config(cfg("--+")), cfg("---"));
        let fredkin = ideal_gate_unitary(GateKind::Fredkin);
        assert_eq!(fredkin.map_config(cfg("-+-")), cfg("--+"));
        assert_eq!(fredkin.map_config(cfg("++-")), cfg("++-"));
        for kind in GateKind::ALL {
            let u = &ideal_gate_unitary(kind).unitary;
            assert_eq!(u.transpose() * u, DMatrix::identity(u.nrows(), u.ncols()));
        }
    }

    #[test]
    fn nv_interactions_per_path() {
        let counts: Vec<usize> = GateKind::ALL
            .iter()
            .map(|&k| build_gate_circuit(k).max_nv_interactions_per_path())
            .collect();
        assert_eq!(counts, vec![2, 3, 5]);
    }
}
