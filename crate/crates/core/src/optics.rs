//! Passive linear optics and single-spin operations.
//!
//! Every optical element moves amplitude from a set of input ports to a set of
//! output ports. A port is either a declared spatial mode or [`Port::Open`]:
//! an open input injects vacuum and an open output discards whatever reaches
//! it (the photon leaves the apparatus). Elements never merge light into a
//! mode that is already occupied by something other than their own inputs.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::cavity::{scatter, ReflectionPair};
use crate::state::{HybridState, Mode, Polarization, StateError};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error("output mode {0} is already occupied by light that this element does not consume")]
    WiringConflict(Mode),
    #[error("mode {0} is wired twice on the same side of one element")]
    DuplicatePort(Mode),
    #[error("no reflection coefficients supplied for spin {0}")]
    MissingReflection(usize),
}

/// One side of an element's wiring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Port {
    Mode(Mode),
    Open,
}

impl Port {
    pub fn mode(self) -> Option<Mode> {
        match self {
            Port::Mode(m) => Some(m),
            Port::Open => None,
        }
    }
}

impl From<Mode> for Port {
    fn from(m: Mode) -> Self {
        Port::Mode(m)
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Port::Mode(m) => write!(f, "{m}"),
            Port::Open => write!(f, "_"),
        }
    }
}

/// Outcome-conditioned single-spin correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    Z,
    /// `-σ_z = -|+><+| + |-><-|`
    MinusZ,
}

impl Pauli {
    pub fn matrix(self) -> [[C64; 2]; 2] {
        match self {
            Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
            Pauli::MinusZ => [[-ONE, ZERO], [ZERO, ONE]],
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pauli::I => "I",
            Pauli::Z => "Z",
            Pauli::MinusZ => "-Z",
        })
    }
}

impl FromStr for Pauli {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" => Ok(Pauli::I),
            "Z" => Ok(Pauli::Z),
            "-Z" => Ok(Pauli::MinusZ),
            other => Err(format!("unknown spin operation `{other}` (expected I, Z or -Z)")),
        }
    }
}

/// Electron-spin Hadamard: `|+> -> (|+> + |->)/sqrt2`, `|-> -> (|+> - |->)/sqrt2`.
pub fn hadamard_matrix() -> [[C64; 2]; 2] {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    [[s, s], [s, -s]]
}

/// Reflection coefficients seen by the photon at each NV center.
#[derive(Clone, Debug, PartialEq)]
pub enum Couplings {
    Uniform(ReflectionPair),
    PerSpin(Vec<ReflectionPair>),
}

impl Couplings {
    pub fn ideal() -> Self {
        Couplings::Uniform(ReflectionPair::IDEAL)
    }

    pub fn pair(&self, spin: usize) -> Result<ReflectionPair, ElementError> {
        match self {
            Couplings::Uniform(p) => Ok(*p),
            Couplings::PerSpin(v) => v.get(spin).copied().ok_or(ElementError::MissingReflection(spin)),
        }
    }
}

impl From<ReflectionPair> for Couplings {
    fn from(p: ReflectionPair) -> Self {
        Couplings::Uniform(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementKind {
    PbsRl,
    PbsFs,
    Hwp,
    Bs5050,
    NvScatter,
    SpinH,
    SpinPauli,
}

/// One optical or spin component of a circuit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Element {
    /// Transmits `R` (`in[k] -> out[k]`), reflects `L` (`in[k] -> out[1-k]`).
    Pbs { inputs: [Port; 2], outputs: [Port; 2] },
    /// Transmits `|F>` to `outputs[0]`, reflects `|S>` to `outputs[1]`.
    PbsFs { input: Mode, outputs: [Port; 2] },
    /// Half-wave plate at 22.5°: `R -> F`, `L -> S`.
    Hwp { input: Mode, output: Mode },
    /// 50:50 beam splitter: `in[0] -> (out[0] - out[1])/sqrt2`,
    /// `in[1] -> (out[0] + out[1])/sqrt2`, for either polarization.
    BeamSplitter { inputs: [Port; 2], outputs: [Port; 2] },
    /// Reflection off the cavity holding NV center `spin`.
    NvScatter { input: Mode, output: Mode, spin: usize },
    SpinHadamard { spin: usize },
    SpinPauli { spin: usize, op: Pauli },
}

impl Element {
    pub fn kind(&self) -> ElementKind {
        match self {
            Element::Pbs { .. } => ElementKind::PbsRl,
            Element::PbsFs { .. } => ElementKind::PbsFs,
            Element::Hwp { .. } => ElementKind::Hwp,
            Element::BeamSplitter { .. } => ElementKind::Bs5050,
            Element::NvScatter { .. } => ElementKind::NvScatter,
            Element::SpinHadamard { .. } => ElementKind::SpinH,
            Element::SpinPauli { .. } => ElementKind::SpinPauli,
        }
    }

    pub fn input_modes(&self) -> Vec<Mode> {
        match self {
            Element::Pbs { inputs, .. } | Element::BeamSplitter { inputs, .. } => {
                inputs.iter().filter_map(|p| p.mode()).collect()
            }
            Element::PbsFs { input, .. }
            | Element::Hwp { input, .. }
            | Element::NvScatter { input, .. } => vec![*input],
            Element::SpinHadamard { .. } | Element::SpinPauli { .. } => vec![],
        }
    }

    pub fn output_modes(&self) -> Vec<Mode> {
        match self {
            Element::Pbs { outputs, .. }
            | Element::BeamSplitter { outputs, .. }
            | Element::PbsFs { outputs, .. } => outputs.iter().filter_map(|p| p.mode()).collect(),
            Element::Hwp { output, .. } | Element::NvScatter { output, .. } => vec![*output],
            Element::SpinHadamard { .. } | Element::SpinPauli { .. } => vec![],
        }
    }

    /// Spin the element acts on or couples to, if any.
    pub fn spin(&self) -> Option<usize> {
        match self {
            Element::NvScatter { spin, .. }
            | Element::SpinHadamard { spin }
            | Element::SpinPauli { spin, .. } => Some(*spin),
            _ => None,
        }
    }

    pub fn apply(&self, state: &HybridState, couplings: &Couplings) -> Result<HybridState, ElementError> {
        match self {
            Element::Pbs { inputs, outputs } => apply_pbs_rl(state, *inputs, *outputs),
            Element::PbsFs { input, outputs } => apply_pbs_fs(state, *input, *outputs),
            Element::Hwp { input, output } => apply_hwp_to(state, *input, *output),
            Element::BeamSplitter { inputs, outputs } => apply_bs(state, *inputs, *outputs),
            Element::NvScatter { input, output, spin } => {
                let pair = couplings.pair(*spin)?;
                let scattered = scatter(state, *spin, *input, &pair)?;
                relabel(&scattered, *input, *output)
            }
            Element::SpinHadamard { spin } => apply_spin_hadamard(state, *spin),
            Element::SpinPauli { spin, op } => apply_spin_pauli(state, *spin, *op),
        }
    }
}

/// Moves amplitude from `inputs` to `outputs`; `coeff(in_pol, in_port,
/// out_pol, out_port)` is the transfer amplitude.
fn transfer<F>(
    state: &HybridState,
    inputs: &[Port],
    outputs: &[Port],
    coeff: F,
) -> Result<HybridState, ElementError>
where
    F: Fn(Polarization, usize, Polarization, usize) -> C64,
{
    let in_idx = port_indices(state, inputs)?;
    let out_idx = port_indices(state, outputs)?;
    let size = 1usize << state.n_spins();

    let mut out = state.clone();
    let mut taken: Vec<[Vec<C64>; 2]> = Vec::with_capacity(inputs.len());
    for mi in &in_idx {
        let mut blocks = [vec![ZERO; size], vec![ZERO; size]];
        if let Some(mi) = *mi {
            for pol in Polarization::ALL {
                let b = out.block_mut(pol, mi);
                blocks[pol.index()].copy_from_slice(b);
                b.fill(ZERO);
            }
        }
        taken.push(blocks);
    }

    for (j, mj) in out_idx.iter().enumerate() {
        let Some(mj) = *mj else { continue };
        if !in_idx.contains(&Some(mj)) {
            let occupied = Polarization::ALL
                .iter()
                .any(|&p| out.block(p, mj).iter().any(|a| *a != ZERO));
            if occupied {
                return Err(ElementError::WiringConflict(state.modes()[mj]));
            }
        }
        for out_pol in Polarization::ALL {
            let dst = out.block_mut(out_pol, mj);
            for (i, blocks) in taken.iter().enumerate() {
                for in_pol in Polarization::ALL {
                    let c = coeff(in_pol, i, out_pol, j);
                    if c == ZERO {
                        continue;
                    }
                    for (d, s) in dst.iter_mut().zip(&blocks[in_pol.index()]) {
                        *d += c * s;
                    }
                }
            }
        }
    }
    Ok(out)
}

fn port_indices(state: &HybridState, ports: &[Port]) -> Result<Vec<Option<usize>>, ElementError> {
    let mut seen: Vec<Mode> = Vec::new();
    ports
        .iter()
        .map(|p| match p {
            Port::Open => Ok(None),
            Port::Mode(m) => {
                if seen.contains(m) {
                    return Err(ElementError::DuplicatePort(*m));
                }
                seen.push(*m);
                Ok(Some(state.mode_index(*m)?))
            }
        })
        .collect()
}

/// Moves everything in `from` to `to` unchanged.
pub fn relabel(state: &HybridState, from: Mode, to: Mode) -> Result<HybridState, ElementError> {
    transfer(state, &[Port::Mode(from)], &[Port::Mode(to)], |a, _, b, _| {
        if a == b {
            ONE
        } else {
            ZERO
        }
    })
}

/// Polarizing beam splitter in the `{R, L}` basis.
pub fn apply_pbs_rl(
    state: &HybridState,
    inputs: [Port; 2],
    outputs: [Port; 2],
) -> Result<HybridState, ElementError> {
    transfer(state, &inputs, &outputs, |in_pol, i, out_pol, j| {
        let routed = match in_pol {
            Polarization::R => j == i,
            Polarization::L => j == 1 - i,
        };
        if in_pol == out_pol && routed {
            ONE
        } else {
            ZERO
        }
    })
}

/// Half-wave plate acting in place on `mode`.
pub fn apply_hwp(state: &HybridState, mode: Mode) -> Result<HybridState, ElementError> {
    apply_hwp_to(state, mode, mode)
}

/// Half-wave plate taking light from `input` and emitting it into `output`.
pub fn apply_hwp_to(state: &HybridState, input: Mode, output: Mode) -> Result<HybridState, ElementError> {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    transfer(state, &[Port::Mode(input)], &[Port::Mode(output)], |a, _, b, _| {
        if a == Polarization::L && b == Polarization::L {
            -s
        } else {
            s
        }
    })
}

/// Polarization-independent 50:50 beam splitter.
pub fn apply_bs(
    state: &HybridState,
    inputs: [Port; 2],
    outputs: [Port; 2],
) -> Result<HybridState, ElementError> {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    transfer(state, &inputs, &outputs, |a, i, b, j| {
        if a != b {
            ZERO
        } else if i == 0 && j == 1 {
            -s
        } else {
            s
        }
    })
}

/// Polarizing beam splitter in the `{F, S}` basis: the `|F>` component leaves
/// through `outputs[0]`, the `|S>` component through `outputs[1]`.
pub fn apply_pbs_fs(state: &HybridState, input: Mode, outputs: [Port; 2]) -> Result<HybridState, ElementError> {
    // |F><F| and |S><S| in the {R, L} basis.
    transfer(state, &[Port::Mode(input)], &outputs, |a, _, b, j| {
        let v = if j == 0 || a == b { 0.5 } else { -0.5 };
        C64::new(v, 0.0)
    })
}

pub fn apply_spin_hadamard(state: &HybridState, spin: usize) -> Result<HybridState, ElementError> {
    Ok(state.apply_spin_op(spin, &hadamard_matrix())?)
}

pub fn apply_spin_pauli(state: &HybridState, spin: usize, op: Pauli) -> Result<HybridState, ElementError> {
    Ok(state.apply_spin_op(spin, &op.matrix())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{SpinConfig, SpinState};

    const H: f64 = FRAC_1_SQRT_2;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn m(ms: &[u16]) -> Vec<Mode> {
        ms.iter().map(|&x| Mode(x)).collect()
    }

    fn photon(pol: [C64; 2], mode: u16, modes: &[u16]) -> HybridState {
        HybridState::product(&m(modes), pol, Mode(mode), &[[c(0.6), C64::new(0.0, 0.8)]]).unwrap()
    }

    fn amp(st: &HybridState, pol: Polarization, mode: u16) -> C64 {
        st.amplitude(pol, Mode(mode), SpinConfig::from_index(0, 1)).unwrap() / c(0.6)
    }

    #[test]
    fn pbs_routes_r_straight_and_l_across() {
        let modes = [0, 1, 2];
        let pbs = |st: &HybridState| {
            apply_pbs_rl(st, [Port::Mode(Mode(0)), Port::Open], [Port::Mode(Mode(1)), Port::Mode(Mode(2))]).unwrap()
        };
        let r = pbs(&photon([c(1.0), c(0.0)], 0, &modes));
        assert_eq!(amp(&r, Polarization::R, 1), c(1.0));
        assert_eq!(r.mode_norm_sqr(Mode(2)).unwrap(), 0.0);
        let l = pbs(&photon([c(0.0), c(1.0)], 0, &modes));
        assert_eq!(amp(&l, Polarization::L, 2), c(1.0));
        let both = pbs(&photon([c(H), c(H)], 0, &modes));
        assert!((both.mode_norm_sqr(Mode(1)).unwrap() - 0.5).abs() < 1e-15);
        assert!((both.mode_norm_sqr(Mode(2)).unwrap() - 0.5).abs() < 1e-15);
        assert!((both.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pbs_refuses_to_merge_into_occupied_mode() {
        let st = HybridState::product(&m(&[0, 1]), [c(H), c(H)], Mode(0), &[[c(1.0), c(0.0)]]).unwrap();
        let split = apply_pbs_rl(&st, [Port::Mode(Mode(0)), Port::Open], [Port::Mode(Mode(0)), Port::Mode(Mode(1))])
            .unwrap();
        // mode 1 now holds L; a second element writing into it without reading it is a wiring error
        let err = apply_hwp_to(&split, Mode(0), Mode(1)).unwrap_err();
        assert_eq!(err, ElementError::WiringConflict(Mode(1)));
        let err = apply_pbs_rl(&st, [Port::Mode(Mode(0)), Port::Mode(Mode(0))], [Port::Open, Port::Open]).unwrap_err();
        assert_eq!(err, ElementError::DuplicatePort(Mode(0)));
    }

    #[test]
    fn hwp_maps_r_to_f_and_is_an_involution() {
        let st = photon([c(1.0), c(0.0)], 4, &[4]);
        let f = apply_hwp(&st, Mode(4)).unwrap();
        assert!((amp(&f, Polarization::R, 4) - c(H)).norm() < 1e-15);
        assert!((amp(&f, Polarization::L, 4) - c(H)).norm() < 1e-15);
        let st = photon([C64::new(0.3, 0.1), C64::new(-0.2, 0.927_361_849_549_570_4)], 4, &[4]);
        let back = apply_hwp(&apply_hwp(&st, Mode(4)).unwrap(), Mode(4)).unwrap();
        assert!(back.max_abs_diff(&st).unwrap() < 1e-15);
    }

    #[test]
    fn hwp_relabels_mode() {
        let st = photon([c(0.0), c(1.0)], 4, &[4, 5]);
        let out = apply_hwp_to(&st, Mode(4), Mode(5)).unwrap();
        assert_eq!(out.mode_norm_sqr(Mode(4)).unwrap(), 0.0);
        assert!((amp(&out, Polarization::R, 5) - c(H)).norm() < 1e-15);
        assert!((amp(&out, Polarization::L, 5) + c(H)).norm() < 1e-15);
    }

    #[test]
    fn beam_splitter_sign_convention() {
        let modes = [10, 11, 12, 13];
        let bs = |st: &HybridState| {
            apply_bs(
                st,
                [Port::Mode(Mode(10)), Port::Mode(Mode(11))],
                [Port::Mode(Mode(12)), Port::Mode(Mode(13))],
            )
            .unwrap()
        };
        let from11 = bs(&photon([c(1.0), c(0.0)], 11, &modes));
        assert!((amp(&from11, Polarization::R, 12) - c(H)).norm() < 1e-15);
        assert!((amp(&from11, Polarization::R, 13) - c(H)).norm() < 1e-15);
        let from10 = bs(&photon([c(0.0), c(1.0)], 10, &modes));
        assert!((amp(&from10, Polarization::L, 12) - c(H)).norm() < 1e-15);
        assert!((amp(&from10, Polarization::L, 13) + c(H)).norm() < 1e-15);

        // (|R>_10 + |R>_11)/sqrt2 exits entirely through mode 12
        let a = photon([c(1.0), c(0.0)], 10, &modes);
        let b = photon([c(1.0), c(0.0)], 11, &modes);
        let both = a.combine(c(H), &b, c(H)).unwrap();
        let out = bs(&both);
        assert!((out.mode_norm_sqr(Mode(12)).unwrap() - 1.0).abs() < 1e-15);
        assert!(out.mode_norm_sqr(Mode(13)).unwrap() < 1e-30);
    }

    #[test]
    fn pbs_fs_routes_eigenstates() {
        let modes = [9, 20, 21];
        let fs = |st: &HybridState| {
            apply_pbs_fs(st, Mode(9), [Port::Mode(Mode(20)), Port::Mode(Mode(21))]).unwrap()
        };
        let f = fs(&photon([c(H), c(H)], 9, &modes));
        assert!((f.mode_norm_sqr(Mode(20)).unwrap() - 1.0).abs() < 1e-15);
        assert!(f.mode_norm_sqr(Mode(21)).unwrap() < 1e-30);
        let r = fs(&photon([c(1.0), c(0.0)], 9, &modes));
        assert!((r.mode_norm_sqr(Mode(20)).unwrap() - 0.5).abs() < 1e-15);
        assert!((r.mode_norm_sqr(Mode(21)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spin_hadamard_and_pauli() {
        let plus = SpinState::product(&[[c(1.0), c(0.0)]]).unwrap();
        let st = HybridState::with_photon(&m(&[0]), [c(1.0), c(0.0)], Mode(0), &plus).unwrap();
        let h = apply_spin_hadamard(&st, 0).unwrap();
        let comp = h.spin_component(Polarization::R, Mode(0)).unwrap();
        assert!((comp.amplitudes()[0] - c(H)).norm() < 1e-15);
        assert!((comp.amplitudes()[1] - c(H)).norm() < 1e-15);
        let hh = apply_spin_hadamard(&h, 0).unwrap();
        assert!(hh.max_abs_diff(&st).unwrap() < 1e-15);

        let mz = apply_spin_pauli(&st, 0, Pauli::MinusZ).unwrap();
        assert_eq!(mz.spin_component(Polarization::R, Mode(0)).unwrap().amplitudes()[0], c(-1.0));
        assert!(apply_spin_pauli(&st, 1, Pauli::Z).is_err());
    }

    #[test]
    fn pauli_parsing() {
        assert_eq!("-Z".parse::<Pauli>().unwrap(), Pauli::MinusZ);
        assert_eq!(Pauli::MinusZ.to_string(), "-Z");
        assert!("X".parse::<Pauli>().is_err());
    }

    #[test]
    fn open_output_discards_light() {
        let st = photon([c(H), c(H)], 0, &[0, 1]);
        let out = apply_pbs_rl(&st, [Port::Mode(Mode(0)), Port::Open], [Port::Mode(Mode(1)), Port::Open]).unwrap();
        assert!((out.norm_sqr() - 0.5).abs() < 1e-15);
    }
}
