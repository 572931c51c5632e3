//! Hybrid photon-spin state vectors.
//!
//! A single photon carries a polarization (`R` or `L`) and sits in one of a
//! small set of labelled spatial modes; `N` NV-center electron spins each hold
//! one qubit in `{|+>, |->}`. The joint amplitude vector is dense and
//! subnormalized: whatever norm is missing is the probability that the photon
//! has leaked out of the apparatus.
//!
//! Layout: `index = ((pol * M) + mode_index) * 2^N + spin_index`, where the
//! spin index treats spin 0 as the most significant bit and a set bit means
//! `|->`. Mode indices follow the sorted order of the declared mode labels.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Tolerance used when checking that amplitude pairs are normalized.
pub const NORM_TOL: f64 = 1e-12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("amplitude pair #{index} has squared norm {norm_sqr}, expected 1")]
    NotNormalized { index: usize, norm_sqr: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("states are defined over different mode sets")]
    ModeSetMismatch,
    #[error("mode {0} is not declared")]
    UnknownMode(Mode),
    #[error("spin index {index} out of range for {n_spins} spins")]
    SpinOutOfRange { index: usize, n_spins: usize },
    #[error("expected {expected} amplitudes, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("a state needs at least one declared mode")]
    NoModes,
}

/// Electron-spin label: `Plus` is `|m_s=+1>`, `Minus` is `|m_s=-1>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Plus,
    Minus,
}

impl Spin {
    pub fn symbol(self) -> char {
        match self {
            Spin::Plus => '+',
            Spin::Minus => '-',
        }
    }
}

/// Circular polarization of the photon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    R,
    L,
}

impl Polarization {
    pub const ALL: [Polarization; 2] = [Polarization::R, Polarization::L];

    pub(crate) fn index(self) -> usize {
        match self {
            Polarization::R => 0,
            Polarization::L => 1,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::R => write!(f, "R"),
            Polarization::L => write!(f, "L"),
        }
    }
}

/// Spatial-mode label. Labels follow the wire numbers of the circuit drawings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode(pub u16);

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Result of measuring the photon in the `{|F>, |S>}` basis, where
/// `|F> = (|R> + |L>)/sqrt2` and `|S> = (|R> - |L>)/sqrt2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FsOutcome {
    F,
    S,
}

impl FsOutcome {
    pub const ALL: [FsOutcome; 2] = [FsOutcome::F, FsOutcome::S];
}

impl fmt::Display for FsOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FsOutcome::F => write!(f, "F"),
            FsOutcome::S => write!(f, "S"),
        }
    }
}

/// A computational-basis configuration of `n` spins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    index: usize,
    n: usize,
}

impl SpinConfig {
    pub fn new(spins: &[Spin]) -> Self {
        let index = spins
            .iter()
            .fold(0, |acc, s| (acc << 1) | usize::from(*s == Spin::Minus));
        SpinConfig {
            index,
            n: spins.len(),
        }
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        assert!(index < (1 << n), "spin configuration index out of range");
        SpinConfig { index, n }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spin(&self, k: usize) -> Spin {
        assert!(k < self.n);
        if (self.index >> (self.n - 1 - k)) & 1 == 1 {
            Spin::Minus
        } else {
            Spin::Plus
        }
    }

    pub fn all(n: usize) -> impl Iterator<Item = SpinConfig> {
        (0..1usize << n).map(move |index| SpinConfig { index, n })
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for k in 0..self.n {
            write!(f, "{}", self.spin(k).symbol())?;
        }
        write!(f, ">")
    }
}

fn check_pair(index: usize, pair: &[C64; 2]) -> Result<(), StateError> {
    let norm_sqr = pair[0].norm_sqr() + pair[1].norm_sqr();
    if (norm_sqr - 1.0).abs() > NORM_TOL {
        return Err(StateError::NotNormalized { index, norm_sqr });
    }
    Ok(())
}

fn kron_pairs(pairs: &[[C64; 2]]) -> Vec<C64> {
    pairs.iter().fold(vec![C64::new(1.0, 0.0)], |acc, p| {
        acc.iter().flat_map(|a| [a * p[0], a * p[1]]).collect()
    })
}

/// Applies a 2x2 operator to spin `k` of a `2^n`-long block in place.
pub(crate) fn apply_single_in_place(block: &mut [C64], n: usize, k: usize, op: &[[C64; 2]; 2]) {
    let stride = 1usize << (n - 1 - k);
    for i in 0..block.len() {
        if i & stride == 0 {
            let (a, b) = (block[i], block[i | stride]);
            block[i] = op[0][0] * a + op[0][1] * b;
            block[i | stride] = op[1][0] * a + op[1][1] * b;
        }
    }
}

/// Pure (possibly subnormalized) state of the spins alone.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinState {
    n: usize,
    amps: Vec<C64>,
}

impl SpinState {
    /// Tensor product of single-spin states given as `(alpha, beta)` pairs on
    /// `(|+>, |->)`.
    pub fn product(spins: &[[C64; 2]]) -> Result<Self, StateError> {
        for (i, p) in spins.iter().enumerate() {
            check_pair(i, p)?;
        }
        Ok(SpinState {
            n: spins.len(),
            amps: kron_pairs(spins),
        })
    }

    pub fn basis(cfg: SpinConfig) -> Self {
        let mut amps = vec![ZERO; 1 << cfg.len()];
        amps[cfg.index()] = C64::new(1.0, 0.0);
        SpinState { n: cfg.len(), amps }
    }

    pub fn from_amplitudes(n: usize, amps: Vec<C64>) -> Result<Self, StateError> {
        if amps.len() != 1 << n {
            return Err(StateError::WrongLength {
                expected: 1 << n,
                got: amps.len(),
            });
        }
        Ok(SpinState { n, amps })
    }

    pub fn zero(n: usize) -> Self {
        SpinState {
            n,
            amps: vec![ZERO; 1 << n],
        }
    }

    pub fn n_spins(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, cfg: SpinConfig) -> C64 {
        self.amps[cfg.index()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(&self) -> Option<SpinState> {
        let n = self.norm_sqr();
        if n == 0.0 {
            return None;
        }
        Some(self.scaled(C64::new(1.0 / n.sqrt(), 0.0)))
    }

    pub fn scaled(&self, c: C64) -> SpinState {
        SpinState {
            n: self.n,
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &SpinState) -> Result<C64, StateError> {
        if self.amps.len() != other.amps.len() {
            return Err(StateError::DimensionMismatch {
                left: self.amps.len(),
                right: other.amps.len(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn apply_single(&self, k: usize, op: &[[C64; 2]; 2]) -> Result<SpinState, StateError> {
        if k >= self.n {
            return Err(StateError::SpinOutOfRange {
                index: k,
                n_spins: self.n,
            });
        }
        let mut out = self.clone();
        apply_single_in_place(&mut out.amps, self.n, k, op);
        Ok(out)
    }

    /// Applies a permutation of basis states: basis state `i` maps to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> SpinState {
        let mut amps = vec![ZERO; self.amps.len()];
        for (i, &j) in perm.iter().enumerate() {
            amps[j] = self.amps[i];
        }
        SpinState { n: self.n, amps }
    }

    /// Largest componentwise deviation between `self` and `other` after
    /// removing the best-fit global phase. Both states should be normalized.
    pub fn distance_up_to_phase(&self, other: &SpinState) -> Result<f64, StateError> {
        let ov = other.overlap(self)?;
        let phase = if ov.norm() > 0.0 {
            ov / ov.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - phase * b).norm())
            .fold(0.0, f64::max))
    }

    /// Largest componentwise deviation without any phase freedom.
    pub fn max_abs_diff(&self, other: &SpinState) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Schmidt coefficients for the bipartition (first `split` spins | rest).
    pub fn schmidt_coefficients(&self, split: usize) -> Vec<f64> {
        assert!(split <= self.n);
        let rows = 1 << split;
        let cols = 1 << (self.n - split);
        let m = DMatrix::from_fn(rows, cols, |i, j| self.amps[i * cols + j]);
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }
}

/// Photon + spins amplitude vector over `2 x M x 2^N` basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridState {
    n_spins: usize,
    modes: Vec<Mode>,
    amps: Vec<C64>,
}

/// Outcome of projecting the photon onto `|F>` or `|S>` in one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Collapse {
    pub probability: f64,
    /// Renormalized spin state, or `None` when the outcome has probability 0.
    pub spins: Option<SpinState>,
}

impl HybridState {
    /// The all-zero vector (photon absent) over the given modes.
    pub fn vacuum(modes: &[Mode], n_spins: usize) -> Result<Self, StateError> {
        let mut modes = modes.to_vec();
        modes.sort();
        modes.dedup();
        if modes.is_empty() {
            return Err(StateError::NoModes);
        }
        let dim = 2 * modes.len() * (1 << n_spins);
        Ok(HybridState {
            n_spins,
            modes,
            amps: vec![ZERO; dim],
        })
    }

    /// `(a|R> + b|L>)_mode ⊗ spins`.
    pub fn with_photon(
        modes: &[Mode],
        photon: [C64; 2],
        photon_mode: Mode,
        spins: &SpinState,
    ) -> Result<Self, StateError> {
        check_pair(0, &photon)?;
        let mut state = HybridState::vacuum(modes, spins.n_spins())?;
        let mi = state.mode_index(photon_mode)?;
        for pol in Polarization::ALL {
            let amp = photon[pol.index()];
            for (dst, s) in state.block_mut(pol, mi).iter_mut().zip(spins.amplitudes()) {
                *dst = amp * s;
            }
        }
        Ok(state)
    }

    /// Tensor product of a photon polarization state in `photon_mode` and a
    /// list of single-spin states. Every pair must be normalized.
    pub fn product(
        modes: &[Mode],
        photon: [C64; 2],
        photon_mode: Mode,
        spins: &[[C64; 2]],
    ) -> Result<Self, StateError> {
        check_pair(0, &photon)?;
        for (i, p) in spins.iter().enumerate() {
            check_pair(i + 1, p)?;
        }
        let spin_state = SpinState::product(spins)?;
        HybridState::with_photon(modes, photon, photon_mode, &spin_state)
    }

    pub fn from_amplitudes(
        modes: &[Mode],
        n_spins: usize,
        amps: Vec<C64>,
    ) -> Result<Self, StateError> {
        let mut state = HybridState::vacuum(modes, n_spins)?;
        if amps.len() != state.amps.len() {
            return Err(StateError::WrongLength {
                expected: state.amps.len(),
                got: amps.len(),
            });
        }
        state.amps = amps;
        Ok(state)
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn has_mode(&self, mode: Mode) -> bool {
        self.modes.binary_search(&mode).is_ok()
    }

    pub fn mode_index(&self, mode: Mode) -> Result<usize, StateError> {
        self.modes
            .binary_search(&mode)
            .map_err(|_| StateError::UnknownMode(mode))
    }

    pub(crate) fn check_spin(&self, k: usize) -> Result<(), StateError> {
        if k >= self.n_spins {
            return Err(StateError::SpinOutOfRange {
                index: k,
                n_spins: self.n_spins,
            });
        }
        Ok(())
    }

    fn block_range(&self, pol: Polarization, mi: usize) -> std::ops::Range<usize> {
        let size = 1 << self.n_spins;
        let start = (pol.index() * self.modes.len() + mi) * size;
        start..start + size
    }

    pub(crate) fn block(&self, pol: Polarization, mi: usize) -> &[C64] {
        &self.amps[self.block_range(pol, mi)]
    }

    pub(crate) fn block_mut(&mut self, pol: Polarization, mi: usize) -> &mut [C64] {
        let r = self.block_range(pol, mi);
        &mut self.amps[r]
    }

    pub fn amplitude(&self, pol: Polarization, mode: Mode, cfg: SpinConfig) -> Result<C64, StateError> {
        let mi = self.mode_index(mode)?;
        Ok(self.block(pol, mi)[cfg.index()])
    }

    /// The (unnormalized) spin vector attached to photon `pol` in `mode`.
    pub fn spin_component(&self, pol: Polarization, mode: Mode) -> Result<SpinState, StateError> {
        let mi = self.mode_index(mode)?;
        Ok(SpinState {
            n: self.n_spins,
            amps: self.block(pol, mi).to_vec(),
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability that the photon occupies `mode`.
    pub fn mode_norm_sqr(&self, mode: Mode) -> Result<f64, StateError> {
        let mi = self.mode_index(mode)?;
        Ok(Polarization::ALL
            .iter()
            .flat_map(|&p| self.block(p, mi))
            .map(|a| a.norm_sqr())
            .sum())
    }

    /// Modes that currently carry nonzero amplitude.
    pub fn occupied_modes(&self) -> Vec<Mode> {
        (0..self.modes.len())
            .filter(|&mi| {
                Polarization::ALL
                    .iter()
                    .any(|&p| self.block(p, mi).iter().any(|a| *a != ZERO))
            })
            .map(|mi| self.modes[mi])
            .collect()
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn overlap(&self, other: &HybridState) -> Result<C64, StateError> {
        overlap(self, other)
    }

    /// Applies a single-spin operator to spin `k`, whatever the photon is doing.
    pub fn apply_spin_op(&self, k: usize, op: &[[C64; 2]; 2]) -> Result<HybridState, StateError> {
        self.check_spin(k)?;
        let mut out = self.clone();
        let size = 1 << self.n_spins;
        for block in out.amps.chunks_mut(size) {
            apply_single_in_place(block, self.n_spins, k, op);
        }
        Ok(out)
    }

    /// Unnormalized spin state left after projecting the photon in `mode`
    /// onto `outcome`.
    pub fn project_photon(&self, outcome: FsOutcome, mode: Mode) -> Result<SpinState, StateError> {
        let mi = self.mode_index(mode)?;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = self.block(Polarization::R, mi);
        let l = self.block(Polarization::L, mi);
        let amps = r
            .iter()
            .zip(l)
            .map(|(a, b)| match outcome {
                FsOutcome::F => (a + b) * s,
                FsOutcome::S => (a - b) * s,
            })
            .collect();
        Ok(SpinState {
            n: self.n_spins,
            amps,
        })
    }

    /// Detects the photon in `mode` in the F/S basis and returns the outcome
    /// probability together with the renormalized spin state.
    pub fn collapse_photon(&self, outcome: FsOutcome, mode: Mode) -> Result<Collapse, StateError> {
        let projected = self.project_photon(outcome, mode)?;
        let probability = projected.norm_sqr();
        Ok(Collapse {
            probability,
            spins: projected.normalized(),
        })
    }

    /// Largest componentwise difference with another state over the same modes.
    pub fn max_abs_diff(&self, other: &HybridState) -> Result<f64, StateError> {
        check_compatible(self, other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Linear combination `a * self + b * other`.
    pub fn combine(&self, a: C64, other: &HybridState, b: C64) -> Result<HybridState, StateError> {
        check_compatible(self, other)?;
        let mut out = self.clone();
        for (x, y) in out.amps.iter_mut().zip(&other.amps) {
            *x = a * *x + b * y;
        }
        Ok(out)
    }
}

fn check_compatible(a: &HybridState, b: &HybridState) -> Result<(), StateError> {
    if a.amps.len() != b.amps.len() {
        return Err(StateError::DimensionMismatch {
            left: a.amps.len(),
            right: b.amps.len(),
        });
    }
    if a.modes != b.modes || a.n_spins != b.n_spins {
        return Err(StateError::ModeSetMismatch);
    }
    Ok(())
}

/// `<a|b>`, conjugate-linear in the first argument.
pub fn overlap(a: &HybridState, b: &HybridState) -> Result<C64, StateError> {
    check_compatible(a, b)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// Projects the photon in `mode` onto `|F>` or `|S>`; returns the outcome
/// probability and the renormalized spin state (flagged empty at probability 0).
pub fn partial_trace_photon_collapse(
    state: &HybridState,
    outcome: FsOutcome,
    mode: Mode,
) -> Result<Collapse, StateError> {
    state.collapse_photon(outcome, mode)
}
