//! Closed-form and simulated fidelity and efficiency, coupling sweeps and
//! their CSV form.
//!
//! The closed forms are polynomials in the hot-cavity reflection `r`
//! (taken as a magnitude in `[0, 1]`). The simulated figures run the actual
//! circuits and average over an input convention.

use std::fmt;
use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use num_rational::Rational64;
use num_traits::{FromPrimitive, Num};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::cavity::{coupling_ratio_for_reflection, resonant_reflection, ReflectionPair};
use crate::gates::{
    build_gate_circuit, build_mz_block, build_two_nv_mz_block, ideal_gate_unitary, GateKind, NvOrder, TargetGate,
};
use crate::netlist::{Netlist, RunError};
use crate::optics::Couplings;
use crate::state::{overlap, Polarization, SpinConfig, SpinState, StateError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("reflection magnitude {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("coupling ratio {0} must be finite and non-negative")]
    BadRatio(f64),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    State(#[from] StateError),
}

fn k<T: FromPrimitive>(n: i64) -> T {
    T::from_i64(n).expect("small integer constant")
}

fn horner<T: Num + Copy + FromPrimitive>(coeffs: &[i64], r: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * r + k(c))
}

fn fidelity_poly<T: Num + Copy + FromPrimitive>(gate: GateKind, r: T) -> T {
    match gate {
        GateKind::Cnot => {
            let num = horner(&[2, 1, 1], r);
            num * num / (k::<T>(2) * horner(&[5, -2, 2, 2, 1], r))
        }
        GateKind::Toffoli => {
            let a = r + k(3);
            let b = r * r + k(3);
            a * a * a * a / (k::<T>(16) * b * b)
        }
        GateKind::Fredkin => {
            let zeta = horner(&[29, 19, 8, 4, 3, 1], r);
            let tail = (r + k(3)) * horner(&[8, 3, 1], r);
            let r7 = r * r * r * r * r * r * r;
            let xi = k::<T>(8) * (horner(&[237, -10, 165, -8, 66, -12, 26], r) + r7 * tail);
            zeta * zeta / xi
        }
    }
}

fn efficiency_poly<T: Num + Copy + FromPrimitive>(gate: GateKind, r: T) -> T {
    let r2 = r * r;
    let a = r2 + k(3);
    match gate {
        GateKind::Cnot => a * a / k(16),
        GateKind::Toffoli => a * a * (r2 + k(7)) / k(128),
        GateKind::Fredkin => {
            let b = (r2 + k(1)) * (r2 + k(1));
            a * (b + k(4)) * (b + k(12)) / k(512)
        }
    }
}

fn check_magnitude(r: f64) -> Result<f64, AnalysisError> {
    if (0.0..=1.0).contains(&r) {
        Ok(r)
    } else {
        Err(AnalysisError::OutOfRange(r))
    }
}

/// Closed-form gate fidelity for reflection magnitude `r`.
pub fn fidelity_closed_form(gate: GateKind, r: f64) -> Result<f64, AnalysisError> {
    Ok(fidelity_poly(gate, check_magnitude(r)?))
}

/// Closed-form photon yield for reflection magnitude `r`.
pub fn efficiency_closed_form(gate: GateKind, r: f64) -> Result<f64, AnalysisError> {
    Ok(efficiency_poly(gate, check_magnitude(r)?))
}

/// [`fidelity_closed_form`] in exact rational arithmetic.
pub fn fidelity_closed_form_exact(gate: GateKind, r: Rational64) -> Rational64 {
    fidelity_poly(gate, r)
}

/// [`efficiency_closed_form`] in exact rational arithmetic.
pub fn efficiency_closed_form_exact(gate: GateKind, r: Rational64) -> Rational64 {
    efficiency_poly(gate, r)
}

/// Which inputs the simulated figures average over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputConvention {
    /// Every spin in `(|+> + |->)/sqrt2`.
    Balanced,
    /// Seeded random pure product states of the spins.
    UniformRandom { samples: usize, seed: u64 },
    /// Uniform average over all spin basis states.
    MaximallyMixed,
}

impl fmt::Display for InputConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputConvention::Balanced => write!(f, "balanced"),
            InputConvention::UniformRandom { samples, seed } => write!(f, "random({samples}, seed {seed})"),
            InputConvention::MaximallyMixed => write!(f, "mixed"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Divide by the probability that the photon survives.
    Postselected,
    /// Leave the loss inside the overlap.
    Unnormalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FidelityScope {
    /// Overlap of each outcome's corrected spin state with the target output,
    /// summed over outcomes.
    PerOutcome,
    /// Overlap of the whole photon + spin state before detection with the
    /// ideal circuit's state at the same point.
    Joint,
}

/// Haar-random single-qubit state.
pub fn random_qubit<R: Rng + ?Sized>(rng: &mut R) -> [C64; 2] {
    loop {
        let v: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return [C64::new(v[0] / n, v[1] / n), C64::new(v[2] / n, v[3] / n)];
        }
    }
}

/// Random product state of `n` spins.
pub fn random_product<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<[C64; 2]> {
    (0..n).map(|_| random_qubit(rng)).collect()
}

/// Inputs for a convention. The photon always enters as `(|R> + |L>)/sqrt2`:
/// the circuits only implement their gates for that polarization.
fn inputs(gate: GateKind, convention: InputConvention) -> Vec<SpinState> {
    let n = gate.n_spins();
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    match convention {
        InputConvention::Balanced => vec![SpinState::product(&vec![[h, h]; n]).expect("normalized")],
        InputConvention::UniformRandom { samples, seed } => {
            let mut rng = StdRng::seed_from_u64(seed);
            (0..samples)
                .map(|_| SpinState::product(&random_product(&mut rng, n)).expect("normalized"))
                .collect()
        }
        InputConvention::MaximallyMixed => SpinConfig::all(n).map(SpinState::basis).collect(),
    }
}

/// Every simulated figure for one gate, reflection pair and convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulatedMetrics {
    pub per_outcome_postselected: Option<f64>,
    pub per_outcome_unnormalized: f64,
    pub joint_postselected: Option<f64>,
    pub joint_unnormalized: f64,
    pub efficiency: f64,
}

impl SimulatedMetrics {
    pub fn fidelity(&self, normalization: Normalization, scope: FidelityScope) -> Option<f64> {
        match (scope, normalization) {
            (FidelityScope::PerOutcome, Normalization::Postselected) => self.per_outcome_postselected,
            (FidelityScope::PerOutcome, Normalization::Unnormalized) => Some(self.per_outcome_unnormalized),
            (FidelityScope::Joint, Normalization::Postselected) => self.joint_postselected,
            (FidelityScope::Joint, Normalization::Unnormalized) => Some(self.joint_unnormalized),
        }
    }
}

/// Circuit and target gate for simulating one gate repeatedly.
pub struct GateSimulator {
    gate: GateKind,
    net: Netlist,
    target: TargetGate,
}

impl GateSimulator {
    pub fn new(gate: GateKind) -> Self {
        GateSimulator {
            gate,
            net: build_gate_circuit(gate),
            target: ideal_gate_unitary(gate),
        }
    }

    pub fn netlist(&self) -> &Netlist {
        &self.net
    }

    pub fn metrics(&self, pair: ReflectionPair, convention: InputConvention) -> Result<SimulatedMetrics, AnalysisError> {
        let couplings = Couplings::Uniform(pair);
        let ideal = Couplings::ideal();
        let ins = inputs(self.gate, convention);
        let n = ins.len() as f64;
        let mut post = (0.0, 0usize);
        let mut joint_post = (0.0, 0usize);
        let mut unnorm = 0.0;
        let mut joint_unnorm = 0.0;
        let mut eff = 0.0;
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        for spins in &ins {
            let psi = self.net.input_with_spins([h, h], spins)?;
            let run = self.net.run(&psi, &couplings)?;
            let target = self.target.apply(spins);

            let mut hit = 0.0;
            for o in &run.outcomes {
                hit += target.overlap(&o.projected)?.norm_sqr();
            }
            let detected = run.detected_probability();
            unnorm += hit;
            if detected > 0.0 {
                post.0 += hit / detected;
                post.1 += 1;
            }

            let reference = self.net.propagate(&psi, &ideal)?;
            let joint = overlap(&reference, &run.final_state)?.norm_sqr();
            let survived = run.final_state.norm_sqr();
            joint_unnorm += joint;
            if survived > 0.0 {
                joint_post.0 += joint / survived;
                joint_post.1 += 1;
            }
            eff += survived;
        }
        let mean = |(s, c): (f64, usize)| (c > 0).then(|| s / c as f64);
        Ok(SimulatedMetrics {
            per_outcome_postselected: mean(post),
            per_outcome_unnormalized: unnorm / n,
            joint_postselected: mean(joint_post),
            joint_unnormalized: joint_unnorm / n,
            efficiency: eff / n,
        })
    }
}

/// Simulated fidelity: each detector outcome's corrected spin state is
/// compared with the target gate's output. `None` if the photon is always lost.
pub fn fidelity_simulated(
    gate: GateKind,
    pair: ReflectionPair,
    convention: InputConvention,
    normalization: Normalization,
) -> Result<Option<f64>, AnalysisError> {
    fidelity_simulated_with(gate, pair, convention, normalization, FidelityScope::PerOutcome)
}

pub fn fidelity_simulated_with(
    gate: GateKind,
    pair: ReflectionPair,
    convention: InputConvention,
    normalization: Normalization,
    scope: FidelityScope,
) -> Result<Option<f64>, AnalysisError> {
    let m = GateSimulator::new(gate).metrics(pair, convention)?;
    Ok(m.fidelity(normalization, scope))
}

/// Probability that the photon leaves the circuit towards the detectors.
pub fn efficiency_simulated(
    gate: GateKind,
    pair: ReflectionPair,
    convention: InputConvention,
) -> Result<f64, AnalysisError> {
    Ok(GateSimulator::new(gate).metrics(pair, convention)?.efficiency)
}

fn mean_transmission(block: &DMatrix<C64>) -> f64 {
    block.iter().map(|a| a.norm_sqr()).sum::<f64>() / block.nrows() as f64
}

/// Photon yield estimated stage by stage: each interferometer stage passes
/// the photon with the block's mean transmission `Tr(B†B)/dim`, weighted by
/// how often the photon occupies the arm holding that block. The stages are
/// treated as independent, which ignores how earlier blocks reshape the
/// spin populations seen by later ones.
pub fn efficiency_stage_product(gate: GateKind, r: f64) -> Result<f64, AnalysisError> {
    let pair = ReflectionPair::resonant(check_magnitude(r)?);
    let t = |p| mean_transmission(&build_mz_block(p, pair));
    let t2 = |o, p| mean_transmission(&build_two_nv_mz_block(o, p, pair, pair));
    use Polarization::{L, R};
    let stages = match gate {
        GateKind::Cnot => vec![t(L), t(R)],
        // the photon splits evenly over the two NV2 arms, then half of it
        // passes the NV3 block
        GateKind::Toffoli => vec![t(L), 0.5 * t(R) + 0.5 * t(L), 0.5 + 0.5 * t(L)],
        GateKind::Fredkin => vec![
            t(L),
            t2(NvOrder::SecondThenThird, R),
            0.5 + 0.5 * t2(NvOrder::ThirdThenSecond, L),
        ],
    };
    Ok(stages.into_iter().product())
}

/// One row of a coupling sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRecord {
    pub coupling_ratio: f64,
    /// Hot-cavity reflection, with sign.
    pub r: f64,
    pub r_magnitude: f64,
    pub gate: GateKind,
    pub fidelity_closed: f64,
    /// Per-outcome postselected fidelity; `NaN` when the photon is always lost.
    pub fidelity_sim: f64,
    pub efficiency_closed: f64,
    pub efficiency_sim: f64,
}

fn record(
    sim: &GateSimulator,
    ratio: f64,
    r: f64,
    convention: InputConvention,
) -> Result<SweepRecord, AnalysisError> {
    let mag = r.abs().min(1.0);
    let m = sim.metrics(ReflectionPair::resonant(r), convention)?;
    Ok(SweepRecord {
        coupling_ratio: ratio,
        r,
        r_magnitude: mag,
        gate: sim.gate,
        fidelity_closed: fidelity_closed_form(sim.gate, mag)?,
        fidelity_sim: m.per_outcome_postselected.unwrap_or(f64::NAN),
        efficiency_closed: efficiency_closed_form(sim.gate, mag)?,
        efficiency_sim: m.efficiency,
    })
}

fn run_sweep(
    gates: &[GateKind],
    points: Vec<(f64, f64)>,
    convention: InputConvention,
) -> Result<Vec<SweepRecord>, AnalysisError> {
    let sims: Vec<GateSimulator> = gates.iter().map(|&g| GateSimulator::new(g)).collect();
    let jobs: Vec<(f64, f64, &GateSimulator)> = points
        .iter()
        .flat_map(|&(ratio, r)| sims.iter().map(move |s| (ratio, r, s)))
        .collect();
    let mut records = jobs
        .into_par_iter()
        .map(|(ratio, r, sim)| record(sim, ratio, r, convention))
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|a, b| a.coupling_ratio.total_cmp(&b.coupling_ratio).then(a.gate.cmp(&b.gate)));
    Ok(records)
}

/// Sweeps the coupling ratio `g/sqrt(κγ)`, mapping each value to `r` through
/// the resonant reflection law.
pub fn sweep(
    gates: &[GateKind],
    coupling_ratios: &[f64],
    convention: InputConvention,
) -> Result<Vec<SweepRecord>, AnalysisError> {
    let mut points = Vec::with_capacity(coupling_ratios.len());
    for &x in coupling_ratios {
        if !(x.is_finite() && x >= 0.0) {
            return Err(AnalysisError::BadRatio(x));
        }
        points.push((x, resonant_reflection(x)));
    }
    run_sweep(gates, points, convention)
}

/// Sweeps `r` directly over `[0, 1]`; the ratio column is the matching
/// resonant coupling ratio (infinite at `r = 1`).
pub fn sweep_reflection(
    gates: &[GateKind],
    rs: &[f64],
    convention: InputConvention,
) -> Result<Vec<SweepRecord>, AnalysisError> {
    let mut points = Vec::with_capacity(rs.len());
    for &r in rs {
        points.push((coupling_ratio_for_reflection(check_magnitude(r)?), r));
    }
    run_sweep(gates, points, convention)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub const CSV_HEADER: &str = "ratio,r,gate,fidelity_closed,fidelity_sim,efficiency_closed,efficiency_sim";

/// Formats like C's `%.9g`.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_csv<W: Write>(records: &[SweepRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            format_sig(r.coupling_ratio),
            format_sig(r.r),
            r.gate,
            format_sig(r.fidelity_closed),
            format_sig(r.fidelity_sim),
            format_sig(r.efficiency_closed),
            format_sig(r.efficiency_sim),
        )?;
    }
    Ok(())
}

/// One fidelity convention scored against the closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct ConventionScore {
    pub convention: InputConvention,
    pub normalization: Normalization,
    pub scope: FidelityScope,
    /// Per gate: largest `|simulated - closed form|` over the grid.
    pub max_residual: Vec<(GateKind, f64)>,
    /// Per gate: simulated fidelity at `r = 1`.
    pub at_unity: Vec<(GateKind, f64)>,
}

impl ConventionScore {
    pub fn worst_residual(&self) -> f64 {
        self.max_residual.iter().map(|&(_, x)| x).fold(0.0, f64::max)
    }

    pub fn label(&self) -> String {
        let norm = match self.normalization {
            Normalization::Postselected => "postselected",
            Normalization::Unnormalized => "unnormalized",
        };
        let scope = match self.scope {
            FidelityScope::PerOutcome => "per-outcome",
            FidelityScope::Joint => "joint",
        };
        format!("{} / {norm} / {scope}", self.convention)
    }
}

/// Comparison of every simulated fidelity convention against the closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct ConventionReport {
    pub grid: Vec<f64>,
    pub scores: Vec<ConventionScore>,
}

impl ConventionReport {
    /// Index of the convention with the smallest worst-case residual.
    pub fn best(&self) -> Option<&ConventionScore> {
        self.scores
            .iter()
            .min_by(|a, b| a.worst_residual().total_cmp(&b.worst_residual()))
    }
}

impl fmt::Display for ConventionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "fidelity conventions vs closed form, {} points of r in [{}, {}]",
            self.grid.len(),
            self.grid.first().copied().unwrap_or(0.0),
            self.grid.last().copied().unwrap_or(0.0)
        )?;
        let gates: Vec<GateKind> = self
            .scores
            .first()
            .map(|s| s.max_residual.iter().map(|&(g, _)| g).collect())
            .unwrap_or_default();
        write!(f, "{:<48}", "convention")?;
        for g in &gates {
            write!(f, " {:>14}", format!("{g} resid"))?;
        }
        for g in &gates {
            write!(f, " {:>12}", format!("{g} @r=1"))?;
        }
        writeln!(f)?;
        for s in &self.scores {
            write!(f, "{:<48}", s.label())?;
            for (_, x) in &s.max_residual {
                write!(f, " {:>14.3e}", x)?;
            }
            for (_, x) in &s.at_unity {
                write!(f, " {:>12.10}", x)?;
            }
            writeln!(f)?;
        }
        if let Some(b) = self.best() {
            writeln!(f, "best match: {} (max residual {:.3e})", b.label(), b.worst_residual())?;
        }
        Ok(())
    }
}

/// Scores every (convention, normalization, scope) combination against the
/// closed-form fidelity on `grid` (values of `r` in `[0, 1]`).
pub fn fidelity_convention_report(
    gates: &[GateKind],
    grid: &[f64],
    conventions: &[InputConvention],
) -> Result<ConventionReport, AnalysisError> {
    for &r in grid {
        check_magnitude(r)?;
    }
    let modes: Vec<(Normalization, FidelityScope)> = [Normalization::Postselected, Normalization::Unnormalized]
        .into_iter()
        .flat_map(|n| [FidelityScope::PerOutcome, FidelityScope::Joint].map(|s| (n, s)))
        .collect();

    let mut scores = Vec::new();
    for &convention in conventions {
        // metrics[g][i] for gate g at grid point i, plus the value at r = 1
        let per_gate: Vec<(GateKind, Vec<SimulatedMetrics>, SimulatedMetrics)> = gates
            .par_iter()
            .map(|&g| {
                let sim = GateSimulator::new(g);
                let on_grid = grid
                    .par_iter()
                    .map(|&r| sim.metrics(ReflectionPair::resonant(r), convention))
                    .collect::<Result<Vec<_>, _>>()?;
                let unity = sim.metrics(ReflectionPair::IDEAL, convention)?;
                Ok((g, on_grid, unity))
            })
            .collect::<Result<Vec<_>, AnalysisError>>()?;

        for &(normalization, scope) in &modes {
            let mut max_residual = Vec::new();
            let mut at_unity = Vec::new();
            for (g, on_grid, unity) in &per_gate {
                let mut worst: f64 = 0.0;
                for (&r, m) in grid.iter().zip(on_grid) {
                    let closed = fidelity_closed_form(*g, r)?;
                    let sim = m.fidelity(normalization, scope).unwrap_or(f64::NAN);
                    let d = (sim - closed).abs();
                    worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
                }
                max_residual.push((*g, worst));
                at_unity.push((*g, unity.fidelity(normalization, scope).unwrap_or(f64::NAN)));
            }
            scores.push(ConventionScore {
                convention,
                normalization,
                scope,
                max_residual,
                at_unity,
            });
        }
    }
    Ok(ConventionReport {
        grid: grid.to_vec(),
        scores,
    })
}
