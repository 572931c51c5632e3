//! `nvgate`: run NV-center photonic gate circuits from the command line.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use nvgate::analysis::{
    efficiency_closed_form, fidelity_closed_form, fidelity_convention_report, linspace, random_qubit, sweep,
    sweep_reflection, write_csv, InputConvention,
};
use nvgate::cavity::{coupling_ratio_for_reflection, kappa_from_quality_factor_with, resonant_reflection, RateConvention};
use nvgate::{
    ideal_gate_unitary, parse_netlist, reflection_coefficient, CavityParams, Couplings, GateKind, HybridState, Netlist,
    ReflectionPair, SpinConfig, SpinState,
};
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Environment variable naming the directory that output files go to when
/// `--out` is not given.
const OUT_DIR_VAR: &str = "NVGATE_OUT_DIR";

#[derive(Parser)]
#[command(name = "nvgate", version, about = "Simulate NV-center photonic quantum gates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Send one photon through a circuit and print the detector outcomes.
    Run(RunArgs),
    /// Check a gate against its target unitary on random product inputs.
    Verify(VerifyArgs),
    /// Print the gate's action on every basis input.
    TruthTable(TruthTableArgs),
    /// Write fidelity and efficiency over a range of couplings as CSV.
    Sweep(SweepArgs),
    /// Print reflection coefficients and derived rates for cavity parameters.
    Params(ParamsArgs),
    /// Compare simulated fidelity conventions with the closed form.
    FidelityReport(ReportArgs),
}

#[derive(Args, Clone, Copy, Default)]
#[group(multiple = false)]
struct Regime {
    /// Ideal couplings (r_hot = 1, r_cold = -1). The default.
    #[arg(long)]
    ideal: bool,
    /// Coupling ratio g/sqrt(kappa gamma) of a resonant cavity.
    #[arg(long, value_name = "X")]
    ratio: Option<f64>,
    /// Hot-cavity reflection coefficient in [-1, 1].
    #[arg(long, value_name = "R", allow_hyphen_values = true)]
    reflection: Option<f64>,
}

impl Regime {
    fn resolve(self) -> Result<(ReflectionPair, String), CliError> {
        if let Some(x) = self.ratio {
            if !(x.is_finite() && x >= 0.0) {
                return Err(CliError::Usage(format!("--ratio must be a non-negative number, got {x}")));
            }
            let r = resonant_reflection(x);
            return Ok((ReflectionPair::resonant(r), format!("coupling ratio {x} (r = {r:.6})")));
        }
        if let Some(r) = self.reflection {
            if !(r.is_finite() && r.abs() <= 1.0) {
                return Err(CliError::Usage(format!("--reflection must lie in [-1, 1], got {r}")));
            }
            return Ok((ReflectionPair::resonant(r), format!("r = {r:.6}")));
        }
        Ok((ReflectionPair::IDEAL, "ideal couplings (r = 1)".into()))
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct CircuitSource {
    /// Netlist file to run.
    #[arg(long, value_name = "FILE")]
    netlist: Option<PathBuf>,
    /// Built-in gate circuit: cnot, toffoli or fredkin.
    #[arg(long)]
    gate: Option<GateKind>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: CircuitSource,
    #[command(flatten)]
    regime: Regime,
    /// Spin input: `balanced`, `random`, or one `a,b` amplitude pair per spin
    /// separated by `;` (for example `1,0;0.6,0.8i`).
    #[arg(long, default_value = "balanced", allow_hyphen_values = true)]
    input: String,
    /// Seed for `--input random`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    gate: GateKind,
    #[command(flatten)]
    regime: Regime,
    /// Number of random product inputs.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    trials: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TruthTableArgs {
    gate: GateKind,
    #[command(flatten)]
    regime: Regime,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    /// Coupling ratio g/sqrt(kappa gamma).
    Ratio,
    /// Hot-cavity reflection r.
    Reflection,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Balanced,
    Mixed,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    min: f64,
    #[arg(long)]
    max: f64,
    /// Number of grid points, endpoints included.
    #[arg(long)]
    steps: usize,
    #[arg(long, value_enum, default_value = "ratio")]
    axis: Axis,
    /// Gates to include; all three by default.
    #[arg(long, value_delimiter = ',')]
    gates: Vec<GateKind>,
    /// Spin inputs the simulated columns average over.
    #[arg(long, value_enum, default_value = "balanced")]
    convention: ConventionArg,
    /// Output CSV. Defaults to `$NVGATE_OUT_DIR/sweep.csv`, or stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParamsArgs {
    /// Coupling ratio of a resonant cavity.
    #[arg(long, conflicts_with_all = ["g", "kappa", "gamma"])]
    ratio: Option<f64>,
    #[arg(long, requires_all = ["kappa", "gamma"])]
    g: Option<f64>,
    #[arg(long, requires = "g")]
    kappa: Option<f64>,
    #[arg(long, requires = "g")]
    gamma: Option<f64>,
    /// Cavity frequency, relative to any common reference.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    omega_c: f64,
    /// NV transition frequency.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    omega_0: f64,
    /// Photon frequency.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    omega_p: f64,
    /// Cavity quality factor.
    #[arg(long, requires = "wavelength")]
    q: Option<f64>,
    /// Wavelength in metres.
    #[arg(long, requires = "q")]
    wavelength: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Grid points of r in [0, 1].
    #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u32).range(2..))]
    points: u32,
    /// Random inputs per point for the random convention.
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..))]
    samples: u32,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output file. Defaults to `$NVGATE_OUT_DIR/fidelity_report.txt`, or stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = String::new();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, &mut out),
        Command::Verify(a) => cmd_verify(a, &mut out),
        Command::TruthTable(a) => cmd_truth_table(a, &mut out),
        Command::Sweep(a) => cmd_sweep(a, &mut out),
        Command::Params(a) => cmd_params(a, &mut out),
        Command::FidelityReport(a) => cmd_fidelity_report(a, &mut out),
    };
    let _ = io::stdout().write_all(out.as_bytes());
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn balanced_photon() -> [C64; 2] {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [h, h]
}

fn fmt_c(z: C64) -> String {
    format!("{:+.6}{:+.6}i", z.re, z.im)
}

fn parse_pair(text: &str, index: usize) -> Result<[C64; 2], CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!("spin {}: expected `a,b`, got `{text}`", index + 1)));
    }
    let mut pair = [C64::new(0.0, 0.0); 2];
    for (slot, p) in pair.iter_mut().zip(&parts) {
        *slot = p
            .parse::<C64>()
            .map_err(|_| CliError::Usage(format!("spin {}: `{p}` is not a complex number", index + 1)))?;
    }
    let norm = (pair[0].norm_sqr() + pair[1].norm_sqr()).sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(CliError::Usage(format!("spin {}: amplitudes must not both be zero", index + 1)));
    }
    Ok([pair[0] / norm, pair[1] / norm])
}

fn parse_spin_input(text: &str, n: usize, seed: u64) -> Result<Vec<[C64; 2]>, CliError> {
    match text.trim() {
        "balanced" => Ok(vec![balanced_photon(); n]),
        "random" => {
            let mut rng = StdRng::seed_from_u64(seed);
            Ok((0..n).map(|_| random_qubit(&mut rng)).collect())
        }
        s => {
            let pairs: Vec<&str> = s.split(';').collect();
            if pairs.len() != n {
                return Err(CliError::Usage(format!("circuit has {n} spins but --input gives {}", pairs.len())));
            }
            pairs.iter().enumerate().map(|(i, p)| parse_pair(p, i)).collect()
        }
    }
}

fn write_state(out: &mut String, state: &SpinState) {
    for cfg in SpinConfig::all(state.n_spins()) {
        let a = state.amplitude(cfg);
        if a.norm_sqr() > 1e-24 {
            let _ = writeln!(out, "    {cfg}  {}  (p = {:.6})", fmt_c(a), a.norm_sqr());
        }
    }
}

fn cmd_run(a: RunArgs, out: &mut String) -> Result<ExitCode, CliError> {
    let (pair, regime) = a.regime.resolve()?;
    let (net, label, gate): (Netlist, String, Option<GateKind>) = match (a.source.netlist, a.source.gate) {
        (Some(path), _) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            let net = parse_netlist(&text).map_err(|d| CliError::Runtime(format!("{}: {d}", path.display())))?;
            (net, path.display().to_string(), None)
        }
        (None, Some(g)) => (nvgate::build_gate_circuit(g), g.to_string(), Some(g)),
        (None, None) => unreachable!("clap requires a circuit source"),
    };
    let spins = parse_spin_input(&a.input, net.n_spins(), a.seed)?;
    let input = net.product_input(balanced_photon(), &spins).map_err(CliError::runtime)?;
    let run = net.run(&input, &Couplings::Uniform(pair)).map_err(CliError::runtime)?;

    let _ = writeln!(out, "circuit: {label} ({} spins, {} elements)", net.n_spins(), net.elements().len());
    let _ = writeln!(out, "regime: {regime}");
    let _ = writeln!(out, "input: {} (seed {})", a.input.trim(), a.seed);
    let _ = writeln!(out, "spins in:");
    write_state(out, &SpinState::product(&spins).map_err(CliError::runtime)?);
    let target = gate.map(|g| ideal_gate_unitary(g).apply(&SpinState::product(&spins).unwrap()));
    let mut fidelity = 0.0;
    for o in &run.outcomes {
        let _ = writeln!(out, "outcome {}: probability {:.6}", o.outcome, o.probability);
        if let Some(s) = o.spins() {
            write_state(out, &s);
        }
        if let Some(t) = &target {
            fidelity += t.overlap(&o.projected).map_err(CliError::runtime)?.norm_sqr();
        }
    }
    let detected = run.detected_probability();
    let _ = writeln!(out, "detected: {detected:.6}");
    let _ = writeln!(out, "lost: {:.6}", (input.norm_sqr() - detected).max(0.0));
    if target.is_some() && detected > 0.0 {
        let _ = writeln!(out, "fidelity (postselected): {:.6}", fidelity / detected);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: VerifyArgs, out: &mut String) -> Result<ExitCode, CliError> {
    let (pair, regime) = a.regime.resolve()?;
    let ideal = pair.is_ideal();
    let net = nvgate::build_gate_circuit(a.gate);
    let target = ideal_gate_unitary(a.gate);
    let couplings = Couplings::Uniform(pair);
    let mut rng = StdRng::seed_from_u64(a.seed);

    let mut max_dev: f64 = 0.0;
    let mut fid_sum = 0.0;
    let mut fid_min = f64::INFINITY;
    let mut eff_sum = 0.0;
    for _ in 0..a.trials {
        let spins: Vec<[C64; 2]> = (0..a.gate.n_spins()).map(|_| random_qubit(&mut rng)).collect();
        let input = net.product_input(balanced_photon(), &spins).map_err(CliError::runtime)?;
        let run = net.run(&input, &couplings).map_err(CliError::runtime)?;
        let want = target.apply(&SpinState::product(&spins).map_err(CliError::runtime)?);
        let mut hit = 0.0;
        for o in &run.outcomes {
            if let Some(s) = o.spins() {
                max_dev = max_dev.max(s.distance_up_to_phase(&want).map_err(CliError::runtime)?);
            }
            hit += want.overlap(&o.projected).map_err(CliError::runtime)?.norm_sqr();
        }
        let detected = run.detected_probability();
        let f = if detected > 0.0 { hit / detected } else { 0.0 };
        fid_sum += f;
        fid_min = fid_min.min(f);
        eff_sum += detected;
    }
    let n = a.trials as f64;
    let _ = writeln!(out, "verify {}: {regime}, {} trials, seed {}", a.gate, a.trials, a.seed);
    let _ = writeln!(out, "max deviation from target: {max_dev:.3e}");
    let _ = writeln!(out, "mean fidelity (postselected): {:.6}", fid_sum / n);
    let _ = writeln!(out, "min fidelity (postselected): {fid_min:.6}");
    let _ = writeln!(out, "mean efficiency: {:.6}", eff_sum / n);
    if !ideal {
        let _ = writeln!(out, "result: report only (non-ideal couplings)");
        return Ok(ExitCode::SUCCESS);
    }
    if max_dev <= 1e-10 {
        let _ = writeln!(out, "result: PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        let _ = writeln!(out, "result: FAIL (deviation above 1e-10)");
        Ok(ExitCode::from(1))
    }
}

fn cmd_truth_table(a: TruthTableArgs, out: &mut String) -> Result<ExitCode, CliError> {
    let (pair, regime) = a.regime.resolve()?;
    let net = nvgate::build_gate_circuit(a.gate);
    let couplings = Couplings::Uniform(pair);
    let n = a.gate.n_spins();
    let outcomes = net.outcomes();

    let _ = writeln!(out, "truth table: {}, {regime}", a.gate);
    let _ = write!(out, "{:<8} {:<8} {:>9} {:>7}", "input", "output", "p(output)", "changed");
    for o in &outcomes {
        let _ = write!(out, " {:>9}", format!("p({o})"));
    }
    let _ = writeln!(out, " {:>9}", "lost");

    for cfg in SpinConfig::all(n) {
        let input = HybridState::with_photon(net.modes(), balanced_photon(), net.input_mode().unwrap(), &SpinState::basis(cfg))
            .map_err(CliError::runtime)?;
        let run = net.run(&input, &couplings).map_err(CliError::runtime)?;
        let detected = run.detected_probability();
        // output distribution over basis states, conditioned on detection
        let mut dist = vec![0.0; 1 << n];
        for o in &run.outcomes {
            if let Some(s) = o.spins() {
                for c in SpinConfig::all(n) {
                    dist[c.index()] += o.probability * s.amplitude(c).norm_sqr();
                }
            }
        }
        let (best, p) = dist
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, &p)| if p > acc.1 + 1e-12 { (i, p) } else { acc });
        let best = SpinConfig::from_index(best, n);
        let p = if detected > 0.0 { p / detected } else { 0.0 };
        let changed = if best == cfg { "no" } else { "yes" };
        let _ = write!(out, "{:<8} {:<8} {p:>9.6} {changed:>7}", cfg.to_string(), best.to_string());
        for o in &outcomes {
            let prob = run.outcomes.iter().find(|r| r.outcome == *o).map_or(0.0, |r| r.probability);
            let _ = write!(out, " {prob:>9.6}");
        }
        let _ = writeln!(out, " {:>9.6}", (1.0 - detected).max(0.0));
    }
    Ok(ExitCode::SUCCESS)
}

fn default_out(out: Option<PathBuf>, name: &str) -> Option<PathBuf> {
    out.or_else(|| std::env::var_os(OUT_DIR_VAR).map(|d| PathBuf::from(d).join(name)))
}

fn emit(path: Option<PathBuf>, body: &str, out: &mut String) -> Result<(), CliError> {
    match path {
        Some(p) => {
            fs::write(&p, body).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
            let _ = writeln!(out, "wrote {}", p.display());
        }
        None => out.push_str(body),
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, out: &mut String) -> Result<ExitCode, CliError> {
    if a.steps < 2 {
        return Err(CliError::Usage(format!("--steps must be at least 2, got {}", a.steps)));
    }
    if !(a.min.is_finite() && a.max.is_finite()) || a.min < 0.0 {
        return Err(CliError::Usage("--min must be non-negative and both bounds finite".into()));
    }
    if a.max <= a.min {
        return Err(CliError::Usage(format!("--max ({}) must be greater than --min ({})", a.max, a.min)));
    }
    if matches!(a.axis, Axis::Reflection) && a.max > 1.0 {
        return Err(CliError::Usage("reflection axis is limited to [0, 1]".into()));
    }
    let gates = if a.gates.is_empty() { GateKind::ALL.to_vec() } else { a.gates };
    let convention = match a.convention {
        ConventionArg::Balanced => InputConvention::Balanced,
        ConventionArg::Mixed => InputConvention::MaximallyMixed,
    };
    let grid = linspace(a.min, a.max, a.steps);
    let records = match a.axis {
        Axis::Ratio => sweep(&gates, &grid, convention),
        Axis::Reflection => sweep_reflection(&gates, &grid, convention),
    }
    .map_err(CliError::runtime)?;
    let mut csv = Vec::new();
    write_csv(&records, &mut csv).map_err(CliError::runtime)?;
    let csv = String::from_utf8(csv).expect("CSV is ASCII");
    emit(default_out(a.out, "sweep.csv"), &csv, out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_params(a: ParamsArgs, out: &mut String) -> Result<ExitCode, CliError> {
    let params = match (a.ratio, a.g) {
        (Some(x), _) => Some(CavityParams::from_coupling_ratio(x)),
        (None, Some(g)) => Some(CavityParams::new(
            g,
            a.kappa.unwrap_or_default(),
            a.gamma.unwrap_or_default(),
            a.omega_c,
            a.omega_0,
            a.omega_p,
        )),
        (None, None) => None,
    };
    if params.is_none() && a.q.is_none() {
        return Err(CliError::Usage("give --ratio, --g/--kappa/--gamma, or --q/--wavelength".into()));
    }
    if let Some(p) = params {
        let p = p.map_err(|e| CliError::Usage(e.to_string()))?;
        let pair = reflection_coefficient(&p);
        let mag = pair.hot.norm().min(1.0);
        let _ = writeln!(out, "coupling ratio g/sqrt(kappa gamma): {:.6}", p.coupling_ratio());
        let _ = writeln!(out, "r_hot: {}  |r_hot| = {:.6}", fmt_c(pair.hot), pair.hot.norm());
        let _ = writeln!(out, "r_cold: {}  |r_cold| = {:.6}", fmt_c(pair.cold), pair.cold.norm());
        if p.cavity_detuning() == 0.0 && p.nv_detuning() == 0.0 {
            let _ = writeln!(
                out,
                "ratio giving the same r on resonance: {:.6}",
                coupling_ratio_for_reflection(pair.hot.re)
            );
        }
        let _ = writeln!(out, "{:<8} {:>10} {:>10}", "gate", "fidelity", "efficiency");
        for g in GateKind::ALL {
            let f = fidelity_closed_form(g, mag).map_err(CliError::runtime)?;
            let e = efficiency_closed_form(g, mag).map_err(CliError::runtime)?;
            let _ = writeln!(out, "{:<8} {f:>10.6} {e:>10.6}", g.to_string());
        }
    }
    if let (Some(q), Some(w)) = (a.q, a.wavelength) {
        for (label, c) in [("c/(lambda Q)", RateConvention::Literal), ("c/(2 pi lambda Q)", RateConvention::OverTwoPi)] {
            let k = kappa_from_quality_factor_with(q, w, c).map_err(|e| CliError::Usage(e.to_string()))?;
            let _ = writeln!(out, "kappa = {label}: {k:.6e} Hz");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fidelity_report(a: ReportArgs, out: &mut String) -> Result<ExitCode, CliError> {
    let grid = linspace(0.0, 1.0, a.points as usize);
    let conventions = [
        InputConvention::Balanced,
        InputConvention::UniformRandom { samples: a.samples as usize, seed: a.seed },
        InputConvention::MaximallyMixed,
    ];
    let report = fidelity_convention_report(&GateKind::ALL, &grid, &conventions).map_err(CliError::runtime)?;
    let _ = writeln!(out, "seed {}", a.seed);
    emit(default_out(a.out, "fidelity_report.txt"), &report.to_string(), out)?;
    Ok(ExitCode::SUCCESS)
}
