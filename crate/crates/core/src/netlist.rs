//! Line-oriented circuit description format.
//!
//! ```text
//! # CNOT
//! spins 2
//! modes 0 1 2 3 4 5 6 7 8 9
//! pbs 0 _ -> 1 2          # R -> 1, L -> 2; `_` is an open port
//! nv 2 -> 3 spin_1        # reflect off NV 1, continue in mode 3
//! pbs 1 3 -> 4 _
//! hwp 4 -> 5
//! spinh 2
//! ...
//! detect 9
//! feedforward 9F:
//! feedforward 9S: spin_1 -Z
//! ```
//!
//! Directives: `spins N`, `modes m...`, `pbs a b -> c d`, `pbsfs m -> f s`,
//! `hwp m [-> m']`, `bs a b -> c d`, `nv m [-> m'] spin_k`, `spinh k`,
//! `pauli k OP`, `detect m`, `feedforward <mode><F|S>: spin_k OP ...`.
//! Spins are numbered from 1 in the text. Elements run in file order and the
//! order is checked to be a valid path order for the photon.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::optics::{Couplings, Element, ElementError, Pauli, Port};
use crate::state::{FsOutcome, HybridState, Mode, SpinState, StateError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    UnknownDirective,
    UndeclaredMode,
    ArityMismatch,
    NonTopological,
    SpinOutOfRange,
    InvalidNumber,
    Syntax,
    MissingSpins,
    MissingModes,
    Duplicate,
    WiringConflict,
    DetectorNotTerminal,
    UnknownOutcome,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DiagnosticKind::UnknownDirective => "unknown directive",
            DiagnosticKind::UndeclaredMode => "undeclared mode",
            DiagnosticKind::ArityMismatch => "arity mismatch",
            DiagnosticKind::NonTopological => "non-topological order",
            DiagnosticKind::SpinOutOfRange => "spin out of range",
            DiagnosticKind::InvalidNumber => "invalid number",
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::MissingSpins => "missing spins declaration",
            DiagnosticKind::MissingModes => "missing modes declaration",
            DiagnosticKind::Duplicate => "duplicate declaration",
            DiagnosticKind::WiringConflict => "wiring conflict",
            DiagnosticKind::DetectorNotTerminal => "element after detector",
            DiagnosticKind::UnknownOutcome => "unknown detector outcome",
        };
        f.write_str(s)
    }
}

/// A parse or validation error, located at a 1-based line and column.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}: {message}")]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A detector click: which detector fired and in which polarization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Outcome {
    pub detector: Mode,
    pub result: FsOutcome,
}

impl Outcome {
    pub fn new(detector: Mode, result: FsOutcome) -> Self {
        Outcome { detector, result }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.detector, self.result)
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("`{s}` is not an outcome like `9F` or `13S`");
        let (mode, result) = match s.char_indices().last() {
            Some((i, 'F')) => (&s[..i], FsOutcome::F),
            Some((i, 'S')) => (&s[..i], FsOutcome::S),
            _ => return Err(bad()),
        };
        let mode = mode.parse::<u16>().map_err(|_| bad())?;
        Ok(Outcome::new(Mode(mode), result))
    }
}

/// Spin corrections applied after each detector outcome. Spin indices are
/// 0-based. Outcomes without a rule get no correction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeedforwardTable {
    rules: BTreeMap<Outcome, Vec<(usize, Pauli)>>,
}

impl FeedforwardTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_rule(mut self, outcome: Outcome, ops: &[(usize, Pauli)]) -> Self {
        self.set(outcome, ops.to_vec());
        self
    }

    pub fn set(&mut self, outcome: Outcome, ops: Vec<(usize, Pauli)>) {
        self.rules.insert(outcome, ops);
    }

    pub fn ops(&self, outcome: Outcome) -> &[(usize, Pauli)] {
        self.rules.get(&outcome).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn outcomes(&self) -> impl Iterator<Item = Outcome> + '_ {
        self.rules.keys().copied()
    }

    pub fn covers(&self, outcomes: &[Outcome]) -> bool {
        outcomes.iter().all(|o| self.rules.contains_key(o))
    }

    pub fn apply(&self, outcome: Outcome, spins: &SpinState) -> Result<SpinState, StateError> {
        let mut out = spins.clone();
        for &(k, op) in self.ops(outcome) {
            out = out.apply_single(k, &op.matrix())?;
        }
        Ok(out)
    }
}

/// A parsed and validated circuit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Netlist {
    n_spins: usize,
    modes: Vec<Mode>,
    elements: Vec<Element>,
    detectors: Vec<Mode>,
    feedforward: Option<FeedforwardTable>,
}

/// Probability and post-feedforward spin state of one detector outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeResult {
    pub outcome: Outcome,
    pub probability: f64,
    /// Corrected spin state before renormalization; its squared norm is `probability`.
    pub projected: SpinState,
}

impl OutcomeResult {
    /// Renormalized spin state, `None` if the outcome cannot occur.
    pub fn spins(&self) -> Option<SpinState> {
        self.projected.normalized()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub outcomes: Vec<OutcomeResult>,
    /// State just before detection.
    pub final_state: HybridState,
}

impl RunResult {
    /// Probability that the photon reaches a detector.
    pub fn detected_probability(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("input state has {got_spins} spins over modes {got_modes:?}; netlist needs {spins} spins over {modes:?}")]
    InputMismatch {
        spins: usize,
        modes: Vec<Mode>,
        got_spins: usize,
        got_modes: Vec<Mode>,
    },
    #[error("element #{index} ({element}): {source}")]
    Element {
        index: usize,
        element: String,
        source: ElementError,
    },
    #[error(transparent)]
    State(#[from] StateError),
}

impl Netlist {
    /// Builds a netlist from parts, running the same checks as the parser
    /// (diagnostics then carry line 0).
    pub fn new(
        n_spins: usize,
        modes: &[Mode],
        elements: Vec<Element>,
        detectors: Vec<Mode>,
        feedforward: Option<FeedforwardTable>,
    ) -> Result<Self, Diagnostic> {
        let mut modes = modes.to_vec();
        modes.sort();
        modes.dedup();
        let net = Netlist {
            n_spins,
            modes,
            elements,
            detectors,
            feedforward,
        };
        let lines = vec![0; net.elements.len()];
        net.validate(&lines, &vec![0; net.detectors.len()], 0)?;
        Ok(net)
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn detectors(&self) -> &[Mode] {
        &self.detectors
    }

    pub fn feedforward(&self) -> Option<&FeedforwardTable> {
        self.feedforward.as_ref()
    }

    pub fn without_feedforward(&self) -> Netlist {
        Netlist {
            feedforward: None,
            ..self.clone()
        }
    }

    /// Every detector outcome, detector by detector, F before S.
    pub fn outcomes(&self) -> Vec<Outcome> {
        self.detectors
            .iter()
            .flat_map(|&d| FsOutcome::ALL.map(|r| Outcome::new(d, r)))
            .collect()
    }

    /// Modes read before any element writes them: where the photon may enter.
    pub fn source_modes(&self) -> Vec<Mode> {
        let mut written = BTreeSet::new();
        let mut sources = Vec::new();
        for e in &self.elements {
            for m in e.input_modes() {
                if !written.contains(&m) && !sources.contains(&m) {
                    sources.push(m);
                }
            }
            written.extend(e.output_modes());
        }
        sources
    }

    /// Mode where a single-source circuit's photon enters.
    pub fn input_mode(&self) -> Option<Mode> {
        self.source_modes().first().copied()
    }

    /// Product input `photon ⊗ spins` with the photon in the input mode.
    pub fn product_input(&self, photon: [C64; 2], spins: &[[C64; 2]]) -> Result<HybridState, StateError> {
        let mode = self.input_mode().ok_or(StateError::NoModes)?;
        HybridState::product(&self.modes, photon, mode, spins)
    }

    /// Same as [`Netlist::product_input`] for an arbitrary (possibly entangled) spin state.
    pub fn input_with_spins(&self, photon: [C64; 2], spins: &SpinState) -> Result<HybridState, StateError> {
        let mode = self.input_mode().ok_or(StateError::NoModes)?;
        HybridState::with_photon(&self.modes, photon, mode, spins)
    }

    /// Largest number of NV reflections along any one photon path.
    pub fn max_nv_interactions_per_path(&self) -> usize {
        let mut depth: BTreeMap<Mode, usize> = BTreeMap::new();
        let mut best = 0;
        for e in &self.elements {
            let inputs = e.input_modes();
            if inputs.is_empty() {
                continue;
            }
            let mut d = inputs.iter().map(|m| depth.remove(m).unwrap_or(0)).max().unwrap_or(0);
            if matches!(e, Element::NvScatter { .. }) {
                d += 1;
            }
            best = best.max(d);
            for m in e.output_modes() {
                depth.insert(m, d);
            }
        }
        best
    }

    pub fn nv_element_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, Element::NvScatter { .. }))
            .count()
    }

    fn check_input(&self, input: &HybridState) -> Result<(), RunError> {
        if input.n_spins() != self.n_spins || input.modes() != self.modes.as_slice() {
            return Err(RunError::InputMismatch {
                spins: self.n_spins,
                modes: self.modes.clone(),
                got_spins: input.n_spins(),
                got_modes: input.modes().to_vec(),
            });
        }
        Ok(())
    }

    fn step(&self, index: usize, state: &HybridState, couplings: &Couplings) -> Result<HybridState, RunError> {
        let e = &self.elements[index];
        e.apply(state, couplings).map_err(|source| RunError::Element {
            index,
            element: self.element_line(e),
            source,
        })
    }

    /// State after every element, in order (the input is not included).
    pub fn trace(&self, input: &HybridState, couplings: &Couplings) -> Result<Vec<HybridState>, RunError> {
        self.check_input(input)?;
        let mut out: Vec<HybridState> = Vec::with_capacity(self.elements.len());
        for i in 0..self.elements.len() {
            let next = self.step(i, out.last().unwrap_or(input), couplings)?;
            out.push(next);
        }
        Ok(out)
    }

    /// State just before detection.
    pub fn propagate(&self, input: &HybridState, couplings: &Couplings) -> Result<HybridState, RunError> {
        self.check_input(input)?;
        let mut state = input.clone();
        for i in 0..self.elements.len() {
            state = self.step(i, &state, couplings)?;
        }
        Ok(state)
    }

    /// Propagates, detects every outcome and applies the feedforward table.
    pub fn run(&self, input: &HybridState, couplings: &Couplings) -> Result<RunResult, RunError> {
        let final_state = self.propagate(input, couplings)?;
        let outcomes = self.detect(&final_state)?;
        Ok(RunResult { outcomes, final_state })
    }

    /// Detects every outcome of a pre-detection state and applies feedforward.
    pub fn detect(&self, state: &HybridState) -> Result<Vec<OutcomeResult>, RunError> {
        self.check_input(state)?;
        let mut out = Vec::new();
        for outcome in self.outcomes() {
            let mut projected = state.project_photon(outcome.result, outcome.detector)?;
            if let Some(ff) = &self.feedforward {
                projected = ff.apply(outcome, &projected)?;
            }
            out.push(OutcomeResult {
                outcome,
                probability: projected.norm_sqr(),
                projected,
            });
        }
        Ok(out)
    }

    fn element_line(&self, e: &Element) -> String {
        let mut s = String::new();
        write_element(&mut s, e).expect("writing to a String cannot fail");
        s
    }

    /// Static checks shared by the parser and [`Netlist::new`].
    fn validate(&self, lines: &[usize], detector_lines: &[usize], ff_line: usize) -> Result<(), Diagnostic> {
        let diag = |kind, line, message: String| Diagnostic {
            kind,
            line,
            column: 1,
            message,
        };
        let declared: BTreeSet<Mode> = self.modes.iter().copied().collect();
        for (e, &line) in self.elements.iter().zip(lines) {
            for m in e.input_modes().into_iter().chain(e.output_modes()) {
                if !declared.contains(&m) {
                    return Err(diag(DiagnosticKind::UndeclaredMode, line, format!("mode {m} is not declared")));
                }
            }
            if let Some(k) = e.spin() {
                if k >= self.n_spins {
                    return Err(diag(
                        DiagnosticKind::SpinOutOfRange,
                        line,
                        format!("spin {} but only {} spins declared", k + 1, self.n_spins),
                    ));
                }
            }
        }
        for (&d, &line) in self.detectors.iter().zip(detector_lines) {
            if !declared.contains(&d) {
                return Err(diag(DiagnosticKind::UndeclaredMode, line, format!("mode {d} is not declared")));
            }
        }

        // Order check: nothing may read a mode that only a later element writes,
        // and nothing may write into light it does not consume.
        let first_write: BTreeMap<Mode, usize> =
            self.elements
                .iter()
                .enumerate()
                .rev()
                .flat_map(|(i, e)| e.output_modes().into_iter().map(move |m| (m, i)))
                .collect();
        let mut live: BTreeSet<Mode> = self.source_modes().into_iter().collect();
        for (i, (e, &line)) in self.elements.iter().zip(lines).enumerate() {
            let inputs = e.input_modes();
            for m in &inputs {
                if let Some(&w) = first_write.get(m) {
                    if w > i {
                        return Err(diag(
                            DiagnosticKind::NonTopological,
                            line,
                            format!("mode {m} is read here but first written by a later element"),
                        ));
                    }
                }
            }
            for m in &inputs {
                live.remove(m);
            }
            for m in e.output_modes() {
                if !live.insert(m) {
                    return Err(diag(
                        DiagnosticKind::WiringConflict,
                        line,
                        format!("mode {m} already carries light that this element does not consume"),
                    ));
                }
            }
        }

        if let Some(ff) = &self.feedforward {
            let outcomes = self.outcomes();
            for o in ff.outcomes() {
                if !outcomes.contains(&o) {
                    return Err(diag(
                        DiagnosticKind::UnknownOutcome,
                        ff_line,
                        format!("outcome {o} does not belong to any detector"),
                    ));
                }
                for &(k, _) in ff.ops(o) {
                    if k >= self.n_spins {
                        return Err(diag(
                            DiagnosticKind::SpinOutOfRange,
                            ff_line,
                            format!("spin {} but only {} spins declared", k + 1, self.n_spins),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn run_netlist(net: &Netlist, input: &HybridState, couplings: &Couplings) -> Result<RunResult, RunError> {
    net.run(input, couplings)
}

fn write_element(f: &mut impl fmt::Write, e: &Element) -> fmt::Result {
    match e {
        Element::Pbs { inputs, outputs } => {
            write!(f, "pbs {} {} -> {} {}", inputs[0], inputs[1], outputs[0], outputs[1])
        }
        Element::PbsFs { input, outputs } => write!(f, "pbsfs {input} -> {} {}", outputs[0], outputs[1]),
        Element::Hwp { input, output } if input == output => write!(f, "hwp {input}"),
        Element::Hwp { input, output } => write!(f, "hwp {input} -> {output}"),
        Element::BeamSplitter { inputs, outputs } => {
            write!(f, "bs {} {} -> {} {}", inputs[0], inputs[1], outputs[0], outputs[1])
        }
        Element::NvScatter { input, output, spin } if input == output => write!(f, "nv {input} spin_{}", spin + 1),
        Element::NvScatter { input, output, spin } => write!(f, "nv {input} -> {output} spin_{}", spin + 1),
        Element::SpinHadamard { spin } => write!(f, "spinh {}", spin + 1),
        Element::SpinPauli { spin, op } => write!(f, "pauli {} {op}", spin + 1),
    }
}

impl fmt::Display for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "spins {}", self.n_spins)?;
        write!(f, "modes")?;
        for m in &self.modes {
            write!(f, " {m}")?;
        }
        writeln!(f)?;
        for e in &self.elements {
            write_element(f, e)?;
            writeln!(f)?;
        }
        for d in &self.detectors {
            writeln!(f, "detect {d}")?;
        }
        if let Some(ff) = &self.feedforward {
            for o in ff.outcomes() {
                write!(f, "feedforward {o}:")?;
                for (k, op) in ff.ops(o) {
                    write!(f, " spin_{} {op}", k + 1)?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

impl FromStr for Netlist {
    type Err = Diagnostic;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_netlist(s)
    }
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

struct LineParser<'a> {
    line: usize,
    tokens: Vec<Token<'a>>,
}

impl<'a> LineParser<'a> {
    fn diag(&self, kind: DiagnosticKind, column: usize, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            kind,
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn end_column(&self) -> usize {
        self.tokens
            .last()
            .map(|t| t.column + t.text.chars().count())
            .unwrap_or(1)
    }

    /// Splits the operands (tokens after the directive) at `->`.
    fn arrow_split(&self) -> Result<(&[Token<'a>], Option<&[Token<'a>]>), Diagnostic> {
        let args = &self.tokens[1..];
        let arrows: Vec<usize> = args.iter().enumerate().filter(|(_, t)| t.text == "->").map(|(i, _)| i).collect();
        match arrows.as_slice() {
            [] => Ok((args, None)),
            [i] => Ok((&args[..*i], Some(&args[i + 1..]))),
            [_, second, ..] => Err(self.diag(DiagnosticKind::Syntax, args[*second].column, "more than one `->`")),
        }
    }

    fn expect_count(&self, what: &str, toks: &[Token<'_>], n: usize, at: usize) -> Result<(), Diagnostic> {
        if toks.len() == n {
            return Ok(());
        }
        let column = toks.get(n).map(|t| t.column).unwrap_or(at);
        Err(self.diag(
            DiagnosticKind::ArityMismatch,
            column,
            format!(
                "`{}` takes {n} {what}, found {}",
                self.tokens[0].text,
                toks.len()
            ),
        ))
    }

    fn mode(&self, t: &Token<'_>, declared: &BTreeSet<Mode>) -> Result<Mode, Diagnostic> {
        let m = t.text.parse::<u16>().map(Mode).map_err(|_| {
            self.diag(DiagnosticKind::InvalidNumber, t.column, format!("`{}` is not a mode label", t.text))
        })?;
        if !declared.contains(&m) {
            return Err(self.diag(DiagnosticKind::UndeclaredMode, t.column, format!("mode {m} is not declared")));
        }
        Ok(m)
    }

    fn port(&self, t: &Token<'_>, declared: &BTreeSet<Mode>) -> Result<Port, Diagnostic> {
        if t.text == "_" {
            Ok(Port::Open)
        } else {
            self.mode(t, declared).map(Port::Mode)
        }
    }

    /// Accepts `k` or `spin_k` (1-based) and returns the 0-based index.
    fn spin(&self, t: &Token<'_>, n_spins: usize, allow_bare: bool) -> Result<usize, Diagnostic> {
        let digits = match t.text.strip_prefix("spin_") {
            Some(d) => d,
            None if allow_bare => t.text,
            None => {
                return Err(self.diag(DiagnosticKind::Syntax, t.column, format!("expected `spin_k`, found `{}`", t.text)))
            }
        };
        let k = digits.parse::<usize>().map_err(|_| {
            self.diag(DiagnosticKind::InvalidNumber, t.column, format!("`{}` is not a spin index", t.text))
        })?;
        if k == 0 || k > n_spins {
            return Err(self.diag(
                DiagnosticKind::SpinOutOfRange,
                t.column,
                format!("spin {k} out of range 1..={n_spins}"),
            ));
        }
        Ok(k - 1)
    }
}

/// Parses and validates a netlist. The first problem found is reported.
pub fn parse_netlist(text: &str) -> Result<Netlist, Diagnostic> {
    let mut n_spins: Option<usize> = None;
    let mut declared: Option<BTreeSet<Mode>> = None;
    let mut elements = Vec::new();
    let mut element_lines = Vec::new();
    let mut detectors = Vec::new();
    let mut detector_lines = Vec::new();
    let mut feedforward: Option<FeedforwardTable> = None;
    let mut ff_lines: BTreeMap<Outcome, usize> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim_end_matches('\r');
        let tokens = tokenize(content);
        if tokens.is_empty() {
            continue;
        }
        let p = LineParser { line, tokens };
        let head = &p.tokens[0];

        let need_spins = || n_spins.ok_or_else(|| p.diag(DiagnosticKind::MissingSpins, head.column, "`spins` must come first"));
        let need_modes = || {
            declared
                .as_ref()
                .ok_or_else(|| p.diag(DiagnosticKind::MissingModes, head.column, "`modes` must be declared before use"))
        };

        match head.text {
            "spins" => {
                if n_spins.is_some() {
                    return Err(p.diag(DiagnosticKind::Duplicate, head.column, "`spins` declared twice"));
                }
                let args = &p.tokens[1..];
                p.expect_count("argument", args, 1, p.end_column())?;
                let n = args[0].text.parse::<usize>().map_err(|_| {
                    p.diag(DiagnosticKind::InvalidNumber, args[0].column, format!("`{}` is not a count", args[0].text))
                })?;
                n_spins = Some(n);
            }
            "modes" => {
                if declared.is_some() {
                    return Err(p.diag(DiagnosticKind::Duplicate, head.column, "`modes` declared twice"));
                }
                let mut set = BTreeSet::new();
                for t in &p.tokens[1..] {
                    let m = t.text.parse::<u16>().map(Mode).map_err(|_| {
                        p.diag(DiagnosticKind::InvalidNumber, t.column, format!("`{}` is not a mode label", t.text))
                    })?;
                    if !set.insert(m) {
                        return Err(p.diag(DiagnosticKind::Duplicate, t.column, format!("mode {m} declared twice")));
                    }
                }
                if set.is_empty() {
                    return Err(p.diag(DiagnosticKind::ArityMismatch, p.end_column(), "`modes` needs at least one label"));
                }
                declared = Some(set);
            }
            "pbs" | "bs" => {
                let modes = need_modes()?;
                let (lhs, rhs) = p.arrow_split()?;
                let rhs = rhs.ok_or_else(|| p.diag(DiagnosticKind::Syntax, p.end_column(), "expected `->`"))?;
                p.expect_count("inputs", lhs, 2, rhs.first().map_or(p.end_column(), |t| t.column))?;
                p.expect_count("outputs", rhs, 2, p.end_column())?;
                let inputs = [p.port(&lhs[0], modes)?, p.port(&lhs[1], modes)?];
                let outputs = [p.port(&rhs[0], modes)?, p.port(&rhs[1], modes)?];
                check_distinct(&p, lhs, &inputs)?;
                check_distinct(&p, rhs, &outputs)?;
                elements.push(if head.text == "pbs" {
                    Element::Pbs { inputs, outputs }
                } else {
                    Element::BeamSplitter { inputs, outputs }
                });
                element_lines.push(line);
            }
            "pbsfs" => {
                let modes = need_modes()?;
                let (lhs, rhs) = p.arrow_split()?;
                let rhs = rhs.ok_or_else(|| p.diag(DiagnosticKind::Syntax, p.end_column(), "expected `->`"))?;
                p.expect_count("input", lhs, 1, rhs.first().map_or(p.end_column(), |t| t.column))?;
                p.expect_count("outputs", rhs, 2, p.end_column())?;
                let input = p.mode(&lhs[0], modes)?;
                let outputs = [p.port(&rhs[0], modes)?, p.port(&rhs[1], modes)?];
                check_distinct(&p, rhs, &outputs)?;
                elements.push(Element::PbsFs { input, outputs });
                element_lines.push(line);
            }
            "hwp" => {
                let modes = need_modes()?;
                let (lhs, rhs) = p.arrow_split()?;
                p.expect_count("mode", lhs, 1, p.end_column())?;
                let input = p.mode(&lhs[0], modes)?;
                let output = match rhs {
                    Some(rhs) => {
                        p.expect_count("output", rhs, 1, p.end_column())?;
                        p.mode(&rhs[0], modes)?
                    }
                    None => input,
                };
                elements.push(Element::Hwp { input, output });
                element_lines.push(line);
            }
            "nv" => {
                let n = need_spins()?;
                let modes = need_modes()?;
                let (lhs, rhs) = p.arrow_split()?;
                let (input_tok, output_tok, spin_tok) = match rhs {
                    None => {
                        p.expect_count("operands", lhs, 2, p.end_column())?;
                        (&lhs[0], &lhs[0], &lhs[1])
                    }
                    Some(rhs) => {
                        p.expect_count("input", lhs, 1, rhs.first().map_or(p.end_column(), |t| t.column))?;
                        p.expect_count("operands after `->`", rhs, 2, p.end_column())?;
                        (&lhs[0], &rhs[0], &rhs[1])
                    }
                };
                let input = p.mode(input_tok, modes)?;
                let output = p.mode(output_tok, modes)?;
                let spin = p.spin(spin_tok, n, false)?;
                elements.push(Element::NvScatter { input, output, spin });
                element_lines.push(line);
            }
            "spinh" => {
                let n = need_spins()?;
                let args = &p.tokens[1..];
                p.expect_count("argument", args, 1, p.end_column())?;
                let spin = p.spin(&args[0], n, true)?;
                elements.push(Element::SpinHadamard { spin });
                element_lines.push(line);
            }
            "pauli" => {
                let n = need_spins()?;
                let args = &p.tokens[1..];
                p.expect_count("arguments", args, 2, p.end_column())?;
                let spin = p.spin(&args[0], n, true)?;
                let op = args[1]
                    .text
                    .parse::<Pauli>()
                    .map_err(|e| p.diag(DiagnosticKind::Syntax, args[1].column, e))?;
                elements.push(Element::SpinPauli { spin, op });
                element_lines.push(line);
            }
            "detect" => {
                let modes = need_modes()?;
                let args = &p.tokens[1..];
                p.expect_count("mode", args, 1, p.end_column())?;
                let m = p.mode(&args[0], modes)?;
                if detectors.contains(&m) {
                    return Err(p.diag(DiagnosticKind::Duplicate, args[0].column, format!("detector on mode {m} declared twice")));
                }
                detectors.push(m);
                detector_lines.push(line);
            }
            "feedforward" => {
                let n = need_spins()?;
                let args = &p.tokens[1..];
                let Some(first) = args.first() else {
                    return Err(p.diag(DiagnosticKind::ArityMismatch, p.end_column(), "`feedforward` needs an outcome"));
                };
                let label = first.text.strip_suffix(':').ok_or_else(|| {
                    p.diag(DiagnosticKind::Syntax, first.column, "expected an outcome followed by `:`, like `9S:`")
                })?;
                let outcome = label
                    .parse::<Outcome>()
                    .map_err(|e| p.diag(DiagnosticKind::Syntax, first.column, e))?;
                let ops_tokens = &args[1..];
                if !ops_tokens.len().is_multiple_of(2) {
                    return Err(p.diag(
                        DiagnosticKind::ArityMismatch,
                        p.end_column(),
                        "corrections come in `spin_k OP` pairs",
                    ));
                }
                let mut ops = Vec::new();
                for pair in ops_tokens.chunks(2) {
                    let k = p.spin(&pair[0], n, false)?;
                    let op = pair[1]
                        .text
                        .parse::<Pauli>()
                        .map_err(|e| p.diag(DiagnosticKind::Syntax, pair[1].column, e))?;
                    ops.push((k, op));
                }
                let table = feedforward.get_or_insert_with(FeedforwardTable::new);
                if table.rules.contains_key(&outcome) {
                    return Err(p.diag(DiagnosticKind::Duplicate, first.column, format!("second rule for outcome {outcome}")));
                }
                table.set(outcome, ops);
                ff_lines.insert(outcome, line);
                continue;
            }
            other => {
                return Err(p.diag(DiagnosticKind::UnknownDirective, head.column, format!("unknown directive `{other}`")));
            }
        }

        let is_element = matches!(head.text, "pbs" | "bs" | "pbsfs" | "hwp" | "nv" | "spinh" | "pauli");
        if is_element && !detectors.is_empty() {
            return Err(p.diag(
                DiagnosticKind::DetectorNotTerminal,
                head.column,
                "elements must come before the detectors",
            ));
        }
    }

    let n_spins = n_spins.ok_or_else(|| Diagnostic {
        kind: DiagnosticKind::MissingSpins,
        line: 1,
        column: 1,
        message: "no `spins` declaration".into(),
    })?;
    let modes = declared.ok_or_else(|| Diagnostic {
        kind: DiagnosticKind::MissingModes,
        line: 1,
        column: 1,
        message: "no `modes` declaration".into(),
    })?;

    let net = Netlist {
        n_spins,
        modes: modes.into_iter().collect(),
        elements,
        detectors,
        feedforward,
    };
    // Feedforward problems are reported at the first rule that has one.
    let ff_line = net
        .feedforward
        .as_ref()
        .and_then(|ff| {
            ff.outcomes()
                .find(|o| !net.outcomes().contains(o))
                .and_then(|o| ff_lines.get(&o).copied())
        })
        .unwrap_or(0);
    net.validate(&element_lines, &detector_lines, ff_line)?;
    Ok(net)
}

fn check_distinct(p: &LineParser<'_>, toks: &[Token<'_>], ports: &[Port; 2]) -> Result<(), Diagnostic> {
    if let (Port::Mode(a), Port::Mode(b)) = (ports[0], ports[1]) {
        if a == b {
            return Err(p.diag(DiagnosticKind::WiringConflict, toks[1].column, format!("mode {a} used for both ports")));
        }
    }
    Ok(())
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut column = 0;
    for (byte, ch) in line.char_indices() {
        column += 1;
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                tokens.push(Token {
                    text: &line[b..byte],
                    column: c,
                });
            }
        } else if start.is_none() {
            start = Some((byte, column));
        }
    }
    if let Some((b, c)) = start {
        tokens.push(Token {
            text: &line[b..],
            column: c,
        });
    }
    tokens
}
