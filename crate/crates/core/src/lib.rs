//! Simulation of cavity-assisted photonic CNOT, Toffoli and Fredkin gates on
//! NV-center electron spins.
//!
//! A single photon carries polarization and a spatial mode; each NV center
//! contributes one spin qubit. Circuits are ordered lists of optical and spin
//! elements, either built in code ([`gates`]) or parsed from `.nv` netlists
//! ([`netlist`]).

pub mod analysis;
pub mod cavity;
pub mod gates;
pub mod netlist;
pub mod optics;
pub mod state;

pub use cavity::{reflection_coefficient, CavityParams, ReflectionPair};
pub use gates::{build_gate_circuit, ideal_gate_unitary, GateKind, TargetGate};
pub use netlist::{parse_netlist, run_netlist, Diagnostic, DiagnosticKind, FeedforwardTable, Netlist, Outcome};
pub use optics::{Couplings, Element, Pauli, Port};
pub use state::{FsOutcome, HybridState, Mode, Polarization, Spin, SpinConfig, SpinState, StateError};
