//! NV-center/cavity reflection and the photon-spin scattering rule.
//!
//! In the weak-excitation limit the cavity mode can be eliminated and a photon
//! reflected off the cavity picks up
//!
//! ```text
//!          [i(ω_c-ω_p) - κ/2][i(ω_0-ω_p) + γ/2] + g²
//! r(ω_p) = ------------------------------------------
//!          [i(ω_c-ω_p) + κ/2][i(ω_0-ω_p) + γ/2] + g²
//! ```
//!
//! The "hot" coefficient uses the actual coupling `g`; the "cold" one is the
//! same expression with `g = 0` (the photon does not see the NV center). A
//! photon whose polarization drives the NV transition out of the current spin
//! state (`R` with `|+>`, `L` with `|->`) sees the hot cavity, the other two
//! combinations see the cold one.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::state::{HybridState, Mode, Polarization, Spin, SpinConfig, StateError};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{name} must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} must be finite, got {value}")]
    NotFinite { name: &'static str, value: f64 },
}

fn finite(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ParamError::NotFinite { name, value })
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if finite(name, value)? > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::NotPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if finite(name, value)? >= 0.0 {
        Ok(value)
    } else {
        Err(ParamError::Negative { name, value })
    }
}

/// Physical parameters of one NV-cavity block.
///
/// Frequencies are kept as detunings from the photon frequency; only
/// differences enter the reflection coefficient, so the unit is arbitrary as
/// long as all rates share it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityParams {
    g: f64,
    kappa: f64,
    gamma: f64,
    cavity_detuning: f64,
    nv_detuning: f64,
}

impl CavityParams {
    pub fn new(
        g: f64,
        kappa: f64,
        gamma: f64,
        omega_c: f64,
        omega_0: f64,
        omega_p: f64,
    ) -> Result<Self, ParamError> {
        let omega_p = finite("omega_p", omega_p)?;
        Ok(CavityParams {
            g: non_negative("g", g)?,
            kappa: positive("kappa", kappa)?,
            gamma: positive("gamma", gamma)?,
            cavity_detuning: finite("omega_c", omega_c)? - omega_p,
            nv_detuning: finite("omega_0", omega_0)? - omega_p,
        })
    }

    /// `ω_c = ω_0 = ω_p`.
    pub fn resonant(g: f64, kappa: f64, gamma: f64) -> Result<Self, ParamError> {
        CavityParams::new(g, kappa, gamma, 0.0, 0.0, 0.0)
    }

    /// Resonant block with `κ = γ = 1` and `g` equal to the given
    /// `g/sqrt(κγ)`.
    pub fn from_coupling_ratio(ratio: f64) -> Result<Self, ParamError> {
        CavityParams::resonant(non_negative("coupling ratio", ratio)?, 1.0, 1.0)
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `ω_c - ω_p`.
    pub fn cavity_detuning(&self) -> f64 {
        self.cavity_detuning
    }

    /// `ω_0 - ω_p`.
    pub fn nv_detuning(&self) -> f64 {
        self.nv_detuning
    }

    /// `g / sqrt(κγ)`.
    pub fn coupling_ratio(&self) -> f64 {
        self.g / (self.kappa * self.gamma).sqrt()
    }

    pub fn with_coupling(&self, g: f64) -> Result<Self, ParamError> {
        Ok(CavityParams {
            g: non_negative("g", g)?,
            ..*self
        })
    }
}

/// Reflection coefficients of the coupled (`hot`) and empty (`cold`) cavity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReflectionPair {
    pub hot: C64,
    pub cold: C64,
}

impl ReflectionPair {
    /// Strong-coupling idealization: `r = 1`, `r_0 = -1`.
    pub const IDEAL: ReflectionPair = ReflectionPair {
        hot: C64 { re: 1.0, im: 0.0 },
        cold: C64 { re: -1.0, im: 0.0 },
    };

    pub fn new(hot: C64, cold: C64) -> Self {
        ReflectionPair { hot, cold }
    }

    /// Resonant pair with a real hot coefficient; the cold cavity gives `-1`.
    pub fn resonant(hot: f64) -> Self {
        ReflectionPair {
            hot: C64::new(hot, 0.0),
            cold: C64::new(-1.0, 0.0),
        }
    }

    pub fn is_ideal(&self) -> bool {
        *self == ReflectionPair::IDEAL
    }

    /// Coefficient picked up by a photon of polarization `pol` meeting a spin
    /// in state `spin`.
    pub fn for_pair(&self, pol: Polarization, spin: Spin) -> C64 {
        if coupled(pol, spin) {
            self.hot
        } else {
            self.cold
        }
    }
}

/// Whether the photon polarization drives the NV transition for this spin.
pub fn coupled(pol: Polarization, spin: Spin) -> bool {
    matches!(
        (pol, spin),
        (Polarization::R, Spin::Plus) | (Polarization::L, Spin::Minus)
    )
}

fn reflection(params: &CavityParams, g: f64) -> C64 {
    let i = C64::i();
    let cav = i * params.cavity_detuning;
    let nv = i * params.nv_detuning + params.gamma / 2.0;
    let g2 = C64::new(g * g, 0.0);
    let num = (cav - params.kappa / 2.0) * nv + g2;
    let den = (cav + params.kappa / 2.0) * nv + g2;
    num / den
}

/// Hot and cold reflection coefficients for the given block.
pub fn reflection_coefficient(params: &CavityParams) -> ReflectionPair {
    ReflectionPair {
        hot: reflection(params, params.g),
        cold: reflection(params, 0.0),
    }
}

/// Resonant hot-cavity reflection as a function of `x = g/sqrt(κγ)`:
/// `(x² - 1/4) / (x² + 1/4)`.
pub fn resonant_reflection(ratio: f64) -> f64 {
    let x2 = ratio * ratio;
    (x2 - 0.25) / (x2 + 0.25)
}

/// Inverse of [`resonant_reflection`] on `[-1, 1)`; `r = 1` maps to infinity.
pub fn coupling_ratio_for_reflection(r: f64) -> f64 {
    if r >= 1.0 {
        return f64::INFINITY;
    }
    0.5 * ((1.0 + r) / (1.0 - r)).sqrt()
}

/// How the cavity damping rate is read off `Q = c/(λκ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateConvention {
    /// `κ = c/(λQ)` taken at face value.
    Literal,
    /// `κ = c/(2πλQ)`: the quality factor is defined with the angular
    /// frequency while κ is quoted as an ordinary frequency.
    OverTwoPi,
}

/// `κ = c/(λQ)`.
pub fn kappa_from_quality_factor(q: f64, wavelength: f64) -> Result<f64, ParamError> {
    kappa_from_quality_factor_with(q, wavelength, RateConvention::Literal)
}

pub fn kappa_from_quality_factor_with(
    q: f64,
    wavelength: f64,
    convention: RateConvention,
) -> Result<f64, ParamError> {
    let q = positive("Q", q)?;
    let wavelength = positive("wavelength", wavelength)?;
    let literal = SPEED_OF_LIGHT / (wavelength * q);
    Ok(match convention {
        RateConvention::Literal => literal,
        RateConvention::OverTwoPi => literal / (2.0 * std::f64::consts::PI),
    })
}

/// Multiplies every amplitude with the photon in `mode` by the hot or cold
/// coefficient, depending on the photon polarization and the state of spin
/// `spin`. Amplitudes in other modes are untouched.
pub fn scatter(
    state: &HybridState,
    spin: usize,
    mode: Mode,
    pair: &ReflectionPair,
) -> Result<HybridState, StateError> {
    state.check_spin(spin)?;
    let mi = state.mode_index(mode)?;
    let n = state.n_spins();
    let mut out = state.clone();
    for pol in Polarization::ALL {
        for (idx, amp) in out.block_mut(pol, mi).iter_mut().enumerate() {
            let s = SpinConfig::from_index(idx, n).spin(spin);
            *amp *= pair.for_pair(pol, s);
        }
    }
    Ok(out)
}
