//! Physical success-probability and resource model.
//!
//! Postselection succeeds with the protocol probability `P_p`; detecting
//! the heralding photons and reading out the atoms costs additional
//! efficiency factors. The composed per-attempt success probability is
//!
//! ```text
//! P = P_p · T_f · η₀ · η_d^N · η_a^N
//! ```
//!
//! with `T_f` the fiber coupling/transmission, `η₀` the optical-element
//! transmission, `η_d` the single-photon detector efficiency and `η_a` the
//! atomic measurement efficiency. `T_f` and `η₀` enter once in this
//! composition while `η_d` and `η_a` are paid per party; the alternative
//! [`LossModel::PerPhotonLosses`] raises `T_f` and `η₀` to the N-th power
//! as well, charging fiber and optics once per photon.

use crate::faraday::CavityParams;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ResourceError {
    #[error("efficiency {name} = {value} outside [0, 1]")]
    BadEfficiency { name: &'static str, value: f64 },
    #[error("party count must be >= 2, got {0}")]
    BadPartyCount(usize),
}

/// The four loss/efficiency figures of the physical model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EfficiencyParams {
    /// Fiber coupling and transmission probability `T_f`.
    pub fiber_transmission: f64,
    /// Transmission through the other optical elements `η₀`.
    pub optical_transmission: f64,
    /// Single-photon detector efficiency `η_d`.
    pub detector_efficiency: f64,
    /// Atomic measurement efficiency `η_a`.
    pub atom_measurement_efficiency: f64,
}

impl EfficiencyParams {
    /// The cited experimental figures: `T_f = 0.2`, `η₀ = 0.95`,
    /// `η_d = 0.28`, `η_a = 0.95`.
    pub fn cited_defaults() -> Self {
        EfficiencyParams {
            fiber_transmission: 0.2,
            optical_transmission: 0.95,
            detector_efficiency: 0.28,
            atom_measurement_efficiency: 0.95,
        }
    }

    /// Lossless reference point.
    pub fn perfect() -> Self {
        EfficiencyParams {
            fiber_transmission: 1.0,
            optical_transmission: 1.0,
            detector_efficiency: 1.0,
            atom_measurement_efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ResourceError> {
        for (name, value) in [
            ("T_f", self.fiber_transmission),
            ("eta_0", self.optical_transmission),
            ("eta_d", self.detector_efficiency),
            ("eta_a", self.atom_measurement_efficiency),
        ] {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(ResourceError::BadEfficiency { name, value });
            }
        }
        Ok(())
    }
}

/// How fiber and optical losses scale with the party count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LossModel {
    /// `T_f` and `η₀` applied once, as in the composed formula above.
    #[default]
    AsPublished,
    /// `T_f` and `η₀` paid per photon (N times).
    PerPhotonLosses,
}

/// The pure efficiency factor multiplying the protocol's `P_p`.
pub fn physical_efficiency_factor(n_parties: usize, eff: &EfficiencyParams, model: LossModel) -> f64 {
    let per_party = (eff.detector_efficiency * eff.atom_measurement_efficiency).powi(n_parties as i32);
    match model {
        LossModel::AsPublished => eff.fiber_transmission * eff.optical_transmission * per_party,
        LossModel::PerPhotonLosses => {
            (eff.fiber_transmission * eff.optical_transmission).powi(n_parties as i32) * per_party
        }
    }
}

/// Total per-attempt success probability `P = P_p · (efficiency factor)`.
///
/// `p_protocol` is the postselection probability; for a binary bit-flip
/// mixture it is [`binary_acceptance_probability`].
pub fn success_probability(
    p_protocol: f64,
    n_parties: usize,
    eff: &EfficiencyParams,
    model: LossModel,
) -> Result<f64, ResourceError> {
    eff.validate()?;
    if n_parties < 2 {
        return Err(ResourceError::BadPartyCount(n_parties));
    }
    Ok(p_protocol * physical_efficiency_factor(n_parties, eff, model))
}

/// `P_p = F² + (1-F)²` for a binary mixture.
pub fn binary_acceptance_probability(fidelity: f64) -> f64 {
    fidelity * fidelity + (1.0 - fidelity) * (1.0 - fidelity)
}

/// Speed of light (m/s).
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// The ⁸⁷Rb fiber-cavity working point: `ω_0 = 2πc/λ` at `λ = 780 nm`
/// (the D₂ line), `κ = 2π × 53 MHz`, with `ω_c = ω_0`,
/// `ω_p = ω_c - κ/2`, `g = κ/2` and `γ = 0`, plus the cited efficiency
/// figures.
pub fn default_physical_params() -> (CavityParams, EfficiencyParams) {
    let lambda = 780e-9;
    let omega_0 = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / lambda;
    let kappa = 2.0 * std::f64::consts::PI * 53e6;
    let cavity = CavityParams {
        omega_c: omega_0,
        omega_0,
        omega_p: omega_0 - kappa / 2.0,
        kappa,
        gamma: 0.0,
        g: kappa / 2.0,
    };
    (cavity, EfficiencyParams::cited_defaults())
}
