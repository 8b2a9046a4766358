//! The purification rounds: exact two-copy simulation, the analytic
//! fidelity recursion and threshold test, multi-round iteration, and a
//! seeded Monte Carlo cross-check.
//!
//! One round consumes two copies of an N-party GHZ-diagonal state. Every
//! party holds one atom of each copy; a single photon per party, prepared
//! in `(|L⟩+|R⟩)/√2`, reflects off both of that party's cavities and is
//! measured in the diagonal basis. The detector pattern decides acceptance;
//! on acceptance the second copy is measured out (after a Hadamard) and a
//! readout-conditioned Pauli correction is applied to the first copy, which
//! is kept.
//!
//! Detector convention, frozen here: outcome `flip` means the photon was
//! found in `(|L⟩-|R⟩)/√2` and `keep` means `(|L⟩+|R⟩)/√2`. Even-parity
//! atom pairs flip the photon, so the branch in which every photon flips is
//! the one fed by the perfectly correlated components.

mod exact;
mod monte_carlo;
mod recursion;

pub use exact::{simulate_round_exact, ExactRoundReport};
pub use monte_carlo::{monte_carlo_round, monte_carlo_round_sequential, McReport};
pub use recursion::{
    iterate, recursion_step, round_report_csv, sweep_binary_fidelity,
    sweep_binary_fidelity_sequential, sweep_csv, threshold_check, RecursionState, StopRule,
    SweepRow, ThresholdVerdict,
};

use thiserror::Error;

use crate::faraday::{FaradayError, GateSource};
use crate::ghz::{GhzError, DEFAULT_LEAKAGE_THRESHOLD};
use crate::qsim::{DensityMatrix, QsimError, MAX_QUBITS};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("need 2 <= n_parties <= {max}, got {n} (register 2n+1 qubits)", max = (MAX_QUBITS - 1) / 2)]
    BadPartyCount { n: usize },
    #[error("input mixture has {got} parties, round is configured for {want}")]
    PartyMismatch { got: usize, want: usize },
    #[error("weights lie outside the {family} recursion family")]
    OutsideFamily { family: &'static str },
    #[error("weight {0} outside [0, 1]")]
    BadWeight(f64),
    #[error("the accepted detector patterns carry zero probability for this gate and mode")]
    NoAcceptedBranches,
    #[error("iteration stagnated: fidelity map has reached a non-improving point at F = {fidelity}")]
    Stagnation { fidelity: f64 },
    #[error("target fidelity {0} is not reachable (must lie in (current F, 1))")]
    BadTarget(f64),
    #[error("Monte Carlo needs at least one trial")]
    NoTrials,
    #[error(transparent)]
    Ghz(#[from] GhzError),
    #[error(transparent)]
    Faraday(#[from] FaradayError),
    #[error(transparent)]
    State(#[from] QsimError),
}

/// Which error family a round is set up to purify.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorMode {
    /// Purify bit-flip errors directly.
    BitFlip,
    /// Convert phase-flip errors to bit-flip errors with a Hadamard on
    /// every atom, purify, and convert back.
    PhaseFlip,
}

/// Configuration of one purification round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundConfig {
    pub n_parties: usize,
    pub error_mode: ErrorMode,
    pub gate_source: GateSource,
    /// Seed for the stochastic (Monte Carlo) mode.
    pub seed: u64,
    /// Ceiling on the kept state's weight outside the GHZ diagonal before
    /// an ideal-gate round reports an error.
    pub leakage_threshold: f64,
}

impl RoundConfig {
    pub fn new(n_parties: usize, error_mode: ErrorMode) -> Self {
        RoundConfig {
            n_parties,
            error_mode,
            gate_source: GateSource::Ideal,
            seed: 0,
            leakage_threshold: DEFAULT_LEAKAGE_THRESHOLD,
        }
    }

    pub fn with_gate_source(mut self, source: GateSource) -> Self {
        self.gate_source = source;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n_parties < 2 || 2 * self.n_parties + 1 > MAX_QUBITS {
            return Err(ProtocolError::BadPartyCount { n: self.n_parties });
        }
        Ok(())
    }
}

/// Diagonal-basis outcome of one party's photon detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhotonOutcome {
    /// Photon left in `(|L⟩+|R⟩)/√2`.
    Keep,
    /// Photon left in `(|L⟩-|R⟩)/√2`.
    Flip,
}

impl PhotonOutcome {
    pub fn as_char(self) -> char {
        match self {
            PhotonOutcome::Keep => 'k',
            PhotonOutcome::Flip => 'f',
        }
    }
}

/// Render a detector pattern as one character per party (`k`/`f`).
pub fn pattern_string(pattern: &[PhotonOutcome]) -> String {
    pattern.iter().map(|o| o.as_char()).collect()
}

/// Whether a detector pattern is accepted in the given mode: all outcomes
/// identical for bit-flip purification, all flipped for phase-flip
/// purification.
pub fn pattern_accepted(mode: ErrorMode, pattern: &[PhotonOutcome]) -> bool {
    match mode {
        ErrorMode::BitFlip => {
            pattern.iter().all(|&o| o == PhotonOutcome::Flip)
                || pattern.iter().all(|&o| o == PhotonOutcome::Keep)
        }
        ErrorMode::PhaseFlip => pattern.iter().all(|&o| o == PhotonOutcome::Flip),
    }
}

/// Single-qubit Pauli correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// The classical copy-1 correction rule shared by the exact and Monte Carlo
/// paths.
///
/// Bit-flip mode keeps a single conditional phase flip on party 0: the
/// collapsed copy-1 state is the minus-sign GHZ class iff `N + |z|` is odd
/// on the all-flipped pattern (the reflection phases put a `(-1)^N` between
/// the correlated terms there) or iff `|z|` is odd on the all-kept pattern,
/// `|z|` counting `g_R` readouts. Phase-flip mode conjugates the recorded
/// readout phases: one Z per party that read `g_R`, before the recovering
/// Hadamards.
pub(crate) fn correction_rule(
    mode: ErrorMode,
    n_parties: usize,
    all_kept_pattern: bool,
    readout: &[bool],
) -> Vec<(usize, Pauli)> {
    let readout_ones = readout.iter().filter(|&&b| b).count();
    match mode {
        ErrorMode::BitFlip => {
            let parity = if all_kept_pattern {
                readout_ones % 2
            } else {
                (n_parties + readout_ones) % 2
            };
            if parity == 1 {
                vec![(0, Pauli::Z)]
            } else {
                Vec::new()
            }
        }
        ErrorMode::PhaseFlip => readout
            .iter()
            .enumerate()
            .filter(|(_, &bit)| bit)
            .map(|(party, _)| (party, Pauli::Z))
            .collect(),
    }
}

/// Record of one branch of a purification attempt.
#[derive(Clone, Debug)]
pub struct RoundOutcome {
    /// Per-party photon outcome in the diagonal basis.
    pub pattern: Vec<PhotonOutcome>,
    /// Copy-2 atom readout (`true` = `g_R`), present on accepted branches.
    pub atom_readout: Option<Vec<bool>>,
    pub accepted: bool,
    /// Pauli corrections applied to copy-1, as (party, operator).
    pub corrections: Vec<(usize, Pauli)>,
    /// Joint probability of this branch; all branches of a round sum to 1.
    pub branch_probability: f64,
    /// Kept copy-1 state, present on accepted branches with support.
    pub kept_state: Option<DensityMatrix>,
    /// Fidelity of the kept state against `Φ⁺₀`.
    pub kept_fidelity: Option<f64>,
}

/// Branch dump in CSV form: `pattern,readout,probability,kept_fidelity`.
///
/// Readout strings use `0` for `g_L` and `1` for `g_R`; rejected branches
/// leave the readout and fidelity fields empty. Probabilities carry 17
/// significant digits.
pub fn branch_dump_csv(branches: &[RoundOutcome]) -> String {
    let mut out = String::from("pattern,readout,probability,kept_fidelity\n");
    for b in branches {
        let readout = b
            .atom_readout
            .as_ref()
            .map(|bits| bits.iter().map(|&x| if x { '1' } else { '0' }).collect::<String>())
            .unwrap_or_default();
        let fidelity = b
            .kept_fidelity
            .map(|f| format!("{f:.16e}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:.16e},{}\n",
            pattern_string(&b.pattern),
            readout,
            b.branch_probability,
            fidelity
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acceptance_rule_per_mode() {
        use PhotonOutcome::*;
        assert!(pattern_accepted(ErrorMode::BitFlip, &[Flip, Flip, Flip]));
        assert!(pattern_accepted(ErrorMode::BitFlip, &[Keep, Keep, Keep]));
        assert!(!pattern_accepted(ErrorMode::BitFlip, &[Keep, Flip, Keep]));
        assert!(pattern_accepted(ErrorMode::PhaseFlip, &[Flip, Flip, Flip]));
        assert!(!pattern_accepted(ErrorMode::PhaseFlip, &[Keep, Keep, Keep]));
    }

    #[test]
    fn config_validates_register_budget() {
        assert!(RoundConfig::new(7, ErrorMode::BitFlip).validate().is_ok());
        assert!(RoundConfig::new(8, ErrorMode::BitFlip).validate().is_err());
        assert!(RoundConfig::new(1, ErrorMode::BitFlip).validate().is_err());
    }
}
