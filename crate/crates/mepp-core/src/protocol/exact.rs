//! Exact density-matrix simulation of one purification round.
//!
//! The two copies are laid out as `[a₁ … n₁, a₂ … n₂]` (copy-1 atoms in
//! party order, then copy-2 atoms). Photons are injected, reflected and
//! measured one party at a time — the parity gates of different parties
//! commute, so this is equivalent to all photons being in flight at once
//! and keeps the register at `2N + 1` qubits.
//!
//! Every detector pattern and every copy-2 readout is enumerated exactly;
//! nothing is sampled here.
//!
//! A note on signs: with the reflection phases tracked exactly, a party
//! whose atoms sit in `|g_R g_R⟩` flips the photon *with an extra sign*
//! relative to `|g_L g_L⟩`, so the all-flipped branch collapses the
//! correlated component to `(|x…x⟩ + (-1)^N |x̄…x̄⟩)/√2` rather than to the
//! plus combination. The sign is a deterministic function of the party
//! count and the detector pattern and folds into the classical correction
//! rule ([`super::correction_rule`]).

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::faraday::{single_cavity_gate, two_cavity_action, GateSource, SingleCavityGate};
use crate::ghz::{self, GhzMixture};
use crate::qsim::{
    gates, CopyTag, DensityMatrix, MeasureBasis, PureState, QuantumState, QubitLabel, Register,
};

use super::{
    pattern_accepted, ErrorMode, Pauli, PhotonOutcome, ProtocolError, RoundConfig, RoundOutcome,
};

/// Everything an exact round produces.
#[derive(Clone, Debug)]
pub struct ExactRoundReport {
    /// Probability that the detector pattern is accepted.
    pub acceptance_probability: f64,
    /// Copy-1 state mixed over all accepted branches.
    pub kept_density: DensityMatrix,
    /// Fidelity of the kept state against `Φ⁺₀`.
    pub kept_fidelity: f64,
    /// The kept state re-expressed in the GHZ basis, when its leakage is
    /// at or below the configured threshold (always the case for ideal
    /// gates; off-ideal gates may leave it as a density only).
    pub kept_mixture: Option<GhzMixture>,
    /// Frobenius distance of the kept state from its GHZ-diagonal part.
    pub leakage: f64,
    /// Every enumerated branch: rejected patterns at pattern granularity,
    /// accepted ones per (pattern, readout) pair.
    pub branches: Vec<RoundOutcome>,
}

struct RoundContext {
    n: usize,
    mode: ErrorMode,
    gate: SingleCavityGate,
    copy1: Vec<QubitLabel>,
    copy2: Vec<QubitLabel>,
    target: PureState,
    z_gate: Array2<C64>,
    x_gate: Array2<C64>,
}

/// Simulate one round exactly: build `ρ ⊗ ρ` from two independent copies of
/// `input`, run the photon stage over all detector patterns, post-process
/// the accepted ones, and mix the kept copy-1 states.
pub fn simulate_round_exact(
    input: &GhzMixture,
    cfg: &RoundConfig,
) -> Result<ExactRoundReport, ProtocolError> {
    cfg.validate()?;
    if input.n_parties() != cfg.n_parties {
        return Err(ProtocolError::PartyMismatch {
            got: input.n_parties(),
            want: cfg.n_parties,
        });
    }
    let n = cfg.n_parties;
    let ctx = RoundContext {
        n,
        mode: cfg.error_mode,
        gate: single_cavity_gate(&cfg.gate_source)?,
        copy1: Register::atoms(n, CopyTag::First)?.labels().to_vec(),
        copy2: Register::atoms(n, CopyTag::Second)?.labels().to_vec(),
        target: ghz::ghz_state(ghz::GhzIndex::target(), n)?,
        z_gate: gates::pauli_z(),
        x_gate: gates::pauli_x(),
    };

    let rho_1 = ghz::mixture_to_density_on(input, CopyTag::First)?;
    let rho_2 = ghz::mixture_to_density_on(input, CopyTag::Second)?;
    let mut joint = rho_1.tensor(&rho_2)?;
    if ctx.mode == ErrorMode::PhaseFlip {
        // Convert phase errors to bit errors on both copies up front.
        let all: Vec<QubitLabel> = ctx.copy1.iter().chain(&ctx.copy2).copied().collect();
        joint = ghz::hadamard_all(&joint, &all)?;
    }

    let mut leaves = Vec::new();
    photon_stage(&ctx, joint, 0, 1.0, &mut Vec::new(), &mut leaves)?;

    let dim = 1usize << n;
    let mut branches = Vec::new();
    let mut kept_acc: Array2<C64> = Array2::zeros((dim, dim));
    let mut acceptance = 0.0;
    for (pattern, prob, state) in leaves {
        if !pattern_accepted(ctx.mode, &pattern) || state.is_none() {
            branches.push(RoundOutcome {
                pattern,
                atom_readout: None,
                accepted: false,
                corrections: Vec::new(),
                branch_probability: prob,
                kept_state: None,
                kept_fidelity: None,
            });
            continue;
        }
        acceptance += prob;
        post_process(
            &ctx,
            &pattern,
            state.expect("accepted branch has support"),
            prob,
            &mut branches,
            &mut kept_acc,
        )?;
    }

    if acceptance <= 0.0 {
        return Err(ProtocolError::NoAcceptedBranches);
    }
    kept_acc.mapv_inplace(|v| v / acceptance);
    let kept_register = Register::atoms(n, CopyTag::First)?;
    let kept_density = DensityMatrix::new(kept_register, kept_acc)?;
    let kept_fidelity = kept_density.fidelity(&ctx.target)?;
    let projection = ghz::density_to_mixture(&kept_density)?;
    let leakage = projection.leakage;
    let kept_mixture = match projection.into_mixture(cfg.leakage_threshold) {
        Ok(m) => Some(m),
        Err(ghz::GhzError::Leakage { leakage, threshold }) => {
            if matches!(cfg.gate_source, GateSource::Ideal) {
                // Ideal gates must stay on the GHZ diagonal; leaking is a
                // modeling bug, not a physical effect.
                return Err(ProtocolError::Ghz(ghz::GhzError::Leakage {
                    leakage,
                    threshold,
                }));
            }
            None
        }
        Err(e) => return Err(e.into()),
    };

    Ok(ExactRoundReport {
        acceptance_probability: acceptance,
        kept_density,
        kept_fidelity,
        kept_mixture,
        leakage,
        branches,
    })
}

/// Depth-first enumeration of the per-party photon measurements.
fn photon_stage(
    ctx: &RoundContext,
    state: DensityMatrix,
    party: usize,
    prob: f64,
    pattern: &mut Vec<PhotonOutcome>,
    out: &mut Vec<(Vec<PhotonOutcome>, f64, Option<DensityMatrix>)>,
) -> Result<(), ProtocolError> {
    if party == ctx.n {
        out.push((pattern.clone(), prob, Some(state)));
        return Ok(());
    }
    let photon = QubitLabel::photon(party as u8);
    let with_photon = state.tensor(&PureState::photon_plus(party as u8).to_density())?;
    let gated = two_cavity_action(
        &ctx.gate,
        &with_photon,
        photon,
        ctx.copy1[party],
        ctx.copy2[party],
    )?;
    for branch in gated.measure_branches(&[photon], MeasureBasis::Diagonal)? {
        let outcome = if branch.record.outcomes[0] {
            PhotonOutcome::Flip
        } else {
            PhotonOutcome::Keep
        };
        pattern.push(outcome);
        match branch.state {
            Some(post) => {
                photon_stage(ctx, post, party + 1, prob * branch.record.probability, pattern, out)?;
            }
            None => pad_zero_branches(ctx.n, party + 1, pattern, out),
        }
        pattern.pop();
    }
    Ok(())
}

/// Expand an impossible branch into all of its pattern completions so the
/// dump always lists every detector pattern.
fn pad_zero_branches(
    n: usize,
    party: usize,
    pattern: &mut Vec<PhotonOutcome>,
    out: &mut Vec<(Vec<PhotonOutcome>, f64, Option<DensityMatrix>)>,
) {
    if party == n {
        out.push((pattern.clone(), 0.0, None));
        return;
    }
    for outcome in [PhotonOutcome::Keep, PhotonOutcome::Flip] {
        pattern.push(outcome);
        pad_zero_branches(n, party + 1, pattern, out);
        pattern.pop();
    }
}

/// Copy-2 measurement, corrections, and accumulation of the kept state.
fn post_process(
    ctx: &RoundContext,
    pattern: &[PhotonOutcome],
    state: DensityMatrix,
    pattern_prob: f64,
    branches: &mut Vec<RoundOutcome>,
    kept_acc: &mut Array2<C64>,
) -> Result<(), ProtocolError> {
    let all_kept = pattern.iter().all(|&o| o == PhotonOutcome::Keep);
    let mut state = state;
    if ctx.mode == ErrorMode::BitFlip && all_kept {
        // The all-kept branch holds anticorrelated copies; bit-flip every
        // copy-2 atom to line them up with the all-flipped branch.
        for &a in &ctx.copy2 {
            state = state.apply_local(&ctx.x_gate, &[a])?;
        }
    }
    state = ghz::hadamard_all(&state, &ctx.copy2)?;

    for branch in state.measure_branches(&ctx.copy2, MeasureBasis::Computational)? {
        let readout = branch.record.outcomes.clone();
        let corrections = super::correction_rule(ctx.mode, ctx.n, all_kept, &readout);
        let joint_prob = pattern_prob * branch.record.probability;

        let (kept_state, kept_fidelity) = match branch.state {
            Some(mut kept) => {
                for &(party, pauli) in &corrections {
                    let gate = match pauli {
                        Pauli::Z => &ctx.z_gate,
                        Pauli::X => &ctx.x_gate,
                        Pauli::Y => unreachable!("protocol only issues X/Z corrections"),
                    };
                    kept = kept.apply_local(gate, &[ctx.copy1[party]])?;
                }
                if ctx.mode == ErrorMode::PhaseFlip {
                    // Undo the initial basis change on the surviving copy.
                    kept = ghz::hadamard_all(&kept, &ctx.copy1)?;
                }
                let fidelity = kept.fidelity(&ctx.target)?;
                let weighted = kept.matrix() * C64::new(joint_prob, 0.0);
                *kept_acc += &weighted;
                (Some(kept), Some(fidelity))
            }
            None => (None, None),
        };

        branches.push(RoundOutcome {
            pattern: pattern.to_vec(),
            atom_readout: Some(readout),
            accepted: true,
            corrections,
            branch_probability: joint_prob,
            kept_state,
            kept_fidelity,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ghz::{GhzIndex, Sign};

    fn binary_input(f: f64) -> GhzMixture {
        GhzMixture::binary_bit_flip(3, f).unwrap()
    }

    #[test]
    fn pure_input_round_trips_perfectly() {
        let input = GhzMixture::pure_target(3).unwrap();
        let cfg = RoundConfig::new(3, ErrorMode::BitFlip);
        let report = simulate_round_exact(&input, &cfg).unwrap();
        assert!((report.acceptance_probability - 1.0).abs() < 1e-10);
        assert!((report.kept_fidelity - 1.0).abs() < 1e-10);
        let kept = report.kept_mixture.unwrap();
        assert!((kept.target_fidelity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn binary_round_reproduces_the_squared_weights() {
        let report =
            simulate_round_exact(&binary_input(0.8), &RoundConfig::new(3, ErrorMode::BitFlip))
                .unwrap();
        assert!((report.acceptance_probability - 0.68).abs() < 1e-10);
        let kept = report.kept_mixture.unwrap();
        assert!((kept.target_fidelity() - 16.0 / 17.0).abs() < 1e-10);
        assert!((kept.weight(GhzIndex::new(0b01, Sign::Plus)) - 1.0 / 17.0).abs() < 1e-10);
    }

    #[test]
    fn branch_probabilities_sum_to_one() {
        for mode in [ErrorMode::BitFlip, ErrorMode::PhaseFlip] {
            let input = match mode {
                ErrorMode::BitFlip => binary_input(0.8),
                ErrorMode::PhaseFlip => GhzMixture::binary_phase_flip(3, 0.8).unwrap(),
            };
            let report = simulate_round_exact(&input, &RoundConfig::new(3, mode)).unwrap();
            let total: f64 = report.branches.iter().map(|b| b.branch_probability).sum();
            assert!((total - 1.0).abs() < 1e-10, "mode {mode:?}: {total}");
        }
    }

    #[test]
    fn both_uniform_patterns_carry_equal_accepted_weight() {
        let report =
            simulate_round_exact(&binary_input(0.8), &RoundConfig::new(3, ErrorMode::BitFlip))
                .unwrap();
        let weight_of = |want: PhotonOutcome| -> f64 {
            report
                .branches
                .iter()
                .filter(|b| b.accepted && b.pattern.iter().all(|&o| o == want))
                .map(|b| b.branch_probability)
                .sum()
        };
        assert!((weight_of(PhotonOutcome::Flip) - 0.34).abs() < 1e-10);
        assert!((weight_of(PhotonOutcome::Keep) - 0.34).abs() < 1e-10);
    }

    #[test]
    fn sign_mixtures_keep_their_sign_class() {
        // {Φ⁺₀: F, Φ⁻₀: 1-F} under *bit-flip* purification: the cross
        // sign products collapse to Φ⁻₀, so the kept mixture is again
        // binary in the sign with weights (F² + (1-F)², 2F(1-F))/1.
        let input = GhzMixture::binary_phase_flip(3, 0.8).unwrap();
        let report =
            simulate_round_exact(&input, &RoundConfig::new(3, ErrorMode::BitFlip)).unwrap();
        assert!((report.acceptance_probability - 1.0).abs() < 1e-10);
        let kept = report.kept_mixture.unwrap();
        let plus = kept.weight(GhzIndex::new(0, Sign::Plus));
        let minus = kept.weight(GhzIndex::new(0, Sign::Minus));
        assert!((plus - 0.68).abs() < 1e-10);
        assert!((minus - 0.32).abs() < 1e-10);
    }

    #[test]
    fn phase_flip_round_purifies_the_sign() {
        let input = GhzMixture::binary_phase_flip(3, 0.8).unwrap();
        let report =
            simulate_round_exact(&input, &RoundConfig::new(3, ErrorMode::PhaseFlip)).unwrap();
        // Only the all-flipped pattern is kept; each diagonal component
        // feeds it with conditional weight 1/4.
        assert!((report.acceptance_probability - 0.17).abs() < 1e-10);
        let kept = report.kept_mixture.unwrap();
        assert!((kept.target_fidelity() - 16.0 / 17.0).abs() < 1e-9);
        assert!(report.leakage < 1e-10);
    }

    #[test]
    fn rejects_mismatched_party_count() {
        let err = simulate_round_exact(&binary_input(0.9), &RoundConfig::new(4, ErrorMode::BitFlip))
            .unwrap_err();
        assert_eq!(err, ProtocolError::PartyMismatch { got: 3, want: 4 });
    }

    #[test]
    fn uncoupled_gate_cannot_feed_the_phase_flip_selection() {
        // With g = 0 the photon never flips, so the all-flipped pattern
        // required in phase-flip mode has zero probability.
        use crate::faraday::{CavityParams, GateSource};
        let input = GhzMixture::binary_phase_flip(2, 0.8).unwrap();
        let cfg = RoundConfig::new(2, ErrorMode::PhaseFlip).with_gate_source(
            GateSource::FromParams(CavityParams {
                g: 0.0,
                ..CavityParams::ideal()
            }),
        );
        assert_eq!(
            simulate_round_exact(&input, &cfg).unwrap_err(),
            ProtocolError::NoAcceptedBranches
        );
    }
}
