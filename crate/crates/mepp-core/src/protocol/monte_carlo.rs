//! Seeded Monte Carlo cross-check of the exact round.
//!
//! Each trial draws one pure GHZ component per copy from the input
//! mixture, runs the round with sampled measurement branches, and records
//! acceptance and (when accepted) the kept copy-1 fidelity. Trials are
//! independent: trial `t` uses a ChaCha12 generator seeded with the
//! configured seed and stream index `t`, so results are reproducible for a
//! fixed seed and identical whether trials run sequentially or fanned out
//! (per-trial outputs are collected in trial order and reduced
//! sequentially).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::exec;
use crate::faraday::{single_cavity_gate, two_cavity_action, SingleCavityGate};
use crate::ghz::{self, GhzIndex, GhzMixture};
use crate::qsim::{
    CopyTag, MeasureBasis, PureState, QuantumState, QubitLabel, Register,
};

use super::{pattern_accepted, ErrorMode, Pauli, PhotonOutcome, ProtocolError, RoundConfig};

/// Aggregated Monte Carlo estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct McReport {
    pub trials: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
    /// Binomial standard error `√(p̂(1-p̂)/trials)`.
    pub acceptance_stderr: f64,
    /// Mean kept fidelity over accepted trials (NaN when none accepted).
    pub kept_fidelity: f64,
    /// Sample standard error of the kept fidelity.
    pub kept_fidelity_stderr: f64,
}

#[derive(Clone, Copy, Debug)]
struct TrialOutcome {
    accepted: bool,
    fidelity: f64,
}

/// Run `trials` independent stochastic rounds, fanning trials out when the
/// `parallel` feature is enabled.
pub fn monte_carlo_round(
    input: &GhzMixture,
    cfg: &RoundConfig,
    trials: usize,
) -> Result<McReport, ProtocolError> {
    let runner = TrialRunner::new(input, cfg)?;
    let outcomes = exec::map_indexed(trials, |t| runner.run_trial(t as u64));
    reduce(outcomes, trials)
}

/// Single-threaded twin of [`monte_carlo_round`]; same results bit for bit.
pub fn monte_carlo_round_sequential(
    input: &GhzMixture,
    cfg: &RoundConfig,
    trials: usize,
) -> Result<McReport, ProtocolError> {
    let runner = TrialRunner::new(input, cfg)?;
    let outcomes = exec::map_indexed_sequential(trials, |t| runner.run_trial(t as u64));
    reduce(outcomes, trials)
}

fn reduce(
    outcomes: Vec<Result<TrialOutcome, ProtocolError>>,
    trials: usize,
) -> Result<McReport, ProtocolError> {
    if trials == 0 {
        return Err(ProtocolError::NoTrials);
    }
    let mut accepted = 0usize;
    let mut fid_sum = 0.0;
    let mut fid_sq_sum = 0.0;
    for outcome in outcomes {
        let o = outcome?;
        if o.accepted {
            accepted += 1;
            fid_sum += o.fidelity;
            fid_sq_sum += o.fidelity * o.fidelity;
        }
    }
    let rate = accepted as f64 / trials as f64;
    let kept_fidelity = fid_sum / accepted as f64;
    let kept_fidelity_stderr = if accepted > 1 {
        let var =
            (fid_sq_sum - fid_sum * fid_sum / accepted as f64) / (accepted as f64 - 1.0);
        (var.max(0.0) / accepted as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(McReport {
        trials,
        accepted,
        acceptance_rate: rate,
        acceptance_stderr: (rate * (1.0 - rate) / trials as f64).sqrt(),
        kept_fidelity,
        kept_fidelity_stderr,
    })
}

struct TrialRunner {
    n: usize,
    mode: ErrorMode,
    seed: u64,
    gate: SingleCavityGate,
    components: Vec<(GhzIndex, f64)>,
    copy1: Vec<QubitLabel>,
    copy2: Vec<QubitLabel>,
    target: PureState,
}

impl TrialRunner {
    fn new(input: &GhzMixture, cfg: &RoundConfig) -> Result<Self, ProtocolError> {
        cfg.validate()?;
        if input.n_parties() != cfg.n_parties {
            return Err(ProtocolError::PartyMismatch {
                got: input.n_parties(),
                want: cfg.n_parties,
            });
        }
        Ok(TrialRunner {
            n: cfg.n_parties,
            mode: cfg.error_mode,
            seed: cfg.seed,
            gate: single_cavity_gate(&cfg.gate_source)?,
            components: input.components().collect(),
            copy1: Register::atoms(cfg.n_parties, CopyTag::First)?.labels().to_vec(),
            copy2: Register::atoms(cfg.n_parties, CopyTag::Second)?.labels().to_vec(),
            target: ghz::ghz_state(ghz::GhzIndex::target(), cfg.n_parties)?,
        })
    }

    fn sample_component<R: Rng>(&self, rng: &mut R) -> GhzIndex {
        let roll: f64 = rng.gen();
        let mut acc = 0.0;
        for &(idx, w) in &self.components {
            acc += w;
            if roll < acc {
                return idx;
            }
        }
        self.components.last().expect("mixture is nonempty").0
    }

    fn run_trial(&self, trial: u64) -> Result<TrialOutcome, ProtocolError> {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);

        let first = self.sample_component(&mut rng);
        let second = self.sample_component(&mut rng);
        let mut state = ghz::ghz_state_on(first, self.n, CopyTag::First)?
            .tensor(&ghz::ghz_state_on(second, self.n, CopyTag::Second)?)?;
        if self.mode == ErrorMode::PhaseFlip {
            let all: Vec<QubitLabel> = self.copy1.iter().chain(&self.copy2).copied().collect();
            state = ghz::hadamard_all(&state, &all)?;
        }

        let mut pattern = Vec::with_capacity(self.n);
        for party in 0..self.n {
            let photon = QubitLabel::photon(party as u8);
            let with_photon = state.tensor(&PureState::photon_plus(party as u8))?;
            let gated = two_cavity_action(
                &self.gate,
                &with_photon,
                photon,
                self.copy1[party],
                self.copy2[party],
            )?;
            let (record, post) =
                gated.measure_sampled(&[photon], MeasureBasis::Diagonal, &mut rng)?;
            pattern.push(if record.outcomes[0] {
                PhotonOutcome::Flip
            } else {
                PhotonOutcome::Keep
            });
            state = post;
        }

        if !pattern_accepted(self.mode, &pattern) {
            return Ok(TrialOutcome {
                accepted: false,
                fidelity: 0.0,
            });
        }

        let all_kept = pattern.iter().all(|&o| o == PhotonOutcome::Keep);
        if self.mode == ErrorMode::BitFlip && all_kept {
            let x = crate::qsim::gates::pauli_x();
            for &a in &self.copy2 {
                state = state.apply_local(&x, &[a])?;
            }
        }
        state = ghz::hadamard_all(&state, &self.copy2)?;
        let (record, mut kept) =
            state.measure_sampled(&self.copy2, MeasureBasis::Computational, &mut rng)?;

        let z = crate::qsim::gates::pauli_z();
        for (party, pauli) in super::correction_rule(self.mode, self.n, all_kept, &record.outcomes)
        {
            debug_assert_eq!(pauli, Pauli::Z);
            kept = kept.apply_local(&z, &[self.copy1[party]])?;
        }
        if self.mode == ErrorMode::PhaseFlip {
            kept = ghz::hadamard_all(&kept, &self.copy1)?;
        }
        Ok(TrialOutcome {
            accepted: true,
            fidelity: kept.overlap_sqr(&self.target)?,
        })
    }
}
