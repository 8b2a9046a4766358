//! Pure states as complex amplitude vectors.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use super::{
    expand_index, gates, resolve_targets, scatter_gate_index, validate_unitary, MeasureBasis,
    MeasurementBranch, MeasurementRecord, QsimError, QuantumState, QubitLabel, Register, NORM_TOL,
};

/// A normalized pure state over a labelled register.
///
/// Amplitudes are indexed big-endian in register order (see the module
/// docs); `Σ|amplitude|² = 1` within [`NORM_TOL`] is enforced on
/// construction and preserved by every operation.
#[derive(Clone, Debug)]
pub struct PureState {
    register: Register,
    amplitudes: Array1<C64>,
}

impl PureState {
    /// Build a state from raw amplitudes, validating shape and norm.
    pub fn new(register: Register, amplitudes: Array1<C64>) -> Result<Self, QsimError> {
        if amplitudes.len() != register.dim() {
            return Err(QsimError::StateShape {
                got: amplitudes.len(),
                qubits: register.len(),
            });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QsimError::NotNormalized((norm - 1.0).abs()));
        }
        Ok(PureState {
            register,
            amplitudes,
        })
    }

    /// The computational basis state `|index⟩`.
    pub fn basis_state(register: Register, index: usize) -> Result<Self, QsimError> {
        let dim = register.dim();
        if index >= dim {
            return Err(QsimError::StateShape {
                got: index,
                qubits: register.len(),
            });
        }
        let mut amplitudes = Array1::zeros(dim);
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(PureState {
            register,
            amplitudes,
        })
    }

    /// Single photon in `(|L⟩ + |R⟩)/√2`, as injected before a parity check.
    pub fn photon_plus(party: u8) -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        PureState {
            register: Register::single(QubitLabel::photon(party)),
            amplitudes: ndarray::array![h, h],
        }
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|⟨other|self⟩|²`.
    pub fn overlap_sqr(&self, other: &PureState) -> Result<f64, QsimError> {
        if self.register != other.register {
            return Err(QsimError::ShapeMismatch);
        }
        let inner: C64 = self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| b.conj() * a)
            .sum();
        Ok(inner.norm_sqr())
    }

    /// Promote to the rank-1 density matrix `|ψ⟩⟨ψ|`.
    pub fn to_density(&self) -> super::DensityMatrix {
        let dim = self.register.dim();
        let mut m = Array2::zeros((dim, dim));
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = self.amplitudes[r] * self.amplitudes[c].conj();
            }
        }
        super::DensityMatrix::new_unchecked(self.register.clone(), m)
    }

    /// Text dump, one line per basis index: `index<TAB>re<TAB>im`.
    pub fn dump_amplitudes(&self) -> String {
        let mut out = String::new();
        for (i, a) in self.amplitudes.iter().enumerate() {
            out.push_str(&format!("{i}\t{:.16e}\t{:.16e}\n", a.re, a.im));
        }
        out
    }

    /// Equality of amplitude vectors within `tol`, element-wise.
    pub fn approx_eq(&self, other: &PureState, tol: f64) -> bool {
        self.register == other.register
            && self
                .amplitudes
                .iter()
                .zip(other.amplitudes.iter())
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    fn rotated_for_basis(
        &self,
        positions: &[usize],
        basis: MeasureBasis,
    ) -> Result<PureState, QsimError> {
        match basis {
            MeasureBasis::Computational => Ok(self.clone()),
            MeasureBasis::Diagonal => {
                // H maps (|0⟩ ± |1⟩)/√2 to the computational basis.
                let h = gates::hadamard();
                let mut amps = self.amplitudes.clone();
                for &p in positions {
                    apply_gate_to_amps(&mut amps, &h, &[self.register.mask_of_position(p)]);
                }
                Ok(PureState {
                    register: self.register.clone(),
                    amplitudes: amps,
                })
            }
        }
    }

    fn project(
        &self,
        positions: &[usize],
        targets: &[QubitLabel],
        outcome: &[bool],
    ) -> (f64, Option<PureState>) {
        let n = self.register.len();
        let measured: Vec<(usize, bool)> = positions
            .iter()
            .copied()
            .zip(outcome.iter().copied())
            .collect();
        let new_dim = 1usize << (n - positions.len());
        let mut kept = Array1::zeros(new_dim);
        let mut prob = 0.0;
        for compact in 0..new_dim {
            let full = expand_index(compact, n, &measured);
            let a = self.amplitudes[full];
            prob += a.norm_sqr();
            kept[compact] = a;
        }
        if prob <= 0.0 {
            return (0.0, None);
        }
        let scale = C64::new(1.0 / prob.sqrt(), 0.0);
        kept.mapv_inplace(|a| a * scale);
        let state = PureState {
            register: self.register.without(targets),
            amplitudes: kept,
        };
        (prob, Some(state))
    }
}

impl QuantumState for PureState {
    fn register(&self) -> &Register {
        &self.register
    }

    fn apply_local(&self, u: &Array2<C64>, targets: &[QubitLabel]) -> Result<Self, QsimError> {
        let positions = resolve_targets(&self.register, targets)?;
        validate_unitary(u, positions.len())?;
        let masks: Vec<usize> = positions
            .iter()
            .map(|&p| self.register.mask_of_position(p))
            .collect();
        let mut amps = self.amplitudes.clone();
        apply_gate_to_amps(&mut amps, u, &masks);
        Ok(PureState {
            register: self.register.clone(),
            amplitudes: amps,
        })
    }

    fn tensor(&self, other: &Self) -> Result<Self, QsimError> {
        let register = self.register.concat(&other.register)?;
        let (da, db) = (self.register.dim(), other.register.dim());
        let mut amps = Array1::zeros(da * db);
        for ia in 0..da {
            for ib in 0..db {
                amps[ia * db + ib] = self.amplitudes[ia] * other.amplitudes[ib];
            }
        }
        Ok(PureState {
            register,
            amplitudes: amps,
        })
    }

    fn measure_forced(
        &self,
        targets: &[QubitLabel],
        basis: MeasureBasis,
        outcome: &[bool],
    ) -> Result<(MeasurementRecord, Self), QsimError> {
        if outcome.len() != targets.len() {
            return Err(QsimError::OutcomeShape {
                got: outcome.len(),
                targets: targets.len(),
            });
        }
        let positions = resolve_targets(&self.register, targets)?;
        let rotated = self.rotated_for_basis(&positions, basis)?;
        let (prob, state) = rotated.project(&positions, targets, outcome);
        let state = state.ok_or(QsimError::ImpossibleBranch)?;
        Ok((
            MeasurementRecord {
                labels: targets.to_vec(),
                outcomes: outcome.to_vec(),
                probability: prob,
            },
            state,
        ))
    }

    fn measure_branches(
        &self,
        targets: &[QubitLabel],
        basis: MeasureBasis,
    ) -> Result<Vec<MeasurementBranch<Self>>, QsimError> {
        let positions = resolve_targets(&self.register, targets)?;
        let rotated = self.rotated_for_basis(&positions, basis)?;
        let k = targets.len();
        let mut branches = Vec::with_capacity(1 << k);
        for raw in 0..(1usize << k) {
            let outcome: Vec<bool> = (0..k).map(|j| (raw >> (k - 1 - j)) & 1 == 1).collect();
            let (prob, state) = rotated.project(&positions, targets, &outcome);
            branches.push(MeasurementBranch {
                record: MeasurementRecord {
                    labels: targets.to_vec(),
                    outcomes: outcome,
                    probability: prob,
                },
                state,
            });
        }
        Ok(branches)
    }
}

/// In-place application of a `2^k x 2^k` operator, `masks[0]` being the most
/// significant gate bit.
pub(crate) fn apply_gate_to_amps(amps: &mut Array1<C64>, u: &Array2<C64>, masks: &[usize]) {
    let k = masks.len();
    let gate_dim = 1usize << k;
    let full_mask: usize = masks.iter().copied().fold(0, |a, m| a | m);
    let dim = amps.len();
    let mut scratch = vec![C64::new(0.0, 0.0); gate_dim];
    for base in 0..dim {
        if base & full_mask != 0 {
            continue;
        }
        for (g, slot) in scratch.iter_mut().enumerate() {
            *slot = amps[scatter_gate_index(base, g, masks)];
        }
        for r in 0..gate_dim {
            let mut acc = C64::new(0.0, 0.0);
            for (c, &s) in scratch.iter().enumerate() {
                acc += u[(r, c)] * s;
            }
            amps[scatter_gate_index(base, r, masks)] = acc;
        }
    }
}
