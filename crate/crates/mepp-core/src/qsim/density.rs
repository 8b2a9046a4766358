//! Density matrices over labelled registers.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::{
    expand_index, gates, resolve_targets, scatter_gate_index, validate_unitary, MeasureBasis,
    MeasurementBranch, MeasurementRecord, PureState, QsimError, QuantumState, QubitLabel,
    Register, NORM_TOL,
};

/// A Hermitian, trace-1 operator over a labelled register.
///
/// Hermiticity (within [`NORM_TOL`]) and unit trace are validated on
/// construction; positivity is an invariant of the operations that build
/// densities here (mixing, unitary conjugation, projection) and is probed
/// by the test suites rather than re-checked on every instance.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    register: Register,
    matrix: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(register: Register, matrix: Array2<C64>) -> Result<Self, QsimError> {
        let dim = register.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(QsimError::StateShape {
                got: matrix.nrows(),
                qubits: register.len(),
            });
        }
        let mut herm_dev: f64 = 0.0;
        for r in 0..dim {
            for c in r..dim {
                herm_dev = herm_dev.max((matrix[(r, c)] - matrix[(c, r)].conj()).norm());
            }
        }
        if herm_dev > NORM_TOL {
            return Err(QsimError::NotHermitian(herm_dev));
        }
        let trace: C64 = (0..dim).map(|i| matrix[(i, i)]).sum();
        if (trace.re - 1.0).abs() > NORM_TOL || trace.im.abs() > NORM_TOL {
            return Err(QsimError::BadTrace((trace - 1.0).norm()));
        }
        Ok(DensityMatrix { register, matrix })
    }

    pub(crate) fn new_unchecked(register: Register, matrix: Array2<C64>) -> Self {
        DensityMatrix { register, matrix }
    }

    /// Uniform mixture of `|ψ⟩⟨ψ|` terms with the given weights.
    pub fn mix(terms: &[(f64, PureState)]) -> Result<Self, QsimError> {
        let first = terms.first().ok_or(QsimError::EmptyKeep)?;
        let register = first.1.register().clone();
        let dim = register.dim();
        let mut m = Array2::zeros((dim, dim));
        let mut total = 0.0;
        for (w, psi) in terms {
            if psi.register() != &register {
                return Err(QsimError::ShapeMismatch);
            }
            total += w;
            let amps = psi.amplitudes();
            for r in 0..dim {
                for c in 0..dim {
                    m[(r, c)] += C64::new(*w, 0.0) * amps[r] * amps[c].conj();
                }
            }
        }
        if (total - 1.0).abs() > NORM_TOL {
            return Err(QsimError::BadTrace((total - 1.0).abs()));
        }
        Ok(DensityMatrix { register, matrix: m })
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        (0..self.register.dim())
            .map(|i| self.matrix[(i, i)].re)
            .sum()
    }

    /// `⟨target|ρ|target⟩`, real in `[0, 1]`.
    pub fn fidelity(&self, target: &PureState) -> Result<f64, QsimError> {
        if &self.register != target.register() {
            return Err(QsimError::ShapeMismatch);
        }
        let amps = target.amplitudes();
        let dim = self.register.dim();
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..dim {
            for c in 0..dim {
                acc += amps[r].conj() * self.matrix[(r, c)] * amps[c];
            }
        }
        Ok(acc.re)
    }

    /// Reduced state on `keep`, in original register order.
    pub fn partial_trace(&self, keep: &[QubitLabel]) -> Result<DensityMatrix, QsimError> {
        if keep.is_empty() {
            return Err(QsimError::EmptyKeep);
        }
        let keep_positions = resolve_targets(&self.register, keep)?;
        let n = self.register.len();
        let traced_positions: Vec<usize> =
            (0..n).filter(|p| !keep_positions.contains(p)).collect();
        let kept_register = Register {
            labels: self
                .register
                .labels()
                .iter()
                .copied()
                .filter(|l| keep.contains(l))
                .collect(),
        };
        let dim_keep = kept_register.dim();
        let dim_traced = 1usize << traced_positions.len();
        // Map a compact kept index to its bit assignment in register order.
        let kept_sorted: Vec<usize> = {
            let mut v = keep_positions.clone();
            v.sort_unstable();
            v
        };
        let mut out = Array2::zeros((dim_keep, dim_keep));
        for a in 0..dim_keep {
            for b in 0..dim_keep {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..dim_traced {
                    let row = interleave(a, t, n, &kept_sorted, &traced_positions);
                    let col = interleave(b, t, n, &kept_sorted, &traced_positions);
                    acc += self.matrix[(row, col)];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(DensityMatrix {
            register: kept_register,
            matrix: out,
        })
    }

    /// Text dump, row-major: one line per flattened index `row*dim + col`,
    /// `index<TAB>re<TAB>im`.
    pub fn dump_matrix(&self) -> String {
        let dim = self.register.dim();
        let mut out = String::new();
        for r in 0..dim {
            for c in 0..dim {
                let v = self.matrix[(r, c)];
                out.push_str(&format!("{}\t{:.16e}\t{:.16e}\n", r * dim + c, v.re, v.im));
            }
        }
        out
    }

    pub fn approx_eq(&self, other: &DensityMatrix, tol: f64) -> bool {
        self.register == other.register
            && self
                .matrix
                .iter()
                .zip(other.matrix.iter())
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    fn rotated_for_basis(
        &self,
        positions: &[usize],
        basis: MeasureBasis,
    ) -> Result<DensityMatrix, QsimError> {
        match basis {
            MeasureBasis::Computational => Ok(self.clone()),
            MeasureBasis::Diagonal => {
                let h = gates::hadamard();
                let mut m = self.matrix.clone();
                for &p in positions {
                    conjugate_in_place(&mut m, &h, &[self.register.mask_of_position(p)]);
                }
                Ok(DensityMatrix {
                    register: self.register.clone(),
                    matrix: m,
                })
            }
        }
    }

    fn project(
        &self,
        positions: &[usize],
        targets: &[QubitLabel],
        outcome: &[bool],
    ) -> (f64, Option<DensityMatrix>) {
        let n = self.register.len();
        let measured: Vec<(usize, bool)> = positions
            .iter()
            .copied()
            .zip(outcome.iter().copied())
            .collect();
        let new_dim = 1usize << (n - positions.len());
        let full: Vec<usize> = (0..new_dim)
            .map(|compact| expand_index(compact, n, &measured))
            .collect();
        let dim = self.register.dim();
        let data = self.matrix.as_slice().expect("density storage is row-major");
        let prob: f64 = full.iter().map(|&i| data[i * dim + i].re).sum();
        if prob <= 0.0 {
            return (0.0, None);
        }
        let mut out = Array2::zeros((new_dim, new_dim));
        let out_data = out.as_slice_mut().expect("fresh array is row-major");
        let inv = C64::new(1.0 / prob, 0.0);
        for a in 0..new_dim {
            let src_row = full[a] * dim;
            let dst_row = a * new_dim;
            for b in 0..new_dim {
                out_data[dst_row + b] = data[src_row + full[b]] * inv;
            }
        }
        let state = DensityMatrix {
            register: self.register.without(targets),
            matrix: out,
        };
        (prob, Some(state))
    }
}

impl QuantumState for DensityMatrix {
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
        let mut m = self.matrix.clone();
        conjugate_in_place(&mut m, u, &masks);
        Ok(DensityMatrix {
            register: self.register.clone(),
            matrix: m,
        })
    }

    fn tensor(&self, other: &Self) -> Result<Self, QsimError> {
        let register = self.register.concat(&other.register)?;
        Ok(DensityMatrix {
            register,
            matrix: ndarray::linalg::kron(&self.matrix, &other.matrix),
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

/// `m ← (U ⊗ 1) m (U ⊗ 1)†` with `U` addressed by `masks`.
///
/// Both passes run along contiguous rows of the (row-major) storage: the
/// left multiplication rewrites blocks of `2^k` rows as linear
/// combinations, the right one gathers within each row.
fn conjugate_in_place(m: &mut Array2<C64>, u: &Array2<C64>, masks: &[usize]) {
    let k = masks.len();
    let gate_dim = 1usize << k;
    let full_mask: usize = masks.iter().copied().fold(0, |a, b| a | b);
    let dim = m.nrows();
    let zero = C64::new(0.0, 0.0);
    let data = m.as_slice_mut().expect("density storage is row-major");

    // Left multiply by U.
    let mut row_block = vec![zero; gate_dim * dim];
    for base in 0..dim {
        if base & full_mask != 0 {
            continue;
        }
        for g in 0..gate_dim {
            let src = scatter_gate_index(base, g, masks);
            row_block[g * dim..(g + 1) * dim].copy_from_slice(&data[src * dim..(src + 1) * dim]);
        }
        for r in 0..gate_dim {
            let dst = scatter_gate_index(base, r, masks);
            let dst_row = &mut data[dst * dim..(dst + 1) * dim];
            for (c, src_row) in row_block.chunks_exact(dim).enumerate() {
                let coeff = u[(r, c)];
                if c == 0 {
                    for (out, &s) in dst_row.iter_mut().zip(src_row) {
                        *out = coeff * s;
                    }
                } else {
                    for (out, &s) in dst_row.iter_mut().zip(src_row) {
                        *out += coeff * s;
                    }
                }
            }
        }
    }

    // Right multiply by U†: gather within each (contiguous) row.
    let mut scratch = vec![zero; gate_dim];
    for row in 0..dim {
        let row_slice = &mut data[row * dim..(row + 1) * dim];
        for base in 0..dim {
            if base & full_mask != 0 {
                continue;
            }
            for (g, slot) in scratch.iter_mut().enumerate() {
                *slot = row_slice[scatter_gate_index(base, g, masks)];
            }
            for r in 0..gate_dim {
                let mut acc = zero;
                for (c, &s) in scratch.iter().enumerate() {
                    acc += u[(r, c)].conj() * s;
                }
                row_slice[scatter_gate_index(base, r, masks)] = acc;
            }
        }
    }
}

/// Rebuild a full basis index from compact kept / traced sub-indices.
fn interleave(
    kept_compact: usize,
    traced_compact: usize,
    n: usize,
    kept_sorted: &[usize],
    traced_sorted: &[usize],
) -> usize {
    let mut idx = 0usize;
    let mut ki = 0usize;
    let mut ti = 0usize;
    for pos in 0..n {
        let bit = if ki < kept_sorted.len() && kept_sorted[ki] == pos {
            let b = (kept_compact >> (kept_sorted.len() - 1 - ki)) & 1;
            ki += 1;
            b
        } else {
            let b = (traced_compact >> (traced_sorted.len() - 1 - ti)) & 1;
            ti += 1;
            b
        };
        idx = (idx << 1) | bit;
    }
    idx
}
