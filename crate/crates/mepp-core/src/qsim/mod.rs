//! Exact small-register quantum state engine.
//!
//! States live on a [`Register`]: an ordered list of labelled qubits. The
//! basis ordering is **big-endian in register order** — the first qubit in
//! the register is the most significant bit of the basis index. Atomic basis
//! states map as `|g_L⟩ → 0`, `|g_R⟩ → 1`; photonic polarization as
//! `|L⟩ → 0`, `|R⟩ → 1`. Amplitude and matrix dumps use this index order.
//!
//! Measurements are projective and destructive: measured qubits are removed
//! from the register, because every measurement in the purification protocol
//! is terminal for that qubit (photon detection, copy-2 atom readout).
//!
//! The representation is dense throughout, with a hard cap of
//! [`MAX_QUBITS`] = 16 qubits; exactness is preferred over scalability.

mod density;
mod pure;

pub use density::DensityMatrix;
pub use pure::PureState;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Hard cap on register size (dense representation).
pub const MAX_QUBITS: usize = 16;

/// Tolerance for norm and trace bookkeeping.
pub const NORM_TOL: f64 = 1e-12;

/// Tolerance for unitarity checks and cross-representation equivalence.
pub const UNITARY_TOL: f64 = 1e-10;

/// Which of the two protocol copies an atom belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CopyTag {
    First,
    Second,
}

/// Label of one qubit in a register.
///
/// Atoms carry a party index and a copy tag (the `a₁`/`a₂` subscripts of the
/// protocol); photons carry only the party whose parity they probe. A
/// register holds at most one photon at a time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QubitLabel {
    Atom { party: u8, copy: CopyTag },
    Photon { party: u8 },
}

impl QubitLabel {
    pub fn atom(party: u8, copy: CopyTag) -> Self {
        QubitLabel::Atom { party, copy }
    }

    pub fn photon(party: u8) -> Self {
        QubitLabel::Photon { party }
    }

    pub fn is_photon(&self) -> bool {
        matches!(self, QubitLabel::Photon { .. })
    }
}

impl std::fmt::Display for QubitLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QubitLabel::Atom { party, copy } => {
                let c = match copy {
                    CopyTag::First => 1,
                    CopyTag::Second => 2,
                };
                write!(f, "atom({party},{c})")
            }
            QubitLabel::Photon { party } => write!(f, "photon({party})"),
        }
    }
}

/// Errors raised by the state engine.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum QsimError {
    #[error("duplicate qubit label {0} in register")]
    LabelCollision(QubitLabel),
    #[error("register would hold more than one photon")]
    MultiplePhotons,
    #[error("register size {0} exceeds the supported maximum of {max}", max = MAX_QUBITS)]
    RegisterTooLarge(usize),
    #[error("label {0} not present in register")]
    UnknownLabel(QubitLabel),
    #[error("state vector is not normalized: |norm - 1| = {0:.3e}")]
    NotNormalized(f64),
    #[error("matrix is not Hermitian: max |m - m†| = {0:.3e}")]
    NotHermitian(f64),
    #[error("matrix trace deviates from 1 by {0:.3e}")]
    BadTrace(f64),
    #[error("operator is not unitary: max |u†u - 1| = {0:.3e}")]
    NotUnitary(f64),
    #[error("operator dimension {got} does not match {targets} target qubit(s)")]
    GateShape { got: usize, targets: usize },
    #[error("amplitude vector length {got} is not 2^{qubits}")]
    StateShape { got: usize, qubits: usize },
    #[error("forced measurement branch has zero probability")]
    ImpossibleBranch,
    #[error("measurement outcome has {got} bits for {targets} target qubit(s)")]
    OutcomeShape { got: usize, targets: usize },
    #[error("register shapes do not match")]
    ShapeMismatch,
    #[error("partial trace must keep at least one qubit")]
    EmptyKeep,
}

/// An ordered collection of distinct qubit labels.
///
/// Position 0 is the most significant bit of every basis index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    labels: Vec<QubitLabel>,
}

impl Register {
    pub fn new(labels: Vec<QubitLabel>) -> Result<Self, QsimError> {
        if labels.len() > MAX_QUBITS {
            return Err(QsimError::RegisterTooLarge(labels.len()));
        }
        let mut photons = 0usize;
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(QsimError::LabelCollision(*l));
            }
            if l.is_photon() {
                photons += 1;
            }
        }
        if photons > 1 {
            return Err(QsimError::MultiplePhotons);
        }
        Ok(Register { labels })
    }

    /// Register of a single qubit.
    pub fn single(label: QubitLabel) -> Self {
        Register { labels: vec![label] }
    }

    /// Atoms `party = 0..n` of one copy, in party order.
    pub fn atoms(n_parties: usize, copy: CopyTag) -> Result<Self, QsimError> {
        Register::new((0..n_parties).map(|p| QubitLabel::atom(p as u8, copy)).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Hilbert-space dimension, `2^len`.
    pub fn dim(&self) -> usize {
        1usize << self.labels.len()
    }

    pub fn labels(&self) -> &[QubitLabel] {
        &self.labels
    }

    /// Position of `label` in the register (0 = most significant bit).
    pub fn position(&self, label: QubitLabel) -> Result<usize, QsimError> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or(QsimError::UnknownLabel(label))
    }

    pub fn contains(&self, label: QubitLabel) -> bool {
        self.labels.contains(&label)
    }

    /// Concatenation `self ++ other`, re-validating the invariants.
    pub fn concat(&self, other: &Register) -> Result<Self, QsimError> {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Register::new(labels)
    }

    /// Register with the given labels removed, preserving order.
    pub fn without(&self, removed: &[QubitLabel]) -> Register {
        Register {
            labels: self
                .labels
                .iter()
                .copied()
                .filter(|l| !removed.contains(l))
                .collect(),
        }
    }

    /// Bit mask of the basis index covered by `position`.
    pub(crate) fn mask_of_position(&self, position: usize) -> usize {
        1usize << (self.labels.len() - 1 - position)
    }
}

/// Basis used for a projective measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureBasis {
    /// `{|0⟩, |1⟩}` — the `{|g_L⟩, |g_R⟩}` (or `{|L⟩, |R⟩}`) basis.
    Computational,
    /// `{(|0⟩ + |1⟩)/√2, (|0⟩ - |1⟩)/√2}`; outcome `false` is the `+` state.
    Diagonal,
}

/// Record of one projective measurement branch.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub labels: Vec<QubitLabel>,
    pub outcomes: Vec<bool>,
    pub probability: f64,
}

/// One branch of an exhaustive measurement enumeration.
///
/// `state` is `None` exactly when the branch has zero probability.
#[derive(Clone, Debug)]
pub struct MeasurementBranch<S> {
    pub record: MeasurementRecord,
    pub state: Option<S>,
}

/// Operations shared by [`PureState`] and [`DensityMatrix`].
pub trait QuantumState: Sized + Clone {
    fn register(&self) -> &Register;

    /// Apply a `2^k x 2^k` unitary to `targets` (identity elsewhere).
    ///
    /// `targets[0]` addresses the most significant bit of the operator's
    /// index space.
    fn apply_local(&self, u: &Array2<C64>, targets: &[QubitLabel]) -> Result<Self, QsimError>;

    /// Kronecker composition; registers must stay disjoint.
    fn tensor(&self, other: &Self) -> Result<Self, QsimError>;

    /// Project onto a forced outcome of `targets` in `basis`, renormalize,
    /// and drop the measured qubits from the register.
    fn measure_forced(
        &self,
        targets: &[QubitLabel],
        basis: MeasureBasis,
        outcome: &[bool],
    ) -> Result<(MeasurementRecord, Self), QsimError>;

    /// Enumerate all `2^k` measurement branches of `targets` in `basis`.
    fn measure_branches(
        &self,
        targets: &[QubitLabel],
        basis: MeasureBasis,
    ) -> Result<Vec<MeasurementBranch<Self>>, QsimError>;

    /// Sample one measurement branch through the supplied generator.
    fn measure_sampled<R: rand::Rng + ?Sized>(
        &self,
        targets: &[QubitLabel],
        basis: MeasureBasis,
        rng: &mut R,
    ) -> Result<(MeasurementRecord, Self), QsimError> {
        let branches = self.measure_branches(targets, basis)?;
        let roll: f64 = rng.gen::<f64>();
        let mut acc = 0.0;
        for branch in &branches {
            acc += branch.record.probability;
            if roll < acc {
                if let Some(state) = &branch.state {
                    return Ok((branch.record.clone(), state.clone()));
                }
            }
        }
        // Fall back to the last branch with support (roll == 1 - eps edge).
        branches
            .into_iter()
            .rev()
            .find_map(|b| b.state.map(|s| (b.record, s)))
            .ok_or(QsimError::ImpossibleBranch)
    }
}

pub mod gates {
    //! Small stock of gate matrices used throughout the protocol.

    use super::C64;
    use ndarray::{array, Array2};
    use std::f64::consts::FRAC_1_SQRT_2;

    pub fn identity(qubits: usize) -> Array2<C64> {
        Array2::eye(1usize << qubits)
    }

    /// `|g_L⟩ → (|g_L⟩+|g_R⟩)/√2`, `|g_R⟩ → (|g_L⟩-|g_R⟩)/√2`.
    pub fn hadamard() -> Array2<C64> {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        array![[h, h], [h, -h]]
    }

    pub fn pauli_x() -> Array2<C64> {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        array![[zero, one], [one, zero]]
    }

    pub fn pauli_y() -> Array2<C64> {
        let i = C64::new(0.0, 1.0);
        let zero = C64::new(0.0, 0.0);
        array![[zero, -i], [i, zero]]
    }

    pub fn pauli_z() -> Array2<C64> {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        array![[one, zero], [zero, -one]]
    }
}

/// Check that `u` is unitary within [`UNITARY_TOL`] and shaped for `targets`.
pub(crate) fn validate_unitary(u: &Array2<C64>, n_targets: usize) -> Result<(), QsimError> {
    let dim = 1usize << n_targets;
    if u.nrows() != dim || u.ncols() != dim {
        return Err(QsimError::GateShape {
            got: u.nrows(),
            targets: n_targets,
        });
    }
    let mut max_dev: f64 = 0.0;
    for r in 0..dim {
        for c in 0..dim {
            // (u† u)[r, c]
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..dim {
                acc += u[(k, r)].conj() * u[(k, c)];
            }
            let expect = if r == c { 1.0 } else { 0.0 };
            max_dev = max_dev.max((acc - expect).norm());
        }
    }
    if max_dev > UNITARY_TOL {
        return Err(QsimError::NotUnitary(max_dev));
    }
    Ok(())
}

/// Resolve target labels to register positions, rejecting duplicates.
pub(crate) fn resolve_targets(
    register: &Register,
    targets: &[QubitLabel],
) -> Result<Vec<usize>, QsimError> {
    let mut positions = Vec::with_capacity(targets.len());
    for (i, &t) in targets.iter().enumerate() {
        if targets[..i].contains(&t) {
            return Err(QsimError::LabelCollision(t));
        }
        positions.push(register.position(t)?);
    }
    Ok(positions)
}

/// Map a compact index over the surviving qubits back to a full-register
/// index, inserting the fixed `outcome` bits at the measured positions.
///
/// `measured` pairs (position, bit) and may be in any order.
pub(crate) fn expand_index(
    compact: usize,
    n_qubits: usize,
    measured: &[(usize, bool)],
) -> usize {
    let mut full = 0usize;
    let mut src_bit = n_qubits - measured.len();
    for pos in 0..n_qubits {
        let bit = match measured.iter().find(|(p, _)| *p == pos) {
            Some(&(_, b)) => b,
            None => {
                src_bit -= 1;
                (compact >> src_bit) & 1 == 1
            }
        };
        if bit {
            full |= 1usize << (n_qubits - 1 - pos);
        }
    }
    full
}

/// Gate matrix entries addressed with `targets[0]` as the most significant
/// gate bit: the full-register index for gate row `g` over `base`.
pub(crate) fn scatter_gate_index(base: usize, g: usize, masks: &[usize]) -> usize {
    let k = masks.len();
    let mut idx = base;
    for (j, &m) in masks.iter().enumerate() {
        if (g >> (k - 1 - j)) & 1 == 1 {
            idx |= m;
        }
    }
    idx
}
