//! GHZ basis machinery: basis enumeration, GHZ-diagonal mixtures, noise
//! channels and the Hadamard-sandwich basis conversion.
//!
//! The N-party GHZ basis is indexed by a flip pattern over parties `2..N`
//! and a sign:
//!
//! ```text
//! |Φ^±_x⟩ = (|x⟩ ± |x̄⟩)/√2
//! ```
//!
//! where `x` is the computational string with party 1 fixed to `g_L` and the
//! flip pattern applied to the remaining parties, and `x̄` its complement.
//! A flip on party 1 is the same state as flips on all of parties `2..N`,
//! so every basis element has exactly one canonical index. For three
//! parties the canonical indices are, in the order used throughout:
//!
//! | flips | state |
//! |-------|----------------------------------------|
//! | `00`  | `(|g_Lg_Lg_L⟩ ± |g_Rg_Rg_R⟩)/√2` (Φ₀) |
//! | `01`  | `(|g_Lg_Lg_R⟩ ± |g_Rg_Rg_L⟩)/√2` (Φ₁) |
//! | `10`  | `(|g_Lg_Rg_L⟩ ± |g_Rg_Lg_R⟩)/√2` (Φ₂) |
//! | `11`  | `(|g_Lg_Rg_R⟩ ± |g_Rg_Lg_L⟩)/√2` (Φ₃, a flip on party 1) |
//!
//! The mixture file format is one component per line,
//! `flips_bitstring<TAB>sign(+|-)<TAB>weight`, with the bitstring running
//! over parties `2..N` left to right. Weights are validated on load.

use std::collections::BTreeMap;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use std::f64::consts::FRAC_1_SQRT_2;
use thiserror::Error;

use crate::qsim::{
    gates, CopyTag, DensityMatrix, PureState, QsimError, QuantumState, QubitLabel, Register,
};

/// Weight-sum tolerance for mixtures.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Default ceiling on the weight a converted density may carry outside the
/// GHZ diagonal before the conversion refuses to produce a mixture.
pub const DEFAULT_LEAKAGE_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GhzError {
    #[error("party count {0} not supported (need 2 ..= 8 for a single copy)")]
    BadPartyCount(usize),
    #[error("flip pattern {flips:#b} out of range for {n} parties")]
    FlipsOutOfRange { flips: u16, n: usize },
    #[error("weights sum to {0}, expected 1")]
    WeightsNotNormalized(f64),
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("party index {party} out of range for {n} parties")]
    PartyOutOfRange { party: usize, n: usize },
    #[error("noise channel `{0}` is defined for 3 parties only")]
    ThreePartyChannel(&'static str),
    #[error("weight outside the GHZ diagonal is {leakage:.3e}, above the threshold {threshold:.0e}")]
    Leakage { leakage: f64, threshold: f64 },
    #[error("malformed mixture line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error(transparent)]
    State(#[from] QsimError),
}

/// Sign of the GHZ superposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Canonical index of one GHZ basis element.
///
/// `flips` is the flip pattern over parties `2..N` read as a big-endian
/// integer (party 2 is the most significant bit); it equals the canonical
/// basis string of the state. `flips = 0` with `Sign::Plus` is the target
/// state `|Φ⁺₀⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GhzIndex {
    pub flips: u16,
    pub sign: Sign,
}

impl GhzIndex {
    pub fn new(flips: u16, sign: Sign) -> Self {
        GhzIndex { flips, sign }
    }

    /// The target index `Φ⁺₀`.
    pub fn target() -> Self {
        GhzIndex {
            flips: 0,
            sign: Sign::Plus,
        }
    }

    pub fn validate(&self, n_parties: usize) -> Result<(), GhzError> {
        if (self.flips as usize) >= (1usize << (n_parties - 1)) {
            return Err(GhzError::FlipsOutOfRange {
                flips: self.flips,
                n: n_parties,
            });
        }
        Ok(())
    }

    /// Canonical computational string (party 1 bit is 0).
    pub fn canonical_string(&self) -> usize {
        self.flips as usize
    }

    /// Complement string `x̄`.
    pub fn complement_string(&self, n_parties: usize) -> usize {
        ((1usize << n_parties) - 1) ^ (self.flips as usize)
    }

    /// Flip pattern over parties `2..N`, left to right.
    pub fn flips_bit_string(&self, n_parties: usize) -> String {
        (0..n_parties - 1)
            .map(|j| {
                if (self.flips >> (n_parties - 2 - j)) & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    /// Index after a bit flip on `party` (0-based). A flip on party 0 maps
    /// to the complementary canonical pattern.
    pub fn with_bit_flip(&self, party: usize, n_parties: usize) -> GhzIndex {
        let all = (1u16 << (n_parties - 1)) - 1;
        let flips = if party == 0 {
            self.flips ^ all
        } else {
            self.flips ^ (1u16 << (n_parties - 1 - party))
        };
        GhzIndex {
            flips,
            sign: self.sign,
        }
    }

    pub fn with_sign_flip(&self) -> GhzIndex {
        GhzIndex {
            flips: self.flips,
            sign: self.sign.flipped(),
        }
    }

    /// All `2^n` basis indices for `n` parties, in `(flips, sign)` order.
    pub fn all(n_parties: usize) -> impl Iterator<Item = GhzIndex> {
        (0..(1u16 << (n_parties - 1))).flat_map(|flips| {
            [Sign::Plus, Sign::Minus]
                .into_iter()
                .map(move |sign| GhzIndex { flips, sign })
        })
    }
}

/// The GHZ basis state `|Φ^sign_flips⟩` on atoms `0..n` of `copy`.
pub fn ghz_state_on(idx: GhzIndex, n_parties: usize, copy: CopyTag) -> Result<PureState, GhzError> {
    check_party_count(n_parties)?;
    idx.validate(n_parties)?;
    let register = Register::atoms(n_parties, copy)?;
    let mut amps = Array1::zeros(register.dim());
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    amps[idx.canonical_string()] = h;
    amps[idx.complement_string(n_parties)] = h * idx.sign.factor();
    Ok(PureState::new(register, amps)?)
}

/// [`ghz_state_on`] for the first copy.
pub fn ghz_state(idx: GhzIndex, n_parties: usize) -> Result<PureState, GhzError> {
    ghz_state_on(idx, n_parties, CopyTag::First)
}

fn check_party_count(n_parties: usize) -> Result<(), GhzError> {
    if !(2..=8).contains(&n_parties) {
        return Err(GhzError::BadPartyCount(n_parties));
    }
    Ok(())
}

/// A GHZ-diagonal state as a probability vector over the GHZ basis.
#[derive(Clone, Debug, PartialEq)]
pub struct GhzMixture {
    n_parties: usize,
    weights: BTreeMap<GhzIndex, f64>,
}

impl GhzMixture {
    /// Build a mixture, dropping zero-weight entries and validating
    /// normalization.
    pub fn new(
        n_parties: usize,
        weights: impl IntoIterator<Item = (GhzIndex, f64)>,
    ) -> Result<Self, GhzError> {
        check_party_count(n_parties)?;
        let mut map = BTreeMap::new();
        let mut total = 0.0;
        for (idx, w) in weights {
            idx.validate(n_parties)?;
            if w < 0.0 {
                return Err(GhzError::NegativeWeight(w));
            }
            total += w;
            if w > 0.0 {
                *map.entry(idx).or_insert(0.0) += w;
            }
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(GhzError::WeightsNotNormalized(total));
        }
        Ok(GhzMixture {
            n_parties,
            weights: map,
        })
    }

    /// The pure target `|Φ⁺₀⟩⟨Φ⁺₀|`.
    pub fn pure_target(n_parties: usize) -> Result<Self, GhzError> {
        GhzMixture::new(n_parties, [(GhzIndex::target(), 1.0)])
    }

    /// `F` on the target, `1-F` on a single bit-flipped component (the flip
    /// sits on the last party).
    pub fn binary_bit_flip(n_parties: usize, fidelity: f64) -> Result<Self, GhzError> {
        let flipped = GhzIndex::target().with_bit_flip(n_parties - 1, n_parties);
        GhzMixture::new(
            n_parties,
            [(GhzIndex::target(), fidelity), (flipped, 1.0 - fidelity)],
        )
    }

    /// `F` on the target, `1-F` on the sign-flipped target.
    pub fn binary_phase_flip(n_parties: usize, fidelity: f64) -> Result<Self, GhzError> {
        GhzMixture::new(
            n_parties,
            [
                (GhzIndex::target(), fidelity),
                (GhzIndex::target().with_sign_flip(), 1.0 - fidelity),
            ],
        )
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    /// Nonzero components in `(flips, sign)` order.
    pub fn components(&self) -> impl Iterator<Item = (GhzIndex, f64)> + '_ {
        self.weights.iter().map(|(&i, &w)| (i, w))
    }

    pub fn weight(&self, idx: GhzIndex) -> f64 {
        self.weights.get(&idx).copied().unwrap_or(0.0)
    }

    /// Weight on the target component `Φ⁺₀`.
    pub fn target_fidelity(&self) -> f64 {
        self.weight(GhzIndex::target())
    }

    /// Render in the mixture file format, components in canonical order.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (idx, w) in self.components() {
            out.push_str(&format!(
                "{}\t{}\t{:.16e}\n",
                idx.flips_bit_string(self.n_parties),
                idx.sign,
                w
            ));
        }
        out
    }

    /// Parse the mixture file format. Blank lines and `#` comments are
    /// skipped; the party count is inferred from the flip-string length.
    pub fn from_file_string(text: &str) -> Result<Self, GhzError> {
        let mut entries = Vec::new();
        let mut n_parties = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (flips_s, sign_s, weight_s) =
                match (fields.next(), fields.next(), fields.next(), fields.next()) {
                    (Some(a), Some(b), Some(c), None) => (a, b, c),
                    _ => {
                        return Err(GhzError::MalformedLine {
                            line: lineno + 1,
                            reason: "expected `flips<TAB>sign<TAB>weight`".into(),
                        })
                    }
                };
            let n = flips_s.len() + 1;
            if *n_parties.get_or_insert(n) != n {
                return Err(GhzError::MalformedLine {
                    line: lineno + 1,
                    reason: "inconsistent flip-string length".into(),
                });
            }
            let mut flips = 0u16;
            for ch in flips_s.chars() {
                flips = (flips << 1)
                    | match ch {
                        '0' => 0,
                        '1' => 1,
                        _ => {
                            return Err(GhzError::MalformedLine {
                                line: lineno + 1,
                                reason: format!("bad flip character {ch:?}"),
                            })
                        }
                    };
            }
            let sign = match sign_s {
                "+" => Sign::Plus,
                "-" => Sign::Minus,
                _ => {
                    return Err(GhzError::MalformedLine {
                        line: lineno + 1,
                        reason: format!("bad sign {sign_s:?}"),
                    })
                }
            };
            let weight: f64 = weight_s.parse().map_err(|e| GhzError::MalformedLine {
                line: lineno + 1,
                reason: format!("bad weight: {e}"),
            })?;
            entries.push((GhzIndex::new(flips, sign), weight));
        }
        let n = n_parties.ok_or(GhzError::MalformedLine {
            line: 0,
            reason: "empty mixture".into(),
        })?;
        GhzMixture::new(n, entries)
    }
}

/// `Σ w_i |GHZ_i⟩⟨GHZ_i|` on the atoms of `copy`.
pub fn mixture_to_density_on(m: &GhzMixture, copy: CopyTag) -> Result<DensityMatrix, GhzError> {
    let terms: Vec<(f64, PureState)> = m
        .components()
        .map(|(idx, w)| Ok((w, ghz_state_on(idx, m.n_parties, copy)?)))
        .collect::<Result<_, GhzError>>()?;
    Ok(DensityMatrix::mix(&terms)?)
}

/// [`mixture_to_density_on`] for the first copy.
pub fn mixture_to_density(m: &GhzMixture) -> Result<DensityMatrix, GhzError> {
    mixture_to_density_on(m, CopyTag::First)
}

/// Diagonal weights of a density in the GHZ basis, plus the weight left
/// outside the diagonal.
///
/// Because the GHZ basis is complete, the diagonal weights of a trace-1
/// state always sum to 1; what can leak is *coherence between* basis
/// elements. `leakage` is therefore the Frobenius distance between the
/// state and its GHZ-diagonal part, `‖ρ - Σ_i w_i |GHZ_i⟩⟨GHZ_i|‖_F`,
/// which vanishes exactly when the state is GHZ-diagonal.
#[derive(Clone, Debug)]
pub struct GhzProjection {
    pub n_parties: usize,
    pub weights: BTreeMap<GhzIndex, f64>,
    pub leakage: f64,
}

impl GhzProjection {
    /// Renormalized mixture over the diagonal weights, provided the leakage
    /// is at or below `threshold`.
    pub fn into_mixture(self, threshold: f64) -> Result<GhzMixture, GhzError> {
        if self.leakage > threshold {
            return Err(GhzError::Leakage {
                leakage: self.leakage,
                threshold,
            });
        }
        let total: f64 = self.weights.values().sum();
        GhzMixture::new(
            self.n_parties,
            self.weights.into_iter().map(|(i, w)| (i, w / total)),
        )
    }
}

/// Project a density onto the GHZ diagonal: `w_i = ⟨GHZ_i|ρ|GHZ_i⟩`, with
/// the Frobenius distance to the diagonal part reported as leakage.
///
/// The register must be the single-copy atom register of some `n`.
pub fn density_to_mixture(d: &DensityMatrix) -> Result<GhzProjection, GhzError> {
    let n = d.register().len();
    check_party_count(n)?;
    let copy = match d.register().labels().first() {
        Some(QubitLabel::Atom { copy, .. }) => *copy,
        _ => return Err(GhzError::State(QsimError::ShapeMismatch)),
    };
    if d.register() != &Register::atoms(n, copy)? {
        return Err(GhzError::State(QsimError::ShapeMismatch));
    }
    let mut weights = BTreeMap::new();
    let dim = d.register().dim();
    let mut residual = d.matrix().clone();
    for idx in GhzIndex::all(n) {
        let basis = ghz_state_on(idx, n, copy)?;
        let w = d.fidelity(&basis)?;
        let amps = basis.amplitudes();
        for r in 0..dim {
            for c in 0..dim {
                residual[(r, c)] -= C64::new(w, 0.0) * amps[r] * amps[c].conj();
            }
        }
        // Diagonal weights of a positive state are nonnegative; anything
        // below zero here is rounding noise on an empty component.
        if w > 0.0 {
            weights.insert(idx, w);
        }
    }
    let leakage = residual.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    Ok(GhzProjection {
        n_parties: n,
        weights,
        leakage,
    })
}

/// Apply the Hadamard `|g_L⟩ → (|g_L⟩+|g_R⟩)/√2`, `|g_R⟩ → (|g_L⟩-|g_R⟩)/√2`
/// to every target qubit.
pub fn hadamard_all<S: QuantumState>(state: &S, targets: &[QubitLabel]) -> Result<S, GhzError> {
    let h = gates::hadamard();
    let mut out = state.clone();
    for &t in targets {
        out = out.apply_local(&h, &[t])?;
    }
    Ok(out)
}

/// GHZ-diagonal noise channels.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseKind {
    /// Bit flip on one party (0-based) with probability `p`.
    BitFlipOnParty { party: usize, p: f64 },
    /// Sign flip with probability `p`.
    PhaseFlip { p: f64 },
    /// Three-party channel spreading weight over the four bit-flip classes
    /// `Φ_0..Φ_3` with the given weights.
    GeneralBitFlip { weights: [f64; 4] },
    /// Three-party channel spreading weight over the four bit-flip classes
    /// with a sign flip on each.
    AllPhaseFlip { weights: [f64; 4] },
}

/// Apply a noise channel to a GHZ-diagonal state; the result stays
/// GHZ-diagonal.
pub fn noise_channel(kind: &NoiseKind, base: &GhzMixture) -> Result<GhzMixture, GhzError> {
    let n = base.n_parties;
    let mut out: Vec<(GhzIndex, f64)> = Vec::new();
    match kind {
        NoiseKind::BitFlipOnParty { party, p } => {
            check_probability(*p)?;
            if *party >= n {
                return Err(GhzError::PartyOutOfRange { party: *party, n });
            }
            for (idx, w) in base.components() {
                out.push((idx, w * (1.0 - p)));
                out.push((idx.with_bit_flip(*party, n), w * p));
            }
        }
        NoiseKind::PhaseFlip { p } => {
            check_probability(*p)?;
            for (idx, w) in base.components() {
                out.push((idx, w * (1.0 - p)));
                out.push((idx.with_sign_flip(), w * p));
            }
        }
        NoiseKind::GeneralBitFlip { weights } => {
            spread_classes(base, weights, false, &mut out)?;
        }
        NoiseKind::AllPhaseFlip { weights } => {
            spread_classes(base, weights, true, &mut out)?;
        }
    }
    GhzMixture::new(n, out)
}

fn check_probability(p: f64) -> Result<(), GhzError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GhzError::NegativeWeight(p));
    }
    Ok(())
}

fn spread_classes(
    base: &GhzMixture,
    class_weights: &[f64; 4],
    flip_sign: bool,
    out: &mut Vec<(GhzIndex, f64)>,
) -> Result<(), GhzError> {
    if base.n_parties != 3 {
        return Err(GhzError::ThreePartyChannel(if flip_sign {
            "AllPhaseFlip"
        } else {
            "GeneralBitFlip"
        }));
    }
    let total: f64 = class_weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(GhzError::WeightsNotNormalized(total));
    }
    for (idx, w) in base.components() {
        for (class, cw) in class_weights.iter().enumerate() {
            if *cw < 0.0 {
                return Err(GhzError::NegativeWeight(*cw));
            }
            let mut shifted = GhzIndex {
                flips: idx.flips ^ (class as u16),
                sign: idx.sign,
            };
            if flip_sign {
                shifted = shifted.with_sign_flip();
            }
            out.push((shifted, w * cw));
        }
    }
    Ok(())
}
