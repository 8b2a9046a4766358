//! Analytic fidelity recursion, purification threshold and iteration.
//!
//! For weight vector `w` over the handled family, one accepted round maps
//! `w_i → w_i² / Σ_j w_j²` with per-attempt success probability `Σ_j w_j²`
//! (two accepted detector patterns, each carrying half of it). The binary
//! special case is the familiar `F' = F² / (F² + (1-F)²)`.

use crate::exec;
use crate::ghz::{GhzIndex, GhzMixture, Sign};
use crate::resources::{physical_efficiency_factor, EfficiencyParams, LossModel};

use super::ProtocolError;

/// One accepted round on the analytic family: squared-and-renormalized
/// weights plus the per-attempt success probability.
///
/// Handled families: all-`Plus` weights (bit-flip purification, any flip
/// patterns) and the binary sign family on `flips = 0` (phase-flip
/// purification).
pub fn recursion_step(m: &GhzMixture) -> Result<(GhzMixture, f64), ProtocolError> {
    let bit_flip_family = m.components().all(|(idx, _)| idx.sign == Sign::Plus);
    let phase_flip_family = m.components().all(|(idx, _)| idx.flips == 0);
    if !bit_flip_family && !phase_flip_family {
        return Err(ProtocolError::OutsideFamily {
            family: "bit-flip (all `+`) or binary phase-flip (flips = 0)",
        });
    }
    let success: f64 = m.components().map(|(_, w)| w * w).sum();
    let next = GhzMixture::new(
        m.n_parties(),
        m.components().map(|(idx, w)| (idx, w * w / success)),
    )?;
    Ok((next, success))
}

/// Verdict of the purification-threshold inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdVerdict {
    /// The leading weight grows under one round.
    Purifiable,
    NotPurifiable,
    /// The discriminant of the threshold inequality is negative: no weight
    /// assignment with these `F₁`, `F₂` can improve, whatever `F₀`.
    OutsideRegime,
}

impl ThresholdVerdict {
    pub fn is_purifiable(self) -> bool {
        self == ThresholdVerdict::Purifiable
    }
}

/// Threshold test for the four-component bit-flip family `(F₀, F₁, F₂,
/// F₃ = 1 - F₀ - F₁ - F₂)`:
///
/// ```text
/// F₀ > ¼ [3 - 2F₁ - 2F₂ - √(1 + 4(F₁+F₂) - 12(F₁²+F₂²) - 8F₁F₂)]
/// ```
///
/// equivalent (inside the weight simplex) to `F₀' > F₀` under
/// [`recursion_step`].
pub fn threshold_check(f0: f64, f1: f64, f2: f64) -> Result<ThresholdVerdict, ProtocolError> {
    let f3 = 1.0 - f0 - f1 - f2;
    for w in [f0, f1, f2, f3] {
        if !(-1e-12..=1.0 + 1e-12).contains(&w) {
            return Err(ProtocolError::BadWeight(w));
        }
    }
    let discriminant = 1.0 + 4.0 * (f1 + f2) - 12.0 * (f1 * f1 + f2 * f2) - 8.0 * f1 * f2;
    if discriminant < 0.0 {
        return Ok(ThresholdVerdict::OutsideRegime);
    }
    let bound = 0.25 * (3.0 - 2.0 * f1 - 2.0 * f2 - discriminant.sqrt());
    Ok(if f0 > bound {
        ThresholdVerdict::Purifiable
    } else {
        ThresholdVerdict::NotPurifiable
    })
}

/// Stopping rule for [`iterate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    Rounds(usize),
    TargetFidelity(f64),
}

/// Snapshot after one accepted round of iteration.
#[derive(Clone, Debug)]
pub struct RecursionState {
    pub weights: GhzMixture,
    pub rounds_done: usize,
    /// This round's per-attempt success probability (physical factors
    /// included when efficiencies are supplied).
    pub round_success_probability: f64,
    /// Expected raw input pairs consumed per surviving output pair:
    /// `Π 2 / p_round` (two pairs per attempt, geometric retries).
    pub pairs_consumed_expected: f64,
    /// `Π p_round` over the rounds so far.
    pub cumulative_success_probability: f64,
}

/// Iterate [`recursion_step`] until the stop rule fires, tracking expected
/// resource consumption. When `efficiencies` are supplied their per-attempt
/// factor multiplies every round's success probability.
///
/// Iteration stops with [`ProtocolError::Stagnation`] when a fidelity
/// target cannot be approached any further (the weights sit at a
/// non-improving point of the map).
pub fn iterate(
    m: &GhzMixture,
    stop: StopRule,
    efficiencies: Option<(&EfficiencyParams, LossModel)>,
) -> Result<Vec<RecursionState>, ProtocolError> {
    const MAX_TARGET_ROUNDS: usize = 10_000;
    let (max_rounds, target) = match stop {
        StopRule::Rounds(r) => (r, None),
        StopRule::TargetFidelity(t) => {
            if !(0.0..1.0).contains(&t) {
                return Err(ProtocolError::BadTarget(t));
            }
            (MAX_TARGET_ROUNDS, Some(t))
        }
    };
    let physical = efficiencies
        .map(|(eff, model)| physical_efficiency_factor(m.n_parties(), eff, model))
        .unwrap_or(1.0);

    let mut states = Vec::new();
    let mut current = m.clone();
    let mut pairs = 1.0;
    let mut cumulative = 1.0;
    for round in 1..=max_rounds {
        if let Some(t) = target {
            if current.target_fidelity() >= t {
                return Ok(states);
            }
        }
        let before = current.target_fidelity();
        let (next, protocol_success) = recursion_step(&current)?;
        if let Some(t) = target {
            if next.target_fidelity() <= before + 1e-15 && next.target_fidelity() < t {
                return Err(ProtocolError::Stagnation { fidelity: before });
            }
        }
        let p_round = protocol_success * physical;
        pairs *= 2.0 / p_round;
        cumulative *= p_round;
        current = next;
        states.push(RecursionState {
            weights: current.clone(),
            rounds_done: round,
            round_success_probability: p_round,
            pairs_consumed_expected: pairs,
            cumulative_success_probability: cumulative,
        });
        if let Some(t) = target {
            if current.target_fidelity() >= t {
                return Ok(states);
            }
        }
    }
    if let Some(t) = target {
        return Err(ProtocolError::Stagnation {
            fidelity: current.target_fidelity().min(t),
        });
    }
    Ok(states)
}

/// Round-report CSV: `round,F0,F1,F2,F3,p_success,pairs_expected,cumulative_p`.
///
/// `F0..F3` are the weights of the four leading `+`-sign flip classes
/// (for the binary phase-flip family, `F1` reports the `Φ⁻₀` weight
/// instead, the only other populated component). 17 significant digits.
pub fn round_report_csv(states: &[RecursionState]) -> String {
    let mut out = String::from("round,F0,F1,F2,F3,p_success,pairs_expected,cumulative_p\n");
    for s in states {
        let phase_family = s.weights.components().all(|(idx, _)| idx.flips == 0);
        let f = |flips: u16| -> f64 {
            if phase_family && flips == 1 {
                s.weights.weight(GhzIndex::new(0, Sign::Minus))
            } else {
                s.weights.weight(GhzIndex::new(flips, Sign::Plus))
            }
        };
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            s.rounds_done,
            f(0),
            f(1),
            f(2),
            f(3),
            s.round_success_probability,
            s.pairs_consumed_expected,
            s.cumulative_success_probability
        ));
    }
    out
}

/// One row of a binary bit-flip fidelity sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub fidelity: f64,
    pub fidelity_after: f64,
    pub success_probability: f64,
}

fn sweep_row(n_parties: usize, f: f64) -> Result<SweepRow, ProtocolError> {
    let m = GhzMixture::binary_bit_flip(n_parties, f)?;
    let (next, success) = recursion_step(&m)?;
    Ok(SweepRow {
        fidelity: f,
        fidelity_after: next.target_fidelity(),
        success_probability: success,
    })
}

/// Evaluate the binary fidelity map over a grid, fanning out across the
/// grid points.
pub fn sweep_binary_fidelity(
    n_parties: usize,
    grid: &[f64],
) -> Result<Vec<SweepRow>, ProtocolError> {
    exec::map_indexed(grid.len(), |i| sweep_row(n_parties, grid[i]))
        .into_iter()
        .collect()
}

/// Single-threaded twin of [`sweep_binary_fidelity`].
pub fn sweep_binary_fidelity_sequential(
    n_parties: usize,
    grid: &[f64],
) -> Result<Vec<SweepRow>, ProtocolError> {
    exec::map_indexed_sequential(grid.len(), |i| sweep_row(n_parties, grid[i]))
        .into_iter()
        .collect()
}

/// Sweep CSV: `F,F_prime,p_success`, 17 significant digits.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("F,F_prime,p_success\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            r.fidelity, r.fidelity_after, r.success_probability
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_component(f0: f64, f1: f64, f2: f64, f3: f64) -> GhzMixture {
        GhzMixture::new(
            3,
            [
                (GhzIndex::new(0, Sign::Plus), f0),
                (GhzIndex::new(1, Sign::Plus), f1),
                (GhzIndex::new(2, Sign::Plus), f2),
                (GhzIndex::new(3, Sign::Plus), f3),
            ],
        )
        .unwrap()
    }

    #[test]
    fn binary_step_squares_the_odds() {
        let m = GhzMixture::binary_bit_flip(3, 0.8).unwrap();
        let (next, success) = recursion_step(&m).unwrap();
        assert!((success - 0.68).abs() < 1e-15);
        assert!((next.target_fidelity() - 16.0 / 17.0).abs() < 1e-15);
    }

    #[test]
    fn pure_target_is_a_fixed_point() {
        let m = GhzMixture::pure_target(3).unwrap();
        let (next, success) = recursion_step(&m).unwrap();
        assert_eq!(next, m);
        assert_eq!(success, 1.0);
    }

    #[test]
    fn uniform_weights_are_a_fixed_point() {
        let m = four_component(0.25, 0.25, 0.25, 0.25);
        let (next, success) = recursion_step(&m).unwrap();
        for (idx, w) in next.components() {
            assert!((w - m.weight(idx)).abs() < 1e-15);
        }
        assert!((success - 0.25).abs() < 1e-15);
    }

    #[test]
    fn four_component_update() {
        let m = four_component(0.7, 0.1, 0.1, 0.1);
        let (next, success) = recursion_step(&m).unwrap();
        assert!((success - 0.52).abs() < 1e-15);
        assert!((next.weight(GhzIndex::new(0, Sign::Plus)) - 0.49 / 0.52).abs() < 1e-12);
        for flips in 1..4u16 {
            assert!((next.weight(GhzIndex::new(flips, Sign::Plus)) - 0.01 / 0.52).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_family_is_rejected() {
        let m = GhzMixture::new(
            3,
            [
                (GhzIndex::new(0, Sign::Plus), 0.6),
                (GhzIndex::new(1, Sign::Minus), 0.4),
            ],
        )
        .unwrap();
        assert!(matches!(
            recursion_step(&m),
            Err(ProtocolError::OutsideFamily { .. })
        ));
    }

    #[test]
    fn threshold_matches_named_points() {
        // Strongly peaked weights are purifiable.
        assert!(threshold_check(0.8, 0.2 / 3.0, 0.2 / 3.0)
            .unwrap()
            .is_purifiable());
        // The uniform fixed point is not.
        assert_eq!(
            threshold_check(0.25, 0.25, 0.25).unwrap(),
            ThresholdVerdict::NotPurifiable
        );
        // Two equal components sit exactly on the fixed line.
        assert_eq!(
            threshold_check(0.5, 0.5, 0.0).unwrap(),
            ThresholdVerdict::NotPurifiable
        );
    }

    #[test]
    fn threshold_flags_negative_discriminant() {
        assert_eq!(
            threshold_check(0.1, 0.45, 0.45).unwrap(),
            ThresholdVerdict::OutsideRegime
        );
    }

    #[test]
    fn threshold_rejects_out_of_range_weights() {
        assert!(threshold_check(0.9, 0.2, 0.2).is_err());
        assert!(threshold_check(-0.1, 0.5, 0.5).is_err());
    }

    #[test]
    fn iterate_three_rounds_from_080() {
        let m = GhzMixture::binary_bit_flip(3, 0.8).unwrap();
        let states = iterate(&m, StopRule::Rounds(3), None).unwrap();
        let fidelities: Vec<f64> = states
            .iter()
            .map(|s| s.weights.target_fidelity())
            .collect();
        // F' = F²/(F²+(1-F)²): odds square each round, 4 → 16 → 256 → 65536.
        let expect = [16.0 / 17.0, 256.0 / 257.0, 65536.0 / 65537.0];
        for (got, want) in fidelities.iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        // Success probabilities: 0.68 and the squared-odds successors.
        assert!((states[0].round_success_probability - 0.68).abs() < 1e-12);
        assert!((states[0].pairs_consumed_expected - 2.0 / 0.68).abs() < 1e-12);
        let p2 = states[1].round_success_probability;
        assert!((states[1].pairs_consumed_expected - 2.0 / 0.68 * 2.0 / p2).abs() < 1e-9);
        assert!(
            (states[2].cumulative_success_probability
                - states.iter().map(|s| s.round_success_probability).product::<f64>())
            .abs()
                < 1e-15
        );
    }

    #[test]
    fn iterate_until_target() {
        let m = GhzMixture::binary_bit_flip(3, 0.8).unwrap();
        let states = iterate(&m, StopRule::TargetFidelity(0.99), None).unwrap();
        assert_eq!(states.len(), 2);
        assert!(states[1].weights.target_fidelity() >= 0.99);
    }

    #[test]
    fn iterate_climbs_monotonically_from_low_fidelity() {
        let m = GhzMixture::binary_bit_flip(3, 0.6).unwrap();
        let states = iterate(&m, StopRule::TargetFidelity(0.99), None).unwrap();
        let mut last = 0.6;
        for s in &states {
            let f = s.weights.target_fidelity();
            assert!(f > last);
            last = f;
        }
        assert!(last >= 0.99);
        assert_eq!(states.len(), 4, "0.6 → 0.692 → 0.835 → 0.962 → 0.9985");
    }

    #[test]
    fn iterate_detects_stagnation() {
        let m = GhzMixture::binary_bit_flip(3, 0.5).unwrap();
        assert!(matches!(
            iterate(&m, StopRule::TargetFidelity(0.9), None),
            Err(ProtocolError::Stagnation { .. })
        ));
        // Target 1.0 exactly is an asymptote.
        let good = GhzMixture::binary_bit_flip(3, 0.8).unwrap();
        assert!(matches!(
            iterate(&good, StopRule::TargetFidelity(1.0), None),
            Err(ProtocolError::BadTarget(_))
        ));
    }

    #[test]
    fn iterate_with_efficiencies_scales_the_success() {
        let m = GhzMixture::binary_bit_flip(3, 0.8).unwrap();
        let eff = EfficiencyParams::cited_defaults();
        let states =
            iterate(&m, StopRule::Rounds(1), Some((&eff, LossModel::AsPublished))).unwrap();
        let factor = physical_efficiency_factor(3, &eff, LossModel::AsPublished);
        assert!((states[0].round_success_probability - 0.68 * factor).abs() < 1e-15);
    }

    #[test]
    fn monotonicity_of_the_binary_map() {
        for i in 1..100 {
            let f = i as f64 / 100.0;
            let m = GhzMixture::binary_bit_flip(3, f).unwrap();
            let (next, _) = recursion_step(&m).unwrap();
            let f_next = next.target_fidelity();
            if f > 0.5 {
                assert!(f_next > f);
            } else if f < 0.5 {
                assert!(f_next < f);
            } else {
                assert!((f_next - f).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sweep_parallel_matches_sequential_bitwise() {
        let grid: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
        let par = sweep_binary_fidelity(3, &grid).unwrap();
        let seq = sweep_binary_fidelity_sequential(3, &grid).unwrap();
        assert_eq!(par, seq);
        assert_eq!(sweep_csv(&par), sweep_csv(&seq));
    }
}
