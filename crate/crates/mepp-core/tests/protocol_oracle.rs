//! Oracle checks for the purification round: the exact density-matrix
//! simulation against the analytic weight recursion, the phase-flip
//! sandwich, cross-combination annihilation, and GHZ-diagonal closure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use mepp_core::faraday::{two_cavity_action, SingleCavityGate};
use mepp_core::ghz::{self, GhzIndex, GhzMixture, Sign};
use mepp_core::protocol::{
    recursion_step, simulate_round_exact, ErrorMode, PhotonOutcome, RoundConfig,
};
use mepp_core::qsim::{CopyTag, MeasureBasis, PureState, QuantumState, QubitLabel};

/// Weight vectors on the simplex with the given resolution (grid step
/// `1/m`), all four components nonnegative.
fn simplex_grid(m: usize) -> Vec<[f64; 4]> {
    let mut points = Vec::new();
    for a in 0..=m {
        for b in 0..=(m - a) {
            for c in 0..=(m - a - b) {
                let d = m - a - b - c;
                points.push([
                    a as f64 / m as f64,
                    b as f64 / m as f64,
                    c as f64 / m as f64,
                    d as f64 / m as f64,
                ]);
            }
        }
    }
    points
}

fn four_component(w: [f64; 4]) -> GhzMixture {
    GhzMixture::new(
        3,
        (0..4u16).map(|flips| (GhzIndex::new(flips, Sign::Plus), w[flips as usize])),
    )
    .unwrap()
}

#[test]
fn exact_round_matches_the_recursion_on_a_coarse_grid() {
    // Every nonnegative weight vector on the 0.1 grid over the three-party
    // bit-flip family.
    let cfg = RoundConfig::new(3, ErrorMode::BitFlip);
    for w in simplex_grid(10) {
        let m = four_component(w);
        let (expected, success) = recursion_step(&m).unwrap();
        let report = simulate_round_exact(&m, &cfg).unwrap();
        assert!(
            (report.acceptance_probability - success).abs() < 1e-9,
            "{w:?}: acceptance {} vs {}",
            report.acceptance_probability,
            success
        );
        let kept = report.kept_mixture.expect("ideal round stays GHZ-diagonal");
        for idx in GhzIndex::all(3) {
            assert!(
                (kept.weight(idx) - expected.weight(idx)).abs() < 1e-9,
                "{w:?}: weight mismatch at {idx:?}"
            );
        }
    }
}

#[test]
fn phase_flip_sandwich_reproduces_the_binary_map() {
    let cfg = RoundConfig::new(3, ErrorMode::PhaseFlip);
    for step in 1..=18 {
        let f = step as f64 * 0.05;
        let input = GhzMixture::binary_phase_flip(3, f).unwrap();
        let report = simulate_round_exact(&input, &cfg).unwrap();
        let expected = f * f / (f * f + (1.0 - f) * (1.0 - f));
        assert!(
            (report.kept_fidelity - expected).abs() < 1e-9,
            "F={f}: {} vs {expected}",
            report.kept_fidelity
        );
        assert!(report.leakage < 1e-10);
    }
}

/// Weight of one detector pattern for a fixed pure two-copy input, computed
/// by forcing every photon measurement along the pattern.
fn pattern_weight(
    copy1: GhzIndex,
    copy2: GhzIndex,
    n: usize,
    pattern: PhotonOutcome,
    hadamard_first: bool,
) -> f64 {
    let gate = SingleCavityGate::ideal();
    let mut state = ghz::ghz_state_on(copy1, n, CopyTag::First)
        .unwrap()
        .tensor(&ghz::ghz_state_on(copy2, n, CopyTag::Second).unwrap())
        .unwrap();
    if hadamard_first {
        let all: Vec<QubitLabel> = state.register().labels().to_vec();
        state = ghz::hadamard_all(&state, &all).unwrap();
    }
    let mut weight = 1.0;
    for party in 0..n {
        let photon = QubitLabel::photon(party as u8);
        let with_photon = state.tensor(&PureState::photon_plus(party as u8)).unwrap();
        let gated = two_cavity_action(
            &gate,
            &with_photon,
            photon,
            QubitLabel::atom(party as u8, CopyTag::First),
            QubitLabel::atom(party as u8, CopyTag::Second),
        )
        .unwrap();
        let flip = pattern == PhotonOutcome::Flip;
        match gated.measure_forced(&[photon], MeasureBasis::Diagonal, &[flip]) {
            Ok((record, post)) => {
                weight *= record.probability;
                state = post;
            }
            Err(_) => return 0.0,
        }
    }
    weight
}

#[test]
fn cross_combinations_never_reach_the_accepted_patterns() {
    // Bit-flip stage: the mixed products of distinct flip classes carry no
    // weight on either uniform detector pattern.
    let target = GhzIndex::target();
    let flipped = GhzIndex::new(0b01, Sign::Plus);
    for (a, b) in [(target, flipped), (flipped, target)] {
        for pattern in [PhotonOutcome::Flip, PhotonOutcome::Keep] {
            let w = pattern_weight(a, b, 3, pattern, false);
            assert!(w < 1e-10, "{a:?}x{b:?} pattern {pattern:?}: weight {w}");
        }
    }
}

#[test]
fn sign_cross_terms_never_flip_every_photon_in_the_sandwich() {
    // Phase-flip stage: after the Hadamard sandwich, products of opposite
    // signs cannot fire the all-flipped pattern.
    let plus = GhzIndex::target();
    let minus = plus.with_sign_flip();
    for (a, b) in [(plus, minus), (minus, plus)] {
        let w = pattern_weight(a, b, 3, PhotonOutcome::Flip, true);
        assert!(w < 1e-10, "{a:?}x{b:?}: weight {w}");
    }
}

#[test]
fn accepted_branches_stay_on_the_ghz_diagonal() {
    // Random GHZ-diagonal inputs, ideal gates, both modes, N = 2..4.
    let mut rng = ChaCha12Rng::seed_from_u64(20_240_613);
    for n in 2..=4usize {
        for mode in [ErrorMode::BitFlip, ErrorMode::PhaseFlip] {
            for _ in 0..3 {
                let mut raw: Vec<(GhzIndex, f64)> = GhzIndex::all(n)
                    .map(|idx| (idx, rng.gen::<f64>()))
                    .collect();
                let total: f64 = raw.iter().map(|(_, w)| w).sum();
                for (_, w) in raw.iter_mut() {
                    *w /= total;
                }
                let input = GhzMixture::new(n, raw).unwrap();
                let report =
                    simulate_round_exact(&input, &RoundConfig::new(n, mode)).unwrap();
                assert!(
                    report.leakage < 1e-9,
                    "n={n} mode={mode:?}: leakage {}",
                    report.leakage
                );
                assert!(report.kept_mixture.is_some());
            }
        }
    }
}

#[test]
fn acceptance_probability_equals_the_sum_of_squared_weights() {
    let cfg = RoundConfig::new(3, ErrorMode::BitFlip);
    for w in [[0.7, 0.1, 0.1, 0.1], [0.4, 0.3, 0.2, 0.1], [0.25; 4]] {
        let m = four_component(w);
        let report = simulate_round_exact(&m, &cfg).unwrap();
        let expected: f64 = w.iter().map(|x| x * x).sum();
        assert!((report.acceptance_probability - expected).abs() < 1e-10);
    }
}

#[test]
fn party_count_consistency_for_small_registers() {
    // The binary map F² / (F² + (1-F)²) holds for every register size; the
    // N = 5 case lives in the acceptance suite with its own timing budget.
    for n in [2usize, 3, 4] {
        let input = GhzMixture::binary_bit_flip(n, 0.7).unwrap();
        let report = simulate_round_exact(&input, &RoundConfig::new(n, ErrorMode::BitFlip)).unwrap();
        let expected = 0.49 / (0.49 + 0.09);
        assert!(
            (report.kept_fidelity - expected).abs() < 1e-9,
            "n={n}: {} vs {expected}",
            report.kept_fidelity
        );
    }
}

#[test]
fn branch_records_are_self_consistent() {
    let input = GhzMixture::binary_bit_flip(3, 0.8).unwrap();
    let report = simulate_round_exact(&input, &RoundConfig::new(3, ErrorMode::BitFlip)).unwrap();
    // 2^3 - 2 rejected pattern rows plus 2 * 2^3 accepted readout rows.
    let rejected = report.branches.iter().filter(|b| !b.accepted).count();
    let accepted = report.branches.iter().filter(|b| b.accepted).count();
    assert_eq!(rejected, 6);
    assert_eq!(accepted, 16);
    let total: f64 = report.branches.iter().map(|b| b.branch_probability).sum();
    assert!((total - 1.0).abs() < 1e-10);
    // Accepted branches carry the kept state and its fidelity.
    for b in report.branches.iter().filter(|b| b.accepted) {
        assert!(b.atom_readout.is_some());
        if b.branch_probability > 0.0 {
            assert!(b.kept_state.is_some());
            let f = b.kept_fidelity.unwrap();
            assert!((0.0..=1.0 + 1e-12).contains(&f));
        }
    }
}

#[test]
fn monte_carlo_tracks_the_exact_round() {
    let input = GhzMixture::binary_bit_flip(3, 0.8).unwrap();
    let cfg = RoundConfig::new(3, ErrorMode::BitFlip).with_seed(99);
    let exact = simulate_round_exact(&input, &cfg).unwrap();
    let mc = mepp_core::protocol::monte_carlo_round(&input, &cfg, 20_000).unwrap();
    assert!((mc.acceptance_rate - exact.acceptance_probability).abs() < 4.0 * mc.acceptance_stderr);
    assert!((mc.kept_fidelity - exact.kept_fidelity).abs() < 4.0 * mc.kept_fidelity_stderr);
}
