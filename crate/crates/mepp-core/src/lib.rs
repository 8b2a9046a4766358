//! Exact desk-scale simulator and analytic calculator for multipartite
//! entanglement purification of N-atom GHZ mixtures using photonic
//! Faraday-rotation parity checks.
//!
//! The crate is organised around five building blocks:
//!
//! - [`qsim`] — an exact small-register quantum state engine: pure states and
//!   density matrices over labelled qubit registers, tensor composition,
//!   local unitaries, projective measurement with postselection, partial
//!   trace and fidelity.
//! - [`faraday`] — cavity input–output physics: reflection coefficients of an
//!   atom–cavity system, phase extraction, and the diagonal photon–atom gate
//!   realised by a single reflection, plus the derived two-cavity parity
//!   check.
//! - [`ghz`] — GHZ basis machinery: basis enumeration for N parties,
//!   GHZ-diagonal mixtures, noise-channel constructors and the
//!   Hadamard-sandwich basis conversion.
//! - [`protocol`] — the purification rounds themselves: full exact simulation
//!   of one round on two copies, the fast analytic fidelity recursion and
//!   threshold test, multi-round iteration, and a seeded Monte Carlo
//!   cross-check.
//! - [`resources`] — the physical success-probability model composing
//!   detector, fiber and measurement efficiencies with the protocol's
//!   postselection probability.
//!
//! All state values are immutable-after-construction snapshots; operations
//! return new values and are safe to hand across threads. Monte Carlo and
//! sweep entry points fan out over independent seeded trials with `rayon`
//! when the `parallel` feature (on by default) is enabled; sequential
//! variants are always available.

pub mod exec;
pub mod faraday;
pub mod ghz;
pub mod protocol;
pub mod qsim;
pub mod resources;

pub use faraday::{CavityParams, FaradayPhases, GateSource, SingleCavityGate};
pub use ghz::{GhzIndex, GhzMixture, Sign};
pub use protocol::{ErrorMode, RoundConfig, RoundOutcome};
pub use qsim::{CopyTag, DensityMatrix, PureState, QubitLabel, Register};
pub use resources::EfficiencyParams;
