//! Optimal permutation matching for multi-source signal separation.
//!
//! The crate replaces factorial permutation-invariant training (PIT) with an
//! O(C³) Kuhn-Munkres solve over a matrix of pairwise SI-SNR losses. It also
//! ships the pieces needed to check that claim at desk scale:
//!
//! - [`assignment`]: Hungarian, brute-force and Sinkhorn solvers over square
//!   cost matrices.
//! - [`metrics`]: SI-SNR, SI-SDR improvement, pairwise cost matrices and the
//!   matched (Hungarian / PIT) losses.
//! - [`mixture`]: deterministic synthetic sources, SNR-controlled mixing and
//!   WAV I/O.
//! - [`bench`]: solver timing sweeps, iteration profiles and sorted confusion
//!   exports.

pub mod assignment;
pub mod bench;
pub mod metrics;
pub mod mixture;
pub mod signal;

pub use assignment::{
    permutation_count, solve_bruteforce, solve_hungarian, solve_sinkhorn, AssignmentError,
    AssignmentResult, CostMatrix, Permutation, SinkhornConfig, Solver, DEFAULT_GUARD,
};
pub use metrics::{
    hungarian_loss, pairwise_cost_matrix, pit_loss, si_sdr_improvement, si_snr, MatchedLoss,
    MetricError, SeparationInstance,
};
pub use signal::{AudioSignal, SignalError};
