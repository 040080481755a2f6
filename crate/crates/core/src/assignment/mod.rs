//! Linear sum assignment over square cost matrices.
//!
//! Three solvers share one result type:
//!
//! - [`solve_hungarian`]: exact, O(C³) Kuhn-Munkres with row potentials and
//!   shortest augmenting paths.
//! - [`solve_bruteforce`]: exact, enumerates all C! permutations. This is
//!   what PIT computes, and it serves as the test oracle.
//! - [`solve_sinkhorn`]: approximate; entropic balancing followed by greedy
//!   rounding to a hard permutation.
//!
//! All solvers are pure functions of their input and may be called from any
//! number of threads.

mod bruteforce;
mod cost_matrix;
mod hungarian;
mod permutation;
mod sinkhorn;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bruteforce::{solve_bruteforce, solve_bruteforce_guarded, DEFAULT_GUARD};
pub use cost_matrix::CostMatrix;
pub use hungarian::solve_hungarian;
pub use permutation::Permutation;
pub use sinkhorn::{sinkhorn_balance, solve_sinkhorn, SinkhornConfig};

/// Largest `c` accepted by [`permutation_count`].
pub const MAX_COUNTED: u32 = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("cost matrix is empty")]
    Empty,
    #[error("cost matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("cost matrix is not square: {0}")]
    Shape(String),
    #[error("C = {size} exceeds the brute-force guard of {guard}")]
    TooLarge { size: usize, guard: usize },
    #[error("permutation count is only reported for C <= {max}, got {c}")]
    CountOutOfRange { c: u32, max: u32 },
    #[error("{0:?} is not a permutation")]
    InvalidPermutation(Vec<usize>),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

/// Output of every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    pub permutation: Permutation,
    /// Σ_i M[i][permutation[i]].
    pub total_cost: f64,
    /// Hungarian: cost-adjustment rounds. Brute force: permutations
    /// evaluated. Sinkhorn: balancing rounds.
    pub iterations: u64,
    pub elapsed_ns: u64,
}

impl AssignmentResult {
    pub fn elapsed(&self) -> std::time::Duration {
        std::time::Duration::from_nanos(self.elapsed_ns)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("result serialises")
    }
}

/// Solver selection, used by the CLI and the benchmark harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    Hungarian,
    BruteForce { guard: usize },
    Sinkhorn(SinkhornConfig),
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::Hungarian => "hungarian",
            Solver::BruteForce { .. } => "bruteforce",
            Solver::Sinkhorn(_) => "sinkhorn",
        }
    }

    pub fn solve(&self, matrix: &CostMatrix) -> Result<AssignmentResult, AssignmentError> {
        match *self {
            Solver::Hungarian => Ok(solve_hungarian(matrix)),
            Solver::BruteForce { guard } => solve_bruteforce_guarded(matrix, guard),
            Solver::Sinkhorn(config) => solve_sinkhorn(matrix, &config),
        }
    }
}

/// Solves independent matrices in parallel. Results are in input order.
pub fn solve_batch(
    matrices: &[CostMatrix],
    solver: &Solver,
) -> Vec<Result<AssignmentResult, AssignmentError>> {
    matrices.par_iter().map(|m| solver.solve(m)).collect()
}

/// `c!` exactly, for `0 <= c <= 25`.
pub fn permutation_count(c: u32) -> Result<u128, AssignmentError> {
    if c > MAX_COUNTED {
        return Err(AssignmentError::CountOutOfRange {
            c,
            max: MAX_COUNTED,
        });
    }
    Ok((1..=c as u128).product())
}
