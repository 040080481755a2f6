use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{AssignmentError, AssignmentResult, CostMatrix, Permutation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    /// Number of row/column normalisation rounds `k`.
    pub iterations: usize,
    /// Softmax temperature τ in `exp(-M / τ)`.
    pub temperature: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            temperature: 1.0,
        }
    }
}

impl SinkhornConfig {
    pub fn new(iterations: usize, temperature: f64) -> Result<Self, AssignmentError> {
        let config = Self {
            iterations,
            temperature,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), AssignmentError> {
        if self.iterations == 0 {
            return Err(AssignmentError::InvalidConfig(
                "sinkhorn iterations must be at least 1".into(),
            ));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(AssignmentError::InvalidConfig(format!(
                "sinkhorn temperature must be positive and finite, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Balances `exp(-M / τ)` towards a doubly stochastic matrix and returns it
/// row-major.
///
/// The iteration runs on log values: each normalisation subtracts a
/// max-shifted log-sum-exp, so no exponential can overflow or underflow to a
/// zero row.
pub fn sinkhorn_balance(
    matrix: &CostMatrix,
    config: &SinkhornConfig,
) -> Result<Vec<f64>, AssignmentError> {
    config.validate()?;
    let n = matrix.size();
    let mut log_p: Vec<f64> = matrix
        .entries()
        .iter()
        .map(|&x| -x / config.temperature)
        .collect();

    let mut column = vec![0.0; n];
    for _ in 0..config.iterations {
        for row in log_p.chunks_exact_mut(n) {
            let lse = log_sum_exp(row);
            row.iter_mut().for_each(|x| *x -= lse);
        }
        for j in 0..n {
            for i in 0..n {
                column[i] = log_p[i * n + j];
            }
            let lse = log_sum_exp(&column);
            for i in 0..n {
                log_p[i * n + j] -= lse;
            }
        }
    }
    Ok(log_p.into_iter().map(f64::exp).collect())
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Approximate assignment by Sinkhorn balancing and greedy rounding.
///
/// Rows are visited in order of their largest balanced weight, highest
/// first, and each takes its heaviest column not yet used. The result is a
/// valid permutation whose cost is never below the Hungarian optimum.
pub fn solve_sinkhorn(
    matrix: &CostMatrix,
    config: &SinkhornConfig,
) -> Result<AssignmentResult, AssignmentError> {
    let start = Instant::now();
    let n = matrix.size();
    let plan = sinkhorn_balance(matrix, config)?;

    let row_max: Vec<f64> = plan
        .chunks_exact(n)
        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| row_max[b].total_cmp(&row_max[a]).then(a.cmp(&b)));

    let mut used = vec![false; n];
    let mut mapping = vec![0; n];
    for i in order {
        let row = &plan[i * n..(i + 1) * n];
        let j = (0..n)
            .filter(|&j| !used[j])
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if row[b] >= row[j] => Some(b),
                _ => Some(j),
            })
            .expect("a free column remains for every row");
        used[j] = true;
        mapping[i] = j;
    }

    let permutation = Permutation::new(mapping).expect("greedy rounding yields a bijection");
    Ok(AssignmentResult {
        total_cost: matrix.permutation_cost(&permutation),
        permutation,
        iterations: config.iterations as u64,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    })
}
