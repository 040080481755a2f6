use std::time::Instant;

use super::{AssignmentError, AssignmentResult, CostMatrix, Permutation};

/// Largest C the brute-force solver accepts unless overridden.
pub const DEFAULT_GUARD: usize = 11;

/// Exhaustive search over all C! permutations with the default guard.
pub fn solve_bruteforce(matrix: &CostMatrix) -> Result<AssignmentResult, AssignmentError> {
    solve_bruteforce_guarded(matrix, DEFAULT_GUARD)
}

/// Exhaustive search over all C! permutations, refusing C above `guard`.
///
/// Permutations are visited in lexicographic order and only a strictly
/// smaller cost replaces the incumbent, so the lexicographically smallest
/// optimal mapping is returned. `iterations` is the number of complete
/// permutations evaluated, always C!.
pub fn solve_bruteforce_guarded(
    matrix: &CostMatrix,
    guard: usize,
) -> Result<AssignmentResult, AssignmentError> {
    let n = matrix.size();
    if n > guard {
        return Err(AssignmentError::TooLarge { size: n, guard });
    }
    let start = Instant::now();

    let mut search = Search {
        matrix,
        used: vec![false; n],
        current: Vec::with_capacity(n),
        best: Vec::new(),
        best_cost: f64::INFINITY,
        evaluated: 0,
    };
    search.descend(0.0);

    let permutation = Permutation::new(search.best).expect("enumeration yields a bijection");
    Ok(AssignmentResult {
        total_cost: matrix.permutation_cost(&permutation),
        permutation,
        iterations: search.evaluated,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    })
}

struct Search<'a> {
    matrix: &'a CostMatrix,
    used: Vec<bool>,
    current: Vec<usize>,
    best: Vec<usize>,
    best_cost: f64,
    evaluated: u64,
}

impl Search<'_> {
    // The prefix sum accumulates in row order from 0.0, the same order as
    // `CostMatrix::permutation_cost`.
    fn descend(&mut self, prefix: f64) {
        let row = self.current.len();
        let n = self.used.len();
        if row == n {
            self.evaluated += 1;
            if prefix < self.best_cost {
                self.best_cost = prefix;
                self.best.clone_from(&self.current);
            }
            return;
        }
        let costs = self.matrix.row(row);
        for (j, &cost) in costs.iter().enumerate() {
            if self.used[j] {
                continue;
            }
            self.used[j] = true;
            self.current.push(j);
            self.descend(prefix + cost);
            self.current.pop();
            self.used[j] = false;
        }
    }
}
