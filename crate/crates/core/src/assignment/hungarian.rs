use std::time::Instant;

use super::{AssignmentResult, CostMatrix, Permutation};

const UNMATCHED: usize = usize::MAX;

/// Relative size below which a dual step counts as zero.
const STEP_TOLERANCE: f64 = 1e-12;

/// Exact minimum-cost assignment in O(C³).
///
/// The solver first row-reduces the matrix and matches every row it can to a
/// free column holding that row's minimum. If the row minima fall in distinct
/// columns this already is the optimum and no adjustment is performed. Each
/// remaining row is inserted by a Dijkstra-style shortest augmenting path
/// over reduced costs. Every step of that search with a strictly positive
/// dual update is one cost-adjustment iteration: the potential-form
/// counterpart of "subtract the smallest uncovered value, add it to the
/// doubly covered entries".
///
/// Ties are broken towards the lowest column index, so identical input
/// always yields the identical permutation and iteration count. Only
/// `total_cost` is stable across different but equally optimal solvers.
pub fn solve_hungarian(matrix: &CostMatrix) -> AssignmentResult {
    let start = Instant::now();
    let (mapping, iterations) = kuhn_munkres(matrix);
    let permutation = Permutation::new(mapping).expect("augmenting paths yield a bijection");
    let total_cost = matrix.permutation_cost(&permutation);
    AssignmentResult {
        permutation,
        total_cost,
        iterations,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    }
}

fn kuhn_munkres(m: &CostMatrix) -> (Vec<usize>, u64) {
    let n = m.size();
    let tolerance = STEP_TOLERANCE * m.max_abs().max(1.0);

    // Column `n` is the virtual root of each augmenting search.
    let root = n;
    let mut row_pot: Vec<f64> = m
        .rows()
        .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let mut col_pot = vec![0.0; n + 1];
    let mut row_of_col = vec![UNMATCHED; n + 1];
    let mut col_of_row = vec![UNMATCHED; n];

    for i in 0..n {
        let row = m.row(i);
        if let Some(j) = (0..n).find(|&j| row[j] == row_pot[i] && row_of_col[j] == UNMATCHED) {
            row_of_col[j] = i;
            col_of_row[i] = j;
        }
    }

    let mut iterations = 0u64;
    let mut slack = vec![f64::INFINITY; n + 1];
    let mut visited = vec![false; n + 1];
    let mut came_from = vec![root; n + 1];

    for free_row in 0..n {
        if col_of_row[free_row] != UNMATCHED {
            continue;
        }
        slack.fill(f64::INFINITY);
        visited.fill(false);
        row_of_col[root] = free_row;
        let mut col = root;

        loop {
            visited[col] = true;
            let i = row_of_col[col];
            let row = m.row(i);
            let mut delta = f64::INFINITY;
            let mut next = UNMATCHED;
            for j in 0..n {
                if visited[j] {
                    continue;
                }
                let reduced = row[j] - row_pot[i] - col_pot[j];
                if reduced < slack[j] {
                    slack[j] = reduced;
                    came_from[j] = col;
                }
                if slack[j] < delta {
                    delta = slack[j];
                    next = j;
                }
            }

            if delta > tolerance {
                iterations += 1;
            }
            for j in 0..=n {
                if visited[j] {
                    row_pot[row_of_col[j]] += delta;
                    col_pot[j] -= delta;
                } else {
                    slack[j] -= delta;
                }
            }

            col = next;
            if row_of_col[col] == UNMATCHED {
                break;
            }
        }

        // Flip the alternating path back to the root.
        while col != root {
            let prev = came_from[col];
            row_of_col[col] = row_of_col[prev];
            col = prev;
        }
        for j in 0..n {
            if row_of_col[j] != UNMATCHED {
                col_of_row[row_of_col[j]] = j;
            }
        }
    }

    (col_of_row, iterations)
}
