//! Matrix-scale reproductions of the solver comparisons: timing sweeps
//! (factorial PIT vs cubic Hungarian vs Sinkhorn), iteration profiles
//! against matrix difficulty, and sorted confusion-matrix exports.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{
    permutation_count, solve_hungarian, AssignmentError, CostMatrix, SinkhornConfig, Solver,
    DEFAULT_GUARD,
};

/// Random cost entries are drawn uniformly from this range (dB).
pub const ENTRY_RANGE: (f64, f64) = (-30.0, 30.0);

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark input: {0}")]
    Input(String),
    #[error("{solver} failed at C = {c}, trial {trial}: {source}")]
    Solver {
        solver: &'static str,
        c: usize,
        trial: usize,
        #[source]
        source: AssignmentError,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// Timing summary for one solver at one C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub solver: String,
    pub c: usize,
    pub trials: usize,
    /// `None` when the solver was skipped.
    pub median_ns: Option<u64>,
    pub p95_ns: Option<u64>,
    pub mean_iterations: Option<f64>,
    /// C! when C is within the exact reporting range, else `None`.
    pub permutation_count: Option<u128>,
    /// Why the solver did not run.
    pub skipped: Option<String>,
}

impl BenchReport {
    pub fn is_skipped(&self) -> bool {
        self.skipped.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub solvers: Vec<Solver>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            solvers: vec![
                Solver::Hungarian,
                Solver::Sinkhorn(SinkhornConfig::default()),
                Solver::BruteForce {
                    guard: DEFAULT_GUARD,
                },
            ],
        }
    }
}

/// Matrix with entries uniform in [`ENTRY_RANGE`].
pub fn random_matrix(rng: &mut impl Rng, c: usize) -> CostMatrix {
    CostMatrix::from_fn(c, |_, _| rng.random_range(ENTRY_RANGE.0..ENTRY_RANGE.1))
        .expect("uniform entries are finite")
}

/// Per-trial generator; depends only on (seed, c, trial).
fn trial_rng(seed: u64, c: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(trial as u64);
    rng
}

/// Times each solver on `trials` random matrices per C.
///
/// Trials run in parallel; each solve is timed on its own worker and the
/// results are joined in trial order. A brute-force solver whose guard is
/// below C produces a skipped report with no timings.
pub fn sweep_solvers(
    c_values: &[usize],
    trials: usize,
    seed: u64,
    options: &SweepOptions,
) -> Result<Vec<BenchReport>, BenchError> {
    if c_values.is_empty() {
        return Err(BenchError::Input("no C values given".into()));
    }
    if trials == 0 {
        return Err(BenchError::Input("trials must be at least 1".into()));
    }
    if let Some(c) = c_values.iter().find(|&&c| c == 0) {
        return Err(BenchError::Input(format!("C must be positive, got {c}")));
    }

    let mut reports = Vec::new();
    for &c in c_values {
        let matrices: Vec<CostMatrix> = (0..trials)
            .into_par_iter()
            .map(|t| random_matrix(&mut trial_rng(seed, c, t), c))
            .collect();
        let count = u32::try_from(c)
            .ok()
            .and_then(|c| permutation_count(c).ok());

        for solver in &options.solvers {
            if let Solver::BruteForce { guard } = *solver {
                if c > guard {
                    reports.push(BenchReport {
                        solver: solver.name().into(),
                        c,
                        trials,
                        median_ns: None,
                        p95_ns: None,
                        mean_iterations: None,
                        permutation_count: count,
                        skipped: Some(format!("C = {c} exceeds the brute-force guard of {guard}")),
                    });
                    continue;
                }
            }
            let runs: Vec<(u64, u64)> = matrices
                .par_iter()
                .enumerate()
                .map(|(trial, m)| {
                    solver
                        .solve(m)
                        .map(|r| (r.elapsed_ns, r.iterations))
                        .map_err(|source| BenchError::Solver {
                            solver: solver.name(),
                            c,
                            trial,
                            source,
                        })
                })
                .collect::<Result<_, _>>()?;
            let mut times: Vec<u64> = runs.iter().map(|r| r.0).collect();
            times.sort_unstable();
            let mean_iterations = runs.iter().map(|r| r.1 as f64).sum::<f64>() / trials as f64;
            reports.push(BenchReport {
                solver: solver.name().into(),
                c,
                trials,
                median_ns: Some(median(&times)),
                p95_ns: Some(percentile(&times, 0.95)),
                mean_iterations: Some(mean_iterations),
                permutation_count: count,
                skipped: None,
            });
        }
    }
    Ok(reports)
}

/// Lower middle element of a sorted slice.
pub fn median(sorted: &[u64]) -> u64 {
    sorted[(sorted.len() - 1) / 2]
}

/// Nearest-rank percentile of a sorted slice, `q` in (0, 1].
pub fn percentile(sorted: &[u64], q: f64) -> u64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn write_jsonl(reports: &[BenchReport], mut out: impl Write) -> Result<(), BenchError> {
    for r in reports {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub const CSV_HEADER: [&str; 8] = [
    "solver",
    "c",
    "trials",
    "median_ns",
    "p95_ns",
    "mean_iterations",
    "permutations",
    "skipped",
];

pub fn write_csv(reports: &[BenchReport], out: impl Write) -> Result<(), BenchError> {
    fn opt<T: ToString>(v: &Option<T>) -> String {
        v.as_ref().map(T::to_string).unwrap_or_default()
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.solver.clone(),
            r.c.to_string(),
            r.trials.to_string(),
            opt(&r.median_ns),
            opt(&r.p95_ns),
            opt(&r.mean_iterations),
            opt(&r.permutation_count),
            r.skipped.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean Hungarian iterations at one difficulty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationPoint {
    pub difficulty: f64,
    pub mean_iterations: f64,
}

/// Cost at the planted optimum of the easy end of the profile.
const PLANTED_MATCH: f64 = ENTRY_RANGE.0;
const PLANTED_MISMATCH: f64 = ENTRY_RANGE.1;

/// Mean Hungarian iteration count for matrices `(1 − d)·D + d·R`.
///
/// `D` has the planted optimum on its diagonal (−30 there, +30 elsewhere);
/// `R` is uniform random. Trial `t` uses the same `R` at every difficulty,
/// so the points along a profile are directly comparable.
pub fn iteration_profile(
    difficulties: &[f64],
    c: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<IterationPoint>, BenchError> {
    if c < 2 {
        return Err(BenchError::Input(format!("C must be at least 2, got {c}")));
    }
    if trials == 0 {
        return Err(BenchError::Input("trials must be at least 1".into()));
    }
    if let Some(d) = difficulties.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(BenchError::Input(format!(
            "difficulty {d} is outside [0, 1]"
        )));
    }

    let randoms: Vec<CostMatrix> = (0..trials)
        .into_par_iter()
        .map(|t| random_matrix(&mut trial_rng(seed, c, t), c))
        .collect();

    Ok(difficulties
        .iter()
        .map(|&d| {
            let total: u64 = randoms
                .par_iter()
                .map(|r| solve_hungarian(&interpolated(r, d)).iterations)
                .sum();
            IterationPoint {
                difficulty: d,
                mean_iterations: total as f64 / trials as f64,
            }
        })
        .collect())
}

fn interpolated(random: &CostMatrix, d: f64) -> CostMatrix {
    CostMatrix::from_fn(random.size(), |i, j| {
        let planted = if i == j {
            PLANTED_MATCH
        } else {
            PLANTED_MISMATCH
        };
        (1.0 - d) * planted + d * random.get(i, j)
    })
    .expect("convex combination of finite entries")
}

/// A cost matrix reordered for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionExport {
    /// `matrix[k][l] = input[row_order[k]][col_order[l]]`.
    pub matrix: CostMatrix,
    pub row_order: Vec<usize>,
    pub col_order: Vec<usize>,
}

/// Solves `matrix` and reorders it so the matched pairs lie on the diagonal,
/// sorted by matched cost from highest to lowest.
pub fn export_confusion(matrix: &CostMatrix) -> ConfusionExport {
    let solution = solve_hungarian(matrix);
    let p = solution.permutation.as_slice();
    let mut row_order: Vec<usize> = (0..matrix.size()).collect();
    row_order.sort_by(|&a, &b| {
        matrix
            .get(b, p[b])
            .total_cmp(&matrix.get(a, p[a]))
            .then(a.cmp(&b))
    });
    let col_order: Vec<usize> = row_order.iter().map(|&i| p[i]).collect();
    let reordered =
        CostMatrix::from_fn(matrix.size(), |k, l| matrix.get(row_order[k], col_order[l]))
            .expect("reordering keeps entries finite");
    ConfusionExport {
        matrix: reordered,
        row_order,
        col_order,
    }
}

impl ConfusionExport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("export serialises")
    }

    /// Binary grayscale PGM (P5), `cell` pixels per entry. The lowest cost
    /// maps to black and the highest to white; a constant matrix is mid-gray.
    pub fn to_pgm(&self, cell: usize) -> Vec<u8> {
        let cell = cell.max(1);
        let n = self.matrix.size();
        let entries = self.matrix.entries();
        let lo = entries.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = entries.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let level = |x: f64| -> u8 {
            if hi > lo {
                (255.0 * (x - lo) / (hi - lo)).round() as u8
            } else {
                128
            }
        };
        let side = n * cell;
        let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
        out.reserve(side * side);
        for row in self.matrix.rows() {
            let line: Vec<u8> = row
                .iter()
                .flat_map(|&x| std::iter::repeat_n(level(x), cell))
                .collect();
            for _ in 0..cell {
                out.extend_from_slice(&line);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn percentiles() {
        let v = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
        assert_eq!(median(&v), 5);
        assert_eq!(percentile(&v, 0.95), 10);
        assert_eq!(median(&[7]), 7);
        assert_eq!(percentile(&[7], 0.95), 7);
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&v, 0.95), 95);
    }

    #[test]
    fn sweep_at_five_includes_bruteforce() {
        let reports = sweep_solvers(&[5], 3, 1, &SweepOptions::default()).unwrap();
        assert_eq!(reports.len(), 3);
        let brute = reports.iter().find(|r| r.solver == "bruteforce").unwrap();
        assert_eq!(brute.permutation_count, Some(120));
        assert_eq!(brute.mean_iterations, Some(120.0));
        assert!(!brute.is_skipped());
        for r in &reports {
            assert!(r.median_ns.unwrap() <= r.p95_ns.unwrap());
        }
    }

    #[test]
    fn sweep_skips_bruteforce_above_guard() {
        let reports = sweep_solvers(&[15, 20], 2, 1, &SweepOptions::default()).unwrap();
        for r in &reports {
            if r.solver == "bruteforce" {
                assert!(r.is_skipped());
                assert_eq!(r.median_ns, None);
                assert_eq!(r.p95_ns, None);
                assert_eq!(r.mean_iterations, None);
            } else {
                assert!(r.median_ns.is_some());
            }
            assert_eq!(
                r.permutation_count,
                Some(permutation_count(r.c as u32).unwrap())
            );
        }
    }

    #[test]
    fn sweep_input_validation() {
        let o = SweepOptions::default();
        assert!(sweep_solvers(&[], 1, 0, &o).is_err());
        assert!(sweep_solvers(&[3], 0, 0, &o).is_err());
        assert!(sweep_solvers(&[0], 1, 0, &o).is_err());
    }

    #[test]
    fn csv_and_jsonl_layout() {
        let reports = sweep_solvers(&[12], 2, 0, &SweepOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "solver,c,trials,median_ns,p95_ns,mean_iterations,permutations,skipped"
        );
        let brute = lines.find(|l| l.starts_with("bruteforce")).unwrap();
        assert!(
            brute.starts_with("bruteforce,12,2,,,,479001600,"),
            "{brute}"
        );

        let mut buf = Vec::new();
        write_jsonl(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        for line in text.lines() {
            let back: BenchReport = serde_json::from_str(line).unwrap();
            assert_eq!(back.c, 12);
        }
    }

    #[test]
    fn profile_starts_at_zero() {
        let points = iteration_profile(&[0.0, 1.0], 8, 50, 4).unwrap();
        assert_eq!(points[0].mean_iterations, 0.0);
        assert!(points[1].mean_iterations > 0.0);
        assert!(iteration_profile(&[1.5], 8, 1, 0).is_err());
        assert!(iteration_profile(&[0.5], 1, 1, 0).is_err());
        assert!(iteration_profile(&[0.5], 4, 0, 0).is_err());
    }

    #[test]
    fn confusion_of_planted_matrix() {
        let costs = [-12.0, -25.0, -3.0, -18.0];
        // Planted optimum i -> (i + 1) % 4.
        let m = CostMatrix::from_fn(4, |i, j| {
            if j == (i + 1) % 4 {
                costs[i]
            } else {
                20.0 + (i * 4 + j) as f64
            }
        })
        .unwrap();
        let e = export_confusion(&m);
        let diag: Vec<f64> = (0..4).map(|k| e.matrix.get(k, k)).collect();
        assert_eq!(diag, vec![-3.0, -12.0, -18.0, -25.0]);
        assert_eq!(e.row_order, vec![2, 0, 3, 1]);
        assert_eq!(e.col_order, vec![3, 1, 0, 2]);
        assert_eq!(
            sorted(e.matrix.entries().to_vec()),
            sorted(m.entries().to_vec())
        );
    }

    #[test]
    fn confusion_of_constant_matrix() {
        let m = CostMatrix::from_fn(5, |_, _| 2.5).unwrap();
        let e = export_confusion(&m);
        assert_eq!(
            sorted(e.matrix.entries().to_vec()),
            sorted(m.entries().to_vec())
        );
        let pgm = e.to_pgm(1);
        assert!(pgm.starts_with(b"P5\n5 5\n255\n"));
        assert!(pgm[pgm.len() - 25..].iter().all(|&b| b == 128));
    }

    #[test]
    fn pgm_dark_diagonal() {
        let m = CostMatrix::from_fn(3, |i, j| if i == j { -60.0 } else { 10.0 }).unwrap();
        let pgm = export_confusion(&m).to_pgm(2);
        let header = b"P5\n6 6\n255\n";
        assert!(pgm.starts_with(header));
        let pixels = &pgm[header.len()..];
        assert_eq!(pixels.len(), 36);
        for y in 0..6 {
            for x in 0..6 {
                let want = if x / 2 == y / 2 { 0 } else { 255 };
                assert_eq!(pixels[y * 6 + x], want);
            }
        }
    }
}
