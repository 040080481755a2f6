//! Scale-invariant separation metrics and the matched (permutation-free)
//! losses built on them.
//!
//! SI-SNR follows the zero-mean projection definition. Both signals are
//! mean-subtracted, the estimate is scaled to unit energy, then
//!
//! ```text
//! s_t = (<ŝ, s> / ‖s‖²) · s        e = ŝ − s_t
//! SI-SNR = 10 · log10(‖s_t‖² / (‖e‖² + ε)),   ε = 1e-8
//! ```
//!
//! The result is clamped to [−60, +60] dB, so a perfect match scores +60 and
//! every pairwise cost matrix stays finite. Because the estimate is
//! normalised before ε enters, the score does not depend on the estimate's
//! gain or sign.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{
    solve_bruteforce_guarded, solve_hungarian, AssignmentError, AssignmentResult, CostMatrix,
    Permutation, DEFAULT_GUARD,
};
use crate::signal::AudioSignal;

/// Upper clamp for SI-SNR, in dB.
pub const MAX_DB: f64 = 60.0;
/// Lower clamp for SI-SNR, in dB.
pub const MIN_DB: f64 = -60.0;
/// Residual-energy guard for the zero-error case.
pub const EPSILON: f64 = 1e-8;

// Mean-square energy (relative to the peak) below which a signal is silent.
const SILENCE: f64 = 1e-24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("signal lengths differ: target has {target} samples, estimate has {estimate}")]
    LengthMismatch { target: usize, estimate: usize },
    #[error("target has zero energy after mean removal")]
    ZeroEnergyTarget,
    #[error("pair (target {target}, estimate {estimate}): {source}")]
    Pair {
        target: usize,
        estimate: usize,
        #[source]
        source: Box<MetricError>,
    },
    #[error("invalid separation instance: {0}")]
    InvalidInstance(String),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

/// Signal after peak normalisation and mean removal, with its energy.
struct Centered {
    samples: Vec<f64>,
    energy: f64,
}

impl Centered {
    fn new(signal: &[f64]) -> Self {
        let peak = signal.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if peak == 0.0 {
            return Self {
                samples: vec![0.0; signal.len()],
                energy: 0.0,
            };
        }
        let n = signal.len() as f64;
        let mean = signal.iter().map(|x| x / peak).sum::<f64>() / n;
        let samples: Vec<f64> = signal.iter().map(|x| x / peak - mean).collect();
        let energy = samples.iter().map(|x| x * x).sum();
        Self { samples, energy }
    }

    fn is_silent(&self) -> bool {
        self.energy <= SILENCE * self.samples.len() as f64
    }

    /// Rescales to unit energy; silent signals stay all-zero.
    fn into_unit(mut self) -> Self {
        if self.is_silent() {
            self.samples.iter_mut().for_each(|x| *x = 0.0);
            self.energy = 0.0;
        } else {
            let norm = self.energy.sqrt();
            self.samples.iter_mut().for_each(|x| *x /= norm);
            self.energy = 1.0;
        }
        self
    }
}

fn prepared_target(target: &AudioSignal) -> Result<Centered, MetricError> {
    let t = Centered::new(target.samples());
    if t.is_silent() {
        return Err(MetricError::ZeroEnergyTarget);
    }
    Ok(t)
}

fn prepared_estimate(estimate: &AudioSignal) -> Centered {
    Centered::new(estimate.samples()).into_unit()
}

fn si_snr_prepared(target: &Centered, estimate: &Centered) -> f64 {
    if estimate.energy == 0.0 {
        return MIN_DB;
    }
    let dot: f64 = target
        .samples
        .iter()
        .zip(&estimate.samples)
        .map(|(s, e)| s * e)
        .sum();
    let scale = dot / target.energy;
    let projected = scale * scale * target.energy;
    let residual: f64 = target
        .samples
        .iter()
        .zip(&estimate.samples)
        .map(|(s, e)| {
            let r = e - scale * s;
            r * r
        })
        .sum();
    let db = 10.0 * (projected / (residual + EPSILON)).log10();
    // log10(0) = -inf clamps to the floor; NaN cannot arise from finite,
    // non-negative operands.
    db.clamp(MIN_DB, MAX_DB)
}

/// Scale-invariant SNR of `estimate` against `target`, in dB, clamped to
/// [−60, +60].
pub fn si_snr(target: &AudioSignal, estimate: &AudioSignal) -> Result<f64, MetricError> {
    if target.len() != estimate.len() {
        return Err(MetricError::LengthMismatch {
            target: target.len(),
            estimate: estimate.len(),
        });
    }
    let t = prepared_target(target)?;
    Ok(si_snr_prepared(&t, &prepared_estimate(estimate)))
}

/// Aligned targets, estimates and mixture for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationInstance {
    targets: Vec<AudioSignal>,
    estimates: Vec<AudioSignal>,
    mixture: AudioSignal,
}

impl SeparationInstance {
    pub fn new(
        targets: Vec<AudioSignal>,
        estimates: Vec<AudioSignal>,
        mixture: AudioSignal,
    ) -> Result<Self, MetricError> {
        if targets.len() != estimates.len() {
            return Err(MetricError::InvalidInstance(format!(
                "{} targets but {} estimates",
                targets.len(),
                estimates.len()
            )));
        }
        if targets.len() < 2 {
            return Err(MetricError::InvalidInstance(format!(
                "need at least 2 sources, got {}",
                targets.len()
            )));
        }
        let (rate, len) = (mixture.sample_rate(), mixture.len());
        for (kind, signals) in [("target", &targets), ("estimate", &estimates)] {
            for (i, s) in signals.iter().enumerate() {
                if s.sample_rate() != rate {
                    return Err(MetricError::InvalidInstance(format!(
                        "{kind} {i} has sample rate {} Hz, mixture has {rate} Hz",
                        s.sample_rate()
                    )));
                }
                if s.len() != len {
                    return Err(MetricError::InvalidInstance(format!(
                        "{kind} {i} has {} samples, mixture has {len}",
                        s.len()
                    )));
                }
            }
        }
        Ok(Self {
            targets,
            estimates,
            mixture,
        })
    }

    pub fn num_sources(&self) -> usize {
        self.targets.len()
    }

    pub fn targets(&self) -> &[AudioSignal] {
        &self.targets
    }

    pub fn estimates(&self) -> &[AudioSignal] {
        &self.estimates
    }

    pub fn mixture(&self) -> &AudioSignal {
        &self.mixture
    }
}

/// Per-source SI-SNR of the matched estimate minus the SI-SNR of the raw
/// mixture, both against the same target.
pub fn si_sdr_improvement(
    instance: &SeparationInstance,
    permutation: &Permutation,
) -> Result<Vec<f64>, MetricError> {
    let c = instance.num_sources();
    if permutation.len() != c {
        return Err(MetricError::InvalidInstance(format!(
            "permutation has {} entries for {c} sources",
            permutation.len()
        )));
    }
    let mixture = prepared_estimate(&instance.mixture);
    (0..c)
        .map(|i| {
            let t = prepared_target(&instance.targets[i]).map_err(|e| MetricError::Pair {
                target: i,
                estimate: permutation[i],
                source: Box::new(e),
            })?;
            let est = prepared_estimate(&instance.estimates[permutation[i]]);
            Ok(si_snr_prepared(&t, &est) - si_snr_prepared(&t, &mixture))
        })
        .collect()
}

/// `M[i][j] = −SI-SNR(targets[i], estimates[j])`.
pub fn pairwise_cost_matrix(instance: &SeparationInstance) -> Result<CostMatrix, MetricError> {
    let c = instance.num_sources();
    let targets = instance
        .targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            prepared_target(t).map_err(|e| MetricError::Pair {
                target: i,
                estimate: 0,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let estimates: Vec<_> = instance.estimates.iter().map(prepared_estimate).collect();
    Ok(CostMatrix::from_fn(c, |i, j| {
        -si_snr_prepared(&targets[i], &estimates[j])
    })?)
}

/// Loss under the best target-to-estimate permutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedLoss {
    pub permutation: Permutation,
    /// Mean of `per_pair`.
    pub mean_loss: f64,
    /// `M[i][permutation[i]]` for each target `i`.
    pub per_pair: Vec<f64>,
}

impl MatchedLoss {
    fn from_solution(matrix: &CostMatrix, solution: AssignmentResult) -> Self {
        let per_pair = solution
            .permutation
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &j)| matrix.get(i, j))
            .collect();
        Self {
            mean_loss: solution.total_cost / matrix.size() as f64,
            permutation: solution.permutation,
            per_pair,
        }
    }
}

/// Matched loss found by the Hungarian solver in O(C³).
pub fn hungarian_loss(instance: &SeparationInstance) -> Result<MatchedLoss, MetricError> {
    let m = pairwise_cost_matrix(instance)?;
    let solution = solve_hungarian(&m);
    Ok(MatchedLoss::from_solution(&m, solution))
}

/// Matched loss found by enumerating all C! permutations (classic PIT).
pub fn pit_loss(instance: &SeparationInstance) -> Result<MatchedLoss, MetricError> {
    pit_loss_guarded(instance, DEFAULT_GUARD)
}

pub fn pit_loss_guarded(
    instance: &SeparationInstance,
    guard: usize,
) -> Result<MatchedLoss, MetricError> {
    if instance.num_sources() > guard {
        return Err(AssignmentError::TooLarge {
            size: instance.num_sources(),
            guard,
        }
        .into());
    }
    let m = pairwise_cost_matrix(instance)?;
    let solution = solve_bruteforce_guarded(&m, guard)?;
    Ok(MatchedLoss::from_solution(&m, solution))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    const RATE: u32 = 8000;

    fn sine(freq: f64, phase: f64, len: usize) -> AudioSignal {
        AudioSignal::new(
            (0..len)
                .map(|k| (2.0 * PI * freq * k as f64 / RATE as f64 + phase).sin())
                .collect(),
            RATE,
        )
        .unwrap()
    }

    fn noise(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
        (0..len)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn add(a: &AudioSignal, b: &[f64]) -> AudioSignal {
        AudioSignal::new(
            a.samples().iter().zip(b).map(|(x, y)| x + y).collect(),
            a.sample_rate(),
        )
        .unwrap()
    }

    fn sum(signals: &[AudioSignal]) -> AudioSignal {
        let mut out = vec![0.0; signals[0].len()];
        for s in signals {
            for (o, x) in out.iter_mut().zip(s.samples()) {
                *o += x;
            }
        }
        AudioSignal::new(out, RATE).unwrap()
    }

    /// Independent straight-line SI-SNR (unit-energy estimate, ε = 1e-8).
    fn reference_si_snr(s: &[f64], e: &[f64]) -> f64 {
        let n = s.len() as f64;
        let ms = s.iter().sum::<f64>() / n;
        let me = e.iter().sum::<f64>() / n;
        let s: Vec<f64> = s.iter().map(|x| x - ms).collect();
        let e: Vec<f64> = e.iter().map(|x| x - me).collect();
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        let e: Vec<f64> = e.iter().map(|x| x / norm).collect();
        let ss: f64 = s.iter().map(|x| x * x).sum();
        let alpha = s.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() / ss;
        let target: Vec<f64> = s.iter().map(|x| alpha * x).collect();
        let err: f64 = e.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum();
        let tt: f64 = target.iter().map(|x| x * x).sum();
        (10.0 * (tt / (err + 1e-8)).log10()).clamp(-60.0, 60.0)
    }

    #[test]
    fn self_match_hits_ceiling() {
        let s = sine(440.0, 0.3, 8000);
        assert_eq!(si_snr(&s, &s).unwrap(), MAX_DB);
        for alpha in [1e-6, 0.5, 3.0, 1e6] {
            assert_eq!(si_snr(&s, &s.scaled(alpha).unwrap()).unwrap(), MAX_DB);
        }
    }

    #[test]
    fn errors() {
        let s = sine(440.0, 0.0, 100);
        let short = sine(440.0, 0.0, 99);
        assert_eq!(
            si_snr(&s, &short),
            Err(MetricError::LengthMismatch {
                target: 100,
                estimate: 99
            })
        );
        let flat = AudioSignal::new(vec![0.25; 100], RATE).unwrap();
        assert_eq!(si_snr(&flat, &s), Err(MetricError::ZeroEnergyTarget));
        // A silent estimate is a maximal loss, not an error.
        assert_eq!(si_snr(&s, &flat).unwrap(), MIN_DB);
    }

    #[test]
    fn noisy_sine_recovers_injected_snr() {
        // Monte-Carlo over 100 seeds: noise scaled to exactly 10 dB below the
        // sine, measured before projection.
        let s = sine(440.0, 0.0, 8000);
        let signal_energy = s.energy();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut n = noise(&mut rng, 8000, 1.0);
            let noise_energy: f64 = n.iter().map(|x| x * x).sum();
            let g = (signal_energy / noise_energy / 10.0).sqrt();
            n.iter_mut().for_each(|x| *x *= g);
            let v = si_snr(&s, &add(&s, &n)).unwrap();
            assert!((9.0..=11.0).contains(&v), "seed {seed}: {v}");
        }
    }

    #[test]
    fn matches_reference_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let s: Vec<f64> = noise(&mut rng, 500, 1.0);
            let e: Vec<f64> = s
                .iter()
                .map(|x| 0.7 * x + 0.3 * rng.sample::<f64, _>(StandardNormal) + 0.1)
                .collect();
            let a = si_snr(
                &AudioSignal::new(s.clone(), RATE).unwrap(),
                &AudioSignal::new(e.clone(), RATE).unwrap(),
            )
            .unwrap();
            assert!((a - reference_si_snr(&s, &e)).abs() < 1e-9);
        }
    }

    fn three_sine_instance(noise_scale: f64) -> SeparationInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let targets = vec![
            sine(220.0, 0.1, 4000),
            sine(347.0, 1.1, 4000),
            sine(513.0, 2.1, 4000),
        ];
        let estimates = targets
            .iter()
            .map(|t| add(t, &noise(&mut rng, 4000, noise_scale)))
            .collect();
        let mixture = sum(&targets);
        SeparationInstance::new(targets, estimates, mixture).unwrap()
    }

    #[test]
    fn improvement_matches_straight_line_recomputation() {
        let inst = three_sine_instance(0.05);
        let p = Permutation::identity(3);
        let got = si_sdr_improvement(&inst, &p).unwrap();
        for (i, g) in got.iter().enumerate() {
            let t = inst.targets()[i].samples();
            let want = reference_si_snr(t, inst.estimates()[i].samples())
                - reference_si_snr(t, inst.mixture().samples());
            assert!((g - want).abs() < 1e-9, "{g} vs {want}");
        }
    }

    #[test]
    fn improvement_of_mixture_is_zero() {
        let base = three_sine_instance(0.05);
        let m = base.mixture().clone();
        let inst = SeparationInstance::new(base.targets().to_vec(), vec![m.clone(); 3], m).unwrap();
        let v = si_sdr_improvement(&inst, &Permutation::new(vec![2, 0, 1]).unwrap()).unwrap();
        assert_eq!(v, vec![0.0; 3]);
    }

    #[test]
    fn perfect_two_source_separation_improves() {
        let a = sine(300.0, 0.0, 4000);
        let b = sine(470.0, 0.5, 4000);
        let mixture = sum(&[a.clone(), b.clone()]);
        let inst =
            SeparationInstance::new(vec![a.clone(), b.clone()], vec![a, b], mixture).unwrap();
        let v = si_sdr_improvement(&inst, &Permutation::identity(2)).unwrap();
        assert!(v.iter().all(|&x| x > 0.0), "{v:?}");
    }

    #[test]
    fn cost_matrix_structure() {
        let targets: Vec<_> = [200.0, 290.0, 410.0, 555.0]
            .iter()
            .enumerate()
            .map(|(k, &f)| sine(f, k as f64, 4000))
            .collect();
        let mixture = sum(&targets);
        let inst =
            SeparationInstance::new(targets.clone(), targets.clone(), mixture.clone()).unwrap();
        let m = pairwise_cost_matrix(&inst).unwrap();
        for i in 0..4 {
            assert_eq!(m.get(i, i), -60.0);
            for j in 0..4 {
                if i != j {
                    assert!(m.get(i, j) > -60.0);
                }
            }
        }

        // Estimate j is target j-1, so row i is minimised at column i+1.
        let shifted: Vec<_> = (0..4).map(|j| targets[(j + 3) % 4].clone()).collect();
        let inst = SeparationInstance::new(targets, shifted, mixture).unwrap();
        let m = pairwise_cost_matrix(&inst).unwrap();
        for i in 0..4 {
            let argmin = (0..4)
                .min_by(|&a, &b| m.get(i, a).total_cmp(&m.get(i, b)))
                .unwrap();
            assert_eq!(argmin, (i + 1) % 4);
        }
    }

    #[test]
    fn pair_errors_name_the_offending_target() {
        let good = sine(300.0, 0.0, 100);
        let flat = AudioSignal::new(vec![1.0; 100], RATE).unwrap();
        let inst = SeparationInstance::new(
            vec![good.clone(), flat],
            vec![good.clone(), good.clone()],
            good,
        )
        .unwrap();
        assert!(matches!(
            pairwise_cost_matrix(&inst),
            Err(MetricError::Pair { target: 1, .. })
        ));
    }

    #[test]
    fn instance_validation() {
        let a = sine(300.0, 0.0, 100);
        let b = sine(300.0, 0.0, 90);
        assert!(SeparationInstance::new(vec![a.clone()], vec![a.clone()], a.clone()).is_err());
        assert!(
            SeparationInstance::new(vec![a.clone(), a.clone()], vec![a.clone()], a.clone())
                .is_err()
        );
        assert!(SeparationInstance::new(
            vec![a.clone(), b.clone()],
            vec![a.clone(), a.clone()],
            a.clone()
        )
        .is_err());
        let other_rate = AudioSignal::new(a.samples().to_vec(), 16000).unwrap();
        assert!(SeparationInstance::new(
            vec![a.clone(), other_rate],
            vec![a.clone(), a.clone()],
            a
        )
        .is_err());
    }

    #[test]
    fn hungarian_recovers_known_shuffle() {
        let targets: Vec<_> = (0..6)
            .map(|k| sine(150.0 + 97.0 * k as f64, 0.2 * k as f64, 2000))
            .collect();
        let sigma = [3, 5, 0, 1, 4, 2];
        // estimates[sigma[i]] = targets[i]
        let mut estimates = vec![targets[0].clone(); 6];
        for (i, &j) in sigma.iter().enumerate() {
            estimates[j] = targets[i].clone();
        }
        let inst = SeparationInstance::new(targets.clone(), estimates, sum(&targets)).unwrap();
        let loss = hungarian_loss(&inst).unwrap();
        assert_eq!(loss.permutation.as_slice(), &sigma);
        assert_eq!(loss.mean_loss, -60.0);
        assert_eq!(loss.per_pair, vec![-60.0; 6]);
    }

    #[test]
    fn swapped_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = sine(250.0, 0.0, 2000);
        let b = sine(610.0, 0.4, 2000);
        let estimates = vec![
            add(&b, &noise(&mut rng, 2000, 1e-3)),
            add(&a, &noise(&mut rng, 2000, 1e-3)),
        ];
        let inst =
            SeparationInstance::new(vec![a.clone(), b.clone()], estimates, sum(&[a, b])).unwrap();
        assert_eq!(
            hungarian_loss(&inst).unwrap().permutation.as_slice(),
            &[1, 0]
        );
    }

    #[test]
    fn pit_identity_and_guard() {
        let a = sine(250.0, 0.0, 500);
        let b = sine(610.0, 0.4, 500);
        let inst = SeparationInstance::new(
            vec![a.clone(), b.clone()],
            vec![a.clone(), b.clone()],
            sum(&[a.clone(), b]),
        )
        .unwrap();
        let loss = pit_loss(&inst).unwrap();
        assert!(loss.permutation.is_identity());
        assert_eq!(loss.mean_loss, -60.0);

        let many: Vec<_> = (0..12)
            .map(|k| sine(100.0 + 50.0 * k as f64, 0.0, 64))
            .collect();
        let inst = SeparationInstance::new(many.clone(), many.clone(), many[0].clone()).unwrap();
        assert!(matches!(
            pit_loss(&inst),
            Err(MetricError::Assignment(AssignmentError::TooLarge {
                size: 12,
                guard: 11
            }))
        ));
    }

    fn random_instance(rng: &mut ChaCha8Rng, c: usize, len: usize) -> SeparationInstance {
        let targets: Vec<_> = (0..c)
            .map(|_| AudioSignal::new(noise(rng, len, 1.0), RATE).unwrap())
            .collect();
        let mixture = sum(&targets);
        let estimates = (0..c)
            .map(|_| {
                let w: Vec<f64> = (0..c).map(|_| rng.random_range(0.0..1.0)).collect();
                let mut out = noise(rng, len, 0.3);
                for (t, wt) in targets.iter().zip(&w) {
                    for (o, x) in out.iter_mut().zip(t.samples()) {
                        *o += wt * x;
                    }
                }
                AudioSignal::new(out, RATE).unwrap()
            })
            .collect();
        SeparationInstance::new(targets, estimates, mixture).unwrap()
    }

    #[test]
    fn hungarian_equals_pit_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for c in [2, 3, 4, 5, 8] {
            for _ in 0..5 {
                let inst = random_instance(&mut rng, c, 400);
                let h = hungarian_loss(&inst).unwrap();
                let p = pit_loss(&inst).unwrap();
                assert_eq!(h.mean_loss, p.mean_loss, "C = {c}");
                let mean = h.per_pair.iter().sum::<f64>() / c as f64;
                assert!((h.mean_loss - mean).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn four_source_matrix_agrees_across_solvers() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let inst = random_instance(&mut rng, 4, 800);
        let m = pairwise_cost_matrix(&inst).unwrap();
        assert_eq!(
            solve_hungarian(&m).total_cost,
            crate::assignment::solve_bruteforce(&m).unwrap().total_cost
        );
    }
}
