//! Deterministic synthetic sources, SNR-controlled mixing and WAV I/O.
//!
//! Everything generated here is a pure function of the [`MixSpec`] (including
//! its seed), so an instance can be rebuilt bit-for-bit from a manifest.

pub mod wav;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{AudioSignal, SignalError};
pub use wav::{read_wav, write_wav, WavError};

/// Peak amplitude of every generated source.
pub const SOURCE_PEAK: f64 = 0.9;

/// Largest mixture magnitude; the biggest positive 16-bit PCM value.
pub const FULL_SCALE: f64 = 32767.0 / 32768.0;

/// Fractional part of the golden ratio; consecutive multiples are well spread
/// over [0, 1).
const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Error)]
pub enum MixError {
    #[error("invalid mix spec: {0}")]
    Spec(String),
    #[error("{kinds} source kinds given for {sources} sources")]
    KindCount { kinds: usize, sources: usize },
    #[error("MixSpec yields zero samples")]
    ZeroLength,
    #[error("no sources given")]
    Empty,
    #[error("source {index} has zero energy")]
    ZeroEnergySource { index: usize },
    #[error("signals do not match: {0}")]
    Mismatch(String),
    #[error("source file {path}: {source}")]
    SourceFile {
        path: PathBuf,
        #[source]
        source: WavError,
    },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrRange {
    pub low: f64,
    pub high: f64,
}

impl SnrRange {
    pub fn new(low: f64, high: f64) -> Result<Self, MixError> {
        let r = Self { low, high };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<(), MixError> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low <= self.high) {
            return Err(MixError::Spec(format!(
                "SNR range [{}, {}] is not a finite interval",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

impl Default for SnrRange {
    fn default() -> Self {
        Self {
            low: 0.0,
            high: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub num_sources: usize,
    pub sample_rate: u32,
    pub duration: f64,
    pub snr_range: SnrRange,
    pub seed: u64,
}

impl MixSpec {
    /// 8 kHz, 4 s, SNRs in [0, 5] dB.
    pub fn new(num_sources: usize, seed: u64) -> Self {
        Self {
            num_sources,
            sample_rate: 8000,
            duration: 4.0,
            snr_range: SnrRange::default(),
            seed,
        }
    }

    pub fn num_samples(&self) -> usize {
        (self.duration * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), MixError> {
        if self.num_sources < 2 {
            return Err(MixError::Spec(format!(
                "need at least 2 sources, got {}",
                self.num_sources
            )));
        }
        if self.sample_rate == 0 {
            return Err(MixError::Spec("sample rate must be positive".into()));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(MixError::Spec(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        self.snr_range.validate()?;
        if self.num_samples() == 0 {
            return Err(MixError::ZeroLength);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "path")]
pub enum SourceKind {
    /// Random fundamental plus its second and third harmonics.
    SineBundle,
    /// Linear frequency sweep.
    Chirp,
    /// Gaussian noise through a band-pass filter.
    BandNoise,
    /// Samples from a WAV file, cut or zero-padded to the `MixSpec` length.
    File(PathBuf),
}

impl SourceKind {
    pub const SYNTHETIC: [SourceKind; 3] = [
        SourceKind::SineBundle,
        SourceKind::Chirp,
        SourceKind::BandNoise,
    ];
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sine" | "sine-bundle" => Ok(SourceKind::SineBundle),
            "chirp" => Ok(SourceKind::Chirp),
            "noise" | "band-noise" => Ok(SourceKind::BandNoise),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(SourceKind::File(path.into())),
                _ => Err(format!(
                    "unknown source kind `{s}` (expected sine, chirp, noise or file:PATH)"
                )),
            },
        }
    }
}

fn source_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generates one signal per entry of `kinds`, each `spec.num_samples()` long
/// and peak-normalised to 0.9.
///
/// Source `i` draws from its own ChaCha stream, and its base frequency sits
/// at position `offset + i·φ` (mod 1) of the usable band, where `offset` is
/// seeded. Fundamentals from one call are therefore spread apart, which
/// keeps synthetic sources mutually decorrelated.
pub fn generate_sources(
    spec: &MixSpec,
    kinds: &[SourceKind],
) -> Result<Vec<AudioSignal>, MixError> {
    spec.validate()?;
    if kinds.len() != spec.num_sources {
        return Err(MixError::KindCount {
            kinds: kinds.len(),
            sources: spec.num_sources,
        });
    }
    let len = spec.num_samples();
    let rate = spec.sample_rate as f64;
    let offset: f64 = source_rng(spec.seed, u64::MAX).random();
    let (f_lo, f_hi) = (0.0125 * rate, 0.1625 * rate);

    kinds
        .iter()
        .enumerate()
        .map(|(i, kind)| {
            let mut rng = source_rng(spec.seed, i as u64);
            let slot = (offset + i as f64 * GOLDEN).fract();
            let base = f_lo + slot * (f_hi - f_lo);
            let raw = match kind {
                SourceKind::SineBundle => sine_bundle(&mut rng, base, rate, len),
                SourceKind::Chirp => chirp(&mut rng, base, rate, len),
                SourceKind::BandNoise => band_noise(&mut rng, base, rate, len),
                SourceKind::File(path) => file_source(path, spec.sample_rate, len)?,
            };
            peak_normalized(raw, spec.sample_rate).map_err(|e| match e {
                MixError::ZeroEnergySource { .. } => MixError::ZeroEnergySource { index: i },
                e => e,
            })
        })
        .collect()
}

fn sine_bundle(rng: &mut ChaCha8Rng, f0: f64, rate: f64, len: usize) -> Vec<f64> {
    let partials: Vec<(f64, f64, f64)> = [1.0, 0.5, 0.25]
        .iter()
        .enumerate()
        .map(|(h, &amp)| (f0 * (h + 1) as f64, amp, rng.random_range(0.0..2.0 * PI)))
        .collect();
    (0..len)
        .map(|k| {
            let t = k as f64 / rate;
            partials
                .iter()
                .map(|&(f, a, phase)| a * (2.0 * PI * f * t + phase).sin())
                .sum()
        })
        .collect()
}

fn chirp(rng: &mut ChaCha8Rng, f_start: f64, rate: f64, len: usize) -> Vec<f64> {
    let f_end = f_start * 2f64.powf(rng.random_range(-1.0..1.0));
    let phase: f64 = rng.random_range(0.0..2.0 * PI);
    let span = len as f64 / rate;
    (0..len)
        .map(|k| {
            let t = k as f64 / rate;
            (phase + 2.0 * PI * (f_start * t + (f_end - f_start) * t * t / (2.0 * span))).sin()
        })
        .collect()
}

/// White noise through an RBJ band-pass biquad (0 dB peak gain, Q = 3).
fn band_noise(rng: &mut ChaCha8Rng, center: f64, rate: f64, len: usize) -> Vec<f64> {
    let w0 = 2.0 * PI * center / rate;
    let alpha = w0.sin() / (2.0 * 3.0);
    let a0 = 1.0 + alpha;
    let (b0, b2) = (alpha / a0, -alpha / a0);
    let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    (0..len)
        .map(|_| {
            let x: f64 = rng.sample(StandardNormal);
            let y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            y
        })
        .collect()
}

fn file_source(path: &PathBuf, rate: u32, len: usize) -> Result<Vec<f64>, MixError> {
    let signal = read_wav(path).map_err(|source| MixError::SourceFile {
        path: path.clone(),
        source,
    })?;
    if signal.sample_rate() != rate {
        return Err(MixError::Mismatch(format!(
            "{} is {} Hz, MixSpec asks for {rate} Hz",
            path.display(),
            signal.sample_rate()
        )));
    }
    let mut samples = signal.into_samples();
    samples.resize(len, 0.0);
    Ok(samples)
}

fn peak_normalized(mut samples: Vec<f64>, rate: u32) -> Result<AudioSignal, MixError> {
    let peak = samples.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if peak == 0.0 {
        return Err(MixError::ZeroEnergySource { index: 0 });
    }
    let g = SOURCE_PEAK / peak;
    samples.iter_mut().for_each(|x| *x *= g);
    Ok(AudioSignal::new(samples, rate)?)
}

/// A mixture together with the exact gains that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub mixture: AudioSignal,
    /// Final per-source gains: `mixture = Σ gains[i] · sources[i]`. These
    /// already include `rescale`.
    pub gains: Vec<f64>,
    /// Drawn energy ratio of each source to source 0, in dB (0 for source 0).
    pub snr_db: Vec<f64>,
    /// Global factor keeping the mixture within [`FULL_SCALE`] (1.0 if none).
    pub rescale: f64,
}

/// Mixes `sources` at random relative levels.
///
/// Source 0 is the reference. Every other source is scaled so that its
/// energy relative to source 0 is `±u` dB, with `u` uniform in `snr_range`
/// and the sign a fair coin. If the sum would exceed [`FULL_SCALE`]
/// anywhere, all gains are scaled down together; clipping never happens.
pub fn mix(sources: &[AudioSignal], snr_range: SnrRange, seed: u64) -> Result<Mixture, MixError> {
    snr_range.validate()?;
    let first = sources.first().ok_or(MixError::Empty)?;
    let (len, rate) = (first.len(), first.sample_rate());
    for (i, s) in sources.iter().enumerate() {
        if s.len() != len || s.sample_rate() != rate {
            return Err(MixError::Mismatch(format!(
                "source {i} is {} samples at {} Hz, source 0 is {len} samples at {rate} Hz",
                s.len(),
                s.sample_rate()
            )));
        }
    }
    let energies: Vec<f64> = sources.iter().map(AudioSignal::energy).collect();
    if let Some(index) = energies.iter().position(|&e| e <= 0.0) {
        return Err(MixError::ZeroEnergySource { index });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut snr_db = vec![0.0; sources.len()];
    let mut gains = vec![1.0; sources.len()];
    for i in 1..sources.len() {
        let magnitude = if snr_range.high > snr_range.low {
            rng.random_range(snr_range.low..=snr_range.high)
        } else {
            snr_range.low
        };
        let db = if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        };
        snr_db[i] = db;
        gains[i] = (energies[0] / energies[i] * 10f64.powf(db / 10.0)).sqrt();
    }

    let mut samples = weighted_sum(sources, &gains);
    let peak = samples.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    // The margin absorbs rounding when the sum is recomputed from the gains.
    let rescale = if peak > FULL_SCALE {
        FULL_SCALE * (1.0 - 1e-9) / peak
    } else {
        1.0
    };
    if rescale != 1.0 {
        gains.iter_mut().for_each(|g| *g *= rescale);
        samples = weighted_sum(sources, &gains);
    }

    Ok(Mixture {
        mixture: AudioSignal::new(samples, rate)?,
        gains,
        snr_db,
        rescale,
    })
}

/// `Σ gains[i] · sources[i]`, accumulated in source order.
pub fn weighted_sum(sources: &[AudioSignal], gains: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; sources.first().map_or(0, AudioSignal::len)];
    for (s, g) in sources.iter().zip(gains) {
        for (o, x) in out.iter_mut().zip(s.samples()) {
            *o += g * x;
        }
    }
    out
}

/// Cuts every signal to the shortest length in the list.
pub fn truncate_to_min(signals: &[AudioSignal]) -> Result<Vec<AudioSignal>, MixError> {
    let first = signals.first().ok_or(MixError::Empty)?;
    if let Some((i, s)) = signals
        .iter()
        .enumerate()
        .find(|(_, s)| s.sample_rate() != first.sample_rate())
    {
        return Err(MixError::Mismatch(format!(
            "signal {i} is {} Hz, signal 0 is {} Hz",
            s.sample_rate(),
            first.sample_rate()
        )));
    }
    let min = signals.iter().map(AudioSignal::len).min().unwrap_or(0);
    Ok(signals
        .iter()
        .map(|s| s.truncated(min))
        .collect::<Result<_, _>>()?)
}
