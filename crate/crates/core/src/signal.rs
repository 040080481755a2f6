use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("signal has no samples")]
    Empty,
    #[error("sample {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("sample rate must be positive")]
    ZeroSampleRate,
}

/// Mono sample buffer. Samples are nominally in [-1, 1] but any finite
/// value is accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, SignalError> {
        if sample_rate == 0 {
            return Err(SignalError::ZeroSampleRate);
        }
        if samples.is_empty() {
            return Err(SignalError::Empty);
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(SignalError::NonFinite { index, value });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Returns a copy with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self, SignalError> {
        Self::new(
            self.samples.iter().map(|x| x * gain).collect(),
            self.sample_rate,
        )
    }

    /// First `len` samples (or the whole signal if it is shorter).
    pub fn truncated(&self, len: usize) -> Result<Self, SignalError> {
        let len = len.min(self.samples.len());
        Self::new(self.samples[..len].to_vec(), self.sample_rate)
    }

    /// Snaps every sample to the 16-bit PCM grid used by the WAV writer.
    pub fn quantized_pcm16(&self) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|&x| crate::mixture::wav::pcm16_to_f64(crate::mixture::wav::f64_to_pcm16(x)))
                .collect(),
            sample_rate: self.sample_rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert_eq!(AudioSignal::new(vec![], 8000), Err(SignalError::Empty));
        assert_eq!(
            AudioSignal::new(vec![0.0], 0),
            Err(SignalError::ZeroSampleRate)
        );
        assert!(matches!(
            AudioSignal::new(vec![0.0, f64::NAN], 8000),
            Err(SignalError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn truncation_is_a_prefix() {
        let s = AudioSignal::new(vec![1.0, 2.0, 3.0], 10).unwrap();
        assert_eq!(s.truncated(2).unwrap().samples(), &[1.0, 2.0]);
        assert_eq!(s.truncated(10).unwrap().samples(), s.samples());
    }
}
