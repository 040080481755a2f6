//! WAV reading and writing on top of `hound`.
//!
//! Reading accepts 16-bit PCM and 32-bit float files with any channel count
//! and returns the first channel. Writing always emits mono 16-bit PCM with
//! no dithering. PCM values map to floats as `x / 32768`.

use std::path::Path;

use thiserror::Error;

use crate::signal::{AudioSignal, SignalError};

#[derive(Debug, Error)]
pub enum WavError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed WAV: {0}")]
    Malformed(String),
    #[error("unsupported WAV encoding: {0}")]
    Unsupported(String),
    #[error("WAV file contains no samples")]
    ZeroLength,
    #[error(transparent)]
    Signal(#[from] SignalError),
}

impl From<hound::Error> for WavError {
    fn from(e: hound::Error) -> Self {
        match e {
            hound::Error::IoError(io) => WavError::Io(io),
            hound::Error::FormatError(msg) => WavError::Malformed(msg.to_string()),
            hound::Error::Unsupported => WavError::Unsupported("format not recognised".into()),
            hound::Error::TooWide => WavError::Unsupported("sample width too large".into()),
            other => WavError::Malformed(other.to_string()),
        }
    }
}

pub fn f64_to_pcm16(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn pcm16_to_f64(x: i16) -> f64 {
    x as f64 / 32768.0
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioSignal, WavError> {
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .step_by(channels)
            .map(|s| s.map(pcm16_to_f64))
            .collect::<Result<_, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .step_by(channels)
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (hound::SampleFormat::Int, bits) => {
            return Err(WavError::Unsupported(format!("{bits}-bit integer PCM")))
        }
        (hound::SampleFormat::Float, bits) => {
            return Err(WavError::Unsupported(format!("{bits}-bit float")))
        }
    };
    if samples.is_empty() {
        return Err(WavError::ZeroLength);
    }
    Ok(AudioSignal::new(samples, spec.sample_rate)?)
}

pub fn write_wav(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<(), WavError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &x in signal.samples() {
        writer.write_sample(f64_to_pcm16(x))?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn write_raw(
        path: &Path,
        spec: hound::WavSpec,
        f: impl FnOnce(&mut hound::WavWriter<std::io::BufWriter<std::fs::File>>),
    ) {
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        f(&mut w);
        w.finalize().unwrap();
    }

    #[test]
    fn sine_round_trip_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sine.wav");
        let s = AudioSignal::new(
            (0..8000)
                .map(|k| (2.0 * PI * 440.0 * k as f64 / 8000.0).sin())
                .collect(),
            8000,
        )
        .unwrap();
        write_wav(&path, &s).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 8000);
        assert_eq!(back.len(), 8000);
        let worst = s
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1.0 / 32768.0, "{worst}");
    }

    #[test]
    fn pcm_scaling_convention() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pcm.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        write_raw(&path, spec, |w| {
            for s in [0i16, 16384, -16384] {
                w.write_sample(s).unwrap();
            }
        });
        let s = read_wav(&path).unwrap();
        for (got, want) in s.samples().iter().zip([0.0, 0.5, -0.5]) {
            assert!((got - want).abs() < 1e-4);
        }
    }

    #[test]
    fn stereo_float_reads_first_channel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        write_raw(&path, spec, |w| {
            for (l, r) in [(0.25f32, -1.0f32), (-0.75, 1.0), (0.5, 0.0)] {
                w.write_sample(l).unwrap();
                w.write_sample(r).unwrap();
            }
        });
        let s = read_wav(&path).unwrap();
        assert_eq!(s.sample_rate(), 16000);
        assert_eq!(s.samples(), &[0.25, -0.75, 0.5]);
    }

    #[test]
    fn header_only_file_is_zero_length() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        write_raw(&path, spec, |_| {});
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 44);
        assert!(matches!(read_wav(&path), Err(WavError::ZeroLength)));
    }

    #[test]
    fn unsupported_encoding_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("24.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        write_raw(&path, spec, |w| w.write_sample(1000i32).unwrap());
        let err = read_wav(&path).unwrap_err();
        assert!(err.to_string().contains("24-bit integer PCM"), "{err}");
    }

    #[test]
    fn malformed_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"definitely not a RIFF file").unwrap();
        assert!(matches!(read_wav(&junk), Err(WavError::Malformed(_))));
        assert!(matches!(
            read_wav(dir.path().join("missing.wav")),
            Err(WavError::Io(_))
        ));
    }

    #[test]
    fn quantisation_clamps() {
        assert_eq!(f64_to_pcm16(1.0), 32767);
        assert_eq!(f64_to_pcm16(-1.0), -32768);
        assert_eq!(f64_to_pcm16(2.0), 32767);
        assert_eq!(f64_to_pcm16(0.5), 16384);
    }
}
