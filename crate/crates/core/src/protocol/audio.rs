use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mono PCM audio with samples in [−1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Format("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Format("clip has no samples".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::Format(format!("sample {bad} outside [-1, 1]")));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DurationVerdict {
    Ok,
    Warning,
    Error,
}

/// Stimuli should be about 10 s and never exceed 12 s.
pub fn validate_clip_duration(clip: &AudioClip) -> DurationVerdict {
    let d = clip.duration();
    if d <= 10.0 {
        DurationVerdict::Ok
    } else if d <= 12.0 {
        DurationVerdict::Warning
    } else {
        DurationVerdict::Error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Int16,
    Float32,
}

/// Reads a mono RIFF/WAVE file holding 16-bit PCM or 32-bit float samples.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(AudioClip, WavFormat)> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Format(format!(
            "{}: expected mono, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let (samples, format) = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => (
            reader
                .into_samples::<i16>()
                .map(|s| s.map(|v| f64::from(v) / 32768.0))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| wav_error(path, e))?,
            WavFormat::Int16,
        ),
        (hound::SampleFormat::Float, 32) => (
            reader
                .into_samples::<f32>()
                .map(|s| s.map(|v| f64::from(v).clamp(-1.0, 1.0)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| wav_error(path, e))?,
            WavFormat::Float32,
        ),
        (fmt, bits) => {
            return Err(Error::Format(format!(
                "{}: unsupported sample format {fmt:?}/{bits} bits",
                path.display()
            )))
        }
    };
    Ok((AudioClip::new(samples, spec.sample_rate)?, format))
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip, format: WavFormat) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: match format {
            WavFormat::Int16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Int16 => hound::SampleFormat::Int,
            WavFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &s in &clip.samples {
        let s = s.clamp(-1.0, 1.0);
        match format {
            WavFormat::Int16 => writer.write_sample((s * 32767.0).round() as i16),
            WavFormat::Float32 => writer.write_sample(s as f32),
        }
        .map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}
