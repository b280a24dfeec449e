use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{FeatureConfig, FeatureError};

/// Mono audio, samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, FeatureError> {
        if sample_rate == 0 {
            return Err(FeatureError::Format("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(FeatureError::Format("non-finite sample".into()));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Reads a PCM WAV file, averages its channels and resamples it to
/// `cfg.sample_rate`.
pub fn decode_audio(path: impl AsRef<Path>, cfg: &FeatureConfig) -> Result<AudioBuffer, FeatureError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    // Everything past a successful open is a property of the file contents.
    let fmt = |e: hound::Error| FeatureError::Format(format!("{}: {e}", path.display()));
    let reader = WavReader::new(BufReader::new(file)).map_err(fmt)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(FeatureError::Format(format!("{}: zero channels", path.display())));
    }
    let interleaved: Vec<f32> = match spec.sample_format {
        SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(FeatureError::Format(format!(
                    "{}: unsupported {}-bit float samples",
                    path.display(),
                    spec.bits_per_sample
                )));
            }
            reader
                .into_samples::<f32>()
                .collect::<Result<_, _>>()
                .map_err(fmt)?
        }
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<Result<_, _>>()
                .map_err(fmt)?
        }
    };
    if interleaved.len() < channels {
        return Err(FeatureError::Format(format!("{}: no audio frames", path.display())));
    }
    let mono: Vec<f32> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f32>() / channels as f32)
        .collect();
    let buffer = AudioBuffer::new(mono, spec.sample_rate)
        .map_err(|e| FeatureError::Format(format!("{}: {e}", path.display())))?;
    Ok(resample_linear(&buffer, cfg.sample_rate))
}

/// Linear-interpolation resampling. Output length is
/// `round(len * target / source)`.
pub fn resample_linear(audio: &AudioBuffer, target_rate: u32) -> AudioBuffer {
    if audio.sample_rate == target_rate || audio.samples.is_empty() {
        return AudioBuffer {
            samples: audio.samples.clone(),
            sample_rate: target_rate,
        };
    }
    let (src, dst) = (audio.sample_rate as u64, target_rate as u64);
    let n_out = ((audio.samples.len() as u64 * dst + src / 2) / src) as usize;
    let ratio = src as f64 / dst as f64;
    let last = audio.samples.len() - 1;
    let samples = (0..n_out)
        .map(|i| {
            let x = i as f64 * ratio;
            let j = (x.floor() as usize).min(last);
            let frac = (x - j as f64) as f32;
            let a = audio.samples[j];
            let b = audio.samples[(j + 1).min(last)];
            a + (b - a) * frac
        })
        .collect();
    AudioBuffer {
        samples,
        sample_rate: target_rate,
    }
}

/// Writes mono 16-bit PCM. Samples are clipped to `[-1, 1]`.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<(), FeatureError> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let io = |e: hound::Error| match e {
        hound::Error::IoError(source) => FeatureError::Io {
            path: path.display().to_string(),
            source,
        },
        other => FeatureError::Format(other.to_string()),
    };
    let mut writer = WavWriter::create(path, spec).map_err(io)?;
    for &s in &audio.samples {
        writer
            .write_sample((s.clamp(-1.0, 1.0) * i16::MAX as f32).round() as i16)
            .map_err(io)?;
    }
    writer.finalize().map_err(io)
}
