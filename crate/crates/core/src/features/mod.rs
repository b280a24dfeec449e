//! Audio decoding and the log-mel patch representation fed to the detector.

mod audio;
mod cache;
mod mel;
mod patch;

pub use audio::{decode_audio, resample_linear, write_wav, AudioBuffer};
pub use cache::{decode_mel_cache, encode_mel_cache, read_mel_cache, write_mel_cache};
pub use mel::{compute_mel_spectrogram, hz_to_mel, mel_to_hz, MelFilterbank, MelSpectrogram};
pub use patch::{extract_patches, patch_at, reflect_index, write_patch, MelPatch};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of mel bands.
pub const BAND_COUNT: usize = 80;
/// Context frames per patch.
pub const PATCH_FRAMES: usize = 115;
/// Column of a patch holding its center frame.
pub const PATCH_CENTER: usize = PATCH_FRAMES / 2;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
}

/// Analysis parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    /// STFT window length in samples (Hann).
    pub window: usize,
    /// STFT hop in samples.
    pub hop: usize,
    pub mel_low_hz: f64,
    pub mel_high_hz: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            sample_rate: 22050,
            window: 1024,
            hop: 315,
            mel_low_hz: 27.5,
            mel_high_hz: 8000.0,
        }
    }
}

impl FeatureConfig {
    pub fn hop_seconds(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.sample_rate == 0 || self.window < 2 || self.hop == 0 {
            return Err(FeatureError::Format(
                "sample rate, window and hop must be positive".into(),
            ));
        }
        if !(0.0 <= self.mel_low_hz && self.mel_low_hz < self.mel_high_hz && self.mel_high_hz <= nyquist) {
            return Err(FeatureError::Format(format!(
                "mel range {}..{} Hz must lie within 0..{nyquist} Hz",
                self.mel_low_hz, self.mel_high_hz
            )));
        }
        Ok(())
    }
}
