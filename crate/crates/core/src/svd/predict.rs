use rayon::prelude::*;

use super::model::{SvdModel, Trace};
use super::ModelError;
use crate::features::{write_patch, MelSpectrogram, BAND_COUNT, PATCH_FRAMES};

/// Default width of the smoothing median filter, in frames.
pub const DEFAULT_MEDIAN_WIDTH: usize = 9;

/// Voice probability per analysis frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSequence {
    pub probs: Vec<f64>,
    pub hop_seconds: f64,
}

impl PredictionSequence {
    pub fn new(probs: Vec<f64>, hop_seconds: f64) -> Self {
        debug_assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
        PredictionSequence { probs, hop_seconds }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0)
    }
}

/// Centered running median of odd width; the signal is extended by repeating
/// its edge values.
pub fn median_filter(values: &[f64], width: usize) -> Vec<f64> {
    assert!(width % 2 == 1, "median width must be odd");
    let n = values.len();
    if width == 1 || n == 0 {
        return values.to_vec();
    }
    let half = (width / 2) as i64;
    let mut window = Vec::with_capacity(width);
    (0..n as i64)
        .map(|k| {
            window.clear();
            window.extend((k - half..=k + half).map(|j| values[j.clamp(0, n as i64 - 1) as usize]));
            window.sort_by(f64::total_cmp);
            window[width / 2]
        })
        .collect()
}

/// Unsmoothed detector output for every frame.
pub fn predict_raw(model: &SvdModel, spec: &MelSpectrogram) -> Result<Vec<f64>, ModelError> {
    if spec.band_count() != BAND_COUNT {
        return Err(ModelError::Shape(format!(
            "spectrogram has {} bands, expected {BAND_COUNT}",
            spec.band_count()
        )));
    }
    Ok((0..spec.n_frames())
        .into_par_iter()
        .map_init(
            || (Trace::default(), vec![0f32; BAND_COUNT * PATCH_FRAMES]),
            |(trace, patch), k| {
                write_patch(spec, k, patch);
                model.probability(patch, trace)
            },
        )
        .collect())
}

/// Median-smoothed voice probability for every frame of `spec`.
pub fn predict_sequence(
    model: &SvdModel,
    spec: &MelSpectrogram,
    median_width: usize,
) -> Result<PredictionSequence, ModelError> {
    if median_width % 2 == 0 {
        return Err(ModelError::Config(format!("median width {median_width} must be odd")));
    }
    let raw = predict_raw(model, spec)?;
    Ok(PredictionSequence::new(median_filter(&raw, median_width), spec.hop_seconds))
}
