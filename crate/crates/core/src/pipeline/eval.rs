use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, PipelineError};
use crate::annotation::{parse_annotation_file, rasterize_voice_sequence, VoiceSequence};
use crate::features::{compute_mel_spectrogram, decode_audio, FeatureConfig};
use crate::svd::{predict_sequence, PredictionSequence, SvdModel};

/// Frame accuracy per track and its unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub tracks: Vec<(String, f64)>,
    pub mean: f64,
    pub threshold: f64,
}

impl EvalReport {
    pub fn from_tracks(tracks: Vec<(String, f64)>, threshold: f64) -> Self {
        let mean = if tracks.is_empty() {
            0.0
        } else {
            tracks.iter().map(|t| t.1).sum::<f64>() / tracks.len() as f64
        };
        EvalReport { tracks, mean, threshold }
    }

    pub fn track_count(&self) -> usize {
        self.tracks.len()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("track_id\taccuracy\n");
        for (id, acc) in &self.tracks {
            let _ = writeln!(out, "{id}\t{acc:.6}");
        }
        let _ = writeln!(out, "mean\t{:.6}", self.mean);
        out
    }
}

/// One line of an evaluation manifest: audio plus an annotation whose own
/// timing is the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalTrack {
    pub track_id: String,
    pub audio: PathBuf,
    pub annotation: PathBuf,
}

/// Reads a JSON-lines evaluation manifest; relative paths resolve against its
/// directory.
pub fn load_eval_manifest(path: impl AsRef<Path>) -> Result<Vec<EvalTrack>, PipelineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut t: EvalTrack = serde_json::from_str(line)
            .map_err(|e| PipelineError::Manifest(format!("{} line {}: {e}", path.display(), i + 1)))?;
        t.audio = base.join(&t.audio);
        t.annotation = base.join(&t.annotation);
        out.push(t);
    }
    if out.is_empty() {
        return Err(PipelineError::Manifest(format!("{} lists no tracks", path.display())));
    }
    Ok(out)
}

/// Fraction of frames where `pred >= threshold` agrees with the label.
pub(crate) fn frame_accuracy(pred: &PredictionSequence, labels: &VoiceSequence, threshold: f64) -> f64 {
    let hits = pred
        .probs
        .iter()
        .zip(&labels.frames)
        .filter(|(&p, &l)| (p >= threshold) == (l == 1))
        .count();
    hits as f64 / pred.len() as f64
}

/// Brings `labels` onto the prediction grid. Lengths may differ by up to two
/// frames after resampling; the tail is padded with silence or cut.
pub(crate) fn align_labels(
    track: &str,
    labels: &VoiceSequence,
    hop: f64,
    frames: usize,
) -> Result<VoiceSequence, PipelineError> {
    let expected = (labels.len() as f64 * labels.hop_seconds / hop).round() as usize;
    if expected.abs_diff(frames) > 2 {
        return Err(PipelineError::Length {
            track: track.to_string(),
            labels: expected,
            frames,
        });
    }
    Ok(if labels.hop_seconds == hop {
        let mut f = labels.frames.clone();
        f.resize(frames, 0);
        VoiceSequence::new(f, hop)
    } else {
        labels.resample_nearest(hop, frames)
    })
}

fn predict_file(
    model: &SvdModel,
    audio: &Path,
    features: &FeatureConfig,
    median_width: usize,
) -> Result<PredictionSequence, PipelineError> {
    let spec = compute_mel_spectrogram(&decode_audio(audio, features)?, features)?;
    Ok(predict_sequence(model, &spec, median_width)?)
}

/// Frame accuracy of `model` on audio files with known labels.
pub fn evaluate_frame_accuracy(
    model: &SvdModel,
    labeled: &[(PathBuf, VoiceSequence)],
    threshold: f64,
    features: &FeatureConfig,
    median_width: usize,
) -> Result<EvalReport, PipelineError> {
    let mut tracks = Vec::with_capacity(labeled.len());
    for (audio, labels) in labeled {
        let id = audio.display().to_string();
        let pred = predict_file(model, audio, features, median_width)?;
        let labels = align_labels(&id, labels, pred.hop_seconds, pred.len())?;
        tracks.push((id, frame_accuracy(&pred, &labels, threshold)));
    }
    Ok(EvalReport::from_tracks(tracks, threshold))
}

/// Like [`evaluate_frame_accuracy`], with labels rasterized from each track's
/// annotation on the prediction grid.
pub fn evaluate_tracks(
    model: &SvdModel,
    tracks: &[EvalTrack],
    threshold: f64,
    features: &FeatureConfig,
    median_width: usize,
) -> Result<EvalReport, PipelineError> {
    let mut out = Vec::with_capacity(tracks.len());
    for t in tracks {
        let pred = predict_file(model, &t.audio, features, median_width)?;
        let text = std::fs::read_to_string(&t.annotation).map_err(io_err(&t.annotation))?;
        let file = parse_annotation_file(&text)?;
        let labels = rasterize_voice_sequence(&file, file.timing.frame_rate, 0.0, pred.hop_seconds, pred.len());
        out.push((t.track_id.clone(), frame_accuracy(&pred, &labels, threshold)));
    }
    Ok(EvalReport::from_tracks(out, threshold))
}
