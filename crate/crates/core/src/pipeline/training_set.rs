use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::matching::MatchRecord;
use super::{io_err, PipelineError, TargetPolicy};
use crate::annotation::{parse_annotation_file, rasterize_voice_sequence};
use crate::features::{compute_mel_spectrogram, decode_audio, read_mel_cache, write_patch, FeatureConfig, MelSpectrogram};
use crate::svd::{ExampleSource, PredictionSequence};

const MAGIC: &[u8; 4] = b"PRDS";

/// `"PRDS"`, `u64` length, `f64` hop seconds, then `f64` probabilities, all
/// little-endian.
pub fn encode_predictions(pred: &PredictionSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * pred.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(pred.len() as u64).to_le_bytes());
    out.extend_from_slice(&pred.hop_seconds.to_le_bytes());
    for p in &pred.probs {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_predictions(bytes: &[u8]) -> Result<PredictionSequence, PipelineError> {
    let bad = |m: &str| PipelineError::Data(format!("prediction cache: {m}"));
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(bad("missing PRDS header"));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let hop = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let body = &bytes[20..];
    if body.len() != n * 8 || !(hop > 0.0) {
        return Err(bad("header does not match payload"));
    }
    let probs: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(bad("probability outside [0, 1]"));
    }
    Ok(PredictionSequence::new(probs, hop))
}

pub fn write_predictions(path: impl AsRef<Path>, pred: &PredictionSequence) -> Result<(), PipelineError> {
    let path = path.as_ref();
    std::fs::write(path, encode_predictions(pred)).map_err(io_err(path))
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<PredictionSequence, PipelineError> {
    let path = path.as_ref();
    decode_predictions(&std::fs::read(path).map_err(io_err(path))?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingRow {
    /// Index into [`TrainingSet::songs`].
    pub song: usize,
    pub frame: usize,
    pub target: f64,
    pub weight: f64,
}

/// One example per frame of every matched track. Patches are cut from the
/// shared spectrograms when the trainer asks for them.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub songs: Vec<String>,
    pub rows: Vec<TrainingRow>,
    specs: Vec<Arc<MelSpectrogram>>,
}

impl TrainingSet {
    pub fn spectrogram(&self, song: usize) -> &MelSpectrogram {
        &self.specs[song]
    }

    /// `song_id, frame, target, weight` per row, with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("song_id\tframe\ttarget\tweight\n");
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", self.songs[r.song], r.frame, r.target, r.weight);
        }
        out
    }

    pub fn active_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.weight > 0.0).count()
    }
}

impl ExampleSource for TrainingSet {
    fn len(&self) -> usize {
        self.rows.len()
    }
    fn target(&self, i: usize) -> f64 {
        self.rows[i].target
    }
    fn weight(&self, i: usize) -> f64 {
        self.rows[i].weight
    }
    fn write_patch(&self, i: usize, out: &mut [f32]) {
        let r = &self.rows[i];
        write_patch(&self.specs[r.song], r.frame, out);
    }
    fn center_column(&self, i: usize, out: &mut [f32]) {
        let r = &self.rows[i];
        out.copy_from_slice(self.specs[r.song].frame(r.frame));
    }
}

fn load_spectrogram(m: &MatchRecord, features: &FeatureConfig) -> Result<MelSpectrogram, PipelineError> {
    match read_mel_cache(&m.mel_cache) {
        Ok(s) => Ok(s),
        Err(e) => {
            log::debug!("{}: {e}; recomputing features", m.song_id);
            let audio = decode_audio(&m.audio, features)?;
            Ok(compute_mel_spectrogram(&audio, features)?)
        }
    }
}

/// Per-frame targets for every match under `policy`:
///
/// * `TeacherPredictions`: the teacher's smoothed probability, weight 1.
/// * `AlignedAnnotations`: the adapted annotation rasterized on the feature
///   grid, weight 1.
/// * `Agreement`: the rasterized annotation, weight 1 where the teacher is
///   within the tolerance of it and 0 elsewhere.
pub fn build_training_set(
    matches: &[MatchRecord],
    policy: TargetPolicy,
    features: &FeatureConfig,
) -> Result<TrainingSet, PipelineError> {
    policy.validate()?;
    if matches.is_empty() {
        return Err(PipelineError::Data("no matches to build a training set from".into()));
    }
    let mut set = TrainingSet {
        songs: Vec::new(),
        rows: Vec::new(),
        specs: Vec::new(),
    };
    for m in matches {
        let spec = load_spectrogram(m, features)?;
        let n = spec.n_frames();
        let text = std::fs::read_to_string(&m.adapted).map_err(io_err(&m.adapted))?;
        let adapted = parse_annotation_file(&text)?;
        let avs = rasterize_voice_sequence(&adapted, adapted.timing.frame_rate, 0.0, spec.hop_seconds, n);
        let pred = if policy.needs_predictions() {
            let p = read_predictions(&m.predictions).map_err(|e| {
                PipelineError::Data(format!("{}: teacher predictions unavailable ({e})", m.song_id))
            })?;
            if p.len() != n {
                return Err(PipelineError::Data(format!(
                    "{}: {} cached predictions for {n} frames",
                    m.song_id,
                    p.len()
                )));
            }
            Some(p)
        } else {
            None
        };
        let song = set.songs.len();
        for k in 0..n {
            let label = avs.frames[k] as f64;
            let (target, weight) = match (policy, &pred) {
                (TargetPolicy::TeacherPredictions, Some(p)) => (p.probs[k], 1.0),
                (TargetPolicy::Agreement { tolerance }, Some(p)) => {
                    (label, if (p.probs[k] - label).abs() <= tolerance { 1.0 } else { 0.0 })
                }
                _ => (label, 1.0),
            };
            set.rows.push(TrainingRow {
                song,
                frame: k,
                target,
                weight,
            });
        }
        set.songs.push(m.song_id.clone());
        set.specs.push(Arc::new(spec));
    }
    Ok(set)
}
