//! Dataset bootstrapping: match karaoke annotations to candidate audio with a
//! teacher detector, turn the matches into training targets, train a student
//! and evaluate it, round after round.

mod eval;
mod iterate;
mod journal;
mod manifest;
mod matching;
mod split;
mod training_set;

pub use eval::{evaluate_frame_accuracy, evaluate_tracks, load_eval_manifest, EvalReport, EvalTrack};
pub use iterate::{iterate, stage_build_set, stage_evaluate, stage_match, stage_train, RoundOutcome, RoundPaths};
pub use journal::{read_journal, Journal, JournalEntry, JournalStatus};
pub use manifest::{CandidateManifest, ManifestRecord};
pub use matching::{journaled_outcome, run_matching, MatchOptions, MatchOutcome, MatchRecord};
pub use split::{artist_filter_split, SplitItem};
pub use training_set::{
    build_training_set, decode_predictions, encode_predictions, read_predictions, write_predictions, TrainingRow,
    TrainingSet,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::AlignError;
use crate::annotation::AnnotationError;
use crate::features::FeatureError;
use crate::svd::ModelError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("data error: {0}")]
    Data(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("track {track}: label sequence has {labels} frames, audio has {frames}")]
    Length { track: String, labels: usize, frames: usize },
    #[error("round {round} produced no matches")]
    EmptyRound { round: usize },
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Where per-frame training targets come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetPolicy {
    /// The teacher's smoothed probabilities.
    TeacherPredictions,
    /// The aligned annotation, rasterized.
    AlignedAnnotations,
    /// The aligned annotation, keeping only frames where the teacher is
    /// within `tolerance` of it.
    Agreement { tolerance: f64 },
}

impl Default for TargetPolicy {
    fn default() -> Self {
        TargetPolicy::AlignedAnnotations
    }
}

impl TargetPolicy {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if let TargetPolicy::Agreement { tolerance } = *self {
            if !(0.0..1.0).contains(&tolerance) {
                return Err(PipelineError::Config(format!("agreement tolerance {tolerance} outside [0, 1)")));
            }
        }
        Ok(())
    }

    pub fn needs_predictions(&self) -> bool {
        !matches!(self, TargetPolicy::AlignedAnnotations)
    }
}

/// Song ids double as file names inside the run directory.
pub(crate) fn check_id(id: &str) -> Result<(), String> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c));
    if ok {
        Ok(())
    } else {
        Err(format!("id {id:?} must be non-empty ASCII letters, digits, '.', '_' or '-' and not start with '.'"))
    }
}
