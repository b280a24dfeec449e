//! Matching annotation voice sequences against detector output: normalized
//! cross-correlation, the offset/frame-rate search and candidate selection.

mod ncc;
mod search;

pub use ncc::{cross_correlate_all_shifts, ncc, Correlator, ShiftScores};
pub use search::{frame_rate_grid, search_alignment};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("hop mismatch: annotation grid {annotation} s vs predictions {prediction} s")]
    HopMismatch { annotation: f64, prediction: f64 },
    #[error("{0}")]
    Invariant(String),
    #[error("invalid search configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Half-width of the frame-rate interval as a fraction of the file's rate.
    pub alpha_ratio: f64,
    /// Number of frame rates tried; odd so the file's own rate is included.
    pub fr_steps: usize,
    /// Points in the local refinement around the best grid rate, covering
    /// one grid step either side; 0 disables it.
    pub refine_steps: usize,
    /// Largest `|o_hat|` considered; `None` searches every overlapping offset.
    pub max_abs_offset_seconds: Option<f64>,
    /// Acceptance threshold for a match.
    pub t_corr: f64,
    pub hop_seconds: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig::new(315.0 / 22050.0)
    }
}

impl SearchConfig {
    pub fn new(hop_seconds: f64) -> Self {
        SearchConfig {
            alpha_ratio: 0.05,
            fr_steps: 101,
            refine_steps: 21,
            max_abs_offset_seconds: None,
            t_corr: 0.8,
            hop_seconds,
        }
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        let err = |m: String| Err(AlignError::Config(m));
        if !(self.alpha_ratio > 0.0 && self.alpha_ratio < 1.0) {
            return err(format!("alpha_ratio {} must lie in (0, 1)", self.alpha_ratio));
        }
        if self.fr_steps == 0 || self.fr_steps % 2 == 0 {
            return err(format!("fr_steps {} must be odd", self.fr_steps));
        }
        if !(self.t_corr > 0.0 && self.t_corr <= 1.0) {
            return err(format!("t_corr {} must lie in (0, 1]", self.t_corr));
        }
        if !(self.hop_seconds > 0.0) {
            return err("hop_seconds must be positive".into());
        }
        if let Some(m) = self.max_abs_offset_seconds {
            if !(m >= 0.0) {
                return err("max_abs_offset_seconds must be non-negative".into());
            }
        }
        Ok(())
    }

    /// Spacing of the frame-rate grid for a file with rate `fr`.
    pub fn fr_step(&self, fr: f64) -> f64 {
        if self.fr_steps <= 1 {
            0.0
        } else {
            2.0 * self.alpha_ratio * fr / (self.fr_steps - 1) as f64
        }
    }
}

/// Best `(o_hat, fr_hat)` for one annotation/audio pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// Correction added to the file's offset, a whole number of hops.
    pub o_hat: f64,
    /// Corrected grid rate.
    pub fr_hat: f64,
    /// NCC at the optimum.
    pub score: f64,
    /// Frames where the shifted annotation span overlaps the predictions.
    pub n_overlap_frames: usize,
}

/// Keeps the highest-scoring candidate at or above `t_corr`. Equal scores go
/// to the lexicographically smallest id.
pub fn select_best_candidate<S: AsRef<str> + Clone>(
    results: &[(S, AlignmentResult)],
    cfg: &SearchConfig,
) -> Option<(S, AlignmentResult)> {
    results
        .iter()
        .filter(|(_, r)| r.score >= cfg.t_corr)
        .min_by(|(ia, a), (ib, b)| b.score.total_cmp(&a.score).then_with(|| ia.as_ref().cmp(ib.as_ref())))
        .cloned()
}

/// `song_id<TAB>candidate_id<TAB>score<TAB>o_hat<TAB>fr_hat<TAB>n_overlap_frames`.
pub fn report_line(song_id: &str, candidate_id: &str, r: &AlignmentResult) -> String {
    format!(
        "{song_id}\t{candidate_id}\t{:.6}\t{:.6}\t{:.6}\t{}",
        r.score, r.o_hat, r.fr_hat, r.n_overlap_frames
    )
}
