use super::ncc::{check_inputs, ncc_direct, Correlator};
use super::{AlignError, AlignmentResult, SearchConfig};
use crate::annotation::{rasterize_span, AnnotationFile, VoiceSequence};
use crate::svd::PredictionSequence;

/// Scores closer than this are treated as equal and resolved by the
/// tie-break rules instead.
const TIE_EPS: f64 = 1e-9;

/// The frame-rate grid: `fr_steps` evenly spaced values over
/// `[Fr (1 - alpha), Fr (1 + alpha)]`. The middle value is exactly `Fr`.
pub fn frame_rate_grid(fr: f64, cfg: &SearchConfig) -> Vec<f64> {
    if cfg.fr_steps <= 1 {
        return vec![fr];
    }
    let mid = (cfg.fr_steps / 2) as f64;
    (0..cfg.fr_steps)
        .map(|i| fr * (1.0 + cfg.alpha_ratio * (i as f64 - mid) / mid))
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    shift: i64,
    fr: f64,
}

/// `true` when `a` should replace the incumbent `b`.
fn better(a: &Candidate, b: &Candidate, nominal_fr: f64) -> bool {
    if a.score > b.score + TIE_EPS {
        return true;
    }
    if a.score < b.score - TIE_EPS {
        return false;
    }
    let (da, db) = (a.shift.unsigned_abs(), b.shift.unsigned_abs());
    if da != db {
        return da < db;
    }
    (a.fr - nominal_fr).abs() < (b.fr - nominal_fr).abs()
}

fn rasterize_all(file: &AnnotationFile, rates: &[f64], hop: f64) -> Vec<(f64, i64, VoiceSequence)> {
    rates
        .iter()
        .map(|&fr| {
            let (first, seq) = rasterize_span(file, fr, hop);
            (fr, first, seq)
        })
        .filter(|(_, _, seq)| seq.voiced_count() > 0)
        .collect()
}

/// Best candidate over `spans`; `base` is the index of `spans[0]` in the
/// caller's list. Returns `None` when nothing beats `incumbent`.
fn best_over(
    correlator: &Correlator,
    spans: &[(f64, i64, VoiceSequence)],
    base: usize,
    max_shift: i64,
    nominal: f64,
    incumbent: Option<Candidate>,
) -> Option<(Candidate, usize)> {
    let mut best: Option<(Candidate, usize)> = None;
    for (i, (fr, first, seq)) in spans.iter().enumerate() {
        let scores = correlator.correlate(&seq.to_f64());
        for (local, score) in scores.iter() {
            let shift = local - first;
            if shift.abs() > max_shift {
                continue;
            }
            let cand = Candidate { score, shift, fr: *fr };
            let current = best.map(|b| b.0).or(incumbent);
            if current.as_ref().map_or(true, |b| better(&cand, b, nominal)) {
                best = Some((cand, base + i));
            }
        }
    }
    best
}

/// Brute-force search over the frame-rate grid and all integer frame
/// offsets for the `(o_hat, fr_hat)` maximizing NCC.
///
/// For each candidate rate the annotation is rescaled on its grid (a constant
/// stretch) and rasterized at `o = 0`; the best offset for that rate comes
/// from one FFT correlation against the predictions. Ties prefer the smaller
/// `|o_hat|`, then the rate closer to the file's own.
///
/// With `refine_steps > 1` the best grid rate is then refined on a finer grid
/// spanning its two neighbours. A rate between grid points shifts the notes
/// progressively away from the grid origin, and the best whole-hop offset
/// for the nearest grid rate absorbs part of that drift; refining removes it.
pub fn search_alignment(
    file: &AnnotationFile,
    pred: &PredictionSequence,
    cfg: &SearchConfig,
) -> Result<AlignmentResult, AlignError> {
    cfg.validate()?;
    if file.notes.is_empty() {
        return Err(AlignError::Invariant("annotation has no notes".into()));
    }
    let hop = pred.hop_seconds;
    if (cfg.hop_seconds - hop).abs() > 1e-9 * hop {
        return Err(AlignError::HopMismatch {
            annotation: cfg.hop_seconds,
            prediction: hop,
        });
    }
    let nominal = file.timing.frame_rate;
    let max_shift = cfg
        .max_abs_offset_seconds
        .map(|s| (s / hop).floor() as i64)
        .unwrap_or(i64::MAX);
    let grid = frame_rate_grid(nominal, cfg);
    let mut spans = rasterize_all(file, &grid, hop);
    let longest = spans.iter().map(|s| s.2.len()).max().ok_or_else(|| {
        AlignError::Degenerate("every note is shorter than one analysis frame".into())
    })?;
    check_inputs(&spans[0].2, pred)?;

    let mut correlator = Correlator::new(&pred.probs, longest);
    let no_offset = || AlignError::Invariant("no offset within max_abs_offset_seconds overlaps the predictions".into());

    let (mut cand, mut idx) = best_over(&correlator, &spans, 0, max_shift, nominal, None).ok_or_else(no_offset)?;
    if cfg.refine_steps > 1 && cfg.fr_steps > 1 {
        let step = cfg.fr_step(nominal);
        let n = cfg.refine_steps;
        let fine: Vec<f64> = (0..n)
            .map(|j| cand.fr + step * (2.0 * j as f64 / (n - 1) as f64 - 1.0))
            .filter(|&f| f > 0.0 && f != cand.fr)
            .collect();
        let offset = spans.len();
        spans.extend(rasterize_all(file, &fine, hop));
        let longest_fine = spans[offset..].iter().map(|s| s.2.len()).max().unwrap_or(0);
        if !correlator.fits(longest_fine) {
            correlator = Correlator::new(&pred.probs, longest_fine);
        }
        if let Some(b) = best_over(&correlator, &spans[offset..], offset, max_shift, nominal, Some(cand)) {
            (cand, idx) = b;
        }
    }

    let (_, first, seq) = &spans[idx];
    let local = cand.shift + first;
    let avs = seq.to_f64();
    let score = ncc_direct(&avs, &pred.probs, local);
    let overlap = (local + avs.len() as i64).min(pred.len() as i64) - local.max(0);
    Ok(AlignmentResult {
        o_hat: cand.shift as f64 * hop,
        fr_hat: cand.fr,
        score,
        n_overlap_frames: overlap.max(0) as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_contains_nominal_rate_exactly() {
        let cfg = SearchConfig::new(0.01);
        for fr in [3.7, 10.0, 17.123] {
            let g = frame_rate_grid(fr, &cfg);
            assert_eq!(g.len(), 101);
            assert_eq!(g[50], fr);
            assert!((g[0] - fr * 0.95).abs() < 1e-12);
            assert!((g[100] - fr * 1.05).abs() < 1e-12);
        }
        let single = SearchConfig { fr_steps: 1, ..cfg };
        assert_eq!(frame_rate_grid(4.0, &single), vec![4.0]);
    }
}
