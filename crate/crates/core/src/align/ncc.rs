use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::AlignError;
use crate::annotation::VoiceSequence;
use crate::svd::PredictionSequence;

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn check_inputs(avs: &VoiceSequence, pred: &PredictionSequence) -> Result<(), AlignError> {
    let (a, b) = (avs.hop_seconds, pred.hop_seconds);
    if (a - b).abs() > 1e-9 * a.abs().max(b.abs()) {
        return Err(AlignError::HopMismatch { annotation: a, prediction: b });
    }
    if avs.voiced_count() == 0 {
        return Err(AlignError::Degenerate("annotation voice sequence is all zero".into()));
    }
    if pred.is_degenerate() {
        return Err(AlignError::Degenerate("prediction sequence is all zero".into()));
    }
    Ok(())
}

/// Normalized cross-correlation of `avs` delayed by `shift` frames against
/// `pred`:
///
/// ```text
/// sum_t avs(t - shift) * pred(t) / (|avs| * |pred|)
/// ```
///
/// Indices outside either sequence read as zero. The norms are taken over the
/// full, unshifted sequences.
pub fn ncc(avs: &VoiceSequence, pred: &PredictionSequence, shift: i64) -> Result<f64, AlignError> {
    check_inputs(avs, pred)?;
    Ok(ncc_direct(&avs.to_f64(), &pred.probs, shift))
}

/// Direct O(N) evaluation for one shift, no input checks.
pub(crate) fn ncc_direct(avs: &[f64], pred: &[f64], shift: i64) -> f64 {
    let lo = shift.max(0);
    let hi = (shift + avs.len() as i64).min(pred.len() as i64);
    let num: f64 = (lo..hi)
        .map(|t| avs[(t - shift) as usize] * pred[t as usize])
        .sum();
    num / (energy(avs) * energy(pred))
}

/// NCC for every shift from `min_shift` to `min_shift + scores.len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftScores {
    pub min_shift: i64,
    pub scores: Vec<f64>,
}

impl ShiftScores {
    pub fn max_shift(&self) -> i64 {
        self.min_shift + self.scores.len() as i64 - 1
    }

    pub fn score(&self, shift: i64) -> Option<f64> {
        let i = shift - self.min_shift;
        (i >= 0).then(|| self.scores.get(i as usize).copied()).flatten()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.scores
            .iter()
            .enumerate()
            .map(move |(i, &s)| (self.min_shift + i as i64, s))
    }
}

/// FFT cross-correlation against one fixed prediction sequence. The
/// prediction spectrum is computed once and reused for every annotation
/// sequence that fits the transform size.
pub struct Correlator {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    pred_spectrum: Vec<Complex<f64>>,
    pred_len: usize,
    pred_norm: f64,
}

impl Correlator {
    /// `max_avs_len` bounds the annotation sequences this correlator accepts.
    pub fn new(pred: &[f64], max_avs_len: usize) -> Self {
        let size = (pred.len() + max_avs_len.max(1) - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut pred_spectrum: Vec<Complex<f64>> = pred
            .iter()
            .map(|&v| Complex::new(v, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(size)
            .collect();
        forward.process(&mut pred_spectrum);
        Correlator {
            size,
            forward,
            inverse,
            pred_spectrum,
            pred_len: pred.len(),
            pred_norm: energy(pred),
        }
    }

    /// Whether an annotation sequence of `len` frames can be correlated.
    pub fn fits(&self, len: usize) -> bool {
        len + self.pred_len <= self.size + 1
    }

    /// All shifts from `-(avs.len() - 1)` to `pred.len() - 1`.
    pub fn correlate(&self, avs: &[f64]) -> ShiftScores {
        assert!(self.fits(avs.len()), "annotation sequence too long");
        let mut buf: Vec<Complex<f64>> = avs
            .iter()
            .map(|&v| Complex::new(v, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.size)
            .collect();
        self.forward.process(&mut buf);
        for (a, p) in buf.iter_mut().zip(&self.pred_spectrum) {
            *a = a.conj() * p;
        }
        self.inverse.process(&mut buf);
        // buf[m] = size * sum_t avs(t) pred(t + m), circularly.
        let norm = self.size as f64 * energy(avs) * self.pred_norm;
        let min_shift = -(avs.len() as i64 - 1);
        let scores = (min_shift..self.pred_len as i64)
            .map(|s| buf[s.rem_euclid(self.size as i64) as usize].re / norm)
            .collect();
        ShiftScores { min_shift, scores }
    }
}

/// NCC at every shift where the sequences overlap, via FFT correlation.
pub fn cross_correlate_all_shifts(avs: &VoiceSequence, pred: &PredictionSequence) -> Result<ShiftScores, AlignError> {
    check_inputs(avs, pred)?;
    let a = avs.to_f64();
    Ok(Correlator::new(&pred.probs, a.len()).correlate(&a))
}
