use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adamax::{Adamax, AdamaxConfig};
use super::model::{Gradients, SvdModel, Trace};
use super::ModelError;
use crate::features::{MelPatch, BAND_COUNT, PATCH_CENTER, PATCH_FRAMES};

/// Examples per parallel work unit. Fixed so the reduction order, and hence
/// the trained model, does not depend on the thread count.
const CHUNK: usize = 16;

/// A patch with a soft target and a weight (0 masks the example out).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub patch: MelPatch,
    pub target: f64,
    pub weight: f64,
}

impl TrainingExample {
    pub fn new(patch: MelPatch, target: f64, weight: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&target) {
            return Err(ModelError::Data(format!("target {target} outside [0, 1]")));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(ModelError::Data(format!("weight {weight} must be finite and >= 0")));
        }
        Ok(TrainingExample { patch, target, weight })
    }
}

/// Random-access supply of training examples. Implementors can build patches
/// on demand instead of holding them all in memory.
pub trait ExampleSource: Sync {
    fn len(&self) -> usize;
    fn target(&self, i: usize) -> f64;
    fn weight(&self, i: usize) -> f64;
    /// Writes the band-major 80 x 115 patch of example `i`.
    fn write_patch(&self, i: usize, out: &mut [f32]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The 80 center-frame values of example `i`.
    fn center_column(&self, i: usize, out: &mut [f32]) {
        let mut patch = vec![0f32; BAND_COUNT * PATCH_FRAMES];
        self.write_patch(i, &mut patch);
        for (b, o) in out.iter_mut().enumerate() {
            *o = patch[b * PATCH_FRAMES + PATCH_CENTER];
        }
    }

    fn example(&self, i: usize) -> TrainingExample {
        let mut values = vec![0f32; BAND_COUNT * PATCH_FRAMES];
        self.write_patch(i, &mut values);
        TrainingExample {
            patch: MelPatch {
                values,
                center_frame: 0,
            },
            target: self.target(i),
            weight: self.weight(i),
        }
    }
}

impl ExampleSource for [TrainingExample] {
    fn len(&self) -> usize {
        <[TrainingExample]>::len(self)
    }
    fn target(&self, i: usize) -> f64 {
        self[i].target
    }
    fn weight(&self, i: usize) -> f64 {
        self[i].weight
    }
    fn write_patch(&self, i: usize, out: &mut [f32]) {
        out.copy_from_slice(&self[i].patch.values);
    }
}

impl ExampleSource for Vec<TrainingExample> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn target(&self, i: usize) -> f64 {
        self[i].target
    }
    fn weight(&self, i: usize) -> f64 {
        self[i].weight
    }
    fn write_patch(&self, i: usize, out: &mut [f32]) {
        out.copy_from_slice(&self[i].patch.values);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(flatten)]
    pub optimizer: AdamaxConfig,
    pub seed: u64,
    /// Refit the per-band input standardization on the training examples
    /// before the first epoch.
    pub fit_standardization: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            batch_size: 128,
            epochs: 10,
            optimizer: AdamaxConfig::default(),
            seed: 0,
            fit_standardization: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Weighted mean cross-entropy.
    pub loss: f64,
    /// Weighted fraction of examples whose thresholded output matches the
    /// thresholded target.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainingLog {
    /// One `epoch<TAB>loss<TAB>accuracy` line per epoch.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for e in &self.epochs {
            let _ = writeln!(s, "{}\t{:.6}\t{:.6}", e.epoch, e.loss, e.accuracy);
        }
        s
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.accuracy)
    }
}

/// Per-band mean and inverse standard deviation of the center frames of all
/// positively weighted examples.
pub fn fit_standardization<S: ExampleSource + ?Sized>(source: &S) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; BAND_COUNT];
    let mut sq = vec![0.0; BAND_COUNT];
    let mut col = vec![0f32; BAND_COUNT];
    let mut n = 0usize;
    for i in 0..source.len() {
        if source.weight(i) <= 0.0 {
            continue;
        }
        source.center_column(i, &mut col);
        for b in 0..BAND_COUNT {
            let v = col[b] as f64;
            sum[b] += v;
            sq[b] += v * v;
        }
        n += 1;
    }
    let n = n.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let scale = sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| {
            let var = (q / n - m * m).max(0.0);
            if var.sqrt() > 1e-6 {
                1.0 / var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

struct BatchSums {
    grads: Gradients,
    loss: f64,
    weight: f64,
    correct: f64,
}

/// Mini-batch training with weighted cross-entropy and Adamax.
///
/// Examples with zero weight are skipped entirely. The example order of each
/// epoch is a seeded shuffle, and each batch gradient is reduced in a fixed
/// order, so `(model, examples, cfg)` determine the result exactly. The
/// returned parameters are rounded to `f32`.
pub fn train<S: ExampleSource + ?Sized>(
    model: &SvdModel,
    source: &S,
    cfg: &TrainerConfig,
) -> Result<(SvdModel, TrainingLog), ModelError> {
    let mut active: Vec<usize> = (0..source.len()).filter(|&i| source.weight(i) > 0.0).collect();
    if active.is_empty() {
        return Err(ModelError::Data("no training example has a positive weight".into()));
    }
    if cfg.batch_size == 0 {
        return Err(ModelError::Config("batch size must be positive".into()));
    }
    let mut model = model.clone();
    let mut log = TrainingLog::default();
    if cfg.epochs == 0 {
        return Ok((model, log));
    }
    if cfg.fit_standardization {
        let (mean, scale) = fit_standardization(source);
        model.set_standardization(mean, scale);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adamax::new(cfg.optimizer, model.parameters());
    for epoch in 1..=cfg.epochs {
        active.shuffle(&mut rng);
        let (mut loss_sum, mut weight_sum, mut correct_sum) = (0.0, 0.0, 0.0);
        for (batch_idx, batch) in active.chunks(cfg.batch_size).enumerate() {
            let partials: Vec<BatchSums> = batch
                .par_chunks(CHUNK)
                .map_init(
                    || (Trace::default(), vec![0f32; BAND_COUNT * PATCH_FRAMES]),
                    |(trace, patch), chunk| {
                        let mut sums = BatchSums {
                            grads: model.zero_gradients(),
                            loss: 0.0,
                            weight: 0.0,
                            correct: 0.0,
                        };
                        for &i in chunk {
                            let (t, w) = (source.target(i), source.weight(i));
                            source.write_patch(i, patch);
                            let (l, p) = model.accumulate_gradient(patch, t, w, &mut sums.grads, trace);
                            sums.loss += w * l;
                            sums.weight += w;
                            if (p >= 0.5) == (t >= 0.5) {
                                sums.correct += w;
                            }
                        }
                        sums
                    },
                )
                .collect();
            let mut it = partials.into_iter();
            let mut total = it.next().expect("batch is non-empty");
            for part in it {
                total.grads.add_assign(&part.grads);
                total.loss += part.loss;
                total.weight += part.weight;
                total.correct += part.correct;
            }
            if !total.loss.is_finite() {
                return Err(ModelError::Numerics {
                    epoch,
                    batch: batch_idx,
                    loss: total.loss,
                });
            }
            total.grads.scale(1.0 / total.weight);
            opt.step(model.parameters_mut(), &total.grads);
            loss_sum += total.loss;
            weight_sum += total.weight;
            correct_sum += total.correct;
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / weight_sum,
            accuracy: correct_sum / weight_sum,
        };
        log::info!("epoch {epoch}: loss {:.6}, accuracy {:.4}", stats.loss, stats.accuracy);
        log.epochs.push(stats);
    }
    model.round_to_f32();
    if !model.is_finite() {
        return Err(ModelError::Numerics {
            epoch: cfg.epochs,
            batch: 0,
            loss: f64::NAN,
        });
    }
    Ok((model, log))
}
