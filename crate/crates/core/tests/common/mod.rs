//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

pub mod parser;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxalign::features::{BAND_COUNT, PATCH_FRAMES};
use voxalign::svd::{Architecture, LayerSpec, SvdModel, Trace};

/// Small architectures for gradient checking.
pub fn toy_architectures() -> Vec<Architecture> {
    use LayerSpec::*;
    vec![
        // four parameters: 1x1 conv (w, b) and a 1 -> 1 dense layer (w, b)
        Architecture {
            layers: vec![
                Conv { filters: 1, kh: 1, kw: 1 },
                Pool { ph: 80, pw: 115 },
                Dense { inputs: 1, units: 1 },
            ],
        },
        Architecture {
            layers: vec![
                Pool { ph: 8, pw: 23 },
                Conv { filters: 2, kh: 3, kw: 3 },
                Pool { ph: 2, pw: 1 },
                Dense { inputs: 24, units: 3 },
                Dense { inputs: 3, units: 1 },
            ],
        },
        Architecture {
            layers: vec![
                Pool { ph: 16, pw: 5 },
                Conv { filters: 3, kh: 2, kw: 4 },
                Pool { ph: 2, pw: 4 },
                Conv { filters: 2, kh: 1, kw: 2 },
                Dense { inputs: 16, units: 1 },
            ],
        },
    ]
}

pub fn loss_of(model: &SvdModel, patch: &[f32], target: f64) -> f64 {
    loss_and_pattern(model, patch, target).0
}

type Pattern = (Vec<Vec<bool>>, Vec<Vec<u32>>);

fn loss_and_pattern(model: &SvdModel, patch: &[f32], target: f64) -> (f64, Pattern) {
    let mut trace = Trace::default();
    let z = model.logit(patch, &mut trace);
    (voxalign::svd::cross_entropy_logit(target, z), trace.activation_pattern())
}

/// Worst relative error between analytic and central-difference gradients
/// over every parameter of one random draw.
pub struct GradCheck {
    pub worst_relative: f64,
    pub parameters: usize,
    /// Parameters whose `±eps` probes crossed a ReLU or pooling switch and
    /// were re-probed with a smaller step.
    pub narrowed: usize,
    /// Parameters sitting on a switch even at the smallest step; not compared.
    pub on_kink: usize,
}

pub fn random_draw(arch: &Architecture, seed: u64) -> (SvdModel, Vec<f32>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = SvdModel::init(arch.clone(), seed).unwrap();
    for t in model.parameters_mut() {
        for v in t.data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    let patch: Vec<f32> = (0..BAND_COUNT * PATCH_FRAMES)
        .map(|_| rng.random_range(-2.0f32..2.0))
        .collect();
    (model, patch, rng.random_range(0.0..1.0))
}

/// Central differences with step `eps`. When the probes land on a different
/// linear piece than the unperturbed network, the step is divided by ten
/// until they agree (down to `eps / 1000`).
pub fn gradient_check(model: &SvdModel, patch: &[f32], target: f64, eps: f64) -> GradCheck {
    let mut grads = model.zero_gradients();
    model.accumulate_gradient(patch, target, 1.0, &mut grads, &mut Trace::default());
    let (_, base) = loss_and_pattern(model, patch, target);
    let mut probe = model.clone();
    let mut check = GradCheck {
        worst_relative: 0.0,
        parameters: 0,
        narrowed: 0,
        on_kink: 0,
    };
    for ti in 0..model.parameters().len() {
        for k in 0..model.parameters()[ti].data.len() {
            let orig = model.parameters()[ti].data[k];
            let mut step = eps;
            let numeric = loop {
                probe.parameters_mut()[ti].data[k] = orig + step;
                let (up, pu) = loss_and_pattern(&probe, patch, target);
                probe.parameters_mut()[ti].data[k] = orig - step;
                let (down, pd) = loss_and_pattern(&probe, patch, target);
                probe.parameters_mut()[ti].data[k] = orig;
                if pu == base && pd == base {
                    break Some((up - down) / (2.0 * step));
                }
                if step < eps / 999.0 {
                    break None;
                }
                step /= 10.0;
            };
            check.parameters += 1;
            if step != eps {
                check.narrowed += 1;
            }
            let Some(numeric) = numeric else {
                check.on_kink += 1;
                continue;
            };
            let analytic = grads.0[ti][k];
            let scale = analytic.abs().max(numeric.abs());
            // Both effectively zero (a dead unit): nothing to compare.
            let rel = if scale < 1e-8 { 0.0 } else { (analytic - numeric).abs() / scale };
            check.worst_relative = check.worst_relative.max(rel);
        }
    }
    check
}

/// Linearly separable patches: class 0 carries extra energy in the lower 40
/// bands, class 1 in the upper 40. Background is uniform noise.
pub fn separable_examples(n: usize, seed: u64) -> Vec<voxalign::svd::TrainingExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let class = i % 2;
            let gain = rng.random_range(0.5f32..1.5);
            let values = (0..BAND_COUNT * PATCH_FRAMES)
                .map(|j| {
                    let band = j / PATCH_FRAMES;
                    let lifted = (band >= BAND_COUNT / 2) == (class == 1);
                    rng.random_range(0.0f32..1.0) + if lifted { gain } else { 0.0 }
                })
                .collect();
            voxalign::svd::TrainingExample::new(
                voxalign::features::MelPatch { values, center_frame: i },
                class as f64,
                1.0,
            )
            .unwrap()
        })
        .collect()
}
