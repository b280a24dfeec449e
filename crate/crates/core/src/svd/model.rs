use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{Architecture, LayerSpec, Shape, INPUT_SHAPE};
use super::ModelError;
use crate::features::{MelPatch, BAND_COUNT, PATCH_FRAMES};

/// A named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Convolutional singing-voice detector: one 80 x 115 patch in, the voice
/// probability of its center frame out.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdModel {
    arch: Architecture,
    shapes: Vec<Shape>,
    /// Weight and bias tensor for each conv/dense layer, in layer order.
    pub(crate) params: Vec<Tensor>,
    /// Per-band input standardization, `(x - mean) * scale`.
    pub(crate) norm_mean: Vec<f64>,
    pub(crate) norm_scale: Vec<f64>,
}

/// Gradient buffers shaped like [`SvdModel`] parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.0.iter_mut().flatten().for_each(|x| *x *= k);
    }
}

/// Per-layer activations kept for the backward pass.
#[derive(Debug, Default)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
    pool_argmax: Vec<Vec<u32>>,
    grad_a: Vec<f64>,
    grad_b: Vec<f64>,
}

impl Trace {
    /// The piecewise-linear branch taken by the last forward pass: the sign
    /// of every activation and the input each pool window selected.
    pub fn activation_pattern(&self) -> (Vec<Vec<bool>>, Vec<Vec<u32>>) {
        let signs = self.acts.iter().skip(1).map(|a| a.iter().map(|&v| v > 0.0).collect()).collect();
        (signs, self.pool_argmax.clone())
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of target `t` against `sigmoid(z)`, computed from the logit.
pub fn cross_entropy_logit(target: f64, z: f64) -> f64 {
    softplus(z) - target * z
}

/// Cross-entropy of target `t` against probability `p`.
pub fn cross_entropy(target: f64, p: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

impl SvdModel {
    /// Deterministic initialization: weights uniform in
    /// `±sqrt(6 / fan_in)`, biases zero, standardization identity. Values are
    /// rounded to `f32` so that saving and loading is exact.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self, ModelError> {
        let shapes = arch.shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut prev = INPUT_SHAPE;
        for (i, (layer, out)) in arch.layers.iter().zip(&shapes).enumerate() {
            let (wshape, fan_in) = match *layer {
                LayerSpec::Conv { filters, kh, kw } => (vec![filters, prev.c, kh, kw], prev.c * kh * kw),
                LayerSpec::Dense { inputs, units } => (vec![units, inputs], inputs),
                LayerSpec::Pool { .. } => {
                    prev = *out;
                    continue;
                }
            };
            let limit = (6.0 / fan_in as f64).sqrt();
            let n: usize = wshape.iter().product();
            let data = (0..n)
                .map(|_| rng.random_range(-limit..limit) as f32 as f64)
                .collect();
            let bias_len = wshape[0];
            params.push(Tensor {
                name: format!("layer{i}.weight"),
                shape: wshape,
                data,
            });
            params.push(Tensor {
                name: format!("layer{i}.bias"),
                shape: vec![bias_len],
                data: vec![0.0; bias_len],
            });
            prev = *out;
        }
        Ok(SvdModel {
            arch,
            shapes,
            params,
            norm_mean: vec![0.0; BAND_COUNT],
            norm_scale: vec![1.0; BAND_COUNT],
        })
    }

    pub(crate) fn from_parts(
        arch: Architecture,
        params: Vec<Tensor>,
        norm_mean: Vec<f64>,
        norm_scale: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let template = SvdModel::init(arch, 0)?;
        if params.len() != template.params.len() {
            return Err(ModelError::Format(format!(
                "expected {} parameter tensors, found {}",
                template.params.len(),
                params.len()
            )));
        }
        for (p, t) in params.iter().zip(&template.params) {
            if p.name != t.name || p.shape != t.shape || p.data.len() != t.data.len() {
                return Err(ModelError::Format(format!(
                    "tensor `{}` {:?} does not match `{}` {:?}",
                    p.name, p.shape, t.name, t.shape
                )));
            }
        }
        if norm_mean.len() != BAND_COUNT || norm_scale.len() != BAND_COUNT {
            return Err(ModelError::Format("standardization must have 80 bands".into()));
        }
        let model = SvdModel {
            params,
            norm_mean,
            norm_scale,
            ..template
        };
        if !model.is_finite() {
            return Err(ModelError::Format("non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn config_hash(&self) -> u64 {
        self.arch.config_hash()
    }

    pub fn parameters(&self) -> &[Tensor] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|t| t.data.len()).sum()
    }

    pub fn standardization(&self) -> (&[f64], &[f64]) {
        (&self.norm_mean, &self.norm_scale)
    }

    pub fn set_standardization(&mut self, mean: Vec<f64>, scale: Vec<f64>) {
        assert_eq!(mean.len(), BAND_COUNT);
        assert_eq!(scale.len(), BAND_COUNT);
        self.norm_mean = mean;
        self.norm_scale = scale;
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
            && self.norm_mean.iter().chain(&self.norm_scale).all(|v| v.is_finite())
    }

    /// Rounds every stored value to `f32` precision.
    pub fn round_to_f32(&mut self) {
        for v in self
            .params
            .iter_mut()
            .flat_map(|t| t.data.iter_mut())
            .chain(self.norm_mean.iter_mut())
            .chain(self.norm_scale.iter_mut())
        {
            *v = *v as f32 as f64;
        }
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients(self.params.iter().map(|t| vec![0.0; t.data.len()]).collect())
    }

    /// Voice probability of the patch's center frame.
    pub fn forward(&self, patch: &MelPatch) -> Result<f64, ModelError> {
        if patch.values.len() != BAND_COUNT * PATCH_FRAMES {
            return Err(ModelError::Shape(format!(
                "patch has {} values, expected {}x{}",
                patch.values.len(),
                BAND_COUNT,
                PATCH_FRAMES
            )));
        }
        Ok(self.probability(&patch.values, &mut Trace::default()))
    }

    /// Forward pass over raw band-major patch values.
    pub fn probability(&self, values: &[f32], trace: &mut Trace) -> f64 {
        sigmoid(self.logit(values, trace))
    }

    pub fn logit(&self, values: &[f32], trace: &mut Trace) -> f64 {
        self.run_forward(values, trace);
        trace.acts.last().unwrap()[0]
    }

    fn run_forward(&self, values: &[f32], trace: &mut Trace) {
        assert_eq!(values.len(), INPUT_SHAPE.len());
        let n_layers = self.arch.layers.len();
        trace.acts.resize_with(n_layers + 1, Vec::new);
        trace.pool_argmax.resize_with(n_layers, Vec::new);

        let input = &mut trace.acts[0];
        input.clear();
        for (band, row) in values.chunks_exact(PATCH_FRAMES).enumerate() {
            let (m, s) = (self.norm_mean[band], self.norm_scale[band]);
            input.extend(row.iter().map(|&v| (v as f64 - m) * s));
        }

        let mut prev = INPUT_SHAPE;
        let mut p = 0;
        for (i, layer) in self.arch.layers.iter().enumerate() {
            let out_shape = self.shapes[i];
            let (before, after) = trace.acts.split_at_mut(i + 1);
            let x = &before[i];
            let y = &mut after[0];
            y.clear();
            y.resize(out_shape.len(), 0.0);
            match *layer {
                LayerSpec::Conv { kh, kw, .. } => {
                    conv_forward(x, prev, &self.params[p].data, &self.params[p + 1].data, kh, kw, y, out_shape);
                    y.iter_mut().for_each(|v| *v = v.max(0.0));
                    p += 2;
                }
                LayerSpec::Pool { ph, pw } => {
                    pool_forward(x, prev, ph, pw, y, out_shape, &mut trace.pool_argmax[i]);
                }
                LayerSpec::Dense { inputs, units } => {
                    let (w, b) = (&self.params[p].data, &self.params[p + 1].data);
                    for u in 0..units {
                        let row = &w[u * inputs..(u + 1) * inputs];
                        y[u] = b[u] + row.iter().zip(x.iter()).map(|(a, c)| a * c).sum::<f64>();
                    }
                    if i + 1 < n_layers {
                        y.iter_mut().for_each(|v| *v = v.max(0.0));
                    }
                    p += 2;
                }
            }
            prev = out_shape;
        }
    }

    /// Adds `weight * d CE(target, p) / d params` to `grads` and returns the
    /// (unweighted) cross-entropy and the probability.
    pub fn accumulate_gradient(
        &self,
        values: &[f32],
        target: f64,
        weight: f64,
        grads: &mut Gradients,
        trace: &mut Trace,
    ) -> (f64, f64) {
        let z = self.logit(values, trace);
        let prob = sigmoid(z);
        let loss = cross_entropy_logit(target, z);
        if weight == 0.0 {
            return (loss, prob);
        }

        let n_layers = self.arch.layers.len();
        let mut upstream = std::mem::take(&mut trace.grad_a);
        let mut downstream = std::mem::take(&mut trace.grad_b);
        upstream.clear();
        upstream.push(weight * (prob - target));

        let mut p = self.params.len();
        for i in (0..n_layers).rev() {
            let in_shape = if i == 0 { INPUT_SHAPE } else { self.shapes[i - 1] };
            let out = &trace.acts[i + 1];
            let x = &trace.acts[i];
            let need_input_grad = i > 0;
            downstream.clear();
            if need_input_grad {
                downstream.resize(in_shape.len(), 0.0);
            }
            match self.arch.layers[i] {
                LayerSpec::Dense { inputs, units } => {
                    p -= 2;
                    if i + 1 < n_layers {
                        for (g, &o) in upstream.iter_mut().zip(out.iter()) {
                            if o <= 0.0 {
                                *g = 0.0;
                            }
                        }
                    }
                    let w = &self.params[p].data;
                    let (gw, gb) = two_mut(&mut grads.0, p);
                    for u in 0..units {
                        let d = upstream[u];
                        if d == 0.0 {
                            continue;
                        }
                        gb[u] += d;
                        let grow = &mut gw[u * inputs..(u + 1) * inputs];
                        axpy(d, x, grow);
                        if need_input_grad {
                            axpy(d, &w[u * inputs..(u + 1) * inputs], &mut downstream);
                        }
                    }
                }
                LayerSpec::Conv { kh, kw, .. } => {
                    p -= 2;
                    for (g, &o) in upstream.iter_mut().zip(out.iter()) {
                        if o <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    let w = &self.params[p].data;
                    let (gw, gb) = two_mut(&mut grads.0, p);
                    conv_backward(
                        x,
                        in_shape,
                        w,
                        kh,
                        kw,
                        &upstream,
                        self.shapes[i],
                        gw,
                        gb,
                        need_input_grad.then_some(&mut downstream[..]),
                    );
                }
                LayerSpec::Pool { .. } => {
                    if need_input_grad {
                        for (&idx, &g) in trace.pool_argmax[i].iter().zip(upstream.iter()) {
                            downstream[idx as usize] += g;
                        }
                    }
                }
            }
            std::mem::swap(&mut upstream, &mut downstream);
        }
        trace.grad_a = upstream;
        trace.grad_b = downstream;
        (loss, prob)
    }
}

fn two_mut(v: &mut [Vec<f64>], i: usize) -> (&mut [f64], &mut [f64]) {
    let (a, b) = v.split_at_mut(i + 1);
    (&mut a[i], &mut b[0])
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[allow(clippy::too_many_arguments)]
fn conv_forward(x: &[f64], s: Shape, w: &[f64], b: &[f64], kh: usize, kw: usize, y: &mut [f64], o: Shape) {
    for f in 0..o.c {
        let plane = &mut y[f * o.h * o.w..(f + 1) * o.h * o.w];
        plane.fill(b[f]);
        for c in 0..s.c {
            let xin = &x[c * s.h * s.w..(c + 1) * s.h * s.w];
            for ki in 0..kh {
                for kj in 0..kw {
                    let wv = w[((f * s.c + c) * kh + ki) * kw + kj];
                    for i in 0..o.h {
                        let src = &xin[(i + ki) * s.w + kj..(i + ki) * s.w + kj + o.w];
                        axpy(wv, src, &mut plane[i * o.w..(i + 1) * o.w]);
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    s: Shape,
    w: &[f64],
    kh: usize,
    kw: usize,
    dy: &[f64],
    o: Shape,
    gw: &mut [f64],
    gb: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    for f in 0..o.c {
        let dplane = &dy[f * o.h * o.w..(f + 1) * o.h * o.w];
        gb[f] += dplane.iter().sum::<f64>();
        for c in 0..s.c {
            let xin = &x[c * s.h * s.w..(c + 1) * s.h * s.w];
            for ki in 0..kh {
                for kj in 0..kw {
                    let widx = ((f * s.c + c) * kh + ki) * kw + kj;
                    let mut acc = 0.0;
                    for i in 0..o.h {
                        let src = &xin[(i + ki) * s.w + kj..(i + ki) * s.w + kj + o.w];
                        acc += dot(&dplane[i * o.w..(i + 1) * o.w], src);
                    }
                    gw[widx] += acc;
                    if let Some(dx) = dx.as_deref_mut() {
                        let wv = w[widx];
                        let dxin = &mut dx[c * s.h * s.w..(c + 1) * s.h * s.w];
                        for i in 0..o.h {
                            let dst = &mut dxin[(i + ki) * s.w + kj..(i + ki) * s.w + kj + o.w];
                            axpy(wv, &dplane[i * o.w..(i + 1) * o.w], dst);
                        }
                    }
                }
            }
        }
    }
}

fn pool_forward(x: &[f64], s: Shape, ph: usize, pw: usize, y: &mut [f64], o: Shape, argmax: &mut Vec<u32>) {
    argmax.clear();
    argmax.resize(o.len(), 0);
    for c in 0..o.c {
        for i in 0..o.h {
            for j in 0..o.w {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for a in 0..ph {
                    let row = (c * s.h + i * ph + a) * s.w + j * pw;
                    for (bo, &v) in x[row..row + pw].iter().enumerate() {
                        if v > best {
                            best = v;
                            best_idx = row + bo;
                        }
                    }
                }
                let out = (c * o.h + i) * o.w + j;
                y[out] = best;
                argmax[out] = best_idx as u32;
            }
        }
    }
}
