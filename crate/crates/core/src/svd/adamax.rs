use serde::{Deserialize, Serialize};

use super::model::{Gradients, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamaxConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamaxConfig {
    fn default() -> Self {
        AdamaxConfig {
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with an infinity-norm second moment.
///
/// ```text
/// m <- b1 m + (1 - b1) g
/// u <- max(b2 u, |g|)
/// x <- x - lr / (1 - b1^t) * m / (u + eps)
/// ```
#[derive(Debug, Clone)]
pub struct Adamax {
    cfg: AdamaxConfig,
    step: i32,
    m: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
}

impl Adamax {
    pub fn new(cfg: AdamaxConfig, params: &[Tensor]) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|t| vec![0.0; t.data.len()]).collect();
        Adamax {
            cfg,
            step: 0,
            m: zeros.clone(),
            u: zeros,
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &Gradients) {
        self.step += 1;
        let AdamaxConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.cfg;
        let rate = learning_rate / (1.0 - beta1.powi(self.step));
        for (((t, g), m), u) in params.iter_mut().zip(&grads.0).zip(&mut self.m).zip(&mut self.u) {
            for (((x, &g), m), u) in t.data.iter_mut().zip(g).zip(m.iter_mut()).zip(u.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *u = (beta2 * *u).max(g.abs());
                *x -= rate * *m / (*u + epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // After one step m = (1-b1) g, u = |g|, so the update is lr * sign(g).
        let mut p = vec![Tensor {
            name: "w".into(),
            shape: vec![3],
            data: vec![1.0, 1.0, 1.0],
        }];
        let mut opt = Adamax::new(AdamaxConfig::default(), &p);
        opt.step(&mut p, &Gradients(vec![vec![0.5, -3.0, 0.0]]));
        let d: Vec<f64> = p[0].data.iter().map(|x| x - 1.0).collect();
        assert!((d[0] + 0.002).abs() < 1e-9);
        assert!((d[1] - 0.002).abs() < 1e-9);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = vec![Tensor {
            name: "w".into(),
            shape: vec![2],
            data: vec![3.0, -2.0],
        }];
        let mut opt = Adamax::new(
            AdamaxConfig {
                learning_rate: 0.05,
                ..Default::default()
            },
            &p,
        );
        for _ in 0..2000 {
            let g = Gradients(vec![p[0].data.iter().map(|x| 2.0 * x).collect()]);
            opt.step(&mut p, &g);
        }
        assert!(p[0].data.iter().all(|x| x.abs() < 1e-2), "{:?}", p[0].data);
    }
}
