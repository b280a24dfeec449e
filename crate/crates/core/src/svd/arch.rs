use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::ModelError;
use crate::features::{BAND_COUNT, PATCH_FRAMES};

/// One layer of the detector. Convolutions are "valid" with stride 1 and a
/// rectifier; pools are non-overlapping max pools; dense layers use a
/// rectifier except the last one, which feeds the logistic output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { filters: usize, kh: usize, kw: usize },
    Pool { ph: usize, pw: usize },
    Dense { inputs: usize, units: usize },
}

/// Channels x height (bands) x width (frames).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }
}

pub const INPUT_SHAPE: Shape = Shape {
    c: 1,
    h: BAND_COUNT,
    w: PATCH_FRAMES,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub layers: Vec<LayerSpec>,
}

impl Default for Architecture {
    /// conv 3x3x8, pool 3x3, conv 3x3x16, pool 3x3, dense 32, dense 1.
    fn default() -> Self {
        Architecture {
            layers: vec![
                LayerSpec::Conv { filters: 8, kh: 3, kw: 3 },
                LayerSpec::Pool { ph: 3, pw: 3 },
                LayerSpec::Conv { filters: 16, kh: 3, kw: 3 },
                LayerSpec::Pool { ph: 3, pw: 3 },
                LayerSpec::Dense { inputs: 16 * 8 * 11, units: 32 },
                LayerSpec::Dense { inputs: 32, units: 1 },
            ],
        }
    }
}

impl Architecture {
    /// A much cheaper variant that pools the input before its single
    /// convolution. Used for corpus-scale experiments.
    pub fn compact() -> Self {
        Architecture {
            layers: vec![
                LayerSpec::Pool { ph: 2, pw: 5 },
                LayerSpec::Conv { filters: 6, kh: 3, kw: 3 },
                LayerSpec::Pool { ph: 2, pw: 3 },
                LayerSpec::Dense { inputs: 6 * 19 * 7, units: 16 },
                LayerSpec::Dense { inputs: 16, units: 1 },
            ],
        }
    }

    /// Output shape of every layer, checking that consecutive layers compose.
    pub fn shapes(&self) -> Result<Vec<Shape>, ModelError> {
        let err = |i: usize, m: String| Err(ModelError::Config(format!("layer {i}: {m}")));
        let mut cur = INPUT_SHAPE;
        let mut flat = false;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match *layer {
                LayerSpec::Conv { filters, kh, kw } => {
                    if flat {
                        return err(i, "convolution after a dense layer".into());
                    }
                    if filters == 0 || kh == 0 || kw == 0 || kh > cur.h || kw > cur.w {
                        return err(i, format!("{kh}x{kw}x{filters} kernel does not fit {}x{}", cur.h, cur.w));
                    }
                    Shape {
                        c: filters,
                        h: cur.h - kh + 1,
                        w: cur.w - kw + 1,
                    }
                }
                LayerSpec::Pool { ph, pw } => {
                    if flat {
                        return err(i, "pooling after a dense layer".into());
                    }
                    if ph == 0 || pw == 0 || ph > cur.h || pw > cur.w {
                        return err(i, format!("{ph}x{pw} pool does not fit {}x{}", cur.h, cur.w));
                    }
                    Shape {
                        c: cur.c,
                        h: cur.h / ph,
                        w: cur.w / pw,
                    }
                }
                LayerSpec::Dense { inputs, units } => {
                    if inputs != cur.len() {
                        return err(i, format!("dense layer expects {inputs} inputs but receives {}", cur.len()));
                    }
                    if units == 0 {
                        return err(i, "dense layer with zero units".into());
                    }
                    flat = true;
                    Shape { c: units, h: 1, w: 1 }
                }
            };
            out.push(cur);
        }
        match self.layers.last() {
            Some(LayerSpec::Dense { units: 1, .. }) => Ok(out),
            _ => Err(ModelError::Config(
                "the last layer must be a dense layer with one unit".into(),
            )),
        }
    }

    /// Canonical text form, one layer per line.
    pub fn descriptor(&self) -> String {
        let mut s = format!("input {} {}\n", INPUT_SHAPE.h, INPUT_SHAPE.w);
        for layer in &self.layers {
            let _ = match *layer {
                LayerSpec::Conv { filters, kh, kw } => writeln!(s, "conv {filters} {kh} {kw}"),
                LayerSpec::Pool { ph, pw } => writeln!(s, "pool {ph} {pw}"),
                LayerSpec::Dense { inputs, units } => writeln!(s, "dense {inputs} {units}"),
            };
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut layers = Vec::new();
        let mut saw_input = false;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || ModelError::Config(format!("architecture line {}: `{line}`", n + 1));
            let mut parts = line.split_whitespace();
            let kind = parts.next().ok_or_else(bad)?;
            let nums: Vec<usize> = parts.map(|p| p.parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
            match (kind, nums.as_slice()) {
                ("input", &[h, w]) => {
                    if (h, w) != (INPUT_SHAPE.h, INPUT_SHAPE.w) {
                        return Err(ModelError::Config(format!(
                            "input must be {}x{}, got {h}x{w}",
                            INPUT_SHAPE.h, INPUT_SHAPE.w
                        )));
                    }
                    saw_input = true;
                }
                ("conv", &[filters, kh, kw]) => layers.push(LayerSpec::Conv { filters, kh, kw }),
                ("pool", &[ph, pw]) => layers.push(LayerSpec::Pool { ph, pw }),
                ("dense", &[inputs, units]) => layers.push(LayerSpec::Dense { inputs, units }),
                _ => return Err(bad()),
            }
        }
        if !saw_input {
            return Err(ModelError::Config("architecture lacks an `input` line".into()));
        }
        let arch = Architecture { layers };
        arch.shapes()?;
        Ok(arch)
    }

    /// First eight bytes of the SHA-256 of the descriptor.
    pub fn config_hash(&self) -> u64 {
        let digest = Sha256::digest(self.descriptor().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}
