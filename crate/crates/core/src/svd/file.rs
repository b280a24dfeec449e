//! Model file layout (little-endian):
//!
//! ```text
//! "SVDM"  u32 version  u64 config hash
//! u32 descriptor length, descriptor (UTF-8 architecture text)
//! u32 tensor count, then per tensor:
//!     u32 name length, name (UTF-8), u32 rank, u32 dims..., f32 values...
//! ```
//!
//! The standardization vectors are stored as the tensors `norm.mean` and
//! `norm.scale` ahead of the layer parameters.

use std::path::Path;

use super::arch::Architecture;
use super::model::{SvdModel, Tensor};
use super::ModelError;

const MAGIC: &[u8; 4] = b"SVDM";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f64]) {
    put_u32(out, name.len());
    out.extend_from_slice(name.as_bytes());
    put_u32(out, shape.len());
    for &d in shape {
        put_u32(out, d);
    }
    for &v in data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub fn encode_model(model: &SvdModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&model.config_hash().to_le_bytes());
    let desc = model.architecture().descriptor();
    put_u32(&mut out, desc.len());
    out.extend_from_slice(desc.as_bytes());
    put_u32(&mut out, model.parameters().len() + 2);
    let (mean, scale) = model.standardization();
    put_tensor(&mut out, "norm.mean", &[mean.len()], mean);
    put_tensor(&mut out, "norm.scale", &[scale.len()], scale);
    for t in model.parameters() {
        put_tensor(&mut out, &t.name, &t.shape, &t.data);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ModelError::Format("model file is truncated".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn string(&mut self) -> Result<String, ModelError> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| ModelError::Format("invalid UTF-8".into()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<SvdModel, ModelError> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(ModelError::Format("not a model file (bad magic)".into()));
    }
    let version = r.u32()? as u32;
    if version != FORMAT_VERSION {
        return Err(ModelError::Format(format!("unsupported model format version {version}")));
    }
    let hash = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
    let arch = Architecture::parse(&r.string()?)?;
    if arch.config_hash() != hash {
        return Err(ModelError::Format("config hash does not match the architecture".into()));
    }
    let count = r.u32()?;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()?;
        let shape: Vec<usize> = (0..rank).map(|_| r.u32()).collect::<Result<_, _>>()?;
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(4).ok_or_else(|| ModelError::Format("tensor too large".into()))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        tensors.push(Tensor { name, shape, data });
    }
    if r.at != bytes.len() {
        return Err(ModelError::Format("trailing bytes after the last tensor".into()));
    }
    if tensors.len() < 2 || tensors[0].name != "norm.mean" || tensors[1].name != "norm.scale" {
        return Err(ModelError::Format("missing standardization tensors".into()));
    }
    let mut it = tensors.into_iter();
    let mean = it.next().unwrap().data;
    let scale = it.next().unwrap().data;
    SvdModel::from_parts(arch, it.collect(), mean, scale)
}

pub fn save_model(path: impl AsRef<Path>, model: &SvdModel) -> Result<(), ModelError> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvdModel, ModelError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact_for_f32_values() {
        let model = SvdModel::init(Architecture::compact(), 9).unwrap();
        let bytes = encode_model(&model);
        assert_eq!(&bytes[..4], b"SVDM");
        assert_eq!(decode_model(&bytes).unwrap(), model);
        assert_eq!(encode_model(&decode_model(&bytes).unwrap()), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let model = SvdModel::init(Architecture::compact(), 9).unwrap();
        let bytes = encode_model(&model);
        assert!(decode_model(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[8] ^= 1; // config hash
        assert!(decode_model(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_model(&extra).is_err());
        assert!(decode_model(b"XXXX").is_err());
    }
}
