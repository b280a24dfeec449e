//! Spectrogram cache: `"MELS"`, `u32` frame count, `u32` band count, `f64` hop
//! seconds, then row-major `f32` values. All little-endian.

use std::path::Path;

use super::{FeatureError, MelSpectrogram, BAND_COUNT};

const MAGIC: &[u8; 4] = b"MELS";
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

pub fn encode_mel_cache(spec: &MelSpectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + spec.as_slice().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(spec.n_frames() as u32).to_le_bytes());
    out.extend_from_slice(&(BAND_COUNT as u32).to_le_bytes());
    out.extend_from_slice(&spec.hop_seconds.to_le_bytes());
    for v in spec.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_mel_cache(bytes: &[u8]) -> Result<MelSpectrogram, FeatureError> {
    let bad = |m: &str| FeatureError::Format(format!("mel cache: {m}"));
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("missing MELS header"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (n_frames, n_bands) = (u32_at(4), u32_at(8));
    if n_bands != BAND_COUNT {
        return Err(bad(&format!("expected {BAND_COUNT} bands, found {n_bands}")));
    }
    let hop = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    if body.len() != n_frames * n_bands * 4 {
        return Err(bad("payload length does not match header"));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    MelSpectrogram::from_frames(data, hop)
}

pub fn write_mel_cache(path: impl AsRef<Path>, spec: &MelSpectrogram) -> Result<(), FeatureError> {
    let path = path.as_ref();
    std::fs::write(path, encode_mel_cache(spec)).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_mel_cache(path: impl AsRef<Path>) -> Result<MelSpectrogram, FeatureError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_mel_cache(&bytes)
}
