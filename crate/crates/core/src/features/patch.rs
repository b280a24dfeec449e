use super::{MelSpectrogram, BAND_COUNT, PATCH_CENTER, PATCH_FRAMES};

/// An 80 x 115 window of the spectrogram, band-major (`values[band * 115 + col]`).
#[derive(Debug, Clone, PartialEq)]
pub struct MelPatch {
    pub values: Vec<f32>,
    pub center_frame: usize,
}

impl MelPatch {
    pub fn value(&self, band: usize, col: usize) -> f32 {
        self.values[band * PATCH_FRAMES + col]
    }
}

/// Reflects `i` into `0..n` without repeating the edge sample
/// (`-1 -> 1`, `n -> n - 2`).
pub fn reflect_index(i: i64, n: usize) -> usize {
    assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    if m < n as i64 {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Fills `out` (length 80 * 115) with the patch centered on `frame`.
pub fn write_patch(spec: &MelSpectrogram, frame: usize, out: &mut [f32]) {
    debug_assert_eq!(out.len(), BAND_COUNT * PATCH_FRAMES);
    let n = spec.n_frames();
    for col in 0..PATCH_FRAMES {
        let src = spec.frame(reflect_index(frame as i64 + col as i64 - PATCH_CENTER as i64, n));
        for (band, &v) in src.iter().enumerate() {
            out[band * PATCH_FRAMES + col] = v;
        }
    }
}

pub fn patch_at(spec: &MelSpectrogram, frame: usize) -> MelPatch {
    let mut values = vec![0f32; BAND_COUNT * PATCH_FRAMES];
    write_patch(spec, frame, &mut values);
    MelPatch {
        values,
        center_frame: frame,
    }
}

/// One patch per frame, stride 1, reflection-padded at the edges.
pub fn extract_patches(spec: &MelSpectrogram) -> impl ExactSizeIterator<Item = MelPatch> + '_ {
    (0..spec.n_frames()).map(move |k| patch_at(spec, k))
}
