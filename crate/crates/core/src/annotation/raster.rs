use super::AnnotationFile;

/// Binary voiced/unvoiced curve on an analysis frame grid. Frame `k` covers
/// the instant `k * hop_seconds`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoiceSequence {
    pub frames: Vec<u8>,
    pub hop_seconds: f64,
}

impl VoiceSequence {
    pub fn new(frames: Vec<u8>, hop_seconds: f64) -> Self {
        debug_assert!(frames.iter().all(|&v| v <= 1));
        debug_assert!(hop_seconds > 0.0);
        VoiceSequence { frames, hop_seconds }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.frames.iter().filter(|&&v| v == 1).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.frames.iter().map(|&v| v as f64).collect()
    }

    /// Resamples onto another hop by nearest-frame lookup.
    pub fn resample_nearest(&self, hop_seconds: f64, n_frames: usize) -> VoiceSequence {
        let frames = (0..n_frames)
            .map(|k| {
                let src = (k as f64 * hop_seconds / self.hop_seconds).round() as usize;
                self.frames.get(src).copied().unwrap_or(0)
            })
            .collect();
        VoiceSequence::new(frames, hop_seconds)
    }
}

/// Smallest integer `k` with `k * hop >= t`, decided with the same float
/// products the membership test uses.
fn first_frame_at_or_after(t: f64, hop: f64) -> i64 {
    let mut k = (t / hop).ceil() as i64;
    while ((k - 1) as f64) * hop >= t {
        k -= 1;
    }
    while (k as f64) * hop < t {
        k += 1;
    }
    k
}

/// Frame range `[lo, hi)` whose instants fall in `[start, end)`.
fn frame_range(start: f64, end: f64, hop: f64) -> (i64, i64) {
    (first_frame_at_or_after(start, hop), first_frame_at_or_after(end, hop))
}

fn note_intervals(file: &AnnotationFile, fr: f64, o: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
    let base = file.timing.offset_seconds + o;
    file.notes.iter().map(move |n| {
        (
            base + n.start_units as f64 / fr,
            base + n.end_units() as f64 / fr,
        )
    })
}

/// Rasterizes the notes with grid rate `fr` and offset correction `o` onto
/// `n_frames` frames of `hop` seconds. Frame `k` is voiced iff some note has
/// `O + o + start/fr <= k*hop < O + o + end/fr`. Notes outside the window are
/// clipped.
pub fn rasterize_voice_sequence(
    file: &AnnotationFile,
    fr: f64,
    o: f64,
    hop: f64,
    n_frames: usize,
) -> VoiceSequence {
    assert!(fr > 0.0 && hop > 0.0, "frame rate and hop must be positive");
    let mut frames = vec![0u8; n_frames];
    for (start, end) in note_intervals(file, fr, o) {
        let (lo, hi) = frame_range(start, end, hop);
        let lo = lo.clamp(0, n_frames as i64) as usize;
        let hi = hi.clamp(0, n_frames as i64) as usize;
        frames[lo..hi.max(lo)].fill(1);
    }
    VoiceSequence::new(frames, hop)
}

/// Rasterizes every note at `o = 0` without clipping. Returns the absolute
/// index of the first returned frame (possibly negative) and the frames from
/// the first voiced frame to the last voiced one.
pub fn rasterize_span(file: &AnnotationFile, fr: f64, hop: f64) -> (i64, VoiceSequence) {
    assert!(fr > 0.0 && hop > 0.0, "frame rate and hop must be positive");
    let ranges: Vec<(i64, i64)> = note_intervals(file, fr, 0.0)
        .map(|(s, e)| frame_range(s, e, hop))
        .filter(|(lo, hi)| hi > lo)
        .collect();
    let (Some(first), Some(last)) = (
        ranges.iter().map(|r| r.0).min(),
        ranges.iter().map(|r| r.1).max(),
    ) else {
        return (0, VoiceSequence::new(Vec::new(), hop));
    };
    let mut frames = vec![0u8; (last - first) as usize];
    for (lo, hi) in ranges {
        frames[(lo - first) as usize..(hi - first) as usize].fill(1);
    }
    (first, VoiceSequence::new(frames, hop))
}
