//! Synthetic songs for tests, demos and benchmarks.
//!
//! A generated song is an [`AnnotationFile`] with its true timing plus a
//! rendered mix: a harmonic "voice" with vibrato that sings exactly the
//! annotated notes, a bass line, broadband noise and, optionally, a steady
//! reed-like "distractor" instrument that plays only while the voice rests.

mod corpus;

pub use corpus::{train_weak_teacher, write_corpus, CorpusLayout, CorpusOptions};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::annotation::{
    note_to_frequency, rasterize_voice_sequence, AnnotationFile, NoteAnnotation, TimingParams,
};
use crate::features::AudioBuffer;
use crate::svd::PredictionSequence;

const SYLLABLES: &[&str] = &[
    "la", "na", "oh", "yeah", "love", "you", "me", "night", "day", "shine", "go", "home", "fly", "high",
    "ba", "by", "sun", "light", "dream", "on",
];

/// Random monophonic annotation covering roughly `seconds` of audio.
///
/// The grid runs at 8 to 20 units per second and starts between 0.5 and 2 s.
/// Notes last 2 to 9 units, gaps are 0 to 5 units with an occasional longer
/// rest, and a line break follows every 4 to 8 notes.
pub fn random_annotation<R: Rng + ?Sized>(
    rng: &mut R,
    title: &str,
    artist: &str,
    seconds: f64,
) -> AnnotationFile {
    let frame_rate = rng.random_range(8.0..20.0);
    let offset = rng.random_range(0.5..2.0);
    let last_unit = ((seconds - offset - 0.5).max(1.0) * frame_rate) as u32;
    let mut notes = Vec::new();
    let mut breaks = Vec::new();
    let mut unit = 0u32;
    let mut until_break = rng.random_range(4..=8);
    loop {
        let dur = rng.random_range(2..=9);
        if unit + dur > last_unit {
            break;
        }
        let new_word = notes.is_empty() || rng.random_bool(0.6);
        let syl = SYLLABLES[rng.random_range(0..SYLLABLES.len())];
        notes.push(NoteAnnotation {
            start_units: unit,
            duration_units: dur,
            pitch: rng.random_range(-5..=17),
            text: if new_word && !notes.is_empty() {
                format!(" {syl}")
            } else {
                syl.to_string()
            },
        });
        unit += dur;
        until_break -= 1;
        let rest = if until_break == 0 {
            until_break = rng.random_range(4..=8);
            breaks.push(unit);
            rng.random_range(4..=16)
        } else if rng.random_bool(0.15) {
            rng.random_range(6..=14)
        } else {
            rng.random_range(0..=5)
        };
        unit += rest;
    }
    // a break must be followed by a note or sit after the last one
    while breaks.last().is_some_and(|&b| notes.last().is_some_and(|n| b > n.start_units)) {
        if breaks.last() == Some(&(notes.last().unwrap().end_units() as u32)) {
            break;
        }
        breaks.pop();
    }
    AnnotationFile::new(
        title,
        artist,
        TimingParams::new(offset, frame_rate).expect("positive rate"),
        notes,
        breaks,
    )
    .expect("generator respects annotation invariants")
}

/// Plain lyrics whose line structure matches `file`, two lines per paragraph.
pub fn plain_lyrics(file: &AnnotationFile) -> String {
    let mut lines: Vec<String> = vec![String::new()];
    let mut breaks = file.line_breaks.iter().peekable();
    for n in &file.notes {
        while breaks.next_if(|&&b| b <= n.start_units).is_some() {
            lines.push(String::new());
        }
        lines.last_mut().unwrap().push_str(&n.text);
    }
    let lines: Vec<String> = lines
        .into_iter()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();
    lines
        .chunks(2)
        .map(|c| c.join("\n"))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Detector-like curve: the true voice sequence plus clipped Gaussian noise.
pub fn noisy_predictions<R: Rng + ?Sized>(
    rng: &mut R,
    file: &AnnotationFile,
    fr: f64,
    o: f64,
    hop: f64,
    n_frames: usize,
    sigma: f64,
) -> PredictionSequence {
    let avs = rasterize_voice_sequence(file, fr, o, hop, n_frames);
    let noise = Normal::new(0.0, sigma).expect("valid sigma");
    let probs = avs
        .frames
        .iter()
        .map(|&v| (v as f64 + noise.sample(rng)).clamp(0.0, 1.0))
        .collect();
    PredictionSequence::new(probs, hop)
}

/// Uniform noise in `[0, 1]`, unrelated to any annotation.
pub fn uniform_predictions<R: Rng + ?Sized>(rng: &mut R, hop: f64, n_frames: usize) -> PredictionSequence {
    PredictionSequence::new((0..n_frames).map(|_| rng.random_range(0.0..=1.0)).collect(), hop)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixOptions {
    pub sample_rate: u32,
    pub seconds: f64,
    pub voice_gain: f64,
    pub bass_gain: f64,
    pub noise_gain: f64,
    /// Chance that a rest of at least 0.3 s is filled by the distractor.
    pub distractor_rate: f64,
    pub distractor_gain: f64,
}

impl Default for MixOptions {
    fn default() -> Self {
        MixOptions {
            sample_rate: 22050,
            seconds: 8.0,
            voice_gain: 0.25,
            bass_gain: 0.2,
            noise_gain: 0.01,
            distractor_rate: 0.0,
            distractor_gain: 0.25,
        }
    }
}

fn envelope(t: f64, len: f64) -> f64 {
    let ramp = 0.01;
    (t / ramp).min(1.0).min((len - t) / ramp).max(0.0)
}

/// Renders the mix for the annotation's own timing. The distractor only ever
/// sounds while no note is active.
pub fn render_mix<R: Rng + ?Sized>(rng: &mut R, file: &AnnotationFile, opts: &MixOptions) -> AudioBuffer {
    let sr = opts.sample_rate as f64;
    let n = (opts.seconds * sr) as usize;
    let mut out = vec![0f64; n];

    // voice
    let vib_rate = rng.random_range(4.5..6.5);
    for (note, (start, end)) in file.notes.iter().zip(file.note_times()) {
        let f0 = note_to_frequency(note.pitch);
        let (lo, hi) = ((start * sr).max(0.0) as usize, ((end * sr) as usize).min(n));
        let len = end - start;
        let mut phase = 0.0;
        for (i, s) in out.iter_mut().enumerate().take(hi).skip(lo) {
            let t = i as f64 / sr - start;
            let f = f0 * (1.0 + 0.02 * (2.0 * PI * vib_rate * t).sin());
            phase += 2.0 * PI * f / sr;
            let tone: f64 = (1..=6).map(|h| (h as f64 * phase).sin() / h as f64).sum();
            *s += opts.voice_gain * envelope(t, len) * tone;
        }
    }

    // distractor in the rests
    if opts.distractor_rate > 0.0 {
        let mut rests = Vec::new();
        let mut prev_end = 0.0;
        for (s, e) in file.note_times() {
            rests.push((prev_end, s));
            prev_end = e;
        }
        rests.push((prev_end, opts.seconds));
        for (a, b) in rests {
            let (a, b) = (a + 0.03, b - 0.03);
            if b - a < 0.3 || !rng.random_bool(opts.distractor_rate) {
                continue;
            }
            let f0: f64 = rng.random_range(420.0..900.0);
            let (lo, hi) = (((a * sr).max(0.0)) as usize, ((b * sr) as usize).min(n));
            for (i, s) in out.iter_mut().enumerate().take(hi).skip(lo) {
                let t = i as f64 / sr - a;
                let ph = 2.0 * PI * f0 * t;
                let tone: f64 = [1, 3, 5, 7, 9].iter().map(|&h| (h as f64 * ph).sin() / h as f64).sum();
                *s += opts.distractor_gain * envelope(t, b - a) * tone;
            }
        }
    }

    // bass, changing every two seconds, and noise
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut bass_f = 0.0;
    let mut phase = 0.0;
    for (i, s) in out.iter_mut().enumerate() {
        if i % (2 * opts.sample_rate as usize) == 0 {
            bass_f = 55.0 * 2f64.powf(rng.random_range(0..12) as f64 / 12.0);
        }
        phase += 2.0 * PI * bass_f / sr;
        *s += opts.bass_gain * phase.sin() + opts.noise_gain * noise.sample(rng);
    }

    let samples = out.iter().map(|&v| v.clamp(-1.0, 1.0) as f32).collect();
    AudioBuffer::new(samples, opts.sample_rate).expect("finite samples")
}
