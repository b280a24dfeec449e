//! Karaoke annotations: the note model, its text format, rasterization to
//! voice sequences and expansion into word/line/paragraph granularity.
//!
//! An annotation is a monophonic sequence of notes placed on an integer grid.
//! Grid unit `u` sits at wall-clock time `offset_seconds + u / frame_rate`, so
//! the two [`TimingParams`] fully determine where the notes land in the audio.

mod format;
mod granularity;
mod raster;

pub use format::{parse_annotation_file, serialize_annotation_file, validate_annotation_text, Diagnostic};
pub use granularity::{expand_granularity, GranularityHierarchy, Level, TimedText};
pub use raster::{rasterize_span, rasterize_voice_sequence, VoiceSequence};

use thiserror::Error;

/// Lowest pitch accepted, in semitones relative to C3.
pub const MIN_PITCH: i32 = -60;
/// Highest pitch accepted, in semitones relative to C3.
pub const MAX_PITCH: i32 = 84;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnotationError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing mandatory header #{key}")]
    MissingHeader { key: &'static str },
    #[error("{}", fmt_invariant(*line, message))]
    Invariant { line: Option<usize>, message: String },
    #[error("annotation has {annotation_lines} lines but the lyrics paragraphs hold {lyrics_lines} lines")]
    Match {
        annotation_lines: usize,
        lyrics_lines: usize,
    },
}

fn fmt_invariant(line: Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("line {l}: {message}"),
        None => message.to_string(),
    }
}

impl AnnotationError {
    fn invariant(line: Option<usize>, message: impl Into<String>) -> Self {
        AnnotationError::Invariant {
            line,
            message: message.into(),
        }
    }
}

/// One sung note: a grid-unit interval, a pitch and its lyric fragment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NoteAnnotation {
    pub start_units: u32,
    pub duration_units: u32,
    /// Semitones relative to C3.
    pub pitch: i32,
    pub text: String,
}

impl NoteAnnotation {
    pub fn end_units(&self) -> u64 {
        self.start_units as u64 + self.duration_units as u64
    }
}

/// Placement of the annotation grid on the audio time axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingParams {
    /// Wall-clock time of grid unit 0, in seconds.
    pub offset_seconds: f64,
    /// Grid units per second.
    pub frame_rate: f64,
}

impl TimingParams {
    pub fn new(offset_seconds: f64, frame_rate: f64) -> Result<Self, AnnotationError> {
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(AnnotationError::invariant(
                None,
                format!("frame rate must be positive and finite, got {frame_rate}"),
            ));
        }
        if !offset_seconds.is_finite() {
            return Err(AnnotationError::invariant(None, "offset must be finite"));
        }
        Ok(TimingParams {
            offset_seconds,
            frame_rate,
        })
    }

    /// Wall-clock time of grid unit `units`.
    pub fn seconds_at(&self, units: u64) -> f64 {
        self.offset_seconds + units as f64 / self.frame_rate
    }
}

/// A parsed and validated karaoke annotation file.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationFile {
    pub notes: Vec<NoteAnnotation>,
    /// Grid units at which a new lyric line starts.
    pub line_breaks: Vec<u32>,
    pub timing: TimingParams,
    pub song_title: String,
    pub artist_name: String,
    /// Header keys other than the mandatory four, in file order.
    pub metadata: Vec<(String, String)>,
}

impl AnnotationFile {
    /// Builds a file and checks every invariant.
    pub fn new(
        song_title: impl Into<String>,
        artist_name: impl Into<String>,
        timing: TimingParams,
        notes: Vec<NoteAnnotation>,
        line_breaks: Vec<u32>,
    ) -> Result<Self, AnnotationError> {
        let file = AnnotationFile {
            notes,
            line_breaks,
            timing,
            song_title: song_title.into(),
            artist_name: artist_name.into(),
            metadata: Vec::new(),
        };
        file.validate()?;
        Ok(file)
    }

    /// Checks every invariant and returns the first violation.
    pub fn validate(&self) -> Result<(), AnnotationError> {
        match self.violations(None).into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// All invariant violations. `note_lines`/`break_lines`, when given, map
    /// note and break indices to source line numbers for diagnostics.
    pub(crate) fn violations(&self, lines: Option<(&[usize], &[usize])>) -> Vec<AnnotationError> {
        let note_line = |i: usize| lines.map(|(n, _)| n[i]);
        let break_line = |i: usize| lines.map(|(_, b)| b[i]);
        let mut out = Vec::new();

        if !(self.timing.frame_rate > 0.0 && self.timing.frame_rate.is_finite()) {
            out.push(AnnotationError::invariant(
                None,
                format!("FRAMERATE must be positive, got {}", self.timing.frame_rate),
            ));
        }
        if !self.timing.offset_seconds.is_finite() {
            out.push(AnnotationError::invariant(None, "OFFSET must be finite"));
        }

        for (i, note) in self.notes.iter().enumerate() {
            if note.duration_units == 0 {
                out.push(AnnotationError::invariant(
                    note_line(i),
                    format!("note {i} has zero duration"),
                ));
            }
            if !(MIN_PITCH..=MAX_PITCH).contains(&note.pitch) {
                out.push(AnnotationError::invariant(
                    note_line(i),
                    format!(
                        "note {i} pitch {} outside [{MIN_PITCH}, {MAX_PITCH}]",
                        note.pitch
                    ),
                ));
            }
            if note.text.is_empty() {
                out.push(AnnotationError::invariant(
                    note_line(i),
                    format!("note {i} has empty text"),
                ));
            }
        }

        for (i, pair) in self.notes.windows(2).enumerate() {
            let (prev, next) = (&pair[0], &pair[1]);
            if next.start_units <= prev.start_units {
                out.push(AnnotationError::invariant(
                    note_line(i + 1),
                    format!(
                        "note {} starts at {} which is not after note {} at {}",
                        i + 1,
                        next.start_units,
                        i,
                        prev.start_units
                    ),
                ));
            } else if (next.start_units as u64) < prev.end_units() {
                out.push(AnnotationError::invariant(
                    note_line(i + 1),
                    format!(
                        "note {} overlaps note {} (starts at {}, previous ends at {})",
                        i + 1,
                        i,
                        next.start_units,
                        prev.end_units()
                    ),
                ));
            }
        }

        let mut prev_break: Option<u32> = None;
        for (i, &b) in self.line_breaks.iter().enumerate() {
            if let Some(p) = prev_break {
                if b <= p {
                    out.push(AnnotationError::invariant(
                        break_line(i),
                        format!("line break {i} at {b} is not after the previous break at {p}"),
                    ));
                    prev_break = Some(b);
                    continue;
                }
            }
            prev_break = Some(b);
            // Index of the first note starting at or after the break.
            let after = self.notes.partition_point(|n| n.start_units < b);
            if after == 0 {
                out.push(AnnotationError::invariant(
                    break_line(i),
                    format!("line break {i} at {b} precedes every note"),
                ));
                continue;
            }
            let before = &self.notes[after - 1];
            if (b as u64) < before.end_units() {
                out.push(AnnotationError::invariant(
                    break_line(i),
                    format!(
                        "line break {i} at {b} falls inside note {} ({}..{})",
                        after - 1,
                        before.start_units,
                        before.end_units()
                    ),
                ));
            }
        }
        // Two breaks inside the same gap would produce an empty line.
        for (i, pair) in self.line_breaks.windows(2).enumerate() {
            let a = self.notes.partition_point(|n| n.start_units < pair[0]);
            let b = self.notes.partition_point(|n| n.start_units < pair[1]);
            if pair[1] > pair[0] && a == b {
                out.push(AnnotationError::invariant(
                    break_line(i + 1),
                    format!("line break {} produces an empty line", i + 1),
                ));
            }
        }
        out
    }

    /// Wall-clock `[start, end)` of every note under the file's own timing.
    pub fn note_times(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.notes.iter().map(move |n| {
            (
                self.timing.seconds_at(n.start_units as u64),
                self.timing.seconds_at(n.end_units()),
            )
        })
    }

    /// Sum of note durations in seconds.
    pub fn total_note_seconds(&self) -> f64 {
        self.notes
            .iter()
            .map(|n| n.duration_units as f64 / self.timing.frame_rate)
            .sum()
    }

    /// Returns a copy whose grid starts at `O + o_hat` with `fr_hat` units per
    /// second. Grid values are untouched.
    pub fn adapt_timing(&self, o_hat: f64, fr_hat: f64) -> Result<AnnotationFile, AnnotationError> {
        let timing = TimingParams::new(self.timing.offset_seconds + o_hat, fr_hat)?;
        Ok(AnnotationFile {
            timing,
            ..self.clone()
        })
    }
}

/// Free-function form of [`AnnotationFile::adapt_timing`].
pub fn adapt_timing(
    file: &AnnotationFile,
    o_hat: f64,
    fr_hat: f64,
) -> Result<AnnotationFile, AnnotationError> {
    file.adapt_timing(o_hat, fr_hat)
}

/// Equal-tempered frequency of a pitch given in semitones above C3 (MIDI 48),
/// with A4 = 440 Hz.
pub fn note_to_frequency(pitch: i32) -> f64 {
    440.0 * 2f64.powf((pitch + 48 - 69) as f64 / 12.0)
}
