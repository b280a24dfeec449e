use std::fmt::Write as _;

use super::{AnnotationError, AnnotationFile};

/// Marker a note carries when it only prolongs the previous syllable.
const CONTINUATION: char = '~';

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Note,
    Word,
    Line,
    Paragraph,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Note => "note",
            Level::Word => "word",
            Level::Line => "line",
            Level::Paragraph => "paragraph",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedText {
    pub start: f64,
    pub end: f64,
    pub text: String,
    /// Index range into the level below (note indices for words, and so on).
    pub children: std::ops::Range<usize>,
}

/// Notes, words, lines and paragraphs with their time spans in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct GranularityHierarchy {
    pub notes: Vec<TimedText>,
    pub words: Vec<TimedText>,
    pub lines: Vec<TimedText>,
    pub paragraphs: Vec<TimedText>,
}

impl GranularityHierarchy {
    pub fn level(&self, level: Level) -> &[TimedText] {
        match level {
            Level::Note => &self.notes,
            Level::Word => &self.words,
            Level::Line => &self.lines,
            Level::Paragraph => &self.paragraphs,
        }
    }

    /// `level<TAB>start<TAB>end<TAB>text` records, notes first, then words,
    /// lines and paragraphs.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for level in [Level::Note, Level::Word, Level::Line, Level::Paragraph] {
            for item in self.level(level) {
                let _ = writeln!(
                    out,
                    "{}\t{:.6}\t{:.6}\t{}",
                    level.as_str(),
                    item.start,
                    item.end,
                    item.text.replace(['\t', '\n'], " ")
                );
            }
        }
        out
    }
}

fn strip_markers(text: &str) -> String {
    text.chars().filter(|&c| c != CONTINUATION).collect()
}

fn group(children: &[TimedText], ranges: &[std::ops::Range<usize>], sep: &str) -> Vec<TimedText> {
    ranges
        .iter()
        .map(|r| {
            let items = &children[r.clone()];
            TimedText {
                start: items.iter().map(|c| c.start).fold(f64::INFINITY, f64::min),
                end: items.iter().map(|c| c.end).fold(f64::NEG_INFINITY, f64::max),
                text: items
                    .iter()
                    .map(|c| c.text.as_str())
                    .filter(|t| !t.is_empty())
                    .collect::<Vec<_>>()
                    .join(sep),
                children: r.clone(),
            }
        })
        .collect()
}

/// Splits `0..len` wherever `is_boundary(i)` holds for `i > 0`.
fn runs(len: usize, mut is_boundary: impl FnMut(usize) -> bool) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..len {
        if is_boundary(i) {
            out.push(start..i);
            start = i;
        }
    }
    if len > 0 {
        out.push(start..len);
    }
    out
}

/// Line counts of each paragraph in plain lyrics (blank lines separate
/// paragraphs).
fn paragraph_line_counts(plain_lyrics: &str) -> Vec<usize> {
    let mut counts = Vec::new();
    let mut current = 0;
    for line in plain_lyrics.lines() {
        if line.trim().is_empty() {
            if current > 0 {
                counts.push(current);
                current = 0;
            }
        } else {
            current += 1;
        }
    }
    if current > 0 {
        counts.push(current);
    }
    counts
}

/// Builds the four-level lyric hierarchy.
///
/// A note whose text starts with a space begins a new word; so does the first
/// note after a line break. Lines are delimited by the file's line breaks and
/// are grouped into paragraphs by matching line counts, in order, against the
/// blank-line separated paragraphs of `plain_lyrics`.
pub fn expand_granularity(
    file: &AnnotationFile,
    plain_lyrics: &str,
) -> Result<GranularityHierarchy, AnnotationError> {
    let notes: Vec<TimedText> = file
        .notes
        .iter()
        .zip(file.note_times())
        .enumerate()
        .map(|(i, (n, (start, end)))| TimedText {
            start,
            end,
            text: n.text.clone(),
            children: i..i + 1,
        })
        .collect();

    // line index of each note
    let line_of: Vec<usize> = file
        .notes
        .iter()
        .map(|n| file.line_breaks.partition_point(|&b| b <= n.start_units))
        .collect();

    let word_ranges = runs(notes.len(), |i| {
        file.notes[i].text.starts_with(' ') || line_of[i] != line_of[i - 1]
    });
    let words: Vec<TimedText> = word_ranges
        .iter()
        .map(|r| {
            let items = &notes[r.clone()];
            let text: String = items.iter().map(|n| strip_markers(&n.text)).collect();
            TimedText {
                start: items[0].start,
                end: items.iter().map(|n| n.end).fold(f64::NEG_INFINITY, f64::max),
                text: text.trim().to_string(),
                children: r.clone(),
            }
        })
        .collect();

    let word_line: Vec<usize> = word_ranges.iter().map(|r| line_of[r.start]).collect();
    let line_ranges = runs(words.len(), |i| word_line[i] != word_line[i - 1]);
    let lines = group(&words, &line_ranges, " ");

    let counts = paragraph_line_counts(plain_lyrics);
    let lyrics_lines: usize = counts.iter().sum();
    if lyrics_lines != lines.len() {
        return Err(AnnotationError::Match {
            annotation_lines: lines.len(),
            lyrics_lines,
        });
    }
    let mut paragraph_ranges = Vec::with_capacity(counts.len());
    let mut at = 0;
    for c in counts {
        paragraph_ranges.push(at..at + c);
        at += c;
    }
    let paragraphs = group(&lines, &paragraph_ranges, " / ");

    Ok(GranularityHierarchy {
        notes,
        words,
        lines,
        paragraphs,
    })
}
