//! Line-oriented annotation text format.
//!
//! ```text
//! #TITLE:Song title
//! #ARTIST:Artist name
//! #OFFSET:12.5
//! #FRAMERATE:4.0
//! : 0 8 5 hel
//! : 8 4 5 lo
//! - 14
//! : 16 8 7  world
//! E
//! ```
//!
//! Header lines come first. Note lines are `: start duration pitch text`
//! where the text is everything after the single space following the pitch,
//! so a leading space in the text survives (it marks a new word). Line breaks
//! are `- units`. The file ends with `E`.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::{AnnotationError, AnnotationFile, NoteAnnotation, TimingParams};

const MANDATORY: [&str; 4] = ["TITLE", "ARTIST", "OFFSET", "FRAMERATE"];

/// Diagnostic produced by [`validate_annotation_text`].
pub type Diagnostic = AnnotationError;

#[derive(PartialEq)]
enum Section {
    Header,
    Body,
    Done,
}

/// Parses annotation text, returning the first error on failure.
pub fn parse_annotation_file(raw_text: &str) -> Result<AnnotationFile, AnnotationError> {
    validate_annotation_text(raw_text).map_err(|mut diags| diags.swap_remove(0))
}

/// Parses annotation text and collects every diagnostic instead of stopping at
/// the first one. Syntax problems are reported alone: invariants are only
/// checked once the file is structurally sound.
pub fn validate_annotation_text(raw_text: &str) -> Result<AnnotationFile, Vec<Diagnostic>> {
    let mut syntax = Vec::new();
    let mut section = Section::Header;
    let mut headers: Vec<(String, String, usize)> = Vec::new();
    let mut seen = HashSet::new();
    let mut notes = Vec::new();
    let mut note_lines = Vec::new();
    let mut breaks = Vec::new();
    let mut break_lines = Vec::new();
    let mut last_line = 0;

    for (idx, line) in raw_text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        if line.is_empty() {
            continue;
        }
        let err = |message: String| AnnotationError::Syntax {
            line: lineno,
            message,
        };
        if section == Section::Done {
            syntax.push(err("content after terminator `E`".into()));
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if section == Section::Body {
                syntax.push(err("header line after the first note or break".into()));
                continue;
            }
            match rest.split_once(':') {
                Some((key, value)) if !key.is_empty() => {
                    if !seen.insert(key.to_string()) {
                        syntax.push(err(format!("duplicate header #{key}")));
                    } else {
                        headers.push((key.to_string(), value.to_string(), lineno));
                    }
                }
                _ => syntax.push(err(format!("malformed header `{line}`"))),
            }
        } else if let Some(rest) = line.strip_prefix(": ") {
            section = Section::Body;
            match parse_note(rest) {
                Ok(n) => {
                    notes.push(n);
                    note_lines.push(lineno);
                }
                Err(m) => syntax.push(err(m)),
            }
        } else if let Some(rest) = line.strip_prefix("- ") {
            section = Section::Body;
            match rest.parse::<u32>() {
                Ok(b) => {
                    breaks.push(b);
                    break_lines.push(lineno);
                }
                Err(_) => syntax.push(err(format!("bad line break position `{rest}`"))),
            }
        } else if line == "E" {
            section = Section::Done;
        } else {
            syntax.push(err(format!("unrecognized line `{line}`")));
        }
    }
    if section != Section::Done {
        syntax.push(AnnotationError::Syntax {
            line: last_line + 1,
            message: "missing terminator `E`".into(),
        });
    }

    let header = |key: &str| headers.iter().find(|(k, _, _)| k == key);
    let mut number = |key: &'static str| -> Option<(f64, usize)> {
        let (_, value, line) = header(key)?;
        match value.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Some((v, *line)),
            _ => {
                syntax.push(AnnotationError::Syntax {
                    line: *line,
                    message: format!("#{key} value `{value}` is not a decimal number"),
                });
                None
            }
        }
    };
    let offset = number("OFFSET");
    let frame_rate = number("FRAMERATE");
    if !syntax.is_empty() {
        return Err(syntax);
    }

    let missing: Vec<Diagnostic> = MANDATORY
        .iter()
        .filter(|k| header(k).is_none())
        .map(|&key| AnnotationError::MissingHeader { key })
        .collect();
    if !missing.is_empty() {
        return Err(missing);
    }

    let (offset_seconds, _) = offset.expect("checked above");
    let (frame_rate, fr_line) = frame_rate.expect("checked above");
    let file = AnnotationFile {
        notes,
        line_breaks: breaks,
        timing: TimingParams {
            offset_seconds,
            frame_rate,
        },
        song_title: header("TITLE").map(|h| h.1.clone()).unwrap_or_default(),
        artist_name: header("ARTIST").map(|h| h.1.clone()).unwrap_or_default(),
        metadata: headers
            .iter()
            .filter(|(k, _, _)| !MANDATORY.contains(&k.as_str()))
            .map(|(k, v, _)| (k.clone(), v.clone()))
            .collect(),
    };
    let mut violations = file.violations(Some((&note_lines, &break_lines)));
    for v in violations.iter_mut() {
        if let AnnotationError::Invariant { line, message } = v {
            if line.is_none() && message.starts_with("FRAMERATE") {
                *line = Some(fr_line);
            }
        }
    }
    if violations.is_empty() {
        Ok(file)
    } else {
        Err(violations)
    }
}

fn parse_note(rest: &str) -> Result<NoteAnnotation, String> {
    let (start, rest) = rest
        .split_once(' ')
        .ok_or_else(|| "note line needs `start duration pitch text`".to_string())?;
    let (duration, rest) = rest
        .split_once(' ')
        .ok_or_else(|| "note line needs `start duration pitch text`".to_string())?;
    let (pitch, text) = rest
        .split_once(' ')
        .ok_or_else(|| "note line is missing its text".to_string())?;
    Ok(NoteAnnotation {
        start_units: start
            .parse()
            .map_err(|_| format!("bad note start `{start}`"))?,
        duration_units: duration
            .parse()
            .map_err(|_| format!("bad note duration `{duration}`"))?,
        pitch: pitch.parse().map_err(|_| format!("bad note pitch `{pitch}`"))?,
        text: text.to_string(),
    })
}

/// Canonical text form. Deterministic, and re-parses to an equal value.
pub fn serialize_annotation_file(file: &AnnotationFile) -> String {
    let mut out = String::new();
    // `{:?}` on f64 is the shortest representation that round-trips.
    let _ = writeln!(out, "#TITLE:{}", file.song_title);
    let _ = writeln!(out, "#ARTIST:{}", file.artist_name);
    let _ = writeln!(out, "#OFFSET:{:?}", file.timing.offset_seconds);
    let _ = writeln!(out, "#FRAMERATE:{:?}", file.timing.frame_rate);
    for (k, v) in &file.metadata {
        let _ = writeln!(out, "#{k}:{v}");
    }
    let mut breaks = file.line_breaks.iter().peekable();
    for note in &file.notes {
        while let Some(&&b) = breaks.peek() {
            if b > note.start_units {
                break;
            }
            let _ = writeln!(out, "- {b}");
            breaks.next();
        }
        let _ = writeln!(
            out,
            ": {} {} {} {}",
            note.start_units, note.duration_units, note.pitch, note.text
        );
    }
    for b in breaks {
        let _ = writeln!(out, "- {b}");
    }
    out.push_str("E\n");
    out
}
