//! The annotation fixture corpus and the checks every parsed file must pass.

use std::path::{Path, PathBuf};

use voxalign::annotation::{
    expand_granularity, parse_annotation_file, rasterize_voice_sequence, serialize_annotation_file,
    validate_annotation_text, AnnotationError, AnnotationFile,
};
use voxalign::synth::plain_lyrics;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/annotations")
}

/// `(file, outcome, line)` rows of `expected.tsv`.
pub fn expectations() -> Vec<(String, String, Option<usize>)> {
    let text = std::fs::read_to_string(fixture_dir().join("expected.tsv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let mut cols = l.split('\t');
            let file = cols.next().unwrap().to_string();
            let outcome = cols.next().unwrap().to_string();
            let line = cols.next().unwrap().parse().ok();
            (file, outcome, line)
        })
        .collect()
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

/// Structural properties of a valid file: round trip, rasterization bounds
/// and shifts, offset composition and granularity containment.
pub fn check_invariants(file: &AnnotationFile) -> Result<(), String> {
    file.validate().map_err(|e| format!("validate: {e}"))?;
    let text = serialize_annotation_file(file);
    ensure(text == serialize_annotation_file(&file.clone()), || "serialization not deterministic".into())?;
    let again = parse_annotation_file(&text).map_err(|e| format!("re-parse: {e}"))?;
    ensure(&again == file, || "parse(serialize(f)) != f".into())?;

    let hop = 1.0 / 64.0;
    let fr = file.timing.frame_rate;
    let end = file.note_times().map(|t| t.1).fold(file.timing.offset_seconds, f64::max);
    let n = ((end.max(0.0) + 2.0) / hop).ceil() as usize + 64;
    let base = rasterize_voice_sequence(file, fr, 0.0, hop, n);
    if file.note_times().all(|(s, _)| s >= 0.0) {
        let total = file.total_note_seconds();
        let notes = file.notes.len() as f64;
        let sum = base.voiced_count() as f64;
        ensure(sum <= (total / hop).ceil() + notes && sum >= (total / hop).floor() - notes, || {
            format!("voiced frame count {sum} outside bounds for {total} s of notes")
        })?;
        let k = 5;
        let shifted = rasterize_voice_sequence(file, fr, k as f64 * hop, hop, n);
        let mismatches = (0..n - k).filter(|&i| base.frames[i] != shifted.frames[i + k]).count();
        ensure(mismatches == 0, || format!("shift by {k} hops moved {mismatches} frames differently"))?;
    }

    let (o1, o2) = (0.375, -1.25);
    let stepwise = file.adapt_timing(o2, fr).and_then(|f| f.adapt_timing(o1, fr)).map_err(|e| e.to_string())?;
    let direct = file.adapt_timing(o1 + o2, fr).map_err(|e| e.to_string())?;
    ensure(
        (stepwise.timing.offset_seconds - direct.timing.offset_seconds).abs() < 1e-12
            && stepwise.notes == direct.notes
            && stepwise.timing.frame_rate == direct.timing.frame_rate,
        || "offset corrections do not compose".into(),
    )?;

    if !file.notes.is_empty() {
        let h = expand_granularity(file, &plain_lyrics(file)).map_err(|e| format!("granularity: {e}"))?;
        for (outer, inner) in [(&h.words, &h.notes), (&h.lines, &h.words), (&h.paragraphs, &h.lines)] {
            let mut next = 0;
            for o in outer.iter() {
                ensure(o.children.start == next, || "levels do not partition their children".into())?;
                next = o.children.end;
                for c in &inner[o.children.clone()] {
                    ensure(c.start >= o.start && c.end <= o.end, || format!("{:?} escapes {:?}", c.text, o.text))?;
                }
            }
            ensure(next == inner.len(), || "children left ungrouped".into())?;
        }
    }
    Ok(())
}

fn error_matches(err: &AnnotationError, outcome: &str, line: Option<usize>) -> bool {
    match (err, outcome) {
        (AnnotationError::Syntax { line: l, .. }, "syntax") => Some(*l) == line,
        (AnnotationError::Invariant { line: l, .. }, "invariant") => *l == line,
        (AnnotationError::MissingHeader { .. }, "missing-header") => true,
        _ => false,
    }
}

/// Runs one fixture against its expected outcome.
pub fn check_fixture(name: &str, outcome: &str, line: Option<usize>) -> Result<(), String> {
    let raw = std::fs::read_to_string(fixture_dir().join(name)).map_err(|e| e.to_string())?;
    match (parse_annotation_file(&raw), outcome) {
        (Ok(file), "ok" | "canonical") => {
            if outcome == "canonical" {
                ensure(serialize_annotation_file(&file) == raw, || "not byte-identical after round trip".into())?;
            }
            check_invariants(&file)
        }
        (Ok(_), _) => Err(format!("parsed, expected {outcome}")),
        (Err(e), "ok" | "canonical") => Err(format!("unexpected error: {e}")),
        (Err(e), _) => {
            ensure(error_matches(&e, outcome, line), || format!("got {e:?}, expected {outcome} at {line:?}"))?;
            let all = validate_annotation_text(&raw).expect_err("parse failed");
            ensure(all.first() == Some(&e), || "first diagnostic differs from parse error".into())
        }
    }
}

/// Every fixture with its result.
pub fn run_fixture_corpus() -> Vec<(String, Result<(), String>)> {
    expectations()
        .into_iter()
        .map(|(name, outcome, line)| {
            let r = check_fixture(&name, &outcome, line);
            (name, r)
        })
        .collect()
}
