use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::journal::{Journal, JournalEntry, JournalStatus};
use super::training_set::write_predictions;
use super::{io_err, CandidateManifest, ManifestRecord, PipelineError};
use crate::align::{search_alignment, select_best_candidate, AlignmentResult, SearchConfig};
use crate::annotation::{parse_annotation_file, serialize_annotation_file};
use crate::features::{compute_mel_spectrogram, decode_audio, write_mel_cache, FeatureConfig, MelSpectrogram};
use crate::svd::{predict_sequence, PredictionSequence, SvdModel};

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOptions {
    pub features: FeatureConfig,
    pub search: SearchConfig,
    pub median_width: usize,
    /// Songs processed concurrently; also the journal flush interval.
    pub jobs: usize,
    /// Receives `journal.jsonl`, `adapted/` and `cache/`.
    pub work_dir: PathBuf,
}

/// A song whose best candidate reached the threshold, with the files the
/// later stages read.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    pub song_id: String,
    pub candidate_id: String,
    pub audio: PathBuf,
    pub result: AlignmentResult,
    pub adapted: PathBuf,
    pub mel_cache: PathBuf,
    pub predictions: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// One entry per manifest song, in manifest order.
    pub entries: Vec<JournalEntry>,
    pub matches: Vec<MatchRecord>,
    /// Songs handled by this call rather than taken from the journal.
    pub processed: usize,
}

impl MatchOutcome {
    pub fn rejected(&self) -> usize {
        self.count(|s| matches!(s, JournalStatus::Reject { .. }))
    }

    pub fn errors(&self) -> usize {
        self.count(|s| matches!(s, JournalStatus::Error { .. }))
    }

    fn count(&self, f: impl Fn(&JournalStatus) -> bool) -> usize {
        self.entries.iter().filter(|e| f(&e.status)).count()
    }
}

pub(crate) fn journal_path(work_dir: &Path) -> PathBuf {
    work_dir.join("journal.jsonl")
}
pub(crate) fn adapted_path(work_dir: &Path, song: &str) -> PathBuf {
    work_dir.join("adapted").join(format!("{song}.txt"))
}
pub(crate) fn mel_cache_path(work_dir: &Path, song: &str) -> PathBuf {
    work_dir.join("cache").join(format!("{song}.mels"))
}
pub(crate) fn predictions_path(work_dir: &Path, song: &str) -> PathBuf {
    work_dir.join("cache").join(format!("{song}.prds"))
}

struct Scored {
    id: String,
    result: AlignmentResult,
    spec: MelSpectrogram,
    pred: PredictionSequence,
}

fn score_candidate(
    rec: &ManifestRecord,
    id: &str,
    manifest: &CandidateManifest,
    file: &crate::annotation::AnnotationFile,
    teacher: &SvdModel,
    opts: &MatchOptions,
) -> Result<Scored, PipelineError> {
    let audio = decode_audio(manifest.resolve(id), &opts.features)?;
    let spec = compute_mel_spectrogram(&audio, &opts.features)?;
    let pred = predict_sequence(teacher, &spec, opts.median_width)?;
    let result = if pred.is_degenerate() {
        AlignmentResult {
            o_hat: 0.0,
            fr_hat: file.timing.frame_rate,
            score: 0.0,
            n_overlap_frames: 0,
        }
    } else {
        search_alignment(file, &pred, &opts.search)?
    };
    log::debug!("{}: {id} score {:.4}", rec.song_id, result.score);
    Ok(Scored {
        id: id.to_string(),
        result,
        spec,
        pred,
    })
}

fn match_song(
    rec: &ManifestRecord,
    manifest: &CandidateManifest,
    teacher: &SvdModel,
    opts: &MatchOptions,
) -> Result<JournalEntry, PipelineError> {
    let error = |message: String| JournalEntry {
        song_id: rec.song_id.clone(),
        status: JournalStatus::Error { message },
    };
    let text = match std::fs::read_to_string(manifest.resolve(&rec.annotation)) {
        Ok(t) => t,
        Err(e) => return Ok(error(format!("{}: {e}", rec.annotation))),
    };
    let file = match parse_annotation_file(&text) {
        Ok(f) => f,
        Err(e) => return Ok(error(format!("{}: {e}", rec.annotation))),
    };

    let mut scored = Vec::new();
    let mut failures = Vec::new();
    for id in &rec.candidates {
        match score_candidate(rec, id, manifest, &file, teacher, opts) {
            Ok(s) => scored.push(s),
            Err(e) => {
                log::warn!("{}: candidate {id}: {e}", rec.song_id);
                failures.push(format!("{id}: {e}"));
            }
        }
    }
    if scored.is_empty() {
        return Ok(error(failures.join("; ")));
    }

    let results: Vec<(String, AlignmentResult)> = scored.iter().map(|s| (s.id.clone(), s.result)).collect();
    let Some((best_id, best)) = select_best_candidate(&results, &opts.search) else {
        let top = scored
            .iter()
            .min_by(|a, b| b.result.score.total_cmp(&a.result.score).then_with(|| a.id.cmp(&b.id)))
            .expect("non-empty");
        return Ok(JournalEntry {
            song_id: rec.song_id.clone(),
            status: JournalStatus::Reject {
                candidate: top.id.clone(),
                best_score: top.result.score,
            },
        });
    };
    if best.score < opts.search.t_corr {
        return Err(PipelineError::Data(format!("{}: selected score below threshold", rec.song_id)));
    }
    let chosen = scored.iter().find(|s| s.id == best_id).expect("selected from scored");
    let adapted = file.adapt_timing(best.o_hat, best.fr_hat)?;
    let path = adapted_path(&opts.work_dir, &rec.song_id);
    std::fs::write(&path, serialize_annotation_file(&adapted)).map_err(io_err(&path))?;
    write_mel_cache(mel_cache_path(&opts.work_dir, &rec.song_id), &chosen.spec)?;
    write_predictions(predictions_path(&opts.work_dir, &rec.song_id), &chosen.pred)?;
    Ok(JournalEntry::matched(&rec.song_id, &best_id, &best))
}

/// Runs the teacher over every candidate of every song not yet in the
/// journal, aligns, and records a match, rejection or error per song.
///
/// Songs run `opts.jobs` at a time; each finished group is appended to the
/// journal in manifest order, so an interrupted run resumes where it stopped
/// and reruns add nothing.
pub fn run_matching(
    manifest: &CandidateManifest,
    teacher: &SvdModel,
    opts: &MatchOptions,
) -> Result<MatchOutcome, PipelineError> {
    opts.search.validate()?;
    for sub in ["adapted", "cache"] {
        let d = opts.work_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let mut journal = Journal::open(journal_path(&opts.work_dir))?;
    let todo: Vec<&ManifestRecord> = manifest
        .records
        .iter()
        .filter(|r| !journal.contains(&r.song_id))
        .collect();
    let jobs = opts.jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    for group in todo.chunks(jobs) {
        let entries: Vec<JournalEntry> = pool.install(|| {
            group
                .par_iter()
                .map(|rec| match_song(rec, manifest, teacher, opts))
                .collect::<Result<_, _>>()
        })?;
        for e in &entries {
            log::info!("{}: {}", e.song_id, status_word(&e.status));
        }
        journal.append(&entries)?;
    }

    let mut outcome = collect_outcome(manifest, journal.entries(), &opts.work_dir)?;
    outcome.processed = todo.len();
    Ok(outcome)
}

/// The outcome recorded in `work_dir`'s journal, without matching anything.
/// Fails if a manifest song has no journal entry yet.
pub fn journaled_outcome(manifest: &CandidateManifest, work_dir: &Path) -> Result<MatchOutcome, PipelineError> {
    let entries = super::journal::read_journal(journal_path(work_dir))?;
    collect_outcome(manifest, &entries, work_dir)
}

fn collect_outcome(
    manifest: &CandidateManifest,
    journal: &[JournalEntry],
    work_dir: &Path,
) -> Result<MatchOutcome, PipelineError> {
    let mut entries = Vec::with_capacity(manifest.records.len());
    let mut matches = Vec::new();
    for rec in &manifest.records {
        let e = journal
            .iter()
            .rev()
            .find(|e| e.song_id == rec.song_id)
            .ok_or_else(|| PipelineError::Data(format!("song {} has not been matched yet", rec.song_id)))?
            .clone();
        if let (JournalStatus::Match { candidate, .. }, Some(result)) = (&e.status, e.alignment()) {
            matches.push(MatchRecord {
                song_id: rec.song_id.clone(),
                candidate_id: candidate.clone(),
                audio: manifest.resolve(candidate),
                result,
                adapted: adapted_path(work_dir, &rec.song_id),
                mel_cache: mel_cache_path(work_dir, &rec.song_id),
                predictions: predictions_path(work_dir, &rec.song_id),
            });
        }
        entries.push(e);
    }
    Ok(MatchOutcome {
        entries,
        matches,
        processed: 0,
    })
}

fn status_word(s: &JournalStatus) -> String {
    match s {
        JournalStatus::Match { candidate, score, .. } => format!("match {candidate} ({score:.4})"),
        JournalStatus::Reject { best_score, .. } => format!("rejected (best {best_score:.4})"),
        JournalStatus::Error { message } => format!("error: {message}"),
    }
}
