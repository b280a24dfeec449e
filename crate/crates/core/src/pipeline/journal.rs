use std::fs::{File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, PipelineError};
use crate::align::AlignmentResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum JournalStatus {
    Match {
        candidate: String,
        score: f64,
        o_hat: f64,
        fr_hat: f64,
        n_overlap_frames: usize,
    },
    /// No candidate reached the threshold; `best_score` is the highest seen.
    Reject { candidate: String, best_score: f64 },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub song_id: String,
    #[serde(flatten)]
    pub status: JournalStatus,
}

impl JournalEntry {
    pub fn matched(song_id: &str, candidate: &str, r: &AlignmentResult) -> Self {
        JournalEntry {
            song_id: song_id.to_string(),
            status: JournalStatus::Match {
                candidate: candidate.to_string(),
                score: r.score,
                o_hat: r.o_hat,
                fr_hat: r.fr_hat,
                n_overlap_frames: r.n_overlap_frames,
            },
        }
    }

    pub fn alignment(&self) -> Option<AlignmentResult> {
        match self.status {
            JournalStatus::Match {
                score,
                o_hat,
                fr_hat,
                n_overlap_frames,
                ..
            } => Some(AlignmentResult {
                o_hat,
                fr_hat,
                score,
                n_overlap_frames,
            }),
            _ => None,
        }
    }
}

/// Reads every complete entry. A truncated final line, left by an
/// interrupted write, is ignored and will be redone.
pub fn read_journal(path: impl AsRef<Path>) -> Result<Vec<JournalEntry>, PipelineError> {
    Ok(read_complete(path.as_ref())?.0)
}

/// Entries plus the byte length of the complete lines holding them.
fn read_complete(path: &Path) -> Result<(Vec<JournalEntry>, usize), PipelineError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(io_err(path)(e)),
    };
    let complete = text.rfind('\n').map_or("", |i| &text[..=i]);
    let mut out = Vec::new();
    for (i, line) in complete.lines().enumerate() {
        let entry = serde_json::from_str(line)
            .map_err(|e| PipelineError::Data(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(entry);
    }
    Ok((out, complete.len()))
}

/// Append-only match journal, one JSON object per line.
pub struct Journal {
    path: PathBuf,
    file: File,
    entries: Vec<JournalEntry>,
}

impl Journal {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let path = path.into();
        let (entries, valid) = read_complete(&path)?;
        let mut file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(io_err(&path))?;
        if file.metadata().map_err(io_err(&path))?.len() != valid as u64 {
            log::warn!("{}: discarding incomplete trailing record", path.display());
            file.set_len(valid as u64).map_err(io_err(&path))?;
        }
        file.seek(SeekFrom::End(0)).map_err(io_err(&path))?;
        Ok(Journal { path, file, entries })
    }

    pub fn entries(&self) -> &[JournalEntry] {
        &self.entries
    }

    pub fn contains(&self, song_id: &str) -> bool {
        self.entries.iter().any(|e| e.song_id == song_id)
    }

    pub fn append(&mut self, batch: &[JournalEntry]) -> Result<(), PipelineError> {
        let mut buf = String::new();
        for e in batch {
            buf.push_str(&serde_json::to_string(e).expect("plain entry"));
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes()).map_err(io_err(&self.path))?;
        self.file.flush().map_err(io_err(&self.path))?;
        self.entries.extend_from_slice(batch);
        Ok(())
    }
}
