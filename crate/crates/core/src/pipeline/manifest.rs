use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_id, io_err, PipelineError};

/// One song: its annotation file and the audio tracks that might carry it.
/// Paths are kept as written; relative ones resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub song_id: String,
    pub annotation: String,
    pub candidates: Vec<String>,
    pub artist: String,
}

/// A JSON-lines list of [`ManifestRecord`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateManifest {
    pub records: Vec<ManifestRecord>,
    pub base_dir: PathBuf,
}

impl CandidateManifest {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: String| PipelineError::Manifest(format!("line {}: {m}", i + 1));
            let rec: ManifestRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            check_id(&rec.song_id).map_err(bad)?;
            if rec.candidates.is_empty() {
                return Err(bad(format!("song {} has no candidates", rec.song_id)));
            }
            if rec.annotation.is_empty() || rec.candidates.iter().any(|c| c.is_empty() || c.contains('\0')) {
                return Err(bad("empty or invalid path".into()));
            }
            if !seen.insert(rec.song_id.clone()) {
                return Err(bad(format!("duplicate song_id {}", rec.song_id)));
            }
            records.push(rec);
        }
        if records.is_empty() {
            return Err(PipelineError::Manifest("manifest lists no songs".into()));
        }
        Ok(CandidateManifest {
            records,
            base_dir: base_dir.into(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }
}
