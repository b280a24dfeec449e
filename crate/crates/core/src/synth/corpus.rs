use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{random_annotation, render_mix, MixOptions};
use crate::annotation::{rasterize_voice_sequence, serialize_annotation_file, AnnotationFile, TimingParams};
use crate::config::RunConfig;
use crate::features::{compute_mel_spectrogram, write_patch, write_wav, AudioBuffer, FeatureConfig, MelSpectrogram};
use crate::pipeline::{artist_filter_split, io_err, EvalTrack, ManifestRecord, PipelineError, SplitItem};
use crate::svd::{save_model, train, Architecture, ExampleSource, SvdModel, TrainerConfig};

/// Shape of a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusOptions {
    pub seed: u64,
    pub tracks: usize,
    pub artists: usize,
    pub seconds: f64,
    /// Chance that a long rest in a corpus track holds the distractor.
    pub distractor_rate: f64,
    /// Share of tracks (by artist) held out for evaluation.
    pub test_fraction: f64,
    /// Every `decoy_every`-th song also lists a voice-free decoy candidate;
    /// 0 disables decoys.
    pub decoy_every: usize,
    /// Karaoke files are shifted by up to this many seconds...
    pub max_shift: f64,
    /// ...and their grid rate scaled by up to this fraction.
    pub max_stretch: f64,
    /// Distractor-free tracks the teacher learns from.
    pub teacher_tracks: usize,
    pub teacher_epochs: usize,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            seed: 0,
            tracks: 60,
            artists: 12,
            seconds: 10.0,
            distractor_rate: 0.4,
            test_fraction: 0.25,
            decoy_every: 5,
            max_shift: 2.0,
            max_stretch: 0.03,
            teacher_tracks: 3,
            teacher_epochs: 3,
        }
    }
}

/// What [`write_corpus`] produced, all under one directory.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusLayout {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub manifest: PathBuf,
    pub eval_manifest: PathBuf,
    pub teacher: PathBuf,
    pub train_songs: Vec<String>,
    pub test_tracks: Vec<String>,
}

struct Frames {
    specs: Vec<MelSpectrogram>,
    rows: Vec<(usize, usize, f64)>,
}

impl ExampleSource for Frames {
    fn len(&self) -> usize {
        self.rows.len()
    }
    fn target(&self, i: usize) -> f64 {
        self.rows[i].2
    }
    fn weight(&self, _: usize) -> f64 {
        1.0
    }
    fn write_patch(&self, i: usize, out: &mut [f32]) {
        let (s, k, _) = self.rows[i];
        write_patch(&self.specs[s], k, out);
    }
    fn center_column(&self, i: usize, out: &mut [f32]) {
        let (s, k, _) = self.rows[i];
        out.copy_from_slice(self.specs[s].frame(k));
    }
}

/// A deliberately weak detector: the compact network trained briefly on a
/// few tracks without any distractor, so it has never seen a non-vocal
/// harmonic instrument and tends to call one voice.
pub fn train_weak_teacher(seed: u64, tracks: usize, seconds: f64, epochs: usize) -> Result<SvdModel, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = FeatureConfig::default();
    let mut data = Frames {
        specs: Vec::new(),
        rows: Vec::new(),
    };
    for i in 0..tracks {
        let file = random_annotation(&mut rng, "teacher", "teacher", seconds);
        let opts = MixOptions {
            seconds,
            ..Default::default()
        };
        let spec = compute_mel_spectrogram(&render_mix(&mut rng, &file, &opts), &features)?;
        let labels = rasterize_voice_sequence(&file, file.timing.frame_rate, 0.0, spec.hop_seconds, spec.n_frames());
        data.rows
            .extend(labels.frames.iter().enumerate().map(|(k, &v)| (i, k, v as f64)));
        data.specs.push(spec);
    }
    let init = SvdModel::init(Architecture::compact(), seed)?;
    let cfg = TrainerConfig {
        epochs,
        seed,
        ..Default::default()
    };
    Ok(train(&init, &data, &cfg)?.0)
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("plain record") + "\n")
        .collect()
}

/// Writes a complete synthetic bootstrap setup to `dir`:
///
/// * `audio/` mixes (and voice-free decoys), `truth/` annotations with the
///   true timing, `karaoke/` copies with shifted offset and scaled rate;
/// * `manifest.jsonl` for the training artists and `eval.jsonl` for the
///   held-out ones, split so no artist is on both sides;
/// * `teacher.svdm`, a weak teacher from [`train_weak_teacher`];
/// * `voxalign.toml`, a run config tying these together.
pub fn write_corpus(dir: impl AsRef<Path>, opts: &CorpusOptions) -> Result<CorpusLayout, PipelineError> {
    let dir = dir.as_ref();
    for sub in ["audio", "truth", "karaoke"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mix = MixOptions {
        seconds: opts.seconds,
        distractor_rate: opts.distractor_rate,
        ..Default::default()
    };

    let mut items = Vec::new();
    let mut songs: Vec<(String, String, AnnotationFile)> = Vec::new();
    for i in 0..opts.tracks {
        let id = format!("song-{i:03}");
        let artist = format!("artist-{:02}", i % opts.artists.max(1));
        let truth = random_annotation(&mut rng, &format!("Song {i}"), &artist, opts.seconds);
        write_wav(dir.join("audio").join(format!("{id}.wav")), &render_mix(&mut rng, &truth, &mix))?;
        write_text(&dir.join("truth").join(format!("{id}.txt")), &serialize_annotation_file(&truth))?;

        let shift = rng.random_range(-opts.max_shift..=opts.max_shift);
        let stretch = 1.0 + rng.random_range(-opts.max_stretch..=opts.max_stretch);
        let karaoke = AnnotationFile {
            timing: TimingParams::new(
                truth.timing.offset_seconds - shift,
                truth.timing.frame_rate / stretch,
            )?,
            ..truth.clone()
        };
        write_text(&dir.join("karaoke").join(format!("{id}.txt")), &serialize_annotation_file(&karaoke))?;

        if opts.decoy_every > 0 && i % opts.decoy_every == opts.decoy_every - 1 {
            let silent = AnnotationFile {
                notes: Vec::new(),
                line_breaks: Vec::new(),
                ..truth.clone()
            };
            let decoy: AudioBuffer = render_mix(&mut rng, &silent, &mix);
            write_wav(dir.join("audio").join(format!("{id}-decoy.wav")), &decoy)?;
        }
        items.push(SplitItem::new(&id, &artist));
        songs.push((id, artist, truth));
    }

    let (train_ids, test_ids) = artist_filter_split(&items, opts.test_fraction, opts.seed)?;
    let mut manifest = Vec::new();
    let mut eval = Vec::new();
    for (i, (id, artist, _)) in songs.iter().enumerate() {
        if train_ids.contains(id) {
            let mut candidates = vec![format!("audio/{id}.wav")];
            if opts.decoy_every > 0 && i % opts.decoy_every == opts.decoy_every - 1 {
                candidates.insert(0, format!("audio/{id}-decoy.wav"));
            }
            manifest.push(ManifestRecord {
                song_id: id.clone(),
                annotation: format!("karaoke/{id}.txt"),
                candidates,
                artist: artist.clone(),
            });
        } else {
            eval.push(EvalTrack {
                track_id: id.clone(),
                audio: format!("audio/{id}.wav").into(),
                annotation: format!("truth/{id}.txt").into(),
            });
        }
    }
    let layout = CorpusLayout {
        dir: dir.to_path_buf(),
        config: dir.join("voxalign.toml"),
        manifest: dir.join("manifest.jsonl"),
        eval_manifest: dir.join("eval.jsonl"),
        teacher: dir.join("teacher.svdm"),
        train_songs: train_ids,
        test_tracks: test_ids,
    };
    write_text(&layout.manifest, &jsonl(&manifest))?;
    write_text(&layout.eval_manifest, &jsonl(&eval))?;

    let teacher = train_weak_teacher(
        opts.seed.wrapping_add(1),
        opts.teacher_tracks,
        opts.seconds,
        opts.teacher_epochs,
    )?;
    save_model(&layout.teacher, &teacher)?;

    let config = format!(
        "seed = {}\narchitecture = \"compact\"\n\n[paths]\nmanifest = \"manifest.jsonl\"\neval_manifest = \"eval.jsonl\"\nteacher = \"teacher.svdm\"\nrun_root = \"runs\"\n",
        opts.seed
    );
    RunConfig::parse(&config, dir)?;
    write_text(&layout.config, &config)?;
    Ok(layout)
}
