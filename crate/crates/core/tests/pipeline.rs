use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use voxalign::annotation::{parse_annotation_file, rasterize_voice_sequence};
use voxalign::config::RunConfig;
use voxalign::features::write_wav;
use voxalign::pipeline::*;
use voxalign::svd::load_model;
use voxalign::synth::{random_annotation, render_mix, write_corpus, CorpusLayout, CorpusOptions, MixOptions};

fn small_corpus(dir: &Path) -> CorpusLayout {
    let opts = CorpusOptions {
        tracks: 6,
        artists: 2,
        test_fraction: 0.3,
        distractor_rate: 0.0,
        decoy_every: 0,
        ..Default::default()
    };
    write_corpus(dir, &opts).unwrap()
}

fn write_noise(path: &Path, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut silent = random_annotation(&mut rng, "x", "x", 10.0);
    silent.notes.clear();
    silent.line_breaks.clear();
    write_wav(path, &render_mix(&mut rng, &silent, &MixOptions { seconds: 10.0, ..Default::default() })).unwrap();
}

/// Three of the corpus's training songs; the second one's only candidate is
/// replaced by voice-free audio.
fn three_song_manifest(layout: &CorpusLayout) -> CandidateManifest {
    write_noise(&layout.dir.join("audio/noise.wav"), 99);
    let mut m = CandidateManifest::load(&layout.manifest).unwrap();
    m.records.truncate(3);
    m.records[1].candidates = vec!["audio/noise.wav".into()];
    m
}

fn options(work_dir: PathBuf) -> MatchOptions {
    let cfg = RunConfig::default();
    MatchOptions {
        features: cfg.features,
        search: cfg.search,
        median_width: 9,
        jobs: 2,
        work_dir,
    }
}

#[test]
fn noise_candidate_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let layout = small_corpus(dir.path());
    let manifest = three_song_manifest(&layout);
    let teacher = load_model(&layout.teacher).unwrap();
    let out = run_matching(&manifest, &teacher, &options(dir.path().join("work"))).unwrap();
    assert_eq!(out.entries.len(), 3);
    assert_eq!(out.matches.len(), 2);
    assert_eq!(out.rejected(), 1);
    assert!(matches!(out.entries[1].status, JournalStatus::Reject { .. }));
    for m in &out.matches {
        assert!(m.result.score >= 0.8);
        assert!(m.adapted.exists() && m.mel_cache.exists() && m.predictions.exists());
    }
}

#[test]
fn journal_resumes_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let layout = small_corpus(dir.path());
    let full = three_song_manifest(&layout);
    let teacher = load_model(&layout.teacher).unwrap();

    let mut partial = full.clone();
    partial.records.truncate(2);
    let resumed = options(dir.path().join("resumed"));
    assert_eq!(run_matching(&partial, &teacher, &resumed).unwrap().processed, 2);
    let second = run_matching(&full, &teacher, &resumed).unwrap();
    assert_eq!(second.processed, 1);
    let third = run_matching(&full, &teacher, &resumed).unwrap();
    assert_eq!(third.processed, 0);
    assert_eq!(third.entries, second.entries);

    let fresh = options(dir.path().join("fresh"));
    let once = run_matching(&full, &teacher, &fresh).unwrap();
    assert_eq!(once.entries, third.entries);
    let read = |o: &MatchOptions| std::fs::read(o.work_dir.join("journal.jsonl")).unwrap();
    assert_eq!(read(&resumed), read(&fresh));
    assert_eq!(read_journal(fresh.work_dir.join("journal.jsonl")).unwrap().len(), 3);
}

#[test]
fn target_policies() {
    let dir = tempfile::tempdir().unwrap();
    let layout = small_corpus(dir.path());
    let manifest = CandidateManifest::load(&layout.manifest).unwrap();
    let teacher = load_model(&layout.teacher).unwrap();
    let opts = options(dir.path().join("work"));
    let out = run_matching(&manifest, &teacher, &opts).unwrap();
    assert!(!out.matches.is_empty());

    let b = build_training_set(&out.matches, TargetPolicy::AlignedAnnotations, &opts.features).unwrap();
    let a = build_training_set(&out.matches, TargetPolicy::TeacherPredictions, &opts.features).unwrap();
    let c = build_training_set(&out.matches, TargetPolicy::Agreement { tolerance: 0.5 }, &opts.features).unwrap();
    assert_eq!(a.rows.len(), b.rows.len());
    assert_eq!(c.rows.len(), b.rows.len());

    let mut offset = 0;
    for (song, m) in out.matches.iter().enumerate() {
        let adapted = parse_annotation_file(&std::fs::read_to_string(&m.adapted).unwrap()).unwrap();
        let n = b.spectrogram(song).n_frames();
        let avs = rasterize_voice_sequence(&adapted, adapted.timing.frame_rate, 0.0, opts.features.hop_seconds(), n);
        let pred = read_predictions(&m.predictions).unwrap();
        for k in 0..n {
            let (rb, ra, rc) = (b.rows[offset + k], a.rows[offset + k], c.rows[offset + k]);
            assert_eq!((rb.song, rb.frame), (song, k));
            assert_eq!(rb.target, avs.frames[k] as f64);
            assert_eq!(rb.weight, 1.0);
            assert_eq!(ra.target.to_bits(), pred.probs[k].to_bits());
            assert_eq!(rc.target, rb.target);
            let agree = (pred.probs[k] - rb.target).abs() <= 0.5;
            assert_eq!(rc.weight, if agree { 1.0 } else { 0.0 });
        }
        offset += n;
    }
    assert!(c.active_rows() <= c.rows.len());
    let tsv = b.to_tsv();
    assert!(tsv.starts_with("song_id\tframe\ttarget\tweight\n"));
    assert_eq!(tsv.lines().count(), b.rows.len() + 1);

    let missing = MatchRecord {
        predictions: dir.path().join("nope.prds"),
        ..out.matches[0].clone()
    };
    assert!(matches!(
        build_training_set(&[missing.clone()], TargetPolicy::TeacherPredictions, &opts.features),
        Err(PipelineError::Data(_))
    ));
    assert!(build_training_set(&[missing], TargetPolicy::AlignedAnnotations, &opts.features).is_ok());
    assert!(build_training_set(&[], TargetPolicy::AlignedAnnotations, &opts.features).is_err());
}

fn files_under(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn bootstrap_equals_stages_and_empty_round_aborts() {
    let dir = tempfile::tempdir().unwrap();
    let layout = small_corpus(dir.path());
    let mut cfg = RunConfig::load(&layout.config).unwrap();
    cfg.trainer.epochs = 2;

    cfg.paths.run_root = "chained".into();
    let rounds = iterate(&cfg, 1).unwrap();
    assert_eq!(rounds.len(), 1);
    assert!(rounds[0].student_eval.is_some());
    let chained = cfg.run_dir();

    cfg.paths.run_root = "staged".into();
    stage_match(&cfg, 1, 3).unwrap();
    stage_build_set(&cfg, 1).unwrap();
    stage_train(&cfg, 1).unwrap();
    stage_evaluate(&cfg, 1).unwrap();
    let staged = cfg.run_dir();

    let chained = files_under(&chained);
    let staged = files_under(&staged);
    let without_summary: Vec<_> = chained.iter().filter(|f| f.0 != Path::new("summary.tsv")).cloned().collect();
    assert_eq!(without_summary.len() + 1, chained.len());
    assert_eq!(without_summary.len(), staged.len());
    for ((pa, ba), (pb, bb)) in without_summary.iter().zip(&staged) {
        assert_eq!(pa, pb);
        assert!(ba == bb, "{pa:?} differs");
    }

    cfg.paths.run_root = "strict".into();
    cfg.search.t_corr = 0.9999;
    cfg.bootstrap.rounds = 2;
    assert!(matches!(iterate(&cfg, 1), Err(PipelineError::EmptyRound { round: 1 })));
}
