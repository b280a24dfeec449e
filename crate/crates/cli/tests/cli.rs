use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxalign::annotation::{serialize_annotation_file, AnnotationFile, NoteAnnotation, TimingParams};
use voxalign::features::{compute_mel_spectrogram, write_wav, AudioBuffer, FeatureConfig, BAND_COUNT, PATCH_CENTER, PATCH_FRAMES};
use voxalign::svd::{predict_sequence, save_model, Architecture, LayerSpec, SvdModel, DEFAULT_MEDIAN_WIDTH};
use voxalign::synth::{random_annotation, render_mix, MixOptions};

fn voxalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voxalign"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn voxalign")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const HEADER: &str = "#TITLE:Song\n#ARTIST:Someone\n#OFFSET:1.5\n#FRAMERATE:4.0\n";

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.txt", &format!("{HEADER}: 0 8 5 hello\nE\n"));
    let o = voxalign(&["validate", ok.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());

    let overlap = write(dir.path(), "overlap.txt", &format!("{HEADER}: 0 8 5 a\n: 4 2 5 b\nE\n"));
    let o = voxalign(&["validate", overlap.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let out = stdout(&o);
    assert!(out.starts_with("6\tinvariant\t"), "{out}");
    assert!(out.contains("note 1") && out.contains("note 0"), "{out}");

    let no_rate = write(dir.path(), "no-rate.txt", "#TITLE:a\n#ARTIST:b\n#OFFSET:0\n: 0 1 0 a\nE\n");
    let o = voxalign(&["validate", no_rate.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("missing-header"));

    let o = voxalign(&["validate", dir.path().join("absent.txt").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn version_names_the_hash_algorithm() {
    let o = voxalign(&["--version"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains(env!("CARGO_PKG_VERSION")));
    assert!(out.contains(voxalign::config::CONFIG_HASH_ALGORITHM));
}

#[test]
fn unknown_stage_is_a_usage_error() {
    let o = voxalign(&["pipeline", "voxalign.toml", "dance"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

/// A detector that calls a frame voiced when its center column carries at
/// least half the energy of the loudest frame of `reference`.
fn energy_detector(reference: &AudioBuffer) -> SvdModel {
    let spec = compute_mel_spectrogram(reference, &FeatureConfig::default()).unwrap();
    let loudest = (0..spec.n_frames())
        .map(|k| spec.frame(k).iter().map(|&v| v as f64).sum::<f64>())
        .fold(0.0, f64::max);
    let inputs = BAND_COUNT * PATCH_FRAMES;
    let arch = Architecture {
        layers: vec![LayerSpec::Dense { inputs, units: 1 }],
    };
    let mut model = SvdModel::init(arch, 0).unwrap();
    let gain = 40.0 / loudest;
    let params = model.parameters_mut();
    params[0].data.iter_mut().for_each(|w| *w = 0.0);
    for band in 0..BAND_COUNT {
        params[0].data[band * PATCH_FRAMES + PATCH_CENTER] = gain;
    }
    params[1].data[0] = -0.5 * loudest * gain;
    model
}

/// An annotation transcribed from the detector's own output: one note per
/// voiced run, on a grid of one unit per analysis hop.
fn transcribe(model: &SvdModel, audio: &AudioBuffer) -> AnnotationFile {
    let spec = compute_mel_spectrogram(audio, &FeatureConfig::default()).unwrap();
    let pred = predict_sequence(model, &spec, DEFAULT_MEDIAN_WIDTH).unwrap();
    let voiced: Vec<bool> = pred.probs.iter().map(|&p| p >= 0.5).collect();
    let mut notes = Vec::new();
    let mut k = 0;
    while k < voiced.len() {
        if voiced[k] {
            let start = k;
            while k < voiced.len() && voiced[k] {
                k += 1;
            }
            notes.push(NoteAnnotation {
                start_units: start as u32,
                duration_units: (k - start) as u32,
                pitch: 0,
                text: " la".into(),
            });
        }
        k += 1;
    }
    let timing = TimingParams::new(0.0, 1.0 / spec.hop_seconds).unwrap();
    AnnotationFile::new("Song", "Artist", timing, notes, Vec::new()).unwrap()
}

#[test]
fn align_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let melody = random_annotation(&mut rng, "Song", "Artist", 20.0);
    let clean = MixOptions {
        seconds: 24.0,
        bass_gain: 0.0,
        noise_gain: 0.0,
        distractor_rate: 0.0,
        ..Default::default()
    };
    let mix = render_mix(&mut rng, &melody, &clean);
    write_wav(dir.path().join("song.wav"), &mix).unwrap();
    let model = energy_detector(&mix);
    save_model(dir.path().join("model.svdm"), &model).unwrap();
    let file = transcribe(&model, &mix);
    assert!(file.notes.len() >= 5);
    let annotation = write(dir.path(), "song.txt", &serialize_annotation_file(&file));

    // bursts of noise switched on and off at random every 0.3 s
    let rate = mix.sample_rate;
    let block = (0.3 * rate as f64) as usize;
    let mut samples = Vec::new();
    while samples.len() < 24 * rate as usize {
        let on = rng.random_bool(0.5);
        samples.extend((0..block).map(|_| if on { rng.random_range(-0.3f32..0.3) } else { 0.0 }));
    }
    write_wav(dir.path().join("noise.wav"), &AudioBuffer::new(samples, rate).unwrap()).unwrap();

    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let ann = annotation.to_str().unwrap();
    let o = voxalign(&["align", ann, &p("song.wav"), "--model", &p("model.svdm")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let fields: Vec<&str> = out.trim_end().split('\t').collect();
    assert_eq!(fields.len(), 6, "{out}");
    assert_eq!(fields[0], "song");
    let score: f64 = fields[2].parse().unwrap();
    assert!(score >= 0.99, "{out}");

    let o = voxalign(&["align", ann, &p("noise.wav"), "--model", &p("model.svdm")]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));

    let o = voxalign(&["align", ann, &p("noise.wav"), &p("song.wav"), "--model", &p("model.svdm")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2);

    let o = voxalign(&["align", ann, &p("song.wav"), "--model", &p("missing.svdm")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

fn files_under(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "summary.tsv" {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn run_dir(root: &Path) -> PathBuf {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1);
    dirs.pop().unwrap()
}

#[test]
fn pipeline_stages_and_bootstrap() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let c = corpus.to_str().unwrap();
    let o = voxalign(&["synth", c, "--tracks", "6", "--artists", "3", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let config = stdout(&o).trim().to_string();
    assert!(Path::new(&config).exists());

    let o = voxalign(&["split", corpus.join("manifest.jsonl").to_str().unwrap(), "--test-fraction", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().all(|l| l.split('\t').count() == 3));

    let stage = |s: &str, root: &str| voxalign(&["pipeline", &config, s, "--run-root", root, "--jobs", "2"]);
    let o = stage("match", "staged");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let staged = run_dir(&corpus.join("staged"));
    let songs = std::fs::read_to_string(corpus.join("manifest.jsonl")).unwrap().lines().count();
    let journal = std::fs::read_to_string(staged.join("round-1/journal.jsonl")).unwrap();
    assert_eq!(journal.lines().count(), songs);
    for s in ["build-set", "train", "evaluate"] {
        assert_eq!(stage(s, "staged").status.code(), Some(0), "{s}");
    }
    let o = stage("bootstrap", "chained");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("round\tmatches"));
    assert_eq!(files_under(&staged), files_under(&run_dir(&corpus.join("chained"))));

    let strict = format!("{}\n[search]\nt_corr = 0.9999\n", std::fs::read_to_string(&config).unwrap());
    let strict = write(&corpus, "strict.toml", &strict);
    let o = voxalign(&["pipeline", strict.to_str().unwrap(), "bootstrap", "--rounds", "2"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));

    let broken = write(&corpus, "broken.toml", "[search]\nfr_steps = 4\n");
    assert_eq!(voxalign(&["pipeline", broken.to_str().unwrap(), "match"]).status.code(), Some(2));
}

#[test]
fn expand_prints_records() {
    let dir = tempfile::tempdir().unwrap();
    let ann = write(
        dir.path(),
        "a.txt",
        &format!("{HEADER}: 0 2 0 he\n: 2 2 0 llo\n: 4 2 0  world\n- 7\n: 8 2 0 bye\nE\n"),
    );
    let lyrics = write(dir.path(), "l.txt", "hello world\nbye\n");
    let o = voxalign(&["expand", ann.to_str().unwrap(), lyrics.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("word\t1.500000\t2.500000\thello\n"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("paragraph\t")));

    let wrong = write(dir.path(), "w.txt", "one\n\ntwo\n\nthree\n");
    let o = voxalign(&["expand", ann.to_str().unwrap(), wrong.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
