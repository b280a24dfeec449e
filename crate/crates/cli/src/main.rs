use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use voxalign::align::{report_line, search_alignment, AlignError, AlignmentResult};
use voxalign::annotation::{
    expand_granularity, parse_annotation_file, validate_annotation_text, AnnotationError, AnnotationFile,
};
use voxalign::config::{RunConfig, CONFIG_HASH_ALGORITHM};
use voxalign::features::{compute_mel_spectrogram, decode_audio};
use voxalign::pipeline::{
    artist_filter_split, iterate, stage_build_set, stage_evaluate, stage_match, stage_train, CandidateManifest,
    PipelineError, SplitItem,
};
use voxalign::svd::{load_model, predict_sequence, ModelError};
use voxalign::synth::{write_corpus, CorpusOptions};

/// Align karaoke annotations to audio and bootstrap singing-voice detectors.
#[derive(Parser)]
#[command(name = "voxalign")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an annotation file; prints one `line<TAB>kind<TAB>message` record per problem.
    Validate { annotation: PathBuf },
    /// Align an annotation against one or more audio candidates.
    Align {
        annotation: PathBuf,
        #[arg(required = true)]
        audio: Vec<PathBuf>,
        /// Teacher model file.
        #[arg(long)]
        model: PathBuf,
        /// Run configuration supplying feature and search settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `search.t_corr`.
        #[arg(long)]
        t_corr: Option<f64>,
        /// Song id for the report; defaults to the annotation's file stem.
        #[arg(long)]
        song_id: Option<String>,
    },
    /// Run one pipeline stage, or all rounds with `bootstrap`.
    Pipeline {
        config: PathBuf,
        #[arg(value_enum)]
        stage: Stage,
        #[arg(long, default_value_t = 1)]
        round: usize,
        /// Worker threads for matching; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides `bootstrap.rounds`.
        #[arg(long)]
        rounds: Option<usize>,
        /// Overrides `paths.run_root`.
        #[arg(long)]
        run_root: Option<String>,
    },
    /// Artist-filtered train/test split of a manifest.
    Split {
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Word, line and paragraph timings of an annotation.
    Expand { annotation: PathBuf, lyrics: PathBuf },
    /// Write a synthetic corpus with a weak teacher and a run configuration.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        tracks: usize,
        #[arg(long, default_value_t = 12)]
        artists: usize,
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Match,
    BuildSet,
    Train,
    Evaluate,
    Bootstrap,
}

/// Process exit statuses.
mod exit {
    pub const BELOW_THRESHOLD: u8 = 1;
    pub const INPUT: u8 = 2;
    pub const INVARIANT: u8 = 3;
    pub const EMPTY_ROUND: u8 = 4;
}

fn exit_code(err: &PipelineError) -> u8 {
    match err {
        PipelineError::Annotation(AnnotationError::Invariant { .. })
        | PipelineError::Align(AlignError::Invariant(_))
        | PipelineError::Model(ModelError::Data(_) | ModelError::Numerics { .. })
        | PipelineError::Data(_)
        | PipelineError::Length { .. } => exit::INVARIANT,
        PipelineError::EmptyRound { .. } => exit::EMPTY_ROUND,
        _ => exit::INPUT,
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn validate(path: &Path) -> Result<u8, PipelineError> {
    let text = read(path)?;
    let Err(diags) = validate_annotation_text(&text) else {
        return Ok(0);
    };
    let mut code = exit::INVARIANT;
    for d in &diags {
        let (line, kind) = match d {
            AnnotationError::Syntax { line, .. } => (Some(*line), "syntax"),
            AnnotationError::MissingHeader { .. } => (None, "missing-header"),
            AnnotationError::Invariant { line, .. } => (*line, "invariant"),
            AnnotationError::Match { .. } => (None, "match"),
        };
        if kind != "invariant" {
            code = exit::INPUT;
        }
        let line = line.map_or("-".to_string(), |l| l.to_string());
        println!("{line}\t{kind}\t{d}");
    }
    Ok(code)
}

fn align_one(
    file: &AnnotationFile,
    audio: &Path,
    model: &voxalign::svd::SvdModel,
    cfg: &RunConfig,
) -> Result<AlignmentResult, PipelineError> {
    let spec = compute_mel_spectrogram(&decode_audio(audio, &cfg.features)?, &cfg.features)?;
    let pred = predict_sequence(model, &spec, cfg.bootstrap.median_width)?;
    if pred.is_degenerate() {
        return Ok(AlignmentResult {
            o_hat: 0.0,
            fr_hat: file.timing.frame_rate,
            score: 0.0,
            n_overlap_frames: 0,
        });
    }
    Ok(search_alignment(file, &pred, &cfg.search)?)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, PipelineError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => RunConfig::parse("", "."),
    }
}

fn run(cli: Cli) -> Result<u8, PipelineError> {
    match cli.command {
        Command::Validate { annotation } => validate(&annotation),
        Command::Align {
            annotation,
            audio,
            model,
            config,
            t_corr,
            song_id,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(t) = t_corr {
                cfg.search.t_corr = t;
            }
            cfg.validate()?;
            let file = parse_annotation_file(&read(&annotation)?)?;
            let model = load_model(&model)?;
            let song = song_id.unwrap_or_else(|| {
                annotation.file_stem().map_or("song".into(), |s| s.to_string_lossy().into_owned())
            });
            let mut best: f64 = 0.0;
            for a in &audio {
                let r = align_one(&file, a, &model, &cfg)?;
                println!("{}", report_line(&song, &a.display().to_string(), &r));
                best = best.max(r.score);
            }
            Ok(if best >= cfg.search.t_corr { 0 } else { exit::BELOW_THRESHOLD })
        }
        Command::Pipeline {
            config,
            stage,
            round,
            jobs,
            rounds,
            run_root,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(r) = rounds {
                cfg.bootstrap.rounds = r;
            }
            if let Some(r) = run_root {
                cfg.paths.run_root = r;
            }
            cfg.validate()?;
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            log::info!("run directory {}", cfg.run_dir().display());
            match stage {
                Stage::Match => {
                    let out = stage_match(&cfg, round, jobs)?;
                    for m in &out.matches {
                        println!("{}", report_line(&m.song_id, &m.candidate_id, &m.result));
                    }
                }
                Stage::BuildSet => {
                    let set = stage_build_set(&cfg, round)?;
                    println!("examples\t{}\nactive\t{}", set.rows.len(), set.active_rows());
                }
                Stage::Train => print!("{}", stage_train(&cfg, round)?.1.to_tsv()),
                Stage::Evaluate => {
                    if let Some((teacher, student)) = stage_evaluate(&cfg, round)? {
                        println!("teacher\t{:.6}\nstudent\t{:.6}", teacher.mean, student.mean);
                    }
                }
                Stage::Bootstrap => {
                    iterate(&cfg, jobs)?;
                    print!("{}", read(&cfg.run_dir().join("summary.tsv"))?);
                }
            }
            Ok(0)
        }
        Command::Split {
            manifest,
            test_fraction,
            seed,
        } => {
            let m = CandidateManifest::load(&manifest)?;
            let items: Vec<SplitItem> = m.records.iter().map(|r| SplitItem::new(&r.song_id, &r.artist)).collect();
            let (train, _) = artist_filter_split(&items, test_fraction, seed)?;
            for r in &m.records {
                let side = if train.contains(&r.song_id) { "train" } else { "test" };
                println!("{}\t{}\t{side}", r.song_id, r.artist);
            }
            Ok(0)
        }
        Command::Expand { annotation, lyrics } => {
            let file = parse_annotation_file(&read(&annotation)?)?;
            print!("{}", expand_granularity(&file, &read(&lyrics)?)?.to_records());
            Ok(0)
        }
        Command::Synth {
            dir,
            seed,
            tracks,
            artists,
            seconds,
        } => {
            let opts = CorpusOptions {
                seed,
                tracks,
                artists,
                seconds,
                ..Default::default()
            };
            let layout = write_corpus(&dir, &opts)?;
            println!("{}", layout.config.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let version: &'static str = Box::leak(
        format!("{} (run hash: {CONFIG_HASH_ALGORITHM})", env!("CARGO_PKG_VERSION")).into_boxed_str(),
    );
    let mut command = Cli::command().version(version);
    let parsed = command
        .try_get_matches_from_mut(std::env::args_os())
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            eprintln!("\n{}", command.render_usage());
            return ExitCode::from(exit::INPUT);
        }
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
