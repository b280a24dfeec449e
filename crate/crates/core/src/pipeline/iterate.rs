use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::eval::{evaluate_tracks, load_eval_manifest, EvalReport};
use super::matching::{journaled_outcome, run_matching, MatchOptions, MatchOutcome};
use super::training_set::{build_training_set, TrainingSet};
use super::{io_err, CandidateManifest, PipelineError};
use crate::align::report_line;
use crate::config::RunConfig;
use crate::svd::{load_model, save_model, train, SvdModel, TrainerConfig, TrainingLog};

/// File layout of one round inside the run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundPaths {
    pub dir: PathBuf,
    pub journal: PathBuf,
    pub matches: PathBuf,
    pub training_set: PathBuf,
    pub model: PathBuf,
    pub training_log: PathBuf,
    pub teacher_eval: PathBuf,
    pub eval: PathBuf,
}

impl RoundPaths {
    pub fn new(cfg: &RunConfig, round: usize) -> Self {
        let dir = cfg.run_dir().join(format!("round-{round}"));
        RoundPaths {
            journal: dir.join("journal.jsonl"),
            matches: dir.join("matches.tsv"),
            training_set: dir.join("training_set.tsv"),
            model: dir.join("model.svdm"),
            training_log: dir.join("training_log.tsv"),
            teacher_eval: dir.join("teacher_eval.tsv"),
            eval: dir.join("eval.tsv"),
            dir,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round: usize,
    pub matches: usize,
    pub rejected: usize,
    pub errors: usize,
    pub training: TrainingLog,
    /// `None` when no evaluation manifest is configured.
    pub teacher_eval: Option<EvalReport>,
    pub student_eval: Option<EvalReport>,
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn prepare(cfg: &RunConfig, round: usize) -> Result<RoundPaths, PipelineError> {
    if round == 0 {
        return Err(PipelineError::Config("rounds are numbered from 1".into()));
    }
    let paths = RoundPaths::new(cfg, round);
    std::fs::create_dir_all(&paths.dir).map_err(io_err(&paths.dir))?;
    write(&cfg.run_dir().join("config.toml"), &cfg.canonical_toml())?;
    Ok(paths)
}

/// Round 1 learns from the configured teacher; round `k` from round `k - 1`'s
/// student.
fn teacher_for(cfg: &RunConfig, round: usize) -> Result<SvdModel, PipelineError> {
    let path = if round == 1 {
        cfg.resolve(&cfg.paths.teacher)
    } else {
        RoundPaths::new(cfg, round - 1).model
    };
    Ok(load_model(path)?)
}

fn manifest(cfg: &RunConfig) -> Result<CandidateManifest, PipelineError> {
    CandidateManifest::load(cfg.resolve(&cfg.paths.manifest))
}

/// Matches every manifest song with the round's teacher and writes the
/// journal and `matches.tsv`. Fails with `EmptyRound` if nothing matched.
pub fn stage_match(cfg: &RunConfig, round: usize, jobs: usize) -> Result<MatchOutcome, PipelineError> {
    let paths = prepare(cfg, round)?;
    let manifest = manifest(cfg)?;
    let teacher = teacher_for(cfg, round)?;
    let opts = MatchOptions {
        features: cfg.features.clone(),
        search: cfg.search.clone(),
        median_width: cfg.bootstrap.median_width,
        jobs,
        work_dir: paths.dir.clone(),
    };
    let outcome = run_matching(&manifest, &teacher, &opts)?;
    let report: String = outcome
        .matches
        .iter()
        .map(|m| report_line(&m.song_id, &m.candidate_id, &m.result) + "\n")
        .collect();
    write(&paths.matches, &report)?;
    log::info!(
        "round {round}: {} matched, {} rejected, {} errors",
        outcome.matches.len(),
        outcome.rejected(),
        outcome.errors()
    );
    if outcome.matches.is_empty() {
        return Err(PipelineError::EmptyRound { round });
    }
    Ok(outcome)
}

fn training_set(cfg: &RunConfig, round: usize) -> Result<(RoundPaths, TrainingSet), PipelineError> {
    let paths = prepare(cfg, round)?;
    let outcome = journaled_outcome(&manifest(cfg)?, &paths.dir)?;
    if outcome.matches.is_empty() {
        return Err(PipelineError::EmptyRound { round });
    }
    let set = build_training_set(&outcome.matches, cfg.policy, &cfg.features)?;
    Ok((paths, set))
}

/// Builds the round's training set from its journal and writes
/// `training_set.tsv`.
pub fn stage_build_set(cfg: &RunConfig, round: usize) -> Result<TrainingSet, PipelineError> {
    let (paths, set) = training_set(cfg, round)?;
    write(&paths.training_set, &set.to_tsv())?;
    log::info!("round {round}: {} examples ({} active)", set.rows.len(), set.active_rows());
    Ok(set)
}

/// Trains the round's student from scratch and saves it with its log.
pub fn stage_train(cfg: &RunConfig, round: usize) -> Result<(SvdModel, TrainingLog), PipelineError> {
    let (paths, set) = training_set(cfg, round)?;
    let init = SvdModel::init(cfg.arch()?, cfg.seed.wrapping_add(round as u64))?;
    let trainer = TrainerConfig {
        seed: cfg.trainer.seed.wrapping_add(round as u64),
        ..cfg.trainer.clone()
    };
    let (model, log) = train(&init, &set, &trainer)?;
    save_model(&paths.model, &model)?;
    write(&paths.training_log, &log.to_tsv())?;
    Ok((model, log))
}

/// Scores the round's teacher and student on the evaluation manifest.
pub fn stage_evaluate(cfg: &RunConfig, round: usize) -> Result<Option<(EvalReport, EvalReport)>, PipelineError> {
    if cfg.paths.eval_manifest.is_empty() {
        log::info!("no eval_manifest configured; skipping evaluation");
        return Ok(None);
    }
    let paths = prepare(cfg, round)?;
    let tracks = load_eval_manifest(cfg.resolve(&cfg.paths.eval_manifest))?;
    let b = &cfg.bootstrap;
    let mut reports = Vec::new();
    for (model, out) in [(teacher_for(cfg, round)?, &paths.teacher_eval), (load_model(&paths.model)?, &paths.eval)] {
        let r = evaluate_tracks(&model, &tracks, b.eval_threshold, &cfg.features, b.median_width)?;
        write(out, &r.to_tsv())?;
        reports.push(r);
    }
    let student = reports.pop().expect("two reports");
    let teacher = reports.pop().expect("two reports");
    log::info!("round {round}: teacher {:.4}, student {:.4}", teacher.mean, student.mean);
    Ok(Some((teacher, student)))
}

/// Runs `cfg.bootstrap.rounds` rounds of match, build-set, train and
/// evaluate, each round's student becoming the next round's teacher, and
/// writes `summary.tsv` to the run directory.
pub fn iterate(cfg: &RunConfig, jobs: usize) -> Result<Vec<RoundOutcome>, PipelineError> {
    let mut rounds = Vec::new();
    for round in 1..=cfg.bootstrap.rounds {
        let m = stage_match(cfg, round, jobs)?;
        stage_build_set(cfg, round)?;
        let (_, training) = stage_train(cfg, round)?;
        let evals = stage_evaluate(cfg, round)?;
        rounds.push(RoundOutcome {
            round,
            matches: m.matches.len(),
            rejected: m.rejected(),
            errors: m.errors(),
            training,
            teacher_eval: evals.as_ref().map(|e| e.0.clone()),
            student_eval: evals.map(|e| e.1),
        });
    }
    let mut summary = String::from("round\tmatches\trejected\terrors\tteacher_accuracy\tstudent_accuracy\n");
    let acc = |r: &Option<EvalReport>| r.as_ref().map_or("-".to_string(), |r| format!("{:.6}", r.mean));
    for r in &rounds {
        let _ = writeln!(
            summary,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.round,
            r.matches,
            r.rejected,
            r.errors,
            acc(&r.teacher_eval),
            acc(&r.student_eval)
        );
    }
    write(&cfg.run_dir().join("summary.tsv"), &summary)?;
    Ok(rounds)
}
