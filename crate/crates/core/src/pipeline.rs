//! Stage functions behind the command-line tool. Every stage reads its
//! inputs from and writes its artifacts to the run directory, so stages can
//! be re-run one at a time.

use std::fmt;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{aum_detect, avg_encoder_detect};
use crate::config::RunConfig;
use crate::corruption::{corrupt, pool};
use crate::dataset::{inject_noise, make_blobs, measured_noise_rate, LabeledDataset, Provenance};
use crate::encoder::{fit_and_detect, save_checkpoint, CheckpointMeta, EncoderConfig};
use crate::error::{Error, Result};
use crate::eval::{flag_all_baseline, DetectionReport, Method, Verdict};
use crate::io::{
    load_dataset, load_dynamics, read_json, save_dataset, save_dynamics, write_json, DynamicsMeta,
};
use crate::trainer::{train_and_record_signals, DynamicsMatrix, SignalKind};

/// Artifact file names inside a run directory.
pub mod artifacts {
    pub const CLEAN: &str = "clean.csv";
    pub const DATASET: &str = "dataset.csv";
    pub const CORRUPTED: &str = "corrupted.csv";
    pub const DYNAMICS: &str = "dynamics.csv";
    /// Logit-difference dynamics for the baselines.
    pub const MARGIN_DYNAMICS: &str = "dynamics_logit_difference.csv";
    pub const MODEL: &str = "model.dync";
    pub const SUMMARY: &str = "summary.json";
    pub const ERROR: &str = "error.json";
    pub const LOCK: &str = ".dynacor.lock";

    pub fn report(method: crate::eval::Method) -> String {
        format!("report_{}.json", method.name())
    }

    pub fn eval(method: crate::eval::Method) -> String {
        format!("eval_{}.json", method.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Lock,
    Synth,
    Inject,
    Corrupt,
    Train,
    Detect,
    Baseline,
    Eval,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Lock => "lock",
            Stage::Synth => "synth",
            Stage::Inject => "inject",
            Stage::Corrupt => "corrupt",
            Stage::Train => "train",
            Stage::Detect => "detect",
            Stage::Baseline => "baseline",
            Stage::Eval => "eval",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

/// Contents of `error.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub stage: Stage,
    pub message: String,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Exclusive claim on a run directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(artifacts::LOCK);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{} is in use by another run", dir.display()),
                )),
                _ => Error::Io(e),
            })?;
        Ok(Self { path })
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Clean blobs with ground-truth labels.
pub fn synth(cfg: &RunConfig, dir: &Path) -> Result<LabeledDataset> {
    std::fs::create_dir_all(dir)?;
    let ds = make_blobs(&cfg.data, cfg.synth_seed())?;
    save_dataset(&ds, &dir.join(artifacts::CLEAN))?;
    Ok(ds)
}

/// Observed labels from the configured noise process.
pub fn inject(cfg: &RunConfig, dir: &Path) -> Result<LabeledDataset> {
    let clean = load_dataset(&dir.join(artifacts::CLEAN), Some(cfg.data.classes))?;
    let noisy = inject_noise(&clean, &cfg.noise)?;
    save_dataset(&noisy, &dir.join(artifacts::DATASET))?;
    Ok(noisy)
}

pub fn corrupt_stage(cfg: &RunConfig, dir: &Path) -> Result<LabeledDataset> {
    let original = load_dataset(&dir.join(artifacts::DATASET), Some(cfg.data.classes))?;
    let corrupted = corrupt(&original, &cfg.corruption)?;
    save_dataset(&corrupted, &dir.join(artifacts::CORRUPTED))?;
    Ok(corrupted)
}

/// Trains on the pooled set and writes the configured signal plus
/// logit-difference dynamics for the baselines.
pub fn train(cfg: &RunConfig, dir: &Path) -> Result<DynamicsMatrix> {
    let classes = Some(cfg.data.classes);
    let original = load_dataset(&dir.join(artifacts::DATASET), classes)?;
    let corrupted = load_dataset(&dir.join(artifacts::CORRUPTED), classes)?;
    let pooled = pool(&original, &corrupted)?;
    let run = train_and_record_signals(&pooled, &cfg.classifier, &[SignalKind::LogitDifference])?;
    let margin = run
        .dynamics_for(SignalKind::LogitDifference)
        .expect("logit difference is always recorded");
    for (dynamics, name) in [(&run.dynamics, artifacts::DYNAMICS), (margin, artifacts::MARGIN_DYNAMICS)] {
        let meta = DynamicsMeta {
            signal: dynamics.signal(),
            epochs: dynamics.epochs(),
            seed: cfg.classifier.seed,
            classifier: cfg.classifier.clone(),
        };
        save_dynamics(dynamics, &meta, &dir.join(name))?;
    }
    Ok(run.dynamics)
}

/// Fits the encoder on a dynamics file and writes the report, plus the
/// checkpoint when `checkpoint` is given. Truth columns are dropped first.
pub fn detect_file(
    dynamics_path: &Path,
    encoder: &EncoderConfig,
    report_path: &Path,
    checkpoint: Option<&Path>,
) -> Result<DetectionReport> {
    let dynamics = load_dynamics(dynamics_path)?.without_truth();
    let (outcome, detection) = fit_and_detect(&dynamics, encoder)?;
    if let Some(path) = checkpoint {
        let meta = CheckpointMeta {
            format: "DYNC1".into(),
            config: encoder.clone(),
            selected_epoch: outcome.selected_epoch,
        };
        save_checkpoint(&outcome.model, &meta, path)?;
    }
    detection.report.save(report_path)?;
    Ok(detection.report)
}

pub fn detect(cfg: &RunConfig, dir: &Path) -> Result<DetectionReport> {
    detect_file(
        &dir.join(artifacts::DYNAMICS),
        &cfg.encoder,
        &dir.join(artifacts::report(Method::Dynacor)),
        Some(&dir.join(artifacts::MODEL)),
    )
}

/// Runs one baseline on a logit-difference dynamics file.
pub fn baseline_file(dynamics_path: &Path, method: Method, seed: u64, report_path: &Path) -> Result<DetectionReport> {
    let dynamics = load_dynamics(dynamics_path)?.without_truth();
    let mut report = match method {
        Method::AvgEncoder => avg_encoder_detect(&dynamics)?,
        Method::Aum => aum_detect(&dynamics)?,
        Method::Dynacor => {
            return Err(Error::InvalidConfig("dynacor is not a baseline".into()));
        }
    };
    report.seed = seed;
    report.save(report_path)?;
    Ok(report)
}

/// Every configured baseline method.
pub fn baseline(cfg: &RunConfig, dir: &Path) -> Result<Vec<DetectionReport>> {
    cfg.eval
        .methods
        .iter()
        .filter(|m| **m != Method::Dynacor)
        .map(|&m| {
            baseline_file(
                &dir.join(artifacts::MARGIN_DYNAMICS),
                m,
                cfg.classifier.seed,
                &dir.join(artifacts::report(m)),
            )
        })
        .collect()
}

/// Scores of one report against the truth column of a dynamics file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub method: Method,
    pub seed: u64,
    pub instances: usize,
    pub flagged: usize,
    pub noise_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// F1 of flagging every instance; `None` at a zero noise rate.
    pub flag_all_f1: Option<f64>,
    pub selected_epoch: Option<usize>,
}

/// Truth verdicts of the original rows.
pub fn truth_verdicts(dynamics: &DynamicsMatrix) -> Result<Vec<Verdict>> {
    dynamics
        .rows()
        .iter()
        .filter(|r| r.provenance == Provenance::Original)
        .map(|r| {
            r.is_noisy
                .map(|noisy| Verdict { id: r.id, noisy })
                .ok_or(Error::MissingTruth)
        })
        .collect()
}

/// Scores `report` in place against `dynamics`.
pub fn score_report(report: &mut DetectionReport, dynamics: &DynamicsMatrix) -> Result<EvalSummary> {
    let truth = truth_verdicts(dynamics)?;
    if truth.is_empty() {
        return Err(Error::MissingTruth);
    }
    let score = report.score(&truth)?;
    let noise_rate = truth.iter().filter(|t| t.noisy).count() as f64 / truth.len() as f64;
    Ok(EvalSummary {
        method: report.method,
        seed: report.seed,
        instances: truth.len(),
        flagged: report.flagged(),
        noise_rate,
        precision: score.precision,
        recall: score.recall,
        f1: score.f1,
        flag_all_f1: flag_all_baseline(noise_rate).ok(),
        selected_epoch: report.selected_epoch,
    })
}

/// Scores a report file, rewrites it with the scores filled in, and writes
/// the summary to `summary_path`.
pub fn eval_file(report_path: &Path, dynamics_path: &Path, summary_path: &Path) -> Result<EvalSummary> {
    let mut report = DetectionReport::load(report_path)?;
    let dynamics = load_dynamics(dynamics_path)?;
    let summary = score_report(&mut report, &dynamics)?;
    report.save(report_path)?;
    write_json(&summary, summary_path)?;
    Ok(summary)
}

pub fn eval(cfg: &RunConfig, dir: &Path) -> Result<Vec<EvalSummary>> {
    cfg.eval
        .methods
        .iter()
        .map(|&m| {
            eval_file(
                &dir.join(artifacts::report(m)),
                &dir.join(artifacts::DYNAMICS),
                &dir.join(artifacts::eval(m)),
            )
        })
        .collect()
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub seed: u64,
    pub measured_noise_rate: f64,
    pub flag_all_f1: Option<f64>,
    pub methods: Vec<EvalSummary>,
}

fn run_stages(cfg: &RunConfig, dir: &Path) -> Result<PipelineSummary, StageError> {
    synth(cfg, dir).at(Stage::Synth)?;
    let noisy = inject(cfg, dir).at(Stage::Inject)?;
    corrupt_stage(cfg, dir).at(Stage::Corrupt)?;
    train(cfg, dir).at(Stage::Train)?;
    if cfg.eval.methods.contains(&Method::Dynacor) {
        detect(cfg, dir).at(Stage::Detect)?;
    }
    baseline(cfg, dir).at(Stage::Baseline)?;
    let methods = eval(cfg, dir).at(Stage::Eval)?;
    let measured = measured_noise_rate(&noisy).at(Stage::Eval)?;
    let summary = PipelineSummary {
        seed: cfg.seed,
        measured_noise_rate: measured,
        flag_all_f1: flag_all_baseline(measured).ok(),
        methods,
    };
    write_json(&summary, &dir.join(artifacts::SUMMARY)).at(Stage::Eval)?;
    Ok(summary)
}

/// All stages in order under a lock on `cfg.out_dir`. On failure the partial
/// artifacts stay and `error.json` names the stage.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineSummary, StageError> {
    let dir = cfg.out_dir.as_path();
    let _lock = RunLock::acquire(dir).at(Stage::Lock)?;
    let error_path = dir.join(artifacts::ERROR);
    if error_path.exists() {
        std::fs::remove_file(&error_path).map_err(Error::from).at(Stage::Lock)?;
    }
    run_stages(cfg, dir).inspect_err(|e| {
        let record = ErrorRecord {
            stage: e.stage,
            message: e.source.to_string(),
        };
        let _ = write_json(&record, &error_path);
    })
}

/// Reads `summary.json` from a finished run.
pub fn load_summary(dir: &Path) -> Result<PipelineSummary> {
    read_json(&dir.join(artifacts::SUMMARY))
}
