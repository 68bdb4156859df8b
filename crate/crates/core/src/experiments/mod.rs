//! The co-learning protocol: a unimodally trained arm against multimodal
//! arms at several dropout levels, all scored on language-only test data.

mod config;
mod metrics;
mod outcome;
mod render;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplit, Modality, Target};
use crate::error::{Error, Result};
use crate::modality_dropout::DropoutPolicy;
use crate::models::{Model, ModelConfig, ModelKind};
use crate::training::{predict, train, TrainConfig};

pub use config::{ExperimentConfig, ProtocolConfig};
pub use metrics::{compute_metrics, macro_f1, prediction_collapse_index, sign_class, MetricSet};
pub use outcome::{
    classify_outcome, default_tau, outcome_from_primary, CoLearning, CoLearningOutcome,
    DEFAULT_TAU_ACCURACY, DEFAULT_TAU_MAE,
};
pub use render::{render_csv, render_text};

pub const DEFAULT_LEVELS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 0.9];
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arm", rename_all = "lowercase")]
pub enum Arm {
    /// Trained with only the evaluation modality visible.
    Unimodal,
    /// Trained on all modalities, dropping audio and visual with probability `level`.
    Multimodal { level: f64 },
}

impl Arm {
    pub fn level(&self) -> Option<f64> {
        match self {
            Arm::Unimodal => None,
            Arm::Multimodal { level } => Some(*level),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Arm::Unimodal => "unimodal",
            Arm::Multimodal { .. } => "multimodal",
        }
    }

    /// Training config for this arm, derived from `base`.
    pub fn train_config(&self, base: &TrainConfig, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig {
            seed,
            ..base.clone()
        };
        match *self {
            Arm::Unimodal => {
                cfg.kept_modality = Some(base.eval_modality);
                cfg.dropout_policy = DropoutPolicy::none();
            }
            Arm::Multimodal { level } => {
                cfg.kept_modality = None;
                cfg.dropout_policy = DropoutPolicy {
                    p_language: 0.0,
                    p_audio: level,
                    p_visual: level,
                    ..base.dropout_policy
                };
            }
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub metrics: MetricSet,
    pub collapse: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub f1: f64,
    pub mae: Option<f64>,
    pub collapse: f64,
}

impl MeanMetrics {
    /// Arithmetic means in seed order.
    pub fn of(runs: &[SeedResult]) -> Self {
        let n = runs.len() as f64;
        let mean = |f: &dyn Fn(&SeedResult) -> f64| runs.iter().map(f).sum::<f64>() / n;
        let mae = runs
            .first()
            .and_then(|r| r.metrics.mae)
            .map(|_| mean(&|r| r.metrics.mae.unwrap_or(f64::NAN)));
        Self {
            accuracy: mean(&|r| r.metrics.accuracy),
            f1: mean(&|r| r.metrics.f1),
            mae,
            collapse: mean(&|r| r.collapse),
        }
    }

    pub fn primary(&self) -> f64 {
        self.mae.unwrap_or(self.accuracy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    #[serde(flatten)]
    pub arm: Arm,
    pub runs: Vec<SeedResult>,
    pub mean: MeanMetrics,
    /// Multimodal arms only: comparison of mean primary metrics with the unimodal arm.
    pub outcome: Option<CoLearningOutcome>,
}

/// Whether the highest dropout level scored worse than level 0.8.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub reference_level: f64,
    pub level: f64,
    pub degraded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub model: ModelKind,
    pub eval_modality: Modality,
    pub seeds: Vec<u64>,
    pub levels: Vec<f64>,
    pub tau: f64,
    pub unimodal: ArmSummary,
    /// One entry per level, in `levels` order.
    pub multimodal: Vec<ArmSummary>,
    pub degradation: Option<Degradation>,
}

impl ExperimentReport {
    pub fn arm(&self, level: f64) -> Option<&ArmSummary> {
        self.multimodal
            .iter()
            .find(|a| a.arm.level() == Some(level))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("report serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("report parse: {e}")))
    }
}

/// Scores `model` on `split.test` with only `kept` visible.
pub fn evaluate(model: &Model, split: &DatasetSplit, kept: Option<Modality>) -> Result<MetricSet> {
    let preds = predict(model, &split.test, kept)?;
    let targets: Vec<Target> = split.test.iter().map(|s| s.target).collect();
    compute_metrics(&preds, &targets, split.task)
}

/// Trains and evaluates one arm for one seed.
pub fn run_arm(
    split: &DatasetSplit,
    kind: ModelKind,
    base: &TrainConfig,
    arm: Arm,
    seed: u64,
) -> Result<SeedResult> {
    let model_cfg = ModelConfig::for_dataset(kind, &split.dims, split.task, base.hidden_size)?;
    let model = Model::new(&model_cfg, seed)?;
    let cfg = arm.train_config(base, seed);
    let (best, history) = train(&model, split, &cfg)?;
    let metrics = evaluate(&best, split, Some(base.eval_modality))?;
    Ok(SeedResult {
        seed,
        collapse: metrics.collapse_index(),
        metrics,
        best_epoch: history.best_epoch,
        epochs_run: history.epochs.len(),
    })
}

pub fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::Config(
            "at least one dropout level is required".into(),
        ));
    }
    if let Some(bad) = levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::Config(format!(
            "dropout level {bad} is outside [0, 1]"
        )));
    }
    Ok(())
}

/// Runs every (arm, seed) pair and aggregates. Runs are independent, so they
/// go through rayon; results do not depend on scheduling.
pub fn run_protocol(
    split: &DatasetSplit,
    kind: ModelKind,
    base: &TrainConfig,
    levels: &[f64],
    seeds: &[u64],
    tau: Option<f64>,
) -> Result<ExperimentReport> {
    validate_levels(levels)?;
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    base.validate()?;
    ModelConfig::for_dataset(kind, &split.dims, split.task, base.hidden_size)?;

    let arms: Vec<Arm> = std::iter::once(Arm::Unimodal)
        .chain(levels.iter().map(|&level| Arm::Multimodal { level }))
        .collect();
    let jobs: Vec<(usize, u64)> = (0..arms.len())
        .flat_map(|a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    let results: Vec<SeedResult> = jobs
        .par_iter()
        .map(|&(a, seed)| run_arm(split, kind, base, arms[a], seed))
        .collect::<Result<_>>()?;

    let regression = matches!(split.task, crate::data::Task::Regression);
    let tau = tau.unwrap_or(default_tau(regression));
    let mut summaries = results
        .chunks(seeds.len())
        .zip(&arms)
        .map(|(runs, &arm)| ArmSummary {
            arm,
            runs: runs.to_vec(),
            mean: MeanMetrics::of(runs),
            outcome: None,
        });
    let unimodal = summaries.next().expect("unimodal arm");
    let multimodal: Vec<ArmSummary> = summaries
        .map(|mut s| {
            s.outcome = Some(outcome_from_primary(
                s.mean.primary(),
                unimodal.mean.primary(),
                regression,
                tau,
            ));
            s
        })
        .collect();

    let degradation = multimodal
        .iter()
        .find(|a| a.arm.level() == Some(0.8))
        .zip(
            multimodal
                .iter()
                .filter(|a| a.arm.level() > Some(0.8))
                .max_by(|a, b| {
                    a.arm
                        .level()
                        .partial_cmp(&b.arm.level())
                        .expect("levels are finite")
                }),
        )
        .map(|(reference, top)| Degradation {
            reference_level: 0.8,
            level: top.arm.level().expect("multimodal level"),
            degraded: if regression {
                top.mean.primary() > reference.mean.primary()
            } else {
                top.mean.primary() < reference.mean.primary()
            },
        });

    Ok(ExperimentReport {
        model: kind,
        eval_modality: base.eval_modality,
        seeds: seeds.to_vec(),
        levels: levels.to_vec(),
        tau,
        unimodal,
        multimodal,
        degradation,
    })
}

/// [`run_protocol`] over dropout levels applied jointly to audio and visual.
pub fn dropout_sweep(
    split: &DatasetSplit,
    kind: ModelKind,
    base: &TrainConfig,
    levels: &[f64],
    seeds: &[u64],
) -> Result<ExperimentReport> {
    run_protocol(split, kind, base, levels, seeds, None)
}
