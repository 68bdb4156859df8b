//! Adam training with plateau scheduling and early stopping on a
//! unimodal-masked validation split.

mod history;
mod optim;
mod schedule;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autograd::Tape;
use crate::data::{DatasetSplit, Modality, MultimodalBatch, MultimodalSample, Target, Task};
use crate::error::{Error, Result};
use crate::modality_dropout::{apply_mask, draw_mask, mask_for_unimodal_eval, DropoutPolicy};
use crate::models::Model;
use crate::rng::{stream, Stream};

pub use history::{EpochRecord, TrainHistory};
pub use optim::{adam_step, clip_global_norm, AdamConfig, AdamState};
pub use schedule::{early_stop_check, reduce_lr_on_plateau, PlateauScheduler};

/// Rows per forward pass when only evaluating.
const EVAL_CHUNK: usize = 150;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub hidden_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub plateau_threshold: f64,
    pub early_stop_patience: usize,
    pub dropout_policy: DropoutPolicy,
    /// Global gradient norm cap; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Trains on this modality alone, zeroing the others in every batch.
    pub kept_modality: Option<Modality>,
    /// Modality kept when scoring validation and test data.
    pub eval_modality: Modality,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 15,
            max_epochs: 40,
            hidden_size: 128,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            plateau_factor: 0.5,
            plateau_patience: 3,
            plateau_threshold: 1e-4,
            early_stop_patience: 7,
            dropout_policy: DropoutPolicy::none(),
            grad_clip: Some(5.0),
            kept_modality: None,
            eval_modality: Modality::Language,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.hidden_size == 0 {
            return bad("batch_size, max_epochs and hidden_size must be at least 1");
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return bad("patience values must be at least 1");
        }
        if !(0.0..1.0).contains(&self.plateau_factor) {
            return bad("plateau_factor must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.adam_beta1)
            || !(0.0..1.0).contains(&self.adam_beta2)
            || self.adam_eps <= 0.0
        {
            return bad("Adam betas must lie in [0, 1) and eps must be positive");
        }
        if matches!(self.grad_clip, Some(c) if !(c > 0.0)) {
            return bad("grad_clip must be positive");
        }
        self.dropout_policy.validate()
    }
}

fn check_compatible(model: &Model, split: &DatasetSplit) -> Result<()> {
    if model.task() != split.task {
        return Err(Error::TaskMismatch(format!(
            "model expects {:?}, dataset is {:?}",
            model.task(),
            split.task
        )));
    }
    model.check_dims(&split.dims)
}

fn unimodal_chunks(
    samples: &[MultimodalSample],
    kept: Option<Modality>,
) -> Result<Vec<MultimodalBatch>> {
    samples
        .chunks(EVAL_CHUNK)
        .map(|chunk| {
            let batch = MultimodalBatch::from_samples(chunk)?;
            Ok(match kept {
                Some(m) => mask_for_unimodal_eval(&batch, m),
                None => batch,
            })
        })
        .collect()
}

/// Mean per-sample loss over pre-built batches.
fn mean_loss(model: &Model, batches: &[MultimodalBatch]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0;
    for batch in batches {
        let mut tape = Tape::new();
        let binding = model.store().bind_frozen(&mut tape);
        let out = model.forward(&mut tape, &binding, batch)?;
        let loss = model.loss(&mut tape, out, batch)?;
        total += tape.value(loss).data()[0] * batch.size() as f64;
        count += batch.size();
    }
    Ok(total / count as f64)
}

/// Trains a copy of `model`, returning the parameters of the best validation epoch.
pub fn train(
    model: &Model,
    split: &DatasetSplit,
    config: &TrainConfig,
) -> Result<(Model, TrainHistory)> {
    config.validate()?;
    check_compatible(model, split)?;
    if split.train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if split.validation.is_empty() {
        return Err(Error::Empty("validation split"));
    }

    let mut shuffle_rng = stream(config.seed, Stream::Shuffle);
    let mut dropout_rng = stream(config.seed, Stream::Dropout);
    let applied = match config.kept_modality {
        Some(kept) => Modality::ALL.map(|m| if m == kept { 0.0 } else { 1.0 }),
        None => config.dropout_policy.rates(),
    };
    let val = unimodal_chunks(&split.validation, Some(config.eval_modality))?;
    let adam = config.adam();

    let mut current = model.clone();
    let mut best = model.clone();
    let mut state = AdamState::new(current.store().tensors());
    let mut scheduler = PlateauScheduler::new(
        config.learning_rate,
        config.plateau_factor,
        config.plateau_patience,
        config.plateau_threshold,
    );
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..split.train.len()).collect();

    for epoch in 1..=config.max_epochs {
        let lr = scheduler.lr;
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for idx in order.chunks(config.batch_size) {
            let batch = MultimodalBatch::from_samples(idx.iter().map(|&i| &split.train[i]))?;
            let batch = match config.kept_modality {
                Some(kept) => mask_for_unimodal_eval(&batch, kept),
                None if config.dropout_policy.is_identity() => batch,
                None => {
                    let mask = draw_mask(
                        batch.size(),
                        batch.dims.timesteps,
                        &config.dropout_policy,
                        &mut dropout_rng,
                    )?;
                    apply_mask(&batch, &mask)?
                }
            };
            let mut tape = Tape::new();
            let binding = current.store().bind(&mut tape);
            let out = current.forward(&mut tape, &binding, &batch)?;
            let loss = current.loss(&mut tape, out, &batch)?;
            total += tape.value(loss).data()[0] * batch.size() as f64;
            tape.backward(loss)?;
            let mut grads = binding.gradients(&tape);
            if let Some(cap) = config.grad_clip {
                clip_global_norm(&mut grads, cap);
            }
            adam_step(
                current.store_mut().tensors_mut(),
                &grads,
                &mut state,
                lr,
                &adam,
            )?;
        }

        let val_loss = mean_loss(&current, &val)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: total / split.train.len() as f64,
            val_loss,
            lr,
            dropout: applied,
        });
        let (stop, best_epoch) =
            early_stop_check(&history.val_losses(), config.early_stop_patience);
        if best_epoch == epoch {
            best = current.clone();
        }
        history.best_epoch = best_epoch;
        if stop {
            history.early_stop_epoch = Some(epoch);
            break;
        }
        scheduler.step(val_loss);
    }
    Ok((best, history))
}

/// Predicts every sample, keeping only `kept` when given.
///
/// Classification yields the arg-max class, regression the raw output.
pub fn predict(
    model: &Model,
    samples: &[MultimodalSample],
    kept: Option<Modality>,
) -> Result<Vec<Target>> {
    let mut out = Vec::with_capacity(samples.len());
    for batch in unimodal_chunks(samples, kept)? {
        model.check_dims(&batch.dims)?;
        let mut tape = Tape::new();
        let binding = model.store().bind_frozen(&mut tape);
        let y = model.forward(&mut tape, &binding, &batch)?;
        let y = tape.value(y);
        match model.task() {
            Task::Classification { classes } => {
                for row in y.data().chunks_exact(classes) {
                    let mut arg = 0;
                    for (k, &v) in row.iter().enumerate() {
                        if v > row[arg] {
                            arg = k;
                        }
                    }
                    out.push(Target::Class(arg));
                }
            }
            Task::Regression => out.extend(y.data().iter().map(|&v| Target::Value(v))),
        }
    }
    Ok(out)
}

/// Mean loss on `samples` with only `kept` visible.
pub fn evaluate_loss(
    model: &Model,
    samples: &[MultimodalSample],
    kept: Option<Modality>,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation samples"));
    }
    mean_loss(model, &unimodal_chunks(samples, kept)?)
}
