//! Sequence models built from tape operations.
//!
//! Parameters live in a [`ParamStore`] outside any tape. Each forward pass
//! binds the store onto a fresh [`Tape`], giving a [`Binding`] from
//! [`ParamId`] to [`Var`], and reads gradients back through the same binding.

mod bieflstm;
pub mod checkpoint;
mod layers;
mod lstm;
mod mfn;

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Tensor, Var};
use crate::data::{Dims, MultimodalBatch, Task};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

pub use bieflstm::{bi_eflstm_encode, bi_eflstm_forward, BiEflstm, BiEflstmConfig, BiEflstmParams};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use layers::{FeedForward, Linear};
pub use lstm::{lstm_cell_step, LstmParams};
pub use mfn::{dman_attention, gated_memory_update, mfn_forward, Mfn, MfnConfig, MfnParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameter tensors in registration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.values[i])
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.values
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    /// Records every parameter as a trainable leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Binding {
        Binding(self.values.iter().map(|t| tape.leaf(t.clone())).collect())
    }

    /// Records every parameter as a constant, for inference.
    pub fn bind_frozen(&self, tape: &mut Tape) -> Binding {
        Binding(
            self.values
                .iter()
                .map(|t| tape.constant(t.clone()))
                .collect(),
        )
    }

    pub fn bit_eq(&self, other: &ParamStore) -> bool {
        self.names == other.names
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.bit_eq(b))
    }
}

/// Tape handles for every parameter of a store, indexed by [`ParamId`].
#[derive(Clone, Debug)]
pub struct Binding(Vec<Var>);

impl Binding {
    pub fn new(vars: Vec<Var>) -> Self {
        Self(vars)
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    /// Gradient buffers in store order; parameters the loss did not reach get zeros.
    pub fn gradients(&self, tape: &Tape) -> Vec<Vec<f64>> {
        self.0
            .iter()
            .map(|&v| {
                tape.grad_data(v)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| vec![0.0; tape.value(v).len()])
            })
            .collect()
    }
}

impl Index<ParamId> for Binding {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    BiEflstm,
    Mfn,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "bi-eflstm" | "bieflstm" | "eflstm" => Ok(ModelKind::BiEflstm),
            "mfn" => Ok(ModelKind::Mfn),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    BiEflstm(BiEflstmConfig),
    Mfn(MfnConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::BiEflstm(_) => ModelKind::BiEflstm,
            ModelConfig::Mfn(_) => ModelKind::Mfn,
        }
    }

    /// Default architecture of `kind` sized for `dims` and `task`.
    pub fn for_dataset(kind: ModelKind, dims: &Dims, task: Task, hidden: usize) -> Result<Self> {
        match (kind, task) {
            (ModelKind::BiEflstm, Task::Classification { classes }) => {
                Ok(ModelConfig::BiEflstm(BiEflstmConfig {
                    input_dim: dims.fused(),
                    hidden,
                    classes,
                }))
            }
            (ModelKind::Mfn, Task::Regression) => Ok(ModelConfig::Mfn(MfnConfig::new(
                [dims.language, dims.audio, dims.visual],
                hidden,
            ))),
            (kind, task) => Err(Error::TaskMismatch(format!(
                "{kind:?} cannot be trained on a {task:?} task"
            ))),
        }
    }

    pub fn task(&self) -> Task {
        match self {
            ModelConfig::BiEflstm(c) => Task::Classification { classes: c.classes },
            ModelConfig::Mfn(_) => Task::Regression,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    BiEflstm(BiEflstm),
    Mfn(Mfn),
}

impl Model {
    /// Fresh model with weights drawn from the run seed's init stream.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = stream(seed, Stream::Init);
        Ok(match config {
            ModelConfig::BiEflstm(c) => Model::BiEflstm(BiEflstm::new(c.clone(), &mut rng)?),
            ModelConfig::Mfn(c) => Model::Mfn(Mfn::new(c.clone(), &mut rng)?),
        })
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            Model::BiEflstm(m) => ModelConfig::BiEflstm(m.config.clone()),
            Model::Mfn(m) => ModelConfig::Mfn(m.config.clone()),
        }
    }

    pub fn task(&self) -> Task {
        self.config().task()
    }

    pub fn store(&self) -> &ParamStore {
        match self {
            Model::BiEflstm(m) => &m.store,
            Model::Mfn(m) => &m.store,
        }
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            Model::BiEflstm(m) => &mut m.store,
            Model::Mfn(m) => &mut m.store,
        }
    }

    /// Errors unless batches of `dims` fit this model's inputs.
    pub fn check_dims(&self, dims: &Dims) -> Result<()> {
        let (expected, found) = match self {
            Model::BiEflstm(m) => (vec![m.config.input_dim], vec![dims.fused()]),
            Model::Mfn(m) => (
                m.config.input_dims.to_vec(),
                vec![dims.language, dims.audio, dims.visual],
            ),
        };
        if expected != found {
            return Err(Error::Shape {
                op: "model input",
                lhs: expected,
                rhs: found,
            });
        }
        Ok(())
    }

    /// Logits `[B×K]` for the bi-EFLSTM, predictions `[B×1]` for the MFN.
    pub fn forward(
        &self,
        tape: &mut Tape,
        binding: &Binding,
        batch: &MultimodalBatch,
    ) -> Result<Var> {
        self.check_dims(&batch.dims)?;
        match self {
            Model::BiEflstm(m) => {
                let frames: Vec<Var> = (0..batch.dims.timesteps)
                    .map(|t| tape.constant(batch.fused_frame(t)))
                    .collect();
                bi_eflstm_forward(tape, binding, &m.params, &frames)
            }
            Model::Mfn(m) => {
                use crate::data::Modality::*;
                let frames = |tape: &mut Tape, modality| -> Vec<Var> {
                    (0..batch.dims.timesteps)
                        .map(|t| tape.constant(batch.frame(modality, t)))
                        .collect()
                };
                let (l, a, v) = (
                    frames(tape, Language),
                    frames(tape, Audio),
                    frames(tape, Visual),
                );
                mfn_forward(tape, binding, &m.params, &l, &a, &v)
            }
        }
    }

    /// Cross-entropy for classification, L1 for regression.
    pub fn loss(&self, tape: &mut Tape, output: Var, batch: &MultimodalBatch) -> Result<Var> {
        match self {
            Model::BiEflstm(_) => tape.cross_entropy(output, &batch.class_targets()?),
            Model::Mfn(_) => {
                let target = tape.constant(batch.value_targets()?);
                tape.l1_loss(output, target)
            }
        }
    }
}
