use serde::{Deserialize, Serialize};

use super::layers::Linear;
use super::lstm::{lstm_cell_step, LstmParams};
use super::{Binding, ParamStore};
use crate::autograd::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiEflstmConfig {
    /// Width of one fused frame.
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl BiEflstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 {
            return Err(Error::Config("bi-EFLSTM dims must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config("bi-EFLSTM needs at least two classes".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiEflstmParams {
    pub forward_cell: LstmParams,
    pub backward_cell: LstmParams,
    /// `2·hidden → hidden`
    pub linear1: Linear,
    /// `hidden → classes`
    pub linear2: Linear,
}

impl BiEflstmParams {
    pub fn new(store: &mut ParamStore, config: &BiEflstmConfig, rng: &mut Rng) -> Self {
        let h = config.hidden;
        Self {
            forward_cell: LstmParams::new(store, "forward", config.input_dim, h, rng),
            backward_cell: LstmParams::new(store, "backward", config.input_dim, h, rng),
            linear1: Linear::new(store, "linear1", 2 * h, h, rng),
            linear2: Linear::new(store, "linear2", h, config.classes, rng),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiEflstm {
    pub config: BiEflstmConfig,
    pub store: ParamStore,
    pub params: BiEflstmParams,
}

impl BiEflstm {
    pub fn new(config: BiEflstmConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let params = BiEflstmParams::new(&mut store, &config, rng);
        Ok(Self {
            config,
            store,
            params,
        })
    }
}

fn run_cell<'a>(
    tape: &mut Tape,
    p: &Binding,
    cell: &LstmParams,
    frames: impl Iterator<Item = &'a Var>,
    batch: usize,
) -> Result<Var> {
    let mut h = tape.constant(Tensor::zeros(&[batch, cell.hidden_dim]));
    let mut c = h;
    for &x in frames {
        (h, c) = lstm_cell_step(tape, p, cell, x, h, c)?;
    }
    Ok(h)
}

/// Final hidden states `(forward, backward)` over `[B×D]` frames in time order.
pub fn bi_eflstm_encode(
    tape: &mut Tape,
    p: &Binding,
    params: &BiEflstmParams,
    frames: &[Var],
) -> Result<(Var, Var)> {
    let first = frames.first().ok_or(Error::EmptySequence)?;
    let batch = tape.shape(*first)[0];
    let fwd = run_cell(tape, p, &params.forward_cell, frames.iter(), batch)?;
    let bwd = run_cell(tape, p, &params.backward_cell, frames.iter().rev(), batch)?;
    Ok((fwd, bwd))
}

/// Logits `[B×K]`: `linear2(tanh(linear1([h_fwd, h_bwd])))`.
pub fn bi_eflstm_forward(
    tape: &mut Tape,
    p: &Binding,
    params: &BiEflstmParams,
    frames: &[Var],
) -> Result<Var> {
    let (fwd, bwd) = bi_eflstm_encode(tape, p, params, frames)?;
    let joint = tape.concat(&[fwd, bwd], 1)?;
    let hidden = params.linear1.apply(tape, p, joint)?;
    let hidden = tape.tanh(hidden);
    params.linear2.apply(tape, p, hidden)
}
