use serde::{Deserialize, Serialize};

use super::layers::FeedForward;
use super::lstm::{lstm_cell_step, LstmParams};
use super::{Binding, ParamStore};
use crate::autograd::{Tape, Tensor, Var};
use crate::data::Modality;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfnConfig {
    /// Feature widths in language, audio, visual order.
    pub input_dims: [usize; 3],
    /// LSTM memory width per modality.
    pub hidden: [usize; 3],
    /// Width of the multi-view memory `u`.
    pub mem_dim: usize,
    /// Hidden width of the attention and gate nets; defaults to their input width.
    #[serde(default)]
    pub ff_hidden: Option<usize>,
}

impl MfnConfig {
    pub fn new(input_dims: [usize; 3], hidden: usize) -> Self {
        Self {
            input_dims,
            hidden: [hidden; 3],
            mem_dim: hidden,
            ff_hidden: None,
        }
    }

    /// `2·Σ hidden`, the width of the two-step memory window.
    pub fn window_dim(&self) -> usize {
        2 * self.hidden.iter().sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dims.contains(&0)
            || self.hidden.contains(&0)
            || self.mem_dim == 0
            || self.ff_hidden == Some(0)
        {
            return Err(Error::Config("MFN dims must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MfnParams {
    /// Language, audio, visual.
    pub lstms: [LstmParams; 3],
    pub d_a: FeedForward,
    pub d_u: FeedForward,
    pub d_gamma1: FeedForward,
    pub d_gamma2: FeedForward,
    pub head: FeedForward,
}

impl MfnParams {
    pub fn new(store: &mut ParamStore, config: &MfnConfig, rng: &mut Rng) -> Self {
        let lstms = Modality::ALL.map(|m| {
            let i = m.index();
            LstmParams::new(
                store,
                &format!("lstm.{m}"),
                config.input_dims[i],
                config.hidden[i],
                rng,
            )
        });
        let w = config.window_dim();
        let ff = config.ff_hidden.unwrap_or(w);
        let u = config.mem_dim;
        let d_a = FeedForward::new(store, "d_a", w, ff, w, rng);
        let d_u = FeedForward::new(store, "d_u", w, ff, u, rng);
        let d_gamma1 = FeedForward::new(store, "d_gamma1", w, ff, u, rng);
        let d_gamma2 = FeedForward::new(store, "d_gamma2", w, ff, u, rng);
        let head_in = w / 2 + u;
        let head = FeedForward::new(store, "head", head_in, head_in, 1, rng);
        Self {
            lstms,
            d_a,
            d_u,
            d_gamma1,
            d_gamma2,
            head,
        }
    }

    pub fn mem_dim(&self) -> usize {
        self.d_u.out_dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mfn {
    pub config: MfnConfig,
    pub store: ParamStore,
    pub params: MfnParams,
}

impl Mfn {
    pub fn new(config: MfnConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let params = MfnParams::new(&mut store, &config, rng);
        Ok(Self {
            config,
            store,
            params,
        })
    }
}

fn check_width(tape: &Tape, op: &'static str, x: Var, expected: usize) -> Result<()> {
    let shape = tape.shape(x);
    if shape.len() != 2 || shape[1] != expected {
        return Err(Error::Shape {
            op,
            lhs: vec![expected],
            rhs: shape.to_vec(),
        });
    }
    Ok(())
}

/// `c ⊙ softmax(D_a(c))` with the softmax taken over features.
pub fn dman_attention(tape: &mut Tape, p: &Binding, d_a: &FeedForward, window: Var) -> Result<Var> {
    check_width(tape, "dman_attention", window, d_a.in_dim())?;
    let scores = d_a.apply(tape, p, window)?;
    let weights = tape.softmax(scores, 1)?;
    tape.mul(window, weights)
}

/// `u = σ(D_γ1(c)) ⊙ u_prev + σ(D_γ2(c)) ⊙ tanh(D_u(c))`.
pub fn gated_memory_update(
    tape: &mut Tape,
    p: &Binding,
    d_u: &FeedForward,
    d_gamma1: &FeedForward,
    d_gamma2: &FeedForward,
    window: Var,
    u_prev: Var,
) -> Result<Var> {
    let proposal = d_u.apply(tape, p, window)?;
    let proposal = tape.tanh(proposal);
    let retain = d_gamma1.apply(tape, p, window)?;
    let retain = tape.sigmoid(retain);
    let update = d_gamma2.apply(tape, p, window)?;
    let update = tape.sigmoid(update);
    let kept = tape.mul(retain, u_prev)?;
    let written = tape.mul(update, proposal)?;
    tape.add(kept, written)
}

/// Prediction `[B×1]` from per-modality `[B×d_m]` frames in time order.
pub fn mfn_forward(
    tape: &mut Tape,
    p: &Binding,
    params: &MfnParams,
    language: &[Var],
    audio: &[Var],
    visual: &[Var],
) -> Result<Var> {
    let streams = [language, audio, visual];
    let steps = language.len();
    if steps == 0 {
        return Err(Error::EmptySequence);
    }
    let batch = tape.shape(language[0])[0];
    for s in &streams {
        if s.len() != steps {
            return Err(Error::Shape {
                op: "mfn_forward timesteps",
                lhs: vec![steps],
                rhs: vec![s.len()],
            });
        }
        for &x in s.iter() {
            let rows = tape.shape(x).first().copied().unwrap_or(0);
            if rows != batch {
                return Err(Error::Shape {
                    op: "mfn_forward batch",
                    lhs: vec![batch],
                    rhs: tape.shape(x).to_vec(),
                });
            }
        }
    }

    let mut h: Vec<Var> = Vec::with_capacity(3);
    let mut c: Vec<Var> = Vec::with_capacity(3);
    for cell in &params.lstms {
        let zero = tape.constant(Tensor::zeros(&[batch, cell.hidden_dim]));
        h.push(zero);
        c.push(zero);
    }
    let mut u = tape.constant(Tensor::zeros(&[batch, params.mem_dim()]));
    let mut c_prev: Option<Var> = None;

    for t in 0..steps {
        for (m, cell) in params.lstms.iter().enumerate() {
            (h[m], c[m]) = lstm_cell_step(tape, p, cell, streams[m][t], h[m], c[m])?;
        }
        let c_now = tape.concat(&c, 1)?;
        if let Some(prev) = c_prev {
            let window = tape.concat(&[prev, c_now], 1)?;
            let attended = dman_attention(tape, p, &params.d_a, window)?;
            u = gated_memory_update(
                tape,
                p,
                &params.d_u,
                &params.d_gamma1,
                &params.d_gamma2,
                attended,
                u,
            )?;
        }
        c_prev = Some(c_now);
    }

    let summary = tape.concat(&[h[0], h[1], h[2], u], 1)?;
    params.head.apply(tape, p, summary)
}
