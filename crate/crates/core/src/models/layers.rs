use rand::Rng as _;

use super::{Binding, ParamId, ParamStore};
use crate::autograd::{Tape, Tensor, Var};
use crate::error::Result;
use crate::rng::Rng;

pub(crate) fn uniform(rng: &mut Rng, shape: &[usize], bound: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("init shape")
}

/// `y = x·Wᵀ + b` with `W` stored `out×in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Uniform in `±1/√in_dim`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weight = store.add(
            format!("{name}.weight"),
            uniform(rng, &[out_dim, in_dim], bound),
        );
        let bias = store.add(format!("{name}.bias"), uniform(rng, &[out_dim], bound));
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn apply(&self, tape: &mut Tape, p: &Binding, x: Var) -> Result<Var> {
        let xw = tape.matmul_bt(x, p[self.weight])?;
        tape.add_bias(xw, p[self.bias])
    }
}

/// One tanh hidden layer followed by a linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedForward {
    pub hidden: Linear,
    pub output: Linear,
}

impl FeedForward {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        Self {
            hidden: Linear::new(store, &format!("{name}.hidden"), in_dim, hidden, rng),
            output: Linear::new(store, &format!("{name}.output"), hidden, out_dim, rng),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.hidden.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.output.out_dim
    }

    pub fn apply(&self, tape: &mut Tape, p: &Binding, x: Var) -> Result<Var> {
        let h = self.hidden.apply(tape, p, x)?;
        let h = tape.tanh(h);
        self.output.apply(tape, p, h)
    }
}
