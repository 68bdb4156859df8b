use super::layers::uniform;
use super::{Binding, ParamId, ParamStore};
use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Weights of one LSTM cell.
///
/// Input matrices are `hidden×input`, recurrent matrices `hidden×hidden`;
/// each gate has separate input and recurrent biases.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_ii: ParamId,
    pub w_if: ParamId,
    pub w_ig: ParamId,
    pub w_io: ParamId,
    pub w_hi: ParamId,
    pub w_hf: ParamId,
    pub w_hg: ParamId,
    pub w_ho: ParamId,
    pub b_ii: ParamId,
    pub b_if: ParamId,
    pub b_ig: ParamId,
    pub b_io: ParamId,
    pub b_hi: ParamId,
    pub b_hf: ParamId,
    pub b_hg: ParamId,
    pub b_ho: ParamId,
}

impl LstmParams {
    /// Registers a cell under `prefix`, drawing weights from `±1/√hidden`.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut add = |name: &str, shape: &[usize]| {
            store.add(format!("{prefix}.{name}"), uniform(rng, shape, bound))
        };
        let (i, h) = (input_dim, hidden_dim);
        Self {
            input_dim,
            hidden_dim,
            w_ii: add("w_ii", &[h, i]),
            w_if: add("w_if", &[h, i]),
            w_ig: add("w_ig", &[h, i]),
            w_io: add("w_io", &[h, i]),
            w_hi: add("w_hi", &[h, h]),
            w_hf: add("w_hf", &[h, h]),
            w_hg: add("w_hg", &[h, h]),
            w_ho: add("w_ho", &[h, h]),
            b_ii: add("b_ii", &[h]),
            b_if: add("b_if", &[h]),
            b_ig: add("b_ig", &[h]),
            b_io: add("b_io", &[h]),
            b_hi: add("b_hi", &[h]),
            b_hf: add("b_hf", &[h]),
            b_hg: add("b_hg", &[h]),
            b_ho: add("b_ho", &[h]),
        }
    }
}

fn gate(
    tape: &mut Tape,
    p: &Binding,
    x: Var,
    h: Var,
    w_x: ParamId,
    b_x: ParamId,
    w_h: ParamId,
    b_h: ParamId,
) -> Result<Var> {
    let xw = tape.matmul_bt(x, p[w_x])?;
    let xw = tape.add_bias(xw, p[b_x])?;
    let hw = tape.matmul_bt(h, p[w_h])?;
    let hw = tape.add_bias(hw, p[b_h])?;
    tape.add(xw, hw)
}

/// One LSTM step over a batch; returns `(h', c')`.
///
/// ```text
/// i = σ(W_ii x + b_ii + W_hi h + b_hi)
/// f = σ(W_if x + b_if + W_hf h + b_hf)
/// g = tanh(W_ig x + b_ig + W_hg h + b_hg)
/// o = σ(W_io x + b_io + W_ho h + b_ho)
/// c' = f ⊙ c + i ⊙ g
/// h' = o ⊙ tanh(c')
/// ```
pub fn lstm_cell_step(
    tape: &mut Tape,
    p: &Binding,
    cell: &LstmParams,
    x: Var,
    h: Var,
    c: Var,
) -> Result<(Var, Var)> {
    let (sx, sh, sc) = (tape.shape(x), tape.shape(h), tape.shape(c));
    if sx.len() != 2 || sx[1] != cell.input_dim || sh != [sx[0], cell.hidden_dim] || sc != sh {
        return Err(Error::Shape {
            op: "lstm_cell_step",
            lhs: vec![cell.input_dim, cell.hidden_dim],
            rhs: [sx, sh, sc].concat(),
        });
    }
    let i = gate(tape, p, x, h, cell.w_ii, cell.b_ii, cell.w_hi, cell.b_hi)?;
    let i = tape.sigmoid(i);
    let f = gate(tape, p, x, h, cell.w_if, cell.b_if, cell.w_hf, cell.b_hf)?;
    let f = tape.sigmoid(f);
    let g = gate(tape, p, x, h, cell.w_ig, cell.b_ig, cell.w_hg, cell.b_hg)?;
    let g = tape.tanh(g);
    let o = gate(tape, p, x, h, cell.w_io, cell.b_io, cell.w_ho, cell.b_ho)?;
    let o = tape.sigmoid(o);

    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c_next = tape.add(keep, write)?;
    let squashed = tape.tanh(c_next);
    let h_next = tape.mul(o, squashed)?;
    Ok((h_next, c_next))
}
