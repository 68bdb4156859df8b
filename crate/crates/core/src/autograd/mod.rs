//! Dense-tensor engine with reverse-mode differentiation.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters enter
//! as leaves, data as constants; [`Tape::backward`] then fills gradients for
//! everything reachable from a scalar loss. The tape is rebuilt per batch.
//!
//! ```
//! use colearn_core::autograd::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let a = tape.leaf(Tensor::from_vec(vec![1.0, 2.0]));
//! let b = tape.constant(Tensor::from_vec(vec![3.0, 4.0]));
//! let prod = tape.mul(a, b).unwrap();
//! let loss = tape.sum(prod);
//! tape.backward(loss).unwrap();
//! assert_eq!(tape.grad(a).unwrap().data(), &[3.0, 4.0]);
//! ```

pub mod gradcheck;
pub mod kernels;
mod tape;
mod tensor;

pub use tape::{Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
