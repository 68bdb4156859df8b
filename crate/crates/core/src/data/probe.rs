//! Linear softmax probe on one modality's flattened frames.
//!
//! Gives a cheap estimate of how much class information a modality carries,
//! independent of the sequence models.

use super::{DatasetSplit, Modality, MultimodalSample, Target, Task};
use crate::autograd::{Tape, Tensor};
use crate::error::{Error, Result};

fn design(samples: &[MultimodalSample], m: Modality) -> Result<(Tensor, Vec<usize>)> {
    let first = samples.first().ok_or(Error::Empty("probe samples"))?;
    let width = first.modality(m).len();
    let mut data = Vec::with_capacity(samples.len() * width);
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        data.extend_from_slice(s.modality(m).data());
        match s.target {
            Target::Class(c) => labels.push(c),
            Target::Value(_) => {
                return Err(Error::TaskMismatch("probe needs class targets".into()))
            }
        }
    }
    Ok((Tensor::new(vec![samples.len(), width], data)?, labels))
}

/// Fits the probe on `split.train` by full-batch gradient descent from zero
/// weights and returns its test accuracy.
pub fn linear_probe(split: &DatasetSplit, m: Modality, iterations: usize, lr: f64) -> Result<f64> {
    let Task::Classification { classes } = split.task else {
        return Err(Error::TaskMismatch(
            "probe needs a classification split".into(),
        ));
    };
    let (x, y) = design(&split.train, m)?;
    let (x_test, y_test) = design(&split.test, m)?;
    let width = x.shape()[1];
    let mut w = Tensor::zeros(&[classes, width]);
    let mut b = Tensor::zeros(&[classes]);
    for _ in 0..iterations {
        let mut tape = Tape::new();
        let (wv, bv) = (tape.leaf(w.clone()), tape.leaf(b.clone()));
        let xv = tape.constant(x.clone());
        let logits = tape.matmul_bt(xv, wv)?;
        let logits = tape.add_bias(logits, bv)?;
        let loss = tape.cross_entropy(logits, &y)?;
        tape.backward(loss)?;
        for (p, g) in [(&mut w, tape.grad_data(wv)), (&mut b, tape.grad_data(bv))] {
            let g = g.expect("probe parameter reached by loss");
            p.data_mut()
                .iter_mut()
                .zip(g)
                .for_each(|(p, g)| *p -= lr * g);
        }
    }
    let mut tape = Tape::new();
    let (wv, bv, xv) = (tape.constant(w), tape.constant(b), tape.constant(x_test));
    let logits = tape.matmul_bt(xv, wv)?;
    let logits = tape.add_bias(logits, bv)?;
    let correct = tape
        .value(logits)
        .data()
        .chunks_exact(classes)
        .zip(&y_test)
        .filter(|(row, &t)| (0..classes).all(|k| row[k] <= row[t]))
        .count();
    Ok(correct as f64 / y_test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    fn split(snr_language: f64, snr_audio: f64) -> DatasetSplit {
        generate_synthetic(&SyntheticConfig {
            n_samples: 2000,
            snr_language,
            snr_audio,
            snr_visual: 0.0,
            seed: 17,
            ..SyntheticConfig::ncl_preset()
        })
        .unwrap()
    }

    #[test]
    fn strong_language_signal_is_linearly_decodable() {
        let acc = linear_probe(&split(10.0, 0.0), Modality::Language, 100, 0.5).unwrap();
        assert!(acc > 0.95, "probe accuracy {acc}");
    }

    #[test]
    fn no_signal_is_chance() {
        let s = split(0.0, 0.0);
        let acc = linear_probe(&s, Modality::Language, 100, 0.5).unwrap();
        // 300 test samples: 3σ of a binomial at p = 1/4 is about 0.075.
        assert!((acc - 0.25).abs() < 0.075, "probe accuracy {acc}");
    }

    #[test]
    fn regression_splits_are_rejected() {
        let s = generate_synthetic(&SyntheticConfig {
            n_samples: 30,
            task: crate::data::SyntheticTask::Regression,
            ..SyntheticConfig::ncl_preset()
        })
        .unwrap();
        assert!(matches!(
            linear_probe(&s, Modality::Language, 1, 0.1),
            Err(Error::TaskMismatch(_))
        ));
    }
}
