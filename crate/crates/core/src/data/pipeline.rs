//! Length filtering, front padding and early fusion.

use super::{Dims, Modality, MultimodalSample, Target};
use crate::autograd::Tensor;
use crate::error::{Error, Result};

/// An unaligned example of `L` frames per modality, before padding.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSample {
    pub language: Tensor,
    pub audio: Tensor,
    pub visual: Tensor,
    pub target: Target,
}

impl RawSample {
    pub fn len(&self) -> usize {
        self.language.shape().first().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Front-pads every modality to `timesteps` frames.
    pub fn align(self, timesteps: usize) -> Result<MultimodalSample> {
        let original_length = self.len();
        for t in [&self.audio, &self.visual] {
            if t.shape().first() != Some(&original_length) {
                return Err(Error::Shape {
                    op: "align",
                    lhs: self.language.shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
        }
        Ok(MultimodalSample {
            language: pad_front(&self.language, timesteps)?,
            audio: pad_front(&self.audio, timesteps)?,
            visual: pad_front(&self.visual, timesteps)?,
            target: self.target,
            original_length,
        })
    }
}

/// Population mean and standard deviation of a set of lengths.
pub fn length_stats(lengths: impl IntoIterator<Item = usize>) -> (f64, f64) {
    let lengths: Vec<f64> = lengths.into_iter().map(|l| l as f64).collect();
    if lengths.is_empty() {
        return (0.0, 0.0);
    }
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Exclusive upper bound on sequence length: `mean + k·std`, optionally
/// capped at `max_length` (normally the padded length `T`).
pub fn length_cutoff(mean: f64, std: f64, k: f64, max_length: Option<usize>) -> f64 {
    let bound = mean + k * std;
    match max_length {
        Some(cap) => bound.min(cap as f64),
        None => bound,
    }
}

/// Keeps items whose length is strictly below [`length_cutoff`].
pub fn filter_by_length<T>(
    items: Vec<T>,
    length: impl Fn(&T) -> usize,
    mean: f64,
    std: f64,
    k: f64,
    max_length: Option<usize>,
) -> Vec<T> {
    let cutoff = length_cutoff(mean, std, k, max_length);
    items
        .into_iter()
        .filter(|x| (length(x) as f64) < cutoff)
        .collect()
}

/// Zero-pads an `[L×d]` sequence at the front to `[T×d]`.
pub fn pad_front(seq: &Tensor, timesteps: usize) -> Result<Tensor> {
    let shape = seq.shape();
    if shape.len() != 2 {
        return Err(Error::Shape {
            op: "pad_front",
            lhs: shape.to_vec(),
            rhs: vec![timesteps],
        });
    }
    let (len, width) = (shape[0], shape[1]);
    if len > timesteps {
        return Err(Error::Shape {
            op: "pad_front",
            lhs: shape.to_vec(),
            rhs: vec![timesteps, width],
        });
    }
    let mut data = vec![0.0; timesteps * width];
    data[(timesteps - len) * width..].copy_from_slice(seq.data());
    Tensor::new(vec![timesteps, width], data)
}

/// Per-timestep concatenation `[T×(d_l+d_a+d_v)]` in language, audio, visual order.
pub fn fuse_modalities(sample: &MultimodalSample) -> Result<Tensor> {
    let dims = sample.dims()?;
    let width = dims.fused();
    let mut data = Vec::with_capacity(dims.timesteps * width);
    for t in 0..dims.timesteps {
        for m in Modality::ALL {
            let d = dims.of(m);
            data.extend_from_slice(&sample.modality(m).data()[t * d..(t + 1) * d]);
        }
    }
    Tensor::new(vec![dims.timesteps, width], data)
}

/// Recovers modality `m` from a fused `[T×D]` tensor.
pub fn split_fused(fused: &Tensor, dims: &Dims, m: Modality) -> Result<Tensor> {
    if fused.shape() != [dims.timesteps, dims.fused()] {
        return Err(Error::Shape {
            op: "split_fused",
            lhs: fused.shape().to_vec(),
            rhs: vec![dims.timesteps, dims.fused()],
        });
    }
    let range = dims.fused_range(m);
    let mut data = Vec::with_capacity(dims.timesteps * range.len());
    for row in fused.data().chunks_exact(dims.fused()) {
        data.extend_from_slice(&row[range.clone()]);
    }
    Tensor::new(vec![dims.timesteps, dims.of(m)], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(len: usize) -> RawSample {
        RawSample {
            language: Tensor::full(&[len, 2], 1.0),
            audio: Tensor::full(&[len, 1], 2.0),
            visual: Tensor::full(&[len, 3], 3.0),
            target: Target::Class(0),
        }
    }

    #[test]
    fn mean_13_std_11_with_length_30_cap() {
        assert_eq!(length_cutoff(13.0, 11.0, 2.0, Some(30)), 30.0);
        let kept = filter_by_length(vec![5usize, 29, 30, 112], |&l| l, 13.0, 11.0, 2.0, Some(30));
        assert_eq!(kept, vec![5, 29]);
    }

    #[test]
    fn uncapped_cutoff_is_mean_plus_k_std() {
        assert_eq!(length_cutoff(13.0, 11.0, 2.0, None), 35.0);
        let kept = filter_by_length(vec![5usize, 29, 30, 35, 112], |&l| l, 13.0, 11.0, 2.0, None);
        assert_eq!(kept, vec![5, 29, 30]);
    }

    #[test]
    fn huge_k_keeps_everything() {
        let lens = vec![1usize, 50, 1000];
        assert_eq!(
            filter_by_length(lens.clone(), |&l| l, 13.0, 11.0, 1e12, None),
            lens
        );
    }

    #[test]
    fn stats_are_population_moments() {
        let (mean, std) = length_stats([2, 4, 4, 4, 5, 5, 7, 9]);
        assert_eq!((mean, std), (5.0, 2.0));
    }

    #[test]
    fn pad_front_cases() {
        let seq = Tensor::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(pad_front(&seq, 4).unwrap().data(), &[0.0, 0.0, 1.0, 2.0]);
        assert!(pad_front(&seq, 2).unwrap().bit_eq(&seq));
        let empty = Tensor::zeros(&[0, 3]);
        assert_eq!(pad_front(&empty, 2).unwrap(), Tensor::zeros(&[2, 3]));
        assert!(pad_front(&seq, 1).is_err());
    }

    #[test]
    fn fusion_width_and_round_trip() {
        let sample = raw(3).align(5).unwrap();
        assert_eq!(sample.original_length, 3);
        let dims = sample.dims().unwrap();
        let fused = fuse_modalities(&sample).unwrap();
        assert_eq!(fused.shape(), &[5, 6]);
        for m in Modality::ALL {
            assert!(split_fused(&fused, &dims, m)
                .unwrap()
                .bit_eq(sample.modality(m)));
        }
    }

    #[test]
    fn reference_dims_fuse_to_690() {
        let dims = Dims {
            timesteps: 30,
            language: 300,
            audio: 80,
            visual: 310,
        };
        assert_eq!(dims.fused(), 690);
        assert_eq!(dims.fused_range(Modality::Audio), 300..380);
        assert_eq!(dims.fused_range(Modality::Visual), 380..690);
    }

    #[test]
    fn zero_supporting_blocks_leave_only_language() {
        let mut sample = raw(2).align(2).unwrap();
        sample.audio = Tensor::zeros(sample.audio.shape());
        sample.visual = Tensor::zeros(sample.visual.shape());
        let fused = fuse_modalities(&sample).unwrap();
        for row in fused.data().chunks_exact(6) {
            assert_eq!(&row[2..], &[0.0; 4]);
            assert_eq!(&row[..2], &[1.0, 1.0]);
        }
    }

    #[test]
    fn misaligned_modalities_are_rejected() {
        let mut r = raw(3);
        r.audio = Tensor::zeros(&[2, 1]);
        assert!(r.align(4).is_err());
    }
}
