use super::{Dims, Modality, MultimodalSample, Target};
use crate::autograd::Tensor;
use crate::error::{Error, Result};

/// A stack of samples; each modality is held as one `[B×T×d_m]` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct MultimodalBatch {
    pub dims: Dims,
    features: [Tensor; 3],
    pub targets: Vec<Target>,
}

impl MultimodalBatch {
    pub fn from_samples<'a, I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a MultimodalSample>,
    {
        let samples: Vec<&MultimodalSample> = samples.into_iter().collect();
        let first = samples.first().ok_or(Error::Empty("batch samples"))?;
        let dims = first.dims()?;
        let mut buffers: [Vec<f64>; 3] = Default::default();
        let mut targets = Vec::with_capacity(samples.len());
        for s in &samples {
            let d = s.dims()?;
            if d != dims {
                return Err(Error::Shape {
                    op: "batch",
                    lhs: vec![dims.timesteps, dims.fused()],
                    rhs: vec![d.timesteps, d.fused()],
                });
            }
            for m in Modality::ALL {
                buffers[m.index()].extend_from_slice(s.modality(m).data());
            }
            targets.push(s.target);
        }
        let b = samples.len();
        let [l, a, v] = buffers;
        let t = dims.timesteps;
        Ok(Self {
            dims,
            features: [
                Tensor::new(vec![b, t, dims.language], l)?,
                Tensor::new(vec![b, t, dims.audio], a)?,
                Tensor::new(vec![b, t, dims.visual], v)?,
            ],
            targets,
        })
    }

    pub fn size(&self) -> usize {
        self.targets.len()
    }

    pub fn modality(&self, m: Modality) -> &Tensor {
        &self.features[m.index()]
    }

    pub fn modality_mut(&mut self, m: Modality) -> &mut Tensor {
        &mut self.features[m.index()]
    }

    /// Features of one modality at one timestep, `[B×d_m]`.
    pub fn frame(&self, m: Modality, t: usize) -> Tensor {
        let d = self.dims.of(m);
        let steps = self.dims.timesteps;
        let src = self.features[m.index()].data();
        let mut out = Vec::with_capacity(self.size() * d);
        for b in 0..self.size() {
            let base = (b * steps + t) * d;
            out.extend_from_slice(&src[base..base + d]);
        }
        Tensor::new(vec![self.size(), d], out).expect("frame shape")
    }

    /// Early-fused frame at timestep `t`: language, audio, visual side by side.
    pub fn fused_frame(&self, t: usize) -> Tensor {
        let steps = self.dims.timesteps;
        let width = self.dims.fused();
        let mut out = Vec::with_capacity(self.size() * width);
        for b in 0..self.size() {
            for m in Modality::ALL {
                let d = self.dims.of(m);
                let base = (b * steps + t) * d;
                out.extend_from_slice(&self.features[m.index()].data()[base..base + d]);
            }
        }
        Tensor::new(vec![self.size(), width], out).expect("fused frame shape")
    }

    /// Zeroes every frame of modality `m` for sample `b`.
    pub(crate) fn zero_sample(&mut self, m: Modality, b: usize) {
        let span = self.dims.timesteps * self.dims.of(m);
        self.features[m.index()].data_mut()[b * span..(b + 1) * span].fill(0.0);
    }

    /// Zeroes modality `m` of sample `b` at timestep `t`.
    pub(crate) fn zero_frame(&mut self, m: Modality, b: usize, t: usize) {
        let d = self.dims.of(m);
        let base = (b * self.dims.timesteps + t) * d;
        self.features[m.index()].data_mut()[base..base + d].fill(0.0);
    }

    pub fn class_targets(&self) -> Result<Vec<usize>> {
        self.targets
            .iter()
            .map(|t| match t {
                Target::Class(c) => Ok(*c),
                Target::Value(_) => Err(Error::TaskMismatch("expected class targets".into())),
            })
            .collect()
    }

    /// Regression targets as a `[B×1]` tensor.
    pub fn value_targets(&self) -> Result<Tensor> {
        let values = self
            .targets
            .iter()
            .map(|t| match t {
                Target::Value(v) => Ok(*v),
                Target::Class(_) => Err(Error::TaskMismatch("expected regression targets".into())),
            })
            .collect::<Result<Vec<f64>>>()?;
        Tensor::new(vec![values.len(), 1], values)
    }
}
