//! Multimodal samples, batches, preprocessing, synthetic data and the
//! on-disk dataset container.

mod batch;
pub mod format;
pub mod pipeline;
pub mod probe;
pub mod synthetic;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autograd::Tensor;
use crate::error::{Error, Result};

pub use batch::MultimodalBatch;
pub use format::{load_dataset, save_dataset};
pub use pipeline::{filter_by_length, fuse_modalities, pad_front};
pub use probe::linear_probe;
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticTask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Language,
    Audio,
    Visual,
}

impl Modality {
    /// Fixed order used for fusion, masks and file payloads.
    pub const ALL: [Modality; 3] = [Modality::Language, Modality::Audio, Modality::Visual];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Language => "language",
            Modality::Audio => "audio",
            Modality::Visual => "visual",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "language" | "text" | "l" => Ok(Modality::Language),
            "audio" | "acoustic" | "a" => Ok(Modality::Audio),
            "visual" | "video" | "vision" | "v" => Ok(Modality::Visual),
            _ => Err(Error::UnknownModality(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum Task {
    Classification { classes: usize },
    Regression,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Class(usize),
    Value(f64),
}

impl Target {
    pub(crate) fn as_f64(self) -> f64 {
        match self {
            Target::Class(c) => c as f64,
            Target::Value(v) => v,
        }
    }
}

/// Sequence length and per-modality feature widths shared by a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub timesteps: usize,
    pub language: usize,
    pub audio: usize,
    pub visual: usize,
}

impl Dims {
    pub fn of(&self, m: Modality) -> usize {
        match m {
            Modality::Language => self.language,
            Modality::Audio => self.audio,
            Modality::Visual => self.visual,
        }
    }

    pub fn fused(&self) -> usize {
        self.language + self.audio + self.visual
    }

    /// Column range of `m` inside a fused frame.
    pub fn fused_range(&self, m: Modality) -> std::ops::Range<usize> {
        let start: usize = Modality::ALL[..m.index()].iter().map(|&x| self.of(x)).sum();
        start..start + self.of(m)
    }
}

/// One aligned example: a `[T×d_m]` feature matrix per modality.
#[derive(Clone, Debug, PartialEq)]
pub struct MultimodalSample {
    pub language: Tensor,
    pub audio: Tensor,
    pub visual: Tensor,
    pub target: Target,
    /// Unpadded length; the leading `T - original_length` frames are zeros.
    pub original_length: usize,
}

impl MultimodalSample {
    pub fn modality(&self, m: Modality) -> &Tensor {
        match m {
            Modality::Language => &self.language,
            Modality::Audio => &self.audio,
            Modality::Visual => &self.visual,
        }
    }

    pub fn modality_mut(&mut self, m: Modality) -> &mut Tensor {
        match m {
            Modality::Language => &mut self.language,
            Modality::Audio => &mut self.audio,
            Modality::Visual => &mut self.visual,
        }
    }

    /// Checks alignment, returning the sample's dims.
    pub fn dims(&self) -> Result<Dims> {
        let mut width = [0usize; 3];
        let timesteps = self.language.shape().first().copied().unwrap_or(0);
        for m in Modality::ALL {
            let shape = self.modality(m).shape();
            if shape.len() != 2 || shape[0] != timesteps {
                return Err(Error::Shape {
                    op: "sample alignment",
                    lhs: self.language.shape().to_vec(),
                    rhs: shape.to_vec(),
                });
            }
            width[m.index()] = shape[1];
        }
        if self.original_length > timesteps {
            return Err(Error::Config(format!(
                "original length {} exceeds {timesteps} timesteps",
                self.original_length
            )));
        }
        Ok(Dims {
            timesteps,
            language: width[0],
            audio: width[1],
            visual: width[2],
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub task: Task,
    pub dims: Dims,
    pub train: Vec<MultimodalSample>,
    pub validation: Vec<MultimodalSample>,
    pub test: Vec<MultimodalSample>,
}

impl DatasetSplit {
    /// Verifies that every sample matches the split's dims and task.
    pub fn validate(&self) -> Result<()> {
        for sample in self.train.iter().chain(&self.validation).chain(&self.test) {
            let dims = sample.dims()?;
            if dims != self.dims {
                return Err(Error::Shape {
                    op: "dataset dims",
                    lhs: vec![
                        self.dims.timesteps,
                        self.dims.language,
                        self.dims.audio,
                        self.dims.visual,
                    ],
                    rhs: vec![dims.timesteps, dims.language, dims.audio, dims.visual],
                });
            }
            match (self.task, sample.target) {
                (Task::Classification { classes }, Target::Class(c)) if c < classes => {}
                (Task::Classification { classes }, Target::Class(c)) => {
                    return Err(Error::InvalidClass { index: c, classes })
                }
                (Task::Regression, Target::Value(_)) => {}
                _ => {
                    return Err(Error::TaskMismatch(
                        "target kind differs from dataset task".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}
