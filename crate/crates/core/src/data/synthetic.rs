//! Synthetic co-learning data with per-modality signal strength.
//!
//! Each (class, modality) pair owns a random unit template. A sample of class
//! `k` carries `snr_m · template[k][m]` in the last `⌈T/2⌉` frames of modality
//! `m`, on top of unit Gaussian noise over its unpadded frames. Making audio
//! much stronger than language while testing on language alone reproduces
//! the setting where a multimodal model leans on a modality that disappears
//! at deployment.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::pipeline::RawSample;
use super::{DatasetSplit, Dims, Modality, MultimodalSample, Target, Task};
use crate::autograd::Tensor;
use crate::error::{Error, Result};
use crate::rng::{stream, Rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticTask {
    #[default]
    Classification,
    /// Targets are evenly spaced class scores in `[-3, 3]`.
    Regression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    pub timesteps: usize,
    pub d_language: usize,
    pub d_audio: usize,
    pub d_visual: usize,
    pub num_classes: usize,
    pub snr_language: f64,
    pub snr_audio: f64,
    pub snr_visual: f64,
    pub task: SyntheticTask,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self::ncl_preset()
    }
}

impl SyntheticConfig {
    /// Dominant audio, weak language, silent visual: the negative co-learning trap.
    pub fn ncl_preset() -> Self {
        Self {
            n_samples: 3000,
            timesteps: 12,
            d_language: 16,
            d_audio: 16,
            d_visual: 16,
            num_classes: 4,
            snr_language: 1.0,
            snr_audio: 6.0,
            snr_visual: 0.0,
            task: SyntheticTask::Classification,
            seed: 0,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            timesteps: self.timesteps,
            language: self.d_language,
            audio: self.d_audio,
            visual: self.d_visual,
        }
    }

    pub fn snr(&self, m: Modality) -> f64 {
        match m {
            Modality::Language => self.snr_language,
            Modality::Audio => self.snr_audio,
            Modality::Visual => self.snr_visual,
        }
    }

    pub fn task(&self) -> Task {
        match self.task {
            SyntheticTask::Classification => Task::Classification {
                classes: self.num_classes,
            },
            SyntheticTask::Regression => Task::Regression,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.timesteps, self.d_language, self.d_audio, self.d_visual];
        if dims.contains(&0) {
            return Err(Error::Config(
                "timesteps and feature dims must be positive".into(),
            ));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if self.n_samples < 3 {
            return Err(Error::Config("need at least three samples to split".into()));
        }
        for m in Modality::ALL {
            let snr = self.snr(m);
            if !(snr.is_finite() && snr >= 0.0) {
                return Err(Error::Config(format!(
                    "snr_{m} must be finite and nonnegative, got {snr}"
                )));
            }
        }
        Ok(())
    }
}

fn unit_vector(rng: &mut Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Value attached to class `k` for regression datasets.
pub fn class_score(k: usize, classes: usize) -> f64 {
    -3.0 + 6.0 * k as f64 / (classes - 1) as f64
}

/// Generates a seeded dataset split 70/15/15 into train/validation/test.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<DatasetSplit> {
    config.validate()?;
    let mut rng = stream(config.seed, Stream::Data);
    let dims = config.dims();
    let k = config.num_classes;

    let templates: Vec<[Vec<f64>; 3]> = (0..k)
        .map(|_| Modality::ALL.map(|m| unit_vector(&mut rng, dims.of(m))))
        .collect();

    let t = config.timesteps;
    let window = t.div_ceil(2);
    let mut samples = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        let class = rng.random_range(0..k);
        let len = rng.random_range(window..=t);
        let [language, audio, visual] = Modality::ALL.map(|m| {
            let d = dims.of(m);
            let snr = config.snr(m);
            let mut data: Vec<f64> = (0..len * d)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let template = &templates[class][m.index()];
            for frame in data.chunks_exact_mut(d).skip(len - window) {
                for (x, dir) in frame.iter_mut().zip(template) {
                    *x += snr * dir;
                }
            }
            Tensor::new(vec![len, d], data).expect("frame block shape")
        });
        let target = match config.task {
            SyntheticTask::Classification => Target::Class(class),
            SyntheticTask::Regression => Target::Value(class_score(class, k)),
        };
        let raw = RawSample {
            language,
            audio,
            visual,
            target,
        };
        samples.push(raw.align(t)?);
    }

    let n_train = config.n_samples * 70 / 100;
    let n_val = config.n_samples * 15 / 100;
    let mut rest: Vec<MultimodalSample> = samples.split_off(n_train);
    let test = rest.split_off(n_val);
    Ok(DatasetSplit {
        task: config.task(),
        dims,
        train: samples,
        validation: rest,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            n_samples: 200,
            timesteps: 6,
            d_language: 4,
            d_audio: 3,
            d_visual: 2,
            seed,
            ..SyntheticConfig::ncl_preset()
        }
    }

    #[test]
    fn splits_are_70_15_15_and_aligned() {
        let split = generate_synthetic(&SyntheticConfig::ncl_preset()).unwrap();
        assert_eq!(
            (split.train.len(), split.validation.len(), split.test.len()),
            (2100, 450, 450)
        );
        split.validate().unwrap();
        for s in &split.train {
            assert!(s.original_length >= 6 && s.original_length <= 12);
            let pad = 12 - s.original_length;
            assert!(s.language.data()[..pad * 16].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn same_seed_is_bit_identical_and_seeds_differ() {
        let a = generate_synthetic(&small(3)).unwrap();
        let b = generate_synthetic(&small(3)).unwrap();
        let c = generate_synthetic(&small(4)).unwrap();
        let bits = |s: &DatasetSplit| -> Vec<u64> {
            s.train
                .iter()
                .flat_map(|x| x.audio.data().iter().map(|v| v.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a, b);
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn class_counts_within_three_sigma() {
        let cfg = SyntheticConfig::ncl_preset();
        let split = generate_synthetic(&cfg).unwrap();
        let mut counts = [0usize; 4];
        for s in split
            .train
            .iter()
            .chain(&split.validation)
            .chain(&split.test)
        {
            if let Target::Class(c) = s.target {
                counts[c] += 1;
            }
        }
        let n = cfg.n_samples as f64;
        let p = 0.25;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn zero_snr_modality_carries_no_template() {
        let cfg = SyntheticConfig {
            snr_language: 0.0,
            snr_audio: 0.0,
            snr_visual: 0.0,
            ..small(1)
        };
        let zero = generate_synthetic(&cfg).unwrap();
        let loud = generate_synthetic(&SyntheticConfig {
            snr_audio: 5.0,
            ..cfg
        })
        .unwrap();
        // Same noise stream, so the only difference is the injected signal.
        assert_eq!(zero.train[0].language, loud.train[0].language);
        assert_ne!(zero.train[0].audio, loud.train[0].audio);
    }

    #[test]
    fn regression_targets_are_class_scores() {
        let cfg = SyntheticConfig {
            task: SyntheticTask::Regression,
            ..small(2)
        };
        let split = generate_synthetic(&cfg).unwrap();
        assert_eq!(split.task, Task::Regression);
        for s in &split.train {
            let Target::Value(v) = s.target else {
                panic!("class target in regression set")
            };
            assert!([-3.0, -1.0, 1.0, 3.0].contains(&v));
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for bad in [
            SyntheticConfig {
                timesteps: 0,
                ..small(0)
            },
            SyntheticConfig {
                num_classes: 1,
                ..small(0)
            },
            SyntheticConfig {
                snr_audio: -1.0,
                ..small(0)
            },
            SyntheticConfig {
                n_samples: 2,
                ..small(0)
            },
        ] {
            assert!(matches!(generate_synthetic(&bad), Err(Error::Config(_))));
        }
    }
}
