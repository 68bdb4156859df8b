//! Whole-modality dropout.
//!
//! During training each modality of each sample is zeroed independently with
//! its own probability; a fresh mask is drawn for every batch. At evaluation
//! time [`mask_for_unimodal_eval`] zeroes every modality except one, which is
//! how a multimodal model is fed language-only data.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Modality, MultimodalBatch};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    /// One draw per sample and modality, covering all timesteps.
    #[default]
    PerSequence,
    /// One draw per sample, timestep and modality.
    PerTimestep,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropoutPolicy {
    pub p_language: f64,
    pub p_audio: f64,
    pub p_visual: f64,
    pub granularity: Granularity,
    /// Redraw a sample's mask whenever all three modalities come up masked.
    pub guard_all_dropped: bool,
}

impl Default for DropoutPolicy {
    fn default() -> Self {
        Self::none()
    }
}

impl DropoutPolicy {
    pub fn none() -> Self {
        Self {
            p_language: 0.0,
            p_audio: 0.0,
            p_visual: 0.0,
            granularity: Granularity::PerSequence,
            guard_all_dropped: false,
        }
    }

    /// Same rate on audio and visual, language always kept.
    pub fn supporting(level: f64) -> Self {
        Self {
            p_audio: level,
            p_visual: level,
            ..Self::none()
        }
    }

    pub fn p(&self, m: Modality) -> f64 {
        match m {
            Modality::Language => self.p_language,
            Modality::Audio => self.p_audio,
            Modality::Visual => self.p_visual,
        }
    }

    pub fn rates(&self) -> [f64; 3] {
        Modality::ALL.map(|m| self.p(m))
    }

    pub fn is_identity(&self) -> bool {
        self.rates().iter().all(|&p| p == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for m in Modality::ALL {
            let p = self.p(m);
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "dropout probability for {m} must be in [0,1], got {p}"
                )));
            }
        }
        if self.guard_all_dropped && self.rates().iter().all(|&p| p == 1.0) {
            return Err(Error::Config(
                "guard_all_dropped cannot be satisfied when every probability is 1".into(),
            ));
        }
        Ok(())
    }
}

/// Which modality blocks are zeroed; `true` means masked.
///
/// Holds one `[bool; 3]` per sample, or per (sample, timestep) for
/// [`Granularity::PerTimestep`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModalityMask {
    batch: usize,
    steps: usize,
    granularity: Granularity,
    masked: Vec<[bool; 3]>,
}

impl ModalityMask {
    /// The same per-sample entry for every sample.
    pub fn uniform(batch: usize, entry: [bool; 3]) -> Self {
        Self {
            batch,
            steps: 1,
            granularity: Granularity::PerSequence,
            masked: vec![entry; batch],
        }
    }

    /// Masks everything except `kept`.
    pub fn keep_only(batch: usize, kept: Modality) -> Self {
        Self::uniform(batch, Modality::ALL.map(|m| m != kept))
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn entries(&self) -> &[[bool; 3]] {
        &self.masked
    }

    pub fn is_masked(&self, sample: usize, step: usize, m: Modality) -> bool {
        let step = if self.steps == 1 { 0 } else { step };
        self.masked[sample * self.steps + step][m.index()]
    }

    /// Share of mask entries that zero `m`.
    pub fn masked_fraction(&self, m: Modality) -> f64 {
        if self.masked.is_empty() {
            return 0.0;
        }
        let hits = self.masked.iter().filter(|e| e[m.index()]).count();
        hits as f64 / self.masked.len() as f64
    }
}

fn draw_entry(policy: &DropoutPolicy, rng: &mut Rng) -> [bool; 3] {
    let rates = policy.rates();
    loop {
        let entry = rates.map(|p| rng.random_bool(p));
        if !(policy.guard_all_dropped && entry.iter().all(|&x| x)) {
            return entry;
        }
    }
}

/// Draws a mask for `batch` samples of `timesteps` frames.
pub fn draw_mask(
    batch: usize,
    timesteps: usize,
    policy: &DropoutPolicy,
    rng: &mut Rng,
) -> Result<ModalityMask> {
    policy.validate()?;
    let steps = match policy.granularity {
        Granularity::PerSequence => 1,
        Granularity::PerTimestep => timesteps.max(1),
    };
    let masked = (0..batch * steps)
        .map(|_| draw_entry(policy, rng))
        .collect();
    Ok(ModalityMask {
        batch,
        steps,
        granularity: policy.granularity,
        masked,
    })
}

/// Zeroes the masked modality blocks; everything else is copied bit for bit.
pub fn apply_mask(batch: &MultimodalBatch, mask: &ModalityMask) -> Result<MultimodalBatch> {
    let per_timestep = mask.steps != 1 || mask.granularity == Granularity::PerTimestep;
    if mask.batch != batch.size() || (per_timestep && mask.steps != batch.dims.timesteps) {
        return Err(Error::Shape {
            op: "apply_mask",
            lhs: vec![batch.size(), batch.dims.timesteps],
            rhs: vec![mask.batch, mask.steps],
        });
    }
    let mut out = batch.clone();
    for b in 0..batch.size() {
        for m in Modality::ALL {
            if per_timestep {
                for t in 0..mask.steps {
                    if mask.is_masked(b, t, m) {
                        out.zero_frame(m, b, t);
                    }
                }
            } else if mask.is_masked(b, 0, m) {
                out.zero_sample(m, b);
            }
        }
    }
    Ok(out)
}

/// Zeroes every modality except `kept`.
pub fn mask_for_unimodal_eval(batch: &MultimodalBatch, kept: Modality) -> MultimodalBatch {
    apply_mask(batch, &ModalityMask::keep_only(batch.size(), kept)).expect("mask sized for batch")
}
