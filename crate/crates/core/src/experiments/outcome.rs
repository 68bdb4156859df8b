use std::fmt;

use serde::{Deserialize, Serialize};

use super::metrics::MetricSet;

/// Tie band for accuracy, in percentage points.
pub const DEFAULT_TAU_ACCURACY: f64 = 1.0;
/// Tie band for MAE.
pub const DEFAULT_TAU_MAE: f64 = 0.005;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoLearning {
    #[serde(rename = "PCL")]
    Positive,
    #[serde(rename = "NCL")]
    Negative,
    #[serde(rename = "NeCL")]
    Neutral,
}

impl fmt::Display for CoLearning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoLearning::Positive => "PCL",
            CoLearning::Negative => "NCL",
            CoLearning::Neutral => "NeCL",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoLearningOutcome {
    pub label: CoLearning,
    /// Positive when the multimodal arm is better: accuracy points for
    /// classification, unimodal minus multimodal MAE for regression.
    pub margin: f64,
    pub tau: f64,
}

pub fn default_tau(regression: bool) -> f64 {
    if regression {
        DEFAULT_TAU_MAE
    } else {
        DEFAULT_TAU_ACCURACY
    }
}

/// Labels a margin against the tie band `tau`.
pub fn outcome_from_primary(multi: f64, uni: f64, regression: bool, tau: f64) -> CoLearningOutcome {
    let margin = if regression {
        uni - multi
    } else {
        100.0 * (multi - uni)
    };
    let label = if margin > tau {
        CoLearning::Positive
    } else if margin < -tau {
        CoLearning::Negative
    } else {
        CoLearning::Neutral
    };
    CoLearningOutcome { label, margin, tau }
}

/// Compares the primary metric of the two arms; `tau` defaults per task.
pub fn classify_outcome(multi: &MetricSet, uni: &MetricSet, tau: Option<f64>) -> CoLearningOutcome {
    let regression = multi.is_regression();
    outcome_from_primary(
        multi.primary(),
        uni.primary(),
        regression,
        tau.unwrap_or(default_tau(regression)),
    )
}
