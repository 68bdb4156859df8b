use serde::{Deserialize, Serialize};

use crate::data::{Target, Task};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    /// Fraction in `[0, 1]`.
    pub accuracy: f64,
    /// Macro-averaged F1.
    pub f1: f64,
    /// Mean absolute error, regression only.
    pub mae: Option<f64>,
    /// `confusion[target][predicted]`; for regression, negative/positive sign classes.
    pub confusion: Vec<Vec<usize>>,
}

impl MetricSet {
    pub fn is_regression(&self) -> bool {
        self.mae.is_some()
    }

    /// Accuracy for classification, MAE for regression.
    pub fn primary(&self) -> f64 {
        self.mae.unwrap_or(self.accuracy)
    }

    pub fn collapse_index(&self) -> f64 {
        prediction_collapse_index(&self.confusion)
    }
}

/// Sign class used to score regression outputs: 1 for `v ≥ 0`, else 0.
pub fn sign_class(v: f64) -> usize {
    usize::from(v >= 0.0)
}

fn class_pairs(
    predictions: &[Target],
    targets: &[Target],
    task: Task,
) -> Result<(usize, Vec<(usize, usize)>)> {
    let classes = match task {
        Task::Classification { classes } => classes,
        Task::Regression => 2,
    };
    let pairs = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| match (task, p, t) {
            (Task::Classification { .. }, Target::Class(p), Target::Class(t)) => {
                for &c in [p, t] {
                    if c >= classes {
                        return Err(Error::InvalidClass { index: c, classes });
                    }
                }
                Ok((*t, *p))
            }
            (Task::Regression, Target::Value(p), Target::Value(t)) => {
                Ok((sign_class(*t), sign_class(*p)))
            }
            _ => Err(Error::TaskMismatch(
                "prediction and target kinds differ from the task".into(),
            )),
        })
        .collect::<Result<_>>()?;
    Ok((classes, pairs))
}

/// Macro F1: per-class `2TP / (2TP + FP + FN)`, zero when that is `0/0`, averaged over classes.
pub fn macro_f1(confusion: &[Vec<usize>]) -> f64 {
    let k = confusion.len();
    let mut total = 0.0;
    for c in 0..k {
        let tp = confusion[c][c];
        let fn_: usize = confusion[c].iter().sum::<usize>() - tp;
        let fp: usize = (0..k).map(|r| confusion[r][c]).sum::<usize>() - tp;
        let denom = 2 * tp + fp + fn_;
        if denom > 0 {
            total += 2.0 * tp as f64 / denom as f64;
        }
    }
    total / k as f64
}

pub fn compute_metrics(
    predictions: &[Target],
    targets: &[Target],
    task: Task,
) -> Result<MetricSet> {
    if predictions.len() != targets.len() {
        return Err(Error::Shape {
            op: "compute_metrics",
            lhs: vec![predictions.len()],
            rhs: vec![targets.len()],
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let (classes, pairs) = class_pairs(predictions, targets, task)?;
    let mut confusion = vec![vec![0usize; classes]; classes];
    for &(t, p) in &pairs {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let mae = match task {
        Task::Regression => {
            let sum: f64 = predictions
                .iter()
                .zip(targets)
                .map(|(p, t)| (p.as_f64() - t.as_f64()).abs())
                .sum();
            Some(sum / predictions.len() as f64)
        }
        Task::Classification { .. } => None,
    };
    Ok(MetricSet {
        accuracy: correct as f64 / pairs.len() as f64,
        f1: macro_f1(&confusion),
        mae,
        confusion,
    })
}

/// Share of predictions that fall in the most-predicted class.
pub fn prediction_collapse_index(confusion: &[Vec<usize>]) -> f64 {
    let k = confusion.len();
    let total: usize = confusion.iter().flatten().sum();
    if total == 0 {
        return 0.0;
    }
    let top = (0..k)
        .map(|c| confusion.iter().map(|row| row[c]).sum::<usize>())
        .max()
        .unwrap_or(0);
    top as f64 / total as f64
}
