use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    /// Loss on the unimodal-masked validation split.
    pub val_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    /// Dropout probabilities applied to language, audio, visual.
    pub dropout: [f64; 3],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub early_stop_epoch: Option<usize>,
}

const HEADER: &str = "epoch,train_loss,val_loss,lr";

impl TrainHistory {
    pub fn val_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.val_loss).collect()
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.get(self.best_epoch.checked_sub(1)?)
    }

    /// One `epoch,train_loss,val_loss,lr` line per epoch after a header.
    pub fn to_records(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for e in &self.epochs {
            writeln!(
                out,
                "{},{:?},{:?},{:?}",
                e.epoch, e.train_loss, e.val_loss, e.lr
            )
            .expect("write to string");
        }
        out
    }

    /// Parses [`to_records`](Self::to_records) output. Dropout rates, the
    /// best epoch and the early-stop epoch are not part of the record file.
    pub fn from_records(text: &str) -> Result<Vec<EpochRecord>> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::Config("history file lacks its header".into()));
        }
        lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let bad = || Error::Config(format!("history line {}: `{line}`", i + 2));
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 4 {
                    return Err(bad());
                }
                let f = |s: &str| s.parse::<f64>().map_err(|_| bad());
                Ok(EpochRecord {
                    epoch: cols[0].parse().map_err(|_| bad())?,
                    train_loss: f(cols[1])?,
                    val_loss: f(cols[2])?,
                    lr: f(cols[3])?,
                    dropout: [0.0; 3],
                })
            })
            .collect()
    }
}
