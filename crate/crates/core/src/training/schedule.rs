use serde::{Deserialize, Serialize};

/// Multiplies the learning rate by `factor` once validation loss has failed
/// to beat `best·(1 - threshold)` for more than `patience` consecutive epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub threshold: f64,
    best: f64,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, factor: f64, patience: usize, threshold: f64) -> Self {
        Self {
            lr,
            factor,
            patience,
            threshold,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Feeds one epoch's validation loss and returns the lr for the next epoch.
    pub fn step(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best * (1.0 - self.threshold) {
            self.best = val_loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
        }
        if self.bad_epochs > self.patience {
            self.lr *= self.factor;
            self.bad_epochs = 0;
        }
        self.lr
    }
}

/// Replays a validation-loss history through a fresh [`PlateauScheduler`].
pub fn reduce_lr_on_plateau(
    val_losses: &[f64],
    lr: f64,
    factor: f64,
    patience: usize,
    threshold: f64,
) -> f64 {
    let mut sched = PlateauScheduler::new(lr, factor, patience, threshold);
    for &v in val_losses {
        sched.step(v);
    }
    sched.lr
}

/// Returns `(stop, best_epoch)` with 1-based epochs.
///
/// The best epoch is the earliest strict minimum. Training stops once more
/// than `patience` epochs have passed since it.
pub fn early_stop_check(val_losses: &[f64], patience: usize) -> (bool, usize) {
    let mut best = 0;
    for (i, &v) in val_losses.iter().enumerate() {
        if v < val_losses[best] {
            best = i;
        }
    }
    let since = val_losses.len().saturating_sub(best + 1);
    (!val_losses.is_empty() && since > patience, best + 1)
}
