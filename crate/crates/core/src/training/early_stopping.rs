use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auc: f64,
}

/// One unit of training that can be run epoch by epoch and snapshotted.
pub trait EpochRunner {
    type Snapshot;

    fn snapshot(&self) -> Self::Snapshot;

    fn run_epoch(&mut self, epoch: usize) -> Result<EpochRecord>;
}

#[derive(Clone, Debug)]
pub struct Stopped<S> {
    /// State after the epoch with the lowest validation loss, or the initial
    /// state if no epoch completed.
    pub best: S,
    /// 0 when no epoch improved on the initial state.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    /// A non-finite loss cut training short.
    pub diverged: bool,
}

/// Runs up to `max_epochs`, stopping once `patience` consecutive epochs fail
/// to strictly lower the validation loss.
pub fn fit_with_early_stopping<R: EpochRunner>(
    runner: &mut R,
    max_epochs: usize,
    patience: usize,
) -> Result<Stopped<R::Snapshot>> {
    if patience == 0 {
        return Err(Error::invalid("patience must be at least 1"));
    }
    let mut best = runner.snapshot();
    let mut best_epoch = 0;
    let mut best_loss = f64::INFINITY;
    let mut history = Vec::new();
    let mut diverged = false;
    for epoch in 1..=max_epochs {
        let record = match runner.run_epoch(epoch) {
            Ok(r) if r.train_loss.is_finite() && r.val_loss.is_finite() => r,
            Ok(r) => {
                log::warn!(
                    "epoch {epoch}: non-finite loss (train {}, validation {}); keeping epoch {best_epoch}",
                    r.train_loss,
                    r.val_loss
                );
                diverged = true;
                break;
            }
            Err(Error::NonFinite(msg)) => {
                log::warn!("epoch {epoch}: {msg}; keeping epoch {best_epoch}");
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        history.push(record);
        if record.val_loss < best_loss {
            best_loss = record.val_loss;
            best_epoch = epoch;
            best = runner.snapshot();
        } else if epoch - best_epoch >= patience {
            break;
        }
    }
    Ok(Stopped {
        best,
        best_epoch,
        history,
        diverged,
    })
}

pub fn write_history<W: std::io::Write>(history: &[EpochRecord], mut sink: W) -> Result<()> {
    for record in history {
        serde_json::to_writer(&mut sink, record)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Replays a fixed validation-loss sequence; the snapshot is the epoch
    /// counter, so the returned state identifies the epoch it came from.
    struct Scripted {
        losses: Vec<f64>,
        epoch: usize,
    }

    impl EpochRunner for Scripted {
        type Snapshot = usize;

        fn snapshot(&self) -> usize {
            self.epoch
        }

        fn run_epoch(&mut self, epoch: usize) -> Result<EpochRecord> {
            self.epoch = epoch;
            let val_loss = self.losses[epoch - 1];
            if val_loss.is_infinite() {
                return Err(Error::NonFinite("scripted".into()));
            }
            Ok(EpochRecord {
                epoch,
                train_loss: 1.0,
                val_loss,
                val_auc: 0.5,
            })
        }
    }

    fn run(losses: Vec<f64>) -> Stopped<usize> {
        let mut r = Scripted { losses, epoch: 0 };
        fit_with_early_stopping(&mut r, 300, 32).unwrap()
    }

    #[test]
    fn constant_loss_stops_at_33() {
        let s = run(vec![1.0; 300]);
        assert_eq!(s.history.len(), 33);
        assert_eq!((s.best_epoch, s.best), (1, 1));
    }

    #[test]
    fn strictly_improving_runs_all_epochs() {
        let s = run((0..300).map(|e| 10.0 - e as f64 * 0.01).collect());
        assert_eq!(s.history.len(), 300);
        assert_eq!(s.best, 300);
    }

    #[test]
    fn returns_best_snapshot_not_last() {
        let mut losses: Vec<f64> = (0..40).map(|e| 5.0 - e as f64 * 0.1).collect();
        losses.extend(std::iter::repeat(9.0).take(260));
        let s = run(losses);
        assert_eq!(s.best_epoch, 40);
        assert_eq!(s.best, 40);
        assert_eq!(s.history.len(), 72);
    }

    #[test]
    fn divergence_keeps_last_best() {
        let mut losses = vec![3.0, 2.0, 2.5];
        losses.push(f64::INFINITY);
        losses.extend(vec![1.0; 296]);
        let s = run(losses);
        assert!(s.diverged);
        assert_eq!((s.best_epoch, s.best, s.history.len()), (2, 2, 3));

        let nan = run(std::iter::once(f64::NAN).chain(vec![1.0; 299]).collect());
        assert!(nan.diverged);
        assert_eq!((nan.best_epoch, nan.best), (0, 0));
    }

    #[test]
    fn history_lines() {
        let s = run(vec![1.0; 300]);
        let mut buf = Vec::new();
        write_history(&s.history[..2], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"epoch":1,"train_loss":1.0,"val_loss":1.0,"val_auc":0.5}"#
        );
        assert_eq!(text.lines().count(), 2);
    }
}
