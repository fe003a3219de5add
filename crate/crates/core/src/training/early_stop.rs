/// Tracks validation accuracy (higher is better) and keeps a snapshot of the
/// best parameters seen so far.
#[derive(Debug, Clone)]
pub struct EarlyStopController<S> {
    pub patience: usize,
    pub min_delta: f64,
    best_metric: Option<f64>,
    best_epoch: usize,
    best_snapshot: Option<S>,
    epochs_since_improvement: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EarlyStopDecision<S> {
    Continue,
    Stop {
        best: S,
        best_metric: f64,
        best_epoch: usize,
    },
}

impl<S: Clone> EarlyStopController<S> {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopController {
            patience,
            min_delta,
            best_metric: None,
            best_epoch: 0,
            best_snapshot: None,
            epochs_since_improvement: 0,
        }
    }

    /// Records one epoch. An improvement of more than `min_delta` resets the
    /// counter and takes a snapshot; `patience` epochs in a row without one
    /// stop training and hand back the best snapshot.
    pub fn update(&mut self, epoch: usize, metric: f64, snapshot: impl FnOnce() -> S) -> EarlyStopDecision<S> {
        let improved = match self.best_metric {
            None => true,
            Some(best) => metric > best + self.min_delta,
        };
        if improved {
            self.best_metric = Some(metric);
            self.best_epoch = epoch;
            self.best_snapshot = Some(snapshot());
            self.epochs_since_improvement = 0;
            return EarlyStopDecision::Continue;
        }
        self.epochs_since_improvement += 1;
        if self.epochs_since_improvement >= self.patience {
            let best = self.best_snapshot.clone().expect("first epoch always snapshots");
            EarlyStopDecision::Stop {
                best,
                best_metric: self.best_metric.expect("set with snapshot"),
                best_epoch: self.best_epoch,
            }
        } else {
            EarlyStopDecision::Continue
        }
    }

    pub fn best(&self) -> Option<(&S, f64, usize)> {
        self.best_snapshot
            .as_ref()
            .map(|s| (s, self.best_metric.expect("set with snapshot"), self.best_epoch))
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.epochs_since_improvement
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improving_sequence_never_stops() {
        let mut c = EarlyStopController::new(2, 0.0);
        for e in 1..=50 {
            assert_eq!(c.update(e, e as f64 * 0.01, || e), EarlyStopDecision::Continue);
        }
        assert_eq!(c.best().unwrap().2, 50);
    }

    #[test]
    fn flat_sequence_stops_after_patience() {
        let mut c = EarlyStopController::new(5, 1e-4);
        assert_eq!(c.update(1, 0.5, || 1), EarlyStopDecision::Continue);
        for e in 2..=5 {
            assert_eq!(c.update(e, 0.5, || e), EarlyStopDecision::Continue);
            assert!(c.epochs_since_improvement() <= c.patience);
        }
        match c.update(6, 0.5, || 6) {
            EarlyStopDecision::Stop { best, best_epoch, .. } => {
                assert_eq!((best, best_epoch), (1, 1));
            }
            other => panic!("expected stop, got {other:?}"),
        }
    }

    #[test]
    fn gains_below_min_delta_do_not_count() {
        let mut c = EarlyStopController::new(2, 0.01);
        c.update(1, 0.90, || 1);
        c.update(2, 0.905, || 2);
        assert!(matches!(c.update(3, 0.909, || 3), EarlyStopDecision::Stop { best: 1, .. }));
    }
}
