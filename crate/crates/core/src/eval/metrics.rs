use crate::data::PoseWindow;
use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::sim::FailureMode;

/// Soft predictions above this count as Unsafe.
pub const DECISION: f64 = 0.5;

pub fn verdict(z_hat: f64) -> u8 {
    u8::from(z_hat > DECISION)
}

fn check(preds: &[f64], n: usize) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::InvalidArgument("no predictions to score".into()));
    }
    if preds.len() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            actual: vec![preds.len()],
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(preds: &[f64], labels: &[u8]) -> Result<Self> {
        check(preds, labels.len())?;
        let mut c = Confusion::default();
        for (&p, &z) in preds.iter().zip(labels) {
            match (verdict(p), z) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (1, 0) => c.fp += 1,
                (0, 1) => c.fn_ += 1,
                _ => return Err(Error::InvalidArgument(format!("label {z} is not 0 or 1"))),
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

/// `(TP + TN) / (P + N)` with `z_hat > 0.5` read as Unsafe.
pub fn accuracy(preds: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(Confusion::from_predictions(preds, labels)?.accuracy())
}

/// Correct and total window counts per mode, indexed like [`FailureMode::ALL`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModeTally {
    pub correct: [usize; 5],
    pub total: [usize; 5],
}

impl ModeTally {
    pub fn from_predictions(preds: &[f64], modes: &[FailureMode]) -> Result<Self> {
        check(preds, modes.len())?;
        let mut t = ModeTally::default();
        for (&p, &m) in preds.iter().zip(modes) {
            t.total[m.index()] += 1;
            if verdict(p) == m.label() {
                t.correct[m.index()] += 1;
            }
        }
        Ok(t)
    }

    /// Failure modes: share flagged Unsafe; Nominal: share left Safe. `None`
    /// when the mode has no windows.
    pub fn accuracy(&self, mode: FailureMode) -> Option<f64> {
        let i = mode.index();
        (self.total[i] > 0).then(|| self.correct[i] as f64 / self.total[i] as f64)
    }
}

pub fn per_mode_accuracy(preds: &[f64], modes: &[FailureMode]) -> Result<[Option<f64>; 5]> {
    let t = ModeTally::from_predictions(preds, modes)?;
    Ok(FailureMode::ALL.map(|m| t.accuracy(m)))
}

/// Scores of one detector on every window.
pub fn score_windows(det: &dyn Detector, windows: &[PoseWindow]) -> Result<Vec<f64>> {
    windows.iter().map(|w| det.score(w)).collect()
}
