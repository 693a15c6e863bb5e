//! Accuracy, per-mode breakdowns and report files.

mod metrics;
mod report;

pub use metrics::{accuracy, per_mode_accuracy, score_windows, verdict, Confusion, ModeTally, DECISION};
pub use report::{EvalReport, MethodRow, CSV_HEADER, RECKLESS_NOTE};

use crate::data::PoseWindow;
use crate::detector::Detector;
use crate::error::Result;

/// Scores `det` on `windows` and tabulates one report row.
pub fn evaluate_detector(det: &dyn Detector, windows: &[PoseWindow]) -> Result<(MethodRow, Vec<f64>)> {
    let preds = score_windows(det, windows)?;
    let labels: Vec<u8> = windows.iter().map(|w| w.z).collect();
    let modes: Vec<_> = windows.iter().map(|w| w.mode).collect();
    let c = Confusion::from_predictions(&preds, &labels)?;
    let t = ModeTally::from_predictions(&preds, &modes)?;
    Ok((MethodRow::new(&det.name(), det.param_count(), c, &t), preds))
}
