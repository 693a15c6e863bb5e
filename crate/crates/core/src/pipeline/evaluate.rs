use std::fmt::Write as _;

use super::checks::{check_report, Check};
use super::{load_dataset, Layout};
use crate::config::{Config, ROSTER};
use crate::detector::{load_detector, Detector};
use crate::error::{Error, Result};
use crate::eval::{evaluate_detector, EvalReport, RECKLESS_NOTE};

#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub report: EvalReport,
    pub checks: Vec<Check>,
    /// Roster names of the evaluated detectors, in report order.
    pub names: Vec<String>,
}

impl EvaluateOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn checks_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }
}

/// Every saved detector under `models/`, in roster order, with its name.
pub fn load_detectors(layout: &Layout, seq_len: usize) -> Result<Vec<(String, Box<dyn Detector>)>> {
    let mut out = Vec::new();
    for name in ROSTER {
        let path = layout.checkpoint(name);
        if !path.exists() {
            continue;
        }
        let det = load_detector(&path)?;
        if det.seq_len() != seq_len {
            return Err(Error::Incompatible(format!(
                "{} expects L = {}, dataset has L = {seq_len}",
                path.display(),
                det.seq_len()
            )));
        }
        out.push((name.to_string(), det));
    }
    if out.is_empty() {
        return Err(Error::Data(format!("no checkpoints under {}; run train first", layout.models().display())));
    }
    Ok(out)
}

/// Scores every saved detector on the validation split, writes
/// `report/validation.{csv,txt}` and `report/checks.txt`.
pub fn evaluate(_cfg: &Config, layout: &Layout) -> Result<EvaluateOutcome> {
    let ds = load_dataset(layout)?;
    let dets = load_detectors(layout, ds.meta.seq_len)?;
    let mut report = EvalReport {
        meta: vec![
            ("split".into(), "validation".into()),
            ("windows".into(), ds.val.len().to_string()),
            ("seq_len".into(), ds.meta.seq_len.to_string()),
            ("feature_mode".into(), ds.meta.feature_mode.to_string()),
            ("seed".into(), ds.meta.seed.to_string()),
            ("columns".into(), RECKLESS_NOTE.into()),
        ],
        rows: Vec::new(),
    };
    let mut names = Vec::new();
    for (name, det) in &dets {
        let (row, _) = evaluate_detector(det.as_ref(), &ds.val)?;
        log::info!("{}: overall {:.4}", row.method, row.all);
        report.rows.push(row);
        names.push(name.clone());
    }
    let checks = check_report(&report);
    let outcome = EvaluateOutcome { report, checks, names };
    let dir = layout.report();
    outcome.report.emit(&dir, "validation")?;
    let path = dir.join("checks.txt");
    std::fs::write(&path, outcome.checks_text()).map_err(|e| Error::io(&path, e))?;
    Ok(outcome)
}
