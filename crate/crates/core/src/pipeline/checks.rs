use crate::eval::{EvalReport, MethodRow};
use crate::sim::FailureMode;

/// One pass/fail assertion about an evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

const RNNS: [&str; 3] = ["LSTM", "GRU", "CfC"];
const LEARNED: [&str; 6] = ["Speed+MLP", "FFT+MLP", "MLP", "LSTM", "GRU", "CfC"];

/// Reference parameter counts of the learned models.
pub const PARAM_TARGETS: [(&str, usize); 4] = [("LSTM", 26_049), ("GRU", 21_633), ("CfC", 1_936), ("MLP", 8_129)];

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn mode(r: &MethodRow, m: FailureMode) -> f64 {
    r.mode(m).unwrap_or(f64::NAN)
}

/// Accuracy floors, baseline signatures, orderings and parameter budgets.
/// Checks whose methods are missing from the report are left out.
pub fn check_report(report: &EvalReport) -> Vec<Check> {
    let mut out = Vec::new();
    let row = |n: &str| report.row(n);

    let rnns: Vec<&MethodRow> = RNNS.iter().filter_map(|n| row(n)).collect();
    if !rnns.is_empty() {
        let detail: Vec<String> = rnns.iter().map(|r| format!("{} {}", r.method, pct(r.all))).collect();
        out.push(Check::new(
            "recurrent overall >= 90%",
            rnns.iter().all(|r| r.all >= 0.90),
            detail.join(", "),
        ));
    }
    if let Some(m) = row("MLP") {
        out.push(Check::new("MLP overall >= 85%", m.all >= 0.85, format!("MLP {}", pct(m.all))));
    }
    if let Some(s) = row("Speed Threshold") {
        let sp = mode(s, FailureMode::Speeding);
        let ls = mode(s, FailureMode::LaneShift);
        out.push(Check::new(
            "speed threshold: Speeding >= 95%, LaneShift <= 25%",
            sp >= 0.95 && ls <= 0.25,
            format!("Speeding {}, LaneShift {}", pct(sp), pct(ls)),
        ));
    }
    if let Some(f) = row("FFT Threshold") {
        let learned: Vec<&MethodRow> = LEARNED.iter().filter_map(|n| row(n)).collect();
        if !learned.is_empty() {
            let lowest = learned.iter().map(|r| r.all).fold(f64::INFINITY, f64::min);
            out.push(Check::new(
                "FFT threshold below every learned model",
                f.all < lowest,
                format!("FFT {} vs lowest learned {}", pct(f.all), pct(lowest)),
            ));
        }
    }
    if let Some(k) = row("Kalman") {
        let nominal = mode(k, FailureMode::Nominal);
        let recall = k.mean_failure_recall().unwrap_or(f64::NAN);
        out.push(Check::new(
            "Kalman: Nominal < 60%, mean failure recall >= 75%",
            nominal < 0.60 && recall >= 0.75,
            format!("Nominal {}, mean failure recall {}", pct(nominal), pct(recall)),
        ));
    }
    if let (Some(mlp), Some(fm), Some(ft)) = (row("MLP"), row("FFT+MLP"), row("FFT Threshold")) {
        if let Some(best) = rnns.iter().max_by(|a, b| a.all.total_cmp(&b.all)) {
            out.push(Check::new(
                "best RNN >= MLP >= FFT+MLP >= FFT threshold",
                best.all >= mlp.all && mlp.all >= fm.all && fm.all >= ft.all,
                format!(
                    "{} {} / MLP {} / FFT+MLP {} / FFT {}",
                    best.method,
                    pct(best.all),
                    pct(mlp.all),
                    pct(fm.all),
                    pct(ft.all)
                ),
            ));
        }
    }
    let budgets: Vec<(&MethodRow, usize)> = PARAM_TARGETS.iter().filter_map(|(n, t)| row(n).map(|r| (r, *t))).collect();
    if !budgets.is_empty() {
        let within = budgets
            .iter()
            .all(|(r, t)| (r.params as f64 - *t as f64).abs() <= 0.15 * *t as f64);
        let learned: Vec<&MethodRow> = LEARNED.iter().filter_map(|n| row(n)).collect();
        let cfc_smallest = match row("CfC") {
            Some(c) => learned.iter().all(|r| r.method == "CfC" || r.params > c.params),
            None => true,
        };
        let detail: Vec<String> = budgets.iter().map(|(r, t)| format!("{} {} (ref {t})", r.method, r.params)).collect();
        out.push(Check::new(
            "parameter counts within 15%, CfC smallest",
            within && cfc_smallest,
            detail.join(", "),
        ));
    }
    out
}
