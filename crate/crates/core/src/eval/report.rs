use std::fmt::Write as _;
use std::path::Path;

use super::metrics::{Confusion, ModeTally};
use crate::error::{Error, Result};
use crate::numfmt::exact;
use crate::sim::FailureMode;

pub const CSV_HEADER: &str = "method,params,All,Periodic,LaneShift,Reckless,Speeding,Nominal,TP,TN,FP,FN";

/// Header note on the Reckless column.
pub const RECKLESS_NOTE: &str = "Reckless is the stochastic stand-in for the manual-driving column";

/// One table row.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: String,
    pub params: usize,
    pub all: f64,
    /// Per-mode accuracy indexed like [`FailureMode::ALL`].
    pub modes: [Option<f64>; 5],
    pub confusion: Confusion,
}

impl MethodRow {
    pub fn new(method: &str, params: usize, confusion: Confusion, tally: &ModeTally) -> Self {
        Self {
            method: method.to_string(),
            params,
            all: confusion.accuracy(),
            modes: FailureMode::ALL.map(|m| tally.accuracy(m)),
            confusion,
        }
    }

    pub fn mode(&self, m: FailureMode) -> Option<f64> {
        self.modes[m.index()]
    }

    /// Mean of the failure-mode columns that are present.
    pub fn mean_failure_recall(&self) -> Option<f64> {
        let v: Vec<f64> = FailureMode::ALL
            .iter()
            .filter(|m| **m != FailureMode::Nominal)
            .filter_map(|&m| self.mode(m))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    /// Ordered `key: value` header entries.
    pub meta: Vec<(String, String)>,
    pub rows: Vec<MethodRow>,
}

impl EvalReport {
    pub fn row(&self, method: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let _ = writeln!(s, "{CSV_HEADER}");
        for r in &self.rows {
            let _ = write!(s, "{},{},{}", r.method, r.params, exact(r.all));
            for m in FailureMode::REPORT_ORDER {
                let _ = write!(s, ",{}", r.mode(m).map_or("-".to_string(), exact));
            }
            let c = r.confusion;
            let _ = writeln!(s, ",{},{},{},{}", c.tp, c.tn, c.fp, c.fn_);
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut report = EvalReport::default();
        let mut seen_header = false;
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once(": ").ok_or_else(|| Error::parse(ln, "header line lacks ': '"))?;
                report.meta.push((k.to_string(), v.to_string()));
                continue;
            }
            if !seen_header {
                if line != CSV_HEADER {
                    return Err(Error::parse(ln, format!("expected column header, found '{line}'")));
                }
                seen_header = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 12 {
                return Err(Error::parse(ln, format!("expected 12 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad number '{s}'")));
            let count = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(ln, format!("bad count '{s}'")));
            let mut modes = [None; 5];
            for (j, m) in FailureMode::REPORT_ORDER.iter().enumerate() {
                let v = f[3 + j];
                modes[m.index()] = if v == "-" { None } else { Some(num(v)?) };
            }
            report.rows.push(MethodRow {
                method: f[0].to_string(),
                params: count(f[1])?,
                all: num(f[2])?,
                modes,
                confusion: Confusion {
                    tp: count(f[8])?,
                    tn: count(f[9])?,
                    fp: count(f[10])?,
                    fn_: count(f[11])?,
                },
            });
        }
        if !seen_header {
            return Err(Error::parse(0, "missing column header"));
        }
        Ok(report)
    }

    /// Aligned percentages, one method per row.
    pub fn to_table(&self) -> String {
        let cols = ["Method", "# Params", "All", "Periodic", "LaneShift", "Reckless", "Speeding", "Nominal"];
        let mut cells: Vec<Vec<String>> = vec![cols.iter().map(|c| c.to_string()).collect()];
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x));
        for r in &self.rows {
            let mut row = vec![r.method.clone(), r.params.to_string(), pct(Some(r.all))];
            row.extend(FailureMode::REPORT_ORDER.iter().map(|&m| pct(r.mode(m))));
            cells.push(row);
        }
        let widths: Vec<usize> = (0..cols.len()).map(|j| cells.iter().map(|r| r[j].len()).max().unwrap_or(0)).collect();
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        for (i, row) in cells.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(j, c)| if j == 0 { format!("{c:<w$}", w = widths[j]) } else { format!("{c:>w$}", w = widths[j]) })
                .collect();
            let _ = writeln!(s, "{}", line.join("  ").trim_end());
            if i == 0 {
                let _ = writeln!(s, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        s
    }

    /// Writes `<stem>.csv` and `<stem>.txt` into `dir`.
    pub fn emit(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let txt = dir.join(format!("{stem}.txt"));
        std::fs::write(&txt, self.to_table()).map_err(|e| Error::io(&txt, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EvalReport {
        let modes = [FailureMode::Nominal, FailureMode::Speeding, FailureMode::Speeding, FailureMode::LaneShift];
        let preds = [0.2, 0.9, 0.4, 0.6];
        let labels: Vec<u8> = modes.iter().map(|m| m.label()).collect();
        let c = Confusion::from_predictions(&preds, &labels).unwrap();
        let t = ModeTally::from_predictions(&preds, &modes).unwrap();
        EvalReport {
            meta: vec![("columns".into(), RECKLESS_NOTE.into()), ("windows".into(), "4".into())],
            rows: vec![MethodRow::new("Speed Threshold", 0, c, &t), MethodRow::new("LSTM", 25857, c, &t)],
        }
    }

    #[test]
    fn csv_round_trip() {
        let r = sample();
        assert_eq!(EvalReport::parse_csv(&r.to_csv()).unwrap(), r);
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = EvalReport::default();
        assert_eq!(r.to_csv(), format!("{CSV_HEADER}\n"));
        assert_eq!(r.to_table().lines().count(), 2);
        assert_eq!(EvalReport::parse_csv(&r.to_csv()).unwrap(), r);
    }

    #[test]
    fn overall_is_mode_weighted() {
        let r = &sample().rows[0];
        // 4 windows: nominal 1/1, speeding 1/2, lane shift 1/1
        assert_eq!(r.all, 0.75);
        assert_eq!(r.mode(FailureMode::Speeding), Some(0.5));
        assert_eq!(r.mode(FailureMode::Reckless), None);
    }

    #[test]
    fn table_columns_in_fixed_order() {
        let t = sample().to_table();
        let header = t.lines().find(|l| l.starts_with("Method")).unwrap();
        let order: Vec<&str> = header.split_whitespace().collect();
        assert_eq!(order, ["Method", "#", "Params", "All", "Periodic", "LaneShift", "Reckless", "Speeding", "Nominal"]);
    }
}
