use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How per-step values of a window are reduced to one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    Avg,
    Max,
}

impl StatKind {
    pub const ALL: [StatKind; 2] = [StatKind::Avg, StatKind::Max];

    pub fn reduce(self, values: &[f64]) -> f64 {
        match self {
            StatKind::Avg => values.iter().sum::<f64>() / values.len().max(1) as f64,
            StatKind::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StatKind::Avg => "avg",
            StatKind::Max => "max",
        }
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" => Ok(StatKind::Avg),
            "max" => Ok(StatKind::Max),
            _ => Err(Error::InvalidArgument(format!("unknown statistic '{s}'"))),
        }
    }
}

/// Outcome of a threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdFit {
    pub kind: StatKind,
    pub threshold: f64,
    /// Correctly classified windows at this threshold.
    pub correct: usize,
    pub total: usize,
}

impl ThresholdFit {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total.max(1) as f64
    }
}

/// Candidate thresholds for one score vector: one below the minimum, the
/// midpoints between consecutive distinct scores, and one above the maximum.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = scores.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let (Some(&lo), Some(&hi)) = (v.first(), v.last()) else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(v.len() + 1);
    out.push(lo - 1.0 - lo.abs());
    out.extend(v.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    out.push(hi + 1.0 + hi.abs());
    out
}

/// Exhaustive search over statistic kinds and candidate thresholds for the
/// rule `score >= threshold => unsafe` that classifies the most windows
/// correctly. Earlier kinds win ties, then lower thresholds.
pub fn fit_threshold(scores: &[(StatKind, Vec<f64>)], labels: &[u8]) -> Result<ThresholdFit> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::InvalidArgument("threshold fit needs labelled windows".into()));
    }
    let pos = labels.iter().filter(|&&z| z == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::InvalidArgument("threshold fit needs both classes".into()));
    }
    let mut best: Option<ThresholdFit> = None;
    for (kind, s) in scores {
        if s.len() != n {
            return Err(Error::ShapeMismatch {
                expected: vec![n],
                actual: vec![s.len()],
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("threshold scores"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
        // sweep: everything at or above the candidate is flagged
        let mut neg_below = 0usize;
        let mut pos_below = 0usize;
        let mut i = 0;
        for th in candidate_thresholds(s) {
            while i < n && s[order[i]] < th {
                if labels[order[i]] == 1 {
                    pos_below += 1;
                } else {
                    neg_below += 1;
                }
                i += 1;
            }
            let correct = neg_below + (pos - pos_below);
            if best.is_none_or(|b| correct > b.correct) {
                best = Some(ThresholdFit {
                    kind: *kind,
                    threshold: th,
                    correct,
                    total: n,
                });
            }
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no statistics to fit".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_scores_are_perfect() {
        let s = vec![0.1, 0.2, 0.3, 0.8, 0.9];
        let fit = fit_threshold(&[(StatKind::Avg, s)], &[0, 0, 0, 1, 1]).unwrap();
        assert_eq!(fit.correct, 5);
        assert!((fit.threshold - 0.55).abs() < 1e-12);
    }

    #[test]
    fn constant_scores_give_majority_prior() {
        let fit = fit_threshold(&[(StatKind::Max, vec![2.0; 5])], &[0, 1, 1, 1, 0]).unwrap();
        assert_eq!(fit.correct, 3);
        assert!(fit.threshold < 2.0);
    }

    #[test]
    fn ties_prefer_lower_threshold_and_first_kind() {
        // both midpoints reach 3 of 4
        let fit = fit_threshold(
            &[(StatKind::Avg, vec![1.0, 2.0, 3.0, 4.0]), (StatKind::Max, vec![1.0, 2.0, 3.0, 4.0])],
            &[1, 0, 1, 1],
        )
        .unwrap();
        assert_eq!(fit.kind, StatKind::Avg);
        assert_eq!(fit.correct, 3);
        assert!(fit.threshold < 1.0);
    }

    #[test]
    fn one_class_rejected() {
        assert!(fit_threshold(&[(StatKind::Avg, vec![1.0])], &[1]).is_err());
    }
}
