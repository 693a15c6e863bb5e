use std::fmt;
use std::str::FromStr;

use super::fft::fft_yaw_power;
use super::speed::window_speeds;
use super::threshold::{fit_threshold, StatKind, ThresholdFit};
use crate::data::PoseWindow;
use crate::error::{Error, Result};
use crate::nn::Checkpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleFeature {
    Speed,
    FftPower,
}

impl RuleFeature {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleFeature::Speed => "speed",
            RuleFeature::FftPower => "fft_power",
        }
    }

    /// Per-step values the statistic is taken over.
    pub fn values(self, window: &PoseWindow) -> Vec<f64> {
        match self {
            RuleFeature::Speed => window_speeds(window),
            RuleFeature::FftPower => fft_yaw_power(window),
        }
    }
}

impl fmt::Display for RuleFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speed" => Ok(RuleFeature::Speed),
            "fft_power" | "fft" => Ok(RuleFeature::FftPower),
            _ => Err(Error::InvalidArgument(format!("unknown rule feature '{s}'"))),
        }
    }
}

/// `statistic(feature(window)) >= threshold => unsafe`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRule {
    pub feature: RuleFeature,
    pub kind: StatKind,
    pub threshold: f64,
    /// Accuracy on the windows it was fitted to.
    pub accuracy: f64,
    pub seq_len: usize,
}

impl ThresholdRule {
    pub fn new(feature: RuleFeature, kind: StatKind, threshold: f64, seq_len: usize) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::NonFinite("rule threshold"));
        }
        Ok(Self {
            feature,
            kind,
            threshold,
            accuracy: f64::NAN,
            seq_len,
        })
    }

    pub fn statistic(&self, window: &PoseWindow) -> f64 {
        self.kind.reduce(&self.feature.values(window))
    }

    pub fn detect(&self, window: &PoseWindow) -> u8 {
        u8::from(self.statistic(window) >= self.threshold)
    }

    /// Fits kind and threshold on labelled windows; avg wins ties over max.
    pub fn fit(feature: RuleFeature, windows: &[PoseWindow], labels: &[u8]) -> Result<(Self, ThresholdFit)> {
        let seq_len = windows.first().map(PoseWindow::len).ok_or_else(|| Error::InvalidArgument("no windows to fit".into()))?;
        let values: Vec<Vec<f64>> = windows.iter().map(|w| feature.values(w)).collect();
        let scores: Vec<(StatKind, Vec<f64>)> = StatKind::ALL
            .iter()
            .map(|&k| (k, values.iter().map(|v| k.reduce(v)).collect()))
            .collect();
        let fit = fit_threshold(&scores, labels)?;
        let rule = Self {
            feature,
            kind: fit.kind,
            threshold: fit.threshold,
            accuracy: fit.accuracy(),
            seq_len,
        };
        Ok((rule, fit))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        ck.set("model", "threshold");
        ck.set("feature", self.feature);
        ck.set("statistic", self.kind);
        ck.set_floats("threshold", &[self.threshold]);
        ck.set_floats("accuracy", &[self.accuracy]);
        ck.set("seq_len", self.seq_len);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.get("model")? != "threshold" {
            return Err(Error::Incompatible(format!("checkpoint holds a '{}' model", ck.get("model")?)));
        }
        let mut rule = Self::new(
            ck.parse("feature")?,
            ck.parse("statistic")?,
            ck.float("threshold")?,
            ck.parse("seq_len")?,
        )?;
        rule.accuracy = ck.float("accuracy")?;
        Ok(rule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{FailureMode, Pose};

    fn straight(speed: f64) -> PoseWindow {
        let poses = (0..10).map(|i| Pose::new(i as f64 * 0.5, speed * i as f64 * 0.5, 0.0, 0.0)).collect();
        PoseWindow::new(poses, FailureMode::Nominal, "r").unwrap()
    }

    #[test]
    fn speed_rule_verdicts() {
        let rule = ThresholdRule::new(RuleFeature::Speed, StatKind::Avg, 0.4, 10).unwrap();
        assert_eq!(rule.detect(&straight(0.0)), 0);
        assert_eq!(rule.detect(&straight(0.3)), 0);
        assert_eq!(rule.detect(&straight(0.5)), 1);
    }

    #[test]
    fn raising_threshold_is_monotone() {
        let w = straight(0.33);
        let mut prev = 1;
        for k in 0..50 {
            let rule = ThresholdRule::new(RuleFeature::Speed, StatKind::Max, k as f64 * 0.02, 10).unwrap();
            let v = rule.detect(&w);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rule = ThresholdRule::new(RuleFeature::FftPower, StatKind::Max, 0.123456789123, 10).unwrap();
        rule.accuracy = 0.75;
        let mut buf = Vec::new();
        rule.to_checkpoint().write_to(&mut buf).unwrap();
        let back = ThresholdRule::from_checkpoint(&Checkpoint::read_from(&buf[..]).unwrap()).unwrap();
        assert_eq!(back, rule);
    }
}
