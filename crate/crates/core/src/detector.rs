//! One interface over every trained or fitted detector.

use std::path::Path;

use crate::baselines::{kalman_detect, KalmanConfig, MlpDetector, ThresholdRule};
use crate::data::{featurize, PoseWindow};
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Network};
use crate::rnn::FailureNetModel;

/// Maps a pose window to `z_hat` in `[0, 1]`. Binary rules answer 0 or 1.
pub trait Detector: Send + Sync {
    fn name(&self) -> String;
    fn seq_len(&self) -> usize;
    fn param_count(&self) -> usize;
    fn score(&self, window: &PoseWindow) -> Result<f64>;
    fn to_checkpoint(&self) -> Checkpoint;
}

fn check_len(window: &PoseWindow, want: usize) -> Result<()> {
    if window.len() != want {
        return Err(Error::ShapeMismatch {
            expected: vec![want],
            actual: vec![window.len()],
        });
    }
    Ok(())
}

impl Detector for FailureNetModel {
    fn name(&self) -> String {
        self.kind().display_name().to_string()
    }

    fn seq_len(&self) -> usize {
        self.spec.seq_len
    }

    fn param_count(&self) -> usize {
        self.params.len()
    }

    fn score(&self, window: &PoseWindow) -> Result<f64> {
        check_len(window, self.spec.seq_len)?;
        self.predict(&featurize(window, self.spec.feature_mode).flat())
    }

    fn to_checkpoint(&self) -> Checkpoint {
        FailureNetModel::to_checkpoint(self)
    }
}

impl Detector for MlpDetector {
    fn name(&self) -> String {
        MlpDetector::name(self).to_string()
    }

    fn seq_len(&self) -> usize {
        self.seq_len
    }

    fn param_count(&self) -> usize {
        self.net.param_count()
    }

    fn score(&self, window: &PoseWindow) -> Result<f64> {
        self.z_hat(window)
    }

    fn to_checkpoint(&self) -> Checkpoint {
        MlpDetector::to_checkpoint(self)
    }
}

impl Detector for ThresholdRule {
    fn name(&self) -> String {
        match self.feature {
            crate::baselines::RuleFeature::Speed => "Speed Threshold".into(),
            crate::baselines::RuleFeature::FftPower => "FFT Threshold".into(),
        }
    }

    fn seq_len(&self) -> usize {
        self.seq_len
    }

    fn param_count(&self) -> usize {
        0
    }

    fn score(&self, window: &PoseWindow) -> Result<f64> {
        check_len(window, self.seq_len)?;
        Ok(f64::from(self.detect(window)))
    }

    fn to_checkpoint(&self) -> Checkpoint {
        ThresholdRule::to_checkpoint(self)
    }
}

/// A fitted Kalman residual detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanDetector {
    pub cfg: KalmanConfig,
    pub seq_len: usize,
}

impl Detector for KalmanDetector {
    fn name(&self) -> String {
        "Kalman".into()
    }

    fn seq_len(&self) -> usize {
        self.seq_len
    }

    fn param_count(&self) -> usize {
        0
    }

    fn score(&self, window: &PoseWindow) -> Result<f64> {
        check_len(window, self.seq_len)?;
        Ok(f64::from(kalman_detect(window, &self.cfg)?))
    }

    fn to_checkpoint(&self) -> Checkpoint {
        self.cfg.to_checkpoint(self.seq_len)
    }
}

/// Rebuilds whichever detector a checkpoint holds.
pub fn detector_from_checkpoint(ck: &Checkpoint) -> Result<Box<dyn Detector>> {
    Ok(match ck.get("model")? {
        "failurenet" => Box::new(FailureNetModel::from_checkpoint(ck)?),
        "mlp" => Box::new(MlpDetector::from_checkpoint(ck)?),
        "threshold" => Box::new(ThresholdRule::from_checkpoint(ck)?),
        "kalman" => {
            let (cfg, seq_len) = KalmanConfig::from_checkpoint(ck)?;
            Box::new(KalmanDetector { cfg, seq_len })
        }
        other => return Err(Error::Incompatible(format!("unknown model '{other}'"))),
    })
}

pub fn load_detector(path: &Path) -> Result<Box<dyn Detector>> {
    detector_from_checkpoint(&Checkpoint::load(path)?)
}
