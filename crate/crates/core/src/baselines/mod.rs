//! Non-recurrent detectors: speed and spectral thresholds, Kalman residuals
//! and feed-forward networks behind pre-filters.

mod fft;
mod kalman;
mod mlp;
mod rule;
mod speed;
mod threshold;

pub use fft::{fft_yaw_power, spectral_power};
pub use kalman::{fit_kalman, kalman_detect, kalman_residuals, kalman_score, Cov, KalmanConfig, KalmanFilter, KalmanGrid, State};
pub use mlp::{MlpDetector, PreFilter, MLP_HIDDEN};
pub use rule::{RuleFeature, ThresholdRule};
pub use speed::window_speeds;
pub use threshold::{candidate_thresholds, fit_threshold, StatKind, ThresholdFit};
