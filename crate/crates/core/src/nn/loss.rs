//! Binary cross-entropy.

use super::activation::{sigmoid, softplus};
use crate::error::{Error, Result};

/// `-[z ln σ(d) + (1-z) ln(1-σ(d))]` computed from the logit `d`, with its
/// derivative `σ(d) - z`.
pub fn bce_with_logits(d: f64, z: f64) -> (f64, f64) {
    (softplus(d) - z * d, sigmoid(d) - z)
}

/// Probability-space BCE. Rejects `z_hat` of exactly 0 or 1, where the
/// loss is unbounded; use [`bce_with_logits`] there.
pub fn bce_loss(z_hat: f64, z: f64) -> Result<f64> {
    if !(z_hat > 0.0 && z_hat < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "z_hat {z_hat} must lie strictly inside (0, 1)"
        )));
    }
    if z != 0.0 && z != 1.0 {
        return Err(Error::InvalidArgument(format!("label {z} must be 0 or 1")));
    }
    Ok(if z == 1.0 { -z_hat.ln() } else { -(-z_hat).ln_1p() })
}

/// Batch-mean BCE over logits and the per-logit gradient of that mean.
pub fn bce_mean(logits: &[f64], labels: &[f64]) -> (f64, Vec<f64>) {
    let n = logits.len().max(1) as f64;
    let mut total = 0.0;
    let grad = logits
        .iter()
        .zip(labels)
        .map(|(&d, &z)| {
            let (l, g) = bce_with_logits(d, z);
            total += l;
            g / n
        })
        .collect();
    (total / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_is_ln2() {
        for z in [0.0, 1.0] {
            assert!((bce_loss(0.5, z).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
            assert!((bce_with_logits(0.0, z).0 - std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_correct_is_small() {
        let l = bce_loss(0.9999, 1.0).unwrap();
        assert!((l - 1.00005e-4).abs() < 1e-8);
    }

    #[test]
    fn endpoints_rejected() {
        assert!(bce_loss(0.0, 0.0).is_err());
        assert!(bce_loss(1.0, 1.0).is_err());
        assert!(bce_loss(0.5, 0.3).is_err());
    }

    #[test]
    fn logit_form_agrees_with_probability_form() {
        for d in [-8.0, -0.3, 0.0, 1.7, 9.0] {
            for z in [0.0, 1.0] {
                let a = bce_with_logits(d, z).0;
                let b = bce_loss(sigmoid(d), z).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_mean_matches_loop() {
        let d = [0.3, -2.0, 4.0, 0.0];
        let z = [1.0, 0.0, 0.0, 1.0];
        let (mean, grad) = bce_mean(&d, &z);
        let mut sum = 0.0;
        for i in 0..4 {
            sum += bce_loss(sigmoid(d[i]), z[i]).unwrap();
            assert!((grad[i] - (sigmoid(d[i]) - z[i]) / 4.0).abs() < 1e-15);
        }
        assert!((mean - sum / 4.0).abs() < 1e-12);
    }
}
