use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::linalg::Matrix;
use super::loss::bce_mean;
use super::Network;
use crate::error::{Error, Result};
use crate::numfmt::sig9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a lower validation loss.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 64,
            epochs: 200,
            patience: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        let ok = a.lr > 0.0
            && a.eps > 0.0
            && a.beta1 > 0.0
            && a.beta1 < 1.0
            && a.beta2 > 0.0
            && a.beta2 < 1.0
            && self.batch_size > 0
            && self.epochs > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training hyperparameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochStats> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "epoch,train_loss,val_loss,val_accuracy").unwrap();
        for e in &self.epochs {
            writeln!(
                out,
                "{},{},{},{}",
                e.epoch,
                sig9(e.train_loss),
                sig9(e.val_loss),
                sig9(e.val_accuracy)
            )
            .unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Mean BCE and accuracy at `z_hat > 0.5`, evaluated in fixed chunks.
pub fn evaluate_bce<N: Network + ?Sized>(net: &N, x: &Matrix, y: &[f64]) -> Result<(f64, f64)> {
    const CHUNK: usize = 512;
    let mut loss = 0.0;
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..x.rows).collect();
    for part in idx.chunks(CHUNK) {
        let logits = net.logits(&x.select_rows(part))?;
        let labels: Vec<f64> = part.iter().map(|&i| y[i]).collect();
        loss += bce_mean(&logits, &labels).0 * part.len() as f64;
        correct += logits
            .iter()
            .zip(&labels)
            .filter(|(&d, &z)| (d > 0.0) == (z == 1.0))
            .count();
    }
    let n = x.rows.max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Minibatch Adam on mean BCE. After each epoch the validation split is
/// scored; the parameters with the best validation accuracy (ties: lower
/// validation loss) are restored at the end.
pub fn train<N: Network + ?Sized>(
    net: &mut N,
    train_x: &Matrix,
    train_y: &[f64],
    val_x: &Matrix,
    val_y: &[f64],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train_x.rows != train_y.len() || val_x.rows != val_y.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![train_x.rows, val_x.rows],
            actual: vec![train_y.len(), val_y.len()],
        });
    }
    let positives = train_y.iter().filter(|&&z| z == 1.0).count();
    if positives == 0 || positives == train_y.len() {
        return Err(Error::Training("training set holds a single class".into()));
    }
    if val_x.rows == 0 {
        return Err(Error::Training("validation set is empty".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(cfg.adam, net.param_count());
    let mut order: Vec<usize> = (0..train_x.rows).collect();
    let mut history = TrainHistory::default();
    let mut best_params = net.params().to_vec();
    let mut best_key = (f64::NEG_INFINITY, f64::INFINITY);
    let mut best_loss = f64::INFINITY;
    let mut since_improved = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = train_x.select_rows(batch);
            let yb: Vec<f64> = batch.iter().map(|&i| train_y[i]).collect();
            let (loss, grad) = net.gradient(&xb, &|d| bce_mean(d, &yb))?;
            if !loss.is_finite() {
                return Err(Error::Training(format!("loss diverged in epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            opt.step(net.params_mut(), &grad);
        }
        let (val_loss, val_accuracy) = evaluate_bce(net, val_x, val_y)?;
        let stats = EpochStats {
            epoch,
            train_loss: total / train_x.rows as f64,
            val_loss,
            val_accuracy,
        };
        log::debug!(
            "epoch {epoch}: train {:.5} val {:.5} acc {:.4}",
            stats.train_loss,
            val_loss,
            val_accuracy
        );
        history.epochs.push(stats);

        if val_accuracy > best_key.0 || (val_accuracy == best_key.0 && val_loss < best_key.1) {
            best_key = (val_accuracy, val_loss);
            best_params.copy_from_slice(net.params());
            history.best_epoch = epoch;
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            since_improved = 0;
        } else {
            since_improved += 1;
            if since_improved >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    net.params_mut().copy_from_slice(&best_params);
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{sigmoid, Activation, Mlp};

    #[test]
    fn single_class_rejected() {
        let mut m = Mlp::new(&[2, 1], Activation::Identity, 0).unwrap();
        let x = Matrix::zeros(4, 2);
        let y = [1.0; 4];
        assert!(matches!(train(&mut m, &x, &y, &x, &y, &TrainConfig::default()), Err(Error::Training(_))));
    }

    #[test]
    fn identical_inputs_converge_to_class_prior() {
        let mut m = Mlp::new(&[2, 4, 1], Activation::Tanh, 3).unwrap();
        let x = Matrix::from_vec(8, 2, [0.5, -1.0].repeat(8)).unwrap();
        let y = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let cfg = TrainConfig {
            adam: AdamConfig {
                lr: 0.02,
                ..AdamConfig::default()
            },
            epochs: 400,
            patience: 400,
            batch_size: 8,
            seed: 1,
        };
        train(&mut m, &x, &y, &x, &y, &cfg).unwrap();
        let p = sigmoid(m.logits(&x.select_rows(&[0])).unwrap()[0]);
        assert!((p - 5.0 / 8.0).abs() < 0.02, "{p}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let x = Matrix::from_vec(20, 2, (0..40).map(|i| ((i * 7) % 11) as f64 - 5.0).collect()).unwrap();
        let y: Vec<f64> = (0..20).map(|i| f64::from(x.row(i)[0] > 0.0)).collect();
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let run = || {
            let mut m = Mlp::new(&[2, 3, 1], Activation::Tanh, 9).unwrap();
            train(&mut m, &x, &y, &x, &y, &cfg).unwrap();
            m.params
        };
        assert_eq!(run(), run());
    }
}
