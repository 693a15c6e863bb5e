use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{load_dataset, Dataset, Layout};
use crate::baselines::{fit_kalman, MlpDetector, PreFilter, RuleFeature, ThresholdRule};
use crate::config::{Config, ROSTER};
use crate::data::{featurize, FeatureMode, PoseWindow, FEATURE_DIM};
use crate::detector::{Detector, KalmanDetector};
use crate::error::{Error, Result};
use crate::nn::{bce_mean, grad_check, train as fit, CheckSubset, Matrix, Network, Standardizer, TrainHistory};
use crate::rnn::{CellKind, FailureNetModel};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub name: String,
    pub params: usize,
    /// Epochs run; 0 for fitted rules.
    pub epochs: usize,
    pub best_epoch: usize,
    /// Accuracy on the validation split at the kept parameters.
    pub val_accuracy: f64,
    pub seconds: f64,
}

fn labels(windows: &[PoseWindow]) -> Vec<f64> {
    windows.iter().map(|w| f64::from(w.z)).collect()
}

fn feature_matrix(windows: &[PoseWindow], mode: FeatureMode) -> Result<Matrix> {
    let cols = windows.first().map_or(0, |w| w.len() * FEATURE_DIM);
    let mut data = Vec::with_capacity(windows.len() * cols);
    for w in windows {
        data.extend(featurize(w, mode).flat());
    }
    Matrix::from_vec(windows.len(), cols, data)
}

fn prefilter_of(name: &str) -> Option<PreFilter> {
    match name {
        "mlp" => Some(PreFilter::None),
        "speed_mlp" => Some(PreFilter::Speed),
        "fft_mlp" => Some(PreFilter::Fft),
        _ => None,
    }
}

fn cell_of(name: &str) -> Option<CellKind> {
    name.parse().ok().filter(|_| matches!(name, "lstm" | "gru" | "cfc"))
}

/// Training seed of roster entry `name`.
fn model_seed(cfg: &Config, name: &str) -> u64 {
    let i = ROSTER.iter().position(|r| *r == name).unwrap_or(0) as u64;
    cfg.seed.wrapping_add(7919 * (i + 1))
}

fn check_gradients<N: Network + ?Sized>(net: &mut N, x: &Matrix, y: &[f64], seed: u64, tol: f64, name: &str) -> Result<()> {
    let rows: Vec<usize> = (0..x.rows.min(8)).collect();
    let xb = x.select_rows(&rows);
    let yb: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let err = grad_check(net, &xb, &|d| bce_mean(d, &yb), 1e-5, CheckSubset::Sample { count: 200, seed })?;
    log::info!("{name}: gradient check error {err:.3e}");
    if err >= tol {
        return Err(Error::Training(format!("{name}: gradient check error {err:.3e} not below {tol:e}")));
    }
    Ok(())
}

fn outcome(name: &str, det: &dyn Detector, history: Option<&TrainHistory>, val_accuracy: f64, start: Instant) -> TrainOutcome {
    TrainOutcome {
        name: name.to_string(),
        params: det.param_count(),
        epochs: history.map_or(0, |h| h.epochs.len()),
        best_epoch: history.map_or(0, |h| h.best_epoch),
        val_accuracy,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Trains or fits every detector in the roster and saves checkpoints and
/// training curves under `models/`.
pub fn train(cfg: &Config, layout: &Layout) -> Result<Vec<TrainOutcome>> {
    let ds = load_dataset(layout)?;
    check_dataset(cfg, &ds)?;
    std::fs::create_dir_all(layout.models()).map_err(|e| Error::io(layout.models(), e))?;
    let ty = labels(&ds.train);
    let vy = labels(&ds.val);
    let vz: Vec<u8> = ds.val.iter().map(|w| w.z).collect();
    let mut rnn_inputs: Option<(Matrix, Matrix)> = None;
    let mut out = Vec::new();

    for name in &cfg.train.roster {
        let start = Instant::now();
        let seed = model_seed(cfg, name);
        let epochs = cfg.train.epochs_for(name);
        let tc = cfg.train.train_config(epochs, seed);
        let result = match name.as_str() {
            "speed_threshold" | "fft_threshold" => {
                let feature = if name == "speed_threshold" { RuleFeature::Speed } else { RuleFeature::FftPower };
                let (rule, fit) = ThresholdRule::fit(feature, &ds.val, &vz)?;
                log::info!("{name}: {} >= {:.6e}", rule.kind, rule.threshold);
                rule.to_checkpoint().save(&layout.checkpoint(name))?;
                outcome(name, &rule, None, fit.accuracy(), start)
            }
            "kalman" => {
                let (kc, fit) = fit_kalman(&ds.val, &vz, &cfg.baselines.grid(), &cfg.baselines.kalman())?;
                log::info!("kalman: q {:e} r {:e} {} > {:.6e}", kc.q, kc.r, kc.aggregation, kc.threshold);
                let det = KalmanDetector { cfg: kc, seq_len: cfg.data.seq_len };
                Detector::to_checkpoint(&det).save(&layout.checkpoint(name))?;
                outcome(name, &det, None, fit.accuracy(), start)
            }
            n if prefilter_of(n).is_some() => {
                let pf = prefilter_of(n).unwrap();
                let mut det = MlpDetector::new(pf, cfg.data.feature_mode, cfg.data.seq_len, &cfg.models.mlp_hidden, seed)?;
                let tx = det.input_matrix(&ds.train)?;
                let vx = det.input_matrix(&ds.val)?;
                det.net.standardizer = Standardizer::fit(&tx, tx.cols);
                if cfg.train.grad_check {
                    check_gradients(&mut det.net, &tx, &ty, seed, cfg.train.grad_tol, name)?;
                }
                let h = fit(&mut det.net, &tx, &ty, &vx, &vy, &tc)?;
                h.write_csv(&layout.history(name))?;
                MlpDetector::to_checkpoint(&det).save(&layout.checkpoint(name))?;
                let acc = h.best().map_or(f64::NAN, |b| b.val_accuracy);
                outcome(name, &det, Some(&h), acc, start)
            }
            n => {
                let kind = cell_of(n).ok_or_else(|| Error::Config(format!("unknown detector '{n}'")))?;
                if rnn_inputs.is_none() {
                    rnn_inputs = Some((
                        feature_matrix(&ds.train, cfg.data.feature_mode)?,
                        feature_matrix(&ds.val, cfg.data.feature_mode)?,
                    ));
                }
                let (tx, vx) = rnn_inputs.as_ref().unwrap();
                let spec = cfg.models.spec(kind, &cfg.data, cfg.manager.z_bar);
                let mut model = FailureNetModel::new(spec, seed)?;
                model.standardizer = Standardizer::fit(tx, tx.cols);
                if cfg.train.grad_check {
                    check_gradients(&mut model, tx, &ty, seed, cfg.train.grad_tol, name)?;
                }
                let h = fit(&mut model, tx, &ty, vx, &vy, &tc)?;
                h.write_csv(&layout.history(name))?;
                model.to_checkpoint().save(&layout.checkpoint(name))?;
                let acc = h.best().map_or(f64::NAN, |b| b.val_accuracy);
                outcome(name, &model, Some(&h), acc, start)
            }
        };
        log::info!(
            "{name}: {} params, {} epochs, val accuracy {:.4}, {:.1} s",
            result.params,
            result.epochs,
            result.val_accuracy,
            result.seconds
        );
        out.push(result);
    }
    Ok(out)
}

fn check_dataset(cfg: &Config, ds: &Dataset) -> Result<()> {
    if ds.meta.seq_len != cfg.data.seq_len || ds.meta.feature_mode != cfg.data.feature_mode {
        return Err(Error::Incompatible(format!(
            "dataset has L = {} ({}), config asks for L = {} ({})",
            ds.meta.seq_len, ds.meta.feature_mode, cfg.data.seq_len, cfg.data.feature_mode
        )));
    }
    if ds.train.is_empty() || ds.val.is_empty() {
        return Err(Error::Data("dataset split is empty".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckRow {
    pub model: String,
    pub seed: u64,
    pub params: usize,
    pub error: f64,
}

/// Finite-difference check of the default-size MLP and recurrent models on
/// random length-`L` inputs, `seeds` draws each, `sample` parameters per
/// draw (0 = all).
pub fn grad_check_all(cfg: &Config, seeds: u64, sample: usize) -> Result<Vec<GradCheckRow>> {
    let l = cfg.data.seq_len;
    let mut rows = Vec::new();
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (seed + 1));
        let batch = 4;
        let x = Matrix::from_vec(
            batch,
            l * FEATURE_DIM,
            (0..batch * l * FEATURE_DIM).map(|_| StandardNormal.sample(&mut rng)).collect(),
        )?;
        let y: Vec<f64> = (0..batch).map(|i| (i % 2) as f64).collect();
        let loss = |d: &[f64]| bce_mean(d, &y);
        let subset = |n: usize| {
            if sample == 0 || sample >= n {
                CheckSubset::All
            } else {
                CheckSubset::Sample { count: sample, seed }
            }
        };
        let mut mlp = MlpDetector::new(PreFilter::None, cfg.data.feature_mode, l, &cfg.models.mlp_hidden, seed)?;
        let n = mlp.net.param_count();
        rows.push(GradCheckRow {
            model: "mlp".into(),
            seed,
            params: n,
            error: grad_check(&mut mlp.net, &x, &loss, 1e-5, subset(n))?,
        });
        for kind in CellKind::ALL {
            let mut m = FailureNetModel::new(cfg.models.spec(kind, &cfg.data, cfg.manager.z_bar), seed)?;
            let n = m.params.len();
            rows.push(GradCheckRow {
                model: kind.as_str().into(),
                seed,
                params: n,
                error: grad_check(&mut m, &x, &loss, 1e-5, subset(n))?,
            });
        }
    }
    Ok(rows)
}
