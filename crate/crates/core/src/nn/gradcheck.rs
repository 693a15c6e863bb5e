use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linalg::Matrix;
use super::Network;
use crate::error::{Error, Result};

/// Smallest denominator of a relative error. Central differences of a
/// double-precision loss carry roughly 1e-11 of rounding noise at `eps = 1e-5`.
pub const DENOM_FLOOR: f64 = 1e-6;

/// Which parameters a gradient check perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckSubset {
    All,
    /// `count` distinct indices drawn with `seed`.
    Sample { count: usize, seed: u64 },
}

/// Largest relative error between the analytic gradient of `loss(logits(x))`
/// and central differences with step `eps`. The denominator of each
/// relative error is `max(|analytic|, |numeric|, DENOM_FLOOR)`, so components
/// below the floor are judged on absolute error instead.
pub fn grad_check<N: Network + ?Sized>(
    net: &mut N,
    x: &Matrix,
    loss: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    eps: f64,
    subset: CheckSubset,
) -> Result<f64> {
    if !(eps > 1e-7 && eps < 1e-3) {
        return Err(Error::InvalidArgument(format!("eps {eps} outside (1e-7, 1e-3)")));
    }
    let (_, analytic) = net.gradient(x, loss)?;
    let n = net.param_count();
    let idx: Vec<usize> = match subset {
        CheckSubset::All => (0..n).collect(),
        CheckSubset::Sample { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = sample(&mut rng, n, count.min(n)).into_vec();
            v.sort_unstable();
            v
        }
    };
    let mut worst: f64 = 0.0;
    for i in idx {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + eps;
        let plus = loss(&net.logits(x)?).0;
        net.params_mut()[i] = orig - eps;
        let minus = loss(&net.logits(x)?).0;
        net.params_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(DENOM_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{bce_mean, Activation, Mlp};

    #[test]
    fn linear_model_linear_loss_is_exact() {
        let mut m = Mlp::new(&[4, 1], Activation::Identity, 1).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0, 4.0], vec![-1.0, 0.5, 0.0, 2.0]]).unwrap();
        let loss = |o: &[f64]| (o.iter().sum::<f64>(), vec![1.0; o.len()]);
        let err = grad_check(&mut m, &x, &loss, 1e-5, CheckSubset::All).unwrap();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn tanh_mlp_under_bce() {
        let mut m = Mlp::new(&[5, 8, 6, 1], Activation::Tanh, 2).unwrap();
        let x = Matrix::from_vec(3, 5, (0..15).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
        let labels = [1.0, 0.0, 1.0];
        let loss = |o: &[f64]| bce_mean(o, &labels);
        let err = grad_check(&mut m, &x, &loss, 1e-5, CheckSubset::All).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn eps_range_enforced() {
        let mut m = Mlp::new(&[1, 1], Activation::Identity, 1).unwrap();
        let x = Matrix::zeros(1, 1);
        let loss = |o: &[f64]| (o[0], vec![1.0]);
        assert!(grad_check(&mut m, &x, &loss, 1e-2, CheckSubset::All).is_err());
    }
}
