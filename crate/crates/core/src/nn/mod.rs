//! Dense layers, BCE, Adam, gradient checking and training.
//!
//! Every model keeps its learnable scalars in one flat vector; layers and
//! cells address it through fixed offsets.

mod activation;
mod adam;
pub mod checkpoint;
mod dense;
mod gradcheck;
mod linalg;
mod loss;
mod train;

pub use activation::{sigmoid, softplus, Activation};
pub use adam::{Adam, AdamConfig};
pub use checkpoint::Checkpoint;
pub use dense::{init_uniform, Dense, Mlp, Standardizer};
pub use gradcheck::{grad_check, CheckSubset, DENOM_FLOOR};
pub use linalg::{gemm, Matrix};
pub use loss::{bce_loss, bce_mean, bce_with_logits};
pub use train::{evaluate_bce, train, EpochStats, TrainConfig, TrainHistory};

use crate::error::Result;

/// A differentiable scalar-output model over fixed-length input rows.
pub trait Network {
    fn input_len(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    fn param_count(&self) -> usize {
        self.params().len()
    }

    /// Pre-sigmoid outputs, one per input row.
    fn logits(&self, x: &Matrix) -> Result<Vec<f64>>;

    /// Loss value and its gradient with respect to every parameter. `loss`
    /// maps the logits to a value and the derivative of that value with
    /// respect to each logit.
    fn gradient(&self, x: &Matrix, loss: &dyn Fn(&[f64]) -> (f64, Vec<f64>)) -> Result<(f64, Vec<f64>)>;

    /// `z_hat` for a single input row.
    fn predict(&self, row: &[f64]) -> Result<f64> {
        let x = Matrix::from_vec(1, row.len(), row.to_vec())?;
        Ok(sigmoid(self.logits(&x)?[0]))
    }
}
