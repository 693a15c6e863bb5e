//! Recurrent cells and the sequence classifier built on them.

mod cfc;
mod gru;
mod lstm;
mod model;

pub use cfc::{Cfc, CfcStep};
pub use gru::{Gru, GruStep};
pub use lstm::{Lstm, LstmStep};
pub use model::{count_params, Cell, CellKind, FailureNetModel, ModelSpec};

use crate::nn::sigmoid;

fn sigmoid_inplace(v: &mut [f64]) {
    for x in v {
        *x = sigmoid(*x);
    }
}

/// Adds the column sums of `m` (rows of `width`) to `acc`.
fn add_col_sums(acc: &mut [f64], m: &[f64], width: usize) {
    for row in m.chunks_exact(width) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
}
