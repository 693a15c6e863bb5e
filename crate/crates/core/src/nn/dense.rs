use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::activation::Activation;
use super::linalg::{gemm, Matrix};
use super::Network;
use crate::error::{Error, Result};

/// Affine layer `y = act(x W^T + b)` whose weights live at fixed offsets of
/// a model-wide parameter vector. `W` is `output x input`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    pub act: Activation,
    pub w: usize,
    pub b: usize,
}

impl Dense {
    /// Reserves `output * (input + 1)` slots starting at `*cursor`.
    pub fn alloc(cursor: &mut usize, input: usize, output: usize, act: Activation) -> Self {
        let w = *cursor;
        let b = w + input * output;
        *cursor = b + output;
        Self {
            input,
            output,
            act,
            w,
            b,
        }
    }

    pub fn param_count(&self) -> usize {
        self.output * (self.input + 1)
    }

    pub fn weights<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.w..self.w + self.input * self.output]
    }

    pub fn bias<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.b..self.b + self.output]
    }

    /// Uniform fan-in weights, zero biases.
    pub fn init(&self, p: &mut [f64], rng: &mut impl Rng) {
        init_uniform(&mut p[self.w..self.w + self.input * self.output], self.input, rng);
        p[self.b..self.b + self.output].fill(0.0);
    }

    /// `x` is `batch x input`, `y` receives `batch x output`.
    pub fn forward(&self, p: &[f64], x: &[f64], batch: usize, y: &mut [f64]) {
        let bias = self.bias(p);
        for row in y[..batch * self.output].chunks_exact_mut(self.output) {
            row.copy_from_slice(bias);
        }
        gemm(batch, self.input, self.output, 1.0, x, false, self.weights(p), true, 1.0, y);
        if self.act != Activation::Identity {
            for v in &mut y[..batch * self.output] {
                *v = self.act.apply(*v);
            }
        }
    }

    /// Backpropagates `dy` (gradient w.r.t. the layer output `y`). `dy` is
    /// overwritten with the pre-activation gradient. Parameter gradients are
    /// accumulated into `g`; the input gradient is written to `dx` if given.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        p: &[f64],
        x: &[f64],
        y: &[f64],
        dy: &mut [f64],
        batch: usize,
        g: &mut [f64],
        dx: Option<&mut [f64]>,
    ) {
        let n = batch * self.output;
        if self.act != Activation::Identity {
            for (d, &yv) in dy[..n].iter_mut().zip(&y[..n]) {
                *d *= self.act.grad_from_output(yv);
            }
        }
        let (gw, gb) = g[self.w..self.b + self.output].split_at_mut(self.input * self.output);
        gemm(self.output, batch, self.input, 1.0, dy, true, x, false, 1.0, gw);
        for row in dy[..n].chunks_exact(self.output) {
            for (b, d) in gb.iter_mut().zip(row) {
                *b += d;
            }
        }
        if let Some(dx) = dx {
            gemm(batch, self.output, self.input, 1.0, dy, false, self.weights(p), false, 0.0, dx);
        }
    }
}

/// Fills `w` from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn init_uniform(w: &mut [f64], fan_in: usize, rng: &mut impl Rng) {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    for v in w {
        *v = rng.random_range(-bound..bound);
    }
}

/// Fixed per-feature affine map applied to inputs before the first layer.
/// Column `j` uses the statistics of feature `j % dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Mean and inverse standard deviation of every feature in `x`.
    pub fn fit(x: &Matrix, dim: usize) -> Self {
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut count = vec![0usize; dim];
        for r in 0..x.rows {
            for (j, &v) in x.row(r).iter().enumerate() {
                sum[j % dim] += v;
                count[j % dim] += 1;
            }
        }
        let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect();
        for r in 0..x.rows {
            for (j, &v) in x.row(r).iter().enumerate() {
                sq[j % dim] += (v - mean[j % dim]).powi(2);
            }
        }
        let scale = sq
            .iter()
            .zip(&count)
            .map(|(s, &c)| {
                let std = (s / c.max(1) as f64).sqrt();
                if std > 1e-12 {
                    1.0 / std
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &Matrix) -> Vec<f64> {
        let d = self.dim();
        let mut out = x.data.clone();
        for row in out.chunks_exact_mut(x.cols) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j % d]) * self.scale[j % d];
            }
        }
        out
    }
}

/// Feed-forward network: hidden layers share one activation, the last layer
/// is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub hidden_act: Activation,
    pub layers: Vec<Dense>,
    pub params: Vec<f64>,
    pub standardizer: Standardizer,
}

impl Mlp {
    pub fn new(sizes: &[usize], hidden_act: Activation, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(sizes, hidden_act)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &m.layers {
            l.init(&mut m.params, &mut rng);
        }
        Ok(m)
    }

    /// All parameters zero, identity standardizer.
    pub fn zeros(sizes: &[usize], hidden_act: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer sizes {sizes:?}")));
        }
        let mut cursor = 0;
        let layers: Vec<Dense> = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 2 == sizes.len() { Activation::Identity } else { hidden_act };
                Dense::alloc(&mut cursor, w[0], w[1], act)
            })
            .collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            hidden_act,
            layers,
            params: vec![0.0; cursor],
            standardizer: Standardizer::identity(sizes[0]),
        })
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols != self.sizes[0] {
            return Err(Error::ShapeMismatch {
                expected: vec![x.rows, self.sizes[0]],
                actual: vec![x.rows, x.cols],
            });
        }
        Ok(())
    }

    /// Activations of every layer, the standardized input first.
    fn forward_cache(&self, x: &Matrix) -> Vec<Vec<f64>> {
        let mut acts = vec![self.standardizer.apply(x)];
        for l in &self.layers {
            let mut y = vec![0.0; x.rows * l.output];
            l.forward(&self.params, acts.last().unwrap(), x.rows, &mut y);
            acts.push(y);
        }
        acts
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let out = self.forward_cache(x).pop().unwrap();
        Matrix::from_vec(x.rows, self.output_len(), out)
    }

    /// Gradient of a loss on the raw outputs (`batch x output`).
    pub fn gradient_outputs(
        &self,
        x: &Matrix,
        loss: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    ) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        let acts = self.forward_cache(x);
        let (value, mut dy) = loss(acts.last().unwrap());
        let mut g = vec![0.0; self.params.len()];
        for (i, l) in self.layers.iter().enumerate().rev() {
            let mut dx = if i > 0 { vec![0.0; x.rows * l.input] } else { Vec::new() };
            l.backward(
                &self.params,
                &acts[i],
                &acts[i + 1],
                &mut dy,
                x.rows,
                &mut g,
                (i > 0).then_some(dx.as_mut_slice()),
            );
            dy = dx;
        }
        Ok((value, g))
    }
}

impl Network for Mlp {
    fn input_len(&self) -> usize {
        self.sizes[0]
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn logits(&self, x: &Matrix) -> Result<Vec<f64>> {
        if self.output_len() != 1 {
            return Err(Error::InvalidArgument("logits need a single output unit".into()));
        }
        Ok(self.forward(x)?.data)
    }

    fn gradient(&self, x: &Matrix, loss: &dyn Fn(&[f64]) -> (f64, Vec<f64>)) -> Result<(f64, Vec<f64>)> {
        self.gradient_outputs(x, loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_linear_net_outputs_zero() {
        let m = Mlp::zeros(&[3, 4, 2], Activation::Identity).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5]]).unwrap();
        assert_eq!(m.forward(&x).unwrap().data, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input() {
        let mut m = Mlp::zeros(&[3, 3], Activation::Tanh).unwrap();
        for i in 0..3 {
            m.params[i * 3 + i] = 1.0;
        }
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.0, 3.0, 9.0]]).unwrap();
        assert_eq!(m.forward(&x).unwrap().data, x.data);
    }

    #[test]
    fn shape_mismatch_reports_both_shapes() {
        let m = Mlp::zeros(&[3, 2], Activation::Tanh).unwrap();
        let x = Matrix::zeros(4, 5);
        match m.forward(&x) {
            Err(Error::ShapeMismatch { expected, actual }) => {
                assert_eq!(expected, vec![4, 3]);
                assert_eq!(actual, vec![4, 5]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn affine_gradient_matches_closed_form() {
        // single linear layer, loss = 0.5 * sum(y^2): dL/dW = y^T x, dL/db = sum y
        let mut m = Mlp::new(&[3, 2], Activation::Identity, 4).unwrap();
        m.params[6] = 0.3;
        let x = Matrix::from_rows(&[vec![1.0, 2.0, -1.0], vec![0.5, -0.5, 2.0]]).unwrap();
        let y = m.forward(&x).unwrap();
        let (_, g) = m
            .gradient_outputs(&x, &|o| (0.5 * o.iter().map(|v| v * v).sum::<f64>(), o.to_vec()))
            .unwrap();
        for j in 0..2 {
            for k in 0..3 {
                let want: f64 = (0..2).map(|r| y.data[r * 2 + j] * x.data[r * 3 + k]).sum();
                assert!((g[j * 3 + k] - want).abs() < 1e-12);
            }
            let want_b: f64 = (0..2).map(|r| y.data[r * 2 + j]).sum();
            assert!((g[6 + j] - want_b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardizer_centers_features() {
        let x = Matrix::from_rows(&[vec![1.0, 10.0, 3.0, 30.0], vec![3.0, 30.0, 1.0, 10.0]]).unwrap();
        let s = Standardizer::fit(&x, 2);
        assert_eq!(s.mean, vec![2.0, 20.0]);
        let z = s.apply(&x);
        assert_eq!(z, vec![-1.0, -1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0]);
    }
}
