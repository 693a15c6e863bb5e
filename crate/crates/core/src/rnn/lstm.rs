use rand::Rng;

use super::{add_col_sums, sigmoid_inplace};
use crate::nn::{gemm, init_uniform};

/// LSTM cell with gate blocks ordered `[i, f, g, o]`.
///
/// `w_x` is `4n x in`, `w_h` is `4n x n`, `b` has `4n` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub input: usize,
    pub hidden: usize,
    w_x: usize,
    w_h: usize,
    b: usize,
}

/// Values of one step for a batch, row-major `batch x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    /// Post-activation gates, `batch x 4n`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl Lstm {
    pub fn alloc(cursor: &mut usize, input: usize, hidden: usize) -> Self {
        let w_x = *cursor;
        let w_h = w_x + 4 * hidden * input;
        let b = w_h + 4 * hidden * hidden;
        *cursor = b + 4 * hidden;
        Self {
            input,
            hidden,
            w_x,
            w_h,
            b,
        }
    }

    pub fn param_count(&self) -> usize {
        4 * self.hidden * (self.input + self.hidden + 1)
    }

    pub fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let n4 = 4 * self.hidden;
        vec![
            ("lstm.w_x".into(), vec![n4, self.input]),
            ("lstm.w_h".into(), vec![n4, self.hidden]),
            ("lstm.b".into(), vec![n4]),
        ]
    }

    /// Fan-in uniform weights; forget-gate bias 1.
    pub fn init(&self, p: &mut [f64], rng: &mut impl Rng) {
        let n = self.hidden;
        init_uniform(&mut p[self.w_x..self.w_h], self.input, rng);
        init_uniform(&mut p[self.w_h..self.b], n, rng);
        p[self.b..self.b + 4 * n].fill(0.0);
        p[self.b + n..self.b + 2 * n].fill(1.0);
    }

    pub fn w_x<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.w_x..self.w_h]
    }

    pub fn w_h<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.w_h..self.b]
    }

    pub fn bias<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.b..self.b + 4 * self.hidden]
    }

    pub fn step(&self, p: &[f64], x: &[f64], h: &[f64], c: &[f64], batch: usize) -> LstmStep {
        let n = self.hidden;
        let n4 = 4 * n;
        let mut a = Vec::with_capacity(batch * n4);
        for _ in 0..batch {
            a.extend_from_slice(self.bias(p));
        }
        gemm(batch, self.input, n4, 1.0, x, false, self.w_x(p), true, 1.0, &mut a);
        gemm(batch, n, n4, 1.0, h, false, self.w_h(p), true, 1.0, &mut a);
        let mut c_new = vec![0.0; batch * n];
        let mut tanh_c = vec![0.0; batch * n];
        let mut h_new = vec![0.0; batch * n];
        for r in 0..batch {
            let row = &mut a[r * n4..(r + 1) * n4];
            sigmoid_inplace(&mut row[..2 * n]);
            for v in &mut row[2 * n..3 * n] {
                *v = v.tanh();
            }
            sigmoid_inplace(&mut row[3 * n..]);
            for j in 0..n {
                let (i, f, g, o) = (row[j], row[n + j], row[2 * n + j], row[3 * n + j]);
                let k = r * n + j;
                c_new[k] = f * c[k] + i * g;
                tanh_c[k] = c_new[k].tanh();
                h_new[k] = o * tanh_c[k];
            }
        }
        LstmStep {
            gates: a,
            c: c_new,
            tanh_c,
            h: h_new,
        }
    }

    /// Unrolls from zero state over `xs` (each `batch x in`).
    pub fn forward(&self, p: &[f64], xs: &[Vec<f64>], batch: usize) -> Vec<LstmStep> {
        let zeros = vec![0.0; batch * self.hidden];
        let mut steps: Vec<LstmStep> = Vec::with_capacity(xs.len());
        for x in xs {
            let (h, c) = match steps.last() {
                Some(s) => (&s.h, &s.c),
                None => (&zeros, &zeros),
            };
            let s = self.step(p, x, h, c, batch);
            steps.push(s);
        }
        steps
    }

    /// Backpropagation through time from `dh_last`, the gradient on the
    /// final hidden state. Accumulates into `g`.
    pub fn backward(&self, p: &[f64], xs: &[Vec<f64>], steps: &[LstmStep], dh_last: &[f64], batch: usize, g: &mut [f64]) {
        let n = self.hidden;
        let n4 = 4 * n;
        let zeros = vec![0.0; batch * n];
        let mut dh = dh_last.to_vec();
        let mut dc = vec![0.0; batch * n];
        let mut da = vec![0.0; batch * n4];
        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            let (h_prev, c_prev) = if t > 0 { (&steps[t - 1].h, &steps[t - 1].c) } else { (&zeros, &zeros) };
            for r in 0..batch {
                let gates = &s.gates[r * n4..(r + 1) * n4];
                let dar = &mut da[r * n4..(r + 1) * n4];
                for j in 0..n {
                    let k = r * n + j;
                    let (i, f, gg, o) = (gates[j], gates[n + j], gates[2 * n + j], gates[3 * n + j]);
                    let tc = s.tanh_c[k];
                    let d_o = dh[k] * tc;
                    let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
                    dar[j] = dck * gg * i * (1.0 - i);
                    dar[n + j] = dck * c_prev[k] * f * (1.0 - f);
                    dar[2 * n + j] = dck * i * (1.0 - gg * gg);
                    dar[3 * n + j] = d_o * o * (1.0 - o);
                    dc[k] = dck * f;
                }
            }
            gemm(n4, batch, self.input, 1.0, &da, true, &xs[t], false, 1.0, &mut g[self.w_x..self.w_h]);
            gemm(n4, batch, n, 1.0, &da, true, h_prev, false, 1.0, &mut g[self.w_h..self.b]);
            add_col_sums(&mut g[self.b..self.b + n4], &da, n4);
            gemm(batch, n4, n, 1.0, &da, false, self.w_h(p), false, 0.0, &mut dh);
        }
    }
}
