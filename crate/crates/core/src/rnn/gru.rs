use rand::Rng;

use super::{add_col_sums, sigmoid_inplace};
use crate::nn::{gemm, init_uniform};

/// GRU cell with blocks `[u, r, c]`: update gate, reset gate, candidate.
///
/// `h' = (1 - u) * h + u * tanh(W_c x + U_c (r * h) + b_c)`.
/// `w_x` is `3n x in`, `w_h` is `3n x n`, `b` has `3n` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    pub input: usize,
    pub hidden: usize,
    w_x: usize,
    w_h: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruStep {
    /// `[u, r, candidate]` after activation, `batch x 3n`.
    pub gates: Vec<f64>,
    /// `r * h_prev`, `batch x n`.
    pub rh: Vec<f64>,
    pub h: Vec<f64>,
}

impl Gru {
    pub fn alloc(cursor: &mut usize, input: usize, hidden: usize) -> Self {
        let w_x = *cursor;
        let w_h = w_x + 3 * hidden * input;
        let b = w_h + 3 * hidden * hidden;
        *cursor = b + 3 * hidden;
        Self {
            input,
            hidden,
            w_x,
            w_h,
            b,
        }
    }

    pub fn param_count(&self) -> usize {
        3 * self.hidden * (self.input + self.hidden + 1)
    }

    pub fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let n3 = 3 * self.hidden;
        vec![
            ("gru.w_x".into(), vec![n3, self.input]),
            ("gru.w_h".into(), vec![n3, self.hidden]),
            ("gru.b".into(), vec![n3]),
        ]
    }

    pub fn init(&self, p: &mut [f64], rng: &mut impl Rng) {
        init_uniform(&mut p[self.w_x..self.w_h], self.input, rng);
        init_uniform(&mut p[self.w_h..self.b], self.hidden, rng);
        p[self.b..self.b + 3 * self.hidden].fill(0.0);
    }

    pub fn w_x<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.w_x..self.w_h]
    }

    pub fn w_h<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.w_h..self.b]
    }

    pub fn bias<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.b..self.b + 3 * self.hidden]
    }

    pub fn step(&self, p: &[f64], x: &[f64], h: &[f64], batch: usize) -> GruStep {
        let n = self.hidden;
        let n3 = 3 * n;
        let w_h = self.w_h(p);
        let mut a = Vec::with_capacity(batch * n3);
        for _ in 0..batch {
            a.extend_from_slice(self.bias(p));
        }
        gemm(batch, self.input, n3, 1.0, x, false, self.w_x(p), true, 1.0, &mut a);
        // recurrent part of the gates; the candidate block needs r first
        let mut ah = vec![0.0; batch * 2 * n];
        gemm(batch, n, 2 * n, 1.0, h, false, &w_h[..2 * n * n], true, 0.0, &mut ah);
        let mut rh = vec![0.0; batch * n];
        for r in 0..batch {
            let row = &mut a[r * n3..(r + 1) * n3];
            for (v, hv) in row[..2 * n].iter_mut().zip(&ah[r * 2 * n..(r + 1) * 2 * n]) {
                *v += hv;
            }
            sigmoid_inplace(&mut row[..2 * n]);
            for j in 0..n {
                rh[r * n + j] = row[n + j] * h[r * n + j];
            }
        }
        let mut ac = vec![0.0; batch * n];
        gemm(batch, n, n, 1.0, &rh, false, &w_h[2 * n * n..], true, 0.0, &mut ac);
        let mut h_new = vec![0.0; batch * n];
        for r in 0..batch {
            let row = &mut a[r * n3..(r + 1) * n3];
            for j in 0..n {
                let k = r * n + j;
                let cand = (row[2 * n + j] + ac[k]).tanh();
                row[2 * n + j] = cand;
                let u = row[j];
                h_new[k] = (1.0 - u) * h[k] + u * cand;
            }
        }
        GruStep { gates: a, rh, h: h_new }
    }

    pub fn forward(&self, p: &[f64], xs: &[Vec<f64>], batch: usize) -> Vec<GruStep> {
        let zeros = vec![0.0; batch * self.hidden];
        let mut steps: Vec<GruStep> = Vec::with_capacity(xs.len());
        for x in xs {
            let h = steps.last().map_or(&zeros, |s| &s.h);
            let s = self.step(p, x, h, batch);
            steps.push(s);
        }
        steps
    }

    pub fn backward(&self, p: &[f64], xs: &[Vec<f64>], steps: &[GruStep], dh_last: &[f64], batch: usize, g: &mut [f64]) {
        let n = self.hidden;
        let n3 = 3 * n;
        let w_h = self.w_h(p);
        let zeros = vec![0.0; batch * n];
        let mut dh = dh_last.to_vec();
        let mut da = vec![0.0; batch * n3];
        let mut dh_prev = vec![0.0; batch * n];
        let mut drh = vec![0.0; batch * n];
        let mut da_c = vec![0.0; batch * n];
        let mut da_ur = vec![0.0; batch * 2 * n];
        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            let h_prev = if t > 0 { &steps[t - 1].h } else { &zeros };
            for r in 0..batch {
                for j in 0..n {
                    let k = r * n + j;
                    let u = s.gates[r * n3 + j];
                    let cand = s.gates[r * n3 + 2 * n + j];
                    let d = dh[k];
                    dh_prev[k] = d * (1.0 - u);
                    let dac = d * u * (1.0 - cand * cand);
                    da_c[k] = dac;
                    da[r * n3 + 2 * n + j] = dac;
                    da[r * n3 + j] = d * (cand - h_prev[k]) * u * (1.0 - u);
                }
            }
            // candidate path through r * h
            gemm(n, batch, n, 1.0, &da_c, true, &s.rh, false, 1.0, &mut g[self.w_h + 2 * n * n..self.b]);
            gemm(batch, n, n, 1.0, &da_c, false, &w_h[2 * n * n..], false, 0.0, &mut drh);
            for r in 0..batch {
                for j in 0..n {
                    let k = r * n + j;
                    let rg = s.gates[r * n3 + n + j];
                    dh_prev[k] += drh[k] * rg;
                    da[r * n3 + n + j] = drh[k] * h_prev[k] * rg * (1.0 - rg);
                }
                da_ur[r * 2 * n..(r + 1) * 2 * n].copy_from_slice(&da[r * n3..r * n3 + 2 * n]);
            }
            gemm(2 * n, batch, n, 1.0, &da_ur, true, h_prev, false, 1.0, &mut g[self.w_h..self.w_h + 2 * n * n]);
            gemm(batch, 2 * n, n, 1.0, &da_ur, false, &w_h[..2 * n * n], false, 1.0, &mut dh_prev);
            gemm(n3, batch, self.input, 1.0, &da, true, &xs[t], false, 1.0, &mut g[self.w_x..self.w_h]);
            add_col_sums(&mut g[self.b..self.b + n3], &da, n3);
            std::mem::swap(&mut dh, &mut dh_prev);
        }
    }
}
