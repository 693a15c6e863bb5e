use rand::Rng;

use super::add_col_sums;
use crate::nn::{gemm, init_uniform, sigmoid};

/// Closed-form continuous-time cell.
///
/// A shared tanh backbone reads `[h; x]`; three stacked heads give `f`
/// (linear), `g1` and `g2` (tanh). With `gate = sigmoid(-f * t)`:
/// `h' = gate * g1 + (1 - gate) * g2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cfc {
    pub input: usize,
    pub hidden: usize,
    pub backbone: usize,
    w_bb: usize,
    b_bb: usize,
    w_heads: usize,
    b_heads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfcStep {
    /// `[h_prev; x]`, `batch x (n + in)`.
    pub hx: Vec<f64>,
    /// Backbone output, `batch x backbone`.
    pub z: Vec<f64>,
    /// `[f, g1, g2]`, `batch x 3n`; `f` raw, `g1`, `g2` after tanh.
    pub heads: Vec<f64>,
    pub gate: Vec<f64>,
    pub h: Vec<f64>,
}

impl Cfc {
    pub fn alloc(cursor: &mut usize, input: usize, hidden: usize, backbone: usize) -> Self {
        let w_bb = *cursor;
        let b_bb = w_bb + backbone * (hidden + input);
        let w_heads = b_bb + backbone;
        let b_heads = w_heads + 3 * hidden * backbone;
        *cursor = b_heads + 3 * hidden;
        Self {
            input,
            hidden,
            backbone,
            w_bb,
            b_bb,
            w_heads,
            b_heads,
        }
    }

    pub fn param_count(&self) -> usize {
        self.backbone * (self.hidden + self.input + 1) + 3 * self.hidden * (self.backbone + 1)
    }

    pub fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        vec![
            ("cfc.w_backbone".into(), vec![self.backbone, self.hidden + self.input]),
            ("cfc.b_backbone".into(), vec![self.backbone]),
            ("cfc.w_heads".into(), vec![3 * self.hidden, self.backbone]),
            ("cfc.b_heads".into(), vec![3 * self.hidden]),
        ]
    }

    pub fn init(&self, p: &mut [f64], rng: &mut impl Rng) {
        init_uniform(&mut p[self.w_bb..self.b_bb], self.hidden + self.input, rng);
        p[self.b_bb..self.w_heads].fill(0.0);
        init_uniform(&mut p[self.w_heads..self.b_heads], self.backbone, rng);
        p[self.b_heads..self.b_heads + 3 * self.hidden].fill(0.0);
    }

    pub fn w_backbone<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.w_bb..self.b_bb]
    }

    pub fn b_backbone<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.b_bb..self.w_heads]
    }

    pub fn w_heads<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.w_heads..self.b_heads]
    }

    pub fn b_heads<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.b_heads..self.b_heads + 3 * self.hidden]
    }

    pub fn step(&self, p: &[f64], x: &[f64], h: &[f64], t_stamp: f64, batch: usize) -> CfcStep {
        let (n, m, nb) = (self.hidden, self.input, self.backbone);
        let mut hx = Vec::with_capacity(batch * (n + m));
        for r in 0..batch {
            hx.extend_from_slice(&h[r * n..(r + 1) * n]);
            hx.extend_from_slice(&x[r * m..(r + 1) * m]);
        }
        let mut z = Vec::with_capacity(batch * nb);
        for _ in 0..batch {
            z.extend_from_slice(self.b_backbone(p));
        }
        gemm(batch, n + m, nb, 1.0, &hx, false, self.w_backbone(p), true, 1.0, &mut z);
        for v in &mut z {
            *v = v.tanh();
        }
        let mut heads = Vec::with_capacity(batch * 3 * n);
        for _ in 0..batch {
            heads.extend_from_slice(self.b_heads(p));
        }
        gemm(batch, nb, 3 * n, 1.0, &z, false, self.w_heads(p), true, 1.0, &mut heads);
        let mut gate = vec![0.0; batch * n];
        let mut h_new = vec![0.0; batch * n];
        for r in 0..batch {
            let row = &mut heads[r * 3 * n..(r + 1) * 3 * n];
            for v in &mut row[n..] {
                *v = v.tanh();
            }
            for j in 0..n {
                let k = r * n + j;
                let gt = sigmoid(-row[j] * t_stamp);
                gate[k] = gt;
                h_new[k] = gt * row[n + j] + (1.0 - gt) * row[2 * n + j];
            }
        }
        CfcStep {
            hx,
            z,
            heads,
            gate,
            h: h_new,
        }
    }

    pub fn forward(&self, p: &[f64], xs: &[Vec<f64>], t_stamp: f64, batch: usize) -> Vec<CfcStep> {
        let zeros = vec![0.0; batch * self.hidden];
        let mut steps: Vec<CfcStep> = Vec::with_capacity(xs.len());
        for x in xs {
            let h = steps.last().map_or(&zeros, |s| &s.h);
            let s = self.step(p, x, h, t_stamp, batch);
            steps.push(s);
        }
        steps
    }

    pub fn backward(&self, p: &[f64], steps: &[CfcStep], dh_last: &[f64], t_stamp: f64, batch: usize, g: &mut [f64]) {
        let (n, m, nb) = (self.hidden, self.input, self.backbone);
        let n3 = 3 * n;
        let mut dh = dh_last.to_vec();
        let mut da = vec![0.0; batch * n3];
        let mut dz = vec![0.0; batch * nb];
        let mut dhx = vec![0.0; batch * (n + m)];
        for s in steps.iter().rev() {
            for r in 0..batch {
                let heads = &s.heads[r * n3..(r + 1) * n3];
                for j in 0..n {
                    let k = r * n + j;
                    let (g1, g2, gt) = (heads[n + j], heads[2 * n + j], s.gate[k]);
                    let d = dh[k];
                    let dgate = d * (g1 - g2);
                    da[r * n3 + j] = -t_stamp * dgate * gt * (1.0 - gt);
                    da[r * n3 + n + j] = d * gt * (1.0 - g1 * g1);
                    da[r * n3 + 2 * n + j] = d * (1.0 - gt) * (1.0 - g2 * g2);
                }
            }
            gemm(n3, batch, nb, 1.0, &da, true, &s.z, false, 1.0, &mut g[self.w_heads..self.b_heads]);
            add_col_sums(&mut g[self.b_heads..self.b_heads + n3], &da, n3);
            gemm(batch, n3, nb, 1.0, &da, false, self.w_heads(p), false, 0.0, &mut dz);
            for (d, &zv) in dz.iter_mut().zip(&s.z) {
                *d *= 1.0 - zv * zv;
            }
            gemm(nb, batch, n + m, 1.0, &dz, true, &s.hx, false, 1.0, &mut g[self.w_bb..self.b_bb]);
            add_col_sums(&mut g[self.b_bb..self.w_heads], &dz, nb);
            gemm(batch, nb, n + m, 1.0, &dz, false, self.w_backbone(p), false, 0.0, &mut dhx);
            for r in 0..batch {
                dh[r * n..(r + 1) * n].copy_from_slice(&dhx[r * (n + m)..r * (n + m) + n]);
            }
        }
    }
}
