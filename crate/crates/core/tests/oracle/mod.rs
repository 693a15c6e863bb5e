//! Scalar reference implementations shared by the integration tests.
#![allow(dead_code)]

use failurenet::baselines::{candidate_thresholds, StatKind};
use failurenet::rnn::{Cfc, Gru, Lstm};

pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `w` is `rows x cols` row-major; returns `w v`.
pub fn matvec(w: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|i| (0..cols).map(|k| w[i * cols + k] * v[k]).sum())
        .collect()
}

pub fn lstm_oracle(c: &Lstm, p: &[f64], x: &[f64], h: &[f64], cs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = c.hidden;
    let ax = matvec(c.w_x(p), 4 * n, c.input, x);
    let ah = matvec(c.w_h(p), 4 * n, n, h);
    let b = c.bias(p);
    let mut h2 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    for j in 0..n {
        let pre = |blk: usize| ax[blk * n + j] + ah[blk * n + j] + b[blk * n + j];
        let i = sig(pre(0));
        let f = sig(pre(1));
        let g = pre(2).tanh();
        let o = sig(pre(3));
        c2[j] = f * cs[j] + i * g;
        h2[j] = o * c2[j].tanh();
    }
    (h2, c2)
}

pub fn gru_oracle(c: &Gru, p: &[f64], x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = c.hidden;
    let ax = matvec(c.w_x(p), 3 * n, c.input, x);
    let wh = c.w_h(p);
    let b = c.bias(p);
    let mut u = vec![0.0; n];
    let mut r = vec![0.0; n];
    for j in 0..n {
        let mut su = ax[j] + b[j];
        let mut sr = ax[n + j] + b[n + j];
        for l in 0..n {
            su += wh[j * n + l] * h[l];
            sr += wh[(n + j) * n + l] * h[l];
        }
        u[j] = sig(su);
        r[j] = sig(sr);
    }
    (0..n)
        .map(|j| {
            let mut s = ax[2 * n + j] + b[2 * n + j];
            for l in 0..n {
                s += wh[(2 * n + j) * n + l] * r[l] * h[l];
            }
            (1.0 - u[j]) * h[j] + u[j] * s.tanh()
        })
        .collect()
}

/// Returns `(h', g1, g2)`.
pub fn cfc_oracle(c: &Cfc, p: &[f64], x: &[f64], h: &[f64], t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (n, nb) = (c.hidden, c.backbone);
    let hx: Vec<f64> = h.iter().chain(x).copied().collect();
    let z: Vec<f64> = matvec(c.w_backbone(p), nb, hx.len(), &hx)
        .iter()
        .zip(c.b_backbone(p))
        .map(|(a, b)| (a + b).tanh())
        .collect();
    let heads: Vec<f64> = matvec(c.w_heads(p), 3 * n, nb, &z)
        .iter()
        .zip(c.b_heads(p))
        .map(|(a, b)| a + b)
        .collect();
    let mut out = vec![0.0; n];
    let mut g1 = vec![0.0; n];
    let mut g2 = vec![0.0; n];
    for j in 0..n {
        let f = heads[j];
        g1[j] = heads[n + j].tanh();
        g2[j] = heads[2 * n + j].tanh();
        let gate = sig(-f * t);
        out[j] = gate * g1[j] + (1.0 - gate) * g2[j];
    }
    (out, g1, g2)
}

pub fn naive_power(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (2..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            re * re + im * im
        })
        .collect()
}

pub fn brute_force(scores: &[(StatKind, Vec<f64>)], labels: &[u8]) -> (usize, StatKind, f64) {
    let mut best = (0usize, StatKind::Avg, f64::NAN);
    for (kind, s) in scores {
        for th in candidate_thresholds(s) {
            let correct = s.iter().zip(labels).filter(|(&v, &z)| u8::from(v >= th) == z).count();
            if correct > best.0 {
                best = (correct, *kind, th);
            }
        }
    }
    best
}

// Plain-array constant-velocity filter.
pub type M6 = [[f64; 6]; 6];

pub fn mul(a: &M6, b: &M6) -> M6 {
    let mut c = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            for k in 0..6 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

pub fn transpose(a: &M6) -> M6 {
    let mut t = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn inv3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, d) = ((i + 1) % 3, (i + 2) % 3);
            r[i][j] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) / det;
        }
    }
    r
}

pub struct Oracle {
    pub x: [f64; 6],
    pub p: M6,
}

impl Oracle {
    pub fn new(z: [f64; 3], r: f64, v0: f64) -> Self {
        let mut p = [[0.0; 6]; 6];
        for i in 0..3 {
            p[i][i] = r;
            p[i + 3][i + 3] = v0;
        }
        Self { x: [z[0], z[1], z[2], 0.0, 0.0, 0.0], p }
    }

    pub fn predict(&mut self, dt: f64, q: f64) {
        let mut f = [[0.0; 6]; 6];
        for i in 0..6 {
            f[i][i] = 1.0;
        }
        for i in 0..3 {
            f[i][i + 3] = dt;
        }
        let mut x = [0.0; 6];
        for i in 0..6 {
            for k in 0..6 {
                x[i] += f[i][k] * self.x[k];
            }
        }
        self.x = x;
        let mut p = mul(&mul(&f, &self.p), &transpose(&f));
        for i in 0..3 {
            p[i][i] += q * dt * dt * dt / 3.0;
            p[i][i + 3] += q * dt * dt / 2.0;
            p[i + 3][i] += q * dt * dt / 2.0;
            p[i + 3][i + 3] += q * dt;
        }
        self.p = p;
    }

    pub fn update(&mut self, z: [f64; 3], r: f64) {
        let mut s = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = self.p[i][j] + if i == j { r } else { 0.0 };
            }
        }
        let si = inv3(s);
        // K = P[:, :3] S^-1
        let mut k = [[0.0; 3]; 6];
        for i in 0..6 {
            for j in 0..3 {
                for l in 0..3 {
                    k[i][j] += self.p[i][l] * si[l][j];
                }
            }
        }
        let y: Vec<f64> = (0..3).map(|i| z[i] - self.x[i]).collect();
        for i in 0..6 {
            for j in 0..3 {
                self.x[i] += k[i][j] * y[j];
            }
        }
        // standard form (I - K H) P
        let mut p = self.p;
        for i in 0..6 {
            for j in 0..6 {
                let mut kh_p = 0.0;
                for l in 0..3 {
                    kh_p += k[i][l] * self.p[l][j];
                }
                p[i][j] = self.p[i][j] - kh_p;
            }
        }
        self.p = p;
    }
}
