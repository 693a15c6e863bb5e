mod oracle;

use failurenet::nn::{bce_mean, grad_check, CheckSubset, Matrix, Network};
use failurenet::rnn::{Cell, CellKind, FailureNetModel, ModelSpec};
use oracle::{cfc_oracle, gru_oracle, lstm_oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(kind: CellKind) -> ModelSpec {
    ModelSpec {
        hidden: 5,
        backbone: 7,
        decoder_hidden: 4,
        ..ModelSpec::default_for(kind)
    }
}

fn random_model(kind: CellKind, rng: &mut ChaCha8Rng) -> FailureNetModel {
    let mut m = FailureNetModel::zeros(small(kind)).unwrap();
    for p in &mut m.params {
        *p = rng.random_range(-1.0..1.0);
    }
    m
}

fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn cells_match_scalar_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let batch = 3;
    for draw in 0..100 {
        for kind in CellKind::ALL {
            let m = random_model(kind, &mut rng);
            let n = m.spec.hidden;
            let x = rand_vec(batch * 3, &mut rng);
            let h = rand_vec(batch * n, &mut rng);
            let cs = rand_vec(batch * n, &mut rng);
            let p = &m.params;
            let worst = match &m.cell {
                Cell::Lstm(c) => {
                    let s = c.step(p, &x, &h, &cs, batch);
                    (0..batch)
                        .map(|r| {
                            let (h2, c2) = lstm_oracle(c, p, &x[r * 3..r * 3 + 3], &h[r * n..(r + 1) * n], &cs[r * n..(r + 1) * n]);
                            max_diff(&s.h[r * n..(r + 1) * n], &h2).max(max_diff(&s.c[r * n..(r + 1) * n], &c2))
                        })
                        .fold(0.0, f64::max)
                }
                Cell::Gru(c) => {
                    let s = c.step(p, &x, &h, batch);
                    (0..batch)
                        .map(|r| max_diff(&s.h[r * n..(r + 1) * n], &gru_oracle(c, p, &x[r * 3..r * 3 + 3], &h[r * n..(r + 1) * n])))
                        .fold(0.0, f64::max)
                }
                Cell::Cfc(c) => {
                    let s = c.step(p, &x, &h, 0.5, batch);
                    (0..batch)
                        .map(|r| max_diff(&s.h[r * n..(r + 1) * n], &cfc_oracle(c, p, &x[r * 3..r * 3 + 3], &h[r * n..(r + 1) * n], 0.5).0))
                        .fold(0.0, f64::max)
                }
            };
            assert!(worst < 1e-12, "{kind} draw {draw}: {worst}");
        }
    }
}

#[test]
fn lstm_saturated_forget_gate_keeps_memory() {
    let mut m = FailureNetModel::zeros(small(CellKind::Lstm)).unwrap();
    let Cell::Lstm(c) = m.cell.clone() else { unreachable!() };
    let n = c.hidden;
    // biases: i gate 0 with g = 0 (zero candidate weights), f gate 40
    let b_off = c.param_count() - 4 * n;
    for j in 0..n {
        m.params[b_off + n + j] = 40.0;
    }
    let cs = vec![0.7; n];
    let s = c.step(&m.params, &[1.0, 2.0, 3.0], &vec![0.0; n], &cs, 1);
    assert!(max_diff(&s.c, &cs) < 1e-15);
    let zero = c.step(&vec![0.0; m.params.len()], &[1.0, 2.0, 3.0], &vec![0.0; n], &vec![0.0; n], 1);
    assert!(zero.h.iter().all(|&v| v == 0.0));
}

#[test]
fn gru_gate_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = random_model(CellKind::Gru, &mut rng);
    let Cell::Gru(c) = m.cell.clone() else { unreachable!() };
    let n = c.hidden;
    let h = rand_vec(n, &mut rng);
    let x = [0.3, -0.2, 0.1];
    let b_off = 3 * n * (c.input + n);

    // update gate pinned at 0: identity carry
    let mut p = m.params.clone();
    for k in 0..c.param_count() {
        let in_u_block = (k < 3 * n * c.input && k / c.input < n)
            || (k >= 3 * n * c.input && k < b_off && (k - 3 * n * c.input) / n < n);
        if in_u_block {
            p[k] = 0.0;
        }
    }
    for j in 0..n {
        p[b_off + j] = -40.0;
    }
    assert!(max_diff(&c.step(&p, &x, &h, 1).h, &h) < 1e-15);

    // update gate pinned at 1, zero candidate weights: h' = 0
    let mut p = vec![0.0; m.params.len()];
    for j in 0..n {
        p[b_off + j] = 40.0;
    }
    assert!(c.step(&p, &x, &h, 1).h.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn cfc_time_zero_and_saturation() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m = random_model(CellKind::Cfc, &mut rng);
    let Cell::Cfc(c) = m.cell.clone() else { unreachable!() };
    let n = c.hidden;
    let h = rand_vec(n, &mut rng);
    let x = [0.5, -1.0, 0.2];

    let s = c.step(&m.params, &x, &h, 0.0, 1);
    let (_, g1, g2) = cfc_oracle(&c, &m.params, &x, &h, 0.0);
    for j in 0..n {
        assert_eq!(s.gate[j], 0.5);
        assert_eq!(s.h[j], (s.heads[n + j] + s.heads[2 * n + j]) / 2.0);
        assert!((s.h[j] - (g1[j] + g2[j]) / 2.0).abs() < 1e-12);
    }

    // f scaled by 40 and forced positive; t = 1 pushes the gate to 0
    let mut p = m.params.clone();
    let w_heads_off = c.backbone * (n + c.input + 1);
    let b_heads_off = w_heads_off + 3 * n * c.backbone;
    for j in 0..n {
        for k in 0..c.backbone {
            p[w_heads_off + j * c.backbone + k] = 0.0;
        }
        p[b_heads_off + j] = 40.0;
    }
    let s = c.step(&p, &x, &h, 1.0, 1);
    let (_, _, g2) = cfc_oracle(&c, &p, &x, &h, 1.0);
    assert!(max_diff(&s.h, &g2) < 1e-15);
}

fn random_batch(rng: &mut ChaCha8Rng, rows: usize) -> (Matrix, Vec<f64>) {
    let x = Matrix::from_vec(rows, 30, rand_vec(rows * 30, rng)).unwrap();
    let y = (0..rows).map(|i| (i % 2) as f64).collect();
    (x, y)
}

#[test]
fn unrolled_gradients_match_finite_differences() {
    for kind in CellKind::ALL {
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut m = FailureNetModel::new(small(kind), seed).unwrap();
            let (x, y) = random_batch(&mut rng, 4);
            let loss = |d: &[f64]| bce_mean(d, &y);
            let err = grad_check(&mut m, &x, &loss, 1e-5, CheckSubset::All).unwrap();
            assert!(err < 1e-4, "{kind} seed {seed}: {err}");
        }
    }
}

#[test]
fn batch_rows_are_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kind in CellKind::ALL {
        let m = FailureNetModel::new(ModelSpec::default_for(kind), 3).unwrap();
        let (x, _) = random_batch(&mut rng, 5);
        let a = m.logits(&x).unwrap();
        let swapped = x.select_rows(&[1, 0, 2, 3, 4]);
        let b = m.logits(&swapped).unwrap();
        assert_eq!(a[0], b[1]);
        assert_eq!(a[1], b[0]);
        for (i, row) in (0..5).map(|i| (i, x.row(i))) {
            let z = m.predict(row).unwrap();
            assert!(z > 0.0 && z < 1.0);
            assert!((z - failurenet::nn::sigmoid(a[i])).abs() < 1e-12);
        }
    }
}
