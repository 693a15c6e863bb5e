use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cfc::Cfc;
use super::gru::Gru;
use super::lstm::Lstm;
use crate::data::{FeatureMode, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::nn::{Activation, Checkpoint, Dense, Matrix, Network, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
    Cfc,
}

impl CellKind {
    pub const ALL: [CellKind; 3] = [CellKind::Lstm, CellKind::Gru, CellKind::Cfc];

    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
            CellKind::Cfc => "cfc",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            CellKind::Lstm => "LSTM",
            CellKind::Gru => "GRU",
            CellKind::Cfc => "CfC",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CellKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown cell kind '{s}'")))
    }
}

/// Architecture of a recurrent classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: CellKind,
    pub hidden: usize,
    /// Backbone width; used by CfC only.
    #[serde(default)]
    pub backbone: usize,
    pub decoder_hidden: usize,
    pub seq_len: usize,
    pub feature_mode: FeatureMode,
    /// Warning threshold on `z_hat`.
    pub threshold: f64,
    /// CfC time input per step, s.
    #[serde(default = "default_t_stamp")]
    pub t_stamp: f64,
}

fn default_t_stamp() -> f64 {
    0.5
}

impl ModelSpec {
    /// Sizes chosen so learnable counts sit near 26k (LSTM), 21.6k (GRU) and
    /// 1.9k (CfC).
    pub fn default_for(kind: CellKind) -> Self {
        let (hidden, backbone, decoder_hidden) = match kind {
            CellKind::Lstm => (64, 0, 128),
            CellKind::Gru => (72, 0, 72),
            CellKind::Cfc => (16, 24, 16),
        };
        Self {
            kind,
            hidden,
            backbone,
            decoder_hidden,
            seq_len: 10,
            feature_mode: FeatureMode::Global,
            threshold: 0.5,
            t_stamp: default_t_stamp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.decoder_hidden == 0 {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        if self.kind == CellKind::Cfc && self.backbone == 0 {
            return Err(Error::Config("CfC needs a positive backbone width".into()));
        }
        if self.seq_len < 2 {
            return Err(Error::Config("sequence length must be at least 2".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if !(self.t_stamp >= 0.0 && self.t_stamp.is_finite()) {
            return Err(Error::Config("t_stamp must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Lstm(Lstm),
    Gru(Gru),
    Cfc(Cfc),
}

impl Cell {
    pub fn param_count(&self) -> usize {
        match self {
            Cell::Lstm(c) => c.param_count(),
            Cell::Gru(c) => c.param_count(),
            Cell::Cfc(c) => c.param_count(),
        }
    }

    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        match self {
            Cell::Lstm(c) => c.shapes(),
            Cell::Gru(c) => c.shapes(),
            Cell::Cfc(c) => c.shapes(),
        }
    }
}

/// Recurrent encoder over `seq_len` feature rows, a one-hidden-layer tanh
/// decoder on the final hidden state, and a sigmoid head.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureNetModel {
    pub spec: ModelSpec,
    pub cell: Cell,
    pub decoder: [Dense; 2],
    pub standardizer: Standardizer,
    pub params: Vec<f64>,
}

/// Exact learnable scalar count of a spec: cell plus decoder.
pub fn count_params(spec: &ModelSpec) -> usize {
    let (n, d, m) = (spec.hidden, spec.decoder_hidden, FEATURE_DIM);
    let cell = match spec.kind {
        CellKind::Lstm => 4 * n * (m + n + 1),
        CellKind::Gru => 3 * n * (m + n + 1),
        CellKind::Cfc => spec.backbone * (n + m + 1) + 3 * n * (spec.backbone + 1),
    };
    cell + d * (n + 1) + (d + 1)
}

impl FailureNetModel {
    /// All parameters zero.
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut cursor = 0;
        let cell = match spec.kind {
            CellKind::Lstm => Cell::Lstm(Lstm::alloc(&mut cursor, FEATURE_DIM, spec.hidden)),
            CellKind::Gru => Cell::Gru(Gru::alloc(&mut cursor, FEATURE_DIM, spec.hidden)),
            CellKind::Cfc => Cell::Cfc(Cfc::alloc(&mut cursor, FEATURE_DIM, spec.hidden, spec.backbone)),
        };
        let d0 = Dense::alloc(&mut cursor, spec.hidden, spec.decoder_hidden, Activation::Tanh);
        let d1 = Dense::alloc(&mut cursor, spec.decoder_hidden, 1, Activation::Identity);
        Ok(Self {
            spec,
            cell,
            decoder: [d0, d1],
            standardizer: Standardizer::identity(FEATURE_DIM),
            params: vec![0.0; cursor],
        })
    }

    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match &m.cell {
            Cell::Lstm(c) => c.init(&mut m.params, &mut rng),
            Cell::Gru(c) => c.init(&mut m.params, &mut rng),
            Cell::Cfc(c) => c.init(&mut m.params, &mut rng),
        }
        for l in &m.decoder {
            l.init(&mut m.params, &mut rng);
        }
        Ok(m)
    }

    pub fn kind(&self) -> CellKind {
        self.spec.kind
    }

    pub fn seq_len(&self) -> usize {
        self.spec.seq_len
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        let want = self.spec.seq_len * FEATURE_DIM;
        if x.cols != want {
            return Err(Error::ShapeMismatch {
                expected: vec![x.rows, want],
                actual: vec![x.rows, x.cols],
            });
        }
        Ok(())
    }

    /// Standardized inputs split per time step, each `batch x 3`.
    fn step_inputs(&self, x: &Matrix) -> Vec<Vec<f64>> {
        let z = self.standardizer.apply(x);
        (0..self.spec.seq_len)
            .map(|t| {
                let mut xt = Vec::with_capacity(x.rows * FEATURE_DIM);
                for r in 0..x.rows {
                    let o = r * x.cols + t * FEATURE_DIM;
                    xt.extend_from_slice(&z[o..o + FEATURE_DIM]);
                }
                xt
            })
            .collect()
    }

    fn decode(&self, h: &[f64], batch: usize) -> (Vec<f64>, Vec<f64>) {
        let [d0, d1] = &self.decoder;
        let mut hid = vec![0.0; batch * d0.output];
        d0.forward(&self.params, h, batch, &mut hid);
        let mut out = vec![0.0; batch];
        d1.forward(&self.params, &hid, batch, &mut out);
        (hid, out)
    }

    /// Final hidden state for each row of `x`.
    pub fn encode(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let xs = self.step_inputs(x);
        let p = &self.params;
        let b = x.rows;
        Ok(match &self.cell {
            Cell::Lstm(c) => c.forward(p, &xs, b).pop().map(|s| s.h),
            Cell::Gru(c) => c.forward(p, &xs, b).pop().map(|s| s.h),
            Cell::Cfc(c) => c.forward(p, &xs, self.spec.t_stamp, b).pop().map(|s| s.h),
        }
        .unwrap_or_default())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let s = &self.spec;
        let mut ck = Checkpoint::default();
        ck.set("model", "failurenet");
        ck.set("kind", s.kind);
        ck.set("input_dim", FEATURE_DIM);
        ck.set("hidden", s.hidden);
        ck.set("backbone", s.backbone);
        ck.set("decoder_hidden", s.decoder_hidden);
        ck.set("seq_len", s.seq_len);
        ck.set("feature_mode", s.feature_mode);
        ck.set_floats("threshold", &[s.threshold]);
        ck.set_floats("t_stamp", &[s.t_stamp]);
        ck.set_floats("input_mean", &self.standardizer.mean);
        ck.set_floats("input_scale", &self.standardizer.scale);
        ck.shapes = self.shapes();
        ck.params = self.params.clone();
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.get("model")? != "failurenet" {
            return Err(Error::Incompatible(format!("checkpoint holds a '{}' model", ck.get("model")?)));
        }
        if ck.parse::<usize>("input_dim")? != FEATURE_DIM {
            return Err(Error::Incompatible("checkpoint input dimension differs".into()));
        }
        let spec = ModelSpec {
            kind: ck.parse("kind")?,
            hidden: ck.parse("hidden")?,
            backbone: ck.parse("backbone")?,
            decoder_hidden: ck.parse("decoder_hidden")?,
            seq_len: ck.parse("seq_len")?,
            feature_mode: ck.parse("feature_mode")?,
            threshold: ck.float("threshold")?,
            t_stamp: ck.float("t_stamp")?,
        };
        let mut m = Self::zeros(spec)?;
        ck.expect_shapes(&m.shapes())?;
        m.standardizer = Standardizer {
            mean: ck.floats("input_mean")?,
            scale: ck.floats("input_scale")?,
        };
        let width = m.standardizer.dim();
        if (width != FEATURE_DIM && width != m.spec.seq_len * FEATURE_DIM) || m.standardizer.scale.len() != width {
            return Err(Error::Incompatible("input standardizer has the wrong width".into()));
        }
        m.params.copy_from_slice(&ck.params);
        Ok(m)
    }

    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut v = self.cell.shapes();
        for (i, l) in self.decoder.iter().enumerate() {
            v.push((format!("decoder{i}.w"), vec![l.output, l.input]));
            v.push((format!("decoder{i}.b"), vec![l.output]));
        }
        v
    }
}

impl Network for FailureNetModel {
    fn input_len(&self) -> usize {
        self.spec.seq_len * FEATURE_DIM
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn logits(&self, x: &Matrix) -> Result<Vec<f64>> {
        let h = self.encode(x)?;
        Ok(self.decode(&h, x.rows).1)
    }

    fn gradient(&self, x: &Matrix, loss: &dyn Fn(&[f64]) -> (f64, Vec<f64>)) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        let b = x.rows;
        let xs = self.step_inputs(x);
        let p = &self.params;
        let t_stamp = self.spec.t_stamp;
        let mut g = vec![0.0; p.len()];

        enum Trace {
            Lstm(Vec<super::lstm::LstmStep>),
            Gru(Vec<super::gru::GruStep>),
            Cfc(Vec<super::cfc::CfcStep>),
        }
        let (trace, h) = match &self.cell {
            Cell::Lstm(c) => {
                let s = c.forward(p, &xs, b);
                let h = s.last().unwrap().h.clone();
                (Trace::Lstm(s), h)
            }
            Cell::Gru(c) => {
                let s = c.forward(p, &xs, b);
                let h = s.last().unwrap().h.clone();
                (Trace::Gru(s), h)
            }
            Cell::Cfc(c) => {
                let s = c.forward(p, &xs, t_stamp, b);
                let h = s.last().unwrap().h.clone();
                (Trace::Cfc(s), h)
            }
        };
        let (hid, out) = self.decode(&h, b);
        let (value, mut d_out) = loss(&out);
        let [d0, d1] = &self.decoder;
        let mut d_hid = vec![0.0; b * d0.output];
        d1.backward(p, &hid, &out, &mut d_out, b, &mut g, Some(&mut d_hid));
        let mut dh = vec![0.0; b * self.spec.hidden];
        d0.backward(p, &h, &hid, &mut d_hid, b, &mut g, Some(&mut dh));
        match (&self.cell, &trace) {
            (Cell::Lstm(c), Trace::Lstm(s)) => c.backward(p, &xs, s, &dh, b, &mut g),
            (Cell::Gru(c), Trace::Gru(s)) => c.backward(p, &xs, s, &dh, b, &mut g),
            (Cell::Cfc(c), Trace::Cfc(s)) => c.backward(p, s, &dh, t_stamp, b, &mut g),
            _ => unreachable!("trace built from the same cell"),
        }
        Ok((value, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::sigmoid;

    #[test]
    fn default_sizes_near_reference_counts() {
        for (kind, target) in [(CellKind::Lstm, 26_049.0), (CellKind::Gru, 21_633.0), (CellKind::Cfc, 1_936.0)] {
            let spec = ModelSpec::default_for(kind);
            let m = FailureNetModel::zeros(spec).unwrap();
            assert_eq!(m.param_count(), count_params(&spec));
            let rel = (m.param_count() as f64 - target).abs() / target;
            assert!(rel <= 0.15, "{kind}: {} vs {target}", m.param_count());
        }
    }

    #[test]
    fn hand_counted_tiny_lstm() {
        let spec = ModelSpec {
            hidden: 1,
            decoder_hidden: 1,
            ..ModelSpec::default_for(CellKind::Lstm)
        };
        // cell 4 * (1 * (1 + 3) + 1) = 20; decoder 1 * 2 + 2 = 4
        assert_eq!(count_params(&spec), 24);
    }

    #[test]
    fn zero_model_predicts_half() {
        for kind in CellKind::ALL {
            let m = FailureNetModel::zeros(ModelSpec::default_for(kind)).unwrap();
            let x = Matrix::from_vec(1, 30, (0..30).map(|i| i as f64).collect()).unwrap();
            assert_eq!(sigmoid(m.logits(&x).unwrap()[0]), 0.5);
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let m = FailureNetModel::new(ModelSpec::default_for(CellKind::Cfc), 1).unwrap();
        assert!(m.logits(&Matrix::zeros(2, 27)).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = FailureNetModel::new(ModelSpec::default_for(CellKind::Gru), 5).unwrap();
        m.standardizer = Standardizer {
            mean: vec![0.1, 0.2, 0.3],
            scale: vec![2.0, 3.0, 4.0],
        };
        let back = FailureNetModel::from_checkpoint(&m.to_checkpoint()).unwrap();
        assert_eq!(back, m);
    }
}
