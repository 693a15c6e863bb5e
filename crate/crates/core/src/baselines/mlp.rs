use std::fmt;
use std::str::FromStr;

use super::fft::fft_yaw_power;
use super::speed::window_speeds;
use crate::data::{featurize, FeatureMode, PoseWindow, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::nn::{Activation, Checkpoint, Matrix, Mlp, Network, Standardizer};

/// Transform applied to a window before the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreFilter {
    None,
    Speed,
    Fft,
}

impl PreFilter {
    pub const ALL: [PreFilter; 3] = [PreFilter::None, PreFilter::Speed, PreFilter::Fft];

    pub fn as_str(self) -> &'static str {
        match self {
            PreFilter::None => "none",
            PreFilter::Speed => "speed",
            PreFilter::Fft => "fft",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            PreFilter::None => "MLP",
            PreFilter::Speed => "Speed+MLP",
            PreFilter::Fft => "FFT+MLP",
        }
    }

    /// Network input width for windows of `seq_len` poses.
    pub fn input_len(self, seq_len: usize) -> usize {
        match self {
            PreFilter::None => FEATURE_DIM * seq_len,
            PreFilter::Speed => seq_len - 1,
            PreFilter::Fft => (seq_len / 2).saturating_sub(1),
        }
    }

    pub fn apply(self, window: &PoseWindow, mode: FeatureMode) -> Vec<f64> {
        match self {
            PreFilter::None => featurize(window, mode).flat(),
            PreFilter::Speed => window_speeds(window),
            PreFilter::Fft => fft_yaw_power(window),
        }
    }
}

impl fmt::Display for PreFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PreFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PreFilter::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown pre-filter '{s}'")))
    }
}

/// Hidden widths shared by the three variants.
pub const MLP_HIDDEN: [usize; 2] = [100, 50];

/// A feed-forward classifier behind a pre-filter.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpDetector {
    pub prefilter: PreFilter,
    pub feature_mode: FeatureMode,
    pub seq_len: usize,
    pub threshold: f64,
    pub net: Mlp,
}

impl MlpDetector {
    pub fn new(prefilter: PreFilter, feature_mode: FeatureMode, seq_len: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let input = prefilter.input_len(seq_len);
        if input == 0 || seq_len < 2 {
            return Err(Error::Config(format!("sequence length {seq_len} too short for the {prefilter} pre-filter")));
        }
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Ok(Self {
            prefilter,
            feature_mode,
            seq_len,
            threshold: 0.5,
            net: Mlp::new(&sizes, Activation::Relu, seed)?,
        })
    }

    pub fn name(&self) -> &'static str {
        self.prefilter.display_name()
    }

    /// Network input row for a window.
    pub fn inputs(&self, window: &PoseWindow) -> Result<Vec<f64>> {
        if window.len() != self.seq_len {
            return Err(Error::ShapeMismatch {
                expected: vec![self.seq_len],
                actual: vec![window.len()],
            });
        }
        Ok(self.prefilter.apply(window, self.feature_mode))
    }

    /// Input rows for a set of windows.
    pub fn input_matrix(&self, windows: &[PoseWindow]) -> Result<Matrix> {
        let cols = self.net.input_len();
        let mut data = Vec::with_capacity(windows.len() * cols);
        for w in windows {
            data.extend(self.inputs(w)?);
        }
        Matrix::from_vec(windows.len(), cols, data)
    }

    pub fn z_hat(&self, window: &PoseWindow) -> Result<f64> {
        self.net.predict(&self.inputs(window)?)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        ck.set("model", "mlp");
        ck.set("prefilter", self.prefilter);
        ck.set("feature_mode", self.feature_mode);
        ck.set("seq_len", self.seq_len);
        ck.set_floats("threshold", &[self.threshold]);
        let sizes: Vec<String> = self.net.sizes.iter().map(usize::to_string).collect();
        ck.set("sizes", sizes.join(" "));
        ck.set("hidden_act", self.net.hidden_act);
        ck.set_floats("input_mean", &self.net.standardizer.mean);
        ck.set_floats("input_scale", &self.net.standardizer.scale);
        ck.shapes = self.shapes();
        ck.params = self.net.params.clone();
        ck
    }

    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        self.net
            .layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| [(format!("layer{i}.w"), vec![l.output, l.input]), (format!("layer{i}.b"), vec![l.output])])
            .collect()
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.get("model")? != "mlp" {
            return Err(Error::Incompatible(format!("checkpoint holds a '{}' model", ck.get("model")?)));
        }
        let prefilter: PreFilter = ck.parse("prefilter")?;
        let seq_len: usize = ck.parse("seq_len")?;
        let sizes = ck
            .get("sizes")?
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|_| Error::Incompatible(format!("bad layer size '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        if sizes.first() != Some(&prefilter.input_len(seq_len)) || sizes.last() != Some(&1) {
            return Err(Error::Incompatible(format!("layer sizes {sizes:?} do not fit the {prefilter} pre-filter")));
        }
        let mut net = Mlp::zeros(&sizes, ck.parse("hidden_act")?)?;
        let standardizer = Standardizer {
            mean: ck.floats("input_mean")?,
            scale: ck.floats("input_scale")?,
        };
        if standardizer.dim() != sizes[0] || standardizer.scale.len() != sizes[0] {
            return Err(Error::Incompatible("input standardizer has the wrong width".into()));
        }
        net.standardizer = standardizer;
        let mut d = Self {
            prefilter,
            feature_mode: ck.parse("feature_mode")?,
            seq_len,
            threshold: ck.float("threshold")?,
            net,
        };
        ck.expect_shapes(&d.shapes())?;
        d.net.params.copy_from_slice(&ck.params);
        Ok(d)
    }
}
