use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::threshold::{fit_threshold, StatKind, ThresholdFit};
use crate::data::PoseWindow;
use crate::error::{Error, Result};
use crate::nn::Checkpoint;
use crate::sim::geometry::unwrap_angles;

pub type State = SVector<f64, 6>;
pub type Cov = SMatrix<f64, 6, 6>;
type Obs = SMatrix<f64, 3, 6>;

/// Constant-velocity filter over `(x, y, theta)` and their rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanConfig {
    /// Spectral density of the white-noise acceleration.
    pub q: f64,
    /// Measurement variance of each observed component.
    pub r: f64,
    /// Prior variance of the unobserved rates.
    pub init_rate_var: f64,
    /// Residual threshold, m.
    pub threshold: f64,
    pub aggregation: StatKind,
    /// Leading steps whose residuals are discarded.
    pub warmup: usize,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            q: 0.01,
            r: 1e-4,
            init_rate_var: 1.0,
            threshold: 0.2,
            aggregation: StatKind::Max,
            warmup: 2,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q", self.q), ("r", self.r), ("init_rate_var", self.init_rate_var), ("threshold", self.threshold)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("Kalman {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self, seq_len: usize) -> Checkpoint {
        let mut ck = Checkpoint::default();
        ck.set("model", "kalman");
        ck.set_floats("q", &[self.q]);
        ck.set_floats("r", &[self.r]);
        ck.set_floats("init_rate_var", &[self.init_rate_var]);
        ck.set_floats("threshold", &[self.threshold]);
        ck.set("aggregation", self.aggregation);
        ck.set("warmup", self.warmup);
        ck.set("seq_len", seq_len);
        ck
    }

    /// The config and the window length it was fitted for.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, usize)> {
        if ck.get("model")? != "kalman" {
            return Err(Error::Incompatible(format!("checkpoint holds a '{}' model", ck.get("model")?)));
        }
        let cfg = Self {
            q: ck.float("q")?,
            r: ck.float("r")?,
            init_rate_var: ck.float("init_rate_var")?,
            threshold: ck.float("threshold")?,
            aggregation: ck.parse("aggregation")?,
            warmup: ck.parse("warmup")?,
        };
        cfg.validate()?;
        Ok((cfg, ck.parse("seq_len")?))
    }
}

/// Filter state and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanFilter {
    pub x: State,
    pub p: Cov,
}

fn transition(dt: f64) -> Cov {
    let mut f = Cov::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

fn process_noise(dt: f64, q: f64) -> Cov {
    let mut m = Cov::zeros();
    for i in 0..3 {
        m[(i, i)] = q * dt.powi(3) / 3.0;
        m[(i, i + 3)] = q * dt.powi(2) / 2.0;
        m[(i + 3, i)] = q * dt.powi(2) / 2.0;
        m[(i + 3, i + 3)] = q * dt;
    }
    m
}

fn observation() -> Obs {
    let mut h = Obs::zeros();
    for i in 0..3 {
        h[(i, i)] = 1.0;
    }
    h
}

impl KalmanFilter {
    /// Starts at the first observation with zero rates.
    pub fn new(z0: [f64; 3], cfg: &KalmanConfig) -> Self {
        let mut p = Cov::zeros();
        for i in 0..3 {
            p[(i, i)] = cfg.r;
            p[(i + 3, i + 3)] = cfg.init_rate_var;
        }
        Self {
            x: State::from_column_slice(&[z0[0], z0[1], z0[2], 0.0, 0.0, 0.0]),
            p,
        }
    }

    pub fn predict(&mut self, dt: f64, q: f64) {
        let f = transition(dt);
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + process_noise(dt, q);
    }

    /// Joseph-form update. `step` only labels a failure.
    pub fn update(&mut self, z: [f64; 3], r: f64, step: usize) -> Result<()> {
        let h = observation();
        let rm = Matrix3::identity() * r;
        let y = Vector3::from_column_slice(&z) - h * self.x;
        let s = h * self.p * h.transpose() + rm;
        let chol = s.cholesky().ok_or(Error::NotPositiveDefinite { step })?;
        // K = P H^T S^-1
        let k = chol.solve(&(h * self.p)).transpose();
        self.x += k * y;
        let a = Cov::identity() - k * h;
        self.p = a * self.p * a.transpose() + k * rm * k.transpose();
        self.p = (self.p + self.p.transpose()) * 0.5;
        if self.p.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite { step });
        }
        Ok(())
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x[0], self.x[1]]
    }
}

/// Observations of a window with the heading unwrapped.
fn observations(window: &PoseWindow) -> Vec<[f64; 3]> {
    let yaw = unwrap_angles(&window.poses.iter().map(|p| p.theta).collect::<Vec<_>>());
    window.poses.iter().zip(yaw).map(|(p, th)| [p.x, p.y, th]).collect()
}

/// Planar distance between each observation and the filter's one-step
/// prediction, after the warm-up steps.
pub fn kalman_residuals(window: &PoseWindow, cfg: &KalmanConfig) -> Result<Vec<f64>> {
    let z = observations(window);
    let mut kf = KalmanFilter::new(z[0], cfg);
    let mut out = Vec::with_capacity(z.len().saturating_sub(cfg.warmup));
    for t in 1..z.len() {
        let dt = window.poses[t].t - window.poses[t - 1].t;
        kf.predict(dt, cfg.q);
        if t >= cfg.warmup {
            let [px, py] = kf.position();
            out.push((z[t][0] - px).hypot(z[t][1] - py));
        }
        kf.update(z[t], cfg.r, t)?;
    }
    Ok(out)
}

/// Aggregated residual of a window.
pub fn kalman_score(window: &PoseWindow, cfg: &KalmanConfig) -> Result<f64> {
    let r = kalman_residuals(window, cfg)?;
    if r.is_empty() {
        return Ok(0.0);
    }
    Ok(cfg.aggregation.reduce(&r))
}

/// 1 when the aggregated residual exceeds the threshold.
pub fn kalman_detect(window: &PoseWindow, cfg: &KalmanConfig) -> Result<u8> {
    Ok(u8::from(kalman_score(window, cfg)? > cfg.threshold))
}

/// Noise scales searched jointly with the residual threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanGrid {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
}

impl Default for KalmanGrid {
    fn default() -> Self {
        Self {
            q: vec![0.01, 0.001, 0.1, 1.0],
            r: vec![1e-4, 1e-5, 1e-3],
        }
    }
}

/// Grid search over `(q, r)`, aggregation and threshold for the highest
/// accuracy on `windows`. Earlier grid entries win ties; max aggregation
/// wins ties over avg.
pub fn fit_kalman(windows: &[PoseWindow], labels: &[u8], grid: &KalmanGrid, base: &KalmanConfig) -> Result<(KalmanConfig, ThresholdFit)> {
    let mut best: Option<(KalmanConfig, ThresholdFit)> = None;
    for &q in &grid.q {
        for &r in &grid.r {
            let cfg = KalmanConfig { q, r, ..*base };
            cfg.validate()?;
            let mut maxes = Vec::with_capacity(windows.len());
            let mut avgs = Vec::with_capacity(windows.len());
            for w in windows {
                let res = kalman_residuals(w, &cfg)?;
                maxes.push(StatKind::Max.reduce(&res).max(0.0));
                avgs.push(if res.is_empty() { 0.0 } else { StatKind::Avg.reduce(&res) });
            }
            let fit = fit_threshold(&[(StatKind::Max, maxes), (StatKind::Avg, avgs)], labels)?;
            if best.as_ref().is_none_or(|(_, b)| fit.correct > b.correct) {
                // the detector flags strictly above; a midpoint never equals a score
                let threshold = fit.threshold.max(f64::MIN_POSITIVE);
                best = Some((KalmanConfig { aggregation: fit.kind, threshold, ..cfg }, fit));
            }
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty Kalman grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{FailureMode, Pose};

    fn window(f: impl Fn(f64) -> (f64, f64, f64)) -> PoseWindow {
        let poses = (0..10)
            .map(|i| {
                let t = i as f64 * 0.5;
                let (x, y, th) = f(t);
                Pose::new(t, x, y, th)
            })
            .collect();
        PoseWindow::new(poses, FailureMode::Nominal, "k").unwrap()
    }

    #[test]
    fn straight_motion_converges() {
        let w = window(|t| (1.0 + 0.3 * t, 2.0, 0.0));
        let r = kalman_residuals(&w, &KalmanConfig::default()).unwrap();
        assert_eq!(r.len(), 8);
        assert!(r.iter().all(|&v| (0.0..1e-3).contains(&v)), "{r:?}");
        assert_eq!(kalman_detect(&w, &KalmanConfig::default()).unwrap(), 0);
    }

    #[test]
    fn velocity_step_spikes() {
        let w = window(|t| if t <= 2.5 { (0.3 * t, 0.0, 0.0) } else { (0.75 + 0.3 * (t - 2.5), 0.3 * (t - 2.5), 0.0) });
        let r = kalman_residuals(&w, &KalmanConfig::default()).unwrap();
        // index of pose t = 3.0 is 6; residuals start at pose 2
        let spike = r[4];
        let before = r[..4].iter().copied().fold(0.0, f64::max);
        assert!(spike > 5.0 * before, "{r:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = KalmanConfig { q: 0.3, threshold: 0.0123, aggregation: StatKind::Avg, ..Default::default() };
        let mut buf = Vec::new();
        cfg.to_checkpoint(10).write_to(&mut buf).unwrap();
        let back = KalmanConfig::from_checkpoint(&Checkpoint::read_from(&buf[..]).unwrap()).unwrap();
        assert_eq!(back, (cfg, 10));
    }

    #[test]
    fn bad_noise_rejected() {
        let cfg = KalmanConfig { r: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
