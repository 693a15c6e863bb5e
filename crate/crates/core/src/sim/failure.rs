//! Failure-mode injectors acting on controller outputs and planned paths.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::vehicle::ControlCommand;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    Nominal,
    PeriodicControl,
    LaneShift,
    Speeding,
    Reckless,
}

impl FailureMode {
    pub const ALL: [FailureMode; 5] = [
        FailureMode::Nominal,
        FailureMode::PeriodicControl,
        FailureMode::LaneShift,
        FailureMode::Speeding,
        FailureMode::Reckless,
    ];

    /// Column order of the accuracy tables.
    pub const REPORT_ORDER: [FailureMode; 5] = [
        FailureMode::PeriodicControl,
        FailureMode::LaneShift,
        FailureMode::Reckless,
        FailureMode::Speeding,
        FailureMode::Nominal,
    ];

    /// Latent failure label: 1 = Unsafe.
    pub fn label(self) -> u8 {
        u8::from(self != FailureMode::Nominal)
    }

    /// Position in [`FailureMode::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FailureMode::Nominal => "nominal",
            FailureMode::PeriodicControl => "periodic",
            FailureMode::LaneShift => "lane_shift",
            FailureMode::Speeding => "speeding",
            FailureMode::Reckless => "reckless",
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            FailureMode::Nominal => "Nominal",
            FailureMode::PeriodicControl => "Periodic",
            FailureMode::LaneShift => "LaneShift",
            FailureMode::Speeding => "Speeding",
            FailureMode::Reckless => "Reckless",
        }
    }

    pub fn from_column(s: &str) -> Option<Self> {
        FailureMode::ALL.into_iter().find(|m| m.column() == s)
    }
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FailureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FailureMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown failure mode '{s}'")))
    }
}

/// Knobs of the stochastic reckless-driver surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecklessParams {
    /// Burst onset rate while calm, 1/s.
    pub rate: f64,
    /// Mean burst duration, s.
    pub mean_burst: f64,
    /// Stationary std of the steering perturbation, rad.
    pub steer_std: f64,
    /// Ornstein-Uhlenbeck correlation time, s.
    pub steer_tau: f64,
    pub surge: [f64; 2],
    pub brake: [f64; 2],
    pub surge_prob: f64,
}

impl Default for RecklessParams {
    fn default() -> Self {
        Self {
            rate: 0.5,
            mean_burst: 2.5,
            steer_std: 0.2,
            steer_tau: 0.6,
            surge: [1.4, 1.8],
            brake: [0.3, 0.6],
            surge_prob: 0.5,
        }
    }
}

impl RecklessParams {
    /// Long-run fraction of time spent inside bursts.
    pub fn duty_cycle(&self) -> f64 {
        if self.rate <= 0.0 {
            0.0
        } else {
            self.mean_burst / (self.mean_burst + 1.0 / self.rate)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FailureConfig {
    pub mode: FailureMode,
    /// Steering noise amplitude, rad.
    pub a_delta: f64,
    /// Steering noise period, s.
    pub t_delta: f64,
    /// Speed noise hold duration, s.
    pub t_v: f64,
    /// Uniform bounds of the held speed noise, m/s.
    pub a: f64,
    pub b: f64,
    /// Lateral lane-line shift, m.
    pub s_bar: f64,
    pub v_speeding: f64,
    pub reckless: RecklessParams,
    pub seed: u64,
}

impl Default for FailureConfig {
    fn default() -> Self {
        Self {
            mode: FailureMode::Nominal,
            a_delta: 0.15,
            t_delta: 4.0,
            t_v: 2.0,
            a: -0.15,
            b: 0.15,
            s_bar: 0.1,
            v_speeding: 0.5,
            reckless: RecklessParams::default(),
            seed: 0,
        }
    }
}

impl FailureConfig {
    pub fn with_mode(mode: FailureMode) -> Self {
        Self {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.a <= self.b) {
            return bad("failure config: a must be <= b");
        }
        if !(self.t_delta > 0.0) || !(self.t_v > 0.0) {
            return bad("failure config: T_delta and T_v must be positive");
        }
        if !(self.s_bar >= 0.0) {
            return bad("failure config: s_bar must be >= 0");
        }
        let r = &self.reckless;
        if r.rate < 0.0 || r.mean_burst <= 0.0 || r.steer_std < 0.0 || r.steer_tau <= 0.0 {
            return bad("failure config: reckless parameters out of range");
        }
        if !(0.0..=1.0).contains(&r.surge_prob) {
            return bad("failure config: surge_prob must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Piecewise-constant speed noise: a fresh `U[a, b]` draw every `period`
/// seconds, starting at t = 0.
#[derive(Debug, Clone)]
pub struct SpeedHold {
    period: f64,
    low: f64,
    high: f64,
    rng: ChaCha8Rng,
    index: i64,
    value: f64,
}

impl SpeedHold {
    pub fn new(cfg: &FailureConfig, rng: ChaCha8Rng) -> Self {
        Self {
            period: cfg.t_v,
            low: cfg.a,
            high: cfg.b,
            rng,
            index: -1,
            value: 0.0,
        }
    }

    pub fn value_at(&mut self, t: f64) -> f64 {
        let k = (t / self.period + 1e-9).floor() as i64;
        while self.index < k {
            self.value = if self.high > self.low {
                self.rng.random_range(self.low..=self.high)
            } else {
                self.low
            };
            self.index += 1;
        }
        self.value
    }
}

/// Periodic steering and held speed noise at time `t`.
pub fn periodic_noise(t: f64, cfg: &FailureConfig, hold: &mut SpeedHold) -> (f64, f64) {
    let eps_delta = cfg.a_delta * (2.0 * PI * t / cfg.t_delta).sin();
    (eps_delta, hold.value_at(t))
}

/// Additive noise on the controller output.
pub fn inject_control_failure(cmd: ControlCommand, eps_delta: f64, eps_v: f64) -> ControlCommand {
    ControlCommand::new(cmd.v_cmd + eps_v, cmd.delta_cmd + eps_delta)
}

pub fn speeding_override(cmd: ControlCommand, cfg: &FailureConfig) -> ControlCommand {
    ControlCommand::new(cfg.v_speeding, cmd.delta_cmd)
}

/// Seeded stand-in for a human driving recklessly.
///
/// Alternates calm stretches (nominal command passes through) with bursts
/// whose onset is Poisson with `rate` and whose length is exponential with
/// mean `mean_burst`. Inside a burst the steering carries an
/// Ornstein-Uhlenbeck perturbation and the speed is scaled by a surge or
/// brake factor drawn once per burst.
#[derive(Debug, Clone)]
pub struct RecklessPolicy {
    params: RecklessParams,
    rng: ChaCha8Rng,
    remaining: f64,
    steer: f64,
    factor: f64,
}

impl RecklessPolicy {
    pub fn new(params: RecklessParams, rng: ChaCha8Rng) -> Self {
        Self {
            params,
            rng,
            remaining: 0.0,
            steer: 0.0,
            factor: 1.0,
        }
    }

    pub fn in_burst(&self) -> bool {
        self.remaining > 0.0
    }

    pub fn apply(&mut self, nominal: ControlCommand, dt: f64) -> ControlCommand {
        let p = self.params;
        if !self.in_burst() {
            if p.rate <= 0.0 {
                return nominal;
            }
            let onset = 1.0 - (-p.rate * dt).exp();
            if self.rng.random::<f64>() >= onset {
                return nominal;
            }
            self.remaining = Exp::new(1.0 / p.mean_burst)
                .expect("positive burst mean")
                .sample(&mut self.rng);
            self.steer = 0.0;
            self.factor = if self.rng.random::<f64>() < p.surge_prob {
                self.rng.random_range(p.surge[0]..=p.surge[1])
            } else {
                self.rng.random_range(p.brake[0]..=p.brake[1])
            };
        }
        let decay = (-dt / p.steer_tau).exp();
        let noise: f64 = StandardNormal.sample(&mut self.rng);
        self.steer = self.steer * decay + p.steer_std * (1.0 - decay * decay).sqrt() * noise;
        self.remaining -= dt;
        ControlCommand::new(nominal.v_cmd * self.factor, nominal.delta_cmd + self.steer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn steering_noise_values() {
        let cfg = FailureConfig::with_mode(FailureMode::PeriodicControl);
        let mut hold = SpeedHold::new(&cfg, rng(1));
        assert_eq!(periodic_noise(0.0, &cfg, &mut hold).0, 0.0);
        let (q, _) = periodic_noise(cfg.t_delta / 4.0, &cfg, &mut hold);
        assert!((q - cfg.a_delta).abs() < 1e-15);
    }

    #[test]
    fn speed_hold_is_piecewise_constant_within_bounds() {
        let cfg = FailureConfig::with_mode(FailureMode::PeriodicControl);
        let mut hold = SpeedHold::new(&cfg, rng(3));
        let dt = 0.02;
        let steps = (100.0 * cfg.t_v / dt).round() as usize;
        let mut prev: Option<f64> = None;
        for i in 0..steps {
            let t = i as f64 * dt;
            let (_, v) = periodic_noise(t, &cfg, &mut hold);
            assert!(v >= cfg.a && v <= cfg.b);
            if let Some(p) = prev {
                if p != v {
                    let k = t / cfg.t_v;
                    assert!((k - k.round()).abs() < 1e-9, "changed at t={t}");
                }
            }
            prev = Some(v);
        }
    }

    #[test]
    fn additive_injection() {
        let c = ControlCommand::new(0.3, 0.0);
        assert_eq!(inject_control_failure(c, 0.0, 0.0), c);
        let out = inject_control_failure(c, 0.1, 0.05);
        assert!((out.v_cmd - 0.35).abs() < 1e-15);
        assert_eq!(out.delta_cmd, 0.1);
    }

    #[test]
    fn speeding_replaces_speed_only() {
        let cfg = FailureConfig::with_mode(FailureMode::Speeding);
        assert_eq!(
            speeding_override(ControlCommand::new(0.3, 0.1), &cfg),
            ControlCommand::new(0.5, 0.1)
        );
        assert_eq!(
            speeding_override(ControlCommand::new(0.5, -0.2), &cfg),
            ControlCommand::new(0.5, -0.2)
        );
    }

    #[test]
    fn reckless_zero_rate_is_identity() {
        let params = RecklessParams {
            rate: 0.0,
            ..Default::default()
        };
        let mut pol = RecklessPolicy::new(params, rng(9));
        for i in 0..1000 {
            let c = ControlCommand::new(0.3, (i as f64 * 0.01).sin() * 0.1);
            assert_eq!(pol.apply(c, 0.02), c);
        }
    }

    #[test]
    fn reckless_is_deterministic() {
        let run = || {
            let mut pol = RecklessPolicy::new(RecklessParams::default(), rng(11));
            (0..2000)
                .map(|_| pol.apply(ControlCommand::new(0.3, 0.0), 0.02))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn reckless_duty_cycle_long_run() {
        let params = RecklessParams::default();
        let mut pol = RecklessPolicy::new(params, rng(2024));
        let dt = 0.02;
        let steps = (600.0 / dt) as usize;
        let mut inside = 0usize;
        for _ in 0..steps {
            pol.apply(ControlCommand::new(0.3, 0.0), dt);
            if pol.in_burst() {
                inside += 1;
            }
        }
        let frac = inside as f64 / steps as f64;
        let duty = params.duty_cycle();
        assert!((frac - duty).abs() <= 0.1 * duty, "frac {frac} duty {duty}");
    }

    #[test]
    fn mode_names_round_trip() {
        for m in FailureMode::ALL {
            assert_eq!(m.name().parse::<FailureMode>().unwrap(), m);
            assert_eq!(FailureMode::from_column(m.column()), Some(m));
        }
        assert_eq!(FailureMode::Nominal.label(), 0);
        assert_eq!(FailureMode::Reckless.label(), 1);
    }
}
