//! Run configuration: one TOML file with a section per stage, plus
//! `key=value` overrides addressed by dotted paths.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{KalmanConfig, KalmanGrid, StatKind, MLP_HIDDEN};
use crate::data::FeatureMode;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, TrainConfig};
use crate::rnn::{CellKind, ModelSpec};
use crate::sim::{FailureConfig, MapParams, SimParams};

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub map: MapParams,
    pub sim: SimParams,
    pub failure: FailureConfig,
    pub data: DataConfig,
    pub train: TrainSection,
    pub models: ModelsConfig,
    pub baselines: BaselinesConfig,
    pub manager: ManagerSection,
    pub replay: ReplayConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            map: MapParams::default(),
            sim: SimParams::default(),
            failure: FailureConfig::default(),
            data: DataConfig::default(),
            train: TrainSection::default(),
            models: ModelsConfig::default(),
            baselines: BaselinesConfig::default(),
            manager: ManagerSection::default(),
            replay: ReplayConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Pose sampling rate, Hz.
    pub rate: f64,
    pub seq_len: usize,
    pub stride: usize,
    pub feature_mode: FeatureMode,
    pub split_ratio: f64,
    /// Simulated driving per failure mode, min.
    pub failure_minutes: f64,
    /// Simulated nominal driving, min.
    pub nominal_minutes: f64,
    /// Length of one recorded drive, s.
    pub log_seconds: f64,
    /// Keep the full-rate trajectory logs next to the dataset.
    pub keep_logs: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            rate: 2.0,
            seq_len: 10,
            stride: 1,
            feature_mode: FeatureMode::Increments,
            split_ratio: 0.8,
            failure_minutes: 30.0,
            nominal_minutes: 120.0,
            log_seconds: 112.5,
            keep_logs: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// Detectors to train or fit, by name.
    pub roster: Vec<String>,
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub epochs_lstm: usize,
    pub epochs_gru: usize,
    pub epochs_cfc: usize,
    /// Raw-pose MLP.
    pub epochs_mlp: usize,
    /// Speed+MLP and FFT+MLP.
    pub epochs_prefiltered: usize,
    /// Verify gradients before training and abort above this error.
    pub grad_check: bool,
    pub grad_tol: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            roster: ROSTER.iter().map(|s| s.to_string()).collect(),
            lr: 3e-3,
            batch_size: 64,
            patience: 100,
            epochs_lstm: 40,
            epochs_gru: 50,
            epochs_cfc: 200,
            epochs_mlp: 200,
            epochs_prefiltered: 50,
            grad_check: false,
            grad_tol: 1e-4,
        }
    }
}

/// Every detector name the pipeline knows, in report order.
pub const ROSTER: [&str; 9] = [
    "speed_threshold",
    "speed_mlp",
    "kalman",
    "fft_threshold",
    "fft_mlp",
    "mlp",
    "lstm",
    "gru",
    "cfc",
];

impl TrainSection {
    pub fn train_config(&self, epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            batch_size: self.batch_size,
            epochs,
            patience: self.patience,
            seed,
        }
    }

    pub fn epochs_for(&self, name: &str) -> usize {
        match name {
            "lstm" => self.epochs_lstm,
            "gru" => self.epochs_gru,
            "cfc" => self.epochs_cfc,
            "speed_mlp" | "fft_mlp" => self.epochs_prefiltered,
            _ => self.epochs_mlp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsConfig {
    pub lstm_hidden: usize,
    pub lstm_decoder: usize,
    pub gru_hidden: usize,
    pub gru_decoder: usize,
    pub cfc_hidden: usize,
    pub cfc_backbone: usize,
    pub cfc_decoder: usize,
    pub t_stamp: f64,
    pub mlp_hidden: Vec<usize>,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        let l = ModelSpec::default_for(CellKind::Lstm);
        let g = ModelSpec::default_for(CellKind::Gru);
        let c = ModelSpec::default_for(CellKind::Cfc);
        Self {
            lstm_hidden: l.hidden,
            lstm_decoder: l.decoder_hidden,
            gru_hidden: g.hidden,
            gru_decoder: g.decoder_hidden,
            cfc_hidden: c.hidden,
            cfc_backbone: c.backbone,
            cfc_decoder: c.decoder_hidden,
            t_stamp: c.t_stamp,
            mlp_hidden: MLP_HIDDEN.to_vec(),
        }
    }
}

impl ModelsConfig {
    pub fn spec(&self, kind: CellKind, data: &DataConfig, threshold: f64) -> ModelSpec {
        let (hidden, backbone, decoder_hidden) = match kind {
            CellKind::Lstm => (self.lstm_hidden, 0, self.lstm_decoder),
            CellKind::Gru => (self.gru_hidden, 0, self.gru_decoder),
            CellKind::Cfc => (self.cfc_hidden, self.cfc_backbone, self.cfc_decoder),
        };
        ModelSpec {
            kind,
            hidden,
            backbone,
            decoder_hidden,
            seq_len: data.seq_len,
            feature_mode: data.feature_mode,
            threshold,
            t_stamp: self.t_stamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselinesConfig {
    pub kalman_q: f64,
    pub kalman_r: f64,
    pub kalman_init_rate_var: f64,
    /// Starting residual threshold, m; replaced by the fitted value.
    pub delta_kappa: f64,
    pub kalman_aggregation: StatKind,
    pub kalman_warmup: usize,
    pub kalman_q_grid: Vec<f64>,
    pub kalman_r_grid: Vec<f64>,
}

impl Default for BaselinesConfig {
    fn default() -> Self {
        let k = KalmanConfig::default();
        let g = KalmanGrid::default();
        Self {
            kalman_q: k.q,
            kalman_r: k.r,
            kalman_init_rate_var: k.init_rate_var,
            delta_kappa: k.threshold,
            kalman_aggregation: k.aggregation,
            kalman_warmup: k.warmup,
            kalman_q_grid: g.q,
            kalman_r_grid: g.r,
        }
    }
}

impl BaselinesConfig {
    pub fn kalman(&self) -> KalmanConfig {
        KalmanConfig {
            q: self.kalman_q,
            r: self.kalman_r,
            init_rate_var: self.kalman_init_rate_var,
            threshold: self.delta_kappa,
            aggregation: self.kalman_aggregation,
            warmup: self.kalman_warmup,
        }
    }

    pub fn grid(&self) -> KalmanGrid {
        KalmanGrid {
            q: self.kalman_q_grid.clone(),
            r: self.kalman_r_grid.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManagerSection {
    /// Warning threshold on `z_hat`.
    pub z_bar: f64,
    pub listen: String,
    /// Seconds between evaluations of one vehicle.
    pub eval_period: f64,
    /// Silence after which a session is dropped, s.
    pub session_timeout: f64,
    /// Detector checkpoint served by default.
    pub detector: String,
}

impl Default for ManagerSection {
    fn default() -> Self {
        Self {
            z_bar: 0.5,
            listen: "127.0.0.1:7878".into(),
            eval_period: 1.0,
            session_timeout: 10.0,
            detector: "lstm".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplayConfig {
    /// Length of each two-vehicle run, s.
    pub run_seconds: f64,
    /// Seconds excluded on each side of a close encounter.
    pub handover_margin: f64,
    /// Distance under which two vehicles count as colliding, m.
    pub collision_distance: f64,
    /// Detectors to replay; empty means the best recurrent model.
    pub detectors: Vec<String>,
    /// Route of the vehicle carrying the failure.
    pub subject_route: String,
    /// Route of the nominal cross-traffic vehicle.
    pub cross_route: String,
    /// Route distance from each start to the intersection center, m.
    pub subject_lead: f64,
    pub cross_lead: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            run_seconds: 180.0,
            handover_margin: 1.0,
            collision_distance: 0.3,
            detectors: Vec::new(),
            subject_route: "straight-east-n".into(),
            cross_route: "straight-north-w".into(),
            subject_lead: 3.0,
            cross_lead: 3.6,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_value(toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?)
    }

    fn from_value(v: toml::Table) -> Result<Self> {
        let cfg: Config = toml::Value::Table(v).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (defaults when `None`) and applies `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_value(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.failure.validate().map_err(|e| Error::Config(e.to_string()))?;
        let d = &self.data;
        if !(d.rate > 0.0) || d.seq_len < 4 || d.stride == 0 {
            return Err(Error::Config("data: rate > 0, seq_len >= 4 and stride >= 1 required".into()));
        }
        if !(d.split_ratio > 0.0 && d.split_ratio < 1.0) {
            return Err(Error::Config(format!("data.split_ratio {} outside (0, 1)", d.split_ratio)));
        }
        if !(d.failure_minutes > 0.0 && d.nominal_minutes > 0.0 && d.log_seconds > 0.0) {
            return Err(Error::Config("data: durations must be positive".into()));
        }
        for name in &self.train.roster {
            if !ROSTER.contains(&name.as_str()) {
                return Err(Error::Config(format!("unknown detector '{name}' in train.roster")));
            }
        }
        self.train.train_config(1, 0).validate()?;
        self.baselines.kalman().validate()?;
        if self.baselines.kalman_q_grid.is_empty() || self.baselines.kalman_r_grid.is_empty() {
            return Err(Error::Config("Kalman grids must not be empty".into()));
        }
        let m = &self.manager;
        if !(m.z_bar > 0.0 && m.z_bar < 1.0) {
            return Err(Error::Config(format!("manager.z_bar {} outside (0, 1)", m.z_bar)));
        }
        if !(m.eval_period > 0.0 && m.session_timeout > 0.0) {
            return Err(Error::Config("manager periods must be positive".into()));
        }
        if !(self.map.r_mask > 0.0 && self.map.r_enter > self.map.r_mask) {
            return Err(Error::Config("map: need 0 < r_mask < r_enter".into()));
        }
        if !(self.replay.run_seconds > 0.0) {
            return Err(Error::Config("replay.run_seconds must be positive".into()));
        }
        Ok(())
    }
}

/// Sets `a.b.c = value` inside `table`. The value is read as TOML, falling
/// back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key '{key}'")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}': '{p}' is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
