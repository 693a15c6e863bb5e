use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Layout;
use crate::config::Config;
use crate::data::{make_windows, resample_poses, split_dataset, write_windows, DatasetMeta, ModeCounts, PoseWindow};
use crate::error::{Error, Result};
use crate::sim::{run_scenario, FailureConfig, FailureMode, Scenario, TrackMap, TrajectoryLog};

/// One planned drive.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPlan {
    pub id: String,
    pub mode: FailureMode,
    pub route: usize,
    pub start_fraction: f64,
    pub duration: f64,
    pub seed: u64,
}

/// Seed of drive `k` of `mode`, a fixed offset from the master seed.
pub fn log_seed(master: u64, mode: FailureMode, k: usize) -> u64 {
    master
        .wrapping_mul(1_000_003)
        .wrapping_add(mode.index() as u64 * 100_000 + k as u64)
}

/// Drives per mode: the mode's minutes cut into `log_seconds` pieces, routes
/// assigned round-robin.
pub fn plan_logs(cfg: &Config, map: &TrackMap) -> Vec<LogPlan> {
    let mut plans = Vec::new();
    for mode in FailureMode::ALL {
        let minutes = if mode == FailureMode::Nominal {
            cfg.data.nominal_minutes
        } else {
            cfg.data.failure_minutes
        };
        let n = ((minutes * 60.0) / cfg.data.log_seconds).ceil().max(1.0) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(log_seed(cfg.seed, mode, 99_999));
        for k in 0..n {
            plans.push(LogPlan {
                id: format!("{}-{k:03}", mode.name()),
                mode,
                route: k % map.routes.len(),
                start_fraction: rng.random_range(0.0..1.0),
                duration: cfg.data.log_seconds,
                seed: log_seed(cfg.seed, mode, k),
            });
        }
    }
    plans
}

pub fn simulate(cfg: &Config, map: &TrackMap, plan: &LogPlan) -> Result<TrajectoryLog> {
    let scenario = Scenario {
        vehicle_id: plan.id.clone(),
        route: plan.route,
        start_fraction: plan.start_fraction,
        duration: plan.duration,
    };
    let fc = FailureConfig {
        mode: plan.mode,
        seed: plan.seed,
        ..cfg.failure.clone()
    };
    run_scenario(map, &scenario, &fc, &cfg.sim)
}

/// Masked sliding windows of one log at the dataset rate.
pub fn log_windows(cfg: &Config, map: &TrackMap, log: &TrajectoryLog) -> Result<Vec<PoseWindow>> {
    let series = resample_poses(log, cfg.data.rate)?;
    make_windows(&series, cfg.data.seq_len, cfg.data.stride, Some(map), log.mode, &log.vehicle_id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    pub logs: usize,
    pub truncated: usize,
    pub meta: DatasetMeta,
}

/// Simulates every planned drive, windows and splits them, and writes the
/// logs, `train.txt`, `val.txt` and `meta.toml`.
pub fn generate(cfg: &Config, out: &Path, force: bool) -> Result<GenerateSummary> {
    let layout = Layout::new(out);
    if layout.meta().exists() && !force {
        return Err(Error::Data(format!(
            "{} already holds a dataset; pass --force to overwrite",
            out.display()
        )));
    }
    layout.create()?;
    cfg.save(&layout.config())?;
    let map = TrackMap::minicity(&cfg.map)?;
    let plans = plan_logs(cfg, &map);
    let mut windows = Vec::new();
    let mut truncated = 0;
    for plan in &plans {
        let log = simulate(cfg, &map, plan)?;
        if log.truncated {
            log::warn!("{} left the map after {} samples", plan.id, log.samples.len());
            truncated += 1;
        }
        if cfg.data.keep_logs {
            log.write_csv(&layout.logs().join(format!("{}.csv", plan.id)))?;
        }
        windows.extend(log_windows(cfg, &map, &log)?);
    }
    let split = split_dataset(windows, cfg.data.split_ratio, cfg.seed)?;
    write_windows(&layout.train(), &split.train)?;
    write_windows(&layout.val(), &split.val)?;
    let meta = DatasetMeta {
        rate: cfg.data.rate,
        seq_len: cfg.data.seq_len,
        stride: cfg.data.stride,
        feature_mode: cfg.data.feature_mode,
        seed: cfg.seed,
        split_ratio: cfg.data.split_ratio,
        logs: plans.len(),
        train_counts: split.train_counts,
        val_counts: split.val_counts,
        warnings: split.warnings,
    };
    meta.write(&layout.meta())?;
    log::info!(
        "{} logs, {} train / {} val windows",
        plans.len(),
        meta.train_counts.total(),
        meta.val_counts.total()
    );
    Ok(GenerateSummary {
        logs: plans.len(),
        truncated,
        meta,
    })
}

/// Recounts windows per mode straight from saved logs.
pub fn recount_from_logs(cfg: &Config, logs_dir: &Path) -> Result<ModeCounts> {
    let map = TrackMap::minicity(&cfg.map)?;
    let mut counts = ModeCounts::default();
    let mut entries: Vec<_> = std::fs::read_dir(logs_dir)
        .map_err(|e| Error::io(logs_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    entries.sort();
    for p in entries {
        let log = TrajectoryLog::read_csv(&p)?;
        for w in log_windows(cfg, &map, &log)? {
            counts.add(w.mode);
        }
    }
    Ok(counts)
}
