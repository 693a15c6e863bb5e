//! End-to-end stages: simulate and window, train, evaluate, replay.

mod checks;
mod evaluate;
mod generate;
mod replay;
mod train;

pub use checks::{check_report, Check};
pub use evaluate::{evaluate, load_detectors, EvaluateOutcome};
pub use generate::{generate, log_seed, log_windows, plan_logs, recount_from_logs, simulate, GenerateSummary, LogPlan};
pub use replay::{handover_mask, replay, replay_streams, run_pair, window_at, ReplayOutcome, ReplayRun, CROSS_ID, SUBJECT_ID};
pub use train::{grad_check_all, train, GradCheckRow, TrainOutcome};

use std::path::{Path, PathBuf};

use crate::data::{read_windows, DatasetMeta, PoseWindow};
use crate::error::{Error, Result};

/// File locations under one output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn logs(&self) -> PathBuf {
        self.root.join("logs")
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn train(&self) -> PathBuf {
        self.dataset().join("train.txt")
    }

    pub fn val(&self) -> PathBuf {
        self.dataset().join("val.txt")
    }

    pub fn meta(&self) -> PathBuf {
        self.dataset().join("meta.toml")
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.models().join(format!("{name}.ckpt"))
    }

    pub fn history(&self, name: &str) -> PathBuf {
        self.models().join(format!("{name}_history.csv"))
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn replay(&self) -> PathBuf {
        self.root.join("replay")
    }

    pub fn create(&self) -> Result<()> {
        for d in [self.logs(), self.dataset(), self.models(), self.report()] {
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        Ok(())
    }
}

/// Dataset written by [`generate`].
#[derive(Debug, Clone)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub train: Vec<PoseWindow>,
    pub val: Vec<PoseWindow>,
}

pub fn load_dataset(layout: &Layout) -> Result<Dataset> {
    let meta_path = layout.meta();
    if !meta_path.exists() {
        return Err(Error::Data(format!("no dataset at {}; run generate first", meta_path.display())));
    }
    let meta = DatasetMeta::read(&meta_path)?;
    Ok(Dataset {
        train: read_windows(&layout.train(), meta.rate)?,
        val: read_windows(&layout.val(), meta.rate)?,
        meta,
    })
}
