use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::FeatureMode;
use super::window::PoseWindow;
use crate::error::{Error, Result};
use crate::numfmt::sig9;
use crate::sim::{FailureMode, Pose};

/// Window count per failure mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeCounts {
    pub nominal: usize,
    pub periodic: usize,
    pub lane_shift: usize,
    pub speeding: usize,
    pub reckless: usize,
}

impl ModeCounts {
    pub fn get(&self, mode: FailureMode) -> usize {
        match mode {
            FailureMode::Nominal => self.nominal,
            FailureMode::PeriodicControl => self.periodic,
            FailureMode::LaneShift => self.lane_shift,
            FailureMode::Speeding => self.speeding,
            FailureMode::Reckless => self.reckless,
        }
    }

    fn slot(&mut self, mode: FailureMode) -> &mut usize {
        match mode {
            FailureMode::Nominal => &mut self.nominal,
            FailureMode::PeriodicControl => &mut self.periodic,
            FailureMode::LaneShift => &mut self.lane_shift,
            FailureMode::Speeding => &mut self.speeding,
            FailureMode::Reckless => &mut self.reckless,
        }
    }

    pub fn add(&mut self, mode: FailureMode) {
        *self.slot(mode) += 1;
    }

    pub fn total(&self) -> usize {
        FailureMode::ALL.iter().map(|&m| self.get(m)).sum()
    }

    pub fn of(windows: &[PoseWindow]) -> Self {
        let mut c = Self::default();
        for w in windows {
            c.add(w.mode);
        }
        c
    }
}

/// Sidecar describing a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub rate: f64,
    pub seq_len: usize,
    pub stride: usize,
    pub feature_mode: FeatureMode,
    pub seed: u64,
    pub split_ratio: f64,
    pub logs: usize,
    pub train_counts: ModeCounts,
    pub val_counts: ModeCounts,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl DatasetMeta {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Data(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }
}

/// One window per line: `z,mode,L,x:y:theta;...`.
pub fn write_windows(path: &Path, windows: &[PoseWindow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for win in windows {
        write!(w, "{},{},{},", win.z, win.mode, win.len()).map_err(io)?;
        for (i, p) in win.poses.iter().enumerate() {
            if i > 0 {
                w.write_all(b";").map_err(io)?;
            }
            write!(w, "{}:{}:{}", sig9(p.x), sig9(p.y), sig9(p.theta)).map_err(io)?;
        }
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads windows written by [`write_windows`]. Timestamps are rebuilt as
/// `i / rate` and the source id is left empty.
pub fn read_windows(path: &Path, rate: f64) -> Result<Vec<PoseWindow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_window(&line, rate).map_err(|msg| Error::parse(i + 1, msg))?);
    }
    Ok(out)
}

fn parse_window(line: &str, rate: f64) -> std::result::Result<PoseWindow, String> {
    let mut head = line.splitn(4, ',');
    let (Some(z), Some(mode), Some(len), Some(body)) = (head.next(), head.next(), head.next(), head.next()) else {
        return Err("expected z,mode,L,poses".into());
    };
    let z: u8 = z.parse().map_err(|_| format!("bad label '{z}'"))?;
    let mode: FailureMode = mode.parse().map_err(|e: Error| e.to_string())?;
    let len: usize = len.parse().map_err(|_| format!("bad length '{len}'"))?;
    if z != mode.label() {
        return Err(format!("label {z} contradicts mode {mode}"));
    }
    let mut poses = Vec::with_capacity(len);
    for (k, triple) in body.split(';').enumerate() {
        let v: Vec<f64> = triple
            .split(':')
            .map(|s| s.parse::<f64>().map_err(|_| format!("bad number '{s}'")))
            .collect::<std::result::Result<_, _>>()?;
        if v.len() != 3 {
            return Err(format!("pose {k} has {} fields", v.len()));
        }
        poses.push(Pose::new(k as f64 / rate, v[0], v[1], v[2]));
    }
    if poses.len() != len {
        return Err(format!("declared {len} poses, found {}", poses.len()));
    }
    PoseWindow::new(poses, mode, "").map_err(|e| e.to_string())
}
