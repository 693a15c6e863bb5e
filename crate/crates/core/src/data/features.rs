use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::window::PoseWindow;
use crate::error::{Error, Result};
use crate::sim::geometry::{unwrap_angles, wrap_angle};

pub const FEATURE_DIM: usize = 3;

/// Input representation fed to the detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Map-frame poses. Heading is unwrapped inside the window, starting
    /// from the wrapped heading of the first pose.
    Global,
    /// Poses expressed in the frame of the first pose of the window.
    Egocentric,
    /// First row as in `Global`, then per-step map-frame differences
    /// `(dx, dy, dtheta)`. Carries the same information as `Global`.
    Increments,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Global => "global",
            FeatureMode::Egocentric => "egocentric",
            FeatureMode::Increments => "increments",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(FeatureMode::Global),
            "egocentric" => Ok(FeatureMode::Egocentric),
            "increments" => Ok(FeatureMode::Increments),
            _ => Err(Error::InvalidArgument(format!("unknown feature mode '{s}'"))),
        }
    }
}

/// One `[x, y, theta]` row per pose, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeq {
    pub rows: Vec<[f64; FEATURE_DIM]>,
    pub mode: FeatureMode,
}

impl FeatureSeq {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row-major copy, `len * 3` values.
    pub fn flat(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }
}

pub fn featurize(window: &PoseWindow, mode: FeatureMode) -> FeatureSeq {
    let thetas: Vec<f64> = window.poses.iter().map(|p| p.theta).collect();
    let unwrapped = unwrap_angles(&thetas);
    let rows = match mode {
        FeatureMode::Global => {
            let base = wrap_angle(unwrapped[0]);
            window
                .poses
                .iter()
                .zip(&unwrapped)
                .map(|(p, th)| [p.x, p.y, base + (th - unwrapped[0])])
                .collect()
        }
        FeatureMode::Egocentric => {
            let p0 = window.poses[0];
            let (s, c) = p0.theta.sin_cos();
            window
                .poses
                .iter()
                .zip(&unwrapped)
                .map(|(p, th)| {
                    let dx = p.x - p0.x;
                    let dy = p.y - p0.y;
                    [c * dx + s * dy, -s * dx + c * dy, th - unwrapped[0]]
                })
                .collect()
        }
        FeatureMode::Increments => {
            let p = &window.poses;
            let mut rows = Vec::with_capacity(p.len());
            rows.push([p[0].x, p[0].y, wrap_angle(unwrapped[0])]);
            for i in 1..p.len() {
                rows.push([p[i].x - p[i - 1].x, p[i].y - p[i - 1].y, unwrapped[i] - unwrapped[i - 1]]);
            }
            rows
        }
    };
    FeatureSeq { rows, mode }
}
