use crate::error::{Error, Result};
use crate::sim::geometry::{angle_diff, wrap_angle};
use crate::sim::{FailureMode, Pose, TrackMap, TrajectoryLog};

/// Allowed deviation of consecutive window timestamps from `1 / rate`, s.
pub const WINDOW_DT_TOL: f64 = 1e-6;

/// `L` consecutive poses, oldest first, with the latent label of their log.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseWindow {
    pub poses: Vec<Pose>,
    pub z: u8,
    pub mode: FailureMode,
    /// Log the window was cut from. Empty when read back from a dataset file.
    pub source: String,
}

impl PoseWindow {
    pub fn new(poses: Vec<Pose>, mode: FailureMode, source: impl Into<String>) -> Result<Self> {
        if poses.len() < 2 {
            return Err(Error::Data("a window needs at least two poses".into()));
        }
        if poses.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("pose window"));
        }
        if poses.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::Data("window timestamps must increase".into()));
        }
        Ok(Self {
            poses,
            z: mode.label(),
            mode,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn last(&self) -> &Pose {
        self.poses.last().expect("non-empty window")
    }

    /// Mean sampling interval.
    pub fn dt(&self) -> f64 {
        let n = self.poses.len();
        (self.poses[n - 1].t - self.poses[0].t) / (n - 1) as f64
    }

    /// True when every gap equals `1 / rate` within [`WINDOW_DT_TOL`].
    pub fn is_uniform(&self, rate: f64) -> bool {
        let dt = 1.0 / rate;
        self.poses
            .windows(2)
            .all(|w| ((w[1].t - w[0].t) - dt).abs() <= WINDOW_DT_TOL)
    }
}

/// Samples the log at `rate` Hz starting at its first timestamp. Times that
/// coincide with a log sample (within 1e-9 s) take that sample; others are
/// interpolated linearly in position and along the shorter arc in heading.
pub fn resample_poses(log: &TrajectoryLog, rate: f64) -> Result<Vec<Pose>> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("resample rate {rate} must be positive")));
    }
    let poses: Vec<Pose> = log.poses().collect();
    let (Some(first), Some(last)) = (poses.first(), poses.last()) else {
        return Ok(Vec::new());
    };
    let (t0, t_end) = (first.t, last.t);
    let mut out = Vec::new();
    for k in 0.. {
        let t = t0 + k as f64 / rate;
        if t > t_end + 1e-9 {
            break;
        }
        let j = poses.partition_point(|p| p.t < t - 1e-9);
        let pose = if j >= poses.len() {
            *last
        } else if (poses[j].t - t).abs() <= 1e-9 || j == 0 {
            poses[j]
        } else {
            let (a, b) = (&poses[j - 1], &poses[j]);
            let w = (t - a.t) / (b.t - a.t);
            Pose {
                t,
                x: a.x + w * (b.x - a.x),
                y: a.y + w * (b.y - a.y),
                theta: wrap_angle(a.theta + w * angle_diff(a.theta, b.theta)),
            }
        };
        out.push(Pose { t, ..pose });
    }
    Ok(out)
}

/// Sliding windows of `len` poses advanced by `stride`. Windows whose final
/// pose lies inside the mask disc of `mask` are dropped. Returns nothing when
/// the series is shorter than `len`.
pub fn make_windows(
    series: &[Pose],
    len: usize,
    stride: usize,
    mask: Option<&TrackMap>,
    mode: FailureMode,
    source: &str,
) -> Result<Vec<PoseWindow>> {
    if len < 2 {
        return Err(Error::InvalidArgument(format!("window length {len} must be at least 2")));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let mut out = Vec::new();
    if series.len() < len {
        return Ok(out);
    }
    for start in (0..=series.len() - len).step_by(stride) {
        let poses = &series[start..start + len];
        let end = poses[len - 1].position();
        if let Some(map) = mask {
            if map.distance_to_center(end) <= map.r_mask {
                continue;
            }
        }
        out.push(PoseWindow::new(poses.to_vec(), mode, source)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::VehicleState;

    fn log_from(poses: Vec<Pose>) -> TrajectoryLog {
        TrajectoryLog {
            vehicle_id: "t".into(),
            mode: FailureMode::Nominal,
            dt: 0.02,
            samples: poses
                .into_iter()
                .map(|pose| VehicleState {
                    pose,
                    v: 0.0,
                    delta: 0.0,
                })
                .collect(),
            events: Vec::new(),
            truncated: false,
        }
    }

    fn series(n: usize) -> Vec<Pose> {
        (0..n)
            .map(|i| Pose::new(i as f64 * 0.5, 2.0 + 0.1 * i as f64, 0.0, 0.0))
            .collect()
    }

    #[test]
    fn aligned_rate_picks_every_25th_sample() {
        let poses: Vec<Pose> = (0..=500)
            .map(|i| Pose::new(i as f64 * 0.02, (i as f64).sin(), i as f64, 0.01 * i as f64))
            .collect();
        let out = resample_poses(&log_from(poses.clone()), 2.0).unwrap();
        assert_eq!(out.len(), 21);
        for (k, p) in out.iter().enumerate() {
            let src = poses[25 * k];
            assert_eq!((p.x, p.y, p.theta), (src.x, src.y, src.theta));
        }
    }

    #[test]
    fn constant_log_stays_constant() {
        let poses: Vec<Pose> = (0..100).map(|i| Pose::new(i as f64 * 0.03, 1.0, -2.0, 3.0)).collect();
        let out = resample_poses(&log_from(poses), 2.0).unwrap();
        assert!(out.iter().all(|p| p.x == 1.0 && p.y == -2.0 && p.theta == 3.0));
    }

    #[test]
    fn empty_log_gives_empty_series() {
        assert!(resample_poses(&log_from(Vec::new()), 2.0).unwrap().is_empty());
    }

    #[test]
    fn heading_interpolates_across_the_branch_cut() {
        let a = Pose::new(0.0, 0.0, 0.0, 3.1);
        let b = Pose::new(0.3, 0.0, 0.0, -3.1);
        let c = Pose::new(0.6, 0.0, 0.0, -3.0);
        let out = resample_poses(&log_from(vec![a, b, c]), 4.0).unwrap();
        // t = 0.25 sits 5/6 of the way from a to b along the short arc
        let expected = wrap_angle(3.1 + (5.0 / 6.0) * angle_diff(3.1, -3.1));
        assert!((out[1].theta - expected).abs() < 1e-12);
        assert!(out[1].theta.abs() > 3.0);
    }

    #[test]
    fn window_counts() {
        assert_eq!(make_windows(&series(10), 10, 1, None, FailureMode::Nominal, "s").unwrap().len(), 1);
        assert_eq!(make_windows(&series(14), 10, 1, None, FailureMode::Nominal, "s").unwrap().len(), 5);
        assert_eq!(make_windows(&series(14), 10, 2, None, FailureMode::Nominal, "s").unwrap().len(), 3);
        assert!(make_windows(&series(9), 10, 1, None, FailureMode::Nominal, "s").unwrap().is_empty());
    }

    #[test]
    fn labels_follow_mode() {
        let w = make_windows(&series(10), 10, 1, None, FailureMode::LaneShift, "s").unwrap();
        assert_eq!(w[0].z, 1);
        assert!(w[0].is_uniform(2.0));
        let w = make_windows(&series(10), 10, 1, None, FailureMode::Nominal, "s").unwrap();
        assert_eq!(w[0].z, 0);
    }
}
