use serde::{Deserialize, Serialize};

use super::geometry::wrap_angle;
use crate::error::{Error, Result};

/// Timestamped planar pose. `theta` lives in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(t: f64, x: f64, y: f64, theta: f64) -> Self {
        Self {
            t,
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub pose: Pose,
    /// Speed, m/s.
    pub v: f64,
    /// Steering angle, rad, left positive.
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    pub v_cmd: f64,
    pub delta_cmd: f64,
}

impl ControlCommand {
    pub fn new(v_cmd: f64, delta_cmd: f64) -> Self {
        Self { v_cmd, delta_cmd }
    }
}

/// Kinematic bicycle geometry and actuator limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub delta_max: f64,
    pub v_max: f64,
    /// First-order lag time constant for speed and steering; 0 tracks instantly.
    pub tau: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 0.26,
            delta_max: 0.4,
            v_max: 0.8,
            tau: 0.2,
        }
    }
}

/// Advances the rear-axle bicycle model by `dt`.
///
/// Speed and steering first relax toward the command through the actuator
/// lag and are clamped; the pose then follows the exact circular arc for the
/// resulting constant speed and steering over the step.
pub fn step_vehicle(
    state: &VehicleState,
    cmd: &ControlCommand,
    dt: f64,
    params: &VehicleParams,
) -> Result<VehicleState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !state.pose.is_finite() || !state.v.is_finite() || !state.delta.is_finite() {
        return Err(Error::NonFinite("vehicle state"));
    }
    if !cmd.v_cmd.is_finite() || !cmd.delta_cmd.is_finite() {
        return Err(Error::NonFinite("control command"));
    }
    let alpha = if params.tau > 0.0 {
        1.0 - (-dt / params.tau).exp()
    } else {
        1.0
    };
    let v = (state.v + alpha * (cmd.v_cmd - state.v)).clamp(0.0, params.v_max);
    let delta = (state.delta + alpha * (cmd.delta_cmd - state.delta))
        .clamp(-params.delta_max, params.delta_max);

    let omega = v / params.wheelbase * delta.tan();
    let th = state.pose.theta;
    let (x, y, theta) = if (omega * dt).abs() < 1e-12 {
        (
            state.pose.x + v * dt * th.cos(),
            state.pose.y + v * dt * th.sin(),
            th + omega * dt,
        )
    } else {
        let th1 = th + omega * dt;
        let r = v / omega;
        (
            state.pose.x + r * (th1.sin() - th.sin()),
            state.pose.y - r * (th1.cos() - th.cos()),
            th1,
        )
    };
    Ok(VehicleState {
        pose: Pose::new(state.pose.t + dt, x, y, theta),
        v,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instant() -> VehicleParams {
        VehicleParams {
            tau: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn zero_speed_keeps_pose() {
        let s = VehicleState {
            pose: Pose::new(0.0, 1.0, 2.0, 0.5),
            v: 0.0,
            delta: 0.3,
        };
        let n = step_vehicle(&s, &ControlCommand::new(0.0, 0.3), 1.0, &instant()).unwrap();
        assert_eq!((n.pose.x, n.pose.y, n.pose.theta), (1.0, 2.0, 0.5));
    }

    #[test]
    fn straight_line() {
        let s = VehicleState::default();
        let n = step_vehicle(&s, &ControlCommand::new(0.3, 0.0), 1.0, &instant()).unwrap();
        assert!((n.pose.x - 0.3).abs() < 1e-15);
        assert_eq!(n.pose.y, 0.0);
        assert_eq!(n.pose.theta, 0.0);
    }

    #[test]
    fn arc_matches_fine_step_oracle() {
        let p = instant();
        let cmd = ControlCommand::new(0.3, 0.2);
        let mut s = VehicleState::default();
        for _ in 0..100 {
            s = step_vehicle(&s, &cmd, 0.02, &p).unwrap();
        }
        // forward Euler with a tiny step, independent of the arc formula
        let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
        let h = 1e-4;
        let omega = 0.3 / p.wheelbase * 0.2f64.tan();
        for _ in 0..20_000 {
            x += 0.3 * th.cos() * h;
            y += 0.3 * th.sin() * h;
            th += omega * h;
        }
        let err = ((s.pose.x - x).powi(2) + (s.pose.y - y).powi(2)).sqrt();
        assert!(err < 1e-3, "err {err}");
    }

    #[test]
    fn limits_clamped() {
        let s = VehicleState::default();
        let n = step_vehicle(&s, &ControlCommand::new(5.0, 2.0), 0.02, &instant()).unwrap();
        assert_eq!(n.v, 0.8);
        assert_eq!(n.delta, 0.4);
        let n = step_vehicle(&s, &ControlCommand::new(-1.0, -2.0), 0.02, &instant()).unwrap();
        assert_eq!(n.v, 0.0);
        assert_eq!(n.delta, -0.4);
    }

    #[test]
    fn rejects_non_finite() {
        let s = VehicleState::default();
        assert!(step_vehicle(&s, &ControlCommand::new(f64::NAN, 0.0), 0.02, &instant()).is_err());
        assert!(step_vehicle(&s, &ControlCommand::new(0.1, 0.0), 0.0, &instant()).is_err());
    }
}
