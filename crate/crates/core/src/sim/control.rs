use super::geometry::Polyline;
use super::vehicle::{ControlCommand, VehicleState};

/// Pure-pursuit lateral controller with a constant speed target.
///
/// Keeps the last matched segment so projections stay local on long loops.
#[derive(Debug, Clone)]
pub struct PurePursuit {
    pub lookahead: f64,
    pub target_speed: f64,
    pub wheelbase: f64,
    progress: Option<usize>,
}

impl PurePursuit {
    pub fn new(lookahead: f64, target_speed: f64, wheelbase: f64) -> Self {
        Self {
            lookahead,
            target_speed,
            wheelbase,
            progress: None,
        }
    }

    pub fn command(&mut self, state: &VehicleState, route: &Polyline) -> ControlCommand {
        let pos = state.pose.position();
        let proj = match self.progress {
            Some(hint) => route.project_near(pos, hint, 12),
            None => route.project(pos),
        };
        self.progress = Some(proj.segment);

        if !route.is_closed() {
            let end = route.length();
            if proj.s >= end - 1e-9 {
                let last = route.point_at(end);
                let h = route.heading_at(end);
                let past = (pos[0] - last[0]) * h.cos() + (pos[1] - last[1]) * h.sin();
                if past >= 0.0 {
                    return ControlCommand::new(0.0, 0.0);
                }
            }
        }

        let target = route.point_at(proj.s + self.lookahead);
        let (s, c) = state.pose.theta.sin_cos();
        let dx = target[0] - pos[0];
        let dy = target[1] - pos[1];
        let fwd = c * dx + s * dy;
        let lat = -s * dx + c * dy;
        let dist = fwd.hypot(lat).max(1e-6);
        let alpha = lat.atan2(fwd);
        let delta = (2.0 * self.wheelbase * alpha.sin()).atan2(dist);
        ControlCommand::new(self.target_speed, delta)
    }
}
