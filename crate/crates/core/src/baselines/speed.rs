use crate::data::PoseWindow;

/// Finite-difference speeds `|p_t - p_{t-1}| / dt`, `L - 1` values.
pub fn window_speeds(window: &PoseWindow) -> Vec<f64> {
    window
        .poses
        .windows(2)
        .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y) / (w[1].t - w[0].t))
        .collect()
}
