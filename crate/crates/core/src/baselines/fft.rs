use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::data::PoseWindow;
use crate::sim::geometry::unwrap_angles;

/// Spectral powers `|X_k|^2` of a real signal for `k = 2 ..= n/2`.
pub fn spectral_power(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n < 4 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[2..=n / 2].iter().map(|c| c.norm_sqr()).collect()
}

/// Powers of the unwrapped yaw series of the window, modes 2 through L/2.
pub fn fft_yaw_power(window: &PoseWindow) -> Vec<f64> {
    let yaw: Vec<f64> = window.poses.iter().map(|p| p.theta).collect();
    spectral_power(&unwrap_angles(&yaw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{FailureMode, Pose};
    use std::f64::consts::PI;

    #[test]
    fn constant_signal_has_no_power() {
        assert!(spectral_power(&[0.7; 10]).iter().all(|&p| p < 1e-24));
    }

    #[test]
    fn mode_three_sinusoid() {
        let x: Vec<f64> = (0..10).map(|j| (2.0 * PI * 3.0 * j as f64 / 10.0).sin()).collect();
        let p = spectral_power(&x);
        assert_eq!(p.len(), 4);
        assert!((p[1] - 25.0).abs() < 1e-9);
        for (i, v) in p.iter().enumerate() {
            if i != 1 {
                assert!(*v < 1e-12, "bin {} power {v}", i + 2);
            }
        }
    }

    #[test]
    fn yaw_is_unwrapped_first() {
        let poses = (0..10)
            .map(|i| Pose::new(i as f64 * 0.5, i as f64 * 0.1, 0.0, std::f64::consts::PI - 0.01 + 0.005 * i as f64))
            .collect();
        let w = PoseWindow::new(poses, FailureMode::Nominal, "y").unwrap();
        // a slow linear ramp leaks little power into the higher modes
        assert!(fft_yaw_power(&w).iter().all(|&p| p < 1e-2));
    }
}
