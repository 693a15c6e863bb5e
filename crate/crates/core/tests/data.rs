use failurenet::data::{featurize, make_windows, resample_poses, FeatureMode, PoseWindow};
use failurenet::sim::{
    run_scenario, FailureConfig, FailureMode, MapParams, Scenario, SimParams, TrackMap,
    TrajectoryLog, VehicleState,
};
use failurenet::Pose;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn resampling_error_within_interpolation_bound() {
    // y(t) = A sin(w t) sampled at 30 Hz, resampled at 7 Hz so nothing aligns
    let (amp, w, dt) = (0.4, 1.3, 1.0 / 30.0);
    let samples = (0..=300)
        .map(|i| {
            let t = i as f64 * dt;
            VehicleState {
                pose: Pose::new(t, 0.3 * t, amp * (w * t).sin(), 0.0),
                v: 0.0,
                delta: 0.0,
            }
        })
        .collect();
    let log = TrajectoryLog {
        vehicle_id: "a".into(),
        mode: FailureMode::Nominal,
        dt,
        samples,
        events: Vec::new(),
        truncated: false,
    };
    let bound = dt * dt * amp * w * w / 8.0;
    let out = resample_poses(&log, 7.0).unwrap();
    assert_eq!(out.len(), 71);
    let max_err = out
        .iter()
        .map(|p| (p.y - amp * (w * p.t).sin()).abs())
        .fold(0.0, f64::max);
    assert!(max_err <= bound * (1.0 + 1e-9), "{max_err} > {bound}");
    assert!(max_err > 0.0);
}

#[test]
fn mask_filter_matches_brute_force() {
    let map = TrackMap::minicity(&MapParams::default()).unwrap();
    for (k, route) in map.routes.iter().enumerate() {
        let sc = Scenario {
            vehicle_id: "m".into(),
            route: k,
            start_fraction: 0.0,
            duration: 90.0,
        };
        let log = run_scenario(&map, &sc, &FailureConfig::default(), &SimParams::default()).unwrap();
        let series = resample_poses(&log, 2.0).unwrap();
        let got = make_windows(&series, 10, 1, Some(&map), FailureMode::Nominal, &route.name).unwrap();
        let mut expected = Vec::new();
        for start in 0..series.len() - 9 {
            let last = series[start + 9];
            if last.x.hypot(last.y) > 0.5 {
                expected.push(start);
            }
        }
        assert_eq!(got.len(), expected.len(), "{}", route.name);
        for (w, &s) in got.iter().zip(&expected) {
            assert_eq!(w.poses[0], series[s]);
            assert!(w.is_uniform(2.0));
        }
        assert!(expected.len() < series.len() - 9, "{} never masked", route.name);
    }
}

fn random_window(rng: &mut ChaCha8Rng) -> PoseWindow {
    let mut x = rng.random_range(-4.0..4.0);
    let mut y = rng.random_range(-4.0..4.0);
    let mut th: f64 = rng.random_range(-3.0..3.0);
    let poses = (0..10)
        .map(|i| {
            th += rng.random_range(-0.4..0.4);
            x += 0.15 * th.cos();
            y += 0.15 * th.sin();
            Pose::new(i as f64 * 0.5, x, y, th)
        })
        .collect();
    PoseWindow::new(poses, FailureMode::Reckless, "r").unwrap()
}

#[test]
fn egocentric_features_ignore_rigid_motions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w = random_window(&mut rng);
    let base = featurize(&w, FeatureMode::Egocentric);
    for _ in 0..100 {
        let phi: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let (tx, ty) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let (s, c) = phi.sin_cos();
        let moved = PoseWindow::new(
            w.poses
                .iter()
                .map(|p| Pose::new(p.t, c * p.x - s * p.y + tx, s * p.x + c * p.y + ty, p.theta + phi))
                .collect(),
            w.mode,
            "r",
        )
        .unwrap();
        let f = featurize(&moved, FeatureMode::Egocentric);
        for (a, b) in base.rows.iter().zip(&f.rows) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-9, "{a:?} vs {b:?}");
            }
        }
    }
}

proptest! {
    #[test]
    fn features_are_finite_and_sized(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_window(&mut rng);
        for mode in [FeatureMode::Global, FeatureMode::Egocentric] {
            let f = featurize(&w, mode);
            prop_assert_eq!(f.len(), 10);
            prop_assert!(f.flat().iter().all(|v| v.is_finite()));
        }
    }
}
