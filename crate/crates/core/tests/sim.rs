use failurenet::sim::geometry::unwrap_angles;
use failurenet::sim::{
    run_scenario, FailureConfig, FailureMode, MapParams, RouteKind, Scenario, SimParams,
    TrackMap, Zone,
};

fn map() -> TrackMap {
    TrackMap::minicity(&MapParams::default()).unwrap()
}

fn scenario(map: &TrackMap, route: &str, duration: f64) -> Scenario {
    Scenario {
        vehicle_id: "v1".into(),
        route: map.routes.iter().position(|r| r.name == route).unwrap(),
        start_fraction: 0.1,
        duration,
    }
}

fn cfg(mode: FailureMode, seed: u64) -> FailureConfig {
    FailureConfig {
        seed,
        ..FailureConfig::with_mode(mode)
    }
}

/// Arc-length windows of the route that lie on straight stretches away from
/// the intersection, where turning transients have settled.
fn on_straight(map: &TrackMap, route: &str, p: [f64; 2]) -> bool {
    let path = &map.route(route).unwrap().path;
    let pr = path.project(p);
    let h0 = path.heading_at(pr.s - 0.6);
    let h1 = path.heading_at(pr.s + 0.6);
    let h = path.heading_at(pr.s);
    (h0 - h).abs() < 1e-9 && (h1 - h).abs() < 1e-9 && map.zone_of(p) != Zone::Masked
}

#[test]
fn nominal_tracks_within_five_centimetres() {
    let map = map();
    for route in ["straight-east-n", "left-north"] {
        let log = run_scenario(&map, &scenario(&map, route, 60.0), &cfg(FailureMode::Nominal, 1), &SimParams::default()).unwrap();
        assert!(!log.truncated);
        let path = &map.route(route).unwrap().path;
        let max_err = log
            .poses()
            .map(|p| path.project(p.position()).lateral.abs())
            .fold(0.0, f64::max);
        assert!(max_err < 0.05, "{route}: max cross-track {max_err}");
    }
}

#[test]
fn nominal_speed_and_straight_tracking() {
    let map = map();
    for (i, r) in map.routes.iter().enumerate() {
        let sc = Scenario {
            vehicle_id: "n".into(),
            route: i,
            start_fraction: 0.3,
            duration: 60.0,
        };
        let log = run_scenario(&map, &sc, &cfg(FailureMode::Nominal, 2), &SimParams::default()).unwrap();
        for s in log.samples.iter().skip(100) {
            assert!((0.25..=0.35).contains(&s.v), "{}: speed {}", r.name, s.v);
            if on_straight(&map, &r.name, s.pose.position()) {
                let e = r.path.project(s.pose.position()).lateral.abs();
                assert!(e < 0.05, "{}: straight cross-track {e}", r.name);
            }
        }
        // intersection turns route through the mask disc
        if r.kind != RouteKind::Straight {
            assert!(!log.events.is_empty());
        }
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let map = map();
    let sc = scenario(&map, "right-north", 30.0);
    for mode in FailureMode::ALL {
        let a = run_scenario(&map, &sc, &cfg(mode, 42), &SimParams::default()).unwrap();
        let b = run_scenario(&map, &sc, &cfg(mode, 42), &SimParams::default()).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_to(&mut ba).unwrap();
        b.write_to(&mut bb).unwrap();
        assert_eq!(ba, bb, "{mode}");
    }
}

#[test]
fn lane_shift_offsets_half_the_shift() {
    let map = map();
    let route = "straight-east-n";
    let c = cfg(FailureMode::LaneShift, 5);
    let log = run_scenario(&map, &scenario(&map, route, 120.0), &c, &SimParams::default()).unwrap();
    let path = &map.route(route).unwrap().path;
    let offsets: Vec<f64> = log
        .poses()
        .filter(|p| on_straight(&map, route, p.position()))
        .map(|p| path.project(p.position()).lateral)
        .collect();
    let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
    assert!((mean - 0.05).abs() <= 0.01, "mean offset {mean}");
    assert!(mean >= 0.4 * c.s_bar && mean <= 0.6 * c.s_bar);
}

fn dft_power(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in signal.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            re * re + im * im
        })
        .collect()
}

#[test]
fn periodic_steering_dominates_yaw_spectrum() {
    let map = map();
    let c = FailureConfig {
        a_delta: 0.15,
        t_delta: 4.0,
        ..cfg(FailureMode::PeriodicControl, 8)
    };
    // a straight stretch: eastbound along y = -0.15 from x = -3 to x = 3
    let route = "straight-east-n";
    let path = &map.route(route).unwrap().path;
    let start = path.project([-3.0, -0.15]).s / path.length();
    let sc = Scenario {
        vehicle_id: "p".into(),
        route: map.routes.iter().position(|r| r.name == route).unwrap(),
        start_fraction: start,
        duration: 16.0,
    };
    let log = run_scenario(&map, &sc, &c, &SimParams::default()).unwrap();
    let yaw: Vec<f64> = unwrap_angles(&log.poses().map(|p| p.theta).collect::<Vec<_>>());
    let yaw = &yaw[..yaw.len() - 1];
    let mean = yaw.iter().sum::<f64>() / yaw.len() as f64;
    let centered: Vec<f64> = yaw.iter().map(|v| v - mean).collect();
    let power = dft_power(&centered);
    let n = centered.len();
    let df = 1.0 / (n as f64 * log.dt);
    let expected_bin = ((1.0 / c.t_delta) / df).round() as usize;
    let peak = (1..n / 2).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap();
    assert_eq!(peak, expected_bin);
}

#[test]
fn speeding_turns_harder_than_nominal() {
    let map = map();
    let sc = scenario(&map, "left-east", 60.0);
    let max_yaw_rate = |mode| {
        let log = run_scenario(&map, &sc, &cfg(mode, 3), &SimParams::default()).unwrap();
        log.samples
            .windows(2)
            .map(|w| {
                let d = failurenet::sim::geometry::angle_diff(w[0].pose.theta, w[1].pose.theta);
                (d / log.dt).abs()
            })
            .fold(0.0, f64::max)
    };
    let nominal = max_yaw_rate(FailureMode::Nominal);
    let speeding = max_yaw_rate(FailureMode::Speeding);
    assert!(speeding > nominal, "speeding {speeding} nominal {nominal}");
}

#[test]
fn csv_round_trip_keeps_nine_digits() {
    let map = map();
    let log = run_scenario(&map, &scenario(&map, "left-east", 5.0), &cfg(FailureMode::Reckless, 4), &SimParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    log.write_csv(&path).unwrap();
    let back = failurenet::sim::TrajectoryLog::read_csv(&path).unwrap();
    assert_eq!(back.samples.len(), log.samples.len());
    assert_eq!(back.mode, FailureMode::Reckless);
    assert!((back.dt - 0.02).abs() < 1e-9);
    for (a, b) in log.samples.iter().zip(&back.samples) {
        assert!((a.pose.x - b.pose.x).abs() <= 1e-8 * a.pose.x.abs().max(1.0));
    }
}
