use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::control::PurePursuit;
use super::failure::{
    inject_control_failure, periodic_noise, speeding_override, FailureConfig, FailureMode,
    RecklessPolicy, SpeedHold,
};
use super::geometry::shift_centerline;
use super::track::{TrackMap, Zone};
use super::vehicle::{step_vehicle, Pose, VehicleParams, VehicleState};
use crate::error::{Error, Result};
use crate::numfmt::sig9;

pub const LOG_HEADER: &str = "t,x,y,theta,v,delta,mode,vehicle_id";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub vehicle: VehicleParams,
    /// Integration step, s.
    pub dt: f64,
    pub target_speed: f64,
    pub lookahead: f64,
    /// Std of white steering jitter added every step, rad.
    pub steer_jitter: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            vehicle: VehicleParams::default(),
            dt: 0.02,
            target_speed: 0.3,
            lookahead: 0.3,
            steer_jitter: 0.0,
        }
    }
}

/// One vehicle driving one route.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub vehicle_id: String,
    /// Index into [`TrackMap::routes`].
    pub route: usize,
    /// Starting point as a fraction of the route length.
    pub start_fraction: f64,
    /// Seconds of driving.
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoneEventKind {
    EnteredMask,
    ExitedMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZoneEvent {
    pub sample: usize,
    pub kind: ZoneEventKind,
}

/// Dense recording of one drive. The failure mode holds for the whole log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub vehicle_id: String,
    pub mode: FailureMode,
    pub dt: f64,
    pub samples: Vec<VehicleState>,
    pub events: Vec<ZoneEvent>,
    /// Set when the vehicle left the map and the log was cut short.
    pub truncated: bool,
}

impl TrajectoryLog {
    pub fn poses(&self) -> impl Iterator<Item = Pose> + '_ {
        self.samples.iter().map(|s| s.pose)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{LOG_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                sig9(s.pose.t),
                sig9(s.pose.x),
                sig9(s.pose.y),
                sig9(s.pose.theta),
                sig9(s.v),
                sig9(s.delta),
                self.mode,
                self.vehicle_id
            )?;
        }
        Ok(())
    }

    /// Reads a log written by [`TrajectoryLog::write_csv`]. Zone events are
    /// not persisted and come back empty.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == LOG_HEADER => {}
            _ => return Err(Error::parse(1, "missing trajectory log header")),
        }
        let mut samples = Vec::new();
        let mut mode = None;
        let mut vehicle_id = None;
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 8 {
                return Err(Error::parse(i + 1, format!("expected 8 columns, got {}", cols.len())));
            }
            let num = |k: usize| {
                cols[k]
                    .parse::<f64>()
                    .map_err(|e| Error::parse(i + 1, format!("column {k}: {e}")))
            };
            let m: FailureMode = cols[6].parse()?;
            if *mode.get_or_insert(m) != m {
                return Err(Error::parse(i + 1, "failure mode changes within a log"));
            }
            vehicle_id.get_or_insert_with(|| cols[7].to_string());
            samples.push(VehicleState {
                pose: Pose {
                    t: num(0)?,
                    x: num(1)?,
                    y: num(2)?,
                    theta: num(3)?,
                },
                v: num(4)?,
                delta: num(5)?,
            });
        }
        let dt = if samples.len() >= 2 {
            (samples.last().unwrap().pose.t - samples[0].pose.t) / (samples.len() - 1) as f64
        } else {
            0.0
        };
        Ok(Self {
            vehicle_id: vehicle_id.unwrap_or_default(),
            mode: mode.unwrap_or(FailureMode::Nominal),
            dt,
            samples,
            events: Vec::new(),
            truncated: false,
        })
    }
}

/// Vehicle ids: non-empty ASCII alphanumerics, `_`, `-` or `.`.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

/// Drives one vehicle through `scenario` with the failure in `cfg` active
/// for the whole run. Output depends only on the inputs and `cfg.seed`.
pub fn run_scenario(
    map: &TrackMap,
    scenario: &Scenario,
    cfg: &FailureConfig,
    sim: &SimParams,
) -> Result<TrajectoryLog> {
    cfg.validate()?;
    if !(scenario.duration > 0.0) {
        return Err(Error::InvalidArgument("scenario duration must be positive".into()));
    }
    if !valid_id(&scenario.vehicle_id) {
        return Err(Error::InvalidArgument(format!(
            "vehicle id '{}' must be non-empty ASCII alphanumerics, '_', '-' or '.'",
            scenario.vehicle_id
        )));
    }
    let route = map.routes.get(scenario.route).ok_or_else(|| {
        Error::InvalidArgument(format!("route index {} out of range", scenario.route))
    })?;
    let path = if cfg.mode == FailureMode::LaneShift {
        shift_centerline(&route.path, cfg.s_bar)?
    } else {
        route.path.clone()
    };

    let stream = |k: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
        r.set_stream(k);
        r
    };
    let mut hold = SpeedHold::new(cfg, stream(1));
    let mut reckless = RecklessPolicy::new(cfg.reckless, stream(2));
    let mut jitter_rng = stream(3);
    let jitter = Normal::new(0.0, sim.steer_jitter.max(0.0)).expect("finite jitter");

    let s0 = scenario.start_fraction.rem_euclid(1.0) * path.length();
    let start = path.point_at(s0);
    let mut state = VehicleState {
        pose: Pose::new(0.0, start[0], start[1], path.heading_at(s0)),
        v: sim.target_speed,
        delta: 0.0,
    };
    let mut controller = PurePursuit::new(sim.lookahead, sim.target_speed, sim.vehicle.wheelbase);

    let steps = (scenario.duration / sim.dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut events = Vec::new();
    let mut masked = map.zone_of(state.pose.position()) == Zone::Masked;
    samples.push(state);
    let mut truncated = false;

    for i in 1..=steps {
        let t = (i - 1) as f64 * sim.dt;
        let nominal = controller.command(&state, &path);
        let mut cmd = match cfg.mode {
            FailureMode::Nominal | FailureMode::LaneShift => nominal,
            FailureMode::PeriodicControl => {
                let (eps_delta, eps_v) = periodic_noise(t, cfg, &mut hold);
                inject_control_failure(nominal, eps_delta, eps_v)
            }
            FailureMode::Speeding => speeding_override(nominal, cfg),
            FailureMode::Reckless => reckless.apply(nominal, sim.dt),
        };
        if sim.steer_jitter > 0.0 {
            cmd.delta_cmd += jitter.sample(&mut jitter_rng);
        }
        let mut next = step_vehicle(&state, &cmd, sim.dt, &sim.vehicle)?;
        next.pose.t = i as f64 * sim.dt;
        if !map.in_bounds(next.pose.position()) {
            truncated = true;
            break;
        }
        let now_masked = map.zone_of(next.pose.position()) == Zone::Masked;
        if now_masked != masked {
            events.push(ZoneEvent {
                sample: samples.len(),
                kind: if now_masked {
                    ZoneEventKind::EnteredMask
                } else {
                    ZoneEventKind::ExitedMask
                },
            });
            masked = now_masked;
        }
        samples.push(next);
        state = next;
    }

    Ok(TrajectoryLog {
        vehicle_id: scenario.vehicle_id.clone(),
        mode: cfg.mode,
        dt: sim.dt,
        samples,
        events,
        truncated,
    })
}
