use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use super::checks::Check;
use super::generate::log_seed;
use super::Layout;
use crate::config::Config;
use crate::data::{resample_poses, PoseWindow};
use crate::detector::{load_detector, Detector};
use crate::error::{Error, Result};
use crate::eval::{Confusion, EvalReport, MethodRow, ModeTally, RECKLESS_NOTE};
use crate::manager::{parse_line, spawn, EvalRecord, Manager, ManagerConfig, Message};
use crate::sim::{run_scenario, FailureConfig, FailureMode, Pose, Scenario, TrackMap};

/// Id of the vehicle carrying the run's failure mode.
pub const SUBJECT_ID: &str = "veh-a";
/// Id of the nominal cross-traffic vehicle.
pub const CROSS_ID: &str = "veh-b";

const SEED_SALT: u64 = 0x5eed_0f_4e91a7;
const RNN_ROWS: [(&str, &str); 3] = [("LSTM", "lstm"), ("GRU", "gru"), ("CfC", "cfc")];

/// One two-vehicle run against a live manager.
#[derive(Debug, Clone)]
pub struct ReplayRun {
    pub mode: FailureMode,
    pub records: Vec<EvalRecord>,
    /// Verdicts dropped for falling inside a handover interval.
    pub excluded: usize,
    /// `WARN` lines received by each client.
    pub warnings_received: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub report: EvalReport,
    /// Roster names replayed, in report order.
    pub names: Vec<String>,
    /// Fraction of verdicts on the nominal-vs-nominal run above `z_bar`,
    /// per method.
    pub false_warning_rate: Vec<f64>,
    /// Verdicts recomputed offline from the same poses.
    pub compared: usize,
    /// Recomputed verdicts whose bits differ from the manager's.
    pub mismatches: usize,
    pub runs: Vec<(String, ReplayRun)>,
    pub checks: Vec<Check>,
}

impl ReplayOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Start fraction placing a vehicle `lead` meters of route before its
/// closest approach to the intersection center.
fn start_before_center(map: &TrackMap, route: usize, lead: f64) -> f64 {
    let path = &map.routes[route].path;
    let s = path.project(map.intersection_center).s;
    (s - lead).rem_euclid(path.length()) / path.length()
}

fn route_index(map: &TrackMap, name: &str) -> Result<usize> {
    map.routes
        .iter()
        .position(|r| r.name == name)
        .ok_or_else(|| Error::Config(format!("unknown route '{name}'")))
}

/// 2 Hz pose streams of both vehicles for a run of `mode`.
pub fn replay_streams(cfg: &Config, map: &TrackMap, mode: FailureMode) -> Result<[Vec<Pose>; 2]> {
    let rc = &cfg.replay;
    let drive = |id: &str, route: &str, lead: f64, m: FailureMode, k: usize| -> Result<Vec<Pose>> {
        let route = route_index(map, route)?;
        let scenario = Scenario {
            vehicle_id: id.to_string(),
            route,
            start_fraction: start_before_center(map, route, lead),
            duration: rc.run_seconds,
        };
        let fc = FailureConfig {
            mode: m,
            seed: log_seed(cfg.seed ^ SEED_SALT, mode, k),
            ..cfg.failure.clone()
        };
        let log = run_scenario(map, &scenario, &fc, &cfg.sim)?;
        resample_poses(&log, cfg.data.rate)
    };
    Ok([
        drive(SUBJECT_ID, &rc.subject_route, rc.subject_lead, mode, 0)?,
        drive(CROSS_ID, &rc.cross_route, rc.cross_lead, FailureMode::Nominal, 1)?,
    ])
}

/// Times within `margin` seconds of the two vehicles being closer than
/// `distance`.
pub fn handover_mask(a: &[Pose], b: &[Pose], distance: f64, margin: f64) -> Vec<(f64, f64)> {
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for (p, q) in a.iter().zip(b) {
        if (p.x - q.x).hypot(p.y - q.y) < distance {
            let (lo, hi) = (p.t - margin, p.t + margin);
            match spans.last_mut() {
                Some(last) if lo <= last.1 => last.1 = hi,
                _ => spans.push((lo, hi)),
            }
        }
    }
    spans
}

fn masked(spans: &[(f64, f64)], t: f64) -> bool {
    spans.iter().any(|&(lo, hi)| t >= lo && t <= hi)
}

struct Client {
    stream: TcpStream,
    reader: BufReader<TcpStream>,
    warnings: usize,
}

impl Client {
    fn connect(addr: SocketAddr) -> Result<Self> {
        let stream = TcpStream::connect(addr).map_err(|e| Error::Data(format!("manager handshake with {addr} failed: {e}")))?;
        stream.set_read_timeout(Some(Duration::from_secs(10))).map_err(Error::Net)?;
        stream.set_nodelay(true).map_err(Error::Net)?;
        let reader = BufReader::new(stream.try_clone().map_err(Error::Net)?);
        Ok(Self {
            stream,
            reader,
            warnings: 0,
        })
    }

    fn send(&mut self, msg: &Message) -> Result<()> {
        writeln!(self.stream, "{msg}").map_err(Error::Net)
    }

    /// Sends `QUERY id` and reads until its `STATUS`, counting warnings.
    fn sync(&mut self, id: &str) -> Result<()> {
        self.send(&Message::Query { vehicle_id: id.into() })?;
        let mut line = String::new();
        loop {
            line.clear();
            if self.reader.read_line(&mut line).map_err(Error::Net)? == 0 {
                return Err(Error::Data("manager closed the connection".into()));
            }
            match parse_line(line.trim_end_matches('\n')) {
                Ok(Message::Status { vehicle_id, .. }) if vehicle_id == id => return Ok(()),
                Ok(Message::Warn { .. }) => self.warnings += 1,
                Ok(Message::Err { code, text }) => log::warn!("manager: ERR {} {text}", code.code()),
                Ok(other) => log::debug!("unexpected reply {other}"),
                Err(e) => return Err(Error::Data(format!("unreadable manager reply '{}': {e}", line.trim_end()))),
            }
        }
    }
}

/// Streams both vehicles in lockstep through an in-process manager and
/// returns its event log.
pub fn run_pair(cfg: &Config, detector: Arc<dyn Detector>, streams: &[Vec<Pose>; 2], event_log: &Path) -> Result<ReplayRun> {
    let mcfg = ManagerConfig::from_config(cfg, event_log.to_path_buf())?;
    let manager = Manager::new(mcfg, detector)?;
    let server = spawn(manager, "127.0.0.1:0", Some(event_log))?;
    let ids = [SUBJECT_ID, CROSS_ID];
    let mut clients = [Client::connect(server.addr)?, Client::connect(server.addr)?];
    let steps = streams[0].len().min(streams[1].len());
    for k in 0..steps {
        for (c, (id, s)) in clients.iter_mut().zip(ids.iter().zip(streams)) {
            c.send(&Message::Pose {
                vehicle_id: id.to_string(),
                pose: s[k],
            })?;
            c.sync(id)?;
        }
    }
    // one pose past the end flushes the last evaluation instant
    if let Some(last) = streams[0].get(steps.saturating_sub(1)) {
        let p = Pose::new(last.t + 1.0 / cfg.data.rate, last.x, last.y, last.theta);
        clients[0].send(&Message::Pose {
            vehicle_id: "flush".into(),
            pose: p,
        })?;
        clients[0].sync("flush")?;
        clients[1].sync(CROSS_ID)?;
    }
    let warnings_received = ids.iter().zip(&clients).map(|(id, c)| (id.to_string(), c.warnings)).collect();
    drop(clients);
    server.shutdown()?;
    let text = std::fs::read_to_string(event_log).map_err(|e| Error::io(event_log, e))?;
    let records = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(EvalRecord::parse_log_line)
        .filter(|r| r.as_ref().map_or(true, |r| r.vehicle_id != "flush"))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplayRun {
        mode: FailureMode::Nominal,
        records,
        excluded: 0,
        warnings_received,
    })
}

/// The window the manager held for `id` at instant `t`: the last `L` poses
/// at or before `t`.
pub fn window_at(stream: &[Pose], t: f64, len: usize) -> Option<Vec<Pose>> {
    let end = stream.partition_point(|p| p.t <= t);
    (end >= len).then(|| stream[end - len..end].to_vec())
}

fn pick_detectors(cfg: &Config, layout: &Layout) -> Result<Vec<String>> {
    if !cfg.replay.detectors.is_empty() {
        return Ok(cfg.replay.detectors.clone());
    }
    let path = layout.report().join("validation.csv");
    if let Ok(text) = std::fs::read_to_string(&path) {
        let report = EvalReport::parse_csv(&text)?;
        let best = RNN_ROWS
            .iter()
            .filter_map(|(row, name)| report.row(row).map(|r| (r.all, *name)))
            .max_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((_, name)) = best {
            return Ok(vec![name.to_string()]);
        }
    }
    Ok(vec![cfg.manager.detector.clone()])
}

/// One run per mode for each replayed detector, scored per evaluation.
/// Writes `replay/<name>/<mode>.events` and `replay/replay.{csv,txt}`.
pub fn replay(cfg: &Config, layout: &Layout) -> Result<ReplayOutcome> {
    let map = TrackMap::minicity(&cfg.map)?;
    let names = pick_detectors(cfg, layout)?;
    let z_bar = cfg.manager.z_bar;
    let mut streams = Vec::new();
    for mode in FailureMode::REPORT_ORDER {
        streams.push((mode, replay_streams(cfg, &map, mode)?));
    }

    let mut report = EvalReport {
        meta: vec![
            ("split".into(), "closed-loop replay".into()),
            ("run_seconds".into(), cfg.replay.run_seconds.to_string()),
            ("eval_period".into(), cfg.manager.eval_period.to_string()),
            ("z_bar".into(), cfg.manager.z_bar.to_string()),
            ("seed".into(), cfg.seed.to_string()),
            ("columns".into(), RECKLESS_NOTE.into()),
        ],
        rows: Vec::new(),
    };
    let mut fwr = Vec::new();
    let mut runs = Vec::new();
    let (mut compared, mut mismatches) = (0, 0);
    for name in &names {
        let path = layout.checkpoint(name);
        if !path.exists() {
            return Err(Error::Data(format!("no checkpoint at {}; run train first", path.display())));
        }
        let det: Arc<dyn Detector> = Arc::from(load_detector(&path)?);
        if det.seq_len() != cfg.data.seq_len {
            return Err(Error::Incompatible(format!(
                "{} expects L = {}, config has L = {}",
                path.display(),
                det.seq_len(),
                cfg.data.seq_len
            )));
        }
        let (mut preds, mut labels, mut modes) = (Vec::new(), Vec::new(), Vec::new());
        let mut nominal = (0usize, 0usize);
        for (mode, pair) in &streams {
            let log_path = layout.replay().join(name).join(format!("{}.events", mode.name()));
            let mut run = run_pair(cfg, Arc::clone(&det), pair, &log_path)?;
            run.mode = *mode;
            let spans = handover_mask(&pair[0], &pair[1], cfg.replay.collision_distance, cfg.replay.handover_margin);
            for r in &run.records {
                let Some(z) = r.z_hat else { continue };
                let idx = if r.vehicle_id == SUBJECT_ID { 0 } else { 1 };
                let poses = window_at(&pair[idx], r.t, cfg.data.seq_len)
                    .ok_or_else(|| Error::Data(format!("no offline window for {} at {}", r.vehicle_id, r.t)))?;
                let offline = det.score(&PoseWindow::new(poses, FailureMode::Nominal, "")?)?;
                compared += 1;
                if offline.to_bits() != z.to_bits() {
                    mismatches += 1;
                }
                let subject = *mode == FailureMode::Nominal || r.vehicle_id == SUBJECT_ID;
                if !subject {
                    continue;
                }
                if masked(&spans, r.t) {
                    run.excluded += 1;
                    continue;
                }
                preds.push(if z > z_bar { 1.0 } else { 0.0 });
                labels.push(if r.vehicle_id == SUBJECT_ID { mode.label() } else { 0 });
                modes.push(if r.vehicle_id == SUBJECT_ID { *mode } else { FailureMode::Nominal });
                if *mode == FailureMode::Nominal {
                    nominal.0 += usize::from(z > z_bar);
                    nominal.1 += 1;
                }
            }
            log::info!(
                "{name} {}: {} evaluations, {} excluded, warnings {:?}",
                mode.name(),
                run.records.len(),
                run.excluded,
                run.warnings_received
            );
            runs.push((name.clone(), run));
        }
        let c = Confusion::from_predictions(&preds, &labels)?;
        let t = ModeTally::from_predictions(&preds, &modes)?;
        report.rows.push(MethodRow::new(&det.name(), det.param_count(), c, &t));
        fwr.push(if nominal.1 == 0 { f64::NAN } else { nominal.0 as f64 / nominal.1 as f64 });
    }
    report.meta.push((
        "false_warning_rate".into(),
        fwr.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(","),
    ));
    report.meta.push(("offline_mismatches".into(), format!("{mismatches}/{compared}")));
    report.emit(&layout.replay(), "replay")?;

    let mut checks = Vec::new();
    if let (Some(row), Some(&rate)) = (report.rows.first(), fwr.first()) {
        checks.push(Check {
            name: "replay overall >= 75%".into(),
            passed: row.all >= 0.75,
            detail: format!("{} {:.2}", row.method, 100.0 * row.all),
        });
        checks.push(Check {
            name: "nominal false-warning rate <= 20%".into(),
            passed: rate <= 0.20,
            detail: format!("{:.2}%", 100.0 * rate),
        });
    }
    checks.push(Check {
        name: "replay verdicts equal offline scores bit for bit".into(),
        passed: mismatches == 0 && compared > 0,
        detail: format!("{mismatches} of {compared} differ"),
    });
    Ok(ReplayOutcome {
        report,
        names,
        false_warning_rate: fwr,
        compared,
        mismatches,
        runs,
        checks,
    })
}
