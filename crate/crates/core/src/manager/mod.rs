//! Intersection manager: per-vehicle pose buffers, periodic detector
//! evaluation and warnings to vehicles approaching the intersection.
//!
//! [`Manager`] is the synchronous core. Its clock is the pose timestamps:
//! evaluation instants are multiples of the evaluation period, and the
//! instant `T` is evaluated when the first pose newer than `T` arrives,
//! before that pose is buffered. [`server`] puts it behind TCP.

mod protocol;
mod server;
mod session;

pub use protocol::{parse_line, ErrCode, Message, ProtocolError};
pub use server::{serve, spawn, ServeSummary, ServerHandle};
pub use session::{Ingest, VehicleSession};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use crate::config::Config;
use crate::data::PoseWindow;
use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::numfmt::exact;
use crate::sim::{FailureMode, TrackMap, Zone};

/// Header line of the event log.
pub const EVENT_LOG_HEADER: &str = "# t vehicle_id z_hat zone warned";

#[derive(Debug, Clone, PartialEq)]
pub struct ManagerConfig {
    pub checkpoint: PathBuf,
    pub z_bar: f64,
    pub seq_len: usize,
    pub rate: f64,
    pub eval_period: f64,
    pub session_timeout: f64,
    pub map: TrackMap,
    pub listen: String,
}

impl ManagerConfig {
    /// Manager settings from a run config, serving `checkpoint`.
    pub fn from_config(cfg: &Config, checkpoint: PathBuf) -> Result<Self> {
        Ok(Self {
            checkpoint,
            z_bar: cfg.manager.z_bar,
            seq_len: cfg.data.seq_len,
            rate: cfg.data.rate,
            eval_period: cfg.manager.eval_period,
            session_timeout: cfg.manager.session_timeout,
            map: TrackMap::minicity(&cfg.map)?,
            listen: cfg.manager.listen.clone(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z_bar > 0.0 && self.z_bar < 1.0) {
            return Err(Error::Config(format!("z_bar must lie in (0, 1), got {}", self.z_bar)));
        }
        if self.seq_len < 2 || !(self.rate > 0.0) || !(self.eval_period > 0.0) || !(self.session_timeout > 0.0) {
            return Err(Error::Config("seq_len, rate, eval_period and session_timeout must be positive".into()));
        }
        Ok(())
    }
}

/// Warning for `target` about `offender`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarningEvent {
    pub target: String,
    pub offender: String,
    pub z_hat: f64,
    pub t: f64,
}

impl WarningEvent {
    pub fn to_message(&self) -> Message {
        Message::Warn {
            target: self.target.clone(),
            offender: self.offender.clone(),
            z_hat: self.z_hat,
            t: self.t,
        }
    }
}

/// One vehicle at one evaluation instant.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub t: f64,
    pub vehicle_id: String,
    /// Absent while the buffer is short or the vehicle is masked.
    pub z_hat: Option<f64>,
    pub zone: Zone,
    /// Vehicles warned about this one.
    pub warned: Vec<String>,
}

impl EvalRecord {
    /// `t vehicle_id z_hat zone warned:{ids|-}`, with `-` for no verdict.
    pub fn log_line(&self) -> String {
        let z = self.z_hat.map_or_else(|| "-".to_string(), exact);
        let warned = if self.warned.is_empty() {
            "-".to_string()
        } else {
            self.warned.join(",")
        };
        format!("{} {} {z} {} warned:{warned}", exact(self.t), self.vehicle_id, self.zone)
    }

    pub fn parse_log_line(line: &str) -> Result<Self> {
        let bad = || Error::parse(0, format!("bad event line '{line}'"));
        let f: Vec<&str> = line.split(' ').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        let warned = f[4].strip_prefix("warned:").ok_or_else(bad)?;
        Ok(Self {
            t: f[0].parse().map_err(|_| bad())?,
            vehicle_id: f[1].to_string(),
            z_hat: if f[2] == "-" {
                None
            } else {
                Some(f[2].parse().map_err(|_| bad())?)
            },
            zone: f[3].parse().map_err(|_| bad())?,
            warned: if warned == "-" {
                Vec::new()
            } else {
                warned.split(',').map(str::to_string).collect()
            },
        })
    }
}

/// For each verdict above `z_bar`, one event per other vehicle currently in
/// the approach annulus.
pub fn broadcast_warnings(verdicts: &[(String, f64)], zones: &[(String, Zone)], z_bar: f64, t: f64) -> Vec<WarningEvent> {
    let mut out = Vec::new();
    for (offender, z) in verdicts {
        if !(*z > z_bar) {
            continue;
        }
        for (target, zone) in zones {
            if target != offender && *zone == Zone::Approaching {
                out.push(WarningEvent {
                    target: target.clone(),
                    offender: offender.clone(),
                    z_hat: *z,
                    t,
                });
            }
        }
    }
    out
}

/// Result of handling one message.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    /// Evaluations run before the message took effect, in time order.
    pub records: Vec<EvalRecord>,
    pub warnings: Vec<WarningEvent>,
    /// Answer to the sender.
    pub reply: Option<Message>,
    pub evicted: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ManagerStats {
    pub poses: u64,
    pub dropped: u64,
    pub restarts: u64,
    pub evaluations: u64,
    pub verdicts: u64,
    pub warnings: u64,
    pub evicted: u64,
}

/// Session table plus a shared read-only detector.
pub struct Manager {
    cfg: ManagerConfig,
    detector: Arc<dyn Detector>,
    sessions: BTreeMap<String, VehicleSession>,
    next_eval: Option<f64>,
    pub stats: ManagerStats,
}

impl Manager {
    /// Fails when the detector's window length differs from the config.
    pub fn new(cfg: ManagerConfig, detector: Arc<dyn Detector>) -> Result<Self> {
        cfg.validate()?;
        if detector.seq_len() != cfg.seq_len {
            return Err(Error::Incompatible(format!(
                "{} expects L = {}, manager configured for L = {}",
                cfg.checkpoint.display(),
                detector.seq_len(),
                cfg.seq_len
            )));
        }
        Ok(Self {
            cfg,
            detector,
            sessions: BTreeMap::new(),
            next_eval: None,
            stats: ManagerStats::default(),
        })
    }

    /// Loads the checkpoint named in `cfg`.
    pub fn load(cfg: ManagerConfig) -> Result<Self> {
        let det = crate::detector::load_detector(&cfg.checkpoint)?;
        Self::new(cfg, Arc::from(det))
    }

    pub fn config(&self) -> &ManagerConfig {
        &self.cfg
    }

    pub fn detector(&self) -> &dyn Detector {
        self.detector.as_ref()
    }

    pub fn session(&self, id: &str) -> Option<&VehicleSession> {
        self.sessions.get(id)
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    /// Next instant to be evaluated, once any pose has arrived.
    pub fn next_eval(&self) -> Option<f64> {
        self.next_eval
    }

    pub fn handle(&mut self, msg: Message) -> Result<Outcome> {
        let mut out = Outcome::default();
        match msg {
            Message::Pose { vehicle_id, pose } => {
                self.advance(pose.t, &mut out)?;
                self.stats.poses += 1;
                let cap = self.cfg.seq_len;
                let session = self
                    .sessions
                    .entry(vehicle_id.clone())
                    .or_insert_with(|| VehicleSession::new(vehicle_id, cap));
                match session.ingest(pose, self.cfg.rate, &self.cfg.map) {
                    Ingest::Appended => {}
                    Ingest::OutOfOrder => self.stats.dropped += 1,
                    Ingest::Restarted => {
                        self.stats.restarts += 1;
                        out.reply = Some(Message::Err {
                            code: ErrCode::Incompatible,
                            text: format!("{} pose spacing differs from {} s; buffer restarted", session.id, 1.0 / self.cfg.rate),
                        });
                    }
                }
            }
            Message::Query { vehicle_id } => {
                let (zone, len) = self
                    .sessions
                    .get(&vehicle_id)
                    .map_or((Zone::Outside, 0), |s| (s.zone, s.buffer_len()));
                out.reply = Some(Message::Status {
                    vehicle_id,
                    zone,
                    buffer_len: len,
                });
            }
            other => {
                let name = other.to_string().split(' ').next().unwrap_or_default().to_string();
                out.reply = Some(Message::Err {
                    code: ErrCode::UnknownCommand,
                    text: format!("{name} is not accepted from clients"),
                });
            }
        }
        Ok(out)
    }

    /// Runs every evaluation instant strictly before `t`.
    pub fn advance(&mut self, t: f64, out: &mut Outcome) -> Result<()> {
        let period = self.cfg.eval_period;
        let mut next = match self.next_eval {
            Some(n) => n,
            None => (t / period).ceil() * period,
        };
        let mut k = 0u32;
        while next < t {
            self.evaluate_at(next, out)?;
            k += 1;
            // Skip long silences instead of evaluating every empty instant.
            if self.sessions.is_empty() {
                next = (t / period).ceil() * period;
                break;
            }
            next += period;
            if k > 100_000 {
                return Err(Error::InvalidArgument(format!("timestamp jump to {t} is too large")));
            }
        }
        self.next_eval = Some(next);
        Ok(())
    }

    /// Evicts silent sessions, scores every full unmasked buffer and
    /// computes warnings at instant `t`.
    pub fn evaluate_at(&mut self, t: f64, out: &mut Outcome) -> Result<()> {
        let timeout = self.cfg.session_timeout;
        let stale: Vec<String> = self
            .sessions
            .values()
            .filter(|s| t - s.last_seen() > timeout)
            .map(|s| s.id.clone())
            .collect();
        for id in stale {
            self.sessions.remove(&id);
            self.stats.evicted += 1;
            log::debug!("evicted {id} at {t}");
            out.evicted.push(id);
        }

        let mut verdicts = Vec::new();
        let mut zones = Vec::new();
        for s in self.sessions.values_mut() {
            zones.push((s.id.clone(), s.zone));
            s.last_verdict = None;
            if s.is_full() && s.zone != Zone::Masked {
                let w = PoseWindow::new(s.poses(), FailureMode::Nominal, s.id.clone())?;
                let z = self.detector.score(&w)?;
                s.last_verdict = Some(z);
                verdicts.push((s.id.clone(), z));
            }
        }
        let warnings = broadcast_warnings(&verdicts, &zones, self.cfg.z_bar, t);
        for s in self.sessions.values() {
            out.records.push(EvalRecord {
                t,
                vehicle_id: s.id.clone(),
                z_hat: s.last_verdict,
                zone: s.zone,
                warned: warnings.iter().filter(|w| w.offender == s.id).map(|w| w.target.clone()).collect(),
            });
        }
        self.stats.evaluations += self.sessions.len() as u64;
        self.stats.verdicts += verdicts.len() as u64;
        self.stats.warnings += warnings.len() as u64;
        out.warnings.extend(warnings);
        Ok(())
    }
}

/// Event-log text for `records`, one line each.
pub fn event_lines(records: &[EvalRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "{}", r.log_line());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{MapParams, Pose};

    struct Constant(f64);

    impl Detector for Constant {
        fn name(&self) -> String {
            "constant".into()
        }
        fn seq_len(&self) -> usize {
            3
        }
        fn param_count(&self) -> usize {
            0
        }
        fn score(&self, _: &PoseWindow) -> Result<f64> {
            Ok(self.0)
        }
        fn to_checkpoint(&self) -> crate::nn::Checkpoint {
            unimplemented!()
        }
    }

    fn manager(z: f64) -> Manager {
        let cfg = ManagerConfig {
            checkpoint: "mem".into(),
            z_bar: 0.5,
            seq_len: 3,
            rate: 2.0,
            eval_period: 1.0,
            session_timeout: 10.0,
            map: TrackMap::minicity(&MapParams::default()).unwrap(),
            listen: String::new(),
        };
        Manager::new(cfg, Arc::new(Constant(z))).unwrap()
    }

    fn pose(id: &str, t: f64, x: f64) -> Message {
        Message::Pose {
            vehicle_id: id.into(),
            pose: Pose::new(t, x, -0.15, 0.0),
        }
    }

    #[test]
    fn zone_enumeration() {
        let zones = vec![
            ("off".to_string(), Zone::Outside),
            ("a".to_string(), Zone::Approaching),
            ("m".to_string(), Zone::Masked),
            ("o".to_string(), Zone::Outside),
        ];
        let w = broadcast_warnings(&[("off".into(), 0.9)], &zones, 0.5, 1.0);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].target, "a");
        assert!(broadcast_warnings(&[], &zones, 0.5, 1.0).is_empty());
        assert!(broadcast_warnings(&[("off".into(), 0.5)], &zones, 0.5, 1.0).is_empty());
    }

    #[test]
    fn no_verdict_before_full_buffer() {
        let mut m = manager(0.9);
        let mut records = Vec::new();
        for k in 0..8 {
            records.extend(m.handle(pose("a", k as f64 * 0.5, 3.0)).unwrap().records);
        }
        // instants 0, 1, 2, 3 evaluated; buffer of 3 first full at t = 1.0
        let z: Vec<Option<f64>> = records.iter().map(|r| r.z_hat).collect();
        assert_eq!(z, [None, Some(0.9), Some(0.9), Some(0.9)]);
    }

    #[test]
    fn warns_only_approaching_vehicles() {
        let mut m = manager(0.9);
        let mut warnings = Vec::new();
        for k in 0..8 {
            let t = k as f64 * 0.5;
            warnings.extend(m.handle(pose("off", t, 3.0)).unwrap().warnings);
            warnings.extend(m.handle(pose("near", t, 1.0)).unwrap().warnings);
            warnings.extend(m.handle(pose("far", t, 3.5)).unwrap().warnings);
        }
        assert!(!warnings.is_empty());
        assert!(warnings.iter().all(|w| w.target == "near"));
    }

    #[test]
    fn masked_vehicle_gets_no_verdict() {
        let mut m = manager(0.9);
        let mut recs = Vec::new();
        for k in 0..8 {
            recs.extend(m.handle(pose("c", k as f64 * 0.5, 0.0)).unwrap().records);
        }
        assert!(recs.iter().all(|r| r.z_hat.is_none() && r.zone == Zone::Masked));
    }

    #[test]
    fn sessions_isolated_and_evicted() {
        let mut m = manager(0.1);
        for k in 0..4 {
            m.handle(pose("a", k as f64 * 0.5, 3.0)).unwrap();
        }
        m.handle(pose("b", 0.5, 3.0)).unwrap();
        assert_eq!(m.session("a").unwrap().buffer_len(), 3);
        assert_eq!(m.session("b").unwrap().buffer_len(), 1);
        // a keeps reporting; b falls silent
        let mut evicted = Vec::new();
        for k in 4..=40 {
            evicted.extend(m.handle(pose("a", k as f64 * 0.5, 3.0)).unwrap().evicted);
        }
        assert_eq!(evicted, ["b"]);
        assert!(m.session("b").is_none());
        let out = m.handle(pose("a", 40.0, 3.0)).unwrap();
        assert_eq!(out.evicted, ["a"]);
    }

    #[test]
    fn log_line_round_trip() {
        let r = EvalRecord {
            t: 3.0,
            vehicle_id: "v-1".into(),
            z_hat: Some(0.123456789012),
            zone: Zone::Approaching,
            warned: vec!["a".into(), "b".into()],
        };
        assert_eq!(EvalRecord::parse_log_line(&r.log_line()).unwrap(), r);
        let r = EvalRecord { z_hat: None, warned: vec![], ..r };
        assert!(r.log_line().ends_with(" - approaching warned:-"));
        assert_eq!(EvalRecord::parse_log_line(&r.log_line()).unwrap(), r);
    }

    #[test]
    fn mismatched_window_length_rejected() {
        let mut cfg = manager(0.5).cfg.clone();
        cfg.seq_len = 10;
        assert!(matches!(Manager::new(cfg, Arc::new(Constant(0.5))), Err(Error::Incompatible(_))));
    }

    #[test]
    fn query_reports_status() {
        let mut m = manager(0.5);
        m.handle(pose("a", 0.0, 1.0)).unwrap();
        let out = m.handle(Message::Query { vehicle_id: "a".into() }).unwrap();
        assert_eq!(
            out.reply,
            Some(Message::Status {
                vehicle_id: "a".into(),
                zone: Zone::Approaching,
                buffer_len: 1
            })
        );
    }
}
