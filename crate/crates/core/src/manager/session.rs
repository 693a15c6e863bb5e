use std::collections::VecDeque;

use crate::data::WINDOW_DT_TOL;
use crate::sim::{Pose, TrackMap, Zone};

/// What happened to one incoming pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ingest {
    Appended,
    /// Not newer than the last buffered pose; dropped.
    OutOfOrder,
    /// Spacing from the previous pose is not `1 / rate`; the buffer was
    /// restarted from this pose.
    Restarted,
}

/// Per-vehicle state: the most recent `L` poses and the last verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSession {
    pub id: String,
    buffer: VecDeque<Pose>,
    capacity: usize,
    pub last_verdict: Option<f64>,
    pub zone: Zone,
    /// Out-of-order poses dropped so far.
    pub dropped: u64,
    /// Buffer restarts caused by irregular spacing.
    pub restarts: u64,
}

impl VehicleSession {
    pub fn new(id: impl Into<String>, capacity: usize) -> Self {
        Self {
            id: id.into(),
            buffer: VecDeque::with_capacity(capacity),
            capacity,
            last_verdict: None,
            zone: Zone::Outside,
            dropped: 0,
            restarts: 0,
        }
    }

    pub fn ingest(&mut self, pose: Pose, rate: f64, map: &TrackMap) -> Ingest {
        let outcome = match self.buffer.back() {
            Some(last) if pose.t <= last.t => {
                self.dropped += 1;
                return Ingest::OutOfOrder;
            }
            Some(last) if ((pose.t - last.t) - 1.0 / rate).abs() > WINDOW_DT_TOL => {
                self.buffer.clear();
                self.restarts += 1;
                Ingest::Restarted
            }
            _ => Ingest::Appended,
        };
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(pose);
        self.zone = map.zone_of(pose.position());
        outcome
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_full(&self) -> bool {
        self.buffer.len() == self.capacity
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.buffer.iter().copied().collect()
    }

    pub fn last_pose(&self) -> Option<&Pose> {
        self.buffer.back()
    }

    /// Timestamp of the newest pose, or `-inf` for an empty session.
    pub fn last_seen(&self) -> f64 {
        self.buffer.back().map_or(f64::NEG_INFINITY, |p| p.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::MapParams;

    fn map() -> TrackMap {
        TrackMap::minicity(&MapParams::default()).unwrap()
    }

    fn pose(t: f64) -> Pose {
        Pose::new(t, 3.0, -0.15, 0.0)
    }

    #[test]
    fn ring_keeps_latest() {
        let m = map();
        let mut s = VehicleSession::new("a", 10);
        assert_eq!(s.ingest(pose(0.0), 2.0, &m), Ingest::Appended);
        assert_eq!(s.buffer_len(), 1);
        for k in 1..=10 {
            s.ingest(pose(k as f64 * 0.5), 2.0, &m);
        }
        assert_eq!(s.buffer_len(), 10);
        assert_eq!(s.poses()[0].t, 0.5);
        assert_eq!(s.last_seen(), 5.0);
    }

    #[test]
    fn out_of_order_dropped() {
        let m = map();
        let mut s = VehicleSession::new("a", 10);
        s.ingest(pose(1.0), 2.0, &m);
        s.ingest(pose(1.5), 2.0, &m);
        let before = s.poses();
        assert_eq!(s.ingest(pose(1.0), 2.0, &m), Ingest::OutOfOrder);
        assert_eq!(s.poses(), before);
        assert_eq!(s.dropped, 1);
    }

    #[test]
    fn gap_restarts() {
        let m = map();
        let mut s = VehicleSession::new("a", 10);
        s.ingest(pose(1.0), 2.0, &m);
        s.ingest(pose(1.5), 2.0, &m);
        assert_eq!(s.ingest(pose(3.0), 2.0, &m), Ingest::Restarted);
        assert_eq!(s.buffer_len(), 1);
        assert_eq!(s.restarts, 1);
    }

    #[test]
    fn zone_follows_latest_pose() {
        let m = map();
        let mut s = VehicleSession::new("a", 10);
        s.ingest(Pose::new(0.0, 0.1, -0.15, 0.0), 2.0, &m);
        assert_eq!(s.zone, Zone::Masked);
        s.ingest(Pose::new(0.5, 1.0, -0.15, 0.0), 2.0, &m);
        assert_eq!(s.zone, Zone::Approaching);
    }
}
