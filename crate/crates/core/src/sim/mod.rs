//! Seeded driving simulator with failure-mode injection.

mod control;
mod failure;
pub mod geometry;
mod scenario;
mod track;
mod vehicle;

pub use control::PurePursuit;
pub use failure::{
    inject_control_failure, periodic_noise, speeding_override, FailureConfig, FailureMode,
    RecklessParams, RecklessPolicy, SpeedHold,
};
pub use geometry::{shift_centerline, wrap_angle, Polyline};
pub use scenario::{
    run_scenario, Scenario, SimParams, TrajectoryLog, ZoneEvent, ZoneEventKind, LOG_HEADER,
};
pub use scenario::valid_id;
pub use track::{MapParams, Route, RouteKind, TrackMap, Zone};
pub use vehicle::{step_vehicle, ControlCommand, Pose, VehicleParams, VehicleState};
