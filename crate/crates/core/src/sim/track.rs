use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geometry::{distance, rounded_loop, Point, Polyline};
use crate::error::{Error, Result};

/// What a route does at the monitored intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteKind {
    Straight,
    LeftTurn,
    RightTurn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub name: String,
    pub kind: RouteKind,
    /// Lane centerline in travel direction.
    pub path: Polyline,
}

/// Position of a vehicle relative to the monitored intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Zone {
    /// Beyond the entrance radius.
    Outside,
    /// In the annulus `(r_mask, r_enter]`; eligible for warnings.
    Approaching,
    /// Inside the mask disc; no predictions.
    Masked,
}

impl Zone {
    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Outside => "outside",
            Zone::Approaching => "approaching",
            Zone::Masked => "masked",
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Zone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outside" => Ok(Zone::Outside),
            "approaching" => Ok(Zone::Approaching),
            "masked" => Ok(Zone::Masked),
            _ => Err(Error::InvalidArgument(format!("unknown zone '{s}'"))),
        }
    }
}

/// Geometry knobs of the built-in road map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapParams {
    /// Side of one square city block, m.
    pub block: f64,
    pub lane_width: f64,
    /// Fillet radius of road corners on the block perimeter, m.
    pub corner_radius: f64,
    /// Fillet radius of turns at the monitored intersection, m.
    pub turn_radius: f64,
    pub r_mask: f64,
    pub r_enter: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            block: 4.0,
            lane_width: 0.3,
            corner_radius: 1.0,
            turn_radius: 0.8,
            r_mask: 0.5,
            r_enter: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackMap {
    pub routes: Vec<Route>,
    pub lane_width: f64,
    pub intersection_center: Point,
    pub r_mask: f64,
    pub r_enter: f64,
    /// `[x_min, x_max, y_min, y_max]`.
    pub bounds: [f64; 4],
}

impl TrackMap {
    /// Four square blocks around one 4-way intersection at the origin, with
    /// a ring road on the outer perimeter. Routes are closed loops with
    /// right-hand traffic: each block in both directions (a left or a right
    /// turn at the intersection) and each half of the city in both
    /// directions (straight through the intersection).
    pub fn minicity(p: &MapParams) -> Result<Self> {
        if !(p.r_mask < p.r_enter) {
            return Err(Error::InvalidArgument("r_mask must be smaller than r_enter".into()));
        }
        let b = p.block;
        let spacing = 0.05;
        let mut routes = Vec::new();
        let headings = ["east", "north", "west", "south"];
        let sides = ["n", "w", "s", "e"];
        for k in 0..4 {
            let rot = k as f64 * FRAC_PI_2;
            // block loop; the origin corner is the monitored intersection
            let block = [[0.0, 0.0], [b, 0.0], [b, b], [0.0, b]];
            let radii = [p.turn_radius, p.corner_radius, p.corner_radius, p.corner_radius];
            let ccw = rounded_loop(&block, &radii, spacing)?;
            let mut rev = block;
            rev.reverse();
            let mut rev_radii = radii;
            rev_radii.reverse();
            let cw = rounded_loop(&rev, &rev_radii, spacing)?;
            routes.push(Route {
                name: format!("left-{}", headings[k]),
                kind: RouteKind::LeftTurn,
                path: lane_of(&ccw, p.lane_width)?.rotated(rot)?,
            });
            routes.push(Route {
                name: format!("right-{}", headings[(k + 1) % 4]),
                kind: RouteKind::RightTurn,
                path: lane_of(&cw, p.lane_width)?.rotated(rot)?,
            });

            // half-city loop crossing the intersection straight
            let half = [[-b, 0.0], [b, 0.0], [b, b], [-b, b]];
            let radii = [p.corner_radius; 4];
            let ccw = rounded_loop(&half, &radii, spacing)?;
            let mut rev = half;
            rev.reverse();
            let cw = rounded_loop(&rev, &radii, spacing)?;
            routes.push(Route {
                name: format!("straight-{}-{}", headings[k], sides[k]),
                kind: RouteKind::Straight,
                path: lane_of(&ccw, p.lane_width)?.rotated(rot)?,
            });
            routes.push(Route {
                name: format!("straight-{}-{}", headings[(k + 2) % 4], sides[k]),
                kind: RouteKind::Straight,
                path: lane_of(&cw, p.lane_width)?.rotated(rot)?,
            });
        }
        let reach = b + 1.0;
        Ok(Self {
            routes,
            lane_width: p.lane_width,
            intersection_center: [0.0, 0.0],
            r_mask: p.r_mask,
            r_enter: p.r_enter,
            bounds: [-reach, reach, -reach, reach],
        })
    }

    pub fn distance_to_center(&self, p: Point) -> f64 {
        distance(p, self.intersection_center)
    }

    pub fn zone_of(&self, p: Point) -> Zone {
        let d = self.distance_to_center(p);
        if d <= self.r_mask {
            Zone::Masked
        } else if d <= self.r_enter {
            Zone::Approaching
        } else {
            Zone::Outside
        }
    }

    pub fn in_bounds(&self, p: Point) -> bool {
        let [x0, x1, y0, y1] = self.bounds;
        p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1
    }

    pub fn route(&self, name: &str) -> Option<&Route> {
        self.routes.iter().find(|r| r.name == name)
    }
}

/// Right-hand lane centerline of a road-center loop.
fn lane_of(road: &Polyline, lane_width: f64) -> Result<Polyline> {
    road.offset(-lane_width / 2.0)
}
