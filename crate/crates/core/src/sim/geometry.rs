use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Smallest signed difference `b - a`, wrapped.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(b - a)
}

/// Unwraps a heading sequence so consecutive values never jump by more than π.
/// The first value is kept as is.
pub fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    let mut prev: Option<f64> = None;
    for &a in angles {
        let v = match prev {
            None => a,
            Some(p) => p + angle_diff(p, a),
        };
        out.push(v);
        prev = Some(v);
    }
    out
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

fn left_normal(u: Point) -> Point {
    [-u[1], u[0]]
}

pub fn distance(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Result of projecting a point onto a [`Polyline`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the closest point.
    pub s: f64,
    /// Signed lateral offset, positive to the left of the travel direction.
    pub lateral: f64,
    pub segment: usize,
}

/// A route polyline. Closed polylines have an implicit segment from the last
/// point back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point>,
    closed: bool,
    cum: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Point>, closed: bool) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DegeneratePolyline(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("polyline"));
        }
        let n_seg = if closed { points.len() } else { points.len() - 1 };
        let mut cum = Vec::with_capacity(n_seg + 1);
        cum.push(0.0);
        for i in 0..n_seg {
            let a = points[i];
            let b = points[(i + 1) % points.len()];
            let len = distance(a, b);
            if len < 1e-9 {
                return Err(Error::DegeneratePolyline(format!(
                    "repeated point at index {}",
                    (i + 1) % points.len()
                )));
            }
            cum.push(cum[i] + len);
        }
        Ok(Self {
            points,
            closed,
            cum,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn segment_count(&self) -> usize {
        self.cum.len() - 1
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn segment(&self, i: usize) -> (Point, Point) {
        (self.points[i], self.points[(i + 1) % self.points.len()])
    }

    fn direction(&self, i: usize) -> Point {
        let (a, b) = self.segment(i);
        let d = sub(b, a);
        let l = norm(d);
        [d[0] / l, d[1] / l]
    }

    /// Normalizes an arc length: wraps on closed loops, clamps otherwise.
    pub fn normalize_s(&self, s: f64) -> f64 {
        let len = self.length();
        if self.closed {
            s.rem_euclid(len)
        } else {
            s.clamp(0.0, len)
        }
    }

    fn locate(&self, s: f64) -> usize {
        let s = self.normalize_s(s);
        match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.segment_count() - 1),
            Err(i) => (i - 1).min(self.segment_count() - 1),
        }
    }

    pub fn point_at(&self, s: f64) -> Point {
        let s = self.normalize_s(s);
        let i = self.locate(s);
        let (a, b) = self.segment(i);
        let f = (s - self.cum[i]) / (self.cum[i + 1] - self.cum[i]);
        [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let d = self.direction(self.locate(s));
        d[1].atan2(d[0])
    }

    fn project_segment(&self, i: usize, p: Point) -> (f64, f64, f64) {
        let (a, b) = self.segment(i);
        let ab = sub(b, a);
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let ap = sub(p, a);
        let f = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
        let q = [a[0] + f * ab[0], a[1] + f * ab[1]];
        let d = distance(p, q);
        let cross = ab[0] * ap[1] - ab[1] * ap[0];
        let lateral = if cross >= 0.0 { d } else { -d };
        (self.cum[i] + f * (self.cum[i + 1] - self.cum[i]), d, lateral)
    }

    /// Closest point on the whole polyline.
    pub fn project(&self, p: Point) -> Projection {
        self.project_range(p, 0..self.segment_count())
    }

    /// Closest point searching only segments within `window` of `hint`.
    pub fn project_near(&self, p: Point, hint: usize, window: usize) -> Projection {
        let n = self.segment_count();
        if 2 * window + 1 >= n {
            return self.project(p);
        }
        let mut best: Option<(f64, Projection)> = None;
        for k in 0..=(2 * window) {
            let raw = hint as isize + k as isize - window as isize;
            let i = if self.closed {
                raw.rem_euclid(n as isize) as usize
            } else if raw < 0 || raw >= n as isize {
                continue;
            } else {
                raw as usize
            };
            let (s, d, lateral) = self.project_segment(i, p);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, Projection { s, lateral, segment: i }));
            }
        }
        best.unwrap().1
    }

    fn project_range(&self, p: Point, range: std::ops::Range<usize>) -> Projection {
        let mut best: Option<(f64, Projection)> = None;
        for i in range {
            let (s, d, lateral) = self.project_segment(i, p);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, Projection { s, lateral, segment: i }));
            }
        }
        best.unwrap().1
    }

    /// Offsets every segment by `d` along its left normal, joining with miters
    /// so each offset segment stays parallel at exactly `|d|`.
    pub fn offset(&self, d: f64) -> Result<Polyline> {
        if !d.is_finite() {
            return Err(Error::NonFinite("offset distance"));
        }
        let n = self.points.len();
        let n_seg = self.segment_count();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let incoming = if i > 0 {
                Some(i - 1)
            } else if self.closed {
                Some(n_seg - 1)
            } else {
                None
            };
            let outgoing = if i < n_seg { Some(i) } else { None };
            let normal = match (incoming, outgoing) {
                (Some(a), Some(b)) => {
                    let na = left_normal(self.direction(a));
                    let nb = left_normal(self.direction(b));
                    let m = [na[0] + nb[0], na[1] + nb[1]];
                    let ml = norm(m);
                    if ml < 1e-9 {
                        return Err(Error::DegeneratePolyline(format!(
                            "route reverses direction at index {i}"
                        )));
                    }
                    let m = [m[0] / ml, m[1] / ml];
                    let cos_half = m[0] * na[0] + m[1] * na[1];
                    [m[0] / cos_half, m[1] / cos_half]
                }
                (Some(a), None) => left_normal(self.direction(a)),
                (None, Some(b)) => left_normal(self.direction(b)),
                (None, None) => unreachable!(),
            };
            let p = self.points[i];
            out.push([p[0] + d * normal[0], p[1] + d * normal[1]]);
        }
        Polyline::new(out, self.closed)
    }

    /// Shoelace area; positive for counter-clockwise loops. Open polylines are
    /// closed implicitly.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            acc += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * acc
    }

    /// Rotates about the origin by `angle`.
    pub fn rotated(&self, angle: f64) -> Result<Polyline> {
        let (s, c) = angle.sin_cos();
        let pts = self
            .points
            .iter()
            .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
            .collect();
        Polyline::new(pts, self.closed)
    }
}

/// Lane-detector offset: the planner's centerline moves half the lane-line
/// shift to the left of travel.
pub fn shift_centerline(route: &Polyline, s_bar: f64) -> Result<Polyline> {
    if !(s_bar >= 0.0) {
        return Err(Error::InvalidArgument(format!("s_bar must be >= 0, got {s_bar}")));
    }
    if s_bar == 0.0 {
        return Ok(route.clone());
    }
    route.offset(s_bar / 2.0)
}

/// Closed loop through axis-aligned `corners` (travel order) with each corner
/// replaced by a circular fillet of the given radius.
pub fn rounded_loop(corners: &[Point], radii: &[f64], spacing: f64) -> Result<Polyline> {
    let n = corners.len();
    if n < 3 || radii.len() != n {
        return Err(Error::InvalidArgument("rounded loop needs >= 3 corners and one radius each".into()));
    }
    let mut pts = Vec::new();
    for i in 0..n {
        let prev = corners[(i + n - 1) % n];
        let c = corners[i];
        let next = corners[(i + 1) % n];
        let r = radii[i];
        let to_prev = sub(prev, c);
        let to_next = sub(next, c);
        let up = [to_prev[0] / norm(to_prev), to_prev[1] / norm(to_prev)];
        let un = [to_next[0] / norm(to_next), to_next[1] / norm(to_next)];
        // right-angle corners: tangent length equals the radius
        let start = [c[0] + r * up[0], c[1] + r * up[1]];
        let center = [c[0] + r * (up[0] + un[0]), c[1] + r * (up[1] + un[1])];
        let a0 = (start[1] - center[1]).atan2(start[0] - center[0]);
        let end = [c[0] + r * un[0], c[1] + r * un[1]];
        let a1 = (end[1] - center[1]).atan2(end[0] - center[0]);
        let sweep = angle_diff(a0, a1);
        let steps = ((sweep.abs() * r) / spacing).ceil().max(1.0) as usize;
        for k in 0..=steps {
            let a = a0 + sweep * k as f64 / steps as f64;
            pts.push([center[0] + r * a.cos(), center[1] + r * a.sin()]);
        }
    }
    Polyline::new(pts, true)
}
