//! Planar path geometry: straight and circular-arc segments chained into
//! arc-length parameterized paths, and the conflict point of two paths.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

const TAU: f64 = 2.0 * PI;
/// Tolerance for continuity checks and on-segment tests, in metres.
const GEOM_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(math::cos(theta), math::sin(theta))
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        math::sqrt(self.norm_sq())
    }

    pub fn angle(self) -> f64 {
        math::atan2(self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Straight-line distance between two points.
pub fn euclidean_distance(p1: Vec2, p2: Vec2) -> f64 {
    (p1 - p2).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Line {
        start: Vec2,
        end: Vec2,
    },
    /// Circular arc; `sweep` is signed (positive = counter-clockwise).
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl Segment {
    pub fn line(start: Vec2, end: Vec2) -> Self {
        Segment::Line { start, end }
    }

    pub fn arc(center: Vec2, radius: f64, start_angle: f64, sweep: f64) -> Self {
        Segment::Arc {
            center,
            radius,
            start_angle,
            sweep,
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { start, end } => (end - start).norm(),
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub fn start_point(&self) -> Vec2 {
        self.point_at(0.0)
    }

    pub fn end_point(&self) -> Vec2 {
        self.point_at(self.length())
    }

    /// Position at local arc length `s` (clamped to the segment).
    pub fn point_at(&self, s: f64) -> Vec2 {
        self.pose_at(s).0
    }

    /// Position and unit tangent at local arc length `s`.
    pub fn pose_at(&self, s: f64) -> (Vec2, Vec2) {
        let s = s.clamp(0.0, self.length());
        match *self {
            Segment::Line { start, end } => {
                let d = end - start;
                let len = d.norm();
                let dir = d * (1.0 / len);
                (start + dir * s, dir)
            }
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let sign = if sweep >= 0.0 { 1.0 } else { -1.0 };
                let theta = start_angle + sign * s / radius;
                let radial = Vec2::from_angle(theta);
                let tangent = Vec2::new(-radial.y, radial.x) * sign;
                (center + radial * radius, tangent)
            }
        }
    }
}

/// A pre-planned path made of C0-continuous segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    segments: Vec<Segment>,
    #[serde(skip)]
    offsets: Vec<f64>,
    #[serde(skip)]
    length: f64,
    pub entry_tag: String,
    pub exit_tag: String,
}

impl Path {
    pub fn new(segments: Vec<Segment>, entry_tag: &str, exit_tag: &str) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidPath("path has no segments".into()));
        }
        let mut offsets = Vec::with_capacity(segments.len());
        let mut total = 0.0;
        for (i, seg) in segments.iter().enumerate() {
            let len = seg.length();
            if !(len > GEOM_EPS) || !len.is_finite() {
                return Err(Error::InvalidPath(alloc::format!(
                    "segment {i} has non-positive length {len}"
                )));
            }
            if let Segment::Arc { radius, .. } = seg {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidPath(alloc::format!("segment {i} has radius {radius}")));
                }
            }
            if i > 0 {
                let gap = euclidean_distance(segments[i - 1].end_point(), seg.start_point());
                if gap > 1e-6 {
                    return Err(Error::InvalidPath(alloc::format!(
                        "segments {} and {i} are {gap} m apart",
                        i - 1
                    )));
                }
            }
            offsets.push(total);
            total += len;
        }
        Ok(Path {
            segments,
            offsets,
            length: total,
            entry_tag: entry_tag.into(),
            exit_tag: exit_tag.into(),
        })
    }

    /// Recomputes the cached arc-length table, e.g. after deserialization.
    pub fn rebuild(self) -> Result<Self> {
        let Path {
            segments,
            entry_tag,
            exit_tag,
            ..
        } = self;
        Path::new(segments, &entry_tag, &exit_tag)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, self.length);
        let idx = self.offsets.iter().rposition(|&o| o <= s).unwrap_or(0);
        (idx, s - self.offsets[idx])
    }

    /// Position and unit tangent at arc length `s` (clamped to the path).
    pub fn pose_at(&self, s: f64) -> (Vec2, Vec2) {
        let (idx, local) = self.locate(s);
        self.segments[idx].pose_at(local)
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        self.pose_at(s).0
    }

    /// Arc length of the point on the path nearest to `p`.
    pub fn project(&self, p: Vec2) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (seg, &offset) in self.segments.iter().zip(&self.offsets) {
            let local = project_on_segment(seg, p);
            let d = euclidean_distance(seg.point_at(local), p);
            if d < best.0 {
                best = (d, offset + local);
            }
        }
        best.1
    }
}

fn project_on_segment(seg: &Segment, p: Vec2) -> f64 {
    match *seg {
        Segment::Line { start, end } => {
            let d = end - start;
            let len = d.norm();
            ((p - start).dot(d) / len).clamp(0.0, len)
        }
        Segment::Arc {
            center,
            radius,
            start_angle,
            sweep,
        } => {
            let rel = p - center;
            if rel.norm() < GEOM_EPS {
                return 0.0;
            }
            match arc_param(rel.angle(), start_angle, sweep) {
                Some(delta) => delta * radius,
                None => {
                    let len = radius * sweep.abs();
                    if euclidean_distance(seg.point_at(0.0), p) <= euclidean_distance(seg.point_at(len), p) {
                        0.0
                    } else {
                        len
                    }
                }
            }
        }
    }
}

fn wrap_positive(angle: f64) -> f64 {
    let w = angle - TAU * math::floor(angle / TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Angular offset of `theta` from the arc start in the sweep direction, or
/// `None` when `theta` is outside the arc.
fn arc_param(theta: f64, start_angle: f64, sweep: f64) -> Option<f64> {
    let mut delta = if sweep >= 0.0 {
        wrap_positive(theta - start_angle)
    } else {
        wrap_positive(start_angle - theta)
    };
    let ang_eps = 1e-9;
    if delta > TAU - ang_eps {
        delta = 0.0;
    }
    if delta <= sweep.abs() + ang_eps {
        Some(delta.min(sweep.abs()))
    } else {
        None
    }
}

/// Intersection of two segments as `(point, local s on a, local s on b)`.
/// Overlapping collinear or co-circular pieces report their overlap ends.
fn segment_intersections(a: &Segment, b: &Segment) -> Vec<(Vec2, f64, f64)> {
    let mut out = Vec::new();
    match (*a, *b) {
        (Segment::Line { start: p0, end: p1 }, Segment::Line { start: q0, end: q1 }) => {
            let d1 = p1 - p0;
            let d2 = q1 - q0;
            let denom = d1.cross(d2);
            let l1 = d1.norm();
            let l2 = d2.norm();
            if denom.abs() <= 1e-12 * l1 * l2 {
                if ((q0 - p0).cross(d1) / l1).abs() > GEOM_EPS {
                    return out;
                }
                for p in [p0, p1, q0, q1] {
                    let sa = (p - p0).dot(d1) / l1;
                    let sb = (p - q0).dot(d2) / l2;
                    if (-GEOM_EPS..=l1 + GEOM_EPS).contains(&sa) && (-GEOM_EPS..=l2 + GEOM_EPS).contains(&sb) {
                        out.push((p, sa.clamp(0.0, l1), sb.clamp(0.0, l2)));
                    }
                }
            } else {
                let u = (q0 - p0).cross(d2) / denom;
                let v = (q0 - p0).cross(d1) / denom;
                let tol_u = GEOM_EPS / l1;
                let tol_v = GEOM_EPS / l2;
                if (-tol_u..=1.0 + tol_u).contains(&u) && (-tol_v..=1.0 + tol_v).contains(&v) {
                    let u = u.clamp(0.0, 1.0);
                    out.push((p0 + d1 * u, u * l1, v.clamp(0.0, 1.0) * l2));
                }
            }
        }
        (Segment::Line { .. }, Segment::Arc { .. }) => {
            for (p, sb, sa) in line_arc(b, a) {
                out.push((p, sa, sb));
            }
        }
        (Segment::Arc { .. }, Segment::Line { .. }) => {
            out = line_arc(a, b);
        }
        (
            Segment::Arc {
                center: c1,
                radius: r1,
                start_angle: a1,
                sweep: w1,
            },
            Segment::Arc {
                center: c2,
                radius: r2,
                start_angle: a2,
                sweep: w2,
            },
        ) => {
            let d = (c2 - c1).norm();
            if d < GEOM_EPS && (r1 - r2).abs() < GEOM_EPS {
                // Same circle: report overlap end points.
                for p in [a.start_point(), a.end_point(), b.start_point(), b.end_point()] {
                    let theta1 = (p - c1).angle();
                    let theta2 = (p - c2).angle();
                    if let (Some(t1), Some(t2)) = (arc_param(theta1, a1, w1), arc_param(theta2, a2, w2)) {
                        out.push((p, t1 * r1, t2 * r2));
                    }
                }
                return out;
            }
            if d > r1 + r2 + GEOM_EPS || d < (r1 - r2).abs() - GEOM_EPS || d < GEOM_EPS {
                return out;
            }
            let along = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
            let h = math::sqrt((r1 * r1 - along * along).max(0.0));
            let ex = (c2 - c1) * (1.0 / d);
            let base = c1 + ex * along;
            let perp = Vec2::new(-ex.y, ex.x);
            let pts: Vec<Vec2> = if h < GEOM_EPS {
                alloc::vec![base]
            } else {
                alloc::vec![base + perp * h, base - perp * h]
            };
            for p in pts {
                if let (Some(t1), Some(t2)) = (
                    arc_param((p - c1).angle(), a1, w1),
                    arc_param((p - c2).angle(), a2, w2),
                ) {
                    out.push((p, t1 * r1, t2 * r2));
                }
            }
        }
    }
    out
}

/// Intersections of an arc (first) and a line (second).
fn line_arc(arc: &Segment, line: &Segment) -> Vec<(Vec2, f64, f64)> {
    let mut out = Vec::new();
    let (Segment::Arc {
        center,
        radius,
        start_angle,
        sweep,
    }, Segment::Line { start, end }) = (*arc, *line)
    else {
        return out;
    };
    let d = end - start;
    let len = d.norm();
    let f = start - center;
    let qa = d.norm_sq();
    let qb = 2.0 * f.dot(d);
    let qc = f.norm_sq() - radius * radius;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        // Tangency within rounding.
        if disc > -1e-9 * qa * radius * radius {
            let u = -qb / (2.0 * qa);
            push_line_arc(&mut out, u, start, d, len, center, radius, start_angle, sweep);
        }
        return out;
    }
    let root = math::sqrt(disc);
    let u1 = (-qb - root) / (2.0 * qa);
    let u2 = (-qb + root) / (2.0 * qa);
    push_line_arc(&mut out, u1, start, d, len, center, radius, start_angle, sweep);
    if (u2 - u1).abs() * len > GEOM_EPS {
        push_line_arc(&mut out, u2, start, d, len, center, radius, start_angle, sweep);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn push_line_arc(
    out: &mut Vec<(Vec2, f64, f64)>,
    u: f64,
    start: Vec2,
    d: Vec2,
    len: f64,
    center: Vec2,
    radius: f64,
    start_angle: f64,
    sweep: f64,
) {
    let tol = GEOM_EPS / len;
    if !(-tol..=1.0 + tol).contains(&u) {
        return;
    }
    let u = u.clamp(0.0, 1.0);
    let p = start + d * u;
    if let Some(t) = arc_param((p - center).angle(), start_angle, sweep) {
        out.push((p, t * radius, u * len));
    }
}

/// First intersection of two planned paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictPoint {
    pub position: Vec2,
    /// Arc length of the conflict point along the first path.
    pub s_first: f64,
    /// Arc length of the conflict point along the second path.
    pub s_second: f64,
}

/// Earliest intersection of `first` and `second`, ordered by arc length
/// along `second`. `None` when the paths never meet.
pub fn conflict_point(first: &Path, second: &Path) -> Option<ConflictPoint> {
    let mut best: Option<ConflictPoint> = None;
    for (sa, &oa) in first.segments.iter().zip(&first.offsets) {
        for (sb, &ob) in second.segments.iter().zip(&second.offsets) {
            for (p, la, lb) in segment_intersections(sa, sb) {
                let cand = ConflictPoint {
                    position: p,
                    s_first: oa + la,
                    s_second: ob + lb,
                };
                let better = match best {
                    None => true,
                    Some(b) => {
                        cand.s_second < b.s_second - 1e-9
                            || ((cand.s_second - b.s_second).abs() <= 1e-9 && cand.s_first < b.s_first)
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
        }
    }
    best
}
