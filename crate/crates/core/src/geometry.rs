//! Planar convex hulls and hull containment.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Containment tolerance used when none is configured, in instance length units.
pub const DEFAULT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// `(b - a) x (c - a)`; positive when `a, b, c` turn counterclockwise.
#[inline]
pub fn cross(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Convex hull of a point set. Polygon vertices are counterclockwise and in
/// strictly convex position.
#[derive(Clone, Debug, PartialEq)]
pub enum HullPolygon {
    Point(Point),
    Segment(Point, Point),
    Polygon(Vec<Point>),
}

impl HullPolygon {
    pub fn vertices(&self) -> Vec<Point> {
        match self {
            HullPolygon::Point(p) => vec![*p],
            HullPolygon::Segment(a, b) => vec![*a, *b],
            HullPolygon::Polygon(v) => v.clone(),
        }
    }

    /// Twice the signed area; zero for degenerate hulls.
    pub fn doubled_area(&self) -> f64 {
        match self {
            HullPolygon::Polygon(v) => (0..v.len())
                .map(|i| {
                    let (a, b) = (v[i], v[(i + 1) % v.len()]);
                    a.x * b.y - a.y * b.x
                })
                .sum(),
            _ => 0.0,
        }
    }

    pub fn contains(&self, p: Point, eps: f64) -> bool {
        point_in_hull(p, self, eps)
    }
}

fn lex(a: &Point, b: &Point) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

/// Andrew's monotone chain. Duplicate points are removed first and collinear
/// points on hull edges are dropped from the vertex list.
pub fn convex_hull(points: &[Point]) -> Result<HullPolygon> {
    if points.is_empty() {
        return Err(Error::EmptyInput("convex hull of zero points"));
    }
    if let Some(bad) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite hull input at index {bad}")));
    }
    let mut pts = points.to_vec();
    pts.sort_by(lex);
    pts.dedup();
    Ok(hull_of_sorted(&pts))
}

fn hull_of_sorted(pts: &[Point]) -> HullPolygon {
    match pts.len() {
        1 => return HullPolygon::Point(pts[0]),
        2 => return HullPolygon::Segment(pts[0], pts[1]),
        _ => {}
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    match hull.len() {
        // all points collinear: the chain collapses onto the two extremes
        0 | 1 => HullPolygon::Point(pts[0]),
        2 => HullPolygon::Segment(hull[0], hull[1]),
        _ => HullPolygon::Polygon(hull),
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(&a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&Point::new(a.x + t * dx, a.y + t * dy))
}

/// True when `p` is inside the hull or within `eps` of it. For polygons the
/// signed distance to every edge line must be at least `-eps`.
pub fn point_in_hull(p: Point, hull: &HullPolygon, eps: f64) -> bool {
    match hull {
        HullPolygon::Point(q) => p.distance(q) <= eps,
        HullPolygon::Segment(a, b) => segment_distance(p, *a, *b) <= eps,
        HullPolygon::Polygon(v) => (0..v.len()).all(|i| {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            let len = a.distance(&b);
            cross(a, b, p) >= -eps * len
        }),
    }
}
