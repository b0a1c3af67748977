//! Delaunay triangulation of the synthetic point set.

use std::collections::BTreeSet;

use crate::geometry::Point;

/// Triangles of the Delaunay triangulation as counterclockwise index
/// triples, or `None` if the points are all collinear (or fewer than three).
pub fn triangulate(points: &[Point]) -> Option<Vec<[usize; 3]>> {
    if points.len() < 3 {
        return None;
    }
    let pts: Vec<delaunator::Point> = points.iter().map(|p| delaunator::Point { x: p.x, y: p.y }).collect();
    let t = delaunator::triangulate(&pts);
    if t.triangles.is_empty() {
        return None;
    }
    // delaunator emits clockwise triangles in a y-up frame
    Some(t.triangles.chunks_exact(3).map(|c| [c[0], c[2], c[1]]).collect())
}

/// Undirected edges `(a, b)` with `a < b`, sorted.
pub fn edges(triangles: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut set = BTreeSet::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            set.insert((a.min(b), a.max(b)));
        }
    }
    set.into_iter().collect()
}
