//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's geometry or enumeration code.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

use cliquezone::geometry::Point;
use cliquezone::instance::{DemandTable, Edge, Node, NodeId};
use cliquezone::Instance;
use rand::Rng;

/// Complete bidirectional graph with Euclidean arc weights.
pub fn euclidean_instance(points: &[Point], max_diameter: f64, num_zones: usize) -> Instance {
    let nodes: Vec<Node> = points.iter().enumerate().map(|(i, p)| Node::new(i, p.x, p.y)).collect();
    let mut edges = Vec::new();
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i != j {
                edges.push(Edge::new(i, j, points[i].distance(&points[j])));
            }
        }
    }
    Instance::new(nodes, edges, DemandTable::new(), "units", max_diameter, num_zones).unwrap()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(p: Point, a: Point, b: Point, tol: f64) -> bool {
    let len = a.distance(&b);
    if len <= tol {
        return p.distance(&a) <= tol;
    }
    if orient(a, b, p).abs() > tol * len {
        return false;
    }
    let t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (len * len);
    (-tol..=1.0 + tol).contains(&t)
}

fn in_triangle(p: Point, a: Point, b: Point, c: Point, tol: f64) -> bool {
    let s = orient(a, b, c);
    if s == 0.0 {
        return false;
    }
    let sign = s.signum();
    [(a, b), (b, c), (c, a)].iter().all(|&(u, v)| sign * orient(u, v, p) >= -tol * u.distance(&v))
}

/// Convex-hull membership by Caratheodory: `p` lies in the hull of `pts`
/// iff it coincides with a point, lies on a segment, or lies in a triangle.
pub fn in_hull_caratheodory(p: Point, pts: &[Point], tol: f64) -> bool {
    let k = pts.len();
    for i in 0..k {
        if p.distance(&pts[i]) <= tol {
            return true;
        }
        for j in i + 1..k {
            if on_segment(p, pts[i], pts[j], tol) {
                return true;
            }
            for l in j + 1..k {
                if in_triangle(p, pts[i], pts[j], pts[l], tol) {
                    return true;
                }
            }
        }
    }
    false
}

/// Gift-wrapping hull, counterclockwise, collinear boundary points dropped.
pub fn jarvis_hull(pts: &[Point]) -> Vec<Point> {
    let mut uniq: Vec<Point> = Vec::new();
    for &p in pts {
        if !uniq.contains(&p) {
            uniq.push(p);
        }
    }
    if uniq.len() < 3 {
        return uniq;
    }
    let start = (0..uniq.len())
        .min_by(|&a, &b| uniq[a].x.total_cmp(&uniq[b].x).then(uniq[a].y.total_cmp(&uniq[b].y)))
        .unwrap();
    let mut hull = vec![start];
    let mut cur = start;
    loop {
        let mut next = if cur == 0 { 1 } else { 0 };
        for cand in 0..uniq.len() {
            if cand == cur {
                continue;
            }
            let o = orient(uniq[cur], uniq[next], uniq[cand]);
            let farther = uniq[cur].distance(&uniq[cand]) > uniq[cur].distance(&uniq[next]);
            if o < 0.0 || (o == 0.0 && farther) {
                next = cand;
            }
        }
        if next == start {
            break;
        }
        hull.push(next);
        cur = next;
        if hull.len() > uniq.len() {
            break;
        }
    }
    hull.into_iter().map(|i| uniq[i]).collect()
}

pub fn in_convex_polygon(p: Point, hull: &[Point], tol: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => p.distance(&hull[0]) <= tol,
        2 => on_segment(p, hull[0], hull[1], tol),
        k => (0..k).all(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % k]);
                orient(a, b, p) >= -tol * a.distance(&b)
            }),
    }
}

pub fn shareable(inst: &Instance, u: usize, v: usize) -> bool {
    let c = inst.distances();
    c.at(u, v).max(c.at(v, u)) <= inst.max_diameter()
}

/// All nonempty D-bounded subsets that contain every node lying in their
/// hull and shareable with all members. Exponential; `n <= 14`.
pub fn brute_force_cliques(inst: &Instance, tol: f64) -> BTreeSet<Vec<usize>> {
    let n = inst.num_nodes();
    assert!(n <= 14);
    let pos = inst.positions();
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let bounded = members.iter().enumerate().all(|(a, &u)| members[a + 1..].iter().all(|&v| shareable(inst, u, v)));
        if !bounded {
            continue;
        }
        let pts: Vec<Point> = members.iter().map(|&i| pos[i]).collect();
        let closed = (0..n).filter(|v| mask >> v & 1 == 0).all(|v| {
            !(members.iter().all(|&u| shareable(inst, u, v)) && in_hull_caratheodory(pos[v], &pts, tol))
        });
        if closed {
            out.insert(members);
        }
    }
    out
}

/// Random weighted coverage case: node count, demand, candidate sets, budget.
pub struct CoverageCase {
    pub num_nodes: usize,
    pub demand: DemandTable,
    pub candidates: Vec<Vec<NodeId>>,
    pub budget: usize,
}

pub fn random_coverage_case<R: Rng>(rng: &mut R) -> CoverageCase {
    let num_nodes = rng.random_range(4..=10);
    let mut demand = DemandTable::new();
    for i in 0..num_nodes {
        for j in 0..num_nodes {
            if rng.random_bool(0.5) {
                // mix of integral and fractional weights, including self-pairs
                let v = if rng.random_bool(0.5) { rng.random_range(1..6) as f64 } else { rng.random::<f64>() };
                demand.set(NodeId::from_index(i), NodeId::from_index(j), v).unwrap();
            }
        }
    }
    let count = rng.random_range(1..=25);
    let candidates = (0..count)
        .map(|_| {
            let size = rng.random_range(1..=num_nodes.min(5));
            let mut s: Vec<usize> = (0..num_nodes).collect();
            for k in 0..size {
                let j = rng.random_range(k..num_nodes);
                s.swap(k, j);
            }
            let mut s: Vec<NodeId> = s[..size].iter().map(|&i| NodeId::from_index(i)).collect();
            s.sort();
            s
        })
        .collect();
    CoverageCase { num_nodes, demand, candidates, budget: rng.random_range(1..=4) }
}

/// Best served demand over every selection of at most `budget` candidates,
/// computed directly from the demand table.
pub fn best_coverage(case: &CoverageCase) -> f64 {
    let l = case.candidates.len();
    let mut best = 0.0f64;
    let mut stack: Vec<usize> = Vec::new();
    fn rec(case: &CoverageCase, start: usize, l: usize, stack: &mut Vec<usize>, best: &mut f64) {
        let zones: Vec<&Vec<NodeId>> = stack.iter().map(|&i| &case.candidates[i]).collect();
        let value: f64 = case
            .demand
            .iter()
            .filter(|(o, d, _)| zones.iter().any(|z| z.contains(o) && z.contains(d)))
            .map(|(_, _, v)| v)
            .sum();
        *best = best.max(value);
        if stack.len() == case.budget {
            return;
        }
        for i in start..l {
            stack.push(i);
            rec(case, i + 1, l, stack, best);
            stack.pop();
        }
    }
    rec(case, 0, l, &mut stack, &mut best);
    best
}

/// Solves an LP/MIP file with HiGHS through Python. `None` when Python or
/// the `highspy` module is not available.
pub fn highs_objective(lp: &Path) -> Option<f64> {
    let script = "import sys, highspy\n\
                  h = highspy.Highs()\n\
                  h.setOptionValue('output_flag', False)\n\
                  h.setOptionValue('mip_rel_gap', 0.0)\n\
                  h.readModel(sys.argv[1])\n\
                  h.run()\n\
                  print(repr(h.getInfo().objective_function_value))\n";
    let out = Command::new("python3").arg("-c").arg(script).arg(lp).output().ok()?;
    if !out.status.success() {
        return None;
    }
    String::from_utf8(out.stdout).ok()?.trim().parse().ok()
}

pub fn highs_available() -> bool {
    Command::new("python3")
        .args(["-c", "import highspy"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}
