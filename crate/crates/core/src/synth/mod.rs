//! Seeded synthetic instances on a pruned, partially directed Delaunay graph.
//!
//! Points are drawn uniformly in a square box and triangulated. Each
//! undirected Delaunay edge becomes a pair of opposed arcs with probability
//! `p_bidir`, otherwise a single arc with a fair-coin direction; each arc is
//! then dropped independently with probability `p_prune`. Arc weights are
//! Euclidean lengths and every ordered pair `i != j` receives demand drawn
//! from the configured law.

pub mod delaunay;
pub mod experiment;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::instance::{DemandTable, Edge, Instance, Node, NodeId};

pub use experiment::{experiment_grid, GridConfig, GridReport, GridRow};

/// Distribution of synthetic per-pair demand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DemandLaw {
    Uniform { low: f64, high: f64 },
    Exponential { mean: f64 },
}

impl Default for DemandLaw {
    fn default() -> Self {
        DemandLaw::Uniform { low: 0.0, high: 1.0 }
    }
}

impl DemandLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DemandLaw::Uniform { low, high } => low.is_finite() && high.is_finite() && 0.0 <= low && low < high,
            DemandLaw::Exponential { mean } => mean.is_finite() && mean > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid demand law {self}")))
        }
    }

    fn sampler(&self) -> Box<dyn Fn(&mut ChaCha8Rng) -> f64> {
        match *self {
            DemandLaw::Uniform { low, high } => {
                let u = Uniform::new(low, high).expect("validated bounds");
                Box::new(move |rng| u.sample(rng))
            }
            DemandLaw::Exponential { mean } => {
                let e = Exp::new(1.0 / mean).expect("validated mean");
                Box::new(move |rng| e.sample(rng))
            }
        }
    }
}

impl fmt::Display for DemandLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DemandLaw::Uniform { low, high } => write!(f, "uniform:{low}:{high}"),
            DemandLaw::Exponential { mean } => write!(f, "exp:{mean}"),
        }
    }
}

/// Parses `uniform:<low>:<high>` or `exp:<mean>`.
impl FromStr for DemandLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{t}' in demand law")));
        let law = match parts.as_slice() {
            ["uniform", lo, hi] => DemandLaw::Uniform { low: num(lo)?, high: num(hi)? },
            ["exp", mean] => DemandLaw::Exponential { mean: num(mean)? },
            _ => return Err(Error::Parse(format!("unknown demand law '{s}'"))),
        };
        law.validate()?;
        Ok(law)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n: usize,
    pub seed: u64,
    pub box_size: f64,
    pub p_bidir: f64,
    pub p_prune: f64,
    pub demand_law: DemandLaw,
}

impl SynthParams {
    pub fn new(n: usize, seed: u64) -> Self {
        SynthParams { n, seed, box_size: 10.0, p_bidir: 0.2, p_prune: 0.2, demand_law: DemandLaw::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidParameter(format!("need at least 3 nodes, got {}", self.n)));
        }
        if !(self.box_size.is_finite() && self.box_size > 0.0) {
            return Err(Error::InvalidParameter(format!("box size must be > 0, got {}", self.box_size)));
        }
        for (name, p) in [("p_bidir", self.p_bidir), ("p_prune", self.p_prune)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        self.demand_law.validate()
    }
}

/// Network part of a synthetic instance before demand and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthNetwork {
    pub points: Vec<Point>,
    /// Undirected Delaunay edges, `a < b`, sorted.
    pub delaunay_edges: Vec<(usize, usize)>,
    pub arcs: Vec<Edge>,
}

const MAX_TRIANGULATION_ATTEMPTS: usize = 8;

fn build_network(params: &SynthParams, rng: &mut ChaCha8Rng) -> Result<SynthNetwork> {
    let side = params.box_size;
    let mut points: Vec<Point> =
        (0..params.n).map(|_| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side)).collect();
    let mut triangles = delaunay::triangulate(&points);
    let mut attempt = 1;
    while triangles.is_none() {
        if attempt >= MAX_TRIANGULATION_ATTEMPTS {
            return Err(Error::InvalidParameter("could not triangulate degenerate point set".into()));
        }
        log::warn!("synth: degenerate point set (seed {}), perturbing, attempt {attempt}", params.seed);
        let jitter = side * 1e-6;
        for p in &mut points {
            p.x = (p.x + (rng.random::<f64>() - 0.5) * jitter).clamp(0.0, side);
            p.y = (p.y + (rng.random::<f64>() - 0.5) * jitter).clamp(0.0, side);
        }
        triangles = delaunay::triangulate(&points);
        attempt += 1;
    }
    let delaunay_edges = delaunay::edges(&triangles.expect("triangulated"));

    let mut arcs = Vec::with_capacity(delaunay_edges.len() * 2);
    for &(a, b) in &delaunay_edges {
        if rng.random::<f64>() < params.p_bidir {
            arcs.push((a, b));
            arcs.push((b, a));
        } else if rng.random::<bool>() {
            arcs.push((a, b));
        } else {
            arcs.push((b, a));
        }
    }
    let arcs = arcs
        .into_iter()
        .filter(|_| rng.random::<f64>() >= params.p_prune)
        .map(|(a, b)| Edge::new(a, b, points[a].distance(&points[b])))
        .collect();
    Ok(SynthNetwork { points, delaunay_edges, arcs })
}

/// Generates the network only; identical RNG consumption to [`generate`].
pub fn generate_network(params: &SynthParams) -> Result<SynthNetwork> {
    params.validate()?;
    build_network(params, &mut ChaCha8Rng::seed_from_u64(params.seed))
}

/// Generates a full instance with the given diameter bound and zone budget.
pub fn generate(params: &SynthParams, max_diameter: f64, num_zones: usize) -> Result<Instance> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let network = build_network(params, &mut rng)?;
    let sample = params.demand_law.sampler();
    let mut demand = DemandTable::new();
    for i in 0..params.n {
        for j in 0..params.n {
            if i != j {
                demand.set(NodeId::from_index(i), NodeId::from_index(j), sample(&mut rng))?;
            }
        }
    }
    let nodes = network.points.iter().enumerate().map(|(i, p)| Node::new(i, p.x, p.y)).collect();
    Instance::new(nodes, network.arcs, demand, "units", max_diameter, num_zones)
}
