//! Problem instance: directed road graph with planar node positions, sparse
//! origin-destination demand, the shortest-path distance matrix, the diameter
//! bound `D` and the zone budget `m`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::ingest::LatLon;
use crate::nodeset::NodeSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub position: Point,
    /// Opaque tag, e.g. a hex cell id.
    pub label: Option<String>,
}

impl Node {
    pub fn new(id: usize, x: f64, y: f64) -> Self {
        Node { id: NodeId::from_index(id), position: Point::new(x, y), label: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub weight: f64,
}

impl Edge {
    pub fn new(from: usize, to: usize, weight: f64) -> Self {
        Edge { from: NodeId::from_index(from), to: NodeId::from_index(to), weight }
    }
}

/// Sparse ordered-pair demand. Absent pairs have zero demand; iteration is in
/// `(origin, dest)` order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DemandTable {
    entries: BTreeMap<(NodeId, NodeId), f64>,
}

impl DemandTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn check(origin: NodeId, dest: NodeId, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidDemand { origin: origin.0, dest: dest.0, value });
        }
        Ok(())
    }

    /// Sets the demand for a pair, replacing any previous value.
    pub fn set(&mut self, origin: NodeId, dest: NodeId, value: f64) -> Result<()> {
        Self::check(origin, dest, value)?;
        self.entries.insert((origin, dest), value);
        Ok(())
    }

    /// Accumulates demand onto a pair.
    pub fn add(&mut self, origin: NodeId, dest: NodeId, value: f64) -> Result<()> {
        Self::check(origin, dest, value)?;
        *self.entries.entry((origin, dest)).or_insert(0.0) += value;
        Ok(())
    }

    pub fn get(&self, origin: NodeId, dest: NodeId) -> f64 {
        self.entries.get(&(origin, dest)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.entries.iter().map(|(&(o, d), &v)| (o, d, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Row-major `n x n` matrix, `dense[o * n + d]`.
    pub fn to_dense(&self, num_nodes: usize) -> Vec<f64> {
        let mut dense = vec![0.0; num_nodes * num_nodes];
        for (o, d, v) in self.iter() {
            if o.index() < num_nodes && d.index() < num_nodes {
                dense[o.index() * num_nodes + d.index()] = v;
            }
        }
        dense
    }

    fn max_node(&self) -> Option<NodeId> {
        self.entries.keys().map(|&(o, d)| o.max(d)).max()
    }
}

/// Sum of every demand entry.
pub fn total_demand(demand: &DemandTable) -> f64 {
    demand.iter().map(|(_, _, v)| v).sum()
}

/// Demand over ordered pairs (including `i == j`) that share at least one
/// zone. A pair covered by several zones counts once.
pub fn served_demand<Z: AsRef<[NodeId]>>(demand: &DemandTable, zones: &[Z]) -> f64 {
    // zones_of[v] = set of zone indices containing v
    let mut zones_of: Vec<Option<NodeSet>> = Vec::new();
    for (z, zone) in zones.iter().enumerate() {
        for &v in zone.as_ref() {
            if zones_of.len() <= v.index() {
                zones_of.resize(v.index() + 1, None);
            }
            zones_of[v.index()].get_or_insert_with(|| NodeSet::empty(zones.len())).insert(z);
        }
    }
    let lookup = |v: NodeId| zones_of.get(v.index()).and_then(Option::as_ref);
    demand
        .iter()
        .filter(|&(o, d, _)| match (lookup(o), lookup(d)) {
            (Some(a), Some(b)) => a.intersects(b),
            _ => false,
        })
        .map(|(_, _, v)| v)
        .sum()
}

/// Dense all-pairs distance matrix; `f64::INFINITY` marks unreachable pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from rows where `None` means unreachable. The diagonal
    /// must be zero; callers that want to repair it use [`Self::from_rows_lenient`].
    pub fn from_rows(rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let (m, fixed) = Self::from_rows_lenient(rows)?;
        if let Some(&i) = fixed.first() {
            return Err(Error::InvalidParameter(format!("distance c({i},{i}) must be 0")));
        }
        Ok(m)
    }

    /// Like [`Self::from_rows`] but forces the diagonal to zero, returning the
    /// indices whose diagonal entry was changed.
    pub fn from_rows_lenient(rows: Vec<Vec<Option<f64>>>) -> Result<(Self, Vec<usize>)> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        let mut fixed = Vec::new();
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            for (j, entry) in row.into_iter().enumerate() {
                let value = match entry {
                    None => f64::INFINITY,
                    Some(v) if v.is_nan() || v < 0.0 => {
                        return Err(Error::NegativeDistance { row: i, col: j, value: v })
                    }
                    Some(v) => v,
                };
                if i == j && value != 0.0 {
                    fixed.push(i);
                    data.push(0.0);
                } else {
                    data.push(value);
                }
            }
        }
        Ok((DistanceMatrix { n, data }, fixed))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, from: NodeId, to: NodeId) -> f64 {
        self.data[from.index() * self.n + to.index()]
    }

    #[inline]
    pub fn at(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.n + to]
    }

    /// `max{c(i,j), c(j,i)}`.
    #[inline]
    pub fn symmetric_max(&self, i: usize, j: usize) -> f64 {
        self.at(i, j).max(self.at(j, i))
    }

    pub fn to_rows(&self) -> Vec<Vec<Option<f64>>> {
        self.data
            .chunks(self.n.max(1))
            .take(self.n)
            .map(|row| row.iter().map(|&v| v.is_finite().then_some(v)).collect())
            .collect()
    }
}

/// Single-source Dijkstra from every node. Rejects negative or non-finite
/// weights.
pub fn all_pairs_shortest_paths(num_nodes: usize, edges: &[Edge]) -> Result<DistanceMatrix> {
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); num_nodes];
    for e in edges {
        if !(e.weight.is_finite() && e.weight >= 0.0) {
            return Err(Error::InvalidEdgeWeight { from: e.from.0, to: e.to.0, weight: e.weight });
        }
        for id in [e.from, e.to] {
            if id.index() >= num_nodes {
                return Err(Error::NodeOutOfRange { id: id.0, num_nodes });
            }
        }
        adjacency[e.from.index()].push((e.to.index(), e.weight));
    }
    let rows: Vec<Vec<f64>> = (0..num_nodes)
        .into_par_iter()
        .map(|source| dijkstra(&adjacency, source))
        .collect();
    Ok(DistanceMatrix { n: num_nodes, data: rows.concat() })
}

fn dijkstra(adjacency: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adjacency.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((OrderedFloat(0.0), source)));
    while let Some(Reverse((OrderedFloat(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adjacency[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((OrderedFloat(nd), v)));
            }
        }
    }
    dist
}

/// Largest `max{c(i,j), c(j,i)}` over member pairs; zero for singletons.
pub fn zone_diameter(members: &[NodeId], distances: &DistanceMatrix) -> f64 {
    let mut diameter: f64 = 0.0;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            diameter = diameter.max(distances.symmetric_max(i.index(), j.index()));
        }
    }
    diameter
}

/// A service zone: a nonempty, sorted, duplicate-free node list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Zone {
    members: Vec<NodeId>,
}

impl Zone {
    pub fn new(mut members: Vec<NodeId>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyInput("zone without members"));
        }
        members.sort_unstable();
        members.dedup();
        Ok(Zone { members })
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self> {
        Self::new(indices.into_iter().map(NodeId::from_index).collect())
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.members.binary_search(&v).is_ok()
    }
}

impl AsRef<[NodeId]> for Zone {
    fn as_ref(&self) -> &[NodeId] {
        &self.members
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceSource {
    /// Shortest paths over the instance's edges.
    Computed,
    /// Loaded from an external matrix (e.g. driving times).
    Supplied,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    demand: DemandTable,
    distances: DistanceMatrix,
    distance_source: DistanceSource,
    units: String,
    max_diameter: f64,
    num_zones: usize,
    anchor: Option<LatLon>,
}

impl Instance {
    /// Validates the graph and demand, then computes shortest-path distances.
    pub fn new(
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        demand: DemandTable,
        units: impl Into<String>,
        max_diameter: f64,
        num_zones: usize,
    ) -> Result<Self> {
        validate_nodes(&nodes)?;
        validate_edges(nodes.len(), &edges)?;
        if let Some(v) = demand.max_node() {
            if v.index() >= nodes.len() {
                return Err(Error::NodeOutOfRange { id: v.0, num_nodes: nodes.len() });
            }
        }
        check_max_diameter(max_diameter)?;
        check_num_zones(num_zones)?;
        let distances = all_pairs_shortest_paths(nodes.len(), &edges)?;
        Ok(Instance {
            nodes,
            edges,
            demand,
            distances,
            distance_source: DistanceSource::Computed,
            units: units.into(),
            max_diameter,
            num_zones,
            anchor: None,
        })
    }

    /// Replaces the computed distances with an externally supplied matrix.
    pub fn with_distances(mut self, distances: DistanceMatrix) -> Result<Self> {
        if distances.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch { expected: self.nodes.len(), found: distances.len() });
        }
        self.distances = distances;
        self.distance_source = DistanceSource::Supplied;
        Ok(self)
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = units.into();
        self
    }

    /// Geographic anchor of the planar projection, when positions are
    /// projected coordinates.
    pub fn with_anchor(mut self, anchor: LatLon) -> Self {
        self.anchor = Some(anchor);
        self
    }

    pub fn set_max_diameter(&mut self, d: f64) -> Result<()> {
        check_max_diameter(d)?;
        self.max_diameter = d;
        Ok(())
    }

    pub fn set_num_zones(&mut self, m: usize) -> Result<()> {
        check_num_zones(m)?;
        self.num_zones = m;
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn demand(&self) -> &DemandTable {
        &self.demand
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.distances
    }

    pub fn distance_source(&self) -> DistanceSource {
        self.distance_source
    }

    pub fn units(&self) -> &str {
        &self.units
    }

    pub fn max_diameter(&self) -> f64 {
        self.max_diameter
    }

    pub fn num_zones(&self) -> usize {
        self.num_zones
    }

    pub fn anchor(&self) -> Option<LatLon> {
        self.anchor
    }

    pub fn total_demand(&self) -> f64 {
        total_demand(&self.demand)
    }

    pub fn served_demand<Z: AsRef<[NodeId]>>(&self, zones: &[Z]) -> f64 {
        served_demand(&self.demand, zones)
    }

    pub fn zone_diameter(&self, members: &[NodeId]) -> f64 {
        zone_diameter(members, &self.distances)
    }

    /// Whether the members induce a weakly connected subgraph.
    pub fn is_weakly_connected(&self, members: &[NodeId]) -> bool {
        let Some(&first) = members.first() else { return true };
        let inside: HashSet<NodeId> = members.iter().copied().collect();
        let mut neighbors: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for e in &self.edges {
            if inside.contains(&e.from) && inside.contains(&e.to) {
                neighbors.entry(e.from).or_default().push(e.to);
                neighbors.entry(e.to).or_default().push(e.from);
            }
        }
        let mut seen = HashSet::from([first]);
        let mut stack = vec![first];
        while let Some(u) = stack.pop() {
            for &v in neighbors.get(&u).into_iter().flatten() {
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.len() == inside.len()
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            units: self.units.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord { id: n.id, x: n.position.x, y: n.position.y, label: n.label.clone() })
                .collect(),
            edges: self.edges.clone(),
            demand: self.demand.iter().collect(),
            distances: (self.distance_source == DistanceSource::Supplied).then(|| self.distances.to_rows()),
            max_diameter: Some(self.max_diameter),
            num_zones: Some(self.num_zones),
            anchor: self.anchor,
        }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, &self.to_file())?;
        Ok(())
    }

    /// Reads an instance; the file must define `max_diameter` and `num_zones`.
    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let file: InstanceFile = serde_json::from_reader(reader)?;
        file.into_instance(None, None)
    }
}

fn check_max_diameter(d: f64) -> Result<()> {
    if d.is_nan() || d <= 0.0 {
        return Err(Error::InvalidParameter(format!("max diameter must be > 0, got {d}")));
    }
    Ok(())
}

fn check_num_zones(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("number of zones must be >= 1".into()));
    }
    Ok(())
}

fn validate_nodes(nodes: &[Node]) -> Result<()> {
    for (position, node) in nodes.iter().enumerate() {
        if node.id.index() != position {
            return Err(Error::NonDenseNodeIds { position, found: node.id.0 });
        }
        if !(node.position.x.is_finite() && node.position.y.is_finite()) {
            return Err(Error::NonFinitePosition(node.id.0));
        }
    }
    Ok(())
}

fn validate_edges(num_nodes: usize, edges: &[Edge]) -> Result<()> {
    let mut seen = HashSet::with_capacity(edges.len());
    for e in edges {
        for id in [e.from, e.to] {
            if id.index() >= num_nodes {
                return Err(Error::NodeOutOfRange { id: id.0, num_nodes });
            }
        }
        if e.from == e.to {
            return Err(Error::SelfLoop(e.from.0));
        }
        if !(e.weight.is_finite() && e.weight >= 0.0) {
            return Err(Error::InvalidEdgeWeight { from: e.from.0, to: e.to.0, weight: e.weight });
        }
        if !seen.insert((e.from, e.to)) {
            return Err(Error::DuplicateEdge { from: e.from.0, to: e.to.0 });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// On-disk instance format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub units: String,
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub demand: Vec<(NodeId, NodeId, f64)>,
    /// Row-major, `null` = unreachable. Overrides shortest paths over `edges`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<Option<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_diameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_zones: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<LatLon>,
}

impl InstanceFile {
    /// Builds the instance, with `max_diameter` / `num_zones` overrides taking
    /// precedence over the values stored in the file.
    pub fn into_instance(self, max_diameter: Option<f64>, num_zones: Option<usize>) -> Result<Instance> {
        let d = max_diameter
            .or(self.max_diameter)
            .ok_or_else(|| Error::InvalidParameter("max_diameter not set".into()))?;
        let m = num_zones
            .or(self.num_zones)
            .ok_or_else(|| Error::InvalidParameter("num_zones not set".into()))?;
        let nodes = self
            .nodes
            .into_iter()
            .map(|r| Node { id: r.id, position: Point::new(r.x, r.y), label: r.label })
            .collect();
        let mut demand = DemandTable::new();
        for (o, dst, v) in self.demand {
            demand.add(o, dst, v)?;
        }
        let mut instance = Instance::new(nodes, self.edges, demand, self.units, d, m)?;
        if let Some(rows) = self.distances {
            instance = instance.with_distances(DistanceMatrix::from_rows(rows)?)?;
        }
        instance.anchor = self.anchor;
        Ok(instance)
    }
}
