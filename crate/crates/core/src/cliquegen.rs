//! Candidate zone enumeration.
//!
//! A candidate is a set of nodes whose pairwise distances (taken in the worse
//! direction) are all within `D`, and that is closed under convex-hull
//! extension: no other node lying inside its planar hull is shareable with
//! every member. Enumeration starts from the singletons and grows each clique
//! by one shareable node at a time; every grown candidate is hull-extended
//! before insertion, and a `visited` set keyed by sorted member tuples keeps
//! each combination from being expanded twice.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{convex_hull, point_in_hull, Point, DEFAULT_EPS};
use crate::instance::{zone_diameter, DistanceMatrix, Instance, NodeId};
use crate::nodeset::NodeSet;

pub const DEFAULT_CLIQUE_CAP: usize = 10_000_000;

/// Two nodes are shareable when `max{c(u,v), c(v,u)} <= D`.
#[inline]
pub fn shareable(u: NodeId, v: NodeId, distances: &DistanceMatrix, max_diameter: f64) -> bool {
    distances.symmetric_max(u.index(), v.index()) <= max_diameter
}

/// Row `u` holds every node shareable with `u`, including `u` itself.
#[derive(Clone, Debug)]
pub struct ShareGraph {
    rows: Vec<NodeSet>,
}

impl ShareGraph {
    pub fn new(distances: &DistanceMatrix, max_diameter: f64) -> Self {
        let n = distances.len();
        let rows = (0..n)
            .map(|u| {
                NodeSet::from_indices(
                    n,
                    (0..n).filter(|&v| u == v || distances.symmetric_max(u, v) <= max_diameter),
                )
            })
            .collect();
        ShareGraph { rows }
    }

    pub fn row(&self, u: usize) -> &NodeSet {
        &self.rows[u]
    }

    /// Nodes outside `members` shareable with all of them.
    pub fn common(&self, members: &NodeSet) -> NodeSet {
        let mut common = NodeSet::full(self.rows.len());
        for u in members.iter() {
            common.intersect_with(&self.rows[u]);
        }
        common.difference_with(members);
        common
    }
}

/// A D-bounded candidate zone with canonically sorted members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clique {
    members: Vec<NodeId>,
    diameter: f64,
}

impl Clique {
    pub fn new(mut members: Vec<NodeId>, distances: &DistanceMatrix) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyInput("clique without members"));
        }
        members.sort_unstable();
        members.dedup();
        if let Some(&v) = members.iter().find(|v| v.index() >= distances.len()) {
            return Err(Error::NodeOutOfRange { id: v.0, num_nodes: distances.len() });
        }
        let diameter = zone_diameter(&members, distances);
        Ok(Clique { members, diameter })
    }

    fn from_set(set: &NodeSet, distances: &DistanceMatrix) -> Self {
        let members = set.to_ids();
        let diameter = zone_diameter(&members, distances);
        Clique { members, diameter }
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn cardinality(&self) -> usize {
        self.members.len()
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }
}

impl AsRef<[NodeId]> for Clique {
    fn as_ref(&self) -> &[NodeId] {
        &self.members
    }
}

/// Sorted member tuples that have already been processed.
#[derive(Debug, Default)]
pub struct VisitedSet {
    seen: HashSet<NodeSet>,
}

impl VisitedSet {
    /// Marks a tuple as visited; false if it was already present.
    pub fn insert(&mut self, members: &NodeSet) -> bool {
        if self.seen.contains(members) {
            return false;
        }
        self.seen.insert(members.clone())
    }

    pub fn contains(&self, members: &NodeSet) -> bool {
        self.seen.contains(members)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Generated candidates in canonical order: by cardinality, then members.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CliqueList {
    cliques: Vec<Clique>,
    by_cardinality: BTreeMap<usize, std::ops::Range<usize>>,
}

impl CliqueList {
    pub fn from_cliques(mut cliques: Vec<Clique>) -> Self {
        cliques.sort_by(|a, b| a.cardinality().cmp(&b.cardinality()).then_with(|| a.members.cmp(&b.members)));
        cliques.dedup_by(|a, b| a.members == b.members);
        let mut by_cardinality = BTreeMap::new();
        let mut start = 0;
        while start < cliques.len() {
            let k = cliques[start].cardinality();
            let end = start + cliques[start..].iter().take_while(|c| c.cardinality() == k).count();
            by_cardinality.insert(k, start..end);
            start = end;
        }
        CliqueList { cliques, by_cardinality }
    }

    pub fn cliques(&self) -> &[Clique] {
        &self.cliques
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Clique> {
        self.cliques.iter()
    }

    pub fn with_cardinality(&self, k: usize) -> &[Clique] {
        self.by_cardinality.get(&k).map_or(&[], |r| &self.cliques[r.clone()])
    }

    pub fn count_by_cardinality(&self) -> BTreeMap<usize, usize> {
        count_by_cardinality(&self.cliques)
    }

    /// Drops cliques whose members do not induce a weakly connected subgraph.
    pub fn retain_connected(self, instance: &Instance) -> Self {
        let kept = self.cliques.into_iter().filter(|c| instance.is_weakly_connected(&c.members)).collect();
        Self::from_cliques(kept)
    }
}

/// Histogram of clique sizes.
pub fn count_by_cardinality(cliques: &[Clique]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for c in cliques {
        *counts.entry(c.cardinality()).or_insert(0) += 1;
    }
    counts
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CliqueGenConfig {
    pub eps: f64,
    pub max_cliques: usize,
}

impl Default for CliqueGenConfig {
    fn default() -> Self {
        CliqueGenConfig { eps: DEFAULT_EPS, max_cliques: DEFAULT_CLIQUE_CAP }
    }
}

/// Adds hull nodes to `members` until none qualifies. `eligible` must hold
/// the non-members already known to be shareable with every member; it is
/// narrowed as nodes join.
fn extend_in_place(members: &mut NodeSet, mut eligible: NodeSet, positions: &[Point], share: &ShareGraph, eps: f64) {
    loop {
        if eligible.is_empty() {
            return;
        }
        let pts: Vec<Point> = members.iter().map(|i| positions[i]).collect();
        let hull = convex_hull(&pts).expect("clique members are nonempty with finite positions");
        let mut grew = false;
        // a point inside the hull leaves the hull unchanged, so one pass
        // suffices except for additions inside the tolerance band
        let candidates: Vec<usize> = eligible.iter().collect();
        for w in candidates {
            if eligible.contains(w) && point_in_hull(positions[w], &hull, eps) {
                members.insert(w);
                eligible.intersect_with(share.row(w));
                eligible.remove(w);
                grew = true;
            }
        }
        if !grew {
            return;
        }
    }
}

/// Repeatedly adds any node outside `members` that is shareable with every
/// current member and lies in the current hull, scanning nodes in ascending id
/// order. Returns the fixpoint as a new clique.
pub fn convex_hull_extend(
    members: &[NodeId],
    positions: &[Point],
    distances: &DistanceMatrix,
    max_diameter: f64,
    eps: f64,
) -> Result<Clique> {
    let n = distances.len();
    if positions.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: positions.len() });
    }
    let seed = Clique::new(members.to_vec(), distances)?;
    let share = ShareGraph::new(distances, max_diameter);
    let mut set = NodeSet::from_ids(n, &seed.members);
    let eligible = share.common(&set);
    extend_in_place(&mut set, eligible, positions, &share, eps);
    Ok(Clique::from_set(&set, distances))
}

/// Enumerates all D-bounded, hull-closed candidate zones of the instance.
pub fn clique_gen(instance: &Instance, config: &CliqueGenConfig) -> Result<CliqueList> {
    clique_gen_raw(&instance.positions(), instance.distances(), instance.max_diameter(), config)
}

/// [`clique_gen`] on bare positions and distances.
pub fn clique_gen_raw(
    positions: &[Point],
    distances: &DistanceMatrix,
    max_diameter: f64,
    config: &CliqueGenConfig,
) -> Result<CliqueList> {
    let n = distances.len();
    if positions.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: positions.len() });
    }
    if max_diameter.is_nan() || max_diameter < 0.0 {
        return Err(Error::InvalidParameter(format!("max diameter must be >= 0, got {max_diameter}")));
    }
    if n > config.max_cliques {
        return Err(Error::CliqueCapExceeded { cap: config.max_cliques });
    }
    let share = ShareGraph::new(distances, max_diameter);
    let mut visited = VisitedSet::default();
    let mut found: Vec<NodeSet> = Vec::new();
    // pending[k] = cliques of cardinality k not yet grown
    let mut pending: BTreeMap<usize, Vec<NodeSet>> = BTreeMap::new();
    for v in 0..n {
        let single = NodeSet::from_indices(n, [v]);
        visited.insert(&single);
        found.push(single.clone());
        pending.entry(1).or_default().push(single);
    }

    // Hull extension can jump several cardinalities at once, so levels are
    // drained in increasing order until nothing is pending.
    while let Some((k, frontier)) = pending.pop_first() {
        log::debug!("cliquegen: growing {} cliques of cardinality {k}", frontier.len());
        let grown: Vec<Vec<(NodeSet, NodeSet)>> = frontier
            .par_iter()
            .map(|clique| {
                let common = share.common(clique);
                let mut out = Vec::new();
                for v in common.iter() {
                    let mut candidate = clique.clone();
                    candidate.insert(v);
                    if visited.contains(&candidate) {
                        continue;
                    }
                    let mut eligible = common.clone();
                    eligible.intersect_with(share.row(v));
                    eligible.remove(v);
                    let mut extended = candidate.clone();
                    extend_in_place(&mut extended, eligible, positions, &share, config.eps);
                    out.push((candidate, extended));
                }
                out
            })
            .collect();
        for (candidate, extended) in grown.into_iter().flatten() {
            if !visited.insert(&candidate) {
                continue;
            }
            if extended != candidate && !visited.insert(&extended) {
                continue;
            }
            if found.len() >= config.max_cliques {
                return Err(Error::CliqueCapExceeded { cap: config.max_cliques });
            }
            found.push(extended.clone());
            pending.entry(extended.len()).or_default().push(extended);
        }
    }

    let cliques = found.iter().map(|s| Clique::from_set(s, distances)).collect();
    Ok(CliqueList::from_cliques(cliques))
}

/// Cliques that leave a node inside their hull out because it is not
/// shareable with every member. These can occur when network distances are
/// not consistent with planar geometry.
pub fn hull_open_cliques(list: &CliqueList, positions: &[Point], eps: f64) -> Vec<usize> {
    let n = positions.len();
    list.iter()
        .enumerate()
        .filter(|(_, c)| c.cardinality() > 1)
        .filter(|(_, c)| {
            let set = NodeSet::from_ids(n, &c.members);
            let pts: Vec<Point> = c.members.iter().map(|v| positions[v.index()]).collect();
            let hull = convex_hull(&pts).expect("nonempty");
            (0..n).any(|w| !set.contains(w) && point_in_hull(positions[w], &hull, eps))
        })
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliqueFileHeader {
    pub max_diameter: f64,
    pub num_nodes: usize,
    pub generation_seconds: f64,
    pub count_by_cardinality: BTreeMap<usize, usize>,
}

/// On-disk clique list: a metadata header plus sorted member arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliqueFile {
    pub header: CliqueFileHeader,
    pub cliques: Vec<Vec<NodeId>>,
}

impl CliqueFile {
    pub fn new(list: &CliqueList, max_diameter: f64, num_nodes: usize, generation_seconds: f64) -> Self {
        CliqueFile {
            header: CliqueFileHeader {
                max_diameter,
                num_nodes,
                generation_seconds,
                count_by_cardinality: list.count_by_cardinality(),
            },
            cliques: list.iter().map(|c| c.members.clone()).collect(),
        }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }

    /// Rebuilds the list against an instance's distances.
    pub fn to_list(&self, distances: &DistanceMatrix) -> Result<CliqueList> {
        if self.header.num_nodes != distances.len() {
            return Err(Error::DimensionMismatch { expected: distances.len(), found: self.header.num_nodes });
        }
        let cliques = self
            .cliques
            .iter()
            .map(|m| Clique::new(m.clone(), distances))
            .collect::<Result<Vec<_>>>()?;
        Ok(CliqueList::from_cliques(cliques))
    }
}

/// Runs [`clique_gen`] and reports wall time in seconds.
pub fn timed_clique_gen(instance: &Instance, config: &CliqueGenConfig) -> Result<(CliqueList, f64)> {
    let start = Instant::now();
    let list = clique_gen(instance, config)?;
    Ok((list, start.elapsed().as_secs_f64()))
}
