//! Zone selection as a weighted maximum coverage problem.
//!
//! Elements are ordered node pairs weighted by demand; each candidate zone
//! covers the pairs with both endpoints inside it. The integer program is
//!
//! ```text
//! maximize   sum_ij d_ij y_ij
//! subject to sum_S x_S <= m
//!            y_ij <= sum_{S : i,j in S} x_S      for every coverable pair
//!            x, y binary
//! ```
//!
//! [`solve_exact`] solves it by depth-first branch and bound over candidate
//! inclusion, [`greedy_select`] gives the classical marginal-gain heuristic,
//! [`brute_force_select`] enumerates every selection, and [`export_lp`] writes
//! the program for external MILP solvers.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::io::{Read, Write};
use std::time::{Duration, Instant};

use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::instance::{DemandTable, Instance, NodeId};
use crate::nodeset::NodeSet;

pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(600);
pub const DEFAULT_BRUTE_FORCE_CAP: u128 = 1_000_000;

/// Indicator vector of a candidate over all nodes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MembershipVector(NodeSet);

impl MembershipVector {
    pub fn popcount(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.0.contains(v.index())
    }

    pub fn as_set(&self) -> &NodeSet {
        &self.0
    }
}

#[derive(Clone, Debug)]
pub struct Candidate {
    members: Vec<NodeId>,
    membership: MembershipVector,
    weight: f64,
    source: usize,
}

impl Candidate {
    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn membership(&self) -> &MembershipVector {
        &self.membership
    }

    /// Intra-zone demand over ordered pairs, including self pairs.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Position of this candidate in the list the model was built from.
    pub fn source_index(&self) -> usize {
        self.source
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverablePair {
    pub origin: NodeId,
    pub dest: NodeId,
    pub demand: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelOptions {
    /// Drop candidates strictly contained in another candidate.
    pub dominance: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions { dominance: true }
    }
}

#[derive(Clone, Debug)]
pub struct CoverageModel {
    num_nodes: usize,
    budget: usize,
    candidates: Vec<Candidate>,
    /// Positive-demand pairs covered by at least one candidate, sorted.
    pairs: Vec<CoverablePair>,
    /// Row-major dense demand.
    dense: Vec<f64>,
}

/// Builds the coverage model for the instance's demand and zone budget.
pub fn build_model<Z: AsRef<[NodeId]> + Sync>(
    instance: &Instance,
    candidates: &[Z],
    options: ModelOptions,
) -> Result<CoverageModel> {
    CoverageModel::new(instance.num_nodes(), instance.demand(), instance.num_zones(), candidates, options)
}

impl CoverageModel {
    pub fn new<Z: AsRef<[NodeId]> + Sync>(
        num_nodes: usize,
        demand: &DemandTable,
        budget: usize,
        candidates: &[Z],
        options: ModelOptions,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyInput("no candidate zones"));
        }
        if budget == 0 {
            return Err(Error::InvalidParameter("number of zones must be >= 1".into()));
        }
        let dense = demand.to_dense(num_nodes);
        let mut seen = HashSet::with_capacity(candidates.len());
        let mut sets: Vec<(usize, NodeSet)> = Vec::with_capacity(candidates.len());
        for (source, c) in candidates.iter().enumerate() {
            let members = c.as_ref();
            if members.is_empty() {
                return Err(Error::EmptyInput("candidate zone without members"));
            }
            if let Some(v) = members.iter().find(|v| v.index() >= num_nodes) {
                return Err(Error::NodeOutOfRange { id: v.0, num_nodes });
            }
            let set = NodeSet::from_ids(num_nodes, members);
            if seen.insert(set.clone()) {
                sets.push((source, set));
            }
        }
        if options.dominance {
            let dominated = strictly_dominated(&sets, num_nodes);
            let mut keep = dominated.iter().map(|d| !d);
            sets.retain(|_| keep.next().unwrap());
        }

        let mut coverable = vec![false; num_nodes * num_nodes];
        let candidates: Vec<Candidate> = sets
            .into_iter()
            .map(|(source, set)| {
                let members = set.to_ids();
                let mut weight = 0.0;
                for &i in &members {
                    let row = i.index() * num_nodes;
                    for &j in &members {
                        weight += dense[row + j.index()];
                        coverable[row + j.index()] = true;
                    }
                }
                Candidate { members, membership: MembershipVector(set), weight, source }
            })
            .collect();
        let pairs = demand
            .iter()
            .filter(|&(o, d, v)| v > 0.0 && coverable[o.index() * num_nodes + d.index()])
            .map(|(origin, dest, demand)| CoverablePair { origin, dest, demand })
            .collect();
        Ok(CoverageModel { num_nodes, budget, candidates, pairs, dense })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn set_budget(&mut self, m: usize) -> Result<()> {
        if m == 0 {
            return Err(Error::InvalidParameter("number of zones must be >= 1".into()));
        }
        self.budget = m;
        Ok(())
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn pairs(&self) -> &[CoverablePair] {
        &self.pairs
    }

    fn covers(&self, selected: &[usize], i: NodeId, j: NodeId) -> bool {
        selected.iter().any(|&s| {
            let m = &self.candidates[s].membership;
            m.contains(i) && m.contains(j)
        })
    }

    /// Covered demand of a selection, summed over pairs in sorted order.
    pub fn evaluate(&self, selected: &[usize]) -> f64 {
        self.pairs.iter().filter(|p| self.covers(selected, p.origin, p.dest)).map(|p| p.demand).sum()
    }

    pub fn covered_pairs(&self, selected: &[usize]) -> Vec<(NodeId, NodeId)> {
        self.pairs
            .iter()
            .filter(|p| self.covers(selected, p.origin, p.dest))
            .map(|p| (p.origin, p.dest))
            .collect()
    }

    /// Demand of candidate `c` not yet covered by `selected`.
    pub fn marginal_gain(&self, c: usize, selected: &[usize]) -> f64 {
        let cand = &self.candidates[c];
        let overlaps: SmallVec<[NodeSet; 8]> = selected
            .iter()
            .map(|&t| &self.candidates[t].membership.0)
            .filter(|t| t.intersects(&cand.membership.0))
            .map(|t| {
                let mut s = t.clone();
                s.intersect_with(&cand.membership.0);
                s
            })
            .collect();
        if overlaps.is_empty() {
            return cand.weight;
        }
        let mut gain = 0.0;
        for &i in &cand.members {
            let row = i.index() * self.num_nodes;
            for &j in &cand.members {
                let v = self.dense[row + j.index()];
                if v > 0.0 && !overlaps.iter().any(|s| s.contains(i.index()) && s.contains(j.index())) {
                    gain += v;
                }
            }
        }
        gain
    }

    fn solution(&self, mut selected: Vec<usize>, status: SolveStatus, gap: f64, started: Instant) -> Solution {
        selected.sort_unstable();
        Solution {
            zones: selected.iter().map(|&s| self.candidates[s].members.clone()).collect(),
            objective: self.evaluate(&selected),
            covered_pairs: self.covered_pairs(&selected),
            selected,
            status,
            gap,
            wall_time_s: started.elapsed().as_secs_f64(),
        }
    }

    /// Candidate indices with positive weight, heaviest first, ties by index.
    fn branching_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.candidates.len()).filter(|&c| self.candidates[c].weight > 0.0).collect();
        order.sort_by(|&a, &b| {
            self.candidates[b].weight.total_cmp(&self.candidates[a].weight).then(a.cmp(&b))
        });
        order
    }

    /// Sum of the `m` largest candidate weights; bounds every selection.
    fn root_bound(&self) -> f64 {
        self.branching_order().iter().take(self.budget).map(|&c| self.candidates[c].weight).sum()
    }
}

/// `flags[k]` is true when `sets[k]` is a strict subset of another set.
/// Sets must be distinct.
fn strictly_dominated(sets: &[(usize, NodeSet)], num_nodes: usize) -> Vec<bool> {
    let sizes: Vec<usize> = sets.iter().map(|(_, s)| s.len()).collect();
    // containing[v] = sets holding v, largest first
    let mut containing: Vec<Vec<u32>> = vec![Vec::new(); num_nodes];
    for (k, (_, s)) in sets.iter().enumerate() {
        for v in s.iter() {
            containing[v].push(k as u32);
        }
    }
    for list in &mut containing {
        list.sort_by_key(|&k| (Reverse(sizes[k as usize]), k));
    }
    sets.par_iter()
        .enumerate()
        .map(|(k, (_, s))| {
            let rarest = s.iter().min_by_key(|&v| containing[v].len()).expect("nonempty candidate");
            containing[rarest]
                .iter()
                .take_while(|&&t| sizes[t as usize] > sizes[k])
                .any(|&t| s.is_subset(&sets[t as usize].1))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Proven optimal (within the requested gap tolerance).
    Optimal,
    /// Feasible without proof; `gap` bounds the distance to optimal.
    Feasible,
    /// Time limit reached; best selection found so far.
    Timeout,
    /// Produced by the construction heuristic; no bound.
    Heuristic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// Model candidate indices, ascending.
    pub selected: Vec<usize>,
    pub zones: Vec<Vec<NodeId>>,
    pub objective: f64,
    pub covered_pairs: Vec<(NodeId, NodeId)>,
    pub status: SolveStatus,
    /// Relative gap `(bound - objective) / bound`.
    pub gap: f64,
    pub wall_time_s: f64,
}

fn relative_gap(bound: f64, objective: f64) -> f64 {
    if bound <= 0.0 {
        0.0
    } else {
        ((bound - objective) / bound).max(0.0)
    }
}

/// Picks the candidate with the largest marginal gain until the budget is
/// spent or no candidate adds demand. Ties go to the lower index.
pub fn greedy_select(model: &CoverageModel) -> Solution {
    let started = Instant::now();
    let selected = greedy_indices(model);
    let gap = relative_gap(model.root_bound(), model.evaluate(&selected));
    model.solution(selected, SolveStatus::Feasible, gap, started)
}

fn greedy_indices(model: &CoverageModel) -> Vec<usize> {
    // (gain, tie-break, round in which the gain was computed)
    let mut heap: BinaryHeap<(OrderedFloat<f64>, Reverse<usize>, usize)> = model
        .candidates
        .iter()
        .enumerate()
        .map(|(c, cand)| (OrderedFloat(cand.weight), Reverse(c), 0))
        .collect();
    let mut selected = Vec::with_capacity(model.budget);
    while selected.len() < model.budget {
        let Some((OrderedFloat(gain), Reverse(c), round)) = heap.pop() else { break };
        if round == selected.len() {
            if gain <= 0.0 {
                break;
            }
            selected.push(c);
        } else {
            let fresh = model.marginal_gain(c, &selected);
            heap.push((OrderedFloat(fresh), Reverse(c), selected.len()));
        }
    }
    selected
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub time_limit: Duration,
    /// Relative optimality gap at which a subtree is pruned; 0 proves optimality.
    pub gap_tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { time_limit: DEFAULT_TIME_LIMIT, gap_tolerance: 0.0 }
    }
}

struct Search<'a> {
    model: &'a CoverageModel,
    order: Vec<usize>,
    weights: Vec<f64>,
    best_value: f64,
    best: Vec<usize>,
    gap_tolerance: f64,
    deadline: Instant,
    nodes: u64,
    timed_out: bool,
}

impl Search<'_> {
    fn threshold(&self) -> f64 {
        self.best_value * (1.0 + self.gap_tolerance)
    }

    /// Weight-based bound on `r` more picks from positions `p..`.
    fn stale_bound(&self, p: usize, r: usize) -> f64 {
        self.weights[p.min(self.weights.len())..(p + r).min(self.weights.len())].iter().sum()
    }

    /// Exact top-`r` marginal gains among positions `start..`, evaluated
    /// lazily: weights are upper bounds on gains and arrive in decreasing
    /// order, so the scan stops once `r` gains beat the next weight. Computed
    /// gains are cached in `cache[p - start]`.
    fn top_gains(&self, selected: &[usize], start: usize, r: usize, cache: &mut Vec<f64>) -> f64 {
        let mut top: SmallVec<[f64; 8]> = SmallVec::new();
        for p in start..self.order.len() {
            if top.len() == r && self.weights[p] <= top[r - 1] {
                break;
            }
            let g = self.model.marginal_gain(self.order[p], selected);
            cache.push(g);
            let at = top.partition_point(|&t| t >= g);
            if at < r {
                top.insert(at, g);
                top.truncate(r);
            }
        }
        top.iter().sum()
    }

    fn dfs(&mut self, selected: &mut Vec<usize>, covered: f64, start: usize, r: usize) {
        self.nodes += 1;
        if self.nodes.is_multiple_of(256) && Instant::now() >= self.deadline {
            self.timed_out = true;
        }
        if self.timed_out {
            return;
        }
        let mut cache = Vec::new();
        if covered + self.top_gains(selected, start, r, &mut cache) <= self.threshold() {
            return;
        }
        for p in start..self.order.len() {
            if covered + self.stale_bound(p, r) <= self.threshold() {
                break;
            }
            let c = self.order[p];
            let gain = match cache.get(p - start) {
                Some(&g) => g,
                None => self.model.marginal_gain(c, selected),
            };
            if gain <= 0.0 {
                continue;
            }
            let value = covered + gain;
            selected.push(c);
            if value > self.best_value {
                self.best_value = value;
                self.best = selected.clone();
            }
            if r > 1 && value + self.stale_bound(p + 1, r - 1) > self.threshold() {
                self.dfs(selected, value, p + 1, r - 1);
            }
            selected.pop();
            if self.timed_out {
                return;
            }
        }
    }
}

/// Exact branch and bound. Candidates are branched in decreasing weight order
/// with the include branch first; the greedy selection seeds the incumbent.
/// A node is pruned when its covered demand plus the `r` largest remaining
/// marginal gains (`r` = remaining budget) cannot beat the incumbent.
pub fn solve_exact(model: &CoverageModel, options: &SolveOptions) -> Solution {
    let started = Instant::now();
    let order = model.branching_order();
    let weights: Vec<f64> = order.iter().map(|&c| model.candidates[c].weight).collect();
    let greedy = greedy_indices(model);
    let mut search = Search {
        model,
        best_value: model.evaluate(&greedy),
        best: greedy,
        order,
        weights,
        gap_tolerance: options.gap_tolerance.max(0.0),
        deadline: started + options.time_limit,
        nodes: 0,
        timed_out: false,
    };
    search.dfs(&mut Vec::with_capacity(model.budget), 0.0, 0, model.budget);
    log::debug!("branch and bound explored {} nodes", search.nodes);
    let (status, gap) = if search.timed_out {
        let objective = model.evaluate(&search.best);
        (SolveStatus::Timeout, relative_gap(model.root_bound(), objective))
    } else {
        (SolveStatus::Optimal, search.gap_tolerance)
    };
    model.solution(search.best, status, gap, started)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Exhaustive search over every selection of `min(m, |L|)` candidates,
/// rejected when the count of selections exceeds `cap`. Members that add
/// nothing to the winning selection are dropped from it.
pub fn brute_force_select(model: &CoverageModel, cap: u128) -> Result<Solution> {
    let started = Instant::now();
    let n = model.candidates.len();
    let k = model.budget.min(n);
    let combinations = binomial(n, k);
    if combinations > cap {
        return Err(Error::BruteForceCapExceeded { combinations, cap });
    }
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best = combo.clone();
    let mut best_value = model.evaluate(&combo);
    // next k-combination in lexicographic order
    while let Some(i) = (0..k).rev().find(|&i| combo[i] < n - k + i) {
        combo[i] += 1;
        for j in i + 1..k {
            combo[j] = combo[j - 1] + 1;
        }
        let value = model.evaluate(&combo);
        if value > best_value {
            best_value = value;
            best = combo.clone();
        }
    }
    let mut trimmed = best;
    let mut i = 0;
    while i < trimmed.len() {
        let mut without = trimmed.clone();
        without.remove(i);
        if model.evaluate(&without) == best_value {
            trimmed = without;
        } else {
            i += 1;
        }
    }
    Ok(model.solution(trimmed, SolveStatus::Optimal, 0.0, started))
}

/// Writes the integer program in CPLEX LP text format. Selection variables
/// are `x_<candidate>`, coverage variables `y_<origin>_<dest>`.
pub fn export_lp<W: Write>(model: &CoverageModel, mut out: W) -> Result<()> {
    const PER_LINE: usize = 6;
    fn write_terms<W: Write>(out: &mut W, terms: &[String]) -> std::io::Result<()> {
        for (k, chunk) in terms.chunks(PER_LINE).enumerate() {
            if k > 0 {
                write!(out, "\n   ")?;
            }
            for (t, term) in chunk.iter().enumerate() {
                if k + t > 0 && !term.starts_with('-') {
                    write!(out, " + {term}")?;
                } else if k + t > 0 {
                    write!(out, " - {}", &term[1..])?;
                } else {
                    write!(out, " {term}")?;
                }
            }
        }
        Ok(())
    }

    let y = |p: &CoverablePair| format!("y_{}_{}", p.origin, p.dest);
    writeln!(out, "\\ zone selection as weighted maximum coverage")?;
    writeln!(out, "\\ {} candidates, {} coverable pairs, budget {}", model.candidates.len(), model.pairs.len(), model.budget)?;
    writeln!(out, "Maximize")?;
    write!(out, " obj:")?;
    if model.pairs.is_empty() {
        write!(out, " 0 x_0")?;
    } else {
        let terms: Vec<String> = model.pairs.iter().map(|p| format!("{} {}", p.demand, y(p))).collect();
        write_terms(&mut out, &terms)?;
    }
    writeln!(out)?;
    writeln!(out, "Subject To")?;
    write!(out, " budget:")?;
    let xs: Vec<String> = (0..model.candidates.len()).map(|c| format!("x_{c}")).collect();
    write_terms(&mut out, &xs)?;
    writeln!(out, " <= {}", model.budget)?;
    for p in &model.pairs {
        write!(out, " link_{}_{}:", p.origin, p.dest)?;
        let mut terms = vec![y(p)];
        terms.extend(
            model
                .candidates
                .iter()
                .enumerate()
                .filter(|(_, c)| c.membership.contains(p.origin) && c.membership.contains(p.dest))
                .map(|(c, _)| format!("-x_{c}")),
        );
        write_terms(&mut out, &terms)?;
        writeln!(out, " <= 0")?;
    }
    writeln!(out, "Binaries")?;
    for x in &xs {
        writeln!(out, " {x}")?;
    }
    for p in &model.pairs {
        writeln!(out, " {}", y(p))?;
    }
    writeln!(out, "End")?;
    Ok(())
}

/// On-disk solution format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub status: SolveStatus,
    pub objective: f64,
    /// Absent for heuristic solutions, which carry no bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub wall_time_s: f64,
    pub total_demand: f64,
    pub zones: Vec<Vec<NodeId>>,
}

impl SolutionFile {
    pub fn from_solution(solution: &Solution, total_demand: f64) -> Self {
        SolutionFile {
            status: solution.status,
            objective: solution.objective,
            gap: (solution.status != SolveStatus::Heuristic).then_some(solution.gap),
            wall_time_s: solution.wall_time_s,
            total_demand,
            zones: solution.zones.clone(),
        }
    }

    /// Solution file for zones produced by the construction heuristic.
    pub fn heuristic(zones: Vec<Vec<NodeId>>, objective: f64, total_demand: f64, wall_time_s: f64) -> Self {
        SolutionFile { status: SolveStatus::Heuristic, objective, gap: None, wall_time_s, total_demand, zones }
    }

    pub fn served_ratio(&self) -> f64 {
        if self.total_demand > 0.0 {
            self.objective / self.total_demand
        } else {
            0.0
        }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}
