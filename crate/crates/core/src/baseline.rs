//! Seed-and-grow construction heuristic used as the comparison baseline.
//!
//! Each round seeds a zone with the shareable node pair of highest two-way
//! demand, grows it one node at a time by largest marginal demand
//! `sum_{v in S} d[i,v] + d[v,i]` among nodes shareable with every member,
//! then removes the zone's nodes before the next round.

use crate::instance::{Instance, NodeId, Zone};

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineResult {
    pub zones: Vec<Zone>,
    /// Set when the node set ran out before `m` zones were built.
    pub exhausted: bool,
}

pub fn simple_zoning(instance: &Instance) -> BaselineResult {
    let n = instance.num_nodes();
    let m = instance.num_zones();
    let d = instance.max_diameter();
    let c = instance.distances();
    let demand = instance.demand().to_dense(n);
    let two_way = |i: usize, j: usize| demand[i * n + j] + demand[j * n + i];
    let share = |i: usize, j: usize| c.symmetric_max(i, j) <= d;

    let mut remaining = vec![true; n];
    let mut zones = Vec::with_capacity(m);
    for _ in 0..m {
        let alive: Vec<usize> = (0..n).filter(|&i| remaining[i]).collect();
        if alive.is_empty() {
            log::warn!("baseline: nodes exhausted after {} of {m} zones", zones.len());
            return BaselineResult { zones, exhausted: true };
        }

        // strict `>` keeps the lexicographically smallest pair on ties
        let mut seed: Option<(usize, usize, f64)> = None;
        for (a, &u) in alive.iter().enumerate() {
            for &v in &alive[a + 1..] {
                if share(u, v) {
                    let w = two_way(u, v);
                    if seed.is_none_or(|(_, _, best)| w > best) {
                        seed = Some((u, v, w));
                    }
                }
            }
        }
        let mut members = match seed {
            Some((u, v, _)) => vec![u, v],
            None => {
                let incident = |i: usize| -> f64 { (0..n).map(|j| two_way(i, j)).sum::<f64>() - demand[i * n + i] };
                let mut best = alive[0];
                for &i in &alive[1..] {
                    if incident(i) > incident(best) {
                        best = i;
                    }
                }
                vec![best]
            }
        };
        for &v in &members {
            remaining[v] = false;
        }

        loop {
            let mut pick: Option<(usize, f64)> = None;
            for i in (0..n).filter(|&i| remaining[i]) {
                if members.iter().all(|&v| share(i, v)) {
                    let gain: f64 = members.iter().map(|&v| two_way(i, v)).sum();
                    if pick.is_none_or(|(_, best)| gain > best) {
                        pick = Some((i, gain));
                    }
                }
            }
            let Some((i, _)) = pick else { break };
            members.push(i);
            remaining[i] = false;
        }
        zones.push(Zone::new(members.into_iter().map(NodeId::from_index).collect()).expect("seeded zone is nonempty"));
    }
    BaselineResult { zones, exhausted: false }
}
