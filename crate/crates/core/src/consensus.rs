//! Max-consensus arbitration of the enabled module.
//!
//! At every slot boundary each module starts from its own weight and
//! repeatedly replaces it with the maximum over itself and the values heard
//! from its in-neighbors. On a connected graph all nodes hold the global
//! maximum after at most diameter iterations (two on the body chain). A
//! module then enables itself iff its own initial weight equals the agreed
//! value.

use std::collections::BTreeMap;
use std::fmt::{Debug, Display};

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::model::ModuleId;
use crate::netsim::{Bus, Envelope, Payload, Topology};

/// Weights closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Total priority order used when several modules match the agreed maximum.
/// Earlier entries win; nodes missing from the list rank after all listed
/// ones, in their natural order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TieBreakRule<N> {
    pub ordering: Vec<N>,
}

impl Default for TieBreakRule<ModuleId> {
    fn default() -> Self {
        Self {
            ordering: ModuleId::ALL.to_vec(),
        }
    }
}

impl<N: Ord + Copy> TieBreakRule<N> {
    fn rank(&self, id: N) -> (usize, N) {
        let pos = self.ordering.iter().position(|&o| o == id);
        (pos.unwrap_or(self.ordering.len()), id)
    }

    /// Priority score for the tie-break pass: higher is better, always > 0.
    fn score(&self, id: N, nodes: &[N]) -> f64 {
        let mut ranked: Vec<_> = nodes.iter().map(|&n| self.rank(n)).collect();
        ranked.sort();
        let pos = ranked
            .iter()
            .position(|r| r.1 == id)
            .expect("node in graph");
        (nodes.len() - pos) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusRound<N: Ord> {
    /// Slot index the decision applies to.
    pub k: u64,
    pub w0: BTreeMap<N, f64>,
    /// `iterates[i][kappa]`, starting with `w0[i]`.
    pub iterates: BTreeMap<N, Vec<f64>>,
    /// Iterations until every node held the same value.
    pub kappa_bar: usize,
    pub w_star: f64,
    pub winner: N,
    pub y: BTreeMap<N, bool>,
    /// Whether the tie-break pass had to run.
    pub tie_broken: bool,
}

/// One synchronous iteration: each node takes the max over itself and its
/// in-neighbors.
pub fn consensus_iterate<N: Ord + Copy + Display>(
    values: &BTreeMap<N, f64>,
    topology: &Topology<N>,
) -> BTreeMap<N, f64> {
    values
        .iter()
        .map(|(&i, &v)| {
            let best = topology
                .in_neighbors(i)
                .into_iter()
                .filter_map(|j| values.get(&j).copied())
                .fold(v, f64::max);
            (i, best)
        })
        .collect()
}

fn all_equal<N>(values: &BTreeMap<N, f64>) -> bool {
    let mut it = values.values();
    match it.next() {
        Some(first) => it.all(|v| v == first),
        None => true,
    }
}

/// Run max-consensus over the bus until every node agrees. Returns the
/// per-node iterate sequences and the number of iterations taken.
fn max_consensus<N: Ord + Copy + Display + Debug>(
    start: &BTreeMap<N, f64>,
    bus: &mut Bus<N>,
    tick: u64,
) -> Result<(BTreeMap<N, Vec<f64>>, usize)> {
    let limit = bus.topology().len();
    let mut values = start.clone();
    let mut iterates: BTreeMap<N, Vec<f64>> = values.iter().map(|(&i, &v)| (i, vec![v])).collect();
    let mut kappa = 0;
    while !all_equal(&values) {
        if kappa >= limit {
            return Err(SimError::NoConvergence(limit));
        }
        for (&src, &v) in &values {
            for dst in bus.topology().out_neighbors(src) {
                bus.send(Envelope {
                    src,
                    dst,
                    payload: Payload::Consensus(v),
                    tick,
                })?;
            }
        }
        let mut next = values.clone();
        for env in bus.deliver(tick) {
            if let (Payload::Consensus(v), Some(slot)) = (env.payload, next.get_mut(&env.dst)) {
                *slot = slot.max(v);
            }
        }
        for (i, v) in &next {
            iterates.get_mut(i).expect("same node set").push(*v);
        }
        values = next;
        kappa += 1;
    }
    Ok((iterates, kappa))
}

/// Elect the enabled module for slot `k` from the modules' weights, using
/// only neighbor messages on `bus`.
///
/// Every node compares its own initial weight with the value it converged
/// to. If more than one node matches within [`TIE_TOLERANCE`], the matching
/// nodes run a second max-consensus on their tie-break priority.
pub fn run_round<N: Ord + Copy + Display + Debug>(
    k: u64,
    weights: &BTreeMap<N, f64>,
    bus: &mut Bus<N>,
    tick: u64,
    tie_break: &TieBreakRule<N>,
) -> Result<ConsensusRound<N>> {
    let nodes: Vec<N> = bus.topology().nodes().collect();
    if nodes.is_empty()
        || weights.len() != nodes.len()
        || nodes.iter().any(|n| !weights.contains_key(n))
    {
        return Err(SimError::InvalidValue {
            key: "weights".into(),
            msg: "need exactly one weight per node".into(),
        });
    }
    if let Some((id, w)) = weights.iter().find(|(_, w)| !w.is_finite() || **w < 0.0) {
        return Err(SimError::InvalidValue {
            key: "weights".into(),
            msg: format!("weight of {id} must be finite and >= 0, got {w}"),
        });
    }

    let (iterates, kappa_bar) = max_consensus(weights, bus, tick)?;
    let agreed: BTreeMap<N, f64> = iterates
        .iter()
        .map(|(&i, seq)| (i, *seq.last().expect("nonempty")))
        .collect();
    let candidate: BTreeMap<N, bool> = nodes
        .iter()
        .map(|&i| (i, (weights[&i] - agreed[&i]).abs() <= TIE_TOLERANCE))
        .collect();
    let w_star = agreed[&nodes[0]];

    let n_candidates = candidate.values().filter(|&&c| c).count();
    let tie_broken = n_candidates > 1;
    let y = if tie_broken {
        let scores: BTreeMap<N, f64> = nodes
            .iter()
            .map(|&i| {
                (
                    i,
                    if candidate[&i] {
                        tie_break.score(i, &nodes)
                    } else {
                        0.0
                    },
                )
            })
            .collect();
        let (_, _) = max_consensus(&scores, bus, tick)?;
        let best = scores.values().copied().fold(0.0, f64::max);
        scores.iter().map(|(&i, &s)| (i, s == best)).collect()
    } else {
        candidate
    };
    let winner = *y
        .iter()
        .find(|(_, &on)| on)
        .map(|(i, _)| i)
        .expect("the maximum is held by some node");

    Ok(ConsensusRound {
        k,
        w0: weights.clone(),
        iterates,
        kappa_bar,
        w_star,
        winner,
        y,
        tie_broken,
    })
}

/// Slot index `k` with `t` in `(k T_e, (k+1) T_e]`; `t = 0` belongs to slot 0.
pub fn arbitration_schedule(t: f64, t_e: f64) -> u64 {
    if t <= 0.0 {
        return 0;
    }
    ((t / t_e).ceil() - 1.0).max(0.0) as u64
}

/// Every module starts enabled; no round runs for slot 0.
pub fn initial_enabling<N: Ord + Copy>(nodes: impl IntoIterator<Item = N>) -> BTreeMap<N, bool> {
    nodes.into_iter().map(|n| (n, true)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::body_chain;
    use ModuleId::*;

    fn w(a: f64, k: f64, h: f64) -> BTreeMap<ModuleId, f64> {
        BTreeMap::from([(Ankle, a), (Knee, k), (Hip, h)])
    }

    #[test]
    fn chain_iterations() {
        let t = body_chain();
        let one = consensus_iterate(&w(0.9, 0.1, 0.2), &t);
        assert_eq!(one, w(0.9, 0.9, 0.2));
        assert_eq!(consensus_iterate(&one, &t), w(0.9, 0.9, 0.9));
        assert_eq!(consensus_iterate(&w(0.1, 0.5, 0.3), &t), w(0.5, 0.5, 0.5));
    }

    #[test]
    fn equal_values_are_a_fixed_point() {
        let mut bus = Bus::new(body_chain());
        let r = run_round(1, &w(0.2, 0.2, 0.2), &mut bus, 0, &TieBreakRule::default()).unwrap();
        assert_eq!(r.kappa_bar, 0);
        assert_eq!(r.winner, Ankle);
        assert!(r.tie_broken);
    }

    #[test]
    fn argmax_wins() {
        let mut bus = Bus::new(body_chain());
        let r = run_round(
            3,
            &w(0.12, 0.05, 0.02),
            &mut bus,
            7,
            &TieBreakRule::default(),
        )
        .unwrap();
        assert_eq!(r.winner, Ankle);
        assert_eq!(
            r.y,
            BTreeMap::from([(Ankle, true), (Knee, false), (Hip, false)])
        );
        assert_eq!(r.kappa_bar, 2);
        assert_eq!(r.w_star, 0.12);
        assert!(!r.tie_broken);
        assert!(bus.audit_non_neighbor().is_empty());
    }

    #[test]
    fn ties_follow_the_rule() {
        let mut bus = Bus::new(body_chain());
        let r = run_round(1, &w(0.3, 0.3, 0.1), &mut bus, 0, &TieBreakRule::default()).unwrap();
        assert_eq!(r.winner, Ankle);
        let hip_first = TieBreakRule {
            ordering: vec![Hip, Knee, Ankle],
        };
        let r = run_round(1, &w(0.3, 0.3, 0.3), &mut bus, 0, &hip_first).unwrap();
        assert_eq!(r.winner, Hip);
        assert_eq!(r.y.values().filter(|&&y| y).count(), 1);
    }

    #[test]
    fn rejects_bad_weights() {
        let mut bus = Bus::new(body_chain());
        assert!(run_round(
            1,
            &w(f64::NAN, 0.0, 0.0),
            &mut bus,
            0,
            &TieBreakRule::default()
        )
        .is_err());
        assert!(run_round(1, &w(-1.0, 0.0, 0.0), &mut bus, 0, &TieBreakRule::default()).is_err());
        let partial = BTreeMap::from([(Ankle, 1.0)]);
        assert!(run_round(1, &partial, &mut bus, 0, &TieBreakRule::default()).is_err());
    }

    #[test]
    fn schedule_intervals_are_right_closed() {
        assert_eq!(arbitration_schedule(0.3, 0.5), 0);
        assert_eq!(arbitration_schedule(0.5, 0.5), 0);
        assert_eq!(arbitration_schedule(0.5 + 1e-9, 0.5), 1);
        assert_eq!(arbitration_schedule(0.0, 0.5), 0);
        assert_eq!(arbitration_schedule(1.0, 0.5), 1);
    }

    #[test]
    fn everyone_starts_enabled() {
        let y = initial_enabling(ModuleId::ALL);
        assert!(y.values().all(|&v| v));
        assert_eq!(y.len(), 3);
    }

    #[test]
    fn works_on_other_connected_graphs() {
        let ring =
            Topology::from_arcs([0u32, 1, 2, 3, 4], [(1, 0), (2, 1), (3, 2), (4, 3), (0, 4)])
                .unwrap();
        let mut bus = Bus::new(ring);
        let weights: BTreeMap<u32, f64> =
            [(0, 0.1), (1, 0.4), (2, 0.2), (3, 0.05), (4, 0.3)].into();
        let r = run_round(1, &weights, &mut bus, 0, &TieBreakRule { ordering: vec![] }).unwrap();
        assert_eq!(r.winner, 1);
        assert_eq!(r.kappa_bar, 4);
    }
}
