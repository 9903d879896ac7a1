//! Simulated wired network between modules.
//!
//! Arcs follow the receive convention: `(i, j)` means node `i` receives from
//! node `j`. Messages sent during a tick are delivered in the same tick, in
//! `(dst, src)` order; wire latency is folded into each controller's lumped
//! delay.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Debug, Display};

use crate::error::{Result, SimError};
use crate::model::ModuleId;
use crate::sensing::DownChannelMsg;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology<N: Ord> {
    nodes: BTreeSet<N>,
    arcs: BTreeSet<(N, N)>,
}

impl<N: Ord + Copy + Display> Default for Topology<N> {
    fn default() -> Self {
        Self::new()
    }
}

impl<N: Ord + Copy + Display> Topology<N> {
    pub fn new() -> Self {
        Self {
            nodes: BTreeSet::new(),
            arcs: BTreeSet::new(),
        }
    }

    /// Add a node linked both ways to `neighbors` (which must already exist).
    pub fn register_module(&mut self, id: N, neighbors: &[N]) -> Result<()> {
        if self.nodes.contains(&id) {
            return Err(SimError::Topology(format!("duplicate module `{id}`")));
        }
        for n in neighbors {
            if !self.nodes.contains(n) {
                return Err(SimError::Topology(format!(
                    "unknown neighbor `{n}` for `{id}`"
                )));
            }
        }
        let mut next = self.clone();
        next.nodes.insert(id);
        for &n in neighbors {
            next.arcs.insert((id, n));
            next.arcs.insert((n, id));
        }
        next.validate()?;
        *self = next;
        Ok(())
    }

    /// Build from explicit receive arcs `(dst, src)`.
    pub fn from_arcs(
        nodes: impl IntoIterator<Item = N>,
        arcs: impl IntoIterator<Item = (N, N)>,
    ) -> Result<Self> {
        let t = Self {
            nodes: nodes.into_iter().collect(),
            arcs: arcs.into_iter().collect(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for &(dst, src) in &self.arcs {
            if dst == src {
                return Err(SimError::Topology(format!("self-arc on `{dst}`")));
            }
            if !self.nodes.contains(&dst) || !self.nodes.contains(&src) {
                return Err(SimError::Topology(format!(
                    "arc {dst} <- {src} names an unknown node"
                )));
            }
        }
        if !self.is_strongly_connected() {
            return Err(SimError::Topology("graph is not connected".into()));
        }
        Ok(())
    }

    /// Every node can reach every other along information flow.
    pub fn is_strongly_connected(&self) -> bool {
        let Some(&start) = self.nodes.iter().next() else {
            return true;
        };
        let forward = self.reach(start, |&(dst, src), n| (src == n).then_some(dst));
        let backward = self.reach(start, |&(dst, src), n| (dst == n).then_some(src));
        forward.len() == self.nodes.len() && backward.len() == self.nodes.len()
    }

    fn reach(&self, start: N, step: impl Fn(&(N, N), N) -> Option<N>) -> BTreeSet<N> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for arc in &self.arcs {
                if let Some(m) = step(arc, n) {
                    if seen.insert(m) {
                        queue.push_back(m);
                    }
                }
            }
        }
        seen
    }

    pub fn nodes(&self) -> impl Iterator<Item = N> + '_ {
        self.nodes.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: N) -> bool {
        self.nodes.contains(&id)
    }

    /// `N_i`: nodes `i` receives from.
    pub fn in_neighbors(&self, id: N) -> BTreeSet<N> {
        self.arcs
            .iter()
            .filter(|(dst, _)| *dst == id)
            .map(|&(_, src)| src)
            .collect()
    }

    /// Nodes that receive from `id`.
    pub fn out_neighbors(&self, id: N) -> BTreeSet<N> {
        self.arcs
            .iter()
            .filter(|(_, src)| *src == id)
            .map(|&(dst, _)| dst)
            .collect()
    }

    pub fn has_arc(&self, dst: N, src: N) -> bool {
        self.arcs.contains(&(dst, src))
    }

    /// Longest shortest information path; the number of max-consensus
    /// iterations needed in the worst case.
    pub fn diameter(&self) -> usize {
        self.nodes
            .iter()
            .map(|&n| {
                let mut dist = BTreeMap::from([(n, 0usize)]);
                let mut queue = VecDeque::from([n]);
                while let Some(x) = queue.pop_front() {
                    let d = dist[&x];
                    for m in self.out_neighbors(x) {
                        dist.entry(m).or_insert_with(|| {
                            queue.push_back(m);
                            d + 1
                        });
                    }
                }
                dist.values().copied().max().unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }
}

/// The body chain ankle <-> knee <-> hip.
pub fn body_chain() -> Topology<ModuleId> {
    let mut t = Topology::new();
    t.register_module(ModuleId::Ankle, &[])
        .expect("empty graph");
    t.register_module(ModuleId::Knee, &[ModuleId::Ankle])
        .expect("chain");
    t.register_module(ModuleId::Hip, &[ModuleId::Knee])
        .expect("chain");
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    DownChannel(DownChannelMsg),
    Consensus(f64),
    Enable(bool),
}

impl Payload {
    pub fn tag(&self) -> &'static str {
        match self {
            Payload::DownChannel(_) => "down",
            Payload::Consensus(_) => "consensus",
            Payload::Enable(_) => "enable",
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Payload::DownChannel(m) => m.is_finite(),
            Payload::Consensus(v) => v.is_finite(),
            Payload::Enable(_) => true,
        }
    }
}

impl Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::DownChannel(m) => write!(
                f,
                "{} {} {} {} {}",
                m.aggregate_mass,
                m.com_position[0],
                m.com_position[1],
                m.link_orientation,
                m.support_orientation
            ),
            Payload::Consensus(v) => write!(f, "{v}"),
            Payload::Enable(y) => write!(f, "{}", u8::from(*y)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<N> {
    pub src: N,
    pub dst: N,
    pub payload: Payload,
    pub tick: u64,
}

impl<N: Display> Envelope<N> {
    /// One log line: `tick src dst tag value`.
    pub fn log_line(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.tick,
            self.src,
            self.dst,
            self.payload.tag(),
            self.payload
        )
    }
}

/// Mailbox network over a fixed topology, with a full message log.
#[derive(Debug, Clone)]
pub struct Bus<N: Ord> {
    topology: Topology<N>,
    pending: Vec<Envelope<N>>,
    log: Vec<Envelope<N>>,
    record: bool,
}

impl<N: Ord + Copy + Display + Debug> Bus<N> {
    pub fn new(topology: Topology<N>) -> Self {
        Self {
            topology,
            pending: Vec::new(),
            log: Vec::new(),
            record: true,
        }
    }

    /// Stop keeping delivered envelopes in the log.
    pub fn without_log(mut self) -> Self {
        self.record = false;
        self
    }

    pub fn topology(&self) -> &Topology<N> {
        &self.topology
    }

    pub fn send(&mut self, envelope: Envelope<N>) -> Result<()> {
        if !self.topology.has_arc(envelope.dst, envelope.src) {
            return Err(SimError::NoSuchArc {
                src: envelope.src.to_string(),
                dst: envelope.dst.to_string(),
            });
        }
        if !envelope.payload.is_finite() {
            return Err(SimError::InvalidValue {
                key: "payload".into(),
                msg: format!("non-finite payload from {}", envelope.src),
            });
        }
        self.pending.push(envelope);
        Ok(())
    }

    /// All messages for `tick`, ordered by `(dst, src)` and then send order.
    pub fn deliver(&mut self, tick: u64) -> Vec<Envelope<N>> {
        let (mut due, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending)
            .into_iter()
            .partition(|e| e.tick <= tick);
        self.pending = rest;
        due.sort_by_key(|e| (e.dst, e.src));
        if self.record {
            self.log.extend(due.iter().cloned());
        }
        due
    }

    pub fn log(&self) -> &[Envelope<N>] {
        &self.log
    }

    pub fn dump_log(&self) -> String {
        self.log.iter().map(|e| e.log_line() + "\n").collect()
    }

    /// Envelopes in the log that travelled over a non-existent arc.
    pub fn audit_non_neighbor(&self) -> Vec<&Envelope<N>> {
        self.log
            .iter()
            .filter(|e| !self.topology.has_arc(e.dst, e.src))
            .collect()
    }
}
