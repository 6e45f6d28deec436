//! Append-only temporal graph with time-indexed structural queries.
//!
//! Every query takes an event index `t` and sees only edges whose event index
//! is strictly less than `t`, so the edge being formed never observes itself.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
    pub event: u64,
    pub timestamp: Option<f64>,
}

/// How neighborhoods are traversed in FoF, common-neighbor and hop queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Traversal {
    /// Follow edges source -> target only.
    Directed,
    /// Treat every edge as a link in both directions.
    #[default]
    Undirected,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeMeta {
    /// First event index at which the node is eligible as an alternative.
    pub arrival: u64,
    /// Wall-clock arrival, when known (seconds).
    pub arrival_time: Option<f64>,
    pub group: Option<u32>,
    pub fitness: Option<f64>,
    pub covariates: BTreeMap<String, f64>,
}

/// Time-evolving simple graph.
///
/// In undirected mode each edge is stored once, as initiated by its source,
/// and adjacency/degree queries treat it as a reciprocal pair of arcs.
#[derive(Clone, Debug)]
pub struct TemporalGraph {
    directed: bool,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<(NodeId, u64)>>,
    in_adj: Vec<Vec<(NodeId, u64)>>,
    meta: Vec<NodeMeta>,
    pairs: HashMap<(u32, u32), u64>,
    bootstrap_edges: usize,
}

impl TemporalGraph {
    pub fn new(directed: bool) -> Self {
        TemporalGraph {
            directed,
            edges: Vec::new(),
            out_adj: Vec::new(),
            in_adj: Vec::new(),
            meta: Vec::new(),
            pairs: HashMap::new(),
            bootstrap_edges: 0,
        }
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn node_count(&self) -> usize {
        self.meta.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of leading edges that seed the graph rather than record choices.
    pub fn bootstrap_edges(&self) -> usize {
        self.bootstrap_edges
    }

    pub fn set_bootstrap_edges(&mut self, k: usize) {
        self.bootstrap_edges = k.min(self.edges.len());
    }

    pub fn meta(&self, v: NodeId) -> &NodeMeta {
        &self.meta[v.index()]
    }

    pub fn meta_mut(&mut self, v: NodeId) -> &mut NodeMeta {
        &mut self.meta[v.index()]
    }

    /// One past the largest event index, i.e. the "as of now" query time.
    pub fn end_time(&self) -> u64 {
        self.edges.last().map_or(0, |e| e.event + 1)
    }

    /// Add a node arriving at `arrival`; returns its id.
    pub fn add_node(&mut self, meta: NodeMeta) -> NodeId {
        let id = NodeId::from(self.meta.len());
        self.meta.push(meta);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        id
    }

    /// Make sure ids up to `v` exist; new nodes arrive at `t`.
    pub fn ensure_node(&mut self, v: NodeId, t: u64) {
        while self.meta.len() <= v.index() {
            self.add_node(NodeMeta {
                arrival: t,
                ..NodeMeta::default()
            });
        }
    }

    pub fn add_edge(&mut self, i: NodeId, j: NodeId, t: u64) -> Result<()> {
        self.add_timed_edge(i, j, t, None)
    }

    pub fn add_timed_edge(
        &mut self,
        i: NodeId,
        j: NodeId,
        t: u64,
        timestamp: Option<f64>,
    ) -> Result<()> {
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        if let Some(last) = self.edges.last() {
            if t <= last.event {
                return Err(Error::NonMonotoneTime {
                    last: last.event,
                    got: t,
                });
            }
        }
        if self.has_pair(i, j) {
            return Err(Error::DuplicateEdge(i, j));
        }
        self.ensure_node(i.max(j), t);
        for v in [i, j] {
            let m = &mut self.meta[v.index()];
            if m.arrival > t {
                m.arrival = t;
            }
        }
        self.pairs.insert((i.0, j.0), t);
        self.out_adj[i.index()].push((j, t));
        self.in_adj[j.index()].push((i, t));
        self.edges.push(Edge {
            source: i,
            target: j,
            event: t,
            timestamp,
        });
        Ok(())
    }

    fn has_pair(&self, i: NodeId, j: NodeId) -> bool {
        self.pairs.contains_key(&(i.0, j.0))
            || (!self.directed && self.pairs.contains_key(&(j.0, i.0)))
    }

    /// Whether the arc `i -> j` exists strictly before `t`.
    pub fn has_arc(&self, i: NodeId, j: NodeId, t: u64) -> bool {
        self.pairs.get(&(i.0, j.0)).is_some_and(|&e| e < t)
    }

    /// Whether `i` is already linked to `j` at `t`: the arc `i -> j` in
    /// directed mode, either orientation in undirected mode.
    pub fn is_linked(&self, i: NodeId, j: NodeId, t: u64) -> bool {
        self.has_arc(i, j, t) || (!self.directed && self.has_arc(j, i, t))
    }

    pub fn exists_at(&self, v: NodeId, t: u64) -> bool {
        v.index() < self.meta.len() && self.meta[v.index()].arrival <= t
    }

    #[inline]
    fn prefix(list: &[(NodeId, u64)], t: u64) -> &[(NodeId, u64)] {
        &list[..list.partition_point(|&(_, e)| e < t)]
    }

    pub fn in_degree(&self, v: NodeId, t: u64) -> usize {
        Self::prefix(&self.in_adj[v.index()], t).len()
    }

    pub fn out_degree(&self, v: NodeId, t: u64) -> usize {
        Self::prefix(&self.out_adj[v.index()], t).len()
    }

    /// Attachment degree: in-degree for directed graphs, total degree otherwise.
    pub fn degree(&self, v: NodeId, t: u64) -> usize {
        if self.directed {
            self.in_degree(v, t)
        } else {
            self.in_degree(v, t) + self.out_degree(v, t)
        }
    }

    /// Out-neighbors as of `t`, in order of formation.
    pub fn out_neighbors(&self, v: NodeId, t: u64) -> impl Iterator<Item = NodeId> + '_ {
        Self::prefix(&self.out_adj[v.index()], t)
            .iter()
            .map(|&(u, _)| u)
    }

    pub fn in_neighbors(&self, v: NodeId, t: u64) -> impl Iterator<Item = NodeId> + '_ {
        Self::prefix(&self.in_adj[v.index()], t)
            .iter()
            .map(|&(u, _)| u)
    }

    /// Neighbors under the chosen traversal (may repeat a node for reciprocal
    /// arcs in undirected traversal of a directed graph).
    pub fn neighbors(
        &self,
        v: NodeId,
        t: u64,
        traversal: Traversal,
    ) -> Box<dyn Iterator<Item = NodeId> + '_> {
        match traversal {
            Traversal::Directed => Box::new(self.out_neighbors(v, t)),
            Traversal::Undirected => {
                Box::new(self.out_neighbors(v, t).chain(self.in_neighbors(v, t)))
            }
        }
    }

    fn neighbor_slices(&self, v: NodeId, t: u64, traversal: Traversal) -> [&[(NodeId, u64)]; 2] {
        let out = Self::prefix(&self.out_adj[v.index()], t);
        match traversal {
            Traversal::Directed => [out, &[]],
            Traversal::Undirected => [out, Self::prefix(&self.in_adj[v.index()], t)],
        }
    }

    /// Friends of friends of `i` as of `t`, sorted by id.
    ///
    /// `{ j : exists k, i ~ k ~ j before t, j != i, i not linked to j }`.
    pub fn friends_of_friends(&self, i: NodeId, t: u64, traversal: Traversal) -> Vec<NodeId> {
        let mut mark = vec![false; self.node_count()];
        self.fof_marks(i, t, traversal, &mut mark)
    }

    /// FoF query writing membership into a caller-owned scratch buffer (all
    /// false on entry, restored to all false on return). Returns the sorted set.
    pub fn fof_marks(
        &self,
        i: NodeId,
        t: u64,
        traversal: Traversal,
        mark: &mut [bool],
    ) -> Vec<NodeId> {
        let mut out = Vec::new();
        for side in self.neighbor_slices(i, t, traversal) {
            for &(k, _) in side {
                for side2 in self.neighbor_slices(k, t, traversal) {
                    for &(j, _) in side2 {
                        if j != i && !mark[j.index()] && !self.is_linked(i, j, t) {
                            mark[j.index()] = true;
                            out.push(j);
                        }
                    }
                }
            }
        }
        for &j in &out {
            mark[j.index()] = false;
        }
        out.sort_unstable();
        out
    }

    /// Number of intermediaries `k` with `i ~ k` and `k ~ j` before `t`.
    pub fn common_neighbors(&self, i: NodeId, j: NodeId, t: u64, traversal: Traversal) -> usize {
        let mut ks: Vec<NodeId> = self.neighbors(i, t, traversal).collect();
        ks.sort_unstable();
        ks.dedup();
        ks.into_iter()
            .filter(|&k| k != j && self.reaches(k, j, t, traversal))
            .count()
    }

    fn reaches(&self, k: NodeId, j: NodeId, t: u64, traversal: Traversal) -> bool {
        match traversal {
            Traversal::Directed => self.has_arc(k, j, t),
            Traversal::Undirected => self.has_arc(k, j, t) || self.has_arc(j, k, t),
        }
    }

    /// Shortest path length from `i` to `j` before `t`, or `None` when there
    /// is no path of length at most `cap`.
    pub fn hop_distance(
        &self,
        i: NodeId,
        j: NodeId,
        t: u64,
        cap: u32,
        traversal: Traversal,
    ) -> Option<u32> {
        if i == j {
            return Some(0);
        }
        self.hop_distances_from(i, t, cap, traversal)
            .get(&j)
            .copied()
    }

    /// BFS distances from `i` to every node within `cap` hops.
    pub fn hop_distances_from(
        &self,
        i: NodeId,
        t: u64,
        cap: u32,
        traversal: Traversal,
    ) -> HashMap<NodeId, u32> {
        let mut dist = HashMap::new();
        dist.insert(i, 0);
        let mut queue = VecDeque::from([i]);
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            if d >= cap {
                continue;
            }
            for v in self.neighbors(u, t, traversal) {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(v) {
                    e.insert(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// The graph restricted to its first `k` edges.
    pub fn prefix_graph(&self, k: usize) -> TemporalGraph {
        let mut g = TemporalGraph::new(self.directed);
        for (v, m) in self.meta.iter().enumerate() {
            let id = g.add_node(m.clone());
            debug_assert_eq!(id.index(), v);
        }
        for e in &self.edges[..k.min(self.edges.len())] {
            g.add_timed_edge(e.source, e.target, e.event, e.timestamp)
                .expect("prefix of a valid graph is valid");
        }
        g.bootstrap_edges = self.bootstrap_edges.min(k);
        g
    }
}
