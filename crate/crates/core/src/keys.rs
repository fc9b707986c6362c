//! Birthday-problem key sizing and pairwise key distribution.
//!
//! Keys are opaque: a pairwise key is identified by its two endpoints and a
//! scope ([`KeyId`]), and no key material is ever generated. Node keys live
//! inside a single cluster; controller keys connect sub-controllers that are
//! within radio range of each other.

use std::fmt;
use std::io;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::cluster::Clustering;
use crate::deploy::{distance, NodeId, Position};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Error, PartialEq)]
pub enum KeyError {
    #[error("population must be at least 2, got {0}")]
    Population(u64),
    #[error("probability must lie strictly inside (0, 1), got {0}")]
    Probability(f64),
    #[error("cannot share keys with {s} partners in a cluster of {n}")]
    TooManyShares { s: usize, n: usize },
    #[error("communication range must be positive, got {0}")]
    Range(f64),
    #[error("key edge {a}-{b} is invalid: {reason}")]
    BadEdge { a: usize, b: usize, reason: &'static str },
}

/// Number of distinct pairwise keys among `n` parties: `n(n-1)/2`.
pub fn pool_size(n: u64) -> u64 {
    if n < 2 {
        0
    } else {
        n * (n - 1) / 2
    }
}

fn pairs(s: u64) -> f64 {
    pool_size(s) as f64
}

/// Birthday approximation `1 - (1 - 1/n)^C(s,2)`.
pub fn birthday_probability(n: u64, s: u64) -> Result<f64, KeyError> {
    if n < 2 {
        return Err(KeyError::Population(n));
    }
    let log_miss = (-1.0 / n as f64).ln_1p();
    Ok(-(pairs(s) * log_miss).exp_m1())
}

/// Exact probability that `n` draws from `d` equally likely values contain a
/// repeat, evaluated as `1 - prod_{i<n} (1 - i/d)` in log space.
///
/// Returns 1 when `n > d`.
pub fn exact_birthday_probability(d: u64, n: u64) -> f64 {
    if n > d {
        return 1.0;
    }
    let d = d as f64;
    let log_none: f64 = (0..n).map(|i| (-(i as f64) / d).ln_1p()).sum();
    -log_none.exp_m1()
}

fn check_probability(p: f64) -> Result<(), KeyError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(KeyError::Probability(p))
    }
}

/// Real root of `p = 1 - (1 - 1/n)^C(s,2)` in `s`, floored, without clamping.
fn shares_for_probability(n: u64, p: f64) -> Result<usize, KeyError> {
    if n < 2 {
        return Err(KeyError::Population(n));
    }
    check_probability(p)?;
    let pair_count = (-p).ln_1p() / (-1.0 / n as f64).ln_1p();
    let s = ((1.0 + (1.0 + 8.0 * pair_count).sqrt()) / 2.0).floor();
    Ok(s as usize)
}

/// Number of partners each node shares a key with so that the birthday
/// approximation over a population of `n` reaches `p`. Clamped to `n - 1`.
pub fn key_set_size(n: u64, p: f64) -> Result<usize, KeyError> {
    let s = shares_for_probability(n, p)?;
    Ok(s.min(n as usize - 1))
}

/// Key-set size for a cluster of `n` nodes; clusters with fewer than two
/// members have nobody to share with.
pub fn cluster_key_set_size(n: usize, p: f64) -> Result<usize, KeyError> {
    if n < 2 {
        check_probability(p)?;
        return Ok(0);
    }
    key_set_size(n as u64, p)
}

/// Which tier a key belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeyScope {
    Cluster(usize),
    Controller,
}

impl fmt::Display for KeyScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyScope::Cluster(c) => write!(f, "{c}"),
            KeyScope::Controller => f.write_str("ctrl"),
        }
    }
}

/// Opaque identifier of a pairwise key, with endpoints in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeyId {
    pub scope: KeyScope,
    pub a: u32,
    pub b: u32,
}

impl KeyId {
    pub fn new(scope: KeyScope, x: u32, y: u32) -> Self {
        Self {
            scope,
            a: x.min(y),
            b: x.max(y),
        }
    }
}

fn canonical(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Pairwise key distribution inside one cluster.
///
/// Members are visited in id order; each draws `s` distinct partners
/// uniformly from the other members. The union of all draws is returned as a
/// sorted, deduplicated list of canonical edges.
pub fn distribute_node_keys<R: Rng + ?Sized>(
    members: &[NodeId],
    s: usize,
    rng: &mut R,
) -> Result<Vec<(NodeId, NodeId)>, KeyError> {
    let n = members.len();
    if s == 0 {
        return Ok(Vec::new());
    }
    if s >= n {
        return Err(KeyError::TooManyShares { s, n });
    }
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let mut edges = Vec::with_capacity(n * s);
    for (i, &node) in sorted.iter().enumerate() {
        for j in index::sample(rng, n - 1, s) {
            let partner = sorted[if j >= i { j + 1 } else { j }];
            edges.push(canonical(node, partner));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

/// The "shares a pairwise key" relation among sensor nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyShareGraph {
    cluster_of: Vec<usize>,
    cluster_sizes: Vec<usize>,
    adjacency: Vec<Vec<NodeId>>,
    nominal_s: Vec<usize>,
}

impl KeyShareGraph {
    /// Distributes keys in every cluster for target probability `p`. Each
    /// cluster uses its own child stream of `seed`, so the result does not
    /// depend on processing order.
    pub fn distribute(clustering: &Clustering, p: f64, seed: u64) -> Result<Self, KeyError> {
        let members = clustering.members();
        let mut nominal_s = Vec::with_capacity(members.len());
        let mut edges = Vec::new();
        for (c, m) in members.iter().enumerate() {
            let s = cluster_key_set_size(m.len(), p)?;
            let mut rng = rng_from_seed(derive_seed(seed, c as u64));
            edges.extend(distribute_node_keys(m, s, &mut rng)?);
            nominal_s.push(s);
        }
        Self::from_edges(clustering.assignment().to_vec(), nominal_s, edges)
    }

    /// Builds a graph from explicit edges. Edges must join distinct nodes of
    /// the same cluster; duplicates collapse.
    pub fn from_edges(
        cluster_of: Vec<usize>,
        nominal_s: Vec<usize>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, KeyError> {
        let mut adjacency = vec![Vec::new(); cluster_of.len()];
        for (a, b) in edges {
            let (ai, bi) = (a.index(), b.index());
            let bad = |reason| KeyError::BadEdge { a: ai, b: bi, reason };
            if ai >= cluster_of.len() || bi >= cluster_of.len() {
                return Err(bad("unknown node"));
            }
            if ai == bi {
                return Err(bad("self-loop"));
            }
            if cluster_of[ai] != cluster_of[bi] {
                return Err(bad("endpoints in different clusters"));
            }
            adjacency[ai].push(b);
            adjacency[bi].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let k = cluster_of
            .iter()
            .map(|&c| c + 1)
            .max()
            .unwrap_or(0)
            .max(nominal_s.len());
        let mut cluster_sizes = vec![0; k];
        for &c in &cluster_of {
            cluster_sizes[c] += 1;
        }
        Ok(Self {
            cluster_of,
            cluster_sizes,
            adjacency,
            nominal_s,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn cluster_of(&self, node: NodeId) -> usize {
        self.cluster_of[node.index()]
    }

    pub fn cluster_size(&self, cluster: usize) -> usize {
        self.cluster_sizes.get(cluster).copied().unwrap_or(0)
    }

    /// Target shares per node for each cluster.
    pub fn nominal_s(&self) -> &[usize] {
        &self.nominal_s
    }

    /// Key partners of `node`, ascending.
    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[node.index()]
    }

    pub fn realized_degree(&self, node: NodeId) -> usize {
        self.adjacency[node.index()].len()
    }

    pub fn shares_key(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency
            .get(a.index())
            .is_some_and(|n| n.binary_search(&b).is_ok())
    }

    pub fn mean_degree(&self) -> f64 {
        if self.adjacency.is_empty() {
            return 0.0;
        }
        let total: usize = self.adjacency.iter().map(Vec::len).sum();
        total as f64 / self.adjacency.len() as f64
    }

    /// Canonical edges `(a, b)` with `a < b`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, list)| {
            let a = NodeId::from(i);
            list.iter().filter(move |&&b| a < b).map(move |&b| (a, b))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn key_ids(&self) -> impl Iterator<Item = KeyId> + '_ {
        self.edges()
            .map(|(a, b)| KeyId::new(KeyScope::Cluster(self.cluster_of(a)), a.0, b.0))
    }
}

/// Which sub-controllers can hear each other.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGraph {
    adjacency: Vec<Vec<usize>>,
    range_d: f64,
}

impl CandidateGraph {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn range(&self) -> f64 {
        self.range_d
    }

    pub fn in_range(&self, c: usize) -> &[usize] {
        &self.adjacency[c]
    }

    /// Number of controllers within range of `c`.
    pub fn l(&self, c: usize) -> usize {
        self.adjacency[c].len()
    }
}

/// Controllers `a` and `b` are candidates iff their distance is at most
/// `range_d` (boundary inclusive).
pub fn controller_range_graph(
    controllers: &[Position],
    range_d: f64,
) -> Result<CandidateGraph, KeyError> {
    if !(range_d > 0.0) {
        return Err(KeyError::Range(range_d));
    }
    let n = controllers.len();
    let mut adjacency = vec![Vec::new(); n];
    for a in 0..n {
        for b in a + 1..n {
            if distance(controllers[a], controllers[b]) <= range_d {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    Ok(CandidateGraph { adjacency, range_d })
}

/// Pairwise keys among sub-controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerKeyGraph {
    adjacency: Vec<Vec<usize>>,
    range_d: f64,
    l_per_controller: Vec<usize>,
    nominal_ss: Vec<usize>,
}

impl ControllerKeyGraph {
    /// Builds a key graph from explicit edges, each of which must be a
    /// candidate pair. The share counts are taken to be the realized degrees.
    pub fn from_edges(
        candidates: &CandidateGraph,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, KeyError> {
        let n = candidates.len();
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in edges {
            let bad = |reason| KeyError::BadEdge { a, b, reason };
            if a >= n || b >= n {
                return Err(bad("unknown controller"));
            }
            if a == b {
                return Err(bad("self-loop"));
            }
            if candidates.in_range(a).binary_search(&b).is_err() {
                return Err(bad("controllers out of range"));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            nominal_ss: adjacency.iter().map(Vec::len).collect(),
            l_per_controller: (0..n).map(|c| candidates.l(c)).collect(),
            adjacency,
            range_d: candidates.range(),
        })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn range(&self) -> f64 {
        self.range_d
    }

    pub fn neighbors(&self, c: usize) -> &[usize] {
        &self.adjacency[c]
    }

    pub fn shares_key(&self, a: usize, b: usize) -> bool {
        self.adjacency
            .get(a)
            .is_some_and(|n| n.binary_search(&b).is_ok())
    }

    pub fn l_per_controller(&self) -> &[usize] {
        &self.l_per_controller
    }

    /// Partners each controller drew.
    pub fn nominal_ss(&self) -> &[usize] {
        &self.nominal_ss
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    pub fn key_ids(&self) -> impl Iterator<Item = KeyId> + '_ {
        self.edges()
            .map(|(a, b)| KeyId::new(KeyScope::Controller, a as u32, b as u32))
    }
}

/// Partners a controller with `l` in-range peers draws for probability `p`.
///
/// Uses the birthday root over a population of `l`, capped at `l` so that a
/// saturated controller keys every peer. With `l <= 1` it keys all peers.
pub fn controller_share_count(l: usize, p: f64) -> Result<usize, KeyError> {
    check_probability(p)?;
    if l <= 1 {
        return Ok(l);
    }
    Ok(shares_for_probability(l as u64, p)?.min(l))
}

/// Each controller, in index order, draws its share count of distinct
/// partners uniformly from its in-range set; draws accumulate undirected.
pub fn distribute_controller_keys<R: Rng + ?Sized>(
    candidates: &CandidateGraph,
    p: f64,
    rng: &mut R,
) -> Result<ControllerKeyGraph, KeyError> {
    check_probability(p)?;
    let n = candidates.len();
    let mut edges = Vec::new();
    let mut nominal_ss = Vec::with_capacity(n);
    for c in 0..n {
        let peers = candidates.in_range(c);
        let ss = controller_share_count(peers.len(), p)?;
        for j in index::sample(rng, peers.len(), ss) {
            edges.push((c, peers[j]));
        }
        nominal_ss.push(ss);
    }
    let mut g = ControllerKeyGraph::from_edges(candidates, edges)?;
    g.nominal_ss = nominal_ss;
    Ok(g)
}

/// Writes `scope,endpoint_a,endpoint_b` rows: node keys (scope = cluster
/// index) first, then controller keys (scope = `ctrl`).
pub fn write_keys_csv<W: io::Write>(
    nodes: &KeyShareGraph,
    controllers: &ControllerKeyGraph,
    writer: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scope", "endpoint_a", "endpoint_b"])?;
    for key in nodes.key_ids().chain(controllers.key_ids()) {
        w.write_record([key.scope.to_string(), key.a.to_string(), key.b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
