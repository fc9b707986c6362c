//! On-demand path establishment.
//!
//! Inside a cluster a message is forwarded greedily along shared keys: each
//! hop goes to the key partner geographically nearest the destination.
//! Between clusters it climbs to the source's sub-controller, follows the
//! precomputed controller path, and descends into the destination cluster.
//! Discovered paths are remembered per ordered (source, destination) pair.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deploy::{distance_sq, NodeId, Position};
use crate::keys::{ControllerKeyGraph, KeyShareGraph};
use crate::network::Network;

/// One entity on a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hop {
    Node(NodeId),
    Controller(usize),
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hop::Node(n) => write!(f, "n{n}"),
            Hop::Controller(c) => write!(f, "c{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RouteKind {
    Intra,
    Inter,
}

impl RouteKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RouteKind::Intra => "intra",
            RouteKind::Inter => "inter",
        }
    }
}

impl fmt::Display for RouteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How an inter-cluster message enters the destination cluster.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EntryPolicy {
    /// The destination sub-controller delivers straight to the destination.
    #[default]
    Direct,
    /// The destination sub-controller hands the message to the cluster node
    /// nearest the destination, which then routes greedily.
    Greedy,
}

impl EntryPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryPolicy::Direct => "direct",
            EntryPolicy::Greedy => "greedy",
        }
    }
}

impl fmt::Display for EntryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntryPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(EntryPolicy::Direct),
            "greedy" => Ok(EntryPolicy::Greedy),
            other => Err(format!("unknown entry policy `{other}` (expected direct or greedy)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutePath {
    pub hops: Vec<Hop>,
    pub kind: RouteKind,
    pub from_cache: bool,
}

impl RoutePath {
    pub fn hop_count(&self) -> usize {
        self.hops.len().saturating_sub(1)
    }

    pub fn source(&self) -> Hop {
        self.hops[0]
    }

    pub fn destination(&self) -> Hop {
        *self.hops.last().expect("paths are never empty")
    }
}

impl fmt::Display for RoutePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, h) in self.hops.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{h}")?;
        }
        Ok(())
    }
}

/// Why greedy forwarding gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GreedyFailure {
    #[error("dead end at node {at} after {hops} hops")]
    DeadEnd { at: NodeId, hops: usize },
    #[error("hop limit {limit} exceeded")]
    HopLimit { limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("source and destination are both node {0}")]
    SameEndpoint(NodeId),
    #[error("node {0} is not part of the network")]
    UnknownNode(NodeId),
    #[error("nodes {src} and {dst} are in different clusters")]
    CrossCluster { src: NodeId, dst: NodeId },
    #[error("nodes {src} and {dst} are in the same cluster")]
    SameCluster { src: NodeId, dst: NodeId },
    #[error("intra-cluster routing failed: {0}")]
    Greedy(GreedyFailure),
    #[error("no controller path from controller {from} to controller {to}")]
    ControllerDisconnected { from: usize, to: usize },
    #[error("greedy delivery inside the destination cluster failed: {0}")]
    GreedyTail(GreedyFailure),
}

impl RouteError {
    /// True for caller mistakes, as opposed to routing outcomes.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            RouteError::SameEndpoint(_)
                | RouteError::UnknownNode(_)
                | RouteError::CrossCluster { .. }
                | RouteError::SameCluster { .. }
        )
    }

    /// Short label used in trace logs.
    pub fn outcome(&self) -> &'static str {
        match self {
            RouteError::Greedy(GreedyFailure::DeadEnd { .. }) => "dead_end",
            RouteError::Greedy(GreedyFailure::HopLimit { .. }) => "hop_limit",
            RouteError::ControllerDisconnected { .. } => "controller_disconnected",
            RouteError::GreedyTail(GreedyFailure::DeadEnd { .. }) => "tail_dead_end",
            RouteError::GreedyTail(GreedyFailure::HopLimit { .. }) => "tail_hop_limit",
            _ => "invalid",
        }
    }
}

/// Unit-weight shortest paths between every ordered pair of controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerRouteTable {
    dist: Vec<Vec<Option<u32>>>,
    paths: Vec<Vec<Option<Vec<usize>>>>,
}

impl ControllerRouteTable {
    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn distance(&self, from: usize, to: usize) -> Option<u32> {
        self.dist[from][to]
    }

    /// Controller ids from `from` to `to` inclusive, or `None` when the two
    /// are in different components.
    pub fn path(&self, from: usize, to: usize) -> Option<&[usize]> {
        self.paths[from][to].as_deref()
    }
}

fn dijkstra_unit(g: &ControllerKeyGraph, source: usize) -> Vec<Option<u32>> {
    let mut dist: Vec<Option<u32>> = vec![None; g.len()];
    let mut visited = vec![false; g.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = Some(0);
    heap.push(Reverse((0u32, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if visited[u] {
            continue;
        }
        visited[u] = true;
        for &v in g.neighbors(u) {
            let nd = d + 1;
            if dist[v].is_none_or(|old| nd < old) {
                dist[v] = Some(nd);
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist
}

/// All-pairs shortest paths over the controller key graph with every edge
/// weighing 1. Among equally short paths, each step takes the
/// lowest-numbered controller that still lies on a shortest path.
pub fn controller_paths(g: &ControllerKeyGraph) -> ControllerRouteTable {
    let n = g.len();
    let dist: Vec<Vec<Option<u32>>> = (0..n).map(|s| dijkstra_unit(g, s)).collect();
    let paths = (0..n)
        .map(|from| {
            (0..n)
                .map(|to| {
                    let mut remaining = dist[from][to]?;
                    let mut path = vec![from];
                    let mut cur = from;
                    while remaining > 0 {
                        // undirected graph: dist[v][to] == dist[to][v]
                        cur = *g
                            .neighbors(cur)
                            .iter()
                            .find(|&&v| dist[to][v] == Some(remaining - 1))
                            .expect("a shortest-path successor exists");
                        path.push(cur);
                        remaining -= 1;
                    }
                    Some(path)
                })
                .collect()
        })
        .collect();
    ControllerRouteTable { dist, paths }
}

/// Greedy forwarding inside one cluster.
///
/// A direct key partner receives the message immediately. Otherwise the
/// message moves to the unvisited key partner nearest `dst` (lowest id among
/// equals) until `dst` is a partner of the current holder. Fails when every
/// partner has already been visited, or when the path would exceed the
/// cluster size.
pub fn greedy_route(
    src: NodeId,
    dst: NodeId,
    keys: &KeyShareGraph,
    positions: &[Position],
) -> Result<RoutePath, RouteError> {
    for n in [src, dst] {
        if n.index() >= keys.node_count() || n.index() >= positions.len() {
            return Err(RouteError::UnknownNode(n));
        }
    }
    if src == dst {
        return Err(RouteError::SameEndpoint(src));
    }
    let cluster = keys.cluster_of(src);
    if cluster != keys.cluster_of(dst) {
        return Err(RouteError::CrossCluster { src, dst });
    }
    let limit = keys.cluster_size(cluster);
    let target = positions[dst.index()];

    let mut path = vec![src];
    let mut visited: HashSet<NodeId> = HashSet::from([src]);
    let mut cur = src;
    loop {
        if keys.shares_key(cur, dst) {
            path.push(dst);
            break;
        }
        if path.len() > limit {
            return Err(RouteError::Greedy(GreedyFailure::HopLimit { limit }));
        }
        let next = keys
            .neighbors(cur)
            .iter()
            .filter(|n| !visited.contains(n))
            .fold(None, |best: Option<(f64, NodeId)>, &n| {
                let d = distance_sq(positions[n.index()], target);
                match best {
                    Some((bd, _)) if bd <= d => best,
                    _ => Some((d, n)),
                }
            });
        let Some((_, next)) = next else {
            return Err(RouteError::Greedy(GreedyFailure::DeadEnd {
                at: cur,
                hops: path.len() - 1,
            }));
        };
        visited.insert(next);
        path.push(next);
        cur = next;
    }
    Ok(RoutePath {
        hops: path.into_iter().map(Hop::Node).collect(),
        kind: RouteKind::Intra,
        from_cache: false,
    })
}

/// Node of `cluster` nearest `dst`, other than `dst` itself.
fn entry_node(net: &Network<'_>, cluster: usize, dst: NodeId) -> Option<NodeId> {
    let target = net.deployment().position(dst);
    net.members(cluster)
        .iter()
        .filter(|&&n| n != dst)
        .fold(None, |best: Option<(f64, NodeId)>, &n| {
            let d = distance_sq(net.deployment().position(n), target);
            match best {
                Some((bd, _)) if bd <= d => best,
                _ => Some((d, n)),
            }
        })
        .map(|(_, n)| n)
}

/// Routes between nodes of different clusters through their sub-controllers.
pub fn inter_cluster_route(
    src: NodeId,
    dst: NodeId,
    net: &Network<'_>,
    mode: EntryPolicy,
) -> Result<RoutePath, RouteError> {
    for n in [src, dst] {
        if !net.contains(n) {
            return Err(RouteError::UnknownNode(n));
        }
    }
    if src == dst {
        return Err(RouteError::SameEndpoint(src));
    }
    let (from, to) = (net.cluster_of(src), net.cluster_of(dst));
    if from == to {
        return Err(RouteError::SameCluster { src, dst });
    }
    let controllers = net
        .routes()
        .path(from, to)
        .ok_or(RouteError::ControllerDisconnected { from, to })?;

    let mut hops = Vec::with_capacity(controllers.len() + 4);
    hops.push(Hop::Node(src));
    hops.extend(controllers.iter().map(|&c| Hop::Controller(c)));
    // a singleton destination cluster has no entry node besides dst
    match (mode, entry_node(net, to, dst)) {
        (EntryPolicy::Greedy, Some(entry)) => {
            let tail = greedy_route(entry, dst, net.node_keys(), net.positions())
                .map_err(|e| match e {
                    RouteError::Greedy(f) => RouteError::GreedyTail(f),
                    other => other,
                })?;
            hops.extend(tail.hops);
        }
        _ => hops.push(Hop::Node(dst)),
    }
    Ok(RoutePath {
        hops,
        kind: RouteKind::Inter,
        from_cache: false,
    })
}

/// Remembered paths, keyed by ordered (source, destination).
#[derive(Debug, Clone, Default)]
pub struct PathCache {
    entries: HashMap<(NodeId, NodeId), RoutePath>,
}

impl PathCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, src: NodeId, dst: NodeId) -> Option<&RoutePath> {
        self.entries.get(&(src, dst))
    }

    pub fn insert(&mut self, src: NodeId, dst: NodeId, path: RoutePath) {
        self.entries.insert((src, dst), path);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Establishes a path on first use and reuses it afterwards. Failures are
/// not cached, so a failed pair is searched again on the next query.
pub fn route(
    src: NodeId,
    dst: NodeId,
    net: &Network<'_>,
    cache: &mut PathCache,
    mode: EntryPolicy,
) -> Result<RoutePath, RouteError> {
    if src == dst {
        return Err(RouteError::SameEndpoint(src));
    }
    if let Some(hit) = cache.get(src, dst) {
        let mut path = hit.clone();
        path.from_cache = true;
        return Ok(path);
    }
    for n in [src, dst] {
        if !net.contains(n) {
            return Err(RouteError::UnknownNode(n));
        }
    }
    let path = if net.cluster_of(src) == net.cluster_of(dst) {
        greedy_route(src, dst, net.node_keys(), net.positions())?
    } else {
        inter_cluster_route(src, dst, net, mode)?
    };
    cache.insert(src, dst, path.clone());
    Ok(path)
}
