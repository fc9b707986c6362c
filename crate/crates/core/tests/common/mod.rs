//! Independent oracles shared by the integration and acceptance tests.

#![allow(dead_code)]

use std::collections::VecDeque;

use rand::Rng;
use wsn_keymgmt::keys::{controller_range_graph, ControllerKeyGraph};
use wsn_keymgmt::route::{Hop, RouteKind, RoutePath};
use wsn_keymgmt::{Network, NodeId, Position};

/// Checks every hop of `path` against the key graphs. Returns a description
/// of the first violation.
pub fn validate_path(net: &Network<'_>, src: NodeId, dst: NodeId, path: &RoutePath) -> Result<(), String> {
    if path.hops.first() != Some(&Hop::Node(src)) {
        return Err(format!("path {path} does not start at n{src}"));
    }
    if path.hops.last() != Some(&Hop::Node(dst)) {
        return Err(format!("path {path} does not end at n{dst}"));
    }
    if path.hop_count() < 1 {
        return Err(format!("path {path} has no hops"));
    }
    let same_cluster = net.cluster_of(src) == net.cluster_of(dst);
    match path.kind {
        RouteKind::Intra if !same_cluster => return Err("intra path across clusters".into()),
        RouteKind::Inter if same_cluster => return Err("inter path inside a cluster".into()),
        _ => {}
    }
    for w in path.hops.windows(2) {
        let ok = match (w[0], w[1]) {
            (Hop::Node(a), Hop::Node(b)) => {
                net.cluster_of(a) == net.cluster_of(b) && net.node_keys().neighbors(a).contains(&b)
            }
            (Hop::Controller(a), Hop::Controller(b)) => net.controller_keys().neighbors(a).contains(&b),
            (Hop::Node(n), Hop::Controller(c)) | (Hop::Controller(c), Hop::Node(n)) => net.cluster_of(n) == c,
        };
        if !ok {
            return Err(format!("unlicensed hop {} -> {} in {path}", w[0], w[1]));
        }
    }
    if path.kind == RouteKind::Intra {
        if path.hops.iter().any(|h| matches!(h, Hop::Controller(_))) {
            return Err(format!("intra path {path} visits a controller"));
        }
        let n = net.members(net.cluster_of(src)).len();
        if path.hop_count() > n {
            return Err(format!("intra path {path} exceeds cluster size {n}"));
        }
    }
    Ok(())
}

pub fn bfs_distances(g: &ControllerKeyGraph, s: usize) -> Vec<Option<u32>> {
    let mut d = vec![None; g.len()];
    d[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in g.neighbors(u) {
            if d[v].is_none() {
                d[v] = Some(d[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    d
}

/// A random graph on `n` controllers with edge density `density`; all
/// controllers are mutually in range.
pub fn random_controller_graph<R: Rng>(rng: &mut R, n: usize, density: f64) -> ControllerKeyGraph {
    let pos: Vec<Position> = (0..n).map(|i| Position::new(i as f64, 0.0)).collect();
    let cand = controller_range_graph(&pos, n as f64 + 1.0).unwrap();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(density) {
                edges.push((a, b));
            }
        }
    }
    ControllerKeyGraph::from_edges(&cand, edges).unwrap()
}

/// Minimum within-cluster sum of squares over every assignment of `points`
/// to at most `k` groups.
pub fn brute_force_kmeans(points: &[Position], k: usize) -> f64 {
    let n = points.len();
    let total = k.pow(n as u32);
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % k;
            c /= k;
        }
        let mut cost = 0.0;
        for g in 0..k {
            let members: Vec<&Position> = points.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            let cx = members.iter().map(|p| p.x).sum::<f64>() / members.len() as f64;
            let cy = members.iter().map(|p| p.y).sum::<f64>() / members.len() as f64;
            cost += members.iter().map(|p| (p.x - cx).powi(2) + (p.y - cy).powi(2)).sum::<f64>();
        }
        best = best.min(cost);
    }
    best
}

/// Every `k`-subset of `0..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}
