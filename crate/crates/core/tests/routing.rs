mod common;

use rand::Rng;
use wsn_keymgmt::cluster::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use wsn_keymgmt::rng::rng_from_seed;
use wsn_keymgmt::route::{greedy_route, RouteError, RouteKind};
use wsn_keymgmt::{controller_paths, generate_deployment, kmeanspp, route, EntryPolicy, Network, NodeId, PathCache};

#[test]
fn controller_paths_match_bfs() {
    let mut rng = rng_from_seed(7);
    for _ in 0..100 {
        let n = rng.gen_range(1..=50);
        let density = rng.gen_range(0.0..0.3);
        let g = common::random_controller_graph(&mut rng, n, density);
        let table = controller_paths(&g);
        for a in 0..n {
            let oracle = common::bfs_distances(&g, a);
            for b in 0..n {
                assert_eq!(table.distance(a, b), oracle[b]);
                match table.path(a, b) {
                    Some(p) => {
                        assert_eq!(p.len() as u32 - 1, oracle[b].unwrap());
                        assert_eq!((p[0], *p.last().unwrap()), (a, b));
                        assert!(p.windows(2).all(|w| g.shares_key(w[0], w[1])));
                    }
                    None => assert!(oracle[b].is_none()),
                }
            }
        }
    }
}

#[test]
fn random_queries_use_only_keyed_hops() {
    let mut rng = rng_from_seed(11);
    let mut routed = 0;
    for world in 0..20u64 {
        let m = rng.gen_range(20..300);
        let k = rng.gen_range(1..=8);
        let p = rng.gen_range(0.05..0.99);
        let range = rng.gen_range(50.0..1500.0);
        let mode = if world % 2 == 0 { EntryPolicy::Direct } else { EntryPolicy::Greedy };
        let dep = generate_deployment(m, 1000.0, world).unwrap();
        let clus = kmeanspp(dep.positions(), k, &mut rng_from_seed(world), DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let net = Network::distribute(&dep, &clus, p, range, world).unwrap();
        let mut cache = PathCache::new();
        for _ in 0..100 {
            let src = NodeId::from(rng.gen_range(0..m));
            let dst = NodeId::from(rng.gen_range(0..m));
            match route(src, dst, &net, &mut cache, mode) {
                Ok(path) => {
                    common::validate_path(&net, src, dst, &path).unwrap();
                    routed += 1;
                }
                Err(RouteError::SameEndpoint(_)) => assert_eq!(src, dst),
                Err(e) => assert!(!e.is_precondition(), "{e}"),
            }
        }
    }
    assert!(routed > 1000);
}

#[test]
fn greedy_terminates_within_cluster_size() {
    for inst in 0..1000u64 {
        let mut rng = rng_from_seed(inst);
        let m = rng.gen_range(2..60);
        let p = rng.gen_range(0.01..0.95);
        let dep = generate_deployment(m, 100.0, inst).unwrap();
        let clus = kmeanspp(dep.positions(), 1, &mut rng, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let net = Network::distribute(&dep, &clus, p, 1.0, inst).unwrap();
        let src = NodeId::from(rng.gen_range(0..m));
        let dst = NodeId::from((src.index() + 1 + rng.gen_range(0..m - 1)) % m);
        if let Ok(path) = greedy_route(src, dst, net.node_keys(), net.positions()) {
            assert!(path.hop_count() <= m);
            common::validate_path(&net, src, dst, &path).unwrap();
        }
    }
}

#[test]
fn denser_keys_fail_less_often() {
    let dep = generate_deployment(400, 1000.0, 3).unwrap();
    let clus = kmeanspp(dep.positions(), 4, &mut rng_from_seed(3), DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
    let mut rng = rng_from_seed(99);
    let queries: Vec<(NodeId, NodeId)> = (0..2000)
        .map(|_| {
            let a = rng.gen_range(0..400);
            let b = (a + 1 + rng.gen_range(0..399)) % 400;
            (NodeId::from(a), NodeId::from(b))
        })
        .filter(|&(a, b)| clus.cluster_of(a) == clus.cluster_of(b))
        .collect();
    let failure_rate = |p: f64, seed: u64| {
        let net = Network::distribute(&dep, &clus, p, 2000.0, seed).unwrap();
        let mut cache = PathCache::new();
        let failed = queries
            .iter()
            .filter(|&&(a, b)| route(a, b, &net, &mut cache, EntryPolicy::Direct).is_err())
            .count();
        failed as f64 / queries.len() as f64
    };
    let mut holds = 0;
    for seed in 0..10 {
        if failure_rate(0.05, seed) >= failure_rate(0.9, seed) {
            holds += 1;
        }
    }
    assert!(holds >= 9, "{holds}/10");
}

#[test]
fn cache_replays_identical_paths() {
    let dep = generate_deployment(300, 1000.0, 5).unwrap();
    let clus = kmeanspp(dep.positions(), 4, &mut rng_from_seed(5), DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
    let run = || {
        let net = Network::distribute(&dep, &clus, 0.5, 2000.0, 5).unwrap();
        let mut cache = PathCache::new();
        let mut rng = rng_from_seed(6);
        let mut seen = Vec::new();
        for _ in 0..500 {
            let (a, b) = (NodeId::from(rng.gen_range(0..20)), NodeId::from(rng.gen_range(0..20)));
            seen.push(route(a, b, &net, &mut cache, EntryPolicy::Greedy).map(|p| (p.hops, p.kind, p.from_cache)));
        }
        seen
    };
    let first = run();
    assert_eq!(first, run());
    assert!(first.iter().any(|r| matches!(r, Ok((_, _, true)))));
    assert!(first.iter().any(|r| matches!(r, Ok((_, RouteKind::Inter, _)))));
}
