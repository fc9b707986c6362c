use wsn_keymgmt::keys::key_set_size;
use wsn_keymgmt::sim::{self, default_probabilities};
use wsn_keymgmt::SimConfig;

fn config(clusters: usize, seed: u64) -> SimConfig {
    SimConfig {
        nodes: 4000,
        clusters,
        queries_per_trial: 3000,
        trials: 1,
        seed,
        ..SimConfig::default()
    }
}

#[test]
fn hops_fall_as_probability_rises() {
    // single trials can split the four-controller graph at low p, which drops
    // the short inter-cluster queries from the average; aggregate ten
    for seed in 0..2 {
        let cfg = SimConfig { trials: 10, queries_per_trial: 2000, ..config(4, seed) };
        let (_, records) = sim::run(&cfg).unwrap();
        let hops: Vec<f64> = records.iter().map(|r| r.avg_hops).collect();
        let inversions: Vec<_> = hops.windows(2).filter(|w| w[1] > w[0]).collect();
        assert!(inversions.len() <= 1, "seed {seed}: {hops:?}");
        for w in inversions {
            assert!(w[1] <= w[0] * 1.05, "seed {seed}: {hops:?}");
        }
        let degrees: Vec<f64> = records.iter().map(|r| r.mean_realized_degree).collect();
        assert!(degrees.windows(2).all(|w| w[1] >= w[0]), "{degrees:?}");
    }
}

#[test]
fn nominal_share_count_tracks_cluster_size() {
    let p = 0.5;
    let s: Vec<usize> = [4, 8, 12]
        .iter()
        .map(|&k| {
            let (_, records) = sim::run(&SimConfig { probabilities: vec![p], ..config(k, 1) }).unwrap();
            assert_eq!(records[0].s_nominal, key_set_size((4000 / k) as u64, p).unwrap());
            records[0].s_nominal
        })
        .collect();
    assert!(s[2] < s[1] && s[1] <= s[0], "{s:?}");
}

#[test]
fn records_agree_with_trace() {
    let cfg = SimConfig { trials: 3, queries_per_trial: 500, probabilities: vec![0.2, 0.7], ..config(6, 9) };
    let (trials, records) = sim::run(&cfg).unwrap();
    assert_eq!(records.len(), 2);
    for (i, rec) in records.iter().enumerate() {
        let outcomes: Vec<_> = trials.iter().flat_map(|t| &t.runs[i].queries).collect();
        assert_eq!(rec.queries, outcomes.len());
        let hops: Vec<usize> = outcomes.iter().filter_map(|q| q.hops).collect();
        assert_eq!(rec.successes, hops.len());
        let mean = hops.iter().sum::<usize>() as f64 / hops.len() as f64;
        assert!((rec.avg_hops - mean).abs() < 1e-9);
        assert!((rec.delivery_rate - hops.len() as f64 / outcomes.len() as f64).abs() < 1e-12);
        assert_eq!(rec.intra_queries + rec.inter_queries, rec.queries);
    }

    let mut buf = Vec::new();
    sim::write_trace(&trials, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 3 * 2 * 500);
}

#[test]
fn default_sweep_is_reproducible() {
    let cfg = SimConfig { nodes: 300, queries_per_trial: 300, trials: 2, ..SimConfig::default() };
    assert_eq!(cfg.probabilities, default_probabilities());
    let write = || {
        let (_, records) = sim::run(&cfg).unwrap();
        let mut buf = Vec::new();
        sim::write_csv(&records, &mut buf).unwrap();
        buf
    };
    assert_eq!(write(), write());
}
