//! End-to-end experiments: deploy, cluster, distribute keys for every
//! probability in the sweep, route a random query workload, aggregate.
//!
//! Each trial derives its own seed from the base seed and its index, and the
//! clustering of a trial is shared by all probabilities in the sweep so the
//! sharing probability is the only thing that varies along a row set.

use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{kmeanspp, ClusterError, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::deploy::{generate_deployment, DeployError, NodeId};
use crate::keys::{cluster_key_set_size, pool_size, KeyError};
use crate::network::Network;
use crate::rng::{derive_path, derive_seed, rng_from_seed, stream};
use crate::route::{route, EntryPolicy, PathCache, RouteKind};

/// Header of the metrics CSV.
pub const CSV_HEADER: &str = "prob,clusters,nodes,s_nominal,mean_degree,avg_hops,intra_hops,inter_hops,delivery_rate,pool_cluster,pool_network,trials,seed";

/// Header of the per-query trace log.
pub const TRACE_HEADER: &str = "src,dst,kind,hops,from_cache,outcome";

/// Default probability sweep: 0.1 to 0.9 in steps of 0.1, then 0.99, 0.9999
/// and 1 - 1e-9.
pub fn default_probabilities() -> Vec<f64> {
    vec![
        0.1,
        0.2,
        0.3,
        0.4,
        0.5,
        0.6,
        0.7,
        0.8,
        0.9,
        0.99,
        0.9999,
        0.999_999_999,
    ]
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("--nodes must be at least 2 to issue queries, got {0}")]
    Nodes(usize),
    #[error("--clusters must be between 1 and the node count ({nodes}), got {clusters}")]
    Clusters { clusters: usize, nodes: usize },
    #[error("--area must be positive and finite, got {0}")]
    Area(f64),
    #[error("--probs must not be empty")]
    NoProbabilities,
    #[error("probability {0} is outside (0, 1)")]
    Probability(f64),
    #[error("--range must be positive, got {0}")]
    Range(f64),
    #[error("--queries must be at least 1")]
    Queries,
    #[error("--trials must be at least 1")]
    Trials,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Deploy(#[from] DeployError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Keys(#[from] KeyError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub nodes: usize,
    pub clusters: usize,
    pub area_side: f64,
    pub probabilities: Vec<f64>,
    pub controller_range: f64,
    pub queries_per_trial: usize,
    pub trials: usize,
    pub seed: u64,
    pub entry_policy: EntryPolicy,
}

impl Default for SimConfig {
    fn default() -> Self {
        let area_side = 1000.0;
        Self {
            nodes: 4000,
            clusters: 4,
            area_side,
            probabilities: default_probabilities(),
            controller_range: area_side * std::f64::consts::SQRT_2,
            queries_per_trial: 10_000,
            trials: 10,
            seed: 42,
            entry_policy: EntryPolicy::Direct,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nodes < 2 {
            return Err(ConfigError::Nodes(self.nodes));
        }
        if self.clusters == 0 || self.clusters > self.nodes {
            return Err(ConfigError::Clusters {
                clusters: self.clusters,
                nodes: self.nodes,
            });
        }
        if !(self.area_side.is_finite() && self.area_side > 0.0) {
            return Err(ConfigError::Area(self.area_side));
        }
        if self.probabilities.is_empty() {
            return Err(ConfigError::NoProbabilities);
        }
        if let Some(&p) = self.probabilities.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(ConfigError::Probability(p));
        }
        if !(self.controller_range > 0.0) {
            return Err(ConfigError::Range(self.controller_range));
        }
        if self.queries_per_trial == 0 {
            return Err(ConfigError::Queries);
        }
        if self.trials == 0 {
            return Err(ConfigError::Trials);
        }
        Ok(())
    }

    /// Cluster size used for the nominal key-set values: `nodes / clusters`.
    pub fn nominal_cluster_size(&self) -> usize {
        self.nodes / self.clusters
    }

    pub fn trial_seed(&self, trial_index: usize) -> u64 {
        derive_seed(self.seed, trial_index as u64)
    }
}

/// Outcome of one routed query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: RouteKind,
    /// Hop count on success.
    pub hops: Option<usize>,
    pub from_cache: bool,
    /// `ok` or the failure label from [`crate::route::RouteError::outcome`].
    pub outcome: &'static str,
}

/// Everything one trial measured at one sharing probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRun {
    pub probability: f64,
    pub s_nominal: usize,
    /// Per-cluster share targets actually used.
    pub cluster_s: Vec<usize>,
    pub mean_degree: f64,
    pub queries: Vec<QueryOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: usize,
    pub nodes: usize,
    pub clusters: usize,
    pub base_seed: u64,
    pub cluster_sizes: Vec<usize>,
    pub runs: Vec<ProbabilityRun>,
}

/// Uniform ordered pairs with distinct endpoints.
fn draw_queries(m: usize, count: usize, seed: u64) -> Vec<(NodeId, NodeId)> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let src = rng.gen_range(0..m);
            let mut dst = rng.gen_range(0..m - 1);
            if dst >= src {
                dst += 1;
            }
            (NodeId::from(src), NodeId::from(dst))
        })
        .collect()
}

const KEYS_FOR_PROBABILITY: u64 = 0x7072_6f62;

/// Runs one trial over the whole probability sweep.
pub fn run_trial(config: &SimConfig, trial_index: usize) -> Result<TrialResult, SimError> {
    config.validate()?;
    let seed = config.trial_seed(trial_index);
    let deployment = generate_deployment(
        config.nodes,
        config.area_side,
        derive_seed(seed, stream::DEPLOY),
    )?;
    let mut cluster_rng = rng_from_seed(derive_seed(seed, stream::CLUSTER));
    let clustering = kmeanspp(
        deployment.positions(),
        config.clusters,
        &mut cluster_rng,
        DEFAULT_MAX_ITER,
        DEFAULT_TOL,
    )?;
    let queries = draw_queries(
        config.nodes,
        config.queries_per_trial,
        derive_seed(seed, stream::QUERIES),
    );

    let mut runs = Vec::with_capacity(config.probabilities.len());
    for &p in &config.probabilities {
        let key_seed = derive_path(seed, &[KEYS_FOR_PROBABILITY, p.to_bits()]);
        let net = Network::distribute(&deployment, &clustering, p, config.controller_range, key_seed)?;
        let mut cache = PathCache::new();
        let outcomes = queries
            .iter()
            .map(|&(src, dst)| {
                let kind = if net.cluster_of(src) == net.cluster_of(dst) {
                    RouteKind::Intra
                } else {
                    RouteKind::Inter
                };
                match route(src, dst, &net, &mut cache, config.entry_policy) {
                    Ok(path) => QueryOutcome {
                        src,
                        dst,
                        kind,
                        hops: Some(path.hop_count()),
                        from_cache: path.from_cache,
                        outcome: "ok",
                    },
                    Err(e) => QueryOutcome {
                        src,
                        dst,
                        kind,
                        hops: None,
                        from_cache: false,
                        outcome: e.outcome(),
                    },
                }
            })
            .collect();
        runs.push(ProbabilityRun {
            probability: p,
            s_nominal: cluster_key_set_size(config.nominal_cluster_size(), p)?,
            cluster_s: net.node_keys().nominal_s().to_vec(),
            mean_degree: net.node_keys().mean_degree(),
            queries: outcomes,
        });
    }
    Ok(TrialResult {
        trial_index,
        nodes: config.nodes,
        clusters: config.clusters,
        base_seed: config.seed,
        cluster_sizes: clustering.sizes(),
        runs,
    })
}

/// Runs every trial. Trials execute in parallel; results come back in
/// trial-index order.
pub fn run_trials(config: &SimConfig) -> Result<Vec<TrialResult>, SimError> {
    config.validate()?;
    (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect()
}

/// One row of experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub probability: f64,
    pub clusters: usize,
    pub nodes: usize,
    pub s_nominal: usize,
    pub mean_realized_degree: f64,
    /// Mean hops over successful queries; NaN when none succeeded.
    pub avg_hops: f64,
    pub intra_avg_hops: f64,
    pub inter_avg_hops: f64,
    pub delivery_rate: f64,
    pub pool_keys_cluster: u64,
    pub pool_keys_network: u64,
    pub trials: usize,
    pub seed: u64,
    pub queries: usize,
    pub successes: usize,
    pub intra_queries: usize,
    pub inter_queries: usize,
    pub intra_successes: usize,
    pub inter_successes: usize,
}

impl MetricsRecord {
    pub fn failures(&self) -> usize {
        self.queries - self.successes
    }
}

fn ratio(sum: usize, count: usize) -> f64 {
    if count == 0 {
        f64::NAN
    } else {
        sum as f64 / count as f64
    }
}

#[derive(Default)]
struct Tally {
    queries: usize,
    successes: usize,
    hops: usize,
    intra: (usize, usize, usize),
    inter: (usize, usize, usize),
}

/// Merges trials (in the order given) into one record per probability.
/// Hop averages are weighted by successful-query counts; failed queries only
/// count against the delivery rate.
///
/// # Panics
///
/// Panics if `trials` is empty or the trials disagree on the sweep.
pub fn aggregate(trials: &[TrialResult]) -> Vec<MetricsRecord> {
    let first = trials.first().expect("aggregate needs at least one trial");
    let n_probs = first.runs.len();
    assert!(
        trials.iter().all(|t| t.runs.len() == n_probs),
        "trials ran different sweeps"
    );
    (0..n_probs)
        .map(|pi| {
            let probability = first.runs[pi].probability;
            let mut t = Tally::default();
            let mut degree_sum = 0.0;
            for trial in trials {
                let run = &trial.runs[pi];
                assert_eq!(run.probability.to_bits(), probability.to_bits());
                degree_sum += run.mean_degree;
                for q in &run.queries {
                    t.queries += 1;
                    let bucket = match q.kind {
                        RouteKind::Intra => &mut t.intra,
                        RouteKind::Inter => &mut t.inter,
                    };
                    bucket.0 += 1;
                    if let Some(h) = q.hops {
                        t.successes += 1;
                        t.hops += h;
                        bucket.1 += 1;
                        bucket.2 += h;
                    }
                }
            }
            let nominal_n = first.nodes / first.clusters;
            MetricsRecord {
                probability,
                clusters: first.clusters,
                nodes: first.nodes,
                s_nominal: first.runs[pi].s_nominal,
                mean_realized_degree: degree_sum / trials.len() as f64,
                avg_hops: ratio(t.hops, t.successes),
                intra_avg_hops: ratio(t.intra.2, t.intra.1),
                inter_avg_hops: ratio(t.inter.2, t.inter.1),
                delivery_rate: ratio(t.successes, t.queries),
                pool_keys_cluster: pool_size(nominal_n as u64),
                pool_keys_network: pool_size(first.nodes as u64),
                trials: trials.len(),
                seed: first.base_seed,
                queries: t.queries,
                successes: t.successes,
                intra_queries: t.intra.0,
                inter_queries: t.inter.0,
                intra_successes: t.intra.1,
                inter_successes: t.inter.1,
            }
        })
        .collect()
}

/// Runs the configured experiment and aggregates it.
pub fn run(config: &SimConfig) -> Result<(Vec<TrialResult>, Vec<MetricsRecord>), SimError> {
    let trials = run_trials(config)?;
    let records = aggregate(&trials);
    Ok((trials, records))
}

/// Writes the metrics CSV. Floats use Rust's shortest round-trip formatting,
/// so identical inputs give identical bytes.
pub fn write_csv<W: io::Write>(records: &[MetricsRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.probability,
            r.clusters,
            r.nodes,
            r.s_nominal,
            r.mean_realized_degree,
            r.avg_hops,
            r.intra_avg_hops,
            r.inter_avg_hops,
            r.delivery_rate,
            r.pool_keys_cluster,
            r.pool_keys_network,
            r.trials,
            r.seed
        )?;
    }
    out.flush()
}

fn with_path<T>(path: &Path, res: io::Result<T>) -> Result<T, SimError> {
    res.map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_csv_file(records: &[MetricsRecord], path: &Path) -> Result<(), SimError> {
    let file = with_path(path, std::fs::File::create(path))?;
    with_path(path, write_csv(records, io::BufWriter::new(file)))
}

/// Writes one line per query in trial, probability, query order. Failed
/// queries report 0 hops.
pub fn write_trace<W: io::Write>(trials: &[TrialResult], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for trial in trials {
        for run in &trial.runs {
            for q in &run.queries {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    q.src,
                    q.dst,
                    q.kind,
                    q.hops.unwrap_or(0),
                    q.from_cache,
                    q.outcome
                )?;
            }
        }
    }
    out.flush()
}

pub fn write_trace_file(trials: &[TrialResult], path: &Path) -> Result<(), SimError> {
    let file = with_path(path, std::fs::File::create(path))?;
    with_path(path, write_trace(trials, io::BufWriter::new(file)))
}

/// Human-readable table of the records.
pub fn write_summary<W: io::Write>(
    config: &SimConfig,
    records: &[MetricsRecord],
    mut out: W,
) -> io::Result<()> {
    writeln!(
        out,
        "{} nodes, {} clusters, area {}, {} trials x {} queries, entry policy {}, seed {}",
        config.nodes,
        config.clusters,
        config.area_side,
        config.trials,
        config.queries_per_trial,
        config.entry_policy,
        config.seed
    )?;
    writeln!(out, "hops count every transmission, including node-controller and controller-controller links")?;
    writeln!(
        out,
        "{:>12} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "p", "s", "degree", "avg_hops", "intra", "inter", "delivered"
    )?;
    for r in records {
        writeln!(
            out,
            "{:>12} {:>6} {:>9.2} {:>9.3} {:>9.3} {:>9.3} {:>9.4}",
            r.probability,
            r.s_nominal,
            r.mean_realized_degree,
            r.avg_hops,
            r.intra_avg_hops,
            r.inter_avg_hops,
            r.delivery_rate
        )?;
    }
    out.flush()
}
