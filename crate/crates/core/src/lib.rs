//! Cluster-based pairwise key management for wireless sensor networks.
//!
//! The network is partitioned with k-means++ into clusters, each headed by a
//! sub-controller placed at the cluster mean. Nodes share pairwise keys with
//! a birthday-bound number of random peers inside their own cluster, and
//! sub-controllers share keys with peers in radio range. Messages travel by
//! greedy forwarding along shared keys inside a cluster, and through the
//! sub-controllers' shortest key paths between clusters.
//!
//! The [`sim`] module ties the pieces into seedable experiments that sweep
//! the sharing probability and report key-set sizes and hop counts.

pub mod cli;
pub mod cluster;
pub mod deploy;
pub mod keys;
pub mod network;
pub mod rng;
pub mod route;
pub mod sim;

pub use cluster::{kmeanspp, Clustering};
pub use deploy::{distance, generate_deployment, Deployment, NodeId, Position};
pub use keys::{
    birthday_probability, exact_birthday_probability, key_set_size, pool_size, ControllerKeyGraph,
    KeyShareGraph,
};
pub use network::Network;
pub use route::{controller_paths, greedy_route, inter_cluster_route, route, EntryPolicy, PathCache, RoutePath};
pub use sim::{aggregate, run_trial, MetricsRecord, SimConfig};
