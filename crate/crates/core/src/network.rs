//! A fully keyed network: deployment, clusters, key graphs and the
//! controller route table, ready for routing queries.

use crate::cluster::Clustering;
use crate::deploy::{Deployment, NodeId, Position};
use crate::keys::{
    controller_range_graph, distribute_controller_keys, ControllerKeyGraph, KeyError,
    KeyShareGraph,
};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::route::{controller_paths, ControllerRouteTable};

#[derive(Debug, Clone)]
pub struct Network<'a> {
    deployment: &'a Deployment,
    clustering: &'a Clustering,
    members: Vec<Vec<NodeId>>,
    node_keys: KeyShareGraph,
    controller_keys: ControllerKeyGraph,
    routes: ControllerRouteTable,
}

impl<'a> Network<'a> {
    /// Assembles a network from prebuilt key graphs and computes the
    /// controller route table.
    pub fn new(
        deployment: &'a Deployment,
        clustering: &'a Clustering,
        node_keys: KeyShareGraph,
        controller_keys: ControllerKeyGraph,
    ) -> Self {
        assert_eq!(deployment.len(), clustering.assignment().len());
        assert_eq!(node_keys.node_count(), deployment.len());
        assert_eq!(controller_keys.len(), clustering.k());
        let routes = controller_paths(&controller_keys);
        Self {
            deployment,
            clustering,
            members: clustering.members(),
            node_keys,
            controller_keys,
            routes,
        }
    }

    /// Distributes node and controller keys for target probability `p`.
    /// Controllers within `controller_range` of each other are key candidates.
    pub fn distribute(
        deployment: &'a Deployment,
        clustering: &'a Clustering,
        p: f64,
        controller_range: f64,
        seed: u64,
    ) -> Result<Self, KeyError> {
        let node_keys = KeyShareGraph::distribute(clustering, p, derive_seed(seed, stream::NODE_KEYS))?;
        let candidates = controller_range_graph(clustering.means(), controller_range)?;
        let mut rng = rng_from_seed(derive_seed(seed, stream::CTRL_KEYS));
        let controller_keys = distribute_controller_keys(&candidates, p, &mut rng)?;
        Ok(Self::new(deployment, clustering, node_keys, controller_keys))
    }

    pub fn deployment(&self) -> &Deployment {
        self.deployment
    }

    pub fn positions(&self) -> &[Position] {
        self.deployment.positions()
    }

    pub fn clustering(&self) -> &Clustering {
        self.clustering
    }

    pub fn cluster_of(&self, node: NodeId) -> usize {
        self.clustering.cluster_of(node)
    }

    pub fn members(&self, cluster: usize) -> &[NodeId] {
        &self.members[cluster]
    }

    pub fn node_keys(&self) -> &KeyShareGraph {
        &self.node_keys
    }

    pub fn controller_keys(&self) -> &ControllerKeyGraph {
        &self.controller_keys
    }

    pub fn routes(&self) -> &ControllerRouteTable {
        &self.routes
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.index() < self.deployment.len()
    }
}
