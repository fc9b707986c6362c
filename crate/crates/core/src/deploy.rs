//! Node deployment and planar geometry.

use std::fmt;
use std::io;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_from_seed;

#[derive(Debug, Error)]
pub enum DeployError {
    #[error("node count must be at least 1")]
    NoNodes,
    #[error("area side must be positive and finite, got {0}")]
    BadArea(f64),
    #[error("deployment csv {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("deployment csv {path}: {msg}")]
    Format { path: String, msg: String },
}

/// A point in the deployment square.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        distance(*self, *other)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Euclidean distance between two positions.
pub fn distance(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Squared Euclidean distance.
pub fn distance_sq(a: Position, b: Position) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

/// Identifier of a sensor node. Ids are dense: `0..m` for `m` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(u32::try_from(i).expect("node index exceeds u32"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A deployed network: node `i` sits at `positions[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    positions: Vec<Position>,
    area_side: f64,
    rng_seed: u64,
}

impl Deployment {
    /// Builds a deployment from explicit positions. Positions must lie in
    /// `[0, area_side]²`.
    pub fn from_positions(
        positions: Vec<Position>,
        area_side: f64,
        rng_seed: u64,
    ) -> Result<Self, DeployError> {
        check_params(positions.len(), area_side)?;
        Ok(Self {
            positions,
            area_side,
            rng_seed,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn area_side(&self) -> f64 {
        self.area_side
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn position(&self, id: NodeId) -> Position {
        self.positions[id.index()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, Position)> + '_ {
        self.positions
            .iter()
            .enumerate()
            .map(|(i, p)| (NodeId::from(i), *p))
    }

    /// Length of the deployment square's diagonal.
    pub fn diagonal(&self) -> f64 {
        self.area_side * std::f64::consts::SQRT_2
    }

    /// Writes `node_id,x,y` rows. Coordinates use the shortest decimal form
    /// that round-trips to the same `f64`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["node_id", "x", "y"])?;
        for (id, p) in self.nodes() {
            w.write_record([id.to_string(), p.x.to_string(), p.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), DeployError> {
        let file = std::fs::File::create(path).map_err(|e| DeployError::Csv {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        self.write_csv(file).map_err(|source| DeployError::Csv {
            path: path.display().to_string(),
            source,
        })
    }

    /// Reads a deployment written by [`Deployment::write_csv`]. Rows must list
    /// ids `0..m` in order.
    pub fn load_csv(path: &Path, area_side: f64, rng_seed: u64) -> Result<Self, DeployError> {
        let p = path.display().to_string();
        let mut reader = csv::Reader::from_path(path).map_err(|source| DeployError::Csv {
            path: p.clone(),
            source,
        })?;
        let mut positions = Vec::new();
        for (row, rec) in reader.deserialize::<(u32, f64, f64)>().enumerate() {
            let (id, x, y) = rec.map_err(|source| DeployError::Csv {
                path: p.clone(),
                source,
            })?;
            if id as usize != row {
                return Err(DeployError::Format {
                    path: p,
                    msg: format!("expected node_id {row}, found {id}"),
                });
            }
            if !(0.0..=area_side).contains(&x) || !(0.0..=area_side).contains(&y) {
                return Err(DeployError::Format {
                    path: p,
                    msg: format!("node {id} at ({x}, {y}) lies outside the area"),
                });
            }
            positions.push(Position::new(x, y));
        }
        Self::from_positions(positions, area_side, rng_seed)
    }
}

fn check_params(m: usize, area_side: f64) -> Result<(), DeployError> {
    if m == 0 {
        return Err(DeployError::NoNodes);
    }
    if !(area_side.is_finite() && area_side > 0.0) {
        return Err(DeployError::BadArea(area_side));
    }
    Ok(())
}

/// Places `m` nodes independently and uniformly over `[0, area_side]²`.
pub fn generate_deployment(m: usize, area_side: f64, seed: u64) -> Result<Deployment, DeployError> {
    check_params(m, area_side)?;
    let mut rng = rng_from_seed(seed);
    let positions = (0..m)
        .map(|_| {
            Position::new(
                rng.gen_range(0.0..=area_side),
                rng.gen_range(0.0..=area_side),
            )
        })
        .collect();
    Ok(Deployment {
        positions,
        area_side,
        rng_seed: seed,
    })
}
