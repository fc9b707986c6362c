//! k-means++ seeding and Lloyd iteration.
//!
//! The final means double as sub-controller locations: controller `i` sits at
//! `means[i]` and heads every node bound to cluster `i`.

use std::io;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::deploy::{distance_sq, NodeId, Position};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("cluster count must be at least 1")]
    ZeroClusters,
    #[error("cannot cluster an empty point set")]
    NoPoints,
    #[error("requested {k} clusters but only {found} distinct points exist")]
    TooFewDistinctPoints { k: usize, found: usize },
    #[error("assignment covers {got} points, expected {expected}")]
    AssignmentLength { expected: usize, got: usize },
    #[error("cluster index {index} out of range for k = {k}")]
    ClusterIndex { index: usize, k: usize },
}

/// Result of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    k: usize,
    assignment: Vec<usize>,
    means: Vec<Position>,
    objective: f64,
    iterations: usize,
    objective_trace: Vec<f64>,
}

impl Clustering {
    /// Wraps an explicit partition. Used for hand-built worlds and loaded
    /// dumps; the objective is recomputed from the inputs.
    pub fn from_parts(
        points: &[Position],
        assignment: Vec<usize>,
        means: Vec<Position>,
    ) -> Result<Self, ClusterError> {
        let k = means.len();
        if k == 0 {
            return Err(ClusterError::ZeroClusters);
        }
        if assignment.len() != points.len() {
            return Err(ClusterError::AssignmentLength {
                expected: points.len(),
                got: assignment.len(),
            });
        }
        if let Some(&index) = assignment.iter().find(|&&c| c >= k) {
            return Err(ClusterError::ClusterIndex { index, k });
        }
        let obj = objective(points, &assignment, &means);
        Ok(Self {
            k,
            assignment,
            means,
            objective: obj,
            iterations: 0,
            objective_trace: vec![obj],
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_of(&self, node: NodeId) -> usize {
        self.assignment[node.index()]
    }

    pub fn means(&self) -> &[Position] {
        &self.means
    }

    /// Sum of squared distances from each point to its cluster mean.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Number of Lloyd iterations run.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Objective after every (assign, update) step, followed by the final
    /// re-binding against the converged means.
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    /// Members of each cluster in ascending id order.
    pub fn members(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(NodeId::from(i));
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for &c in &self.assignment {
            out[c] += 1;
        }
        out
    }

    /// Writes `node_id,cluster` rows.
    pub fn write_assignment_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["node_id", "cluster"])?;
        for (i, c) in self.assignment.iter().enumerate() {
            w.write_record([i.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `cluster,mean_x,mean_y` rows.
    pub fn write_means_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["cluster", "mean_x", "mean_y"])?;
        for (i, m) in self.means.iter().enumerate() {
            w.write_record([i.to_string(), m.x.to_string(), m.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes both dumps next to each other: `<stem>_assignment.csv` and
    /// `<stem>_means.csv` inside `dir`.
    pub fn save_csv(&self, dir: &Path, stem: &str) -> io::Result<()> {
        let a = std::fs::File::create(dir.join(format!("{stem}_assignment.csv")))?;
        self.write_assignment_csv(a).map_err(io::Error::other)?;
        let m = std::fs::File::create(dir.join(format!("{stem}_means.csv")))?;
        self.write_means_csv(m).map_err(io::Error::other)
    }
}

/// Incremental state of k-means++ seeding: the centers chosen so far and each
/// point's squared distance to the nearest of them.
#[derive(Debug, Clone)]
pub struct SeedingState {
    pub chosen: Vec<Position>,
    pub d2: Vec<f64>,
}

impl SeedingState {
    pub fn new(points: &[Position], first: Position) -> Self {
        let d2 = points.iter().map(|&p| distance_sq(p, first)).collect();
        Self {
            chosen: vec![first],
            d2,
        }
    }

    pub fn add(&mut self, points: &[Position], center: Position) {
        for (d, &p) in self.d2.iter_mut().zip(points) {
            *d = d.min(distance_sq(p, center));
        }
        self.chosen.push(center);
    }

    pub fn total_weight(&self) -> f64 {
        self.d2.iter().sum()
    }

    /// Draws an index with probability proportional to `d2`. Zero-weight
    /// points are never returned; `None` when all weights are zero.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let total = self.total_weight();
        if !(total > 0.0) {
            return None;
        }
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut last_positive = None;
        for (i, &w) in self.d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last_positive = Some(i);
            if acc > target {
                return Some(i);
            }
        }
        // rounding left the running sum just short of the target
        last_positive
    }
}

fn distinct_count(points: &[Position]) -> usize {
    let mut keys: Vec<(u64, u64)> = points
        .iter()
        .map(|p| ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// k-means++ seeding: one uniform center, then each further center drawn with
/// probability proportional to its squared distance from the nearest center
/// chosen so far.
pub fn seed_centers<R: Rng + ?Sized>(
    points: &[Position],
    k: usize,
    rng: &mut R,
) -> Result<Vec<Position>, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if points.is_empty() {
        return Err(ClusterError::NoPoints);
    }
    let first = points[rng.gen_range(0..points.len())];
    let mut state = SeedingState::new(points, first);
    while state.chosen.len() < k {
        let Some(i) = state.sample(rng) else {
            return Err(ClusterError::TooFewDistinctPoints {
                k,
                found: distinct_count(points),
            });
        };
        state.add(points, points[i]);
    }
    Ok(state.chosen)
}

/// Binds every point to its nearest mean; ties go to the lowest index.
pub fn assign_points(points: &[Position], means: &[Position]) -> Vec<usize> {
    assert!(!means.is_empty(), "assign_points needs at least one mean");
    points
        .iter()
        .map(|&p| {
            let mut best = 0;
            let mut best_d = distance_sq(p, means[0]);
            for (i, &m) in means.iter().enumerate().skip(1) {
                let d = distance_sq(p, m);
                if d < best_d {
                    best = i;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Recomputes each cluster's centroid.
///
/// An empty cluster is moved onto the point lying farthest from its own
/// (freshly computed) mean, so the partition always keeps `k` controllers.
/// A point is used for at most one empty cluster.
pub fn update_means(points: &[Position], assignment: &[usize], k: usize) -> Vec<Position> {
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
    for (p, &c) in points.iter().zip(assignment) {
        let s = &mut sums[c];
        s.0 += p.x;
        s.1 += p.y;
        s.2 += 1;
    }
    let mut means: Vec<Position> = sums
        .iter()
        .map(|&(sx, sy, n)| {
            if n == 0 {
                Position::default()
            } else {
                Position::new(sx / n as f64, sy / n as f64)
            }
        })
        .collect();

    let empty: Vec<usize> = (0..k).filter(|&c| sums[c].2 == 0).collect();
    if !empty.is_empty() && !points.is_empty() {
        let mut order: Vec<(f64, usize)> = points
            .iter()
            .zip(assignment)
            .enumerate()
            .map(|(i, (&p, &c))| (distance_sq(p, means[c]), i))
            .collect();
        // farthest first, lowest index among equals
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (c, (_, i)) in empty.into_iter().zip(order) {
            means[c] = points[i];
        }
    }
    means
}

/// Within-cluster sum of squared distances.
pub fn objective(points: &[Position], assignment: &[usize], means: &[Position]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(&p, &c)| distance_sq(p, means[c]))
        .sum()
}

fn max_coordinate_shift(a: &[Position], b: &[Position]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p.x - q.x).abs().max((p.y - q.y).abs()))
        .fold(0.0, f64::max)
}

/// Lloyd iteration from explicit starting means. Stops once no mean
/// coordinate moves by more than `tol`, or after `max_iter` iterations.
pub fn lloyd(points: &[Position], initial: Vec<Position>, max_iter: usize, tol: f64) -> Clustering {
    let k = initial.len();
    let mut means = initial;
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        let assignment = assign_points(points, &means);
        let next = update_means(points, &assignment, k);
        trace.push(objective(points, &assignment, &next));
        iterations += 1;
        let shift = max_coordinate_shift(&means, &next);
        means = next;
        if shift <= tol {
            break;
        }
    }
    let assignment = assign_points(points, &means);
    let obj = objective(points, &assignment, &means);
    trace.push(obj);
    Clustering {
        k,
        assignment,
        means,
        objective: obj,
        iterations,
        objective_trace: trace,
    }
}

/// k-means++ seeding followed by Lloyd iteration.
pub fn kmeanspp<R: Rng + ?Sized>(
    points: &[Position],
    k: usize,
    rng: &mut R,
    max_iter: usize,
    tol: f64,
) -> Result<Clustering, ClusterError> {
    let seeds = seed_centers(points, k, rng)?;
    Ok(lloyd(points, seeds, max_iter, tol))
}
