//! Phase 2: derive a single static partition from per-time-step assignment
//! histories.
//!
//! Points that spend their time in the same clusters travel together in the
//! long run. The pairwise similarity of two histories is the fraction of
//! time steps on which they agree; a threshold `theta` turns the similarity
//! matrix into groups, and because the greedy grouping is order dependent,
//! the rows are shuffled and the procedure repeated until a majority of
//! runs agree on one partition.

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{AssignmentHistory, CenterTensor, Partition, TrajectoryTensor, WeightTensor};

/// Pairwise assignment-history similarities: symmetric `N x N`, unit
/// diagonal, entries multiples of `1/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    data: Array2<f64>,
    n_steps: usize,
}

impl SimilarityMatrix {
    pub fn n_points(&self) -> usize {
        self.data.dim().0
    }

    /// Number of time steps the similarities were computed over.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[[i, j]]
    }
}

/// Configuration for the Phase-2 majority-vote clustering.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Phase2Config {
    /// Desired number of long-term clusters.
    pub k_target: usize,
    /// Grid step for the theta search (refined to at most `1/(2T)` at run
    /// time, since similarities are multiples of `1/T`).
    pub theta_grid_step: f64,
    /// Number of shuffled runs before the first majority check.
    pub votes_first_round: usize,
    /// Maximum number of shuffled runs.
    pub votes_max: usize,
    /// RNG seed for the shuffles.
    pub seed: u64,
}

impl Default for Phase2Config {
    fn default() -> Self {
        Self {
            k_target: 2,
            theta_grid_step: 0.01,
            votes_first_round: 5,
            votes_max: 20,
            seed: 0,
        }
    }
}

impl Phase2Config {
    pub fn new(k_target: usize) -> Self {
        Self {
            k_target,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_target < 1 {
            return Err(Error::InvalidConfig("k_target must be >= 1".to_string()));
        }
        if !(self.theta_grid_step > 0.0 && self.theta_grid_step <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "theta_grid_step must lie in (0, 1], got {}",
                self.theta_grid_step
            )));
        }
        if self.votes_first_round < 1 || self.votes_first_round > self.votes_max {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= votes_first_round <= votes_max, got {} and {}",
                self.votes_first_round, self.votes_max
            )));
        }
        Ok(())
    }
}

/// Result of the Phase-2 vote: the winning partition, the theta of the first
/// run that produced it, and the number of runs executed.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Result {
    pub partition: Partition,
    pub theta: f64,
    pub runs: usize,
}

// ── operations ───────────────────────────────────────────────────────────────

/// Hard labels from soft memberships: `a_{t,i} = argmax_j w_{t,j,i}`, ties
/// broken toward the smallest cluster index.
pub fn extract_assignments(w: &WeightTensor) -> AssignmentHistory {
    let (t_len, k, n) = w.data().dim();
    let mut labels = Array2::zeros((t_len, n));
    for t in 0..t_len {
        for i in 0..n {
            let mut best = 0usize;
            let mut best_w = w.data()[[t, 0, i]];
            for j in 1..k {
                let v = w.data()[[t, j, i]];
                if v > best_w {
                    best_w = v;
                    best = j;
                }
            }
            labels[[t, i]] = best;
        }
    }
    AssignmentHistory::new(labels, k).expect("labels constructed in range")
}

/// Fraction of time steps on which two assignment histories agree.
pub fn similarity(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let agree = a.iter().zip(b.iter()).filter(|(x, y)| x == y).count();
    Ok(agree as f64 / a.len() as f64)
}

fn column_similarity(a: ArrayView1<usize>, b: ArrayView1<usize>) -> f64 {
    let agree = a.iter().zip(b.iter()).filter(|(x, y)| x == y).count();
    agree as f64 / a.len() as f64
}

/// Pairwise similarities of all assignment histories.
pub fn similarity_matrix(assignments: &AssignmentHistory) -> SimilarityMatrix {
    let n = assignments.n_points();
    let labels = assignments.labels();
    let mut data = Array2::zeros((n, n));
    for i in 0..n {
        data[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let s = column_similarity(labels.column(i), labels.column(j));
            data[[i, j]] = s;
            data[[j, i]] = s;
        }
    }
    SimilarityMatrix {
        data,
        n_steps: assignments.n_steps(),
    }
}

/// Greedy seed-based grouping: scanning points in `order`, a point joins the
/// first existing group whose seed point is at least `theta`-similar to it,
/// and seeds a new group otherwise. Output labels follow seed-creation
/// order.
pub fn cluster_at_theta(a: &SimilarityMatrix, theta: f64, order: &[usize]) -> Partition {
    let n = a.n_points();
    debug_assert_eq!(order.len(), n);
    let mut labels = vec![0i64; n];
    let mut seeds: Vec<usize> = Vec::new();
    for &p in order {
        let joined = seeds.iter().position(|&s| a.get(s, p) >= theta);
        match joined {
            Some(g) => labels[p] = g as i64,
            None => {
                labels[p] = seeds.len() as i64;
                seeds.push(p);
            }
        }
    }
    Partition::new(labels).expect("labels constructed non-negative")
}

/// Scan theta over a uniform grid covering `[0, 1]` and return the smallest
/// theta whose grouping has exactly `k_target` clusters, or failing that the
/// theta whose cluster count is closest (ties toward smaller theta).
pub fn search_theta(
    a: &SimilarityMatrix,
    k_target: usize,
    order: &[usize],
    grid_step: f64,
) -> (f64, Partition) {
    // Similarities are multiples of 1/T, so a grid finer than 1/(2T) cannot
    // miss a distinct grouping.
    let step = grid_step.min(1.0 / (2.0 * a.n_steps() as f64));
    let mut best: Option<(usize, f64, Partition)> = None;
    let mut idx = 0usize;
    loop {
        let theta = (idx as f64 * step).min(1.0);
        let partition = cluster_at_theta(a, theta, order);
        let count = partition.n_clusters();
        if count == k_target {
            return (theta, partition);
        }
        let diff = count.abs_diff(k_target);
        if best.as_ref().is_none_or(|(d, _, _)| diff < *d) {
            best = Some((diff, theta, partition));
        }
        if theta >= 1.0 {
            break;
        }
        idx += 1;
    }
    let (_, theta, partition) = best.expect("grid is non-empty");
    (theta, partition)
}

/// Deterministic variant of [`long_term_clusters`] that takes the shuffle
/// orders explicitly, one per run. Runs execute in sequence; after
/// `votes_first_round` runs, the first canonical partition to hold a strict
/// majority of executed runs wins. If no majority emerges, the most
/// frequent partition wins, ties toward the earliest run.
pub fn long_term_clusters_with_orders(
    assignments: &AssignmentHistory,
    k_target: usize,
    grid_step: f64,
    votes_first_round: usize,
    orders: &[Vec<usize>],
) -> Result<Phase2Result> {
    let n = assignments.n_points();
    if k_target < 1 || k_target > n {
        return Err(Error::InvalidConfig(format!(
            "k_target must lie in 1..={n}, got {k_target}"
        )));
    }
    if orders.is_empty() {
        return Err(Error::InvalidConfig("no shuffle orders".to_string()));
    }
    let a = similarity_matrix(assignments);
    // (canonical partition, vote count, first run index, theta of first run)
    let mut votes: Vec<(Partition, usize, usize, f64)> = Vec::new();
    for (run, order) in orders.iter().enumerate() {
        let (theta, partition) = search_theta(&a, k_target, order, grid_step);
        let canonical = partition.canonical();
        match votes.iter_mut().find(|v| v.0 == canonical) {
            Some(v) => v.1 += 1,
            None => votes.push((canonical, 1, run, theta)),
        }
        let executed = run + 1;
        if executed >= votes_first_round {
            if let Some(win) = votes.iter().find(|v| 2 * v.1 > executed) {
                return Ok(Phase2Result {
                    partition: win.0.clone(),
                    theta: win.3,
                    runs: executed,
                });
            }
        }
    }
    let win = votes
        .iter()
        .max_by(|x, y| x.1.cmp(&y.1).then(y.2.cmp(&x.2)))
        .expect("at least one run executed");
    Ok(Phase2Result {
        partition: win.0.clone(),
        theta: win.3,
        runs: orders.len(),
    })
}

/// Derive the long-term partition: search theta under shuffled point orders
/// and return the majority partition. Starts with `votes_first_round`
/// shuffles and continues up to `votes_max` until one canonical partition
/// holds a strict majority; if none ever does, the most frequent partition
/// wins (ties toward the earliest run). Deterministic given the seed.
pub fn long_term_clusters(
    assignments: &AssignmentHistory,
    config: &Phase2Config,
) -> Result<Phase2Result> {
    config.validate()?;
    let n = assignments.n_points();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let orders: Vec<Vec<usize>> = (0..config.votes_max)
        .map(|_| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order
        })
        .collect();
    long_term_clusters_with_orders(
        assignments,
        config.k_target,
        config.theta_grid_step,
        config.votes_first_round,
        &orders,
    )
}

/// Mean position of each long-term cluster's members at each time step:
/// static membership, moving center.
pub fn long_term_center_paths(
    x: &TrajectoryTensor,
    partition: &Partition,
) -> Result<CenterTensor> {
    if partition.len() != x.n_points() {
        return Err(Error::ShapeMismatch(format!(
            "partition covers {} points, trajectories have {}",
            partition.len(),
            x.n_points()
        )));
    }
    let k = partition
        .labels()
        .iter()
        .filter(|&&l| l != crate::types::UNASSIGNED)
        .map(|&l| l as usize + 1)
        .max()
        .ok_or(Error::EmptyCluster { label: 0 })?;
    let mut counts = vec![0usize; k];
    for &l in partition.labels() {
        if l != crate::types::UNASSIGNED {
            counts[l as usize] += 1;
        }
    }
    if let Some(label) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyCluster { label });
    }
    let (t_len, m, n) = x.data().dim();
    let mut out = ndarray::Array3::zeros((t_len, m, k));
    for t in 0..t_len {
        for i in 0..n {
            let l = partition.labels()[i];
            if l == crate::types::UNASSIGNED {
                continue;
            }
            for d in 0..m {
                out[[t, d, l as usize]] += x.data()[[t, d, i]];
            }
        }
        for j in 0..k {
            for d in 0..m {
                out[[t, d, j]] /= counts[j] as f64;
            }
        }
    }
    CenterTensor::new(out)
}
