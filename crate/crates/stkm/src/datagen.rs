//! Synthetic moving-cluster scenarios with exact ground truth.
//!
//! Cluster start positions sit on a circle of radius 10 (evenly spaced on a
//! line for 1-D data), so with up to six clusters the pairwise separation is
//! at least the radius and the spread/separation ratio is controlled purely
//! through `spread_sigma`. Members are the cluster center plus isotropic
//! Gaussian noise, drawn independently at every step; outliers are uniform
//! in a box at every step and carry the UNASSIGNED sentinel in the ground
//! truth.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{CenterTensor, Partition, TrajectoryTensor, UNASSIGNED};

const LAYOUT_RADIUS: f64 = 10.0;

/// How the cluster centers move over time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CenterMotion {
    /// Constant-velocity outward drift away from the layout center, so
    /// separations never shrink.
    Linear,
    /// Independent Gaussian steps per cluster.
    RandomWalk { step_sigma: f64 },
    /// Cluster 0 travels to cluster 1's position, the two tracks coincide
    /// exactly on `[meet_time, part_time)`, then cluster 0 returns home.
    /// Remaining clusters stay put.
    MergeSplit { meet_time: usize, part_time: usize },
}

/// Configuration for [`generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n_clusters: usize,
    /// Member count per cluster; length must equal `n_clusters`.
    pub points_per_cluster: Vec<usize>,
    /// Number of time steps `T`.
    pub n_steps: usize,
    /// Spatial dimension `m`.
    pub dim: usize,
    pub center_motion: CenterMotion,
    /// Within-cluster standard deviation per coordinate.
    pub spread_sigma: f64,
    /// Fraction of all generated points that are outliers, in `[0, 1)`.
    pub outlier_fraction: f64,
    /// Per-coordinate bounds `(lo, hi)` of the outlier box.
    pub outlier_box: (f64, f64),
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_clusters: 3,
            points_per_cluster: vec![20, 20, 20],
            n_steps: 30,
            dim: 2,
            center_motion: CenterMotion::Linear,
            spread_sigma: 0.5,
            outlier_fraction: 0.0,
            outlier_box: (-15.0, 15.0),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters < 1 {
            return Err(Error::InvalidConfig("need at least one cluster".to_string()));
        }
        if self.points_per_cluster.len() != self.n_clusters {
            return Err(Error::InvalidConfig(format!(
                "points_per_cluster has {} entries for {} clusters",
                self.points_per_cluster.len(),
                self.n_clusters
            )));
        }
        if self.points_per_cluster.iter().any(|&p| p == 0) {
            return Err(Error::InvalidConfig(
                "every cluster needs at least one point".to_string(),
            ));
        }
        if self.n_steps < 2 {
            return Err(Error::InvalidConfig("need at least 2 time steps".to_string()));
        }
        if self.dim < 1 {
            return Err(Error::InvalidConfig("dim must be >= 1".to_string()));
        }
        if !(self.spread_sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "spread_sigma must be positive, got {}",
                self.spread_sigma
            )));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidConfig(format!(
                "outlier_fraction must lie in [0, 1), got {}",
                self.outlier_fraction
            )));
        }
        if self.outlier_fraction > 0.0 && !(self.outlier_box.0 < self.outlier_box.1) {
            return Err(Error::InvalidConfig(
                "outlier_box must have lo < hi".to_string(),
            ));
        }
        match self.center_motion {
            CenterMotion::RandomWalk { step_sigma } => {
                if !(step_sigma >= 0.0) {
                    return Err(Error::InvalidConfig(
                        "step_sigma must be non-negative".to_string(),
                    ));
                }
            }
            CenterMotion::MergeSplit {
                meet_time,
                part_time,
            } => {
                if self.n_clusters < 2 {
                    return Err(Error::InvalidConfig(
                        "merge_split needs at least two clusters".to_string(),
                    ));
                }
                if meet_time < 1 || meet_time >= part_time || part_time >= self.n_steps {
                    return Err(Error::InvalidConfig(format!(
                        "need 1 <= meet_time < part_time < n_steps, got {meet_time}, {part_time}, {}",
                        self.n_steps
                    )));
                }
            }
            CenterMotion::Linear => {}
        }
        Ok(())
    }
}

/// A generated scenario: trajectories, static ground truth (outliers carry
/// the UNASSIGNED sentinel), and the noiseless center tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScenario {
    pub trajectories: TrajectoryTensor,
    pub ground_truth: Partition,
    pub true_centers: CenterTensor,
}

fn start_positions(n_clusters: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n_clusters)
        .map(|c| {
            let mut pos = vec![0.0; dim];
            if dim == 1 {
                pos[0] = 2.0 * LAYOUT_RADIUS * c as f64
                    - LAYOUT_RADIUS * (n_clusters - 1) as f64;
            } else {
                let angle = 2.0 * std::f64::consts::PI * c as f64 / n_clusters as f64;
                pos[0] = LAYOUT_RADIUS * angle.cos();
                pos[1] = LAYOUT_RADIUS * angle.sin();
            }
            pos
        })
        .collect()
}

/// Constant outward drift speed for linear motion, per step.
const LINEAR_SPEED: f64 = 0.2;

fn center_tracks(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<Vec<f64>>> {
    let starts = start_positions(config.n_clusters, config.dim);
    let t_len = config.n_steps;
    let dim = config.dim;
    match config.center_motion {
        CenterMotion::Linear => starts
            .iter()
            .map(|s| {
                let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
                let dir: Vec<f64> = if norm > 0.0 {
                    s.iter().map(|v| v / norm).collect()
                } else {
                    vec![0.0; dim]
                };
                (0..t_len)
                    .map(|t| {
                        (0..dim)
                            .map(|d| s[d] + LINEAR_SPEED * t as f64 * dir[d])
                            .collect()
                    })
                    .collect()
            })
            .collect(),
        CenterMotion::RandomWalk { step_sigma } => starts
            .iter()
            .map(|s| {
                let mut track = Vec::with_capacity(t_len);
                let mut pos = s.clone();
                track.push(pos.clone());
                for _ in 1..t_len {
                    for p in pos.iter_mut() {
                        let z: f64 = StandardNormal.sample(rng);
                        *p += step_sigma * z;
                    }
                    track.push(pos.clone());
                }
                track
            })
            .collect(),
        CenterMotion::MergeSplit {
            meet_time,
            part_time,
        } => {
            let waypoint = starts[1].clone();
            (0..config.n_clusters)
                .map(|c| {
                    (0..t_len)
                        .map(|t| {
                            if c != 0 {
                                return starts[c].clone();
                            }
                            if t < meet_time {
                                let frac = t as f64 / meet_time as f64;
                                (0..dim)
                                    .map(|d| starts[0][d] + (waypoint[d] - starts[0][d]) * frac)
                                    .collect()
                            } else if t < part_time {
                                waypoint.clone()
                            } else {
                                let frac =
                                    (t - part_time + 1) as f64 / (t_len - part_time) as f64;
                                (0..dim)
                                    .map(|d| waypoint[d] + (starts[0][d] - waypoint[d]) * frac)
                                    .collect()
                            }
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// Number of outliers such that `n_out = round(fraction * N_total)` with
/// `N_total = base + n_out` (fixed-point of the rounding equation).
fn outlier_count(base: usize, fraction: f64) -> usize {
    if fraction <= 0.0 {
        return 0;
    }
    let mut n_out = 0usize;
    for _ in 0..32 {
        let next = (fraction * (base + n_out) as f64).round() as usize;
        if next == n_out {
            break;
        }
        n_out = next;
    }
    n_out
}

/// Generate a scenario: each cluster's members are its center track plus
/// isotropic noise with static membership; outliers are uniform in the box
/// at every step.
pub fn generate(config: &ScenarioConfig) -> Result<GeneratedScenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tracks = center_tracks(config, &mut rng);

    let base: usize = config.points_per_cluster.iter().sum();
    let n_out = outlier_count(base, config.outlier_fraction);
    let n = base + n_out;
    let (t_len, dim) = (config.n_steps, config.dim);

    let mut data = Array3::zeros((t_len, dim, n));
    let mut labels = Vec::with_capacity(n);
    let mut point = 0usize;
    for (c, &count) in config.points_per_cluster.iter().enumerate() {
        for _ in 0..count {
            for t in 0..t_len {
                for d in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    data[[t, d, point]] = tracks[c][t][d] + config.spread_sigma * z;
                }
            }
            labels.push(c as i64);
            point += 1;
        }
    }
    let (lo, hi) = config.outlier_box;
    for _ in 0..n_out {
        for t in 0..t_len {
            for d in 0..dim {
                data[[t, d, point]] = rng.random_range(lo..hi);
            }
        }
        labels.push(UNASSIGNED);
        point += 1;
    }

    let mut centers = Array3::zeros((t_len, dim, config.n_clusters));
    for (c, track) in tracks.iter().enumerate() {
        for t in 0..t_len {
            for d in 0..dim {
                centers[[t, d, c]] = track[t][d];
            }
        }
    }

    let ids = (0..n).map(|i| i.to_string()).collect();
    let timestamps = (0..t_len).map(|t| t as f64).collect();
    Ok(GeneratedScenario {
        trajectories: TrajectoryTensor::new(data, ids, timestamps)?,
        ground_truth: Partition::new(labels)?,
        true_centers: CenterTensor::new(centers)?,
    })
}
