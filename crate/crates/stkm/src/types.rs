//! Core domain types: trajectory, center, and weight tensors, assignment
//! histories, partitions, and solver configuration.
//!
//! All types validate their invariants on construction and are immutable
//! afterwards, so they can be shared freely across threads.

use ndarray::{s, Array2, Array3, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel label for points that belong to no cluster (ground-truth noise).
pub const UNASSIGNED: i64 = -1;

/// Maximum deviation of a membership column sum from 1 accepted by
/// [`WeightTensor`] construction.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// One observation of a moving object: identifier, position, time.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub id: String,
    pub position: Vec<f64>,
    pub time: f64,
}

impl RawRecord {
    pub fn new(id: impl Into<String>, position: Vec<f64>, time: f64) -> Self {
        Self {
            id: id.into(),
            position,
            time,
        }
    }
}

// ── TrajectoryTensor ──────────────────────────────────────────────────────────

/// Dense positions of `N` objects in `m` spatial dimensions over `T` time
/// steps, stored as a `T × m × N` tensor.
///
/// Every object has a position at every time step; gaps must be filled
/// upstream (see the `io` module's interval binning).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTensor {
    data: Array3<f64>,
    point_ids: Vec<String>,
    timestamps: Vec<f64>,
}

impl TrajectoryTensor {
    /// Build a tensor, checking shape consistency, finiteness, id uniqueness,
    /// and strictly increasing timestamps. Requires `T >= 2`, `m >= 1`,
    /// `N >= 1`.
    pub fn new(data: Array3<f64>, point_ids: Vec<String>, timestamps: Vec<f64>) -> Result<Self> {
        let (t_len, m, n) = data.dim();
        if t_len < 2 {
            return Err(Error::InvalidTensor(format!(
                "need at least 2 time steps, got {t_len}"
            )));
        }
        if m < 1 || n < 1 {
            return Err(Error::InvalidTensor(format!(
                "need m >= 1 and N >= 1, got m = {m}, N = {n}"
            )));
        }
        if point_ids.len() != n {
            return Err(Error::InvalidTensor(format!(
                "{} point ids for {n} points",
                point_ids.len()
            )));
        }
        if timestamps.len() != t_len {
            return Err(Error::InvalidTensor(format!(
                "{} timestamps for {t_len} time steps",
                timestamps.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidTensor(
                "positions must all be finite".to_string(),
            ));
        }
        for w in timestamps.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidTensor(format!(
                    "timestamps must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for id in &point_ids {
            if !seen.insert(id) {
                return Err(Error::InvalidTensor(format!("duplicate point id `{id}`")));
            }
        }
        Ok(Self {
            data,
            point_ids,
            timestamps,
        })
    }

    /// Number of time steps `T`.
    pub fn n_steps(&self) -> usize {
        self.data.dim().0
    }

    /// Spatial dimension `m`.
    pub fn dim(&self) -> usize {
        self.data.dim().1
    }

    /// Number of objects `N`.
    pub fn n_points(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn point_ids(&self) -> &[String] {
        &self.point_ids
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    /// Position of object `i` at time index `t` (length-`m` view).
    pub fn position(&self, t: usize, i: usize) -> ArrayView1<'_, f64> {
        self.data.slice(s![t, .., i])
    }

    /// Flatten back to one observation record per `(t, i)` cell.
    pub fn to_records(&self) -> Vec<RawRecord> {
        let (t_len, m, n) = self.data.dim();
        let mut records = Vec::with_capacity(t_len * n);
        for t in 0..t_len {
            for i in 0..n {
                let position = (0..m).map(|d| self.data[[t, d, i]]).collect();
                records.push(RawRecord::new(
                    self.point_ids[i].clone(),
                    position,
                    self.timestamps[t],
                ));
            }
        }
        records
    }
}

/// Assemble raw observation records into a dense [`TrajectoryTensor`].
///
/// Succeeds only if every `(id, time)` cell is observed exactly once;
/// otherwise the error lists the missing and duplicate cells so the caller
/// can decide whether to re-bin the data (`io::load_trajectories` with an
/// interval does exactly that).
pub fn validate(records: &[RawRecord]) -> Result<TrajectoryTensor> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let m = records[0].position.len();
    for r in records {
        if r.position.len() != m {
            return Err(Error::InconsistentDimension {
                expected: m,
                actual: r.position.len(),
                context: format!("record for id `{}` at t = {}", r.id, r.time),
            });
        }
        if !r.time.is_finite() || r.position.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoordinate {
                id: r.id.clone(),
                time: r.time,
            });
        }
    }

    // Point order follows first appearance; time axis is sorted.
    let mut point_ids: Vec<String> = Vec::new();
    let mut id_index = std::collections::HashMap::new();
    for r in records {
        if !id_index.contains_key(&r.id) {
            id_index.insert(r.id.clone(), point_ids.len());
            point_ids.push(r.id.clone());
        }
    }
    let mut timestamps: Vec<f64> = records.iter().map(|r| normalize_zero(r.time)).collect();
    timestamps.sort_by(f64::total_cmp);
    timestamps.dedup();

    let t_len = timestamps.len();
    let n = point_ids.len();
    let mut data = Array3::zeros((t_len, m, n));
    let mut filled = Array2::from_elem((t_len, n), false);
    let mut duplicates: Vec<(String, f64)> = Vec::new();
    for r in records {
        let i = id_index[&r.id];
        let time = normalize_zero(r.time);
        let t = timestamps
            .binary_search_by(|probe| probe.total_cmp(&time))
            .expect("timestamp collected above");
        if filled[[t, i]] {
            duplicates.push((r.id.clone(), time));
        } else {
            filled[[t, i]] = true;
            for d in 0..m {
                data[[t, d, i]] = r.position[d];
            }
        }
    }
    let mut missing: Vec<(String, f64)> = Vec::new();
    for t in 0..t_len {
        for i in 0..n {
            if !filled[[t, i]] {
                missing.push((point_ids[i].clone(), timestamps[t]));
            }
        }
    }
    if !missing.is_empty() || !duplicates.is_empty() {
        return Err(Error::IncompleteGrid {
            missing,
            duplicates,
        });
    }

    TrajectoryTensor::new(data, point_ids, timestamps)
}

fn normalize_zero(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t
    }
}

// ── CenterTensor ─────────────────────────────────────────────────────────────

/// Cluster center paths: a `T × m × k` tensor, one length-`T` path per
/// cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterTensor {
    data: Array3<f64>,
}

impl CenterTensor {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (t_len, m, k) = data.dim();
        if t_len < 1 || m < 1 || k < 1 {
            return Err(Error::InvalidTensor(format!(
                "center tensor must be non-empty, got {t_len} x {m} x {k}"
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidTensor(
                "centers must all be finite".to_string(),
            ));
        }
        Ok(Self { data })
    }

    pub fn n_steps(&self) -> usize {
        self.data.dim().0
    }

    pub fn dim(&self) -> usize {
        self.data.dim().1
    }

    /// Number of clusters `k`.
    pub fn k(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    /// Center of cluster `j` at time index `t` (length-`m` view).
    pub fn center(&self, t: usize, j: usize) -> ArrayView1<'_, f64> {
        self.data.slice(s![t, .., j])
    }
}

// ── WeightTensor ─────────────────────────────────────────────────────────────

/// Soft memberships: a `T × k × N` tensor whose column `(t, ·, i)` is the
/// membership distribution of point `i` at time `t` over the `k` clusters.
///
/// Every column must lie on the probability simplex: entries in `[0, 1]`
/// and summing to 1 within [`WEIGHT_SUM_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    data: Array3<f64>,
}

impl WeightTensor {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (t_len, k, n) = data.dim();
        if t_len < 1 || k < 1 || n < 1 {
            return Err(Error::InvalidWeights(format!(
                "weight tensor must be non-empty, got {t_len} x {k} x {n}"
            )));
        }
        for (idx, &v) in data.indexed_iter() {
            if !v.is_finite() || v < 0.0 || v > 1.0 + WEIGHT_SUM_TOL {
                return Err(Error::InvalidWeights(format!(
                    "entry {v} at {idx:?} outside [0, 1]"
                )));
            }
        }
        for t in 0..t_len {
            for i in 0..n {
                let sum: f64 = (0..k).map(|j| data[[t, j, i]]).sum();
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::InvalidWeights(format!(
                        "column (t = {t}, i = {i}) sums to {sum}"
                    )));
                }
            }
        }
        Ok(Self { data })
    }

    /// Uniform memberships `1/k` everywhere.
    pub fn uniform(t_len: usize, k: usize, n: usize) -> Result<Self> {
        Self::new(Array3::from_elem((t_len, k, n), 1.0 / k as f64))
    }

    pub fn n_steps(&self) -> usize {
        self.data.dim().0
    }

    pub fn k(&self) -> usize {
        self.data.dim().1
    }

    pub fn n_points(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    /// Membership column of point `i` at time `t` (length-`k` view).
    pub fn column(&self, t: usize, i: usize) -> ArrayView1<'_, f64> {
        self.data.slice(s![t, .., i])
    }
}

// ── AssignmentHistory ────────────────────────────────────────────────────────

/// Hard cluster label for every point at every time step: a `T × N` matrix
/// with entries in `{0, .., k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentHistory {
    labels: Array2<usize>,
    k: usize,
}

impl AssignmentHistory {
    pub fn new(labels: Array2<usize>, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidTensor("k must be >= 1".to_string()));
        }
        let (t_len, n) = labels.dim();
        if t_len < 1 || n < 1 {
            return Err(Error::InvalidTensor(
                "assignment history must be non-empty".to_string(),
            ));
        }
        if let Some((idx, &l)) = labels.indexed_iter().find(|(_, &l)| l >= k) {
            return Err(Error::InvalidTensor(format!(
                "label {l} at {idx:?} outside 0..{k}"
            )));
        }
        Ok(Self { labels, k })
    }

    pub fn n_steps(&self) -> usize {
        self.labels.dim().0
    }

    pub fn n_points(&self) -> usize {
        self.labels.dim().1
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &Array2<usize> {
        &self.labels
    }

    /// Assignment history of point `i`: its label at each time step.
    pub fn history(&self, i: usize) -> Vec<usize> {
        self.labels.column(i).to_vec()
    }
}

// ── Partition ────────────────────────────────────────────────────────────────

/// A single static labeling of `N` points. Labels are non-negative cluster
/// indices; [`UNASSIGNED`] marks noise points that belong to no cluster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<i64>,
}

impl Partition {
    pub fn new(labels: Vec<i64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidPartition("no points".to_string()));
        }
        if let Some(&l) = labels.iter().find(|&&l| l < UNASSIGNED) {
            return Err(Error::InvalidPartition(format!(
                "label {l} is negative but not the UNASSIGNED sentinel"
            )));
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Number of distinct non-sentinel clusters.
    pub fn n_clusters(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        self.labels
            .iter()
            .filter(|&&l| l != UNASSIGNED && seen.insert(l))
            .count()
    }

    /// Relabel clusters by smallest member index, so that equal groupings
    /// compare equal regardless of the label values used. Sentinels are
    /// preserved.
    pub fn canonical(&self) -> Partition {
        let mut mapping: std::collections::HashMap<i64, i64> = std::collections::HashMap::new();
        let mut next = 0i64;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if l == UNASSIGNED {
                    UNASSIGNED
                } else {
                    *mapping.entry(l).or_insert_with(|| {
                        let v = next;
                        next += 1;
                        v
                    })
                }
            })
            .collect();
        Partition { labels }
    }
}

// ── SolverConfig ─────────────────────────────────────────────────────────────

/// Distance between a point and a cluster center used by the weight update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distance {
    /// Plain squared Euclidean distance.
    SquaredEuclidean,
    /// `ln(c_const + ||x - c||^2)`, which caps the influence of far-away
    /// points. Requires `c_const >= 1`.
    RobustLog { c_const: f64 },
}

impl Distance {
    pub fn is_robust(&self) -> bool {
        matches!(self, Distance::RobustLog { .. })
    }
}

/// Configuration for the Phase-1 solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Number of clusters.
    pub k: usize,
    /// Temporal coupling strength in `[0, 1]`; larger values hold each
    /// center path closer to its own future.
    pub lambda: f64,
    /// Proximal step denominator; must exceed 1.0 for the weight updates to
    /// converge.
    pub d_k: f64,
    /// Maximum number of outer sweeps.
    pub max_iter: usize,
    /// Stop when the relative objective change per sweep falls below this.
    pub tol: f64,
    /// RNG seed for the initialization.
    pub seed: u64,
    /// Point-to-center distance used by the weight update.
    pub distance: Distance,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: 2,
            lambda: 0.8,
            d_k: 1.1,
            max_iter: 200,
            tol: 1e-6,
            seed: 0,
            distance: Distance::SquaredEuclidean,
        }
    }
}

impl SolverConfig {
    /// Default configuration for `k` clusters.
    pub fn new(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be >= 1".to_string()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if !(self.d_k > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "d_k must exceed 1.0, got {}",
                self.d_k
            )));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".to_string()));
        }
        if !self.tol.is_finite() || self.tol < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tol must be finite and >= 0, got {}",
                self.tol
            )));
        }
        if let Distance::RobustLog { c_const } = self.distance {
            if !(c_const >= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "c_const must be >= 1, got {c_const}"
                )));
            }
        }
        Ok(())
    }
}
