//! Phase 1: fit dynamic cluster centers and soft memberships by alternating
//! minimization of a clustering objective that is unified over space and
//! time.
//!
//! The objective couples the usual weighted point-to-center distances with a
//! temporal penalty `N * lambda * ||c_{t,j} - c_{t+1,j}||^2` that holds each
//! center path together across consecutive time steps, so clusters keep
//! their identity while they move. Weights are updated by a proximally
//! damped step projected back onto the probability simplex; centers are
//! updated in a backward Gauss-Seidel sweep so each step sees the freshly
//! updated successor.

use ndarray::{s, Array3, ArrayView1, ArrayView3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{CenterTensor, Distance, SolverConfig, TrajectoryTensor, WeightTensor};

/// Total cluster mass below which a center update is considered degenerate
/// and the center is re-seeded (only reachable when `lambda == 0`).
const DEGENERATE_EPS: f64 = 1e-12;

/// Output of [`fit`] / [`fit_robust`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Fitted center paths, `T x m x k`.
    pub centers: CenterTensor,
    /// Fitted soft memberships, `T x k x N`.
    pub weights: WeightTensor,
    /// Objective value at initialization followed by one value per completed
    /// sweep. Non-increasing within tolerance.
    pub objective_trace: Vec<f64>,
    /// Number of sweeps performed.
    pub iterations: usize,
    /// Whether the relative objective change dropped below `tol`.
    pub converged: bool,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn point_dist(distance: Distance, x: ArrayView1<f64>, c: ArrayView1<f64>) -> f64 {
    match distance {
        Distance::SquaredEuclidean => sq_dist(x, c),
        Distance::RobustLog { c_const } => (c_const + sq_dist(x, c)).ln(),
    }
}

fn ensure_shapes(x: &TrajectoryTensor, c: &CenterTensor, w: &WeightTensor) -> Result<()> {
    let (t_len, m, n) = x.data().dim();
    if c.n_steps() != t_len || c.dim() != m {
        return Err(Error::ShapeMismatch(format!(
            "centers are {} x {} x {}, trajectories are {} x {} x {}",
            c.n_steps(),
            c.dim(),
            c.k(),
            t_len,
            m,
            n
        )));
    }
    if w.n_steps() != t_len || w.n_points() != n || w.k() != c.k() {
        return Err(Error::ShapeMismatch(format!(
            "weights are {} x {} x {}, expected {} x {} x {}",
            w.n_steps(),
            w.k(),
            w.n_points(),
            t_len,
            c.k(),
            n
        )));
    }
    Ok(())
}

// ── objective ────────────────────────────────────────────────────────────────

fn objective_raw(
    x: &ArrayView3<f64>,
    c: &ArrayView3<f64>,
    w: &ArrayView3<f64>,
    lambda: f64,
    distance: Distance,
) -> f64 {
    let (t_len, _, n) = x.dim();
    let k = c.dim().2;
    let mut fidelity = 0.0;
    for t in 0..t_len {
        for j in 0..k {
            let cv = c.slice(s![t, .., j]);
            for i in 0..n {
                let wi = w[[t, j, i]];
                if wi != 0.0 {
                    fidelity += wi * point_dist(distance, x.slice(s![t, .., i]), cv);
                }
            }
        }
    }
    // The temporal penalty sits inside the sum over points, so every
    // between-step displacement is counted N times.
    let mut penalty = 0.0;
    for t in 0..t_len.saturating_sub(1) {
        for j in 0..k {
            penalty += sq_dist(c.slice(s![t, .., j]), c.slice(s![t + 1, .., j]));
        }
    }
    fidelity + n as f64 * lambda * penalty
}

/// Value of the clustering objective: weighted squared distances plus the
/// temporal center-coupling penalty (summed for `t < T`; the last step has
/// no successor).
pub fn objective(
    x: &TrajectoryTensor,
    c: &CenterTensor,
    w: &WeightTensor,
    lambda: f64,
) -> Result<f64> {
    ensure_shapes(x, c, w)?;
    Ok(objective_raw(
        &x.data().view(),
        &c.data().view(),
        &w.data().view(),
        lambda,
        Distance::SquaredEuclidean,
    ))
}

/// Robust-distance variant of [`objective`]: the fidelity term uses
/// `ln(c_const + ||x - c||^2)` while the temporal penalty stays quadratic.
pub fn objective_robust(
    x: &TrajectoryTensor,
    c: &CenterTensor,
    w: &WeightTensor,
    lambda: f64,
    c_const: f64,
) -> Result<f64> {
    ensure_shapes(x, c, w)?;
    if !(c_const >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "c_const must be >= 1, got {c_const}"
        )));
    }
    Ok(objective_raw(
        &x.data().view(),
        &c.data().view(),
        &w.data().view(),
        lambda,
        Distance::RobustLog { c_const },
    ))
}

// ── center update ────────────────────────────────────────────────────────────

/// Re-seed every degenerate cluster at time `t` to the point farthest from
/// its best non-degenerate center.
fn repair_degenerate(
    x: &ArrayView3<f64>,
    out: &mut Array3<f64>,
    t: usize,
    degenerate: &[usize],
    alive: &mut Vec<usize>,
) {
    let (_, m, n) = x.dim();
    for &j in degenerate {
        let far = (0..n)
            .map(|i| {
                let xi = x.slice(s![t, .., i]);
                let d = alive
                    .iter()
                    .map(|&a| sq_dist(xi, out.slice(s![t, .., a])))
                    .fold(f64::INFINITY, f64::min);
                (i, d)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        for d in 0..m {
            out[[t, d, j]] = x[[t, d, far]];
        }
        alive.push(j);
    }
}

fn update_centers_raw(x: &ArrayView3<f64>, w: &ArrayView3<f64>, lambda: f64) -> Array3<f64> {
    let (t_len, m, n) = x.dim();
    let k = w.dim().1;
    let n_lambda = n as f64 * lambda;
    let mut out = Array3::zeros((t_len, m, k));
    let mut num = vec![0.0; m];
    for t in (0..t_len).rev() {
        let mut degenerate = Vec::new();
        let mut alive = Vec::new();
        for j in 0..k {
            num.iter_mut().for_each(|v| *v = 0.0);
            let mut mass = 0.0;
            for i in 0..n {
                let wi = w[[t, j, i]];
                if wi != 0.0 {
                    mass += wi;
                    for d in 0..m {
                        num[d] += wi * x[[t, d, i]];
                    }
                }
            }
            let last = t + 1 == t_len;
            let denom = if last { mass } else { mass + n_lambda };
            if denom < DEGENERATE_EPS {
                degenerate.push(j);
                continue;
            }
            for d in 0..m {
                let coupling = if last { 0.0 } else { n_lambda * out[[t + 1, d, j]] };
                out[[t, d, j]] = (num[d] + coupling) / denom;
            }
            alive.push(j);
        }
        if !degenerate.is_empty() {
            repair_degenerate(x, &mut out, t, &degenerate, &mut alive);
        }
    }
    out
}

/// One full center update: for each `t` from the last step down and each
/// cluster `j`,
///
/// ```text
/// c_{t,j} <- (sum_i w_{t,j,i} x_{t,i} + N*lambda*c_{t+1,j}) / (sum_i w_{t,j,i} + N*lambda)
/// ```
///
/// using the freshly updated successor; at the last step the coupling terms
/// are dropped, leaving the plain weighted centroid. A cluster with no mass
/// (possible only when `lambda == 0`) is re-seeded to the point farthest
/// from its best center at that step.
///
/// The update depends on the current centers only through their shape; the
/// sweep rebuilds every path from the weights alone.
pub fn update_centers(
    x: &TrajectoryTensor,
    c: &CenterTensor,
    w: &WeightTensor,
    lambda: f64,
) -> Result<CenterTensor> {
    ensure_shapes(x, c, w)?;
    CenterTensor::new(update_centers_raw(
        &x.data().view(),
        &w.data().view(),
        lambda,
    ))
}

/// One robust center update: a single damped gradient step per `(t, j)` on
/// the robust local objective, with step size `1 / L` where
/// `L = 2 * (sum_i w_{t,j,i}) / c_const + 2 * N * lambda` bounds the local
/// curvature.
fn update_centers_robust_raw(
    x: &ArrayView3<f64>,
    c_old: &ArrayView3<f64>,
    w: &ArrayView3<f64>,
    lambda: f64,
    c_const: f64,
) -> Array3<f64> {
    let (t_len, m, n) = x.dim();
    let k = w.dim().1;
    let n_lambda = n as f64 * lambda;
    let mut out = Array3::zeros((t_len, m, k));
    let mut grad = vec![0.0; m];
    for t in (0..t_len).rev() {
        let mut degenerate = Vec::new();
        let mut alive = Vec::new();
        for j in 0..k {
            grad.iter_mut().for_each(|v| *v = 0.0);
            let cv = c_old.slice(s![t, .., j]);
            let mut mass = 0.0;
            for i in 0..n {
                let wi = w[[t, j, i]];
                if wi != 0.0 {
                    mass += wi;
                    let scale = 2.0 * wi / (c_const + sq_dist(x.slice(s![t, .., i]), cv));
                    for d in 0..m {
                        grad[d] += scale * (cv[d] - x[[t, d, i]]);
                    }
                }
            }
            if t + 1 < t_len {
                for d in 0..m {
                    grad[d] += 2.0 * n_lambda * (cv[d] - out[[t + 1, d, j]]);
                }
            }
            let lipschitz = 2.0 * mass / c_const + 2.0 * n_lambda;
            if lipschitz < DEGENERATE_EPS {
                degenerate.push(j);
                continue;
            }
            for d in 0..m {
                out[[t, d, j]] = cv[d] - grad[d] / lipschitz;
            }
            alive.push(j);
        }
        if !degenerate.is_empty() {
            repair_degenerate(x, &mut out, t, &degenerate, &mut alive);
        }
    }
    out
}

// ── simplex projection ───────────────────────────────────────────────────────

/// Euclidean projection onto the probability simplex: the closest
/// non-negative vector summing to 1 (sort-based algorithm, `O(k log k)`).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let k = v.len();
    if k == 1 {
        return vec![1.0];
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut threshold = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            threshold = t;
        }
    }
    v.iter().map(|&vi| (vi - threshold).max(0.0)).collect()
}

// ── weight update ────────────────────────────────────────────────────────────

fn update_weights_raw(
    x: &ArrayView3<f64>,
    c: &ArrayView3<f64>,
    w: &ArrayView3<f64>,
    d_k: f64,
    distance: Distance,
) -> Array3<f64> {
    let (t_len, _, n) = x.dim();
    let k = c.dim().2;
    let mut out = Array3::zeros((t_len, k, n));
    let mut shifted = vec![0.0; k];
    for t in 0..t_len {
        for i in 0..n {
            let xi = x.slice(s![t, .., i]);
            for j in 0..k {
                let d = point_dist(distance, xi, c.slice(s![t, .., j]));
                shifted[j] = w[[t, j, i]] - d / d_k;
            }
            let projected = project_simplex(&shifted);
            for j in 0..k {
                out[[t, j, i]] = projected[j];
            }
        }
    }
    out
}

/// One full weight update: for each `(t, i)` the membership column takes a
/// proximally damped step against the distances to the current centers and
/// is projected back onto the simplex,
///
/// ```text
/// w_{t,:,i} <- proj( w_{t,:,i} - (1/d_k) * d(x_{t,i}, c_{t,:}) )
/// ```
pub fn update_weights(
    x: &TrajectoryTensor,
    c: &CenterTensor,
    w: &WeightTensor,
    d_k: f64,
    distance: Distance,
) -> Result<WeightTensor> {
    ensure_shapes(x, c, w)?;
    if !(d_k > 1.0) {
        return Err(Error::InvalidConfig(format!(
            "d_k must exceed 1.0, got {d_k}"
        )));
    }
    WeightTensor::new(update_weights_raw(
        &x.data().view(),
        &c.data().view(),
        &w.data().view(),
        d_k,
        distance,
    ))
}

// ── initialization ───────────────────────────────────────────────────────────

fn init_raw(x: &ArrayView3<f64>, k: usize, seed: u64) -> Result<(Array3<f64>, Array3<f64>)> {
    let (t_len, m, n) = x.dim();
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    if k < 1 {
        return Err(Error::InvalidConfig("k must be >= 1".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame0 = x.slice(s![0, .., ..]);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut is_chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    is_chosen[first] = true;
    let mut d2 = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let latest = *chosen.last().expect("at least one seed");
        let latest_pos = frame0.slice(s![.., latest]);
        let mut total = 0.0;
        for i in 0..n {
            let d = sq_dist(frame0.slice(s![.., i]), latest_pos);
            if d < d2[i] {
                d2[i] = d;
            }
            if !is_chosen[i] {
                total += d2[i];
            }
        }
        let pick = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = None;
            for i in 0..n {
                if is_chosen[i] {
                    continue;
                }
                cum += d2[i];
                if r < cum {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| {
                (0..n)
                    .rev()
                    .find(|&i| !is_chosen[i] && d2[i] > 0.0)
                    .or_else(|| (0..n).find(|&i| !is_chosen[i]))
                    .expect("k <= n leaves an unchosen point")
            })
        } else {
            // All remaining points coincide with a seed; fall back to a
            // uniform draw among them.
            let unchosen: Vec<usize> = (0..n).filter(|&i| !is_chosen[i]).collect();
            unchosen[rng.random_range(0..unchosen.len())]
        };
        chosen.push(pick);
        is_chosen[pick] = true;
    }

    let mut centers = Array3::zeros((t_len, m, k));
    for (j, &i) in chosen.iter().enumerate() {
        for t in 0..t_len {
            for d in 0..m {
                centers[[t, d, j]] = x[[0, d, i]];
            }
        }
    }
    let weights = Array3::from_elem((t_len, k, n), 1.0 / k as f64);
    Ok((centers, weights))
}

/// Seed the solver: k-means++ on the first frame, with the chosen seed
/// positions replicated across all time steps, and uniform memberships.
pub fn init(x: &TrajectoryTensor, k: usize, seed: u64) -> Result<(CenterTensor, WeightTensor)> {
    let (c, w) = init_raw(&x.data().view(), k, seed)?;
    Ok((CenterTensor::new(c)?, WeightTensor::new(w)?))
}

// ── fit ──────────────────────────────────────────────────────────────────────

fn relative_change(prev: f64, next: f64) -> f64 {
    (prev - next).abs() / prev.abs().max(1e-12)
}

fn run_fit(x: &TrajectoryTensor, config: &SolverConfig) -> Result<FitResult> {
    config.validate()?;
    let xv = x.data().view();
    let (mut centers, mut weights) = init_raw(&xv, config.k, config.seed)?;
    let lambda = config.lambda;
    let distance = config.distance;

    let mut trace = vec![objective_raw(
        &xv,
        &centers.view(),
        &weights.view(),
        lambda,
        distance,
    )];
    let mut converged = false;
    let mut iterations = 0;
    for sweep in 1..=config.max_iter {
        weights = update_weights_raw(&xv, &centers.view(), &weights.view(), config.d_k, distance);
        // The proximal weight step always lowers the objective. The center
        // sweep uses only the forward neighbor, so it is not an exact block
        // minimizer and can occasionally raise it; descent is enforced by
        // keeping the previous centers whenever the sweep would.
        let pre_center = objective_raw(&xv, &centers.view(), &weights.view(), lambda, distance);
        let candidate = match distance {
            Distance::SquaredEuclidean => update_centers_raw(&xv, &weights.view(), lambda),
            Distance::RobustLog { c_const } => {
                update_centers_robust_raw(&xv, &centers.view(), &weights.view(), lambda, c_const)
            }
        };
        let candidate_obj =
            objective_raw(&xv, &candidate.view(), &weights.view(), lambda, distance);
        let value = if candidate_obj <= pre_center {
            centers = candidate;
            candidate_obj
        } else {
            pre_center
        };
        trace.push(value);
        iterations = sweep;
        if relative_change(trace[sweep - 1], value) < config.tol {
            converged = true;
            break;
        }
    }
    Ok(FitResult {
        centers: CenterTensor::new(centers)?,
        weights: WeightTensor::new(weights)?,
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Fit centers and memberships by alternating minimization: each sweep
/// updates every membership column (proximal step, simplex projection) and
/// then every center path (backward sweep), recording the objective, until
/// the relative objective change drops below `tol` or `max_iter` sweeps have
/// run. The objective trace is non-increasing: a center sweep that would
/// raise the objective is discarded for that sweep. Deterministic given the
/// seed.
///
/// The weight update runs first within each sweep: the center update
/// rebuilds every path from the weights alone, so updating centers against
/// the uniform initial memberships would collapse all paths onto one and
/// discard the seeding.
pub fn fit(x: &TrajectoryTensor, config: &SolverConfig) -> Result<FitResult> {
    run_fit(x, config)
}

/// [`fit`] with the robust log distance: the weight update uses
/// `ln(c_const + ||x - c||^2)` and the centers take one damped gradient step
/// per sweep on the robust objective (which has no closed-form minimizer).
/// The objective trace is recorded under the robust objective.
pub fn fit_robust(x: &TrajectoryTensor, config: &SolverConfig) -> Result<FitResult> {
    if !config.distance.is_robust() {
        return Err(Error::InvalidConfig(
            "fit_robust requires a robust_log distance".to_string(),
        ));
    }
    run_fit(x, config)
}
