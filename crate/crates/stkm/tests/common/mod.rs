//! Independent oracles used by the acceptance suite. Everything here is
//! deliberately implemented along different routes than the library code it
//! checks.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use std::collections::BTreeMap;

// ── simplex projection oracles ───────────────────────────────────────────────

const GRID_STEP: f64 = 1e-4;

fn dist2(p: &[f64], v: &[f64]) -> f64 {
    p.iter().zip(v.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Brute-force grid minimization of `||p - v||^2` over the simplex at 1e-4
/// resolution, for k = 2 or 3. For k = 3 the inner coordinate is minimized
/// exactly on the grid (the objective is a convex quadratic in it), which
/// yields the same argmin as a full scan.
pub fn project_simplex_grid(v: &[f64]) -> Vec<f64> {
    let steps = (1.0 / GRID_STEP).round() as usize;
    match v.len() {
        2 => {
            let mut best = (f64::INFINITY, vec![0.0, 0.0]);
            for i in 0..=steps {
                let a = i as f64 * GRID_STEP;
                let p = vec![a, 1.0 - a];
                let d = dist2(&p, v);
                if d < best.0 {
                    best = (d, p);
                }
            }
            best.1
        }
        3 => {
            let mut best = (f64::INFINITY, vec![0.0; 3]);
            for i in 0..=steps {
                let a = i as f64 * GRID_STEP;
                let remaining = steps - i;
                // Unconstrained minimizer over b of
                //   (b - v2)^2 + (1 - a - b - v3)^2
                let b_star = (v[1] - v[2] + 1.0 - a) / 2.0;
                let b_idx = (b_star / GRID_STEP).floor();
                for candidate in [b_idx, b_idx + 1.0] {
                    let j = candidate.clamp(0.0, remaining as f64) as usize;
                    let b = j as f64 * GRID_STEP;
                    let p = vec![a, b, 1.0 - a - b];
                    let d = dist2(&p, v);
                    if d < best.0 {
                        best = (d, p);
                    }
                }
            }
            best.1
        }
        k => panic!("grid oracle supports k <= 3, got {k}"),
    }
}

/// Exact active-set projection oracle: enumerate every support set, project
/// onto its affine face, and keep the feasible candidate closest to `v`.
pub fn project_simplex_active_set(v: &[f64]) -> Vec<f64> {
    let k = v.len();
    assert!(k <= 16, "active-set oracle is exponential in k");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
        let sum: f64 = support.iter().map(|&i| v[i]).sum();
        let tau = (sum - 1.0) / support.len() as f64;
        let mut p = vec![0.0; k];
        let mut feasible = true;
        for &i in &support {
            let value = v[i] - tau;
            if value < 0.0 {
                feasible = false;
                break;
            }
            p[i] = value;
        }
        if !feasible {
            continue;
        }
        let d = dist2(&p, v);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, p));
        }
    }
    best.expect("full support is always a candidate").1
}

// ── adjusted mutual information oracle ───────────────────────────────────────

fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut result = BigInt::one();
    for i in 0..k.min(n - k) {
        result = result * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    result
}

struct Counts {
    cells: BTreeMap<(i64, i64), usize>,
    row: BTreeMap<i64, usize>,
    col: BTreeMap<i64, usize>,
    n: usize,
}

fn count(a: &[i64], b: &[i64]) -> Counts {
    let mut cells = BTreeMap::new();
    let mut row = BTreeMap::new();
    let mut col = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b.iter()) {
        *cells.entry((x, y)).or_insert(0) += 1;
        *row.entry(x).or_insert(0) += 1;
        *col.entry(y).or_insert(0) += 1;
    }
    Counts {
        cells,
        row,
        col,
        n: a.len(),
    }
}

fn mi_oracle(c: &Counts) -> f64 {
    let n = c.n as f64;
    let mut total = 0.0;
    for (&(x, y), &nij) in &c.cells {
        let a = c.row[&x] as f64;
        let b = c.col[&y] as f64;
        total += (nij as f64 / n) * ((nij as f64 * n) / (a * b)).ln();
    }
    total
}

fn entropy_oracle(marginals: &BTreeMap<i64, usize>, n: usize) -> f64 {
    let n = n as f64;
    marginals
        .values()
        .map(|&c| (c as f64 / n) * (n / c as f64).ln())
        .sum()
}

/// Expected mutual information under the hypergeometric model, with every
/// probability evaluated as an exact rational
/// `C(b, nij) * C(n-b, a-nij) / C(n, a)` before the single conversion to
/// floating point.
pub fn emi_oracle(a: &[i64], b: &[i64]) -> f64 {
    let c = count(a, b);
    let n = c.n;
    let nf = n as f64;
    let mut total = 0.0;
    for &ai in c.row.values() {
        for &bj in c.col.values() {
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            for nij in lo..=hi {
                let prob = BigRational::new(
                    binomial(bj, nij) * binomial(n - bj, ai - nij),
                    binomial(n, ai),
                )
                .to_f64()
                .expect("probability fits in f64");
                total += (nij as f64 / nf) * ((nf * nij as f64) / (ai as f64 * bj as f64)).ln()
                    * prob;
            }
        }
    }
    total
}

/// Adjusted mutual information assembled from the oracle pieces.
pub fn ami_oracle(a: &[i64], b: &[i64]) -> f64 {
    let c = count(a, b);
    let mi = mi_oracle(&c);
    let emi = emi_oracle(a, b);
    let mean_h = 0.5 * (entropy_oracle(&c.row, c.n) + entropy_oracle(&c.col, c.n));
    let denominator = mean_h - emi;
    if denominator == 0.0 {
        return 0.0;
    }
    (mi - emi) / denominator
}

// ── single-frame solver oracle ───────────────────────────────────────────────

/// One fitting sweep of plain (single-frame) proximally damped k-means:
/// weight step projected onto the simplex, then weighted centroids, with the
/// same farthest-point repair rule for empty clusters. Used to check that a
/// lambda = 0 fit decomposes into independent per-frame fits.
pub struct FrameFit {
    /// m x k centers, flattened column-major per cluster.
    pub centers: Vec<Vec<f64>>,
    /// k x n weights.
    pub weights: Vec<Vec<f64>>,
}

impl FrameFit {
    pub fn new(seeds: &[Vec<f64>], n: usize) -> Self {
        let k = seeds.len();
        FrameFit {
            centers: seeds.to_vec(),
            weights: vec![vec![1.0 / k as f64; n]; k],
        }
    }

    pub fn sweep(&mut self, points: &[Vec<f64>], d_k: f64) {
        let k = self.centers.len();
        let n = points.len();
        let m = points[0].len();
        // Weight step.
        let mut new_weights = vec![vec![0.0; n]; k];
        for (i, p) in points.iter().enumerate() {
            let shifted: Vec<f64> = (0..k)
                .map(|j| self.weights[j][i] - dist2(p, &self.centers[j]) / d_k)
                .collect();
            let projected = project_simplex_active_set(&shifted);
            for j in 0..k {
                new_weights[j][i] = projected[j];
            }
        }
        self.weights = new_weights;
        // Centroid step with farthest-point repair.
        let mut alive: Vec<usize> = Vec::new();
        let mut degenerate: Vec<usize> = Vec::new();
        for j in 0..k {
            let mass: f64 = self.weights[j].iter().sum();
            if mass < 1e-12 {
                degenerate.push(j);
                continue;
            }
            let mut c = vec![0.0; m];
            for (i, p) in points.iter().enumerate() {
                for d in 0..m {
                    c[d] += self.weights[j][i] * p[d];
                }
            }
            for value in c.iter_mut() {
                *value /= mass;
            }
            self.centers[j] = c;
            alive.push(j);
        }
        for &j in &degenerate {
            let far = (0..n)
                .map(|i| {
                    let d = alive
                        .iter()
                        .map(|&a| dist2(&points[i], &self.centers[a]))
                        .fold(f64::INFINITY, f64::min);
                    (i, d)
                })
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            self.centers[j] = points[far].clone();
            alive.push(j);
        }
    }
}

// ── finite differences ───────────────────────────────────────────────────────

/// Central finite-difference gradient with step `h`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    (0..at.len())
        .map(|d| {
            let mut plus = at.to_vec();
            let mut minus = at.to_vec();
            plus[d] += h;
            minus[d] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}
