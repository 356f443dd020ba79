//! Acceptance suite: one test per acceptance criterion, each printing a
//! pass line with the measured quantities (run with `--nocapture` to see
//! them).

mod common;

use std::time::Instant;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stkm::datagen::{generate, CenterMotion, ScenarioConfig};
use stkm::metrics;
use stkm::phase2::{self, Phase2Config};
use stkm::solver;
use stkm::types::{
    AssignmentHistory, CenterTensor, Distance, Partition, SolverConfig, TrajectoryTensor,
    WeightTensor, UNASSIGNED,
};

fn tensor_from(data: Array3<f64>) -> TrajectoryTensor {
    let (t_len, _, n) = data.dim();
    let ids = (0..n).map(|i| format!("p{i}")).collect();
    let times = (0..t_len).map(|t| t as f64).collect();
    TrajectoryTensor::new(data, ids, times).unwrap()
}

// ── 1. descent ───────────────────────────────────────────────────────────────

#[test]
fn descent_holds_on_twenty_mixed_scenarios() {
    let started = Instant::now();
    let motions = [
        CenterMotion::Linear,
        CenterMotion::RandomWalk { step_sigma: 0.3 },
        CenterMotion::MergeSplit {
            meet_time: 8,
            part_time: 20,
        },
    ];
    let ks = [2usize, 3, 5];
    let lambdas = [0.0, 0.6, 0.8, 1.0];
    let mut checked = 0usize;
    let mut sweeps = 0usize;
    for run in 0..20 {
        let motion = motions[run % motions.len()];
        let k = ks[run % ks.len()];
        let lambda = lambdas[run % lambdas.len()];
        let (ppc, t_len) = match run % 4 {
            0 => (vec![20, 20, 20], 30),
            1 => (vec![40, 40, 40], 60),
            2 => (vec![66, 66, 66], 100),
            _ => (vec![15, 15, 15], 25),
        };
        let scenario = generate(&ScenarioConfig {
            n_clusters: 3,
            points_per_cluster: ppc,
            n_steps: t_len,
            center_motion: motion,
            spread_sigma: 0.5,
            seed: 1000 + run as u64,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let mut cfg = SolverConfig::new(k);
        cfg.lambda = lambda;
        cfg.seed = run as u64;
        let result = solver::fit(&scenario.trajectories, &cfg).unwrap();
        for w in result.objective_trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9,
                "objective rose {} -> {} (run {run}, k = {k}, lambda = {lambda})",
                w[0],
                w[1]
            );
        }
        checked += 1;
        sweeps += result.iterations;
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "descent suite took {elapsed:.1} s");
    println!(
        "[PASS] objective trace non-increasing (1e-9) on {checked} scenarios, \
         {sweeps} sweeps total, {elapsed:.1} s"
    );
}

// ── 2. stationarity of the center update ────────────────────────────────────

#[test]
fn center_update_zeroes_the_local_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..100 {
        let n = rng.random_range(3..15);
        let m = rng.random_range(1..4);
        let k = rng.random_range(1..4);
        let lambda: f64 = rng.random_range(0.0..=1.0);
        let data = Array3::from_shape_fn((2, m, n), |_| rng.random_range(-5.0..5.0));
        let x = tensor_from(data);
        // Random memberships on the simplex at both steps.
        let mut w = Array3::zeros((2, k, n));
        for t in 0..2 {
            for i in 0..n {
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..2.0)).collect();
                let p = solver::project_simplex(&raw);
                for j in 0..k {
                    w[[t, j, i]] = p[j];
                }
            }
        }
        let weights = WeightTensor::new(w).unwrap();
        let shape_only = CenterTensor::new(Array3::zeros((2, m, k))).unwrap();
        let updated = solver::update_centers(&x, &shape_only, &weights, lambda).unwrap();
        let j = rng.random_range(0..k);
        let successor: Vec<f64> = updated.center(1, j).to_vec();
        let at: Vec<f64> = updated.center(0, j).to_vec();
        // Local objective of c_{0,j} with the successor fixed:
        //   sum_i [ w_i ||x_i - c||^2 + lambda ||c - c_next||^2 ]
        let local = |c: &[f64]| -> f64 {
            let mut total = 0.0;
            for i in 0..n {
                let wi = weights.data()[[0, j, i]];
                let mut d2 = 0.0;
                let mut pen = 0.0;
                for d in 0..m {
                    let diff = x.data()[[0, d, i]] - c[d];
                    d2 += diff * diff;
                    let pdiff = c[d] - successor[d];
                    pen += pdiff * pdiff;
                }
                total += wi * d2 + lambda * pen;
            }
            total
        };
        let grad = common::fd_gradient(local, &at, 1e-5);
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = local(&at).abs().max(1.0);
        assert!(
            norm <= 1e-4 * scale,
            "case {case}: |grad| = {norm:.3e} at objective scale {scale:.3e}"
        );
    }
    println!("[PASS] updated centers are stationary points of the local objective (100 cases)");
}

// ── 3. lambda = 0 decomposition ──────────────────────────────────────────────

#[test]
fn lambda_zero_fit_decomposes_into_per_frame_fits() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..10 {
        let n = rng.random_range(5..=50);
        let t_len = rng.random_range(3..=10);
        let k = rng.random_range(2..4);
        let m = 2;
        let data = Array3::from_shape_fn((t_len, m, n), |_| rng.random_range(-10.0..10.0));
        let x = tensor_from(data.clone());
        let seed = case as u64;
        let (init_centers, _) = solver::init(&x, k, seed).unwrap();
        let seeds: Vec<Vec<f64>> = (0..k).map(|j| init_centers.center(0, j).to_vec()).collect();

        for sweeps in 1..=4usize {
            let mut cfg = SolverConfig::new(k);
            cfg.lambda = 0.0;
            cfg.seed = seed;
            cfg.tol = 0.0;
            cfg.max_iter = sweeps;
            let full = solver::fit(&x, &cfg).unwrap();

            for t in 0..t_len {
                let points: Vec<Vec<f64>> =
                    (0..n).map(|i| (0..m).map(|d| data[[t, d, i]]).collect()).collect();
                let mut frame = common::FrameFit::new(&seeds, n);
                for _ in 0..sweeps {
                    frame.sweep(&points, cfg.d_k);
                }
                for j in 0..k {
                    for i in 0..n {
                        let diff =
                            (full.weights.data()[[t, j, i]] - frame.weights[j][i]).abs();
                        assert!(
                            diff <= 1e-10,
                            "case {case}, sweep {sweeps}, weight (t={t}, j={j}, i={i}) differs by {diff:e}"
                        );
                    }
                    for d in 0..m {
                        let diff =
                            (full.centers.data()[[t, d, j]] - frame.centers[j][d]).abs();
                        assert!(
                            diff <= 1e-10,
                            "case {case}, sweep {sweeps}, center (t={t}, j={j}, d={d}) differs by {diff:e}"
                        );
                    }
                }
            }
        }
    }
    println!("[PASS] lambda = 0 fit equals independent per-frame fits (10 instances, 4 sweeps each)");
}

// ── 4. simplex projection oracles ────────────────────────────────────────────

#[test]
fn simplex_projection_matches_independent_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in [2usize, 3] {
        for case in 0..100 {
            let v: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let fast = solver::project_simplex(&v);
            let grid = common::project_simplex_grid(&v);
            for (a, b) in fast.iter().zip(grid.iter()) {
                assert!(
                    (a - b).abs() <= 1e-3,
                    "k = {k}, case {case}: {fast:?} vs grid {grid:?}"
                );
            }
        }
    }
    for k in [4usize, 5, 6] {
        for case in 0..100 {
            let v: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let fast = solver::project_simplex(&v);
            let exact = common::project_simplex_active_set(&v);
            for (a, b) in fast.iter().zip(exact.iter()) {
                assert!(
                    (a - b).abs() <= 1e-10,
                    "k = {k}, case {case}: {fast:?} vs active-set {exact:?}"
                );
            }
        }
    }
    println!(
        "[PASS] simplex projection matches grid oracle (k = 2, 3 within 1e-3) and \
         active-set oracle (k = 4..6 within 1e-10), 100 vectors each"
    );
}

// ── 5. AMI oracle equivalence ────────────────────────────────────────────────

#[test]
fn ami_matches_exact_expected_mi_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..50 {
        let n = rng.random_range(2..=30);
        let r = rng.random_range(1..=4);
        let s = rng.random_range(1..=4);
        let a: Vec<i64> = (0..n).map(|_| rng.random_range(0..r)).collect();
        let b: Vec<i64> = (0..n).map(|_| rng.random_range(0..s)).collect();
        let implementation = metrics::ami(&a, &b).unwrap();
        let oracle = common::ami_oracle(&a, &b);
        assert!(
            (implementation - oracle).abs() <= 1e-10,
            "case {case}: {implementation} vs oracle {oracle}"
        );
    }
    // Exact checks: permutation invariance is bitwise, identical labelings
    // score exactly 1, constant labelings exactly 0.
    let a: Vec<i64> = vec![0, 0, 1, 2, 1, 0, 2, 2, 1, 0];
    let b: Vec<i64> = vec![1, 0, 1, 2, 2, 0, 2, 0, 1, 0];
    let base = metrics::ami(&a, &b).unwrap();
    let permuted: Vec<i64> = a.iter().map(|&l| (l + 1) % 3 + 7).collect();
    assert_eq!(base, metrics::ami(&permuted, &b).unwrap());
    assert_eq!(base, metrics::ami(&b, &a).unwrap());
    assert_eq!(metrics::ami(&a, &a).unwrap(), 1.0);
    let shifted: Vec<i64> = a.iter().map(|&l| (l + 2) % 3).collect();
    assert_eq!(metrics::ami(&a, &shifted).unwrap(), 1.0);
    let constant = vec![4i64; 10];
    assert_eq!(metrics::ami(&constant, &b).unwrap(), 0.0);
    assert_eq!(metrics::ami(&constant, &constant).unwrap(), 0.0);
    println!(
        "[PASS] AMI matches the exact-rational expected-MI oracle within 1e-10 (50 instances); \
         permutation/degenerate checks exact"
    );
}

// ── 6. well-separated clusters recovered ─────────────────────────────────────

#[test]
fn well_separated_clusters_recovered_long_term() {
    let mut perfect_long_term = 0usize;
    let mut good_total = 0usize;
    let seeds = 10u64;
    for seed in 0..seeds {
        let started = Instant::now();
        let scenario = generate(&ScenarioConfig {
            n_clusters: 3,
            points_per_cluster: vec![34, 33, 33],
            n_steps: 50,
            spread_sigma: 0.5, // layout separation 17.3 >= 10 * sigma
            seed: 100 + seed,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let mut cfg = SolverConfig::new(3);
        cfg.lambda = 0.8;
        cfg.seed = seed;
        let fitted = solver::fit(&scenario.trajectories, &cfg).unwrap();
        let assignments = phase2::extract_assignments(&fitted.weights);
        let phase2_cfg = Phase2Config {
            k_target: 3,
            seed,
            ..Phase2Config::default()
        };
        let result = phase2::long_term_clusters(&assignments, &phase2_cfg).unwrap();
        let long_term = metrics::long_term_ami(&result.partition, &scenario.ground_truth).unwrap();
        let total = metrics::total_ami(&assignments, &scenario.ground_truth).unwrap();
        if (long_term - 1.0).abs() <= 1e-12 {
            perfect_long_term += 1;
        }
        if total >= 0.8 {
            good_total += 1;
        }
        let elapsed = started.elapsed().as_secs_f64();
        assert!(elapsed < 30.0, "seed {seed} took {elapsed:.1} s");
    }
    assert!(
        perfect_long_term >= 9,
        "long-term AMI = 1.0 on only {perfect_long_term}/{seeds} seeds"
    );
    assert!(
        good_total >= 9,
        "total AMI >= 0.8 on only {good_total}/{seeds} seeds"
    );
    println!(
        "[PASS] three separated clusters: long-term AMI = 1.0 on {perfect_long_term}/{seeds}, \
         total AMI >= 0.8 on {good_total}/{seeds}"
    );
}

// ── 7. merged window collapses to two populated clusters ────────────────────

#[test]
fn merged_window_shows_at_most_two_populated_clusters() {
    let (meet, part, t_len) = (10usize, 27usize, 30usize);
    let scenario = generate(&ScenarioConfig {
        n_clusters: 3,
        points_per_cluster: vec![50, 50, 50],
        n_steps: t_len,
        center_motion: CenterMotion::MergeSplit {
            meet_time: meet,
            part_time: part,
        },
        spread_sigma: 0.5,
        seed: 42,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let mut cfg = SolverConfig::new(3);
    cfg.lambda = 0.8;
    cfg.seed = 42;
    let fitted = solver::fit(&scenario.trajectories, &cfg).unwrap();
    let assignments = phase2::extract_assignments(&fitted.weights);
    let n = scenario.trajectories.n_points();
    let threshold = (0.05 * n as f64).ceil() as usize;
    let mut collapsed_steps = 0usize;
    for t in meet..part {
        let mut counts = vec![0usize; 3];
        for i in 0..n {
            counts[assignments.labels()[[t, i]]] += 1;
        }
        let populated = counts.iter().filter(|&&c| c >= threshold).count();
        if populated <= 2 {
            collapsed_steps += 1;
        }
    }
    let window = part - meet;
    assert!(
        collapsed_steps * 10 >= window * 8,
        "only {collapsed_steps}/{window} merged steps show <= 2 populated clusters"
    );
    println!(
        "[PASS] merge window: {collapsed_steps}/{window} steps show at most 2 populated clusters"
    );
}

// ── 8. robust fit under outliers ─────────────────────────────────────────────

fn inlier_long_term_ami(
    weights: &WeightTensor,
    ground_truth: &Partition,
    seed: u64,
) -> f64 {
    let assignments = phase2::extract_assignments(weights);
    let phase2_cfg = Phase2Config {
        k_target: 2,
        seed,
        ..Phase2Config::default()
    };
    let result = phase2::long_term_clusters(&assignments, &phase2_cfg).unwrap();
    let inliers: Vec<usize> = ground_truth
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != UNASSIGNED)
        .map(|(i, _)| i)
        .collect();
    let predicted =
        Partition::new(inliers.iter().map(|&i| result.partition.labels()[i]).collect()).unwrap();
    let truth =
        Partition::new(inliers.iter().map(|&i| ground_truth.labels()[i]).collect()).unwrap();
    metrics::long_term_ami(&predicted, &truth).unwrap()
}

#[test]
fn robust_fit_preserves_cluster_identities_under_outliers() {
    let seeds = 10u64;
    let mut successes = 0usize;
    let mut detail = Vec::new();
    for seed in 0..seeds {
        let scenario = generate(&ScenarioConfig {
            n_clusters: 2,
            points_per_cluster: vec![50, 50],
            n_steps: 30,
            spread_sigma: 0.5,
            outlier_fraction: 0.1,
            outlier_box: (-100.0, 100.0),
            seed: 300 + seed,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let mut standard_cfg = SolverConfig::new(2);
        standard_cfg.lambda = 0.8;
        standard_cfg.seed = seed;
        let standard = solver::fit(&scenario.trajectories, &standard_cfg).unwrap();
        let mut robust_cfg = standard_cfg.clone();
        robust_cfg.distance = Distance::RobustLog { c_const: 1.0 };
        robust_cfg.max_iter = 800;
        robust_cfg.tol = 1e-9;
        let robust = solver::fit_robust(&scenario.trajectories, &robust_cfg).unwrap();
        for w in robust.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-7, "robust trace rose: {} -> {}", w[0], w[1]);
        }
        let standard_ami = inlier_long_term_ami(&standard.weights, &scenario.ground_truth, seed);
        let robust_ami = inlier_long_term_ami(&robust.weights, &scenario.ground_truth, seed);
        if robust_ami >= 0.9 && robust_ami > standard_ami {
            successes += 1;
        }
        detail.push((seed, standard_ami, robust_ami));
    }
    assert!(
        successes >= 8,
        "robust fit beat standard on only {successes}/{seeds} seeds: {detail:?}"
    );
    println!(
        "[PASS] outlier scenario: robust inlier AMI >= 0.9 and above standard on \
         {successes}/{seeds} seeds"
    );
}

// ── 9. constant histories recover the partition exactly ─────────────────────

#[test]
fn constant_histories_recover_partition_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..20 {
        let n = rng.random_range(3..=100);
        let k = rng.random_range(1..=6.min(n));
        // Every cluster gets at least one member.
        let mut labels: Vec<i64> = (0..k as i64).collect();
        for _ in k..n {
            labels.push(rng.random_range(0..k) as i64);
        }
        // Shuffle membership deterministically.
        use rand::seq::SliceRandom;
        labels.shuffle(&mut rng);
        let truth = Partition::new(labels.clone()).unwrap().canonical();

        let t_len = 6;
        let mut history = ndarray::Array2::zeros((t_len, n));
        for t in 0..t_len {
            for i in 0..n {
                history[[t, i]] = truth.labels()[i] as usize;
            }
        }
        let assignments = AssignmentHistory::new(history, k).unwrap();
        let cfg = Phase2Config {
            k_target: truth.n_clusters(),
            seed: case as u64,
            ..Phase2Config::default()
        };
        let result = phase2::long_term_clusters(&assignments, &cfg).unwrap();
        assert_eq!(
            result.partition, truth,
            "case {case}: partition not recovered exactly"
        );
    }
    println!("[PASS] time-constant histories recover their partition exactly (20 random cases)");
}
