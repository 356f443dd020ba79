//! Scratch probe: scan outlier-scenario parameters for the robust-vs-standard
//! comparison.

use stkm::datagen::{generate, ScenarioConfig};
use stkm::metrics;
use stkm::phase2::{self, Phase2Config};
use stkm::solver;
use stkm::types::{Distance, Partition, SolverConfig, WeightTensor, UNASSIGNED};

fn inlier_ami(weights: &WeightTensor, truth: &Partition, seed: u64) -> f64 {
    let assignments = phase2::extract_assignments(weights);
    let cfg = Phase2Config {
        k_target: 2,
        seed,
        ..Phase2Config::default()
    };
    let result = phase2::long_term_clusters(&assignments, &cfg).unwrap();
    let inliers: Vec<usize> = truth
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != UNASSIGNED)
        .map(|(i, _)| i)
        .collect();
    let predicted =
        Partition::new(inliers.iter().map(|&i| result.partition.labels()[i]).collect()).unwrap();
    let gt = Partition::new(inliers.iter().map(|&i| truth.labels()[i]).collect()).unwrap();
    metrics::long_term_ami(&predicted, &gt).unwrap()
}

fn main() {
    for &box_half in &[30.0, 50.0, 100.0] {
        for &sigma in &[0.5, 1.0, 1.5] {
            for &lambda in &[0.8] {
                let mut wins = 0;
                let mut robust_ok = 0;
                let mut std_sum = 0.0;
                let mut rob_sum = 0.0;
                for seed in 0..10u64 {
                    let scenario = generate(&ScenarioConfig {
                        n_clusters: 2,
                        points_per_cluster: vec![50, 50],
                        n_steps: 30,
                        spread_sigma: sigma,
                        outlier_fraction: 0.1,
                        outlier_box: (-box_half, box_half),
                        seed: 300 + seed,
                        ..ScenarioConfig::default()
                    })
                    .unwrap();
                    let mut cfg = SolverConfig::new(2);
                    cfg.lambda = lambda;
                    cfg.seed = seed;
                    let standard = solver::fit(&scenario.trajectories, &cfg).unwrap();
                    let mut rcfg = cfg.clone();
                    rcfg.distance = Distance::RobustLog { c_const: 1.0 };
                    rcfg.max_iter = 800;
                    rcfg.tol = 1e-9;
                    let robust = solver::fit_robust(&scenario.trajectories, &rcfg).unwrap();
                    let s = inlier_ami(&standard.weights, &scenario.ground_truth, seed);
                    let r = inlier_ami(&robust.weights, &scenario.ground_truth, seed);
                    std_sum += s;
                    rob_sum += r;
                    if r >= 0.9 {
                        robust_ok += 1;
                    }
                    if r >= 0.9 && r > s {
                        wins += 1;
                    }
                }
                println!(
                    "box +-{box_half:>5} sigma {sigma} lambda {lambda}: wins {wins}/10, robust>=0.9 {robust_ok}/10, mean std {:.2} mean rob {:.2}",
                    std_sum / 10.0,
                    rob_sum / 10.0
                );
            }
        }
    }
}
