//! Acceptance suite: one test per shipped guarantee, each printing a
//! pass/fail line with its elapsed time. Tolerances and runtime caps are
//! pinned in the constants below.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use prescript_core::data::ObservationalDataset;
use prescript_core::experiments::{
    run_benchmark, sensitivity_grid, BenchmarkConfig, Experiment, LambdaMode, Method,
};
use prescript_core::forest::{fit_forest, ForestParams};
use prescript_core::objective::{
    bias_penalty, penalized_objective, variance_penalty, CostFunction, FitTarget, ObjectiveMode,
    PenaltyConfig,
};
use prescript_core::optimize::{grid_oracle, optimize_linear, optimize_tree};
use prescript_core::rng::stream_rng;
use prescript_core::space::{DecisionSpace, FeaturePoint};
use prescript_core::theory::{
    example1_analytic, example1_montecarlo, generalization_bound, TheoryInputs,
};
use prescript_core::tree::{enumerate_leaves, fit_honest_cart, tree_weights, Node, TreeModel, TreeParams};
use prescript_core::{FittedLearner, LearnerSpec, LinearKind, LinearModel};

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !($cond) {
            return Err(format!($($msg)*));
        }
    };
}

fn report(number: usize, label: &str, limit_secs: f64, body: impl FnOnce() -> Result<(), String>) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed().as_secs_f64();
    match &outcome {
        Ok(()) if elapsed <= limit_secs => {
            println!("acceptance criterion {number} ({label}): PASS [{elapsed:.1}s]");
        }
        Ok(()) => {
            println!(
                "acceptance criterion {number} ({label}): FAIL [runtime {elapsed:.1}s over {limit_secs:.0}s cap]"
            );
            panic!("criterion {number} exceeded its runtime cap");
        }
        Err(msg) => {
            println!("acceptance criterion {number} ({label}): FAIL [{elapsed:.1}s] {msg}");
            panic!("criterion {number} failed: {msg}");
        }
    }
}

/// Seeded regression dataset over d covariates and p decisions with
/// p-dimensional outcomes (targets for squared-distance costs).
fn random_dataset(n: usize, d: usize, p: usize, seed: u64) -> ObservationalDataset {
    let mut rng = stream_rng(seed, 17);
    let mut covariates = Vec::with_capacity(n);
    let mut decisions = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..p)
            .map(|k| {
                let shift = x.first().copied().unwrap_or(0.0);
                0.5 * shift + 0.3 * (3.0 * z[k]).sin() + 0.2 * rng.random_range(-1.0..1.0)
            })
            .collect();
        covariates.push(x);
        decisions.push(z);
        outcomes.push(y);
    }
    ObservationalDataset::new(covariates, decisions, outcomes).unwrap()
}

fn tree_shapes_equal(a: &TreeModel, b: &TreeModel) -> bool {
    if a.nodes.len() != b.nodes.len() {
        return false;
    }
    a.nodes.iter().zip(&b.nodes).all(|(na, nb)| match (na, nb) {
        (
            Node::Split {
                feature: fa,
                threshold: ta,
                left: la,
                right: ra,
            },
            Node::Split {
                feature: fb,
                threshold: tb,
                left: lb,
                right: rb,
            },
        ) => fa == fb && ta == tb && la == lb && ra == rb,
        (Node::Leaf { estimation: ea }, Node::Leaf { estimation: eb }) => ea == eb,
        _ => false,
    })
}

/// Permute outcomes among rows whose targets cannot influence any tree
/// structure, refit, and demand identical shapes and weight patterns.
fn honesty_permutation_holds(
    ds: &ObservationalDataset,
    structure_union: &[usize],
    refit: impl Fn(&ObservationalDataset) -> Vec<TreeModel>,
    baseline: &[TreeModel],
    seed: u64,
) -> Result<(), String> {
    let in_structure: std::collections::HashSet<usize> = structure_union.iter().copied().collect();
    let mut free: Vec<usize> = (0..ds.n()).filter(|i| !in_structure.contains(i)).collect();
    ensure!(
        free.len() >= 2,
        "degenerate honesty check: only {} structure-free rows",
        free.len()
    );
    let mut permuted = ds.clone();
    let original = free.clone();
    let mut rng = stream_rng(seed, 400);
    free.shuffle(&mut rng);
    for (from, to) in original.iter().zip(&free) {
        permuted.outcomes[*to] = ds.outcomes[*from].clone();
    }
    let refitted = refit(&permuted);
    ensure!(refitted.len() == baseline.len(), "member count changed");
    for (a, b) in baseline.iter().zip(&refitted) {
        ensure!(
            tree_shapes_equal(a, b),
            "tree shape or weight pattern changed under estimation permutation"
        );
    }
    Ok(())
}

#[test]
fn criterion_1_weight_laws() {
    report(1, "weight laws and honesty", 60.0, || {
        let mut rng = stream_rng(101, 0);
        for model_idx in 0..50u64 {
            let d = (model_idx % 3) as usize;
            let p = 1 + (model_idx % 2) as usize;
            let n = 80 + (model_idx as usize * 7) % 160;
            let min_leaf = 4 + (model_idx as usize) % 8;
            let ds = random_dataset(n, d, p, 5000 + model_idx);
            let cost = CostFunction::squared_distance(4.0, 16.0);

            let (models, structure_union): (Vec<TreeModel>, Vec<usize>) = if model_idx % 2 == 0 {
                let params = TreeParams {
                    min_leaf,
                    max_leaves: 3 + (model_idx as usize) % 14,
                    seed: model_idx,
                    ..Default::default()
                };
                let tree = fit_honest_cart(&ds, FitTarget::Cost(&cost), &params)
                    .map_err(|e| format!("cart fit failed: {e}"))?;
                let union = tree.structure.clone();
                (vec![tree], union)
            } else {
                let params = ForestParams {
                    trees: 5,
                    min_leaf,
                    max_leaves: 3 + (model_idx as usize) % 14,
                    seed: model_idx,
                    ..Default::default()
                };
                let forest = fit_forest(&ds, FitTarget::Cost(&cost), &params)
                    .map_err(|e| format!("forest fit failed: {e}"))?;
                let mut union: Vec<usize> = forest
                    .trees
                    .iter()
                    .flat_map(|t| t.structure.iter().copied())
                    .collect();
                union.sort_unstable();
                union.dedup();
                (forest.trees.clone(), union)
            };

            // Weight laws over 100 random queries.
            for _ in 0..100 {
                let q = FeaturePoint::new(
                    (0..d).map(|_| rng.random_range(-1.5..1.5)).collect(),
                    (0..p).map(|_| rng.random_range(-1.5..1.5)).collect(),
                );
                let w = if models.len() == 1 {
                    tree_weights(&models[0], &q)
                } else {
                    let members: Vec<_> =
                        models.iter().map(|t| tree_weights(t, &q)).collect();
                    prescript_core::WeightVector::average(&members)
                };
                let sum = w.sum();
                ensure!(
                    (sum - 1.0).abs() <= 1e-10,
                    "model {model_idx}: weights sum to {sum}"
                );
                let cap = 1.0 / min_leaf as f64;
                ensure!(
                    w.max_weight() <= cap + 1e-12,
                    "model {model_idx}: weight {} above 1/min_leaf {cap}",
                    w.max_weight()
                );
            }

            // Honesty: permuting outcomes outside the structure rows must
            // not move a single split or weight pattern.
            let refit = |permuted: &ObservationalDataset| -> Vec<TreeModel> {
                let cost = CostFunction::squared_distance(4.0, 16.0);
                if model_idx % 2 == 0 {
                    let params = TreeParams {
                        min_leaf,
                        max_leaves: 3 + (model_idx as usize) % 14,
                        seed: model_idx,
                        ..Default::default()
                    };
                    vec![fit_honest_cart(permuted, FitTarget::Cost(&cost), &params).unwrap()]
                } else {
                    let params = ForestParams {
                        trees: 5,
                        min_leaf,
                        max_leaves: 3 + (model_idx as usize) % 14,
                        seed: model_idx,
                        ..Default::default()
                    };
                    fit_forest(permuted, FitTarget::Cost(&cost), &params)
                        .unwrap()
                        .trees
                }
            };
            honesty_permutation_holds(&ds, &structure_union, refit, &models, 9000 + model_idx)?;
        }
        Ok(())
    });
}

#[test]
fn criterion_2_optimizer_oracle_equivalence() {
    report(2, "optimizer-oracle equivalence", 300.0, || {
        // Tree solver against the brute-force grid on 100 seeded instances.
        for instance in 0..100u64 {
            let mut rng = stream_rng(2000, instance);
            let p = if instance % 10 < 7 { 1 } else { 2 };
            let d = (instance % 2) as usize;
            let ds = random_dataset(150, d, p, 3000 + instance);
            let cost = CostFunction::squared_distance(4.0, 16.0);
            let params = TreeParams {
                min_leaf: 5 + (instance as usize) % 8,
                max_leaves: 4 + (instance as usize) % 29, // <= 32 leaves
                seed: instance,
                ..Default::default()
            };
            let tree = fit_honest_cart(&ds, FitTarget::Cost(&cost), &params)
                .map_err(|e| format!("fit failed: {e}"))?;
            let cfg = PenaltyConfig::new(
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.01..1.0),
                ObjectiveMode::Plain,
            )
            .unwrap();
            let lower: Vec<f64> = (0..p).map(|_| rng.random_range(-1.5..-0.5)).collect();
            let upper: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..1.5)).collect();
            let space = DecisionSpace::bounded_box(lower, upper).unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();

            let sol = optimize_tree(&tree, &ds, &x, &cost, &cfg, &space)
                .map_err(|e| format!("solver failed: {e}"))?;
            let oracle = grid_oracle(
                |z| {
                    let q = FeaturePoint::new(x.clone(), z.to_vec());
                    let w = tree_weights(&tree, &q);
                    penalized_objective(&w, &q, &cost, &ds, &cfg).0
                },
                &space,
                1000,
            )
            .map_err(|e| format!("oracle failed: {e}"))?;
            ensure!(
                sol.value <= oracle.value + 1e-6,
                "instance {instance}: solver {} above oracle {}",
                sol.value,
                oracle.value
            );
            for k in 0..p {
                let step = (space.upper[k] - space.lower[k]) / 999.0;
                ensure!(
                    (sol.z[k] - oracle.z[k]).abs() <= 2.0 * step + 1e-12,
                    "instance {instance}: coordinate {k} off by {} (> 2 grid steps {})",
                    (sol.z[k] - oracle.z[k]).abs(),
                    2.0 * step
                );
            }
        }

        // Linear solver against the grid on 100 random instances.
        for instance in 0..100u64 {
            let mut rng = stream_rng(2500, instance);
            let k = 3; // d = 1, p = 2
            let beta: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let r: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let mut shaping = vec![vec![0.0; k]; k];
            for i in 0..k {
                for j in 0..k {
                    shaping[i][j] = (0..k).map(|l| r[l][i] * r[l][j]).sum::<f64>();
                }
                shaping[i][i] += 0.1;
            }
            let model = LinearModel {
                kind: LinearKind::Ols,
                beta,
                shaping,
                sigma: rng.random_range(0.2..2.0),
                alpha: 0.0,
                active: (0..k).collect(),
                empty_active: false,
                kkt_residual: 0.0,
                covariate_dim: 1,
                decision_dim: 2,
            };
            let lower: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..0.0)).collect();
            let upper: Vec<f64> = (0..2).map(|_| rng.random_range(0.5..3.0)).collect();
            let space = DecisionSpace::bounded_box(lower, upper).unwrap();
            let x = vec![rng.random_range(-1.0..1.0)];
            let lambda1 = rng.random_range(0.0..2.0);
            let sol = optimize_linear(&model, &x, lambda1, &space, ObjectiveMode::Plain)
                .map_err(|e| format!("linear solver failed: {e}"))?;
            let oracle = grid_oracle(
                |z| {
                    let mut v = x.clone();
                    v.extend_from_slice(z);
                    model.predict(&v)
                        + lambda1 * model.sigma * model.variance_shape(&v).sqrt()
                },
                &space,
                400,
            )
            .unwrap();
            ensure!(
                sol.value <= oracle.value + 1e-4,
                "linear instance {instance}: {} above oracle {}",
                sol.value,
                oracle.value
            );
        }
        Ok(())
    });
}

#[test]
fn criterion_3_example1_reproduction() {
    report(3, "selection-rule laboratory", 120.0, || {
        let lambda = 2.0f64.sqrt();
        for m in [1usize, 4, 16] {
            let analytic = example1_analytic(m, lambda).unwrap();
            let mc = example1_montecarlo(m, lambda, 100_000, 303).unwrap();
            let n_a = mc.state_a.count as f64;
            for (label, observed, truth) in [
                ("pcm", mc.state_a.pcm_mean, analytic.regret_pcm),
                ("up", mc.state_a.up_mean, analytic.regret_up),
            ] {
                let se = (truth * (1.0 - truth) / n_a).sqrt();
                let tolerance = 3.0 * se + 1e-9;
                ensure!(
                    (observed - truth).abs() <= tolerance,
                    "m={m} {label}: monte carlo {observed} vs analytic {truth} (tol {tolerance})"
                );
            }
        }
        // Penalized-over-unpenalized advantage grows with the action count.
        let mut last_ratio = f64::INFINITY;
        for m in [4usize, 16, 64] {
            let a = example1_analytic(m, lambda).unwrap();
            let ratio = a.regret_up / a.regret_pcm;
            ensure!(
                ratio < last_ratio,
                "regret ratio {ratio} did not decrease at m={m}"
            );
            last_ratio = ratio;
        }
        Ok(())
    });
}

#[test]
fn criterion_4_generalization_bound_coverage() {
    report(4, "generalization bound coverage", 300.0, || {
        // Fixed-design 1-D problem with known mean function, Lipschitz
        // constant, and noise level.
        let n = 400;
        let sigma = 0.1;
        let mean_fn = |z: f64| 0.5 * (std::f64::consts::TAU * z).sin();
        let lipschitz = std::f64::consts::PI;
        let inputs = TheoryInputs {
            max_regions: 16,
            min_leaf: 25,
            diameter: 1.0,
            weight_lipschitz: 0.0,
            cost_lipschitz: lipschitz,
            decision_dim: 1,
            delta: 0.05,
        };
        let design: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let reps = 200;
        let mut covered = 0usize;
        for rep in 0..reps {
            let mut rng = stream_rng(404, rep as u64);
            let ds = ObservationalDataset::new(
                vec![vec![]; n],
                design.iter().map(|z| vec![*z]).collect(),
                design
                    .iter()
                    .map(|z| vec![mean_fn(*z) + sigma * rng.random_range(-3.0..3.0f64).clamp(-10.0, 10.0) / 3.0 * 3.0])
                    .collect(),
            )
            .unwrap();
            let params = TreeParams {
                min_leaf: inputs.min_leaf,
                max_leaves: inputs.max_regions,
                seed: rep as u64,
                ..Default::default()
            };
            let tree = fit_honest_cart(&ds, FitTarget::Outcome, &params).unwrap();
            let values = FitTarget::Outcome.values(&ds).unwrap();
            let mut holds = true;
            for gi in 0..40 {
                let z = (gi as f64 + 0.5) / 40.0;
                let q = FeaturePoint::new(vec![], vec![z]);
                let w = tree_weights(&tree, &q);
                let mu_hat: f64 = w.iter().map(|(i, wi)| wi * values[i]).sum();
                let v = variance_penalty(&w, sigma * sigma);
                let b = bias_penalty(&w, &q, &ds);
                let bound = generalization_bound(&inputs, v, b);
                if mean_fn(z) - mu_hat > bound {
                    holds = false;
                    break;
                }
            }
            if holds {
                covered += 1;
            }
        }
        let rate = covered as f64 / reps as f64;
        ensure!(
            rate >= 0.95,
            "bound covered only {covered}/{reps} fixed-design replications"
        );
        Ok(())
    });
}

#[test]
fn criterion_5_pricing_benchmark() {
    report(5, "pricing benchmark", 1800.0, || {
        let config = BenchmarkConfig {
            experiment: Experiment::Pricing,
            methods: vec![Method::Rf, Method::UpRf],
            n_values: vec![2000],
            replications: 20,
            seed: 505,
            test_points: 200,
            lambda: LambdaMode::Validation {
                lambda1_grid: vec![0.0, 0.1, 1.0, 10.0],
                lambda2_grid: vec![0.0, 0.1, 1.0, 10.0],
                validation_fraction: 0.3,
                tune_points: 25,
            },
            cart: TreeParams {
                min_leaf: 10,
                max_leaves: 100,
                ..Default::default()
            },
            forest: ForestParams {
                trees: 50,
                min_leaf: 10,
                max_leaves: 100,
                ..Default::default()
            },
            lb_forest: ForestParams {
                trees: 100,
                min_leaf: 5,
                max_leaves: 2000,
                ..Default::default()
            },
            lasso_alpha: 0.1,
            restarts: 2,
            grid_points: 101,
            missing_rate: 0.0,
            price_cap: 50.0,
            dose_bounds: (0.0, 100.0),
        };
        let report = run_benchmark(&config).map_err(|e| format!("benchmark failed: {e}"))?;
        let rf = report.cell(Method::Rf, 2000).unwrap().mean;
        let up_rf = report.cell(Method::UpRf, 2000).unwrap().mean;
        ensure!(
            up_rf > rf,
            "penalized forest revenue {up_rf:.0} did not beat the direct forest {rf:.0}"
        );
        let comparison = report.comparison(Method::UpRf, 2000).unwrap();
        ensure!(
            comparison.p_value_one_sided < 0.05,
            "one-sided p {} not significant (improvement {:.0})",
            comparison.p_value_one_sided,
            comparison.mean_improvement
        );
        println!(
            "  pricing: rf {rf:.0}, up-rf {up_rf:.0}, improvement {:.0}, one-sided p {:.2e}",
            comparison.mean_improvement, comparison.p_value_one_sided
        );
        Ok(())
    });
}

#[test]
fn criterion_6_dosing_benchmark() {
    report(6, "dosing benchmark", 1800.0, || {
        let config = BenchmarkConfig {
            experiment: Experiment::Dosing,
            methods: vec![
                Method::Cart,
                Method::UpCart,
                Method::Rf,
                Method::UpRf,
                Method::Lasso,
                Method::UpLasso,
                Method::ConstantDose,
                Method::OracleLb,
            ],
            n_values: vec![500, 4000],
            replications: 20,
            seed: 606,
            test_points: 200,
            lambda: LambdaMode::Fixed {
                lambda1: 1.0,
                lambda2: 0.5,
            },
            cart: TreeParams {
                min_leaf: 10,
                max_leaves: 100,
                ..Default::default()
            },
            forest: ForestParams {
                trees: 50,
                min_leaf: 10,
                max_leaves: 100,
                ..Default::default()
            },
            lb_forest: ForestParams {
                trees: 100,
                min_leaf: 5,
                max_leaves: 2000,
                ..Default::default()
            },
            lasso_alpha: 0.1,
            restarts: 2,
            grid_points: 101,
            missing_rate: 0.1,
            price_cap: 50.0,
            dose_bounds: (0.0, 100.0),
        };
        let report = run_benchmark(&config).map_err(|e| format!("benchmark failed: {e}"))?;
        let mse = |method: Method, n: usize| report.cell(method, n).unwrap().mean;

        let pairs = [
            (Method::UpCart, Method::Cart),
            (Method::UpRf, Method::Rf),
            (Method::UpLasso, Method::Lasso),
        ];
        for (up, direct) in pairs {
            let up_large = mse(up, 4000);
            let direct_large = mse(direct, 4000);
            ensure!(
                up_large < direct_large,
                "{} mse {up_large:.2} not below {} mse {direct_large:.2} at n=4000",
                up.name(),
                direct.name()
            );
            let gap_small = mse(direct, 500) - mse(up, 500);
            let gap_large = direct_large - up_large;
            ensure!(
                gap_small > gap_large,
                "{} gap {gap_small:.2} at n=500 not larger than {gap_large:.2} at n=4000",
                up.name()
            );
        }
        let constant = mse(Method::ConstantDose, 4000);
        for method in [
            Method::Cart,
            Method::UpCart,
            Method::Rf,
            Method::UpRf,
            Method::Lasso,
            Method::UpLasso,
        ] {
            ensure!(
                mse(method, 4000) < constant,
                "{} mse {:.2} did not beat the constant dose {constant:.2}",
                method.name(),
                mse(method, 4000)
            );
        }
        let lb = mse(Method::OracleLb, 4000);
        for &method in &config.methods {
            if method != Method::OracleLb {
                ensure!(
                    lb <= mse(method, 4000),
                    "reference lower bound {lb:.2} above {} ({:.2})",
                    method.name(),
                    mse(method, 4000)
                );
            }
        }
        for (up, direct) in pairs {
            println!(
                "  dosing n=4000: {} {:.2} vs {} {:.2} | n=500: {:.2} vs {:.2}",
                up.name(),
                mse(up, 4000),
                direct.name(),
                mse(direct, 4000),
                mse(up, 500),
                mse(direct, 500),
            );
        }
        println!("  dosing constant {constant:.2}, lower bound {lb:.2}");
        Ok(())
    });
}

#[test]
fn criterion_7_sensitivity_grid() {
    report(7, "penalty sensitivity grid", 1200.0, || {
        let config = BenchmarkConfig {
            experiment: Experiment::Dosing,
            methods: vec![Method::UpRf],
            n_values: vec![1000],
            replications: 10,
            seed: 707,
            test_points: 150,
            lambda: LambdaMode::Fixed {
                lambda1: 0.0,
                lambda2: 0.0,
            },
            cart: TreeParams {
                min_leaf: 10,
                max_leaves: 100,
                ..Default::default()
            },
            forest: ForestParams {
                trees: 40,
                min_leaf: 10,
                max_leaves: 80,
                ..Default::default()
            },
            lb_forest: ForestParams {
                trees: 100,
                min_leaf: 5,
                max_leaves: 2000,
                ..Default::default()
            },
            lasso_alpha: 0.1,
            restarts: 2,
            grid_points: 101,
            missing_rate: 0.1,
            price_cap: 50.0,
            dose_bounds: (0.0, 100.0),
        };
        let l1 = [0.0, 0.1, 0.5, 1.0, 100.0];
        let l2 = [0.0, 0.1, 0.5, 1.0];
        let grid = sensitivity_grid(&config, &l1, &l2).map_err(|e| format!("grid failed: {e}"))?;
        let baseline = grid.cell(0.0, 0.0).unwrap().mean_mse;
        let extreme = grid.cell(100.0, 0.0).unwrap().mean_mse;
        ensure!(
            extreme > baseline,
            "extreme cell {extreme:.2} not worse than unpenalized {baseline:.2}"
        );
        let nonzero: Vec<&prescript_core::experiments::SensitivityCell> = grid
            .cells
            .iter()
            .filter(|c| !(c.lambda1 == 0.0 && c.lambda2 == 0.0))
            .collect();
        let better = nonzero
            .iter()
            .filter(|c| c.mean_mse < baseline)
            .count();
        let fraction = better as f64 / nonzero.len() as f64;
        println!(
            "  sensitivity: unpenalized {baseline:.2}, extreme {extreme:.2}, {better}/{} cells better",
            nonzero.len()
        );
        ensure!(
            fraction >= 0.6,
            "only {better}/{} nonzero cells beat the unpenalized baseline",
            nonzero.len()
        );
        Ok(())
    });
}

#[test]
fn criterion_8_consistency_trend() {
    report(8, "regret consistency trend", 600.0, || {
        // 1-D problem with known objective (z - x)^2; the minimum-leaf size
        // grows with n so leaves shrink and the prescription converges.
        let queries = [-0.5, 0.0, 0.5];
        let space = DecisionSpace::bounded_box(vec![-2.0], vec![2.0]).unwrap();
        let cost = CostFunction::outcome();
        let mut medians = Vec::new();
        for (ni, &n) in [200usize, 800, 3200].iter().enumerate() {
            let mut regrets = Vec::new();
            for seed in 0..20u64 {
                let mut rng = stream_rng(808 + ni as u64, seed);
                let mut covariates = Vec::with_capacity(n);
                let mut decisions = Vec::with_capacity(n);
                let mut outcomes = Vec::with_capacity(n);
                for _ in 0..n {
                    let x: f64 = rng.random_range(-1.0..1.0);
                    let z = x + 0.7 * rng.random_range(-1.5..1.5);
                    let y = (z - x) * (z - x) + 0.5 * rng.random_range(-1.0..1.0);
                    covariates.push(vec![x]);
                    decisions.push(vec![z]);
                    outcomes.push(vec![y]);
                }
                let ds = ObservationalDataset::new(covariates, decisions, outcomes).unwrap();
                let min_leaf = (3.0 * (n as f64).powf(0.4)).ceil() as usize;
                let params = TreeParams {
                    min_leaf,
                    max_leaves: n,
                    seed,
                    ..Default::default()
                };
                let spec = LearnerSpec::Cart(params);
                let learner = FittedLearner::fit(&spec, &ds, FitTarget::Outcome).unwrap();
                let values = FitTarget::Outcome.values(&ds).unwrap();
                let sigma_sq = learner.noise_sigma_sq(&ds, &values);
                let cfg = PenaltyConfig::new(1.0, 1.0, sigma_sq, ObjectiveMode::Plain).unwrap();
                let FittedLearner::Cart(tree) = &learner else {
                    unreachable!()
                };
                let mut regret = 0.0;
                for &x in &queries {
                    let sol = optimize_tree(tree, &ds, &[x], &cost, &cfg, &space).unwrap();
                    regret += (sol.z[0] - x) * (sol.z[0] - x);
                }
                regrets.push(regret / queries.len() as f64);
            }
            regrets.sort_by(f64::total_cmp);
            let median = 0.5 * (regrets[9] + regrets[10]);
            medians.push(median);
        }
        println!(
            "  median regret: n=200 {:.4}, n=800 {:.4}, n=3200 {:.4}",
            medians[0], medians[1], medians[2]
        );
        ensure!(
            medians[0] > medians[1] && medians[1] > medians[2],
            "median regret not monotone: {medians:?}"
        );
        Ok(())
    });
}

/// The tiling property the per-leaf solver relies on: every query has at
/// least one feasible leaf, checked on the fitted trees used above.
#[test]
fn leaf_regions_tile_the_space() {
    let ds = random_dataset(200, 1, 1, 42);
    let cost = CostFunction::squared_distance(4.0, 16.0);
    let params = TreeParams {
        min_leaf: 8,
        max_leaves: 12,
        seed: 7,
        ..Default::default()
    };
    let tree = fit_honest_cart(&ds, FitTarget::Cost(&cost), &params).unwrap();
    let regions = enumerate_leaves(&tree);
    let mut rng = stream_rng(43, 0);
    for _ in 0..200 {
        let q = FeaturePoint::new(
            vec![rng.random_range(-2.0..2.0)],
            vec![rng.random_range(-2.0..2.0)],
        );
        let covering = regions.iter().filter(|r| r.contains(&q)).count();
        assert!(covering >= 1, "query {q:?} not covered");
    }
}
