//! Decision solvers for each learner family.
//!
//! Tree weights are piecewise constant over leaves, so the objective is
//! solved independently per leaf on the leaf's box intersected with the
//! decision space and the best leaf wins. Forest objectives are handled by
//! a seeded coordinate-descent heuristic over a per-coordinate
//! discretization. Linear objectives are convex and minimized by projected
//! gradient descent with diminishing steps. A brute-force grid oracle backs
//! all of them in tests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationalDataset;
use crate::error::{Error, Result};
use crate::forest::{forest_weights, ForestModel, ForestScratch};
use crate::linear::LinearModel;
use crate::objective::{
    penalized_objective, CostFunction, Decomposition, ObjectiveMode, PenaltyConfig,
};
use crate::rng::stream_rng;
use crate::space::{DecisionSpace, FeaturePoint};
use crate::tree::{enumerate_leaves, TreeModel};
use crate::weights::WeightVector;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub converged: bool,
}

/// A solved decision: the minimizer, its objective value, and the term
/// decomposition when the solver evaluates the full penalized objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prescription {
    pub z: Vec<f64>,
    pub value: f64,
    pub decomposition: Option<Decomposition>,
    /// Winning leaf id for tree solves.
    pub leaf: Option<usize>,
    /// Winning restart index for forest solves.
    pub restart: Option<usize>,
    pub diagnostics: SolverDiagnostics,
}

const GRID_GUARD: u128 = 100_000_000;

/// Exhaustive evaluation over the product grid (endpoints included), linear
/// constraints filtered, deterministic argmin with lexicographic tie-break.
pub fn grid_oracle(
    objective: impl Fn(&[f64]) -> f64,
    space: &DecisionSpace,
    resolution: usize,
) -> Result<Prescription> {
    space.validate()?;
    if resolution < 1 {
        return Err(Error::InvalidParameter("resolution must be >= 1".into()));
    }
    let p = space.dim();
    let total = (resolution as u128).pow(p as u32);
    if total > GRID_GUARD {
        return Err(Error::GridTooLarge {
            points: total,
            limit: GRID_GUARD,
        });
    }

    let axis = |k: usize, idx: usize| -> f64 {
        let lo = space.lower[k];
        let hi = space.upper[k];
        if resolution == 1 {
            lo
        } else {
            lo + (hi - lo) * idx as f64 / (resolution - 1) as f64
        }
    };

    let mut counters = vec![0usize; p];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut evaluated = 0usize;
    loop {
        let z: Vec<f64> = (0..p).map(|k| axis(k, counters[k])).collect();
        if space.constraints.iter().all(|c| c.satisfied(&z, 1e-9)) {
            let value = objective(&z);
            evaluated += 1;
            // Strict improvement keeps the lexicographically smallest argmin
            // because the grid is walked in lexicographic order.
            if best.as_ref().is_none_or(|(v, _)| value < *v) {
                best = Some((value, z));
            }
        }
        // Advance the last coordinate fastest.
        let mut k = p;
        loop {
            if k == 0 {
                break;
            }
            k -= 1;
            counters[k] += 1;
            if counters[k] < resolution {
                break;
            }
            counters[k] = 0;
            if k == 0 {
                let (value, z) = best.ok_or_else(|| {
                    Error::InfeasibleSpace("no feasible grid point".into())
                })?;
                return Ok(Prescription {
                    z,
                    value,
                    decomposition: None,
                    leaf: None,
                    restart: None,
                    diagnostics: SolverDiagnostics {
                        iterations: evaluated,
                        converged: true,
                    },
                });
            }
        }
    }
}

const GOLDEN_ITERS: usize = 90;

/// Golden-section minimization of a convex scalar function on `[lo, hi]`.
/// A function constant at the endpoints and midpoint is constant on the
/// whole interval (convexity), and the plateau midpoint is returned.
fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo <= 0.0 {
        return (lo, f(lo));
    }
    let mid = 0.5 * (lo + hi);
    let f_lo = f(lo);
    let f_hi = f(hi);
    let f_mid = f(mid);
    if f_lo == f_mid && f_mid == f_hi {
        return (mid, f_mid);
    }
    let invphi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_ITERS {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
        if b - a <= 1e-12 * (1.0 + a.abs() + b.abs()) {
            break;
        }
    }
    let inner = 0.5 * (a + b);
    let f_inner = f(inner);
    // Keep the best probe, covering boundary minima.
    let mut best = (inner, f_inner);
    for (z, v) in [(lo, f_lo), (hi, f_hi), (mid, f_mid), (c, fc), (d, fd)] {
        if v < best.1 {
            best = (z, v);
        }
    }
    best
}

/// Cyclic per-coordinate golden-section descent inside a box-plus-constraints
/// region. Starts at `start` (must be feasible) and stops when a full cycle
/// fails to improve.
fn coordinate_golden_min(
    f: &impl Fn(&[f64]) -> f64,
    region: &DecisionSpace,
    start: Vec<f64>,
    max_cycles: usize,
) -> (Vec<f64>, f64, usize, bool) {
    let mut z = start;
    let mut value = f(&z);
    let mut cycles = 0usize;
    let mut converged = false;
    while cycles < max_cycles {
        cycles += 1;
        let mut improved = false;
        for k in 0..region.dim() {
            let Some((lo, hi)) = region.coordinate_interval(&z, k) else {
                continue;
            };
            let (zk, fk) = golden_min(
                |v| {
                    let mut cand = z.clone();
                    cand[k] = v;
                    f(&cand)
                },
                lo,
                hi,
            );
            if fk < value - 1e-12 * (1.0 + value.abs()) {
                z[k] = zk;
                value = fk;
                improved = true;
            }
        }
        if !improved {
            converged = true;
            break;
        }
    }
    (z, value, cycles, converged)
}

/// A feasible starting point in a region: the box center when it satisfies
/// the constraints, otherwise the first feasible point of a coarse scan.
fn feasible_start(region: &DecisionSpace) -> Option<Vec<f64>> {
    let center = region.center();
    if region.constraints.iter().all(|c| c.satisfied(&center, 1e-12)) {
        return Some(center);
    }
    let scan = grid_oracle(|_| 0.0, region, 9).ok()?;
    Some(scan.z)
}

/// Solve the penalized objective over a tree model: one convex solve per
/// leaf whose region contains the query covariates and intersects the
/// decision space, best leaf wins (ties to the lowest leaf id). Leaf boxes
/// are treated as closed on both sides, so boundary queries evaluate both
/// adjacent leaves.
pub fn optimize_tree(
    model: &TreeModel,
    train: &ObservationalDataset,
    x: &[f64],
    cost: &CostFunction,
    cfg: &PenaltyConfig,
    space: &DecisionSpace,
) -> Result<Prescription> {
    cfg.validate()?;
    space.validate()?;
    if x.len() != model.covariate_dim {
        return Err(Error::InvalidParameter(format!(
            "query has {} covariates, model expects {}",
            x.len(),
            model.covariate_dim
        )));
    }
    if space.dim() != model.decision_dim {
        return Err(Error::InvalidParameter(
            "decision space dimension does not match the model".into(),
        ));
    }
    let d = model.covariate_dim;
    let p = model.decision_dim;
    let regions = enumerate_leaves(model);

    let solved: Vec<(f64, Vec<f64>, usize, usize, bool)> = regions
        .par_iter()
        .filter_map(|region| {
            // Covariate containment, closed on both sides.
            for k in 0..d {
                let (lo, hi) = region.bounds[k];
                if x[k] < lo || x[k] > hi {
                    return None;
                }
            }
            // Decision box: leaf interval intersected with the space box.
            let mut lower = Vec::with_capacity(p);
            let mut upper = Vec::with_capacity(p);
            for k in 0..p {
                let (leaf_lo, leaf_hi) = region.bounds[d + k];
                let lo = leaf_lo.max(space.lower[k]);
                let hi = leaf_hi.min(space.upper[k]);
                if lo > hi {
                    return None;
                }
                lower.push(lo);
                upper.push(hi);
            }
            let leaf_space = DecisionSpace {
                lower,
                upper,
                constraints: space.constraints.clone(),
            };
            let start = feasible_start(&leaf_space)?;

            let w = WeightVector::uniform(model.n_rows, &region.estimation);
            let sqrt_v = (cfg.sigma_sq * w.sum_of_squares()).sqrt();
            let mu_const = match cfg.mode {
                ObjectiveMode::SquaredMean => {
                    let mean = crate::objective::predicted_outcome_mean(&w, train);
                    Some(mean * mean)
                }
                ObjectiveMode::Plain => None,
            };
            let f = |z: &[f64]| -> f64 {
                let q = FeaturePoint::new(x.to_vec(), z.to_vec());
                let mu = match mu_const {
                    Some(m) => m,
                    None => crate::objective::predicted_cost(&w, cost, z, train),
                };
                let bias = if cfg.lambda2 == 0.0 {
                    0.0
                } else {
                    crate::objective::bias_penalty(&w, &q, train)
                };
                mu + cfg.lambda1 * sqrt_v + cfg.lambda2 * bias
            };

            let (z, value, cycles, converged) = if p == 1 {
                let (lo, hi) = leaf_space.coordinate_interval(&start, 0)?;
                let (zk, fk) = golden_min(|v| f(&[v]), lo, hi);
                (vec![zk], fk, 1, true)
            } else {
                coordinate_golden_min(&f, &leaf_space, start, 200)
            };
            Some((value, z, region.leaf, cycles, converged))
        })
        .collect();

    let best = solved
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)))
        .ok_or_else(|| {
            Error::InfeasibleSpace("no leaf intersects the feasible set".into())
        })?;
    let (_, z, leaf, cycles, converged) = best;

    let w = WeightVector::uniform(model.n_rows, model.leaf_estimation(leaf));
    let q = FeaturePoint::new(x.to_vec(), z.clone());
    let (value, decomposition) = penalized_objective(&w, &q, cost, train, cfg);
    Ok(Prescription {
        z,
        value,
        decomposition: Some(decomposition),
        leaf: Some(leaf),
        restart: None,
        diagnostics: SolverDiagnostics {
            iterations: cycles,
            converged,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestOptOptions {
    pub restarts: usize,
    pub grid_points: usize,
    pub max_cycles: usize,
    pub seed: u64,
}

impl Default for ForestOptOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            grid_points: 101,
            max_cycles: 100,
            seed: 0,
        }
    }
}

/// Coordinate-descent heuristic for forest objectives: from each seeded
/// random start, cycle coordinates and move to the best point of a uniform
/// discretization of the coordinate's feasible interval, stopping when no
/// move improves by more than 1e-9. Best restart wins.
pub fn optimize_forest(
    model: &ForestModel,
    train: &ObservationalDataset,
    x: &[f64],
    cost: &CostFunction,
    cfg: &PenaltyConfig,
    space: &DecisionSpace,
    opts: &ForestOptOptions,
) -> Result<Prescription> {
    cfg.validate()?;
    space.validate()?;
    if opts.restarts < 1 || opts.grid_points < 2 {
        return Err(Error::InvalidParameter(
            "forest optimizer needs restarts >= 1 and grid_points >= 2".into(),
        ));
    }
    let p = space.dim();
    let anchor = feasible_start(space)
        .ok_or_else(|| Error::InfeasibleSpace("no feasible starting point".into()))?;

    let runs: Vec<(f64, Vec<f64>, usize, usize, bool)> = (0..opts.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = stream_rng(opts.seed, restart as u64);
            let mut z: Vec<f64> = (0..p)
                .map(|k| {
                    let (lo, hi) = (space.lower[k], space.upper[k]);
                    if hi > lo {
                        rng.random_range(lo..=hi)
                    } else {
                        lo
                    }
                })
                .collect();
            if !space.constraints.iter().all(|c| c.satisfied(&z, 1e-12)) {
                z = space.repair_toward(&z, &anchor);
            }
            let mut scratch = ForestScratch::new(model.n_rows);
            let mut eval = |z: &[f64]| {
                let q = FeaturePoint::new(x.to_vec(), z.to_vec());
                scratch.objective(model, train, &q, cost, cfg)
            };
            let mut value = eval(&z);
            let mut cycles = 0usize;
            let mut converged = false;
            while cycles < opts.max_cycles {
                cycles += 1;
                let mut improved = false;
                for k in 0..p {
                    let Some((lo, hi)) = space.coordinate_interval(&z, k) else {
                        continue;
                    };
                    let mut best_v = value;
                    let mut best_zk = z[k];
                    for g in 0..opts.grid_points {
                        let czk = if opts.grid_points == 1 {
                            lo
                        } else {
                            lo + (hi - lo) * g as f64 / (opts.grid_points - 1) as f64
                        };
                        let mut cand = z.clone();
                        cand[k] = czk;
                        let v = eval(&cand);
                        if v < best_v - 1e-9 {
                            best_v = v;
                            best_zk = czk;
                        }
                    }
                    if best_zk != z[k] {
                        z[k] = best_zk;
                        value = best_v;
                        improved = true;
                    }
                }
                if !improved {
                    converged = true;
                    break;
                }
            }
            (value, z, restart, cycles, converged)
        })
        .collect();

    let (_, z, restart, cycles, converged) = runs
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)))
        .expect("at least one restart");

    let q = FeaturePoint::new(x.to_vec(), z.clone());
    let w = forest_weights(model, &q);
    let (value, decomposition) = penalized_objective(&w, &q, cost, train, cfg);
    Ok(Prescription {
        z,
        value,
        decomposition: Some(decomposition),
        leaf: None,
        restart: Some(restart),
        diagnostics: SolverDiagnostics {
            iterations: cycles,
            converged,
        },
    })
}

const PGD_MAX_ITERS: usize = 10_000;

/// Minimize the convex linear-model objective over the space by projected
/// gradient descent with diminishing steps: each candidate step is projected
/// onto the box, repaired onto the linear constraints by bisection toward
/// the feasible anchor, and the step size halves whenever it fails to
/// improve.
pub fn optimize_linear(
    model: &LinearModel,
    x: &[f64],
    lambda1: f64,
    space: &DecisionSpace,
    mode: ObjectiveMode,
) -> Result<Prescription> {
    space.validate()?;
    if x.len() != model.covariate_dim {
        return Err(Error::InvalidParameter(format!(
            "query has {} covariates, model expects {}",
            x.len(),
            model.covariate_dim
        )));
    }
    if space.dim() != model.decision_dim {
        return Err(Error::InvalidParameter(
            "decision space dimension does not match the model".into(),
        ));
    }
    if !(lambda1 >= 0.0 && lambda1.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda1 must be nonnegative, got {lambda1}"
        )));
    }
    let d = model.covariate_dim;
    let p = model.decision_dim;
    let k = d + p;
    let anchor = feasible_start(space)
        .ok_or_else(|| Error::InfeasibleSpace("no feasible starting point".into()))?;

    let assemble = |z: &[f64]| -> Vec<f64> {
        let mut v = Vec::with_capacity(k);
        v.extend_from_slice(x);
        v.extend_from_slice(z);
        v
    };
    let objective = |z: &[f64]| -> f64 {
        let v = assemble(z);
        let pred = model.predict(&v);
        let mu = match mode {
            ObjectiveMode::Plain => pred,
            ObjectiveMode::SquaredMean => pred * pred,
        };
        mu + lambda1 * model.sigma * model.variance_shape(&v).sqrt()
    };
    let gradient = |z: &[f64]| -> Vec<f64> {
        let v = assemble(z);
        let pred = model.predict(&v);
        let quad = model.variance_shape(&v);
        let mut grad = vec![0.0; p];
        for j in 0..p {
            let base = model.beta[d + j];
            grad[j] = match mode {
                ObjectiveMode::Plain => base,
                ObjectiveMode::SquaredMean => 2.0 * pred * base,
            };
        }
        if lambda1 > 0.0 && quad > 1e-30 {
            let scale = lambda1 * model.sigma / quad.sqrt();
            for j in 0..p {
                let mv: f64 = (0..k).map(|c| model.shaping[d + j][c] * v[c]).sum();
                grad[j] += scale * mv;
            }
        }
        grad
    };

    let mut z = anchor.clone();
    let mut value = objective(&z);
    let diameter = space.diameter().max(1e-12);
    let mut step = diameter;
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < PGD_MAX_ITERS {
        iterations += 1;
        let grad = gradient(&z);
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm * step < 1e-14 * (1.0 + diameter) {
            converged = true;
            break;
        }
        let raw: Vec<f64> = z.iter().zip(&grad).map(|(z, g)| z - step * g).collect();
        let mut cand = space.project_box(&raw);
        if !space.constraints.iter().all(|c| c.satisfied(&cand, 1e-12)) {
            cand = space.repair_toward(&cand, &anchor);
        }
        let cand_value = objective(&cand);
        if cand_value < value - 1e-15 * (1.0 + value.abs()) {
            z = cand;
            value = cand_value;
            step *= 1.25;
        } else {
            step *= 0.5;
            if step < 1e-13 * (1.0 + diameter) {
                converged = true;
                break;
            }
        }
    }

    let v = assemble(&z);
    let pred = model.predict(&v);
    let mu = match mode {
        ObjectiveMode::Plain => pred,
        ObjectiveMode::SquaredMean => pred * pred,
    };
    let sqrt_v = model.sigma * model.variance_shape(&v).sqrt();
    let value = mu + lambda1 * sqrt_v;
    Ok(Prescription {
        z,
        value,
        decomposition: Some(Decomposition {
            mu,
            sqrt_v,
            bias: 0.0,
        }),
        leaf: None,
        restart: None,
        diagnostics: SolverDiagnostics {
            iterations,
            converged,
        },
    })
}
