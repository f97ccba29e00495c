//! Linear learners: ordinary least squares, ridge, and an approximate lasso,
//! each exposing a closed-form predicted mean and a variance shaping matrix
//! so the prediction variance at `v = (x, z)` is `sigma^2 * v' M v`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::ObservationalDataset;
use crate::error::{Error, Result};
use crate::objective::FitTarget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Ols,
    Ridge,
    LassoApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    /// Coefficients over the concatenated `(x, z)` features.
    pub beta: Vec<f64>,
    /// Variance shaping matrix `M`, dense row-major.
    pub shaping: Vec<Vec<f64>>,
    /// Residual noise scale.
    pub sigma: f64,
    /// Regularization strength used at fit time.
    pub alpha: f64,
    /// Indices of nonzero coefficients (all of them for OLS/ridge).
    pub active: Vec<usize>,
    /// Lasso shrank every coefficient to zero; the model predicts the zero
    /// function with zero variance shaping.
    pub empty_active: bool,
    /// Worst stationarity violation of the lasso coordinate descent solution
    /// (diagnostic; zero for OLS/ridge).
    pub kkt_residual: f64,
    pub covariate_dim: usize,
    pub decision_dim: usize,
}

fn design_matrix(ds: &ObservationalDataset) -> DMatrix<f64> {
    let n = ds.n();
    let k = ds.feature_dim();
    DMatrix::from_fn(n, k, |i, j| ds.feature(i, j))
}

fn residual_sigma(a: &DMatrix<f64>, t: &DVector<f64>, beta: &DVector<f64>, active: usize) -> f64 {
    let n = a.nrows();
    let residual = t - a * beta;
    let rss = residual.norm_squared();
    if n > active {
        (rss / (n - active) as f64).sqrt()
    } else {
        0.0
    }
}

fn solve_with_shrinkage(
    ds: &ObservationalDataset,
    target: FitTarget<'_>,
    alpha: f64,
    kind: LinearKind,
) -> Result<LinearModel> {
    let a = design_matrix(ds);
    let t = DVector::from_vec(target.values(ds)?);
    let k = a.ncols();
    let mut gram = a.transpose() * &a;
    for j in 0..k {
        gram[(j, j)] += alpha;
    }
    let chol = gram.cholesky().ok_or(Error::SingularDesign)?;
    let atb = a.transpose() * &t;
    let beta = chol.solve(&atb);
    let shaping = chol.inverse();
    let sigma = residual_sigma(&a, &t, &beta, k);
    Ok(LinearModel {
        kind,
        beta: beta.iter().copied().collect(),
        shaping: (0..k)
            .map(|i| (0..k).map(|j| shaping[(i, j)]).collect())
            .collect(),
        sigma,
        alpha,
        active: (0..k).collect(),
        empty_active: false,
        kkt_residual: 0.0,
        covariate_dim: ds.covariate_dim(),
        decision_dim: ds.decision_dim(),
    })
}

/// Ordinary least squares: `beta = (A'A)^-1 A't`, `M = (A'A)^-1`. Errors on
/// a rank-deficient design; use [`fit_ridge`] for a regularized fallback.
pub fn fit_ols(ds: &ObservationalDataset, target: FitTarget<'_>) -> Result<LinearModel> {
    solve_with_shrinkage(ds, target, 0.0, LinearKind::Ols)
}

/// Ridge regression: `beta = (A'A + alpha I)^-1 A't` with matching shaping
/// matrix. `alpha = 0` reduces to OLS and shares its full-rank requirement.
pub fn fit_ridge(
    ds: &ObservationalDataset,
    target: FitTarget<'_>,
    alpha: f64,
) -> Result<LinearModel> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge alpha must be nonnegative, got {alpha}"
        )));
    }
    solve_with_shrinkage(ds, target, alpha, LinearKind::Ridge)
}

const LASSO_TOL: f64 = 1e-8;
const LASSO_MAX_SWEEPS: usize = 100_000;

fn soft_threshold(v: f64, alpha: f64) -> f64 {
    if v > alpha {
        v - alpha
    } else if v < -alpha {
        v + alpha
    } else {
        0.0
    }
}

/// Approximate lasso: cyclic coordinate descent with soft thresholding on
/// `0.5 ||t - A b||^2 + alpha ||b||_1`, then a shaping matrix restricted to
/// the active set via the weighted-ridge form of the penalty at the
/// solution.
pub fn fit_lasso_approx(
    ds: &ObservationalDataset,
    target: FitTarget<'_>,
    alpha: f64,
) -> Result<LinearModel> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lasso alpha must be positive, got {alpha}"
        )));
    }
    let a = design_matrix(ds);
    let t = DVector::from_vec(target.values(ds)?);
    let k = a.ncols();
    let gram = a.transpose() * &a;
    let atb = a.transpose() * &t;

    let mut beta = DVector::zeros(k);
    let mut gram_beta = DVector::zeros(k); // G * beta, maintained incrementally
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_change = 0.0f64;
        for j in 0..k {
            let gjj = gram[(j, j)];
            if gjj <= 0.0 {
                continue;
            }
            let old = beta[j];
            // Partial residual correlation with coordinate j.
            let rho = atb[j] - (gram_beta[j] - gjj * old);
            let new = soft_threshold(rho, alpha) / gjj;
            if new != old {
                let delta = new - old;
                for i in 0..k {
                    gram_beta[i] += delta * gram[(i, j)];
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < LASSO_TOL {
            break;
        }
    }

    // Stationarity diagnostic at the solution.
    let grad = &gram_beta - &atb;
    let mut kkt_residual = 0.0f64;
    for j in 0..k {
        let v = if beta[j] > 0.0 {
            (grad[j] + alpha).abs()
        } else if beta[j] < 0.0 {
            (grad[j] - alpha).abs()
        } else {
            (grad[j].abs() - alpha).max(0.0)
        };
        kkt_residual = kkt_residual.max(v);
    }

    let active: Vec<usize> = (0..k).filter(|&j| beta[j] != 0.0).collect();
    let mut shaping = vec![vec![0.0; k]; k];
    if !active.is_empty() {
        // Restricted (A'A + alpha W)^-1 with W = diag(1/|beta_j|), embedded
        // into the full matrix with zeros elsewhere.
        let m = active.len();
        let mut restricted = DMatrix::zeros(m, m);
        for (ri, &i) in active.iter().enumerate() {
            for (rj, &j) in active.iter().enumerate() {
                restricted[(ri, rj)] = gram[(i, j)];
            }
            restricted[(ri, ri)] += alpha / beta[i].abs();
        }
        let inv = restricted
            .cholesky()
            .ok_or(Error::SingularDesign)?
            .inverse();
        for (ri, &i) in active.iter().enumerate() {
            for (rj, &j) in active.iter().enumerate() {
                shaping[i][j] = inv[(ri, rj)];
            }
        }
    }

    let sigma = residual_sigma(&a, &t, &beta, active.len());
    let empty_active = active.is_empty();
    Ok(LinearModel {
        kind: LinearKind::LassoApprox,
        beta: beta.iter().copied().collect(),
        shaping,
        sigma,
        alpha,
        active,
        empty_active,
        kkt_residual,
        covariate_dim: ds.covariate_dim(),
        decision_dim: ds.decision_dim(),
    })
}

impl LinearModel {
    pub fn feature_dim(&self) -> usize {
        self.covariate_dim + self.decision_dim
    }

    /// Predicted mean at the concatenated feature vector.
    pub fn predict(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.beta).map(|(v, b)| v * b).sum()
    }

    /// Quadratic form `v' M v`, clamped to be nonnegative.
    pub fn variance_shape(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, vi) in v.iter().enumerate() {
            let mut row = 0.0;
            for (j, vj) in v.iter().enumerate() {
                row += self.shaping[i][j] * vj;
            }
            acc += vi * row;
        }
        acc.max(0.0)
    }

    pub fn norm_beta(&self) -> f64 {
        self.beta.iter().map(|b| b * b).sum::<f64>().sqrt()
    }
}

/// The linear family's decision objective
/// `v' beta + lambda1 * sigma * sqrt(v' M v)` with `v = (x, z)`. The bias
/// multiplier is fixed to zero for linear models.
pub fn linear_objective(model: &LinearModel, x: &[f64], z: &[f64], lambda1: f64) -> f64 {
    let mut v = Vec::with_capacity(model.feature_dim());
    v.extend_from_slice(x);
    v.extend_from_slice(z);
    model.predict(&v) + lambda1 * model.sigma * model.variance_shape(&v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn dataset_from_rows(rows: Vec<(Vec<f64>, Vec<f64>, f64)>) -> ObservationalDataset {
        let x = rows.iter().map(|(x, _, _)| x.clone()).collect();
        let z = rows.iter().map(|(_, z, _)| z.clone()).collect();
        let y = rows.iter().map(|(_, _, y)| vec![*y]).collect();
        ObservationalDataset::new(x, z, y).unwrap()
    }

    fn random_dataset(n: usize, d: usize, seed: u64, noise: f64) -> ObservationalDataset {
        let mut rng = stream_rng(seed, 0);
        let coef: Vec<f64> = (0..d + 1).map(|_| rng.random_range(-2.0..2.0)).collect();
        let rows = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let z = vec![rng.random_range(-1.0..1.0)];
                let mut y: f64 = x.iter().zip(&coef).map(|(a, b)| a * b).sum();
                y += z[0] * coef[d] + noise * rng.random_range(-1.0..1.0);
                (x, z, y)
            })
            .collect();
        dataset_from_rows(rows)
    }

    #[test]
    fn orthonormal_design_recovers_identity_shaping() {
        let ds = dataset_from_rows(vec![
            (vec![1.0], vec![0.0], 0.0),
            (vec![0.0], vec![1.0], 1.0),
        ]);
        let model = fit_ols(&ds, FitTarget::Outcome).unwrap();
        assert_abs_diff_eq!(model.beta[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(model.beta[1], 1.0, epsilon = 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(model.shaping[i][j], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn exact_fit_has_zero_noise() {
        let ds = ObservationalDataset::new(
            vec![vec![], vec![], vec![]],
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![vec![0.0], vec![1.0], vec![2.0]],
        )
        .unwrap();
        let model = fit_ols(&ds, FitTarget::Outcome).unwrap();
        assert_abs_diff_eq!(model.beta[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(model.sigma, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn duplicated_column_is_singular() {
        let ds = dataset_from_rows(vec![
            (vec![1.0], vec![1.0], 1.0),
            (vec![2.0], vec![2.0], 2.0),
            (vec![3.0], vec![3.0], 3.0),
        ]);
        assert!(matches!(
            fit_ols(&ds, FitTarget::Outcome),
            Err(Error::SingularDesign)
        ));
    }

    #[test]
    fn ridge_zero_equals_ols() {
        let ds = random_dataset(60, 3, 5, 0.3);
        let ols = fit_ols(&ds, FitTarget::Outcome).unwrap();
        let ridge = fit_ridge(&ds, FitTarget::Outcome, 0.0).unwrap();
        for (a, b) in ols.beta.iter().zip(&ridge.beta) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn ridge_shrinks_monotonically() {
        // Recompute the closed form at increasing alpha; the coefficient
        // norm must be nonincreasing.
        let ds = random_dataset(80, 4, 9, 0.5);
        let mut last = f64::INFINITY;
        for alpha in [0.1, 1.0, 10.0, 100.0] {
            let model = fit_ridge(&ds, FitTarget::Outcome, alpha).unwrap();
            let norm = model.norm_beta();
            assert!(
                norm <= last + 1e-10,
                "norm {norm} increased at alpha {alpha}"
            );
            last = norm;
        }
    }

    #[test]
    fn ridge_handles_rank_deficiency() {
        let ds = dataset_from_rows(vec![
            (vec![1.0], vec![1.0], 1.0),
            (vec![2.0], vec![2.0], 2.0),
            (vec![3.0], vec![3.0], 3.0),
        ]);
        let model = fit_ridge(&ds, FitTarget::Outcome, 1.0).unwrap();
        assert!(model.beta.iter().all(|b| b.is_finite()));
    }

    #[test]
    fn lasso_selects_the_relevant_feature() {
        // One truly relevant feature among 5; moderate alpha keeps it active.
        let mut rng = stream_rng(31, 0);
        let rows: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..200)
            .map(|_| {
                let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let z = vec![rng.random_range(-1.0..1.0)];
                let y = 3.0 * x[1] + 0.05 * rng.random_range(-1.0..1.0);
                (x, z, y)
            })
            .collect();
        let ds = dataset_from_rows(rows);
        let model = fit_lasso_approx(&ds, FitTarget::Outcome, 5.0).unwrap();
        assert!(model.active.contains(&1), "active set {:?}", model.active);
        assert!(model.kkt_residual < 1e-6);
        // Coefficients outside the active set are exactly zero.
        for (j, b) in model.beta.iter().enumerate() {
            if !model.active.contains(&j) {
                assert_eq!(*b, 0.0);
            }
        }
    }

    #[test]
    fn lasso_huge_alpha_empties_the_active_set() {
        let ds = random_dataset(50, 3, 77, 0.2);
        let model = fit_lasso_approx(&ds, FitTarget::Outcome, 1e9).unwrap();
        assert!(model.empty_active);
        assert!(model.beta.iter().all(|b| *b == 0.0));
        let v = vec![1.0; model.feature_dim()];
        assert_eq!(model.variance_shape(&v), 0.0);
    }

    #[test]
    fn lasso_small_alpha_approaches_ols() {
        let ds = random_dataset(120, 3, 15, 0.1);
        let ols = fit_ols(&ds, FitTarget::Outcome).unwrap();
        let lasso = fit_lasso_approx(&ds, FitTarget::Outcome, 1e-6).unwrap();
        for (a, b) in ols.beta.iter().zip(&lasso.beta) {
            assert!((a - b).abs() < 1e-3, "ols {a} vs lasso {b}");
        }
    }

    #[test]
    fn lasso_shaping_matches_weighted_ridge_reconstruction() {
        // Independent route: rebuild the restricted solution
        // (A'A + alpha W)^-1 A't on the active set and compare predictions
        // with the coordinate-descent solution on the training rows.
        let mut rng = stream_rng(55, 0);
        let rows: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..150)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let z = vec![rng.random_range(-1.0..1.0)];
                let y = 2.0 * x[0] - 1.5 * z[0] + 0.05 * rng.random_range(-1.0..1.0);
                (x, z, y)
            })
            .collect();
        let ds = dataset_from_rows(rows);
        let model = fit_lasso_approx(&ds, FitTarget::Outcome, 0.5).unwrap();
        assert!(!model.empty_active);

        let a = design_matrix(&ds);
        let t = DVector::from_vec(FitTarget::Outcome.values(&ds).unwrap());
        let k = a.ncols();
        let gram = a.transpose() * &a;
        let atb = a.transpose() * &t;
        let m = model.active.len();
        let mut restricted = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (ri, &i) in model.active.iter().enumerate() {
            for (rj, &j) in model.active.iter().enumerate() {
                restricted[(ri, rj)] = gram[(i, j)];
            }
            restricted[(ri, ri)] += 0.5 / model.beta[i].abs();
            rhs[ri] = atb[i];
        }
        let approx_restricted = restricted.cholesky().unwrap().solve(&rhs);
        let mut approx_beta = vec![0.0; k];
        for (ri, &i) in model.active.iter().enumerate() {
            approx_beta[i] = approx_restricted[ri];
        }
        for i in 0..ds.n() {
            let v: Vec<f64> = (0..k).map(|j| ds.feature(i, j)).collect();
            let cd: f64 = model.predict(&v);
            let approx: f64 = v.iter().zip(&approx_beta).map(|(a, b)| a * b).sum();
            assert!(
                (cd - approx).abs() < 1e-3,
                "coordinate descent {cd} vs closed-form approximation {approx}"
            );
        }
    }

    #[test]
    fn objective_examples() {
        let model = LinearModel {
            kind: LinearKind::Ols,
            beta: vec![0.0, 0.0],
            shaping: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            sigma: 1.0,
            alpha: 0.0,
            active: vec![0, 1],
            empty_active: false,
            kkt_residual: 0.0,
            covariate_dim: 1,
            decision_dim: 1,
        };
        // beta = 0, M = I, sigma = 1, v = (3,4), lambda1 = 1 -> 5.
        assert_abs_diff_eq!(linear_objective(&model, &[3.0], &[4.0], 1.0), 5.0, epsilon = 1e-12);
        // lambda1 = 0 -> plain prediction.
        assert_abs_diff_eq!(linear_objective(&model, &[3.0], &[4.0], 0.0), 0.0, epsilon = 1e-15);
        // Linearity in lambda1.
        let one = linear_objective(&model, &[3.0], &[4.0], 1.0);
        let two = linear_objective(&model, &[3.0], &[4.0], 2.0);
        assert_abs_diff_eq!(two - one, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_satisfies_normal_equations() {
        let ds = random_dataset(70, 3, 21, 0.4);
        let model = fit_ols(&ds, FitTarget::Outcome).unwrap();
        let a = design_matrix(&ds);
        let t = DVector::from_vec(FitTarget::Outcome.values(&ds).unwrap());
        let beta = DVector::from_vec(model.beta.clone());
        let grad = a.transpose() * (&a * &beta - &t);
        for g in grad.iter() {
            assert!(g.abs() < 1e-8, "normal equation residual {g}");
        }
    }

    proptest! {
        #[test]
        fn objective_is_convex_in_z(seed in 0u64..200, lambda1 in 0.0f64..3.0) {
            let ds = random_dataset(40, 2, seed, 0.5);
            let model = fit_ridge(&ds, FitTarget::Outcome, 0.1).unwrap();
            let mut rng = stream_rng(seed, 9);
            let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            for _ in 0..10 {
                let z1 = [rng.random_range(-3.0..3.0)];
                let z2 = [rng.random_range(-3.0..3.0)];
                let mid = [(z1[0] + z2[0]) / 2.0];
                let f1 = linear_objective(&model, &x, &z1, lambda1);
                let f2 = linear_objective(&model, &x, &z2, lambda1);
                let fm = linear_objective(&model, &x, &mid, lambda1);
                prop_assert!(fm <= 0.5 * (f1 + f2) + 1e-9);
            }
        }
    }
}
