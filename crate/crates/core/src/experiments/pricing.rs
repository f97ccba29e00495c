//! Synthetic multi-product pricing problem: a store sets five prices whose
//! demands depend on two exogenous covariates, the product's own price, and
//! cross-price effects (some products substitute, some complement). The
//! generator doubles as the ground-truth revenue evaluator.

use rand_distr::{Distribution, Normal};

use crate::data::ObservationalDataset;
use crate::error::Result;
use crate::objective::CostFunction;
use crate::rng::stream_rng;
use crate::space::DecisionSpace;

pub const PRICE_COUNT: usize = 5;
pub const COVARIATE_COUNT: usize = 2;
pub const DEFAULT_PRICE_CAP: f64 = 50.0;

/// Historical price means: `price_mean = COEF * x`.
pub const PRICE_COEF: [[f64; 2]; 5] = [
    [1.0, 0.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [0.0, 1.0],
    [0.5, 0.5],
];

const PRICE_NOISE_STD: f64 = 10.0; // variance 100
const DEMAND_NOISE_STD: f64 = 50.0; // variance 2500
const COVARIATE_MEAN: f64 = 10.0;

/// Mean historical price vector at covariates `x`.
pub fn price_mean(x: &[f64]) -> [f64; PRICE_COUNT] {
    std::array::from_fn(|k| PRICE_COEF[k][0] * x[0] + PRICE_COEF[k][1] * x[1])
}

/// Expected demand for each product at covariates `x` and prices `z`.
pub fn expected_demand(x: &[f64], z: &[f64]) -> [f64; PRICE_COUNT] {
    let (x1, x2) = (x[0], x[1]);
    [
        500.0 - z[0] * z[0] / 10.0 - x1 * z[0] / 10.0 - x1 * x1 / 10.0 - z[1],
        500.0 - z[1] * z[1] / 10.0 - x1 * z[1] / 10.0 - x1 * x1 / 10.0 - z[0],
        500.0 - z[2] * z[2] / 10.0 - x2 * z[2] / 10.0 - x2 * x2 / 10.0 + z[0] + z[1],
        500.0 - z[3] * z[3] / 10.0 - x2 * z[3] / 10.0 - x2 * x2 / 10.0 + z[0] + z[1],
        500.0 - z[4] * z[4] / 10.0 - x2 * z[4] / 20.0 - x1 * z[4] / 20.0 - x2 * x2 / 10.0,
    ]
}

/// Ground-truth expected revenue `z . mu(x, z)`; the out-of-sample metric.
pub fn pricing_true_revenue(x: &[f64], z: &[f64]) -> f64 {
    expected_demand(x, z)
        .iter()
        .zip(z)
        .map(|(mu, z)| mu * z)
        .sum()
}

/// Draw `n` records: covariates from N(10, 1), prices from
/// N(price_mean(x), 100 I), demands from N(mu(x, z), 2500 I).
pub fn generate_pricing_data(n: usize, seed: u64) -> Result<ObservationalDataset> {
    let mut rng = stream_rng(seed, 0);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let mut covariates = Vec::with_capacity(n);
    let mut decisions = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..COVARIATE_COUNT)
            .map(|_| COVARIATE_MEAN + std_normal.sample(&mut rng))
            .collect();
        let means = price_mean(&x);
        let z: Vec<f64> = (0..PRICE_COUNT)
            .map(|k| means[k] + PRICE_NOISE_STD * std_normal.sample(&mut rng))
            .collect();
        let mu = expected_demand(&x, &z);
        let y: Vec<f64> = (0..PRICE_COUNT)
            .map(|k| mu[k] + DEMAND_NOISE_STD * std_normal.sample(&mut rng))
            .collect();
        covariates.push(x);
        decisions.push(z);
        outcomes.push(y);
    }
    let mut ds = ObservationalDataset::new(covariates, decisions, outcomes)?;
    ds.covariate_names = vec!["x1".into(), "x2".into()];
    ds.decision_names = (1..=PRICE_COUNT).map(|k| format!("p{k}")).collect();
    ds.outcome_names = (1..=PRICE_COUNT).map(|k| format!("d{k}")).collect();
    Ok(ds)
}

/// Covariates-only draw for a fixed held-out test set.
pub fn generate_pricing_covariates(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, 1);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| {
            (0..COVARIATE_COUNT)
                .map(|_| COVARIATE_MEAN + std_normal.sample(&mut rng))
                .collect()
        })
        .collect()
}

/// Price box `[0, cap]^5`.
pub fn pricing_space(cap: f64) -> DecisionSpace {
    DecisionSpace::bounded_box(vec![0.0; PRICE_COUNT], vec![cap; PRICE_COUNT])
        .expect("static bounds")
}

/// Negative revenue `c(z; y) = -z . y`, so minimization maximizes revenue.
/// The declared constants reflect the demand scale; the unit-cost bound is
/// knowingly exceeded.
pub fn pricing_cost() -> CostFunction {
    CostFunction::neg_revenue(2000.0, 2.0e5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn demand_hand_substitution() {
        let x = [10.0, 10.0];
        let z = [10.0; 5];
        let mu = expected_demand(&x, &z);
        // Product 1: 500 - 100/10 - 100/10 - 100/10 - 10 = 460.
        assert_abs_diff_eq!(mu[0], 460.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[1], 460.0, epsilon = 1e-12);
        // Products 3 and 4 gain the substitute prices.
        assert_abs_diff_eq!(mu[2], 490.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[3], 490.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[4], 470.0, epsilon = 1e-12);
    }

    #[test]
    fn revenue_at_hand_point() {
        let x = [10.0, 10.0];
        let z = [10.0; 5];
        let total: f64 = expected_demand(&x, &z).iter().sum();
        assert_abs_diff_eq!(pricing_true_revenue(&x, &z), 10.0 * total, epsilon = 1e-9);
        assert_abs_diff_eq!(pricing_true_revenue(&x, &z), 23_700.0, epsilon = 1e-9);
        // Zero prices make zero revenue.
        assert_abs_diff_eq!(pricing_true_revenue(&x, &[0.0; 5]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn first_price_mean_tracks_first_covariate() {
        let means = price_mean(&[7.0, 13.0]);
        assert_abs_diff_eq!(means[0], 7.0);
        assert_abs_diff_eq!(means[1], 7.0);
        assert_abs_diff_eq!(means[2], 13.0);
        assert_abs_diff_eq!(means[4], 10.0);
    }

    #[test]
    fn covariate_moments_match_the_law() {
        let n = 100_000;
        let ds = generate_pricing_data(n, 99).unwrap();
        for j in 0..COVARIATE_COUNT {
            let mean: f64 = ds.covariates.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            let var: f64 = ds
                .covariates
                .iter()
                .map(|r| (r[j] - mean) * (r[j] - mean))
                .sum::<f64>()
                / (n - 1) as f64;
            // Three standard errors of the mean and of the variance.
            assert!(
                (mean - 10.0).abs() < 3.0 / (n as f64).sqrt(),
                "mean {mean}"
            );
            assert!(
                (var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(),
                "variance {var}"
            );
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_pricing_data(50, 7).unwrap();
        let b = generate_pricing_data(50, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_pricing_data(50, 8).unwrap();
        assert_ne!(a, c);
    }
}
