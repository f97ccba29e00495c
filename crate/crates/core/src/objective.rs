//! Penalized prediction objective.
//!
//! From a weight vector `w`, a cost function `c`, and a query `(x, z)`, this
//! module assembles the decision objective
//!
//! ```text
//! mu(x,z) + lambda1 * sqrt(V(x,z)) + lambda2 * B(x,z)
//! ```
//!
//! where `mu` is the weighted predicted cost, `V = sigma^2 * sum w_i^2` is
//! the homoscedastic variance of that prediction, and `B` is the
//! weight-averaged Euclidean distance from the query to the training rows, an
//! upper bound on prediction bias under a Lipschitz cost.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::ObservationalDataset;
use crate::error::{Error, Result};
use crate::learner::{FittedLearner, LearnerSpec};
use crate::space::FeaturePoint;
use crate::weights::WeightVector;

/// Known cost function `c(z; y)` with its declared regularity constants.
#[derive(Clone)]
pub struct CostFunction {
    eval: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    /// Declared Lipschitz constant of `z -> c(z; y)`.
    pub lipschitz: f64,
    /// Declared bound on `|c|`. Values above 1 are allowed but flagged, since
    /// the theory module's constants assume a unit bound.
    pub bound: f64,
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostFunction")
            .field("lipschitz", &self.lipschitz)
            .field("bound", &self.bound)
            .finish()
    }
}

impl CostFunction {
    pub fn new(
        eval: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
        bound: f64,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            lipschitz,
            bound,
        }
    }

    /// `c(z; y) = y`, the outcome itself (scalar outcomes).
    pub fn outcome() -> Self {
        Self::new(|_z, y| y[0], 0.0, 1.0)
    }

    /// `c(z; y) = -z . y`: negative revenue, so minimizing the objective
    /// maximizes revenue.
    pub fn neg_revenue(lipschitz: f64, bound: f64) -> Self {
        Self::new(
            |z, y| -z.iter().zip(y).map(|(z, y)| z * y).sum::<f64>(),
            lipschitz,
            bound,
        )
    }

    /// `c(z; y) = ||z - y||^2` for decision and outcome of equal dimension.
    pub fn squared_distance(lipschitz: f64, bound: f64) -> Self {
        Self::new(
            |z, y| z.iter().zip(y).map(|(z, y)| (z - y) * (z - y)).sum::<f64>(),
            lipschitz,
            bound,
        )
    }

    #[inline]
    pub fn eval(&self, z: &[f64], y: &[f64]) -> f64 {
        (self.eval)(z, y)
    }

    /// The declared bound violates the unit-cost assumption the theory
    /// constants are stated under.
    pub fn exceeds_unit_bound(&self) -> bool {
        self.bound > 1.0
    }
}

/// What a learner is trained to predict: the scalar outcome itself, or the
/// realized cost of the logged decision.
#[derive(Debug, Clone, Copy)]
pub enum FitTarget<'a> {
    Outcome,
    Cost(&'a CostFunction),
}

impl FitTarget<'_> {
    /// Per-row training targets.
    pub fn values(&self, ds: &ObservationalDataset) -> Result<Vec<f64>> {
        match self {
            FitTarget::Outcome => {
                if ds.outcome_dim() != 1 {
                    return Err(Error::InvalidDataset(format!(
                        "outcome target requires a scalar outcome, got {} columns",
                        ds.outcome_dim()
                    )));
                }
                Ok((0..ds.n()).map(|i| ds.scalar_outcome(i)).collect())
            }
            FitTarget::Cost(cost) => Ok((0..ds.n())
                .map(|i| cost.eval(&ds.decisions[i], &ds.outcomes[i]))
                .collect()),
        }
    }
}

/// Whether the objective minimizes the predicted cost directly or the square
/// of the predicted mean outcome (used when the target response should be
/// driven to zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    Plain,
    SquaredMean,
}

/// Penalty multipliers and noise level for the decision objective. The noise
/// variance is tracked separately from `lambda1` so either convention
/// (folding sigma into the tuning parameter, or keeping it explicit) is
/// expressible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma_sq: f64,
    pub mode: ObjectiveMode,
}

impl PenaltyConfig {
    pub fn new(lambda1: f64, lambda2: f64, sigma_sq: f64, mode: ObjectiveMode) -> Result<Self> {
        let cfg = Self {
            lambda1,
            lambda2,
            sigma_sq,
            mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Penalties off; prediction minimization only.
    pub fn unpenalized(mode: ObjectiveMode) -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 0.0,
            sigma_sq: 0.0,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("sigma_sq", self.sigma_sq),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// The three objective terms at the reported decision: `mu` (predicted cost,
/// or squared predicted mean in squared-mean mode), `sqrt(V)`, and `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub mu: f64,
    pub sqrt_v: f64,
    pub bias: f64,
}

impl Decomposition {
    pub fn assemble(&self, cfg: &PenaltyConfig) -> f64 {
        self.mu + cfg.lambda1 * self.sqrt_v + cfg.lambda2 * self.bias
    }
}

/// Weighted predicted cost at decision `z`.
pub fn predicted_cost(
    w: &WeightVector,
    cost: &CostFunction,
    z: &[f64],
    ds: &ObservationalDataset,
) -> f64 {
    w.iter()
        .map(|(i, wi)| wi * cost.eval(z, &ds.outcomes[i]))
        .sum()
}

/// Weighted mean of the scalar outcomes.
pub fn predicted_outcome_mean(w: &WeightVector, ds: &ObservationalDataset) -> f64 {
    w.iter().map(|(i, wi)| wi * ds.scalar_outcome(i)).sum()
}

/// Homoscedastic prediction variance `sigma^2 * sum w_i^2`.
pub fn variance_penalty(w: &WeightVector, sigma_sq: f64) -> f64 {
    sigma_sq * w.sum_of_squares()
}

/// Weight-averaged Euclidean distance from the query to the training rows.
pub fn bias_penalty(w: &WeightVector, q: &FeaturePoint, ds: &ObservationalDataset) -> f64 {
    w.iter()
        .map(|(i, wi)| wi * ds.feature_distance(i, q))
        .sum()
}

/// Full penalized objective and its decomposition at query `q`.
pub fn penalized_objective(
    w: &WeightVector,
    q: &FeaturePoint,
    cost: &CostFunction,
    ds: &ObservationalDataset,
    cfg: &PenaltyConfig,
) -> (f64, Decomposition) {
    let mu = match cfg.mode {
        ObjectiveMode::Plain => predicted_cost(w, cost, &q.z, ds),
        ObjectiveMode::SquaredMean => {
            let mean = predicted_outcome_mean(w, ds);
            mean * mean
        }
    };
    let sqrt_v = variance_penalty(w, cfg.sigma_sq).sqrt();
    let bias = bias_penalty(w, q, ds);
    let decomposition = Decomposition { mu, sqrt_v, bias };
    (decomposition.assemble(cfg), decomposition)
}

/// Homoscedastic noise estimate: the training mean squared error of a
/// learner predicting the target from `(X, Z)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub sigma_sq: f64,
    /// True when the learner fit failed and the sample variance of the
    /// target was used instead.
    pub fallback: bool,
}

/// Fit the given learner to predict the target from `(X, Z)` and return the
/// training mean squared error as the homoscedastic noise variance. A
/// degenerate fit falls back to the sample variance of the target, flagged.
pub fn estimate_noise_variance(
    train: &ObservationalDataset,
    target: FitTarget<'_>,
    spec: &LearnerSpec,
) -> Result<NoiseEstimate> {
    let values = target.values(train)?;
    match FittedLearner::fit(spec, train, target) {
        Ok(model) => {
            let mse = model.training_mse(train, &values);
            Ok(NoiseEstimate {
                sigma_sq: mse,
                fallback: false,
            })
        }
        Err(_) => {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = if n < 2 {
                0.0
            } else {
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
            };
            Ok(NoiseEstimate {
                sigma_sq: var,
                fallback: true,
            })
        }
    }
}
