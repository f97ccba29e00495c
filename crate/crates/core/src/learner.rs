//! Unified learner layer: fit any supported model family from a spec,
//! predict, prescribe, and serialize model artifacts for the CLI.

use serde::{Deserialize, Serialize};

use crate::data::ObservationalDataset;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, forest_weights, ForestModel, ForestParams};
use crate::linear::{fit_lasso_approx, fit_ols, fit_ridge, LinearModel};
use crate::objective::{CostFunction, FitTarget, PenaltyConfig};
use crate::optimize::{
    optimize_forest, optimize_linear, optimize_tree, ForestOptOptions, Prescription,
};
use crate::space::{DecisionSpace, FeaturePoint};
use crate::tree::{fit_honest_cart, tree_weights, TreeModel, TreeParams};
use crate::weights::WeightVector;

/// Which model family to fit, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Cart(TreeParams),
    Forest(ForestParams),
    Ols,
    Ridge { alpha: f64 },
    Lasso { alpha: f64 },
}

/// A fitted model of any family. Tree-family members expose weight vectors;
/// the linear family exposes a closed-form mean and variance shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedLearner {
    Cart(TreeModel),
    Forest(ForestModel),
    Linear(LinearModel),
}

impl FittedLearner {
    pub fn fit(
        spec: &LearnerSpec,
        train: &ObservationalDataset,
        target: FitTarget<'_>,
    ) -> Result<Self> {
        Ok(match spec {
            LearnerSpec::Cart(params) => Self::Cart(fit_honest_cart(train, target, params)?),
            LearnerSpec::Forest(params) => Self::Forest(fit_forest(train, target, params)?),
            LearnerSpec::Ols => Self::Linear(fit_ols(train, target)?),
            LearnerSpec::Ridge { alpha } => Self::Linear(fit_ridge(train, target, *alpha)?),
            LearnerSpec::Lasso { alpha } => {
                Self::Linear(fit_lasso_approx(train, target, *alpha)?)
            }
        })
    }

    /// Weight vector at a query, for the tree family.
    pub fn weights(&self, q: &FeaturePoint) -> Option<WeightVector> {
        match self {
            Self::Cart(tree) => Some(tree_weights(tree, q)),
            Self::Forest(forest) => Some(forest_weights(forest, q)),
            Self::Linear(_) => None,
        }
    }

    /// Predicted target at a query. `values` are the per-row training
    /// targets for the weight-based families; the linear family predicts
    /// from its coefficients.
    pub fn predict_value(&self, q: &FeaturePoint, values: &[f64]) -> f64 {
        match self {
            Self::Cart(tree) => tree.predict_value(q, values),
            Self::Forest(forest) => forest.predict_value(q, values),
            Self::Linear(model) => model.predict(&q.concat()),
        }
    }

    /// Mean squared error of the fitted model predicting the training
    /// targets.
    pub fn training_mse(&self, train: &ObservationalDataset, values: &[f64]) -> f64 {
        let n = train.n();
        let mut acc = 0.0;
        for i in 0..n {
            let q = train.feature_point(i);
            let err = self.predict_value(&q, values) - values[i];
            acc += err * err;
        }
        acc / n as f64
    }

    /// Residual noise scale: the linear family's fitted sigma, or the square
    /// root of the training MSE for the weight families.
    pub fn noise_sigma_sq(&self, train: &ObservationalDataset, values: &[f64]) -> f64 {
        match self {
            Self::Linear(model) => model.sigma * model.sigma,
            _ => self.training_mse(train, values),
        }
    }

    /// Solve the penalized decision problem at covariates `x`. The linear
    /// family uses its own fitted noise scale and a zero bias multiplier.
    pub fn prescribe(
        &self,
        train: &ObservationalDataset,
        x: &[f64],
        cost: &CostFunction,
        cfg: &PenaltyConfig,
        space: &DecisionSpace,
        forest_opts: &ForestOptOptions,
    ) -> Result<Prescription> {
        match self {
            Self::Cart(tree) => optimize_tree(tree, train, x, cost, cfg, space),
            Self::Forest(forest) => {
                optimize_forest(forest, train, x, cost, cfg, space, forest_opts)
            }
            Self::Linear(model) => optimize_linear(model, x, cfg.lambda1, space, cfg.mode),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Linear(_))
    }
}

/// Built-in cost function kinds for serialized configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// `c(z; y) = y` (scalar outcome).
    Outcome,
    /// `c(z; y) = -z . y` (negative revenue).
    NegRevenue,
    /// `c(z; y) = ||z - y||^2`.
    SquaredDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub kind: CostKind,
    /// Declared Lipschitz constant in `z`; defaults to 1.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    /// Declared bound on `|c|`; defaults to 1.
    #[serde(default)]
    pub bound: Option<f64>,
}

impl Default for CostSpec {
    fn default() -> Self {
        Self {
            kind: CostKind::Outcome,
            lipschitz: None,
            bound: None,
        }
    }
}

impl CostSpec {
    pub fn to_cost_function(self) -> CostFunction {
        let l = self.lipschitz.unwrap_or(1.0);
        let b = self.bound.unwrap_or(1.0);
        match self.kind {
            CostKind::Outcome => CostFunction::new(|_z, y| y[0], 0.0, b),
            CostKind::NegRevenue => CostFunction::neg_revenue(l, b),
            CostKind::SquaredDistance => CostFunction::squared_distance(l, b),
        }
    }
}

/// Serializable target choice mirrored from [`FitTarget`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Outcome,
    Cost,
}

/// Self-contained serialized model: the fitted learner, the target and cost
/// it was trained under, and (for weight families) the training data its
/// leaf indices refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub learner: FittedLearner,
    pub target: TargetKind,
    pub cost: CostSpec,
    /// Estimated homoscedastic noise variance from the training fit.
    pub sigma_sq: f64,
    /// Embedded training data; required for prescribing with weight-based
    /// families, absent for linear models.
    pub train: Option<ObservationalDataset>,
    /// Covariate scaler applied at fit time; queries must be mapped through
    /// it before prescribing.
    #[serde(default)]
    pub normalization: Option<crate::data::Normalization>,
}

impl ModelArtifact {
    pub fn build(
        spec: &LearnerSpec,
        train: &ObservationalDataset,
        target: TargetKind,
        cost_spec: CostSpec,
    ) -> Result<Self> {
        let cost = cost_spec.to_cost_function();
        let fit_target = match target {
            TargetKind::Outcome => FitTarget::Outcome,
            TargetKind::Cost => FitTarget::Cost(&cost),
        };
        let values = fit_target.values(train)?;
        let learner = FittedLearner::fit(spec, train, fit_target)?;
        let sigma_sq = learner.noise_sigma_sq(train, &values);
        let normalization = train.normalization.clone();
        let train = if learner.is_linear() {
            None
        } else {
            Some(train.clone())
        };
        Ok(Self {
            learner,
            target,
            cost: cost_spec,
            sigma_sq,
            train,
            normalization,
        })
    }

    /// Map raw query covariates into the model's units.
    pub fn transform_query(&self, x: &[f64]) -> Vec<f64> {
        match &self.normalization {
            Some(norm) => norm.apply(x),
            None => x.to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Prescribe at covariates `x`. The artifact's embedded training data
    /// backs the weight-based families.
    pub fn prescribe(
        &self,
        x: &[f64],
        cfg: &PenaltyConfig,
        space: &DecisionSpace,
        forest_opts: &ForestOptOptions,
    ) -> Result<Prescription> {
        let cost = self.cost.to_cost_function();
        let empty;
        let train = match (&self.train, self.learner.is_linear()) {
            (Some(train), _) => train,
            (None, true) => {
                empty = ObservationalDataset {
                    covariates: vec![vec![]],
                    decisions: vec![vec![0.0]],
                    outcomes: vec![vec![0.0]],
                    covariate_names: vec![],
                    decision_names: vec!["z1".into()],
                    outcome_names: vec!["y1".into()],
                    normalization: None,
                };
                &empty
            }
            (None, false) => {
                return Err(Error::InvalidParameter(
                    "model artifact is missing its training data".into(),
                ))
            }
        };
        self.learner
            .prescribe(train, x, &cost, cfg, space, forest_opts)
    }
}
