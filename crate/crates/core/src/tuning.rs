//! Penalty tuning by counterfactual imputation: fit an imputation forest on
//! a validation split, then pick the candidate (model, lambda1, lambda2)
//! whose validation prediction error plus imputed prescription cost is
//! smallest.

use serde::{Deserialize, Serialize};

use crate::data::ObservationalDataset;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, forest_weights, ForestModel, ForestParams};
use crate::learner::{FittedLearner, LearnerSpec, TargetKind};
use crate::objective::{
    predicted_cost, predicted_outcome_mean, CostFunction, FitTarget, ObjectiveMode,
    PenaltyConfig,
};
use crate::optimize::ForestOptOptions;
use crate::space::{DecisionSpace, FeaturePoint};

/// Forest fitted on validation data to impute outcomes (and hence costs) at
/// decisions that were never taken.
#[derive(Debug, Clone)]
pub struct ImputationModel {
    forest: ForestModel,
    validation: ObservationalDataset,
}

/// Fit the imputation forest on the validation rows, predicting the scalar
/// outcome from `(X, Z)`.
pub fn impute_counterfactuals(
    validation: &ObservationalDataset,
    params: &ForestParams,
) -> Result<ImputationModel> {
    let forest = fit_forest(validation, FitTarget::Outcome, params)
        .map_err(|e| Error::FitFailed(format!("imputation forest: {e}")))?;
    Ok(ImputationModel {
        forest,
        validation: validation.clone(),
    })
}

/// Imputation forest for vector outcomes, with splits driven by the realized
/// cost of the logged decisions.
pub fn impute_counterfactuals_cost(
    validation: &ObservationalDataset,
    cost: &CostFunction,
    params: &ForestParams,
) -> Result<ImputationModel> {
    let forest = fit_forest(validation, FitTarget::Cost(cost), params)
        .map_err(|e| Error::FitFailed(format!("imputation forest: {e}")))?;
    Ok(ImputationModel {
        forest,
        validation: validation.clone(),
    })
}

impl ImputationModel {
    /// Imputed scalar outcome at an arbitrary `(x, z)`.
    pub fn predict_outcome(&self, x: &[f64], z: &[f64]) -> f64 {
        let q = FeaturePoint::new(x.to_vec(), z.to_vec());
        let w = forest_weights(&self.forest, &q);
        predicted_outcome_mean(&w, &self.validation)
    }

    /// Imputed cost of prescribing `z` at `x` under the given objective
    /// mode.
    pub fn imputed_cost(
        &self,
        x: &[f64],
        z: &[f64],
        cost: &CostFunction,
        mode: ObjectiveMode,
    ) -> f64 {
        let q = FeaturePoint::new(x.to_vec(), z.to_vec());
        let w = forest_weights(&self.forest, &q);
        match mode {
            ObjectiveMode::Plain => predicted_cost(&w, cost, z, &self.validation),
            ObjectiveMode::SquaredMean => {
                let mean = predicted_outcome_mean(&w, &self.validation);
                mean * mean
            }
        }
    }
}

/// One tuning candidate: a learner spec with a penalty configuration,
/// fitted on the training part only.
#[derive(Debug, Clone)]
pub struct CandidateModel {
    pub spec: LearnerSpec,
    pub target: TargetKind,
    pub cfg: PenaltyConfig,
    pub learner: FittedLearner,
    /// Training-part targets the learner predicts.
    pub target_values: Vec<f64>,
}

impl CandidateModel {
    /// Fit on the training part. The candidate's noise variance comes from
    /// the learner's own training fit.
    pub fn fit(
        spec: LearnerSpec,
        train: &ObservationalDataset,
        target: TargetKind,
        cost: &CostFunction,
        lambda1: f64,
        lambda2: f64,
        mode: ObjectiveMode,
    ) -> Result<Self> {
        let fit_target = match target {
            TargetKind::Outcome => FitTarget::Outcome,
            TargetKind::Cost => FitTarget::Cost(cost),
        };
        let target_values = fit_target.values(train)?;
        let learner = FittedLearner::fit(&spec, train, fit_target)?;
        let sigma_sq = learner.noise_sigma_sq(train, &target_values);
        let cfg = PenaltyConfig::new(lambda1, lambda2, sigma_sq, mode)?;
        Ok(Self {
            spec,
            target,
            cfg,
            learner,
            target_values,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub mse: f64,
    pub imputed_cost: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub best: usize,
    pub scores: Vec<CandidateScore>,
}

/// Deterministic subset of validation rows used for prescription scoring:
/// everything when `limit` is zero or covers the set, otherwise evenly
/// spaced indices.
fn evaluation_rows(n: usize, limit: usize) -> Vec<usize> {
    if limit == 0 || limit >= n {
        (0..n).collect()
    } else {
        (0..limit).map(|i| i * n / limit).collect()
    }
}

/// Score every candidate by validation MSE plus `cost_weight` times the
/// mean imputed cost of its prescriptions on validation covariates, and
/// return the argmin (ties to the first candidate).
#[allow(clippy::too_many_arguments)]
pub fn select_model(
    candidates: &[CandidateModel],
    train: &ObservationalDataset,
    validation: &ObservationalDataset,
    imputer: &ImputationModel,
    cost: &CostFunction,
    space: &DecisionSpace,
    forest_opts: &ForestOptOptions,
    prescription_limit: usize,
    cost_weight: f64,
) -> Result<SelectionOutcome> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidates to select from".into()));
    }
    let rows = evaluation_rows(validation.n(), prescription_limit);
    let mut scores = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let fit_target = match candidate.target {
            TargetKind::Outcome => FitTarget::Outcome,
            TargetKind::Cost => FitTarget::Cost(cost),
        };
        let observed = fit_target.values(validation)?;
        let mut mse = 0.0;
        for i in 0..validation.n() {
            let q = validation.feature_point(i);
            let err = candidate.learner.predict_value(&q, &candidate.target_values)
                - observed[i];
            mse += err * err;
        }
        mse /= validation.n() as f64;

        let mut imputed = 0.0;
        for &i in &rows {
            let x = &validation.covariates[i];
            let prescription = candidate.learner.prescribe(
                train,
                x,
                cost,
                &candidate.cfg,
                space,
                forest_opts,
            )?;
            imputed += imputer.imputed_cost(x, &prescription.z, cost, candidate.cfg.mode);
        }
        imputed /= rows.len() as f64;

        scores.push(CandidateScore {
            mse,
            imputed_cost: imputed,
            score: mse + cost_weight * imputed,
        });
    }
    let best = scores
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.score.total_cmp(&b.score).then(ia.cmp(ib)))
        .map(|(i, _)| i)
        .unwrap();
    Ok(SelectionOutcome { best, scores })
}
