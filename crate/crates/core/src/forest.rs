//! Honest random forest: bootstrap-resampled honest trees with averaged
//! weight functions.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationalDataset;
use crate::error::{Error, Result};
use crate::objective::FitTarget;
use crate::rng::{derive_seed, stream_rng};
use crate::space::FeaturePoint;
use crate::tree::{grow_tree, tree_weights, TreeModel, TreeParams};
use crate::weights::WeightVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    /// Number of member trees.
    pub trees: usize,
    /// Minimum estimation rows per leaf of each member.
    pub min_leaf: usize,
    pub max_leaves: usize,
    /// Candidate features per split; `None` uses `ceil((d + p) / 3)`.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 50,
            min_leaf: 10,
            max_leaves: 100,
            features_per_split: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub params: ForestParams,
    pub n_rows: usize,
}

/// Fit `trees` honest trees, each on a bootstrap resample split into a
/// structure half (repeats kept) and an estimation half (deduplicated, so
/// every member weight stays within `1/min_leaf`).
pub fn fit_forest(
    train: &ObservationalDataset,
    target: FitTarget<'_>,
    params: &ForestParams,
) -> Result<ForestModel> {
    if params.trees < 1 {
        return Err(Error::InvalidParameter("forest needs >= 1 tree".into()));
    }
    let n = train.n();
    if n < 2 * params.min_leaf {
        return Err(Error::TooFewRows {
            rows: n,
            required: 2 * params.min_leaf,
        });
    }
    let targets = target.values(train)?;
    let dim = train.feature_dim();
    let features_per_split = Some(params.features_per_split.unwrap_or(dim.div_ceil(3)));
    let tree_params = TreeParams {
        min_leaf: params.min_leaf,
        max_leaves: params.max_leaves,
        honesty_fraction: 0.5,
        features_per_split,
        seed: params.seed,
    };

    let trees: Result<Vec<TreeModel>> = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let member_seed = derive_seed(params.seed, t as u64);
            let mut rng = stream_rng(member_seed, 0);
            // Bootstrap with replacement; draws arrive in random order, so
            // the first half serves as the structure multiset.
            let draws: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let structure = draws[..n / 2].to_vec();
            let mut estimation = draws[n / 2..].to_vec();
            estimation.sort_unstable();
            estimation.dedup();
            let mut member = tree_params.clone();
            member.seed = member_seed;
            let mut feature_rng = stream_rng(member_seed, 1);
            grow_tree(train, &targets, structure, estimation, &member, &mut feature_rng)
        })
        .collect();

    Ok(ForestModel {
        trees: trees?,
        params: params.clone(),
        n_rows: n,
    })
}

/// Uniform average of the member-tree weight vectors.
pub fn forest_weights(model: &ForestModel, q: &FeaturePoint) -> WeightVector {
    let members: Vec<WeightVector> = model.trees.iter().map(|t| tree_weights(t, q)).collect();
    WeightVector::average(&members)
}

impl ForestModel {
    /// Mean target prediction: average of member leaf means.
    pub fn predict_value(&self, q: &FeaturePoint, values: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_value(q, values)).sum();
        sum / self.trees.len() as f64
    }
}

/// Reusable scratch space for repeated forest weight queries during
/// optimization; avoids allocating a map per evaluation.
pub(crate) struct ForestScratch {
    acc: Vec<f64>,
    stamp: Vec<u32>,
    touched: Vec<usize>,
    generation: u32,
}

impl ForestScratch {
    pub fn new(n_rows: usize) -> Self {
        Self {
            acc: vec![0.0; n_rows],
            stamp: vec![0; n_rows],
            touched: Vec::new(),
            generation: 0,
        }
    }

    /// Accumulate averaged weights for `q`; afterwards `touched` lists the
    /// supported rows in deterministic (tree, leaf) order and `acc[i]` holds
    /// the averaged weight.
    fn gather(&mut self, model: &ForestModel, q: &FeaturePoint) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.fill(0);
            self.generation = 1;
        }
        self.touched.clear();
        let scale = 1.0 / model.trees.len() as f64;
        for tree in &model.trees {
            let leaf = tree.route(q);
            let est = tree.leaf_estimation(leaf);
            let w = scale / est.len() as f64;
            for &i in est {
                if self.stamp[i] != self.generation {
                    self.stamp[i] = self.generation;
                    self.acc[i] = 0.0;
                    self.touched.push(i);
                }
                self.acc[i] += w;
            }
        }
    }

    /// Penalized objective value at `q` using the averaged forest weights.
    pub fn objective(
        &mut self,
        model: &ForestModel,
        ds: &ObservationalDataset,
        q: &FeaturePoint,
        cost: &crate::objective::CostFunction,
        cfg: &crate::objective::PenaltyConfig,
    ) -> f64 {
        use crate::objective::ObjectiveMode;
        self.gather(model, q);
        let mut mu = 0.0;
        let mut sum_sq = 0.0;
        let mut bias = 0.0;
        match cfg.mode {
            ObjectiveMode::Plain => {
                for &i in &self.touched {
                    let w = self.acc[i];
                    mu += w * cost.eval(&q.z, &ds.outcomes[i]);
                    sum_sq += w * w;
                    bias += w * ds.feature_distance(i, q);
                }
            }
            ObjectiveMode::SquaredMean => {
                let mut mean = 0.0;
                for &i in &self.touched {
                    let w = self.acc[i];
                    mean += w * ds.scalar_outcome(i);
                    sum_sq += w * w;
                    bias += w * ds.feature_distance(i, q);
                }
                mu = mean * mean;
            }
        }
        mu + cfg.lambda1 * (cfg.sigma_sq * sum_sq).sqrt() + cfg.lambda2 * bias
    }
}
