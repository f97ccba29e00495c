//! Benchmark harness: seeded replications of the pricing and dosing
//! problems, paired method comparisons with Wilcoxon signed-rank tests, and
//! the penalty sensitivity grid.

pub mod dosing;
pub mod pricing;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationalDataset;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams};
use crate::learner::{FittedLearner, LearnerSpec, TargetKind};
use crate::objective::{CostFunction, FitTarget, ObjectiveMode, PenaltyConfig};
use crate::optimize::ForestOptOptions;
use crate::rng::derive_seed;
use crate::space::DecisionSpace;
use crate::stats::{bonferroni, wilcoxon_signed_rank, Alternative};
use crate::theory::{theory_lambdas, TheoryInputs};
use crate::tree::TreeParams;
use crate::tuning::{
    impute_counterfactuals, impute_counterfactuals_cost, select_model, CandidateModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Pricing,
    Dosing,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Pricing => "pricing",
            Experiment::Dosing => "dosing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Cart,
    UpCart,
    Rf,
    UpRf,
    Lasso,
    UpLasso,
    ConstantDose,
    OracleLb,
}

impl Method {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "cart" => Method::Cart,
            "up-cart" => Method::UpCart,
            "rf" => Method::Rf,
            "up-rf" => Method::UpRf,
            "lasso" => Method::Lasso,
            "up-lasso" => Method::UpLasso,
            "constant-dose" => Method::ConstantDose,
            "oracle-lb" => Method::OracleLb,
            other => return Err(Error::UnknownMethod(other.into())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Cart => "cart",
            Method::UpCart => "up-cart",
            Method::Rf => "rf",
            Method::UpRf => "up-rf",
            Method::Lasso => "lasso",
            Method::UpLasso => "up-lasso",
            Method::ConstantDose => "constant-dose",
            Method::OracleLb => "oracle-lb",
        }
    }

    /// The unpenalized analogue of a penalized method.
    pub fn direct_analogue(&self) -> Option<Method> {
        match self {
            Method::UpCart => Some(Method::Cart),
            Method::UpRf => Some(Method::Rf),
            Method::UpLasso => Some(Method::Lasso),
            _ => None,
        }
    }

    fn is_penalized(&self) -> bool {
        self.direct_analogue().is_some()
    }
}

/// How the penalty multipliers are chosen for the penalized methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaMode {
    Fixed {
        lambda1: f64,
        lambda2: f64,
    },
    /// Counterfactual-imputation tuning over a grid on an inner
    /// training/validation split.
    Validation {
        lambda1_grid: Vec<f64>,
        lambda2_grid: Vec<f64>,
        validation_fraction: f64,
        /// Validation covariates prescribed per candidate (0 = all).
        tune_points: usize,
    },
    /// Bound-driven choice from the problem constants.
    Theory {
        delta: f64,
        weight_lipschitz: f64,
        cost_lipschitz: f64,
    },
}

impl Default for LambdaMode {
    fn default() -> Self {
        LambdaMode::Validation {
            lambda1_grid: vec![0.0, 0.1, 1.0, 10.0],
            lambda2_grid: vec![0.0, 0.1, 1.0, 10.0],
            validation_fraction: 0.3,
            tune_points: 25,
        }
    }
}

fn default_test_points() -> usize {
    500
}
fn default_replications() -> usize {
    20
}
fn default_cart_params() -> TreeParams {
    TreeParams {
        min_leaf: 10,
        max_leaves: 100,
        ..Default::default()
    }
}
fn default_forest_params() -> ForestParams {
    ForestParams {
        trees: 50,
        min_leaf: 10,
        max_leaves: 100,
        ..Default::default()
    }
}
fn default_lb_forest_params() -> ForestParams {
    // The reference lower bound regresses the known optimum directly; give
    // it enough resolution to play that role (deep bagged trees, every
    // feature a split candidate).
    ForestParams {
        trees: 100,
        min_leaf: 5,
        max_leaves: 2000,
        features_per_split: Some(usize::MAX),
        ..Default::default()
    }
}
fn default_lasso_alpha() -> f64 {
    0.1
}
fn default_restarts() -> usize {
    3
}
fn default_grid_points() -> usize {
    101
}
fn default_missing_rate() -> f64 {
    0.1
}
fn default_price_cap() -> f64 {
    pricing::DEFAULT_PRICE_CAP
}
fn default_dose_bounds() -> (f64, f64) {
    (0.0, dosing::DEFAULT_DOSE_MAX)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub experiment: Experiment,
    pub methods: Vec<Method>,
    pub n_values: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_points")]
    pub test_points: usize,
    #[serde(default)]
    pub lambda: LambdaMode,
    #[serde(default = "default_cart_params")]
    pub cart: TreeParams,
    #[serde(default = "default_forest_params")]
    pub forest: ForestParams,
    #[serde(default = "default_lb_forest_params")]
    pub lb_forest: ForestParams,
    #[serde(default = "default_lasso_alpha")]
    pub lasso_alpha: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_missing_rate")]
    pub missing_rate: f64,
    #[serde(default = "default_price_cap")]
    pub price_cap: f64,
    #[serde(default = "default_dose_bounds")]
    pub dose_bounds: (f64, f64),
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.n_values.is_empty() {
            return Err(Error::InvalidParameter(
                "methods and n_values must be nonempty".into(),
            ));
        }
        if self.replications < 1 || self.test_points < 1 {
            return Err(Error::InvalidParameter(
                "replications and test_points must be >= 1".into(),
            ));
        }
        if self.experiment == Experiment::Pricing {
            for m in &self.methods {
                if matches!(m, Method::ConstantDose | Method::OracleLb) {
                    return Err(Error::MethodNotApplicable(
                        m.name().into(),
                        self.experiment.name().into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn space(&self) -> Result<DecisionSpace> {
        match self.experiment {
            Experiment::Pricing => Ok(pricing::pricing_space(self.price_cap)),
            Experiment::Dosing => dosing::dosing_space(self.dose_bounds.0, self.dose_bounds.1),
        }
    }

    fn cost(&self) -> CostFunction {
        match self.experiment {
            Experiment::Pricing => pricing::pricing_cost(),
            Experiment::Dosing => CostFunction::outcome(),
        }
    }

    fn mode(&self) -> ObjectiveMode {
        match self.experiment {
            Experiment::Pricing => ObjectiveMode::Plain,
            Experiment::Dosing => ObjectiveMode::SquaredMean,
        }
    }

    fn target(&self) -> TargetKind {
        match self.experiment {
            Experiment::Pricing => TargetKind::Cost,
            Experiment::Dosing => TargetKind::Outcome,
        }
    }
}

/// Per-method, per-n replication metrics. Pricing reports mean true revenue
/// (higher is better); dosing reports mean squared dose error (lower is
/// better).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCell {
    pub method: Method,
    pub n: usize,
    pub metrics: Vec<f64>,
    pub mean: f64,
}

/// Paired comparison of a penalized method against its direct analogue at
/// one training size. `mean_improvement` is oriented so positive favors the
/// penalized method; the one-sided p-value tests that orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub penalized: Method,
    pub direct: Method,
    pub n: usize,
    pub mean_improvement: f64,
    pub statistic: f64,
    pub p_value_one_sided: f64,
    pub p_value_two_sided: f64,
    /// Two-sided p-value Bonferroni-adjusted across the comparisons sharing
    /// this training size.
    pub p_value_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub experiment: Experiment,
    pub config: BenchmarkConfig,
    pub cells: Vec<MethodCell>,
    pub comparisons: Vec<Comparison>,
    /// Wall-clock seconds; excluded from serialized reports so reruns with
    /// one seed are byte-identical.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

impl BenchmarkReport {
    pub fn cell(&self, method: Method, n: usize) -> Option<&MethodCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.n == n)
    }

    pub fn comparison(&self, penalized: Method, n: usize) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.penalized == penalized && c.n == n)
    }

    /// Figure-ready long format: one row per (method, n, replication).
    pub fn to_curves_csv(&self) -> String {
        let mut out = String::from("method,n,replication,metric\n");
        for cell in &self.cells {
            for (rep, metric) in cell.metrics.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    cell.method.name(),
                    cell.n,
                    rep,
                    metric
                ));
            }
        }
        out
    }
}

/// Fixed held-out test set shared by every replication.
enum TestSet {
    Pricing(Vec<Vec<f64>>),
    Dosing {
        covariates: Vec<Vec<f64>>,
        optimal: Vec<f64>,
    },
}

impl TestSet {
    fn covariates(&self) -> &[Vec<f64>] {
        match self {
            TestSet::Pricing(x) => x,
            TestSet::Dosing { covariates, .. } => covariates,
        }
    }
}

/// Everything one replication needs.
struct ReplicationContext<'a> {
    config: &'a BenchmarkConfig,
    test: &'a TestSet,
    space: DecisionSpace,
    cost: CostFunction,
    mode: ObjectiveMode,
    target: TargetKind,
    rep_seed: u64,
}

impl ReplicationContext<'_> {
    fn fit_target(&self) -> FitTarget<'_> {
        match self.target {
            TargetKind::Outcome => FitTarget::Outcome,
            TargetKind::Cost => FitTarget::Cost(&self.cost),
        }
    }

    fn learner_spec(&self, method: Method) -> LearnerSpec {
        match method {
            Method::Cart | Method::UpCart => {
                let mut params = self.config.cart.clone();
                params.seed = derive_seed(self.rep_seed, 11);
                LearnerSpec::Cart(params)
            }
            Method::Rf | Method::UpRf => {
                let mut params = self.config.forest.clone();
                params.seed = derive_seed(self.rep_seed, 12);
                LearnerSpec::Forest(params)
            }
            Method::Lasso | Method::UpLasso => LearnerSpec::Lasso {
                alpha: self.config.lasso_alpha,
            },
            Method::ConstantDose | Method::OracleLb => unreachable!("no learner"),
        }
    }

    fn forest_opts(&self, stream: u64) -> ForestOptOptions {
        ForestOptOptions {
            restarts: self.config.restarts,
            grid_points: self.config.grid_points,
            max_cycles: 100,
            seed: derive_seed(self.rep_seed, 900 + stream),
        }
    }

    /// Penalty multipliers for a penalized method: fixed, theory-driven, or
    /// tuned on an inner split.
    fn resolve_penalized(
        &self,
        method: Method,
        train: &ObservationalDataset,
    ) -> Result<(FittedLearner, Vec<f64>, PenaltyConfig)> {
        let spec = self.learner_spec(method);
        let linear = matches!(method, Method::UpLasso);
        match &self.config.lambda {
            LambdaMode::Fixed { lambda1, lambda2 } => {
                let fitted = FittedLearner::fit(&spec, train, self.fit_target())?;
                let values = self.fit_target().values(train)?;
                let sigma_sq = fitted.noise_sigma_sq(train, &values);
                let lambda2 = if linear { 0.0 } else { *lambda2 };
                Ok((
                    fitted,
                    values,
                    PenaltyConfig::new(*lambda1, lambda2, sigma_sq, self.mode)?,
                ))
            }
            LambdaMode::Theory {
                delta,
                weight_lipschitz,
                cost_lipschitz,
            } => {
                let fitted = FittedLearner::fit(&spec, train, self.fit_target())?;
                let values = self.fit_target().values(train)?;
                let sigma_sq = fitted.noise_sigma_sq(train, &values);
                let (max_regions, min_leaf, alpha) = match method {
                    Method::UpCart => (self.config.cart.max_leaves, self.config.cart.min_leaf, 0.0),
                    Method::UpRf => (
                        self.config.forest.max_leaves,
                        self.config.forest.min_leaf,
                        *weight_lipschitz,
                    ),
                    _ => (1, 1, *weight_lipschitz),
                };
                let inputs = TheoryInputs {
                    max_regions,
                    min_leaf,
                    diameter: feature_diameter(train, &self.space),
                    weight_lipschitz: alpha,
                    cost_lipschitz: *cost_lipschitz,
                    decision_dim: self.space.dim(),
                    delta: *delta,
                };
                let (lambda1, lambda2) = theory_lambdas(&inputs);
                let lambda2 = if linear { 0.0 } else { lambda2 };
                Ok((
                    fitted,
                    values,
                    PenaltyConfig::new(lambda1, lambda2, sigma_sq, self.mode)?,
                ))
            }
            LambdaMode::Validation {
                lambda1_grid,
                lambda2_grid,
                validation_fraction,
                tune_points,
            } => {
                let (part, validation) = crate::data::train_validation_split(
                    train,
                    *validation_fraction,
                    derive_seed(self.rep_seed, 21),
                )?;
                let mut imputer_params = self.config.forest.clone();
                imputer_params.seed = derive_seed(self.rep_seed, 22);
                let imputer = match self.mode {
                    ObjectiveMode::SquaredMean => {
                        impute_counterfactuals(&validation, &imputer_params)?
                    }
                    ObjectiveMode::Plain => {
                        impute_counterfactuals_cost(&validation, &self.cost, &imputer_params)?
                    }
                };
                let lambda2_grid: &[f64] = if linear { &[0.0] } else { lambda2_grid };
                let mut candidates = Vec::new();
                let mut spec_for_part = self.learner_spec(method);
                if let LearnerSpec::Cart(p) = &mut spec_for_part {
                    p.seed = derive_seed(self.rep_seed, 23);
                }
                if let LearnerSpec::Forest(p) = &mut spec_for_part {
                    p.seed = derive_seed(self.rep_seed, 23);
                }
                // The fitted learner does not depend on the multipliers, so
                // fit once and share it across the grid.
                let shared = CandidateModel::fit(
                    spec_for_part.clone(),
                    &part,
                    self.target,
                    &self.cost,
                    0.0,
                    0.0,
                    self.mode,
                )?;
                for &l1 in lambda1_grid {
                    for &l2 in lambda2_grid {
                        let mut candidate = shared.clone();
                        candidate.cfg.lambda1 = l1;
                        candidate.cfg.lambda2 = l2;
                        candidates.push(candidate);
                    }
                }
                let outcome = select_model(
                    &candidates,
                    &part,
                    &validation,
                    &imputer,
                    &self.cost,
                    &self.space,
                    &self.forest_opts(40),
                    *tune_points,
                    1.0,
                )?;
                let winner = &candidates[outcome.best];
                Ok((
                    winner.learner.clone(),
                    winner.target_values.clone(),
                    winner.cfg,
                ))
            }
        }
    }

    /// Mean test metric of a fitted learner under the given penalties.
    /// `intercept` appends the constant covariate the linear family was
    /// fitted with.
    fn score_prescriptions(
        &self,
        learner: &FittedLearner,
        train: &ObservationalDataset,
        cfg: &PenaltyConfig,
        intercept: bool,
    ) -> Result<f64> {
        let xs = self.test.covariates();
        let metrics: Result<Vec<f64>> = xs
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let mut query = x.clone();
                if intercept {
                    query.push(1.0);
                }
                let prescription = learner.prescribe(
                    train,
                    &query,
                    &self.cost,
                    cfg,
                    &self.space,
                    &self.forest_opts(1000 + i as u64),
                )?;
                Ok(match self.test {
                    TestSet::Pricing(_) => pricing::pricing_true_revenue(x, &prescription.z),
                    TestSet::Dosing { optimal, .. } => {
                        let err = prescription.z[0] - optimal[i];
                        err * err
                    }
                })
            })
            .collect();
        let metrics = metrics?;
        Ok(metrics.iter().sum::<f64>() / metrics.len() as f64)
    }

    fn run_method(
        &self,
        method: Method,
        train: &ObservationalDataset,
        train_optimal: Option<&[f64]>,
    ) -> Result<f64> {
        match method {
            Method::ConstantDose => {
                let TestSet::Dosing { optimal, .. } = self.test else {
                    return Err(Error::MethodNotApplicable(
                        method.name().into(),
                        "pricing".into(),
                    ));
                };
                let mse = optimal
                    .iter()
                    .map(|z| (dosing::CONSTANT_DOSE - z) * (dosing::CONSTANT_DOSE - z))
                    .sum::<f64>()
                    / optimal.len() as f64;
                Ok(mse)
            }
            Method::OracleLb => {
                let TestSet::Dosing { covariates, optimal } = self.test else {
                    return Err(Error::MethodNotApplicable(
                        method.name().into(),
                        "pricing".into(),
                    ));
                };
                let train_optimal = train_optimal.expect("dosing training optima");
                // Unattainable reference: a forest predicting the optimal
                // dose directly from the covariates.
                let oracle_ds = ObservationalDataset::new(
                    train.covariates.clone(),
                    vec![vec![0.0]; train.n()],
                    train_optimal.iter().map(|z| vec![*z]).collect(),
                )?;
                let mut params = self.config.lb_forest.clone();
                params.seed = derive_seed(self.rep_seed, 31);
                let forest = fit_forest(&oracle_ds, FitTarget::Outcome, &params)?;
                let values = FitTarget::Outcome.values(&oracle_ds)?;
                let mse = covariates
                    .par_iter()
                    .zip(optimal.par_iter())
                    .map(|(x, z_star)| {
                        let q = crate::space::FeaturePoint::new(x.clone(), vec![0.0]);
                        let err = forest.predict_value(&q, &values) - z_star;
                        err * err
                    })
                    .sum::<f64>()
                    / optimal.len() as f64;
                Ok(mse)
            }
            method if method.is_penalized() => {
                let linear = matches!(method, Method::UpLasso);
                let train_m = if linear {
                    augment_intercept(train)
                } else {
                    train.clone()
                };
                let (learner, _values, cfg) = self.resolve_penalized(method, &train_m)?;
                self.score_prescriptions(&learner, &train_m, &cfg, linear)
            }
            method => {
                // Direct predicted-cost minimization: penalties off.
                let linear = matches!(method, Method::Lasso);
                let train_m = if linear {
                    augment_intercept(train)
                } else {
                    train.clone()
                };
                let spec = self.learner_spec(method);
                let learner = FittedLearner::fit(&spec, &train_m, self.fit_target())?;
                let cfg = PenaltyConfig::unpenalized(self.mode);
                self.score_prescriptions(&learner, &train_m, &cfg, linear)
            }
        }
    }
}

/// Copy of the dataset with a constant covariate appended, giving the
/// intercept-free linear family an intercept term.
fn augment_intercept(ds: &ObservationalDataset) -> ObservationalDataset {
    let mut out = ds.clone();
    for row in &mut out.covariates {
        row.push(1.0);
    }
    out.covariate_names.push("intercept".into());
    out
}

/// Euclidean diameter of the joint feature box spanned by the training rows
/// and the decision space.
fn feature_diameter(train: &ObservationalDataset, space: &DecisionSpace) -> f64 {
    let d = train.covariate_dim();
    let p = train.decision_dim();
    let mut acc = 0.0;
    for k in 0..d + p {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..train.n() {
            let v = train.feature(i, k);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if k >= d {
            lo = lo.min(space.lower[k - d]);
            hi = hi.max(space.upper[k - d]);
        }
        acc += (hi - lo) * (hi - lo);
    }
    acc.sqrt().max(1e-12)
}

/// Run the configured benchmark: fresh training draws per replication, a
/// fixed held-out test set, per-method prescriptions scored against the
/// ground truth, and paired penalized-vs-direct Wilcoxon comparisons.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let start = Instant::now();
    let test = match config.experiment {
        Experiment::Pricing => TestSet::Pricing(pricing::generate_pricing_covariates(
            config.test_points,
            derive_seed(config.seed, 0xfeed),
        )),
        Experiment::Dosing => {
            let (ds, optimal) = dosing::generate_dosing_data(
                config.test_points,
                config.missing_rate,
                derive_seed(config.seed, 0xfeed),
            )?;
            TestSet::Dosing {
                covariates: ds.covariates,
                optimal,
            }
        }
    };
    let space = config.space()?;

    let mut cells: Vec<MethodCell> = Vec::new();
    for (n_idx, &n) in config.n_values.iter().enumerate() {
        let rep_results: Result<Vec<Vec<f64>>> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let rep_seed =
                    derive_seed(config.seed, ((n_idx as u64) << 32) | (rep as u64 + 1));
                let (train, train_optimal) = match config.experiment {
                    Experiment::Pricing => {
                        (pricing::generate_pricing_data(n, rep_seed)?, None)
                    }
                    Experiment::Dosing => {
                        let (ds, optimal) =
                            dosing::generate_dosing_data(n, config.missing_rate, rep_seed)?;
                        (ds, Some(optimal))
                    }
                };
                let ctx = ReplicationContext {
                    config,
                    test: &test,
                    space: space.clone(),
                    cost: config.cost(),
                    mode: config.mode(),
                    target: config.target(),
                    rep_seed,
                };
                config
                    .methods
                    .iter()
                    .map(|&m| ctx.run_method(m, &train, train_optimal.as_deref()))
                    .collect()
            })
            .collect();
        let rep_results = rep_results?;
        for (m_idx, &method) in config.methods.iter().enumerate() {
            let metrics: Vec<f64> = rep_results.iter().map(|r| r[m_idx]).collect();
            let mean = metrics.iter().sum::<f64>() / metrics.len() as f64;
            cells.push(MethodCell {
                method,
                n,
                metrics,
                mean,
            });
        }
    }

    // Paired penalized-vs-direct comparisons, oriented so positive
    // differences favor the penalized method.
    let mut comparisons = Vec::new();
    for &n in &config.n_values {
        let mut at_n = Vec::new();
        for &method in &config.methods {
            let Some(direct) = method.direct_analogue() else {
                continue;
            };
            if !config.methods.contains(&direct) {
                continue;
            }
            let up_cell = cells
                .iter()
                .find(|c| c.method == method && c.n == n)
                .unwrap();
            let direct_cell = cells
                .iter()
                .find(|c| c.method == direct && c.n == n)
                .unwrap();
            let diffs: Vec<f64> = up_cell
                .metrics
                .iter()
                .zip(&direct_cell.metrics)
                .map(|(up, dir)| match config.experiment {
                    Experiment::Pricing => up - dir, // revenue: higher better
                    Experiment::Dosing => dir - up,  // MSE: lower better
                })
                .collect();
            let one_sided = wilcoxon_signed_rank(&diffs, Alternative::Greater);
            let two_sided = wilcoxon_signed_rank(&diffs, Alternative::TwoSided);
            at_n.push(Comparison {
                penalized: method,
                direct,
                n,
                mean_improvement: diffs.iter().sum::<f64>() / diffs.len() as f64,
                statistic: one_sided.statistic,
                p_value_one_sided: one_sided.p_value,
                p_value_two_sided: two_sided.p_value,
                p_value_adjusted: two_sided.p_value,
            });
        }
        let family = at_n.len();
        for c in &mut at_n {
            c.p_value_adjusted = bonferroni(c.p_value_two_sided, family);
        }
        comparisons.extend(at_n);
    }

    Ok(BenchmarkReport {
        experiment: config.experiment,
        config: config.clone(),
        cells,
        comparisons,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCell {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub cells: Vec<SensitivityCell>,
    /// Wall-clock seconds; excluded from serialization (see
    /// [`BenchmarkReport::runtime_seconds`]).
    #[serde(skip)]
    pub runtime_seconds: f64,
}

impl SensitivityReport {
    pub fn cell(&self, lambda1: f64, lambda2: f64) -> Option<&SensitivityCell> {
        self.cells
            .iter()
            .find(|c| c.lambda1 == lambda1 && c.lambda2 == lambda2)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda1,lambda2,mean_mse\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{}\n", c.lambda1, c.lambda2, c.mean_mse));
        }
        out
    }
}

/// Run the dosing benchmark for every multiplier pair with a shared seed
/// set. The unpenalized `(0, 0)` cell is always included for reference.
pub fn sensitivity_grid(
    config: &BenchmarkConfig,
    lambda1_values: &[f64],
    lambda2_values: &[f64],
) -> Result<SensitivityReport> {
    if lambda1_values.is_empty() || lambda2_values.is_empty() {
        return Err(Error::InvalidParameter(
            "sensitivity grids must be nonempty".into(),
        ));
    }
    if config.experiment != Experiment::Dosing {
        return Err(Error::MethodNotApplicable(
            "sensitivity".into(),
            config.experiment.name().into(),
        ));
    }
    let start = Instant::now();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    if !(lambda1_values.contains(&0.0) && lambda2_values.contains(&0.0)) {
        pairs.push((0.0, 0.0));
    }
    for &l1 in lambda1_values {
        for &l2 in lambda2_values {
            pairs.push((l1, l2));
        }
    }

    let mut cells = Vec::with_capacity(pairs.len());
    for (l1, l2) in pairs {
        let mut cell_config = config.clone();
        cell_config.methods = vec![Method::UpRf];
        cell_config.lambda = LambdaMode::Fixed {
            lambda1: l1,
            lambda2: l2,
        };
        let report = run_benchmark(&cell_config)?;
        let mean = report.cells[0].mean;
        cells.push(SensitivityCell {
            lambda1: l1,
            lambda2: l2,
            mean_mse: mean,
        });
    }
    Ok(SensitivityReport {
        cells,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}
