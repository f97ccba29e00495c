//! Prescriptive analytics from observational data.
//!
//! Given logged `(covariates, decision, outcome)` triples, this crate fits
//! honest tree, random-forest, or linear learners over the joint
//! covariate-decision space and prescribes decisions by minimizing
//!
//! ```text
//! predicted cost  +  lambda1 * sqrt(variance penalty)  +  lambda2 * bias penalty
//! ```
//!
//! over a bounded decision space. The variance penalty charges decisions whose
//! predicted cost rests on few effective samples; the bias penalty charges
//! decisions far from the training data. Tractable solvers exploit the
//! structure of each learner family: per-leaf convex solves for trees,
//! coordinate descent for forests, and projected gradient descent for linear
//! models, all checked against a brute-force grid oracle.
//!
//! The [`experiments`] module ships seeded data generators and a benchmark
//! harness for a multi-product pricing problem and a synthetic medication
//! dosing problem, plus a Wilcoxon signed-rank comparison of method pairs.

pub mod data;
pub mod error;
pub mod experiments;
pub mod forest;
pub mod learner;
pub mod linear;
pub mod objective;
pub mod optimize;
pub mod rng;
pub mod space;
pub mod stats;
pub mod theory;
pub mod tree;
pub mod tuning;
pub mod weights;

pub use data::{ColumnRole, LoadReport, ObservationalDataset, Schema};
pub use error::{Error, Result};
pub use forest::{ForestModel, ForestParams};
pub use learner::{FittedLearner, LearnerSpec, ModelArtifact};
pub use linear::{LinearKind, LinearModel};
pub use objective::{
    CostFunction, Decomposition, FitTarget, ObjectiveMode, PenaltyConfig,
};
pub use optimize::{grid_oracle, ForestOptOptions, Prescription, SolverDiagnostics};
pub use space::{DecisionSpace, FeaturePoint, LinearConstraint};
pub use theory::TheoryInputs;
pub use tree::{LeafRegion, TreeModel, TreeParams};
pub use weights::WeightVector;
