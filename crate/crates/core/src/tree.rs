//! Honest CART over the joint covariate-decision space.
//!
//! The training rows are divided into a structure half and an estimation
//! half. Splits are chosen greedily by sum-of-squares reduction using only
//! the structure half; leaf weights average only estimation rows, so the
//! weights are determined independently of the outcomes they multiply.
//! Growth is best-first and stops when a split would push a leaf below
//! `min_leaf` estimation rows or the tree past `max_leaves` leaves.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::ObservationalDataset;
use crate::error::{Error, Result};
use crate::objective::FitTarget;
use crate::rng::stream_rng;
use crate::space::FeaturePoint;
use crate::weights::WeightVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Minimum estimation rows per leaf.
    pub min_leaf: usize,
    /// Maximum number of leaves.
    pub max_leaves: usize,
    /// Fraction of training rows used for structure (split selection).
    pub honesty_fraction: f64,
    /// Candidate features scanned per split; `None` scans all.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_leaf: 10,
            max_leaves: 100,
            honesty_fraction: 0.5,
            features_per_split: None,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf < 1 {
            return Err(Error::InvalidParameter("min_leaf must be >= 1".into()));
        }
        if self.max_leaves < 1 {
            return Err(Error::InvalidParameter("max_leaves must be >= 1".into()));
        }
        if !(self.honesty_fraction > 0.0 && self.honesty_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "honesty_fraction must lie in (0,1), got {}",
                self.honesty_fraction
            )));
        }
        Ok(())
    }
}

/// Axis-aligned split or leaf. Rows with feature value `<= threshold` go
/// left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        estimation: Vec<usize>,
    },
}

/// A fitted honest regression tree. Leaf estimation lists index into the
/// training dataset the tree was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub covariate_dim: usize,
    pub decision_dim: usize,
    pub n_rows: usize,
    /// Distinct rows whose targets drove the split selection. Outcomes of
    /// rows outside this set cannot influence the tree shape or the weight
    /// pattern.
    pub structure: Vec<usize>,
    pub params: TreeParams,
}

/// One leaf's region of the joint feature space: the intersection of the
/// split half-spaces on the root-to-leaf path, with infinite bounds where
/// unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafRegion {
    /// Node index of the leaf; used as the leaf id.
    pub leaf: usize,
    /// Per-coordinate `(lower, upper)` interval over the concatenated
    /// `(x, z)` space.
    pub bounds: Vec<(f64, f64)>,
    pub estimation: Vec<usize>,
}

impl LeafRegion {
    pub fn contains(&self, point: &FeaturePoint) -> bool {
        self.bounds
            .iter()
            .enumerate()
            .all(|(k, (lo, hi))| point.coord(k) >= *lo && point.coord(k) <= *hi)
    }
}

struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct GrowLeaf {
    slot: usize,
    structure: Vec<usize>,
    estimation: Vec<usize>,
    candidate: Option<SplitCandidate>,
}

/// Best variance-reduction split over the given candidate features, scanning
/// midpoints of consecutive distinct structure values. Ties are broken
/// toward the lowest feature index, then the smallest threshold, by scanning
/// in ascending order and replacing only on strict improvement. A split is
/// feasible only if both children keep at least `min_leaf` estimation rows.
fn find_best_split(
    ds: &ObservationalDataset,
    targets: &[f64],
    structure: &[usize],
    estimation: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    if structure.len() < 2 || estimation.len() < 2 * min_leaf {
        return None;
    }
    let total_sum: f64 = structure.iter().map(|&i| targets[i]).sum();
    let total_sq: f64 = structure.iter().map(|&i| targets[i] * targets[i]).sum();
    let n = structure.len() as f64;
    let parent_ss = total_sq - total_sum * total_sum / n;
    // Gains below floating noise on the parent scale are treated as zero.
    let min_gain = 1e-12 * parent_ss.abs() + 1e-24;

    let mut best: Option<SplitCandidate> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(structure.len());
    let mut est_values: Vec<f64> = Vec::with_capacity(estimation.len());
    for &feature in features {
        pairs.clear();
        pairs.extend(structure.iter().map(|&i| (ds.feature(i, feature), targets[i])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        est_values.clear();
        est_values.extend(estimation.iter().map(|&i| ds.feature(i, feature)));
        est_values.sort_unstable_by(f64::total_cmp);

        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        let mut est_left = 0usize;
        for (idx, (value, target)) in pairs.iter().enumerate() {
            left_sum += target;
            left_sq += target * target;
            if idx + 1 == pairs.len() {
                break;
            }
            let next = pairs[idx + 1].0;
            if next <= *value {
                continue;
            }
            let threshold = 0.5 * (value + next);
            while est_left < est_values.len() && est_values[est_left] <= threshold {
                est_left += 1;
            }
            let est_right = est_values.len() - est_left;
            if est_left < min_leaf || est_right < min_leaf {
                continue;
            }
            let left_n = (idx + 1) as f64;
            let right_n = n - left_n;
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let left_ss = left_sq - left_sum * left_sum / left_n;
            let right_ss = right_sq - right_sum * right_sum / right_n;
            let gain = parent_ss - left_ss - right_ss;
            if gain > min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate {
                    gain,
                    feature,
                    threshold,
                });
            }
        }
    }
    best
}

fn draw_features(rng: &mut ChaCha8Rng, dim: usize, k: Option<usize>) -> Vec<usize> {
    match k {
        None => (0..dim).collect(),
        Some(k) if k >= dim => (0..dim).collect(),
        Some(k) => {
            let mut all: Vec<usize> = (0..dim).collect();
            all.shuffle(rng);
            let mut chosen: Vec<usize> = all[..k].to_vec();
            chosen.sort_unstable();
            chosen
        }
    }
}

/// Grow a tree from explicit structure and estimation row sets. The
/// structure list may contain repeats (bootstrap use); the estimation list
/// must be deduplicated so leaf weights stay within `1/min_leaf`.
pub(crate) fn grow_tree(
    ds: &ObservationalDataset,
    targets: &[f64],
    structure: Vec<usize>,
    estimation: Vec<usize>,
    params: &TreeParams,
    feature_rng: &mut ChaCha8Rng,
) -> Result<TreeModel> {
    params.validate()?;
    if estimation.len() < params.min_leaf {
        return Err(Error::TooFewRows {
            rows: estimation.len(),
            required: params.min_leaf,
        });
    }
    if structure.is_empty() {
        return Err(Error::TooFewRows {
            rows: 0,
            required: 1,
        });
    }
    let dim = ds.feature_dim();
    let mut structure_rows = structure.clone();
    structure_rows.sort_unstable();
    structure_rows.dedup();
    let mut nodes: Vec<Node> = vec![Node::Leaf {
        estimation: estimation.clone(),
    }];
    let features = draw_features(feature_rng, dim, params.features_per_split);
    let root_candidate = find_best_split(
        ds,
        targets,
        &structure,
        &estimation,
        &features,
        params.min_leaf,
    );
    let mut open = vec![GrowLeaf {
        slot: 0,
        structure,
        estimation,
        candidate: root_candidate,
    }];
    let mut leaf_count = 1usize;

    while leaf_count < params.max_leaves {
        // Best-first: split the frontier leaf with the highest gain; ties go
        // to the earliest-created leaf for determinism.
        let Some(pick) = open
            .iter()
            .enumerate()
            .filter(|(_, l)| l.candidate.is_some())
            .max_by(|(ia, a), (ib, b)| {
                let ga = a.candidate.as_ref().unwrap().gain;
                let gb = b.candidate.as_ref().unwrap().gain;
                ga.total_cmp(&gb).then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
        else {
            break;
        };
        let leaf = open.swap_remove(pick);
        let cand = leaf.candidate.unwrap();
        let (left_struct, right_struct): (Vec<usize>, Vec<usize>) = leaf
            .structure
            .iter()
            .partition(|&&i| ds.feature(i, cand.feature) <= cand.threshold);
        let (left_est, right_est): (Vec<usize>, Vec<usize>) = leaf
            .estimation
            .iter()
            .partition(|&&i| ds.feature(i, cand.feature) <= cand.threshold);
        let left_slot = nodes.len();
        let right_slot = nodes.len() + 1;
        nodes.push(Node::Leaf {
            estimation: left_est.clone(),
        });
        nodes.push(Node::Leaf {
            estimation: right_est.clone(),
        });
        nodes[leaf.slot] = Node::Split {
            feature: cand.feature,
            threshold: cand.threshold,
            left: left_slot,
            right: right_slot,
        };
        leaf_count += 1;
        for (slot, structure, estimation) in [
            (left_slot, left_struct, left_est),
            (right_slot, right_struct, right_est),
        ] {
            let features = draw_features(feature_rng, dim, params.features_per_split);
            let candidate = find_best_split(
                ds,
                targets,
                &structure,
                &estimation,
                &features,
                params.min_leaf,
            );
            open.push(GrowLeaf {
                slot,
                structure,
                estimation,
                candidate,
            });
        }
    }

    Ok(TreeModel {
        nodes,
        covariate_dim: ds.covariate_dim(),
        decision_dim: ds.decision_dim(),
        n_rows: ds.n(),
        structure: structure_rows,
        params: params.clone(),
    })
}

/// Deterministic honesty partition of `0..n` into (structure, estimation)
/// driven only by the seed, so refits with permuted estimation outcomes
/// reuse the same halves.
pub(crate) fn honesty_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, 0);
    indices.shuffle(&mut rng);
    let n_struct = ((n as f64 * fraction) as usize).clamp(1, n - 1);
    let structure = indices[..n_struct].to_vec();
    let mut estimation = indices[n_struct..].to_vec();
    estimation.sort_unstable();
    (structure, estimation)
}

/// Fit an honest CART on the full training set, splitting rows into
/// structure and estimation halves internally.
pub fn fit_honest_cart(
    train: &ObservationalDataset,
    target: FitTarget<'_>,
    params: &TreeParams,
) -> Result<TreeModel> {
    params.validate()?;
    let n = train.n();
    if n < 2 * params.min_leaf {
        return Err(Error::TooFewRows {
            rows: n,
            required: 2 * params.min_leaf,
        });
    }
    let targets = target.values(train)?;
    let (structure, estimation) = honesty_split(n, params.honesty_fraction, params.seed);
    let mut feature_rng = stream_rng(params.seed, 1);
    grow_tree(train, &targets, structure, estimation, params, &mut feature_rng)
}

impl TreeModel {
    /// Construct from explicit nodes; used for hand-built fixtures and by
    /// deserialization consumers.
    pub fn from_parts(
        nodes: Vec<Node>,
        covariate_dim: usize,
        decision_dim: usize,
        n_rows: usize,
        params: TreeParams,
    ) -> Result<Self> {
        let model = Self {
            nodes,
            covariate_dim,
            decision_dim,
            n_rows,
            structure: Vec::new(),
            params,
        };
        for node in &model.nodes {
            match node {
                Node::Split { left, right, feature, .. } => {
                    if *left >= model.nodes.len()
                        || *right >= model.nodes.len()
                        || *feature >= covariate_dim + decision_dim
                    {
                        return Err(Error::InvalidParameter("malformed tree node".into()));
                    }
                }
                Node::Leaf { estimation } => {
                    if estimation.is_empty() || estimation.iter().any(|&i| i >= n_rows) {
                        return Err(Error::InvalidParameter("malformed leaf".into()));
                    }
                }
            }
        }
        Ok(model)
    }

    pub fn feature_dim(&self) -> usize {
        self.covariate_dim + self.decision_dim
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Node index of the leaf containing the point.
    pub fn route(&self, point: &FeaturePoint) -> usize {
        debug_assert_eq!(point.dim(), self.feature_dim());
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if point.coord(*feature) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn leaf_estimation(&self, leaf: usize) -> &[usize] {
        match &self.nodes[leaf] {
            Node::Leaf { estimation } => estimation,
            Node::Split { .. } => panic!("node {leaf} is not a leaf"),
        }
    }

    /// Union of leaf estimation lists, ascending.
    pub fn estimation_indices(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { estimation } => Some(estimation.iter().copied()),
                _ => None,
            })
            .flatten()
            .collect();
        all.sort_unstable();
        all
    }

    /// Mean target over the leaf containing the point.
    pub fn predict_value(&self, point: &FeaturePoint, values: &[f64]) -> f64 {
        let leaf = self.route(point);
        let est = self.leaf_estimation(leaf);
        est.iter().map(|&i| values[i]).sum::<f64>() / est.len() as f64
    }
}

/// Uniform weights `1/N` over the estimation rows of the query's leaf.
pub fn tree_weights(model: &TreeModel, q: &FeaturePoint) -> WeightVector {
    let leaf = model.route(q);
    WeightVector::uniform(model.n_rows, model.leaf_estimation(leaf))
}

/// All leaf regions with their feature-space boxes and estimation lists.
/// The regions tile the space; a single-leaf tree yields one all-infinite
/// box.
pub fn enumerate_leaves(model: &TreeModel) -> Vec<LeafRegion> {
    let dim = model.feature_dim();
    let mut regions = Vec::with_capacity(model.leaf_count());
    let root_box = vec![(f64::NEG_INFINITY, f64::INFINITY); dim];
    let mut stack = vec![(0usize, root_box)];
    while let Some((at, bounds)) = stack.pop() {
        match &model.nodes[at] {
            Node::Leaf { estimation } => regions.push(LeafRegion {
                leaf: at,
                bounds,
                estimation: estimation.clone(),
            }),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let mut left_bounds = bounds.clone();
                left_bounds[*feature].1 = left_bounds[*feature].1.min(*threshold);
                let mut right_bounds = bounds;
                right_bounds[*feature].0 = right_bounds[*feature].0.max(*threshold);
                // Push right first so leaves pop in left-to-right order.
                stack.push((*right, right_bounds));
                stack.push((*left, left_bounds));
            }
        }
    }
    regions.sort_by_key(|r| r.leaf);
    regions
}
