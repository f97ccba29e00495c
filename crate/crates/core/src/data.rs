//! Dataset container, CSV ingestion, normalization, and splitting.
//!
//! An [`ObservationalDataset`] holds `n` records of covariates `X`, decisions
//! `Z`, and outcomes `Y` as dense row-major blocks. Datasets are immutable
//! after construction and safe to share read-only across parallel workers.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::master_rng;
use crate::space::FeaturePoint;

/// Role a CSV column plays during loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Covariate,
    Decision,
    Outcome,
    Ignore,
}

/// Ordered column-to-role mapping. The order of entries fixes the column
/// order of the loaded dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<(String, ColumnRole)>,
}

impl Schema {
    pub fn new(columns: Vec<(String, ColumnRole)>) -> Self {
        Self { columns }
    }

    /// Parse the `{column: role}` JSON mapping, preserving file order.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text)?;
        let mut columns = Vec::with_capacity(map.len());
        for (name, value) in map {
            let role: ColumnRole = serde_json::from_value(value)?;
            columns.push((name, role));
        }
        Ok(Self { columns })
    }

    fn names_with_role(&self, role: ColumnRole) -> Vec<String> {
        self.columns
            .iter()
            .filter(|(_, r)| *r == role)
            .map(|(n, _)| n.clone())
            .collect()
    }
}

/// Per-column affine scaler applied to covariates; kept for the inverse
/// transform and for mapping query points into model units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Columns with zero sample standard deviation are flagged and left
    /// unscaled.
    pub constant: Vec<bool>,
}

impl Normalization {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| {
                if self.constant[j] {
                    *v
                } else {
                    (v - self.means[j]) / self.stds[j]
                }
            })
            .collect()
    }

    pub fn invert(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| {
                if self.constant[j] {
                    *v
                } else {
                    v * self.stds[j] + self.means[j]
                }
            })
            .collect()
    }
}

/// Summary statistics for a loaded column, computed over the kept rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub role: ColumnRole,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Load summary emitted as JSON by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub columns: Vec<ColumnStats>,
}

/// `n` records of covariates, decisions, and outcomes with column metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationalDataset {
    pub covariates: Vec<Vec<f64>>,
    pub decisions: Vec<Vec<f64>>,
    pub outcomes: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
    pub decision_names: Vec<String>,
    pub outcome_names: Vec<String>,
    pub normalization: Option<Normalization>,
}

impl ObservationalDataset {
    pub fn new(
        covariates: Vec<Vec<f64>>,
        decisions: Vec<Vec<f64>>,
        outcomes: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let d = covariates.first().map_or(0, Vec::len);
        let p = decisions.first().map_or(0, Vec::len);
        let q = outcomes.first().map_or(0, Vec::len);
        let ds = Self {
            covariates,
            decisions,
            outcomes,
            covariate_names: (0..d).map(|j| format!("x{}", j + 1)).collect(),
            decision_names: (0..p).map(|j| format!("z{}", j + 1)).collect(),
            outcome_names: (0..q).map(|j| format!("y{}", j + 1)).collect(),
            normalization: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.covariates.len();
        if n == 0 {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        if self.decisions.len() != n || self.outcomes.len() != n {
            return Err(Error::InvalidDataset(format!(
                "row counts differ: {} covariate rows, {} decision rows, {} outcome rows",
                n,
                self.decisions.len(),
                self.outcomes.len()
            )));
        }
        let d = self.covariate_dim();
        let p = self.decision_dim();
        let q = self.outcome_dim();
        if p < 1 {
            return Err(Error::InvalidDataset(
                "at least one decision column is required".into(),
            ));
        }
        if q < 1 {
            return Err(Error::InvalidDataset(
                "at least one outcome column is required".into(),
            ));
        }
        for i in 0..n {
            if self.covariates[i].len() != d
                || self.decisions[i].len() != p
                || self.outcomes[i].len() != q
            {
                return Err(Error::InvalidDataset(format!("ragged row {i}")));
            }
            let finite = self.covariates[i]
                .iter()
                .chain(&self.decisions[i])
                .chain(&self.outcomes[i])
                .all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidDataset(format!(
                    "non-finite entry in row {i}"
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.covariates.len()
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariates.first().map_or(0, Vec::len)
    }

    pub fn decision_dim(&self) -> usize {
        self.decisions.first().map_or(0, Vec::len)
    }

    pub fn outcome_dim(&self) -> usize {
        self.outcomes.first().map_or(0, Vec::len)
    }

    /// Dimension of the joint feature space, `d + p`.
    pub fn feature_dim(&self) -> usize {
        self.covariate_dim() + self.decision_dim()
    }

    /// Coordinate `k` of row `i` in the concatenated `(x, z)` view.
    #[inline]
    pub fn feature(&self, i: usize, k: usize) -> f64 {
        let d = self.covariate_dim();
        if k < d {
            self.covariates[i][k]
        } else {
            self.decisions[i][k - d]
        }
    }

    pub fn feature_point(&self, i: usize) -> FeaturePoint {
        FeaturePoint::new(self.covariates[i].clone(), self.decisions[i].clone())
    }

    /// Euclidean distance between training row `i` and query `q` in the
    /// concatenated feature space, without allocating.
    #[inline]
    pub fn feature_distance(&self, i: usize, q: &FeaturePoint) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.covariates[i].iter().zip(&q.x) {
            let diff = a - b;
            acc += diff * diff;
        }
        for (a, b) in self.decisions[i].iter().zip(&q.z) {
            let diff = a - b;
            acc += diff * diff;
        }
        acc.sqrt()
    }

    /// Scalar outcome of row `i`; the dataset must have a single outcome
    /// column.
    pub fn scalar_outcome(&self, i: usize) -> f64 {
        debug_assert_eq!(self.outcome_dim(), 1);
        self.outcomes[i][0]
    }

    /// New dataset containing the given rows, preserving metadata.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            covariates: indices.iter().map(|&i| self.covariates[i].clone()).collect(),
            decisions: indices.iter().map(|&i| self.decisions[i].clone()).collect(),
            outcomes: indices.iter().map(|&i| self.outcomes[i].clone()).collect(),
            covariate_names: self.covariate_names.clone(),
            decision_names: self.decision_names.clone(),
            outcome_names: self.outcome_names.clone(),
            normalization: self.normalization.clone(),
        }
    }
}

/// Sample mean and standard deviation with the n-1 convention.
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        n += 1;
        sum += v;
    }
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mean = sum / n as f64;
    if n < 2 {
        return (mean, 0.0, n);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt(), n)
}

/// Load a CSV file under a column-role schema. Rows with missing or
/// unparseable mandatory fields are dropped and counted in the report.
pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: &Schema,
) -> Result<(ObservationalDataset, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();

    // Resolve every schema column to a CSV position; columns absent from the
    // header are an error, columns absent from the schema are ignored.
    let mut positions = Vec::new();
    for (name, role) in &schema.columns {
        if *role == ColumnRole::Ignore {
            continue;
        }
        let pos = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::ColumnNotFound(name.clone()))?;
        positions.push((name.clone(), *role, pos));
    }

    let mut rows_read = 0usize;
    let mut rows_dropped = 0usize;
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows_read += 1;
        let mut row = Vec::with_capacity(positions.len());
        let mut ok = true;
        for (_, _, pos) in &positions {
            let cell = record.get(*pos).unwrap_or("");
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            kept.push(row);
        } else {
            rows_dropped += 1;
        }
    }
    if kept.is_empty() {
        return Err(Error::NoUsableRows);
    }

    let select = |role: ColumnRole| -> Vec<Vec<f64>> {
        kept.iter()
            .map(|row| {
                positions
                    .iter()
                    .enumerate()
                    .filter(|(_, (_, r, _))| *r == role)
                    .map(|(j, _)| row[j])
                    .collect()
            })
            .collect()
    };

    let mut ds = ObservationalDataset::new(
        select(ColumnRole::Covariate),
        select(ColumnRole::Decision),
        select(ColumnRole::Outcome),
    )?;
    ds.covariate_names = schema.names_with_role(ColumnRole::Covariate);
    ds.decision_names = schema.names_with_role(ColumnRole::Decision);
    ds.outcome_names = schema.names_with_role(ColumnRole::Outcome);

    let mut columns = Vec::new();
    for (j, (name, role, _)) in positions.iter().enumerate() {
        let values = kept.iter().map(move |row| row[j]);
        let (mean, std, _) = mean_std(values.clone());
        let min = values.clone().fold(f64::INFINITY, f64::min);
        let max = values.fold(f64::NEG_INFINITY, f64::max);
        columns.push(ColumnStats {
            name: name.clone(),
            role: *role,
            mean,
            std,
            min,
            max,
        });
    }
    let report = LoadReport {
        rows_read,
        rows_dropped,
        columns,
    };
    Ok((ds, report))
}

/// Standardize each covariate column to sample mean 0 and sample standard
/// deviation 1 (n-1 convention). Constant columns are flagged and left
/// unscaled; decisions and outcomes are untouched. The scaler is stored on
/// the returned dataset for the inverse transform.
pub fn normalize_covariates(ds: &ObservationalDataset) -> Result<ObservationalDataset> {
    if ds.n() < 2 {
        return Err(Error::TooFewRows {
            rows: ds.n(),
            required: 2,
        });
    }
    let d = ds.covariate_dim();
    let mut means = Vec::with_capacity(d);
    let mut stds = Vec::with_capacity(d);
    let mut constant = Vec::with_capacity(d);
    for j in 0..d {
        let (mean, std, _) = mean_std(ds.covariates.iter().map(|row| row[j]));
        let is_const = std == 0.0;
        means.push(mean);
        stds.push(if is_const { 1.0 } else { std });
        constant.push(is_const);
    }
    let norm = Normalization {
        means,
        stds,
        constant,
    };
    let covariates = ds.covariates.iter().map(|row| norm.apply(row)).collect();
    Ok(ObservationalDataset {
        covariates,
        decisions: ds.decisions.clone(),
        outcomes: ds.outcomes.clone(),
        covariate_names: ds.covariate_names.clone(),
        decision_names: ds.decision_names.clone(),
        outcome_names: ds.outcome_names.clone(),
        normalization: Some(norm),
    })
}

/// Deterministic disjoint split into `(training, validation)` parts. The
/// validation part receives `round(n * fraction)` rows; row order within
/// each part follows the original dataset.
pub fn train_validation_split(
    ds: &ObservationalDataset,
    validation_fraction: f64,
    seed: u64,
) -> Result<(ObservationalDataset, ObservationalDataset)> {
    let n = ds.n();
    if n < 2 {
        return Err(Error::TooFewRows {
            rows: n,
            required: 2,
        });
    }
    if !(0.0..1.0).contains(&validation_fraction) || validation_fraction <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "validation fraction must lie in (0,1), got {validation_fraction}"
        )));
    }
    let n_val = (n as f64 * validation_fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::EmptySplit(validation_fraction, n));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = master_rng(seed);
    indices.shuffle(&mut rng);
    let mut val_idx: Vec<usize> = indices[..n_val].to_vec();
    let mut train_idx: Vec<usize> = indices[n_val..].to_vec();
    val_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((ds.subset(&train_idx), ds.subset(&val_idx)))
}
