//! Query points over the joint covariate-decision space and the feasible
//! decision region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A query location: covariates `x` and a candidate decision `z`. Learners
/// and penalties operate on the concatenation `(x, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePoint {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

impl FeaturePoint {
    pub fn new(x: Vec<f64>, z: Vec<f64>) -> Self {
        Self { x, z }
    }

    /// Length of the concatenated view, `d + p`.
    pub fn dim(&self) -> usize {
        self.x.len() + self.z.len()
    }

    /// Concatenated `(x, z)` coordinates.
    pub fn concat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.z);
        v
    }

    /// Coordinate `k` of the concatenated view without allocating.
    #[inline]
    pub fn coord(&self, k: usize) -> f64 {
        if k < self.x.len() {
            self.x[k]
        } else {
            self.z[k - self.x.len()]
        }
    }

    /// Euclidean distance between the concatenated views.
    pub fn distance(&self, other: &FeaturePoint) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let mut acc = 0.0;
        for k in 0..self.dim() {
            let d = self.coord(k) - other.coord(k);
            acc += d * d;
        }
        acc.sqrt()
    }
}

/// A linear inequality `a . z <= b` over the decision space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub a: Vec<f64>,
    pub b: f64,
}

impl LinearConstraint {
    pub fn satisfied(&self, z: &[f64], tol: f64) -> bool {
        let dot: f64 = self.a.iter().zip(z).map(|(a, z)| a * z).sum();
        dot <= self.b + tol
    }
}

/// Feasible decision region: a bounded box plus optional linear inequality
/// constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSpace {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub constraints: Vec<LinearConstraint>,
}

impl DecisionSpace {
    /// Bounded box without linear constraints.
    pub fn bounded_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let space = Self {
            lower,
            upper,
            constraints: Vec::new(),
        };
        space.validate()?;
        Ok(space)
    }

    pub fn with_constraints(mut self, constraints: Vec<LinearConstraint>) -> Result<Self> {
        self.constraints = constraints;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::InvalidParameter(
                "decision space bounds have mismatched lengths".into(),
            ));
        }
        if self.lower.is_empty() {
            return Err(Error::InvalidParameter(
                "decision space must have at least one coordinate".into(),
            ));
        }
        for (k, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "decision space bound {k} is not finite; the box must be bounded"
                )));
            }
            if lo > hi {
                return Err(Error::InvalidParameter(format!(
                    "decision space bound {k} has lower {lo} > upper {hi}"
                )));
            }
        }
        for c in &self.constraints {
            if c.a.len() != self.lower.len() {
                return Err(Error::InvalidParameter(
                    "linear constraint dimension mismatch".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Euclidean diameter of the box.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        if z.len() != self.dim() {
            return false;
        }
        for ((v, lo), hi) in z.iter().zip(&self.lower).zip(&self.upper) {
            if *v < lo - tol || *v > hi + tol {
                return false;
            }
        }
        self.constraints.iter().all(|c| c.satisfied(z, tol))
    }

    /// Componentwise clamp onto the box (ignores linear constraints).
    pub fn project_box(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((v, lo), hi)| v.clamp(*lo, *hi))
            .collect()
    }

    /// Feasible interval for coordinate `k` when the remaining coordinates of
    /// `z` are held fixed: the box interval narrowed by every linear
    /// constraint with a nonzero coefficient on `k`. Returns `None` when the
    /// interval is empty.
    pub fn coordinate_interval(&self, z: &[f64], k: usize) -> Option<(f64, f64)> {
        let mut lo = self.lower[k];
        let mut hi = self.upper[k];
        for c in &self.constraints {
            let ak = c.a[k];
            if ak.abs() < 1e-300 {
                // Constraint does not involve coordinate k; it must hold for
                // the fixed coordinates alone.
                let rest: f64 = c
                    .a
                    .iter()
                    .zip(z)
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, (a, v))| a * v)
                    .sum();
                if rest > c.b + 1e-9 {
                    return None;
                }
                continue;
            }
            let rest: f64 = c
                .a
                .iter()
                .zip(z)
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, (a, v))| a * v)
                .sum();
            let bound = (c.b - rest) / ak;
            if ak > 0.0 {
                hi = hi.min(bound);
            } else {
                lo = lo.max(bound);
            }
        }
        if lo > hi {
            None
        } else {
            Some((lo, hi))
        }
    }

    /// Pull `candidate` toward `anchor` by bisection until it satisfies the
    /// linear constraints. `anchor` must itself be feasible.
    pub fn repair_toward(&self, candidate: &[f64], anchor: &[f64]) -> Vec<f64> {
        if self.constraints.iter().all(|c| c.satisfied(candidate, 1e-12)) {
            return candidate.to_vec();
        }
        let mut lo = 0.0f64; // anchor end, feasible
        let mut hi = 1.0f64; // candidate end, infeasible
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let point: Vec<f64> = anchor
                .iter()
                .zip(candidate)
                .map(|(a, c)| a + mid * (c - a))
                .collect();
            if self.constraints.iter().all(|c| c.satisfied(&point, 1e-12)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        anchor
            .iter()
            .zip(candidate)
            .map(|(a, c)| a + lo * (c - a))
            .collect()
    }
}
