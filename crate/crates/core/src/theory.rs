//! Theory-guided tuning constants, the finite-sample generalization bound,
//! and a small regret laboratory comparing penalized and unpenalized
//! selection rules on a many-armed toy problem.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;

/// Problem constants feeding the covering-number factor and the bound:
/// leaf-count cap, minimum leaf size, space diameter, weight and cost
/// Lipschitz constants, decision dimension, and confidence level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    /// Maximum number of weight regions (tree leaves).
    pub max_regions: usize,
    /// Minimum samples per region (leaf).
    pub min_leaf: usize,
    /// Diameter of the joint feature space.
    pub diameter: f64,
    /// Lipschitz constant of the weight function within a region (0 for
    /// single trees).
    pub weight_lipschitz: f64,
    /// Lipschitz constant of the cost in the decision.
    pub cost_lipschitz: f64,
    /// Decision dimension.
    pub decision_dim: usize,
    /// Confidence level in (0, 1).
    pub delta: f64,
}

impl TheoryInputs {
    pub fn validate(&self) -> Result<()> {
        if self.max_regions < 1 || self.min_leaf < 1 || self.decision_dim < 1 {
            return Err(Error::InvalidParameter(
                "max_regions, min_leaf, and decision_dim must be >= 1".into(),
            ));
        }
        for (name, v) in [
            ("diameter", self.diameter),
            ("weight_lipschitz", self.weight_lipschitz),
            ("cost_lipschitz", self.cost_lipschitz),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Covering-number factor
/// `K_n = Gamma * (9 D gamma (alpha (L D + 1 + sqrt 2) + L (sqrt 2 + 3)))^p`.
pub fn compute_kn(t: &TheoryInputs) -> f64 {
    let sqrt2 = 2.0f64.sqrt();
    let bracket = t.weight_lipschitz * (t.cost_lipschitz * t.diameter + 1.0 + sqrt2)
        + t.cost_lipschitz * (sqrt2 + 3.0);
    let inner = 9.0 * t.diameter * t.min_leaf as f64 * bracket;
    t.max_regions as f64 * inner.powi(t.decision_dim as i32)
}

/// Penalty multipliers guaranteeing the regret bound:
/// `lambda1 = 2 sqrt(ln(2 K_n / delta))`, `lambda2 = L`.
pub fn theory_lambdas(t: &TheoryInputs) -> (f64, f64) {
    let kn = compute_kn(t);
    let lambda1 = 2.0 * (2.0 * kn / t.delta).ln().sqrt();
    (lambda1, t.cost_lipschitz)
}

/// High-probability upper bound on the prediction shortfall:
/// `(4 / 3 gamma) ln(K_n/delta) + 2 sqrt(V ln(K_n/delta)) + L B`.
pub fn generalization_bound(t: &TheoryInputs, v: f64, b: f64) -> f64 {
    let kn = compute_kn(t);
    let log_term = (kn / t.delta).ln();
    4.0 / (3.0 * t.min_leaf as f64) * log_term
        + 2.0 * (v * log_term).sqrt()
        + t.cost_lipschitz * b
}

/// Standard normal CDF via the complementary error function, accurate in the
/// tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / 2.0f64.sqrt())
}

/// Analytic regrets, conditioned on the state where the deterministic action
/// is optimal, for the selection problem with `m` noisy actions observed `m`
/// times each. The unpenalized rule errs when some noisy empirical mean
/// drops below zero; the penalized rule additionally requires beating the
/// penalty margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example1Analytic {
    pub regret_up: f64,
    pub regret_pcm: f64,
}

pub fn example1_analytic(m: usize, lambda: f64) -> Result<Example1Analytic> {
    if m < 1 {
        return Err(Error::InvalidParameter("m must be >= 1".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let mf = m as f64;
    let sqrt_m = mf.sqrt();
    let pen = lambda * mf.ln().sqrt();
    let regret_pcm = 1.0 - normal_cdf(sqrt_m).powi(m as i32);
    let regret_up = 1.0 - normal_cdf(sqrt_m + pen).powi(m as i32);
    Ok(Example1Analytic {
        regret_up,
        regret_pcm,
    })
}

/// Conditional regret estimates within one world state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateRegret {
    pub up_mean: f64,
    pub up_se: f64,
    pub pcm_mean: f64,
    pub pcm_se: f64,
    pub count: usize,
}

/// Monte Carlo regret estimates for the two-state selection problem.
/// `state_a` conditions on the state where the deterministic action is
/// optimal (cost 0 versus noisy mean 1), matching [`example1_analytic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example1MonteCarlo {
    pub up_mean: f64,
    pub up_se: f64,
    pub pcm_mean: f64,
    pub pcm_se: f64,
    pub state_a: StateRegret,
    pub state_b: StateRegret,
    pub n_sims: usize,
}

#[derive(Default, Clone, Copy)]
struct RegretTally {
    up_errors: usize,
    pcm_errors: usize,
    count: usize,
}

impl RegretTally {
    fn merge(mut self, other: RegretTally) -> RegretTally {
        self.up_errors += other.up_errors;
        self.pcm_errors += other.pcm_errors;
        self.count += other.count;
        self
    }

    fn state_regret(&self) -> StateRegret {
        let n = self.count.max(1) as f64;
        let up = self.up_errors as f64 / n;
        let pcm = self.pcm_errors as f64 / n;
        StateRegret {
            up_mean: up,
            up_se: (up * (1.0 - up) / n).sqrt(),
            pcm_mean: pcm,
            pcm_se: (pcm * (1.0 - pcm) / n).sqrt(),
            count: self.count,
        }
    }
}

/// Simulate both world states with probability one half each. Per
/// replication, every noisy action receives `m` draws; the unpenalized rule
/// picks the smallest empirical mean, the penalized rule adds
/// `lambda * sqrt(var_j ln m / m)` with the per-action variances known by
/// construction (unit for the noisy actions, zero for the deterministic
/// one), matching the analytic regret expressions. Regret is 1 when a
/// suboptimal action is selected.
pub fn example1_montecarlo(
    m: usize,
    lambda: f64,
    n_sims: usize,
    seed: u64,
) -> Result<Example1MonteCarlo> {
    if m < 1 {
        return Err(Error::InvalidParameter("m must be >= 1".into()));
    }
    if n_sims < 100 {
        return Err(Error::InvalidParameter(
            "n_sims must be at least 100".into(),
        ));
    }
    let chunk = 1000usize;
    let n_chunks = n_sims.div_ceil(chunk);
    let mf = m as f64;
    let ln_m = mf.ln();

    let (tally_a, tally_b) = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let sims = chunk.min(n_sims - c * chunk);
            let mut a = RegretTally::default();
            let mut b = RegretTally::default();
            for _ in 0..sims {
                // State A: deterministic action optimal (cost 0), noisy
                // actions have mean 1. State B: deterministic action costs
                // 1, noisy actions have mean 0.
                let state_a = rng.random_bool(0.5);
                let (det_cost, noisy_mean) = if state_a { (0.0, 1.0) } else { (1.0, 0.0) };
                let mut pcm_best = (det_cost, 0usize);
                let mut up_best = (det_cost, 0usize);
                // Unit noisy variance gives every noisy action the same
                // penalty margin; the deterministic action's is zero.
                let margin = lambda * (ln_m / mf).sqrt();
                for j in 1..=m {
                    let mut sum = 0.0;
                    for _ in 0..m {
                        sum += noisy_mean + rng.sample::<f64, _>(StandardNormal);
                    }
                    let mean = sum / mf;
                    if mean < pcm_best.0 {
                        pcm_best = (mean, j);
                    }
                    let penalized = mean + margin;
                    if penalized < up_best.0 {
                        up_best = (penalized, j);
                    }
                }
                // In state A any noisy pick is a regret-1 error; in state B
                // picking the deterministic action is the error.
                let tally = if state_a { &mut a } else { &mut b };
                tally.count += 1;
                if state_a {
                    if pcm_best.1 != 0 {
                        tally.pcm_errors += 1;
                    }
                    if up_best.1 != 0 {
                        tally.up_errors += 1;
                    }
                } else {
                    if pcm_best.1 == 0 {
                        tally.pcm_errors += 1;
                    }
                    if up_best.1 == 0 {
                        tally.up_errors += 1;
                    }
                }
            }
            (a, b)
        })
        .reduce(
            || (RegretTally::default(), RegretTally::default()),
            |(a1, b1), (a2, b2)| (a1.merge(a2), b1.merge(b2)),
        );

    let n = n_sims as f64;
    let up_total = tally_a.up_errors + tally_b.up_errors;
    let pcm_total = tally_a.pcm_errors + tally_b.pcm_errors;
    let up_mean = up_total as f64 / n;
    let pcm_mean = pcm_total as f64 / n;
    Ok(Example1MonteCarlo {
        up_mean,
        up_se: (up_mean * (1.0 - up_mean) / n).sqrt(),
        pcm_mean,
        pcm_se: (pcm_mean * (1.0 - pcm_mean) / n).sqrt(),
        state_a: tally_a.state_regret(),
        state_b: tally_b.state_regret(),
        n_sims,
    })
}
