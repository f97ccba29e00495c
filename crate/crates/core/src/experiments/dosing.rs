//! Synthetic medication-dosing problem. Patients carry a normalized BMI,
//! two binary genotype-like markers, and a standardized age; the true
//! optimal weekly dose is a fixed nonlinear function of these covariates.
//! Historical doses follow a BMI-driven prescribing rule with uniform
//! fallbacks, and the observed response is a noisy, clipped signal of the
//! distance between the assigned and optimal dose.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::ObservationalDataset;
use crate::error::Result;
use crate::rng::stream_rng;
use crate::space::DecisionSpace;

pub const DOSE_NOISE_STD: f64 = 8.0; // dose law variance 64
pub const RESPONSE_NOISE_STD: f64 = 20.0; // response variance 400
pub const RESPONSE_CAP: f64 = 40.0;
pub const CONSTANT_DOSE: f64 = 35.0;
pub const DEFAULT_DOSE_MAX: f64 = 100.0;

/// Mean of the historical dose rule given a normalized BMI.
pub fn dose_mean(bmi: f64) -> f64 {
    30.0 + 15.0 * bmi
}

/// True optimal weekly dose as a function of the patient covariates. The
/// genotype-BMI interaction and the age nonlinearity keep the mapping out of
/// reach of purely linear fits.
pub fn true_optimal_dose(bmi: f64, g1: f64, g2: f64, age: f64) -> f64 {
    25.0 + 10.0 * bmi + 7.5 * g1 + 5.0 * g2 + 4.0 * g1 * bmi + 3.0 * (2.0 * age).sin()
}

/// Observed response: `clip(N(dose - optimal, 400), -40, 40)`.
fn draw_response(rng: &mut impl Rng, dose: f64, optimal: f64) -> f64 {
    let normal = Normal::new(dose - optimal, RESPONSE_NOISE_STD).unwrap();
    normal.sample(rng).clamp(-RESPONSE_CAP, RESPONSE_CAP)
}

/// One patient's covariate row: observed BMI (zero when missing), the
/// missing flag, both markers, and age.
fn covariate_row(bmi: f64, missing: bool, g1: f64, g2: f64, age: f64) -> Vec<f64> {
    vec![if missing { 0.0 } else { bmi }, missing as u8 as f64, g1, g2, age]
}

/// Generate `n` synthetic patients. Returns the dataset (covariates, dose,
/// response) and the true optimal doses, which are for evaluation only.
pub fn generate_dosing_data(
    n: usize,
    missing_rate: f64,
    seed: u64,
) -> Result<(ObservationalDataset, Vec<f64>)> {
    let mut rng = stream_rng(seed, 0);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let mut covariates = Vec::with_capacity(n);
    let mut decisions = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut optimal = Vec::with_capacity(n);
    for _ in 0..n {
        let bmi: f64 = std_normal.sample(&mut rng);
        let missing = rng.random_bool(missing_rate);
        let g1 = rng.random_bool(0.3) as u8 as f64;
        let g2 = rng.random_bool(0.5) as u8 as f64;
        let age: f64 = std_normal.sample(&mut rng);
        let z_star = true_optimal_dose(bmi, g1, g2, age);

        let dose = if missing {
            // Height/weight unavailable: a standard uniform dose range.
            rng.random_range(10.0..50.0)
        } else {
            let drawn = dose_mean(bmi) + DOSE_NOISE_STD * std_normal.sample(&mut rng);
            if drawn < 0.0 {
                rng.random_range(0.0..20.0)
            } else {
                drawn
            }
        };
        let response = draw_response(&mut rng, dose, z_star);

        covariates.push(covariate_row(bmi, missing, g1, g2, age));
        decisions.push(vec![dose]);
        outcomes.push(vec![response]);
        optimal.push(z_star);
    }
    let mut ds = ObservationalDataset::new(covariates, decisions, outcomes)?;
    ds.covariate_names = vec![
        "bmi".into(),
        "bmi_missing".into(),
        "g1".into(),
        "g2".into(),
        "age".into(),
    ];
    ds.decision_names = vec!["dose".into()];
    ds.outcome_names = vec!["response".into()];
    Ok((ds, optimal))
}

/// Dose box `[lo, hi]`.
pub fn dosing_space(lo: f64, hi: f64) -> Result<DecisionSpace> {
    DecisionSpace::bounded_box(vec![lo], vec![hi])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::normal_cdf;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dose_rule_mean_and_spread() {
        assert_abs_diff_eq!(dose_mean(2.0), 60.0);
        // Sample the rule directly at a fixed BMI.
        let mut rng = stream_rng(5, 1);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| dose_mean(2.0) + DOSE_NOISE_STD * normal.sample(&mut rng))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 60.0).abs() < 3.0 * 8.0 / (n as f64).sqrt());
        assert!((var.sqrt() - 8.0).abs() < 0.1);
    }

    #[test]
    fn responses_are_clipped_and_fallbacks_bounded() {
        let (ds, _) = generate_dosing_data(5000, 0.15, 11).unwrap();
        for i in 0..ds.n() {
            let y = ds.scalar_outcome(i);
            assert!((-RESPONSE_CAP..=RESPONSE_CAP).contains(&y));
            let missing = ds.covariates[i][1] > 0.5;
            let dose = ds.decisions[i][0];
            if missing {
                assert!(
                    (10.0..=50.0).contains(&dose),
                    "missing-BMI dose {dose} outside [10, 50]"
                );
            }
        }
    }

    #[test]
    fn clipped_tail_probability_matches_the_normal_tail() {
        // Dose 50 against optimum 30: the response is N(20, 400) clipped, so
        // P(Y = 40) = P(N(20,400) > 40) = 1 - Phi(1).
        let mut rng = stream_rng(13, 2);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| draw_response(&mut rng, 50.0, 30.0) == RESPONSE_CAP)
            .count();
        let p_hat = hits as f64 / n as f64;
        let p = 1.0 - normal_cdf(1.0);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (p_hat - p).abs() < 3.0 * se,
            "clip mass {p_hat} vs analytic {p}"
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_dosing_data(200, 0.1, 3).unwrap();
        let b = generate_dosing_data(200, 0.1, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn optimal_dose_components() {
        assert_abs_diff_eq!(true_optimal_dose(0.0, 0.0, 0.0, 0.0), 25.0);
        assert_abs_diff_eq!(true_optimal_dose(1.0, 1.0, 1.0, 0.0), 51.5);
        // The interaction only fires for carriers of the first marker.
        assert_abs_diff_eq!(true_optimal_dose(1.0, 0.0, 1.0, 0.0), 40.0);
    }
}
