//! Two-component Gaussian model of ID/OOD score distributions.
//!
//! ID scores follow `N(mu_id, sigma_id)` and OOD scores `N(mu_ood, sigma_ood)`
//! with equal priors. Two closed forms of the false-positive rate are
//! provided:
//!
//! * [`analytic_fpr_paper`] evaluates the CDF-quantile composition
//!   `Phi((mu_id + sigma_id * Phi^-1(lambda) - mu_ood) / sigma_ood)` verbatim,
//!   treating `lambda` as a lower-tail quantile level.
//! * [`analytic_fpr_highscore`] is the same quantity under the detector's
//!   actual rule (accept as ID iff `score >= threshold`), and agrees with
//!   [`crate::metrics::fpr_at_tpr`] on sampled scores.
//!
//! The two are not interchangeable; callers pick one explicitly.

pub mod special;

use crate::metrics::ScoredSplit;
use crate::rng::CounterRng;
use serde::{Deserialize, Serialize};
use special::{gaussian_cdf, gaussian_quantile};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmmError {
    #[error("{name} = {value} is outside the open unit interval")]
    OutOfDomain { name: &'static str, value: f64 },
    #[error("{name} must stay positive, got {value}")]
    NonPositiveSigma { name: &'static str, value: f64 },
    #[error("cannot fit moments: {0}")]
    Fit(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub mu_id: f64,
    pub sigma_id: f64,
    pub mu_ood: f64,
    pub sigma_ood: f64,
}

impl GmmParams {
    pub fn new(mu_id: f64, sigma_id: f64, mu_ood: f64, sigma_ood: f64) -> Result<Self, GmmError> {
        let p = Self { mu_id, sigma_id, mu_ood, sigma_ood };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GmmError> {
        for (name, value) in [("sigma_id", self.sigma_id), ("sigma_ood", self.sigma_ood)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(GmmError::NonPositiveSigma { name, value });
            }
        }
        Ok(())
    }

    /// Moment-matching fit: sample mean and (population) standard deviation
    /// of each side of the split.
    pub fn fit_moments(split: &ScoredSplit) -> Result<Self, GmmError> {
        fn moments(xs: &[f64]) -> Result<(f64, f64), GmmError> {
            if xs.len() < 2 {
                return Err(GmmError::Fit("each split needs at least two scores"));
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            Ok((mean, var.sqrt()))
        }
        let (mu_id, sigma_id) = moments(&split.id_scores)?;
        let (mu_ood, sigma_ood) = moments(&split.ood_scores)?;
        Self::new(mu_id, sigma_id, mu_ood, sigma_ood)
    }
}

/// Change of the four parameters after confidence averaging.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamDelta {
    pub d_mu_id: f64,
    pub d_mu_ood: f64,
    pub d_sigma_id: f64,
    pub d_sigma_ood: f64,
}

/// Which of the two modelling assumptions a delta satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `|d_mu_id| > |d_mu_ood|`
    pub id_mean_moves_more: bool,
    /// `|d_sigma_id| > |d_sigma_ood|`
    pub id_spread_moves_more: bool,
}

impl ParamDelta {
    pub fn assumptions(&self) -> AssumptionReport {
        AssumptionReport {
            id_mean_moves_more: self.d_mu_id.abs() > self.d_mu_ood.abs(),
            id_spread_moves_more: self.d_sigma_id.abs() > self.d_sigma_ood.abs(),
        }
    }
}

fn open_unit(name: &'static str, value: f64) -> Result<f64, GmmError> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(GmmError::OutOfDomain { name, value })
    }
}

/// `Phi((mu_id + sigma_id * Phi^-1(lam) - mu_ood) / sigma_ood)`, verbatim.
pub fn analytic_fpr_paper(params: &GmmParams, lam: f64) -> Result<f64, GmmError> {
    params.validate()?;
    let z = gaussian_quantile(open_unit("lambda", lam)?)?;
    Ok(gaussian_cdf((params.mu_id + params.sigma_id * z - params.mu_ood) / params.sigma_ood))
}

/// FPR of the rule `score >= t`, with `t` placed so that a fraction `tpr`
/// of ID scores is accepted:
/// `1 - Phi((mu_id + sigma_id * Phi^-1(1 - tpr) - mu_ood) / sigma_ood)`.
pub fn analytic_fpr_highscore(params: &GmmParams, tpr: f64) -> Result<f64, GmmError> {
    params.validate()?;
    let z = gaussian_quantile(1.0 - open_unit("tpr", tpr)?)?;
    let arg = (params.mu_id + params.sigma_id * z - params.mu_ood) / params.sigma_ood;
    // Phi(-arg) == 1 - Phi(arg) without cancellation in the upper tail.
    Ok(gaussian_cdf(-arg))
}

/// Seeded Gaussian scores. ID draws use stream 0 and OOD draws stream 1 of
/// `seed`, so changing `n_ood` never perturbs the ID sample.
pub fn sample_gmm(params: &GmmParams, n_id: usize, n_ood: usize, seed: u64) -> ScoredSplit {
    let mut id_rng = CounterRng::stream(seed, 0);
    let mut ood_rng = CounterRng::stream(seed, 1);
    ScoredSplit {
        id_scores: (0..n_id).map(|_| id_rng.normal(params.mu_id, params.sigma_id)).collect(),
        ood_scores: (0..n_ood).map(|_| ood_rng.normal(params.mu_ood, params.sigma_ood)).collect(),
    }
}

pub fn apply_cover_delta(params: &GmmParams, delta: &ParamDelta) -> Result<GmmParams, GmmError> {
    GmmParams::new(
        params.mu_id + delta.d_mu_id,
        params.sigma_id + delta.d_sigma_id,
        params.mu_ood + delta.d_mu_ood,
        params.sigma_ood + delta.d_sigma_ood,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub fpr_before: f64,
    pub fpr_after: f64,
    pub declined: bool,
    pub assumptions: AssumptionReport,
}

/// Compares the high-score-convention FPR before and after a delta.
pub fn verify_lemma(params: &GmmParams, delta: &ParamDelta, tpr: f64) -> Result<LemmaCheck, GmmError> {
    let after = apply_cover_delta(params, delta)?;
    let fpr_before = analytic_fpr_highscore(params, tpr)?;
    let fpr_after = analytic_fpr_highscore(&after, tpr)?;
    Ok(LemmaCheck { fpr_before, fpr_after, declined: fpr_after < fpr_before, assumptions: delta.assumptions() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::fpr_at_tpr;

    fn unit_gap() -> GmmParams {
        GmmParams::new(1.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn quantile_form_identity_collapse() {
        let p = GmmParams::new(0.3, 0.7, 0.3, 0.7).unwrap();
        for lam in [0.05, 0.5, 0.95] {
            assert!((analytic_fpr_paper(&p, lam).unwrap() - lam).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_form_reference_value() {
        let v = analytic_fpr_paper(&unit_gap(), 0.95).unwrap();
        assert!((v - gaussian_cdf(1.0 + 1.644_853_626_951_472_2)).abs() < 1e-12);
        assert!((v - 0.995_913_687).abs() < 1e-6);
    }

    #[test]
    fn quantile_form_increasing_in_lambda() {
        let p = unit_gap();
        let values: Vec<f64> = (1..=10).map(|i| analytic_fpr_paper(&p, i as f64 / 11.0).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn highscore_identity_collapse() {
        let p = GmmParams::new(-2.0, 0.5, -2.0, 0.5).unwrap();
        for tpr in [0.1, 0.5, 0.9, 0.95] {
            assert!((analytic_fpr_highscore(&p, tpr).unwrap() - tpr).abs() < 1e-12);
        }
    }

    #[test]
    fn highscore_reference_value() {
        let v = analytic_fpr_highscore(&unit_gap(), 0.95).unwrap();
        assert!((v - gaussian_cdf(0.644_853_626_951_472_2)).abs() < 1e-12);
        assert!((v - 0.7405).abs() < 1e-4);
    }

    #[test]
    fn highscore_perfect_separation_limit() {
        let p = GmmParams::new(100.0, 1.0, 0.0, 1.0).unwrap();
        assert!(analytic_fpr_highscore(&p, 0.95).unwrap() < 1e-12);
    }

    #[test]
    fn highscore_matches_monte_carlo() {
        let p = unit_gap();
        let split = sample_gmm(&p, 1_000_000, 1_000_000, 11);
        let empirical = fpr_at_tpr(&split, 0.95).unwrap().fpr;
        let analytic = analytic_fpr_highscore(&p, 0.95).unwrap();
        assert!((empirical - analytic).abs() < 0.005, "{empirical} vs {analytic}");
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(analytic_fpr_paper(&unit_gap(), 1.0), Err(GmmError::OutOfDomain { .. })));
        assert!(matches!(analytic_fpr_highscore(&unit_gap(), 0.0), Err(GmmError::OutOfDomain { .. })));
        assert!(matches!(GmmParams::new(0.0, 0.0, 0.0, 1.0), Err(GmmError::NonPositiveSigma { .. })));
    }

    #[test]
    fn near_degenerate_sampling() {
        let p = GmmParams::new(0.25, 1e-12, -0.5, 1e-12).unwrap();
        let s = sample_gmm(&p, 1000, 1000, 5);
        assert!(s.id_scores.iter().all(|x| (x - 0.25).abs() < 1e-9));
        assert!(s.ood_scores.iter().all(|x| (x + 0.5).abs() < 1e-9));
    }

    #[test]
    fn sample_mean_within_standard_error() {
        let p = GmmParams::new(0.7, 0.2, 0.1, 0.3).unwrap();
        let n = 1_000_000;
        let s = sample_gmm(&p, n, 10, 3);
        let mean = s.id_scores.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.7).abs() < 4.0 * 0.2 / (n as f64).sqrt());
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = unit_gap();
        assert_eq!(sample_gmm(&p, 100, 50, 8), sample_gmm(&p, 100, 50, 8));
        assert_ne!(sample_gmm(&p, 100, 50, 8), sample_gmm(&p, 100, 50, 9));
        assert_eq!(sample_gmm(&p, 100, 50, 8).id_scores, sample_gmm(&p, 100, 7, 8).id_scores);
    }

    #[test]
    fn delta_arithmetic() {
        let p = GmmParams::new(1.0, 0.5, 0.0, 0.3).unwrap();
        let d = ParamDelta { d_mu_id: -0.2, d_sigma_id: -0.2, d_mu_ood: -0.05, d_sigma_ood: -0.02 };
        let q = apply_cover_delta(&p, &d).unwrap();
        assert!((q.mu_id - 0.8).abs() < 1e-15);
        assert!((q.sigma_id - 0.3).abs() < 1e-15);
        assert!((q.mu_ood + 0.05).abs() < 1e-15);
        assert!((q.sigma_ood - 0.28).abs() < 1e-15);
        assert_eq!(apply_cover_delta(&p, &ParamDelta::default()).unwrap(), p);
        let r = d.assumptions();
        assert!(r.id_mean_moves_more && r.id_spread_moves_more);
    }

    #[test]
    fn delta_rejects_non_positive_sigma() {
        let p = GmmParams::new(1.0, 0.5, 0.0, 0.3).unwrap();
        let d = ParamDelta { d_sigma_id: -0.5, ..Default::default() };
        assert!(matches!(apply_cover_delta(&p, &d), Err(GmmError::NonPositiveSigma { name: "sigma_id", .. })));
    }

    #[test]
    fn lemma_variance_contraction_declines() {
        // d/d(sigma_id) of the Phi argument is Phi^-1(0.05)/sigma_ood < 0, so
        // shrinking sigma_id raises the argument and lowers 1 - Phi(argument).
        let d_arg_d_sigma = gaussian_quantile(0.05).unwrap() / 1.0;
        assert!(d_arg_d_sigma < 0.0);
        let d = ParamDelta { d_sigma_id: -0.3, ..Default::default() };
        let check = verify_lemma(&unit_gap(), &d, 0.95).unwrap();
        assert!(check.declined);
        assert!(check.fpr_after < check.fpr_before);
    }

    #[test]
    fn lemma_zero_delta() {
        let check = verify_lemma(&unit_gap(), &ParamDelta::default(), 0.95).unwrap();
        assert_eq!(check.fpr_before, check.fpr_after);
        assert!(!check.declined);
    }

    #[test]
    fn lemma_mean_narrowing_alone_raises_fpr() {
        let d = ParamDelta { d_mu_id: -0.3, ..Default::default() };
        let check = verify_lemma(&unit_gap(), &d, 0.95).unwrap();
        // 1 - Phi(0.7 - 1.6449) vs 1 - Phi(1 - 1.6449)
        let expected_after = 1.0 - gaussian_cdf(0.7 - 1.644_853_626_951_472_2);
        assert!((check.fpr_after - expected_after).abs() < 1e-12);
        assert!(!check.declined);
    }

    #[test]
    fn moment_fit_recovers_parameters() {
        let p = GmmParams::new(0.6, 0.1, 0.2, 0.15).unwrap();
        let fit = GmmParams::fit_moments(&sample_gmm(&p, 200_000, 200_000, 1)).unwrap();
        assert!((fit.mu_id - 0.6).abs() < 0.002);
        assert!((fit.sigma_ood - 0.15).abs() < 0.002);
    }
}
