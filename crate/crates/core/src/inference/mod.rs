//! Estimators of active information and the fine-tuning test.
//!
//! Every estimator returns an [`EstimationResult`] holding a point estimate
//! in nats, a plug-in asymptotic variance `V` (so that `sqrt(n)(est - I)`
//! is approximately `N(0, V)`), and a nominal 95% Wald interval
//! `est ± 1.96 sqrt(V / n)`. A sample with no target hits gives a `-inf`
//! estimate, flagged `degenerate`, with no interval.

mod family;
mod nuisance;
mod onesample;

pub use family::{
    log_likelihood, score_derivatives, scores, FixedLaw, FnFamily, ParametricFamily, TiltParametric, FD_REL_STEP,
    FD_REL_STEP_SECOND,
};
pub use nuisance::{
    joint_mle, lower_bound_actinfo, lower_bound_from_counts, p0_max, p0_max_by, param_variance_nuisance,
    param_variance_nuisance_with_steps, two_sample_actinfo, QEstimator, JOINT_MLE_MAX_SWEEPS, JOINT_MLE_TOL,
};
pub use onesample::{mle_tilt, nonparam_actinfo, nonparam_from_counts, param_actinfo, param_variance, theta_star, SCORE_TOL};

use crate::numerics::Z_95;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Nonparametric,
    Parametric,
    LowerBoundNonparametric,
    LowerBoundParametric,
    TwoSampleNonparametric,
    TwoSampleParametric,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Nonparametric => "nonparametric",
            Self::Parametric => "parametric",
            Self::LowerBoundNonparametric => "lower_bound_nonparametric",
            Self::LowerBoundParametric => "lower_bound_parametric",
            Self::TwoSampleNonparametric => "two_sample_nonparametric",
            Self::TwoSampleParametric => "two_sample_parametric",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub kind: EstimatorKind,
    /// Empirical active information, nats.
    pub estimate: f64,
    /// Asymptotic variance of `sqrt(n)` times the estimate.
    pub variance: f64,
    pub n: usize,
    pub n0: Option<usize>,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Set when no draw fell in the target (`estimate = -inf`).
    pub degenerate: bool,
    pub theta_hat: Option<f64>,
    pub xi_hat: Option<f64>,
    /// `log[P_{0 xi}(A) / P0max(A)]` for lower-bound estimators when the
    /// true nuisance parameter is known.
    pub bias: Option<f64>,
}

impl EstimationResult {
    pub(crate) fn new(kind: EstimatorKind, estimate: f64, variance: f64, n: usize) -> Self {
        let degenerate = estimate == f64::NEG_INFINITY;
        let (ci_low, ci_high) = if degenerate || !variance.is_finite() {
            (f64::NAN, f64::NAN)
        } else {
            let half = Z_95 * (variance / n as f64).sqrt();
            (estimate - half, estimate + half)
        };
        Self { kind, estimate, variance, n, n0: None, ci_low, ci_high, degenerate, theta_hat: None, xi_hat: None, bias: None }
    }

    /// Standard error `sqrt(V / n)`.
    pub fn std_error(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }

    pub fn covers(&self, value: f64) -> bool {
        !self.degenerate && self.ci_low <= value && value <= self.ci_high
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub reject: bool,
    pub i_min: f64,
    /// `P0(A) exp(i_min)`.
    pub p_min: f64,
    pub kind: EstimatorKind,
}

/// Reject the no-fine-tuning null when the estimate reaches `i_min`.
pub fn ft_test(result: &EstimationResult, i_min: f64, p0a: f64) -> TestOutcome {
    TestOutcome { reject: !result.degenerate && result.estimate >= i_min, i_min, p_min: p0a * i_min.exp(), kind: result.kind }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_decisions() {
        let r = EstimationResult::new(EstimatorKind::Nonparametric, 2f64.ln(), 0.5, 100);
        assert!(ft_test(&r, 2f64.ln(), 0.1).reject);
        let r = EstimationResult::new(EstimatorKind::Nonparametric, 1.5f64.ln(), 0.5, 100);
        let t = ft_test(&r, 2f64.ln(), 0.1);
        assert!(!t.reject);
        assert!((t.p_min - 0.2).abs() < 1e-15);
        let r = EstimationResult::new(EstimatorKind::Nonparametric, f64::NEG_INFINITY, f64::INFINITY, 100);
        assert!(r.degenerate && r.ci_low.is_nan());
        assert!(!ft_test(&r, -1e300, 0.1).reject);
    }

    #[test]
    fn interval_brackets_estimate() {
        let r = EstimationResult::new(EstimatorKind::Parametric, 0.3, 2.0, 50);
        assert!(r.ci_low <= r.estimate && r.estimate <= r.ci_high);
        assert!((r.ci_high - r.ci_low - 2.0 * 1.96 * (2.0f64 / 50.0).sqrt()).abs() < 1e-15);
    }
}
