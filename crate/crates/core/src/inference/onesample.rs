use crate::error::{Error, Result};
use crate::numerics::bisect_decreasing;
use crate::sampling::SampleSet;
use crate::space::{ensure_same, Distribution, TargetSet};
use crate::tilting::{moments, target_covariance, TiltedFamily};

use super::{EstimationResult, EstimatorKind};

/// Tolerance on the per-observation score at the tilting MLE.
pub const SCORE_TOL: f64 = 1e-10;

/// Estimator from a hit count: `log[(hits/n) / P0(A)]` with variance
/// `(1 - Q)/Q`.
pub fn nonparam_from_counts(hits: u64, n: usize, p0a: f64) -> Result<EstimationResult> {
    if p0a <= 0.0 {
        return Err(Error::NullTargetZero);
    }
    if n == 0 {
        return Err(Error::OutOfRange { value: 0.0, range: "n >= 1".into() });
    }
    let q = hits as f64 / n as f64;
    if hits == 0 {
        return Ok(EstimationResult::new(EstimatorKind::Nonparametric, f64::NEG_INFINITY, f64::INFINITY, n));
    }
    let variance = if hits as usize == n { 0.0 } else { (1.0 - q) / q };
    Ok(EstimationResult::new(EstimatorKind::Nonparametric, q.ln() - p0a.ln(), variance, n))
}

pub fn nonparam_actinfo(sample: &SampleSet, a: &TargetSet, p0a: f64) -> Result<EstimationResult> {
    ensure_same(sample.space(), a.space())?;
    nonparam_from_counts(sample.hits(a), sample.len(), p0a)
}

/// Solve `E_theta f = mean` over `theta >= 0`; `0` when `mean` does not
/// exceed the null mean and `+inf` when it reaches the largest value of `f`.
fn match_mean(family: &TiltedFamily, mean: f64) -> Result<f64> {
    if !family.is_nonconstant() {
        return Err(Error::ConstantSpecificity);
    }
    let (base_mean, _) = family.tilted_moments(0.0);
    if mean <= base_mean {
        return Ok(0.0);
    }
    let (top, _) = moments(&family.limit(), family.spec().values());
    if mean >= top {
        return Ok(f64::INFINITY);
    }
    bisect_decreasing(|t| mean - family.tilted_moments(t).0, 0.0, SCORE_TOL)
}

fn sample_moments(sample: &SampleSet, values: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.draws().iter().map(|&x| values[x]).sum::<f64>() / n;
    let var = sample.draws().iter().map(|&x| (values[x] - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Maximum likelihood `theta >= 0` for the tilted family.
pub fn mle_tilt(sample: &SampleSet, family: &TiltedFamily) -> Result<f64> {
    ensure_same(sample.space(), family.base().space())?;
    if sample.is_empty() {
        return Err(Error::OutOfRange { value: 0.0, range: "n >= 1".into() });
    }
    if !family.is_nonconstant() {
        return Err(Error::ConstantSpecificity);
    }
    match_mean(family, sample_moments(sample, family.spec().values()).0)
}

/// `argmin_{theta >= 0} KL(Q || P_theta)`.
pub fn theta_star(q: &Distribution, family: &TiltedFamily) -> Result<f64> {
    ensure_same(q.space(), family.base().space())?;
    match_mean(family, q.expectation(family.spec().values()))
}

/// `Cov(f, 1_A)^2 Var_Q f / (P(A)^2 Var_P(f)^2)` under `P = P_theta`.
pub fn param_variance(family: &TiltedFamily, a: &TargetSet, theta: f64, var_q: f64) -> Result<f64> {
    let p = family.tilt(theta);
    let (_, var_p) = moments(&p, family.spec().values());
    let pa: f64 = a.members().iter().map(|&i| p.mass()[i]).sum();
    if var_p <= 0.0 || pa <= 0.0 {
        return Ok(0.0);
    }
    let cov = target_covariance(&p, family.spec().values(), a);
    Ok(cov * cov * var_q / (pa * pa * var_p * var_p))
}

pub fn param_actinfo(sample: &SampleSet, family: &TiltedFamily, a: &TargetSet) -> Result<EstimationResult> {
    ensure_same(sample.space(), a.space())?;
    let theta = mle_tilt(sample, family)?;
    let p0a = family.target_probability(a, 0.0)?;
    if p0a <= 0.0 {
        return Err(Error::NullTargetZero);
    }
    let estimate = family.actinfo_equilibrium(a, theta)?;
    let (_, var_q) = sample_moments(sample, family.spec().values());
    let variance = param_variance(family, a, theta, var_q)?;
    let mut r = EstimationResult::new(EstimatorKind::Parametric, estimate, variance, sample.len());
    r.theta_hat = Some(theta);
    Ok(r)
}
