//! Exponential tilting of a null law by a specificity function.
//!
//! For `theta` real, `P_theta(x) = exp(theta f(x)) P0(x) / M(theta)`. States
//! with `P0(x) = 0` stay at zero for every `theta`. All sums are shifted by
//! the largest exponent on the support, so `theta` in the hundreds is safe.

use crate::error::{Error, Result};
use crate::info::log_ratio;
use crate::numerics::{bisect_bracket, log_sum_exp};
use crate::space::{ensure_same, Distribution, SpecificityProfile, TargetSet};

/// Tolerance on `|P_theta(A) - p|` in [`TiltedFamily::solve_theta_for_target`].
pub const TARGET_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TiltedFamily {
    base: Distribution,
    spec: SpecificityProfile,
}

impl TiltedFamily {
    pub fn new(base: Distribution, spec: SpecificityProfile) -> Result<Self> {
        ensure_same(base.space(), spec.space())?;
        Ok(Self { base, spec })
    }

    pub fn base(&self) -> &Distribution {
        &self.base
    }

    pub fn spec(&self) -> &SpecificityProfile {
        &self.spec
    }

    fn log_weights(&self, theta: f64) -> impl Iterator<Item = f64> + Clone + '_ {
        self.base.mass().iter().zip(self.spec.values()).map(
            move |(&p, &f)| {
                if p > 0.0 {
                    theta * f + p.ln()
                } else {
                    f64::NEG_INFINITY
                }
            },
        )
    }

    /// `log M(theta) = log sum_x exp(theta f(x)) P0(x)`.
    pub fn log_partition(&self, theta: f64) -> f64 {
        if theta == 0.0 {
            return 0.0;
        }
        log_sum_exp(self.log_weights(theta))
    }

    pub fn tilt(&self, theta: f64) -> Distribution {
        if theta == 0.0 {
            return self.base.clone();
        }
        if theta == f64::INFINITY {
            return self.limit();
        }
        let lw: Vec<f64> = self.log_weights(theta).collect();
        let shift = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Distribution::from_weights(self.base.space().clone(), lw.iter().map(|w| (w - shift).exp()).collect())
    }

    /// Weak limit of `P_theta` as `theta -> inf`: `P0` conditioned on the
    /// states where `f` is maximal within the support of `P0`.
    pub fn limit(&self) -> Distribution {
        let fmax = self.support_max();
        let w =
            self.base.mass().iter().zip(self.spec.values()).map(|(&p, &f)| if p > 0.0 && f == fmax { p } else { 0.0 }).collect();
        Distribution::from_weights(self.base.space().clone(), w)
    }

    fn support_max(&self) -> f64 {
        self.base
            .mass()
            .iter()
            .zip(self.spec.values())
            .filter(|(&p, _)| p > 0.0)
            .map(|(_, &f)| f)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn support_min(&self) -> f64 {
        self.base.mass().iter().zip(self.spec.values()).filter(|(&p, _)| p > 0.0).map(|(_, &f)| f).fold(f64::INFINITY, f64::min)
    }

    /// Whether `f` takes at least two values on the support of `P0`.
    pub fn is_nonconstant(&self) -> bool {
        self.support_max() > self.support_min()
    }

    /// Mean and variance of `f` under `P_theta`.
    pub fn tilted_moments(&self, theta: f64) -> (f64, f64) {
        moments(&self.tilt(theta), self.spec.values())
    }

    pub fn target_probability(&self, a: &TargetSet, theta: f64) -> Result<f64> {
        ensure_same(self.base.space(), a.space())?;
        let p = self.tilt(theta);
        Ok(a.members().iter().map(|&i| p.mass()[i]).sum())
    }

    /// `log[P_theta(A) / P0(A)]`.
    pub fn actinfo_equilibrium(&self, a: &TargetSet, theta: f64) -> Result<f64> {
        let p0a = self.target_probability(a, 0.0)?;
        if p0a <= 0.0 {
            return Err(Error::NullTargetZero);
        }
        if theta == 0.0 {
            return Ok(0.0);
        }
        log_ratio(self.target_probability(a, theta)?, p0a)
    }

    /// The `theta >= 0` with `P_theta(A) = p`, for `P0(A) <= p < 1`.
    pub fn solve_theta_for_target(&self, a: &TargetSet, p: f64) -> Result<f64> {
        self.solve_theta_with_tol(a, p, TARGET_TOL)
    }

    pub(crate) fn solve_theta_with_tol(&self, a: &TargetSet, p: f64, tol: f64) -> Result<f64> {
        let p0a = self.target_probability(a, 0.0)?;
        if !(p >= p0a - TARGET_TOL && p < 1.0) {
            return Err(Error::OutOfRange { value: p, range: format!("[{p0a}, 1)") });
        }
        let gap = |theta: f64| p - self.target_probability(a, theta).unwrap_or(f64::NAN);
        if gap(0.0) <= tol {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        while gap(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::NoConvergence(format!("P_theta(A) never reaches {p}")));
            }
        }
        bisect_bracket(gap, 0.0, hi, tol)
    }
}

/// Mean and variance of `values` under `p`.
pub fn moments(p: &Distribution, values: &[f64]) -> (f64, f64) {
    let mean = p.expectation(values);
    let var = p.mass().iter().zip(values).map(|(w, v)| w * (v - mean) * (v - mean)).sum::<f64>();
    (mean, var.max(0.0))
}

/// `Cov_P(f(X), 1{X in A})`.
pub fn target_covariance(p: &Distribution, values: &[f64], a: &TargetSet) -> f64 {
    let mean = p.expectation(values);
    a.members().iter().map(|&i| p.mass()[i] * (values[i] - mean)).sum()
}
