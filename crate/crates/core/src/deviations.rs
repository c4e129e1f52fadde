//! Large-deviation rates of the fine-tuning tests.
//!
//! Under the null, the probability that a test rejects decays like
//! `exp(-n C)`. The rates here are Legendre transforms of cumulant
//! generating functions; [`exact_significance`] gives the exact binomial
//! tail for checking them.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::info::bernoulli_kl;
use crate::numerics::{bisect_decreasing, log_sum_exp};
use crate::space::TargetSet;
use crate::tilting::TiltedFamily;

/// Residual tolerance on the stationarity condition for `phi*`.
pub const PHI_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    Nonparametric,
    Parametric,
    /// Nonparametric test against a bound `p0max` with bias `B != 0`.
    Nuisance,
}

impl RateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Nonparametric => "nonparametric",
            Self::Parametric => "parametric",
            Self::Nuisance => "nuisance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Exponential rate `C`; `+inf` when rejection is impossible.
    pub rate: f64,
    pub kind: RateKind,
    pub p0a: f64,
    pub i_min: f64,
    pub p_min: f64,
    pub bias: f64,
    pub theta_min: Option<f64>,
    pub phi_star: Option<f64>,
    /// The supremum sits at `phi -> 0`, so `C = 0`.
    pub boundary: bool,
}

/// `C = KL(Be(p_min e^-B) || Be(P0(A)))` with `p_min = P0(A) e^{i_min}`.
pub fn nonparam_rate(p0a: f64, i_min: f64, bias: f64) -> Result<RateReport> {
    if !(p0a > 0.0 && p0a < 1.0) {
        return Err(Error::InvalidNull(p0a));
    }
    let p_min = p0a * i_min.exp();
    let shifted = p_min * (-bias).exp();
    let rate = if shifted >= 1.0 { f64::INFINITY } else { bernoulli_kl(shifted, p0a) };
    Ok(RateReport {
        rate,
        kind: if bias == 0.0 { RateKind::Nonparametric } else { RateKind::Nuisance },
        p0a,
        i_min,
        p_min,
        bias,
        theta_min: None,
        phi_star: None,
        boundary: rate == 0.0,
    })
}

/// `log[1 + P0(A)(e^phi - 1)]`, the cumulant generating function of a
/// `Be(P0(A))` variable.
pub fn cumulant(p0a: f64, phi: f64) -> f64 {
    (p0a * phi.exp_m1()).ln_1p()
}

/// `C = sup_{phi > 0} [phi m - log M(phi)]` where `m` is the mean of `f`
/// under `P_theta_min` and `P_theta_min(A) = p_min e^-B`.
pub fn param_rate(family: &TiltedFamily, a: &TargetSet, i_min: f64, bias: f64) -> Result<RateReport> {
    let p0a = family.target_probability(a, 0.0)?;
    if !(p0a > 0.0 && p0a < 1.0) {
        return Err(Error::InvalidNull(p0a));
    }
    let p_min = p0a * i_min.exp();
    let goal = p_min * (-bias).exp();
    if goal >= 1.0 {
        return Err(Error::OutOfRange { value: goal, range: "P0(A) exp(i_min - B) < 1".into() });
    }
    let theta_min = family.solve_theta_with_tol(a, goal, 1e-15)?;
    let (m, _) = family.tilted_moments(theta_min);
    let (m0, _) = family.tilted_moments(0.0);
    let mut report = RateReport {
        rate: 0.0,
        kind: RateKind::Parametric,
        p0a,
        i_min,
        p_min,
        bias,
        theta_min: Some(theta_min),
        phi_star: Some(0.0),
        boundary: true,
    };
    if m <= m0 {
        return Ok(report);
    }
    let phi = bisect_decreasing(|phi| m - family.tilted_moments(phi).0, 0.0, PHI_TOL)?;
    report.rate = (phi * m - family.log_partition(phi)).max(0.0);
    report.phi_star = Some(phi);
    report.boundary = phi == 0.0;
    Ok(report)
}

/// Smallest hit count `k` with `k / n >= p_min`, forgiving float noise in
/// `n p_min`.
pub fn rejection_count(n: u64, p_min: f64) -> f64 {
    let x = n as f64 * p_min;
    (x - 1e-9 * x.max(1.0)).ceil()
}

fn log_binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0) + kf * p.ln() + (nf - kf) * (-p).ln_1p()
}

/// `log P(Bin(n, P0(A)) >= ceil(n p_min))`, exactly.
pub fn exact_significance(n: u64, p0a: f64, p_min: f64) -> Result<f64> {
    if !(p0a > 0.0 && p0a < 1.0) {
        return Err(Error::InvalidNull(p0a));
    }
    let k = rejection_count(n, p_min);
    if k > n as f64 {
        return Ok(f64::NEG_INFINITY);
    }
    if k <= 0.0 {
        return Ok(0.0);
    }
    let k = k as u64;
    let terms: Vec<f64> = (k..=n).map(|j| log_binomial_pmf(n, j, p0a)).collect();
    Ok(log_sum_exp(terms.iter().copied()).min(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub n: u64,
    pub log_level: f64,
    /// `-log_level / n`.
    pub normalized_rate: f64,
}

/// [`exact_significance`] over increasing `n`, normalized by `n`.
pub fn decay_slope(n_values: &[u64], p0a: f64, p_min: f64) -> Result<Vec<DecayRow>> {
    if n_values.windows(2).any(|w| w[0] >= w[1]) || n_values.first() == Some(&0) {
        return Err(Error::OutOfRange { value: 0.0, range: "strictly increasing positive n".into() });
    }
    n_values
        .iter()
        .map(|&n| {
            let log_level = exact_significance(n, p0a, p_min)?;
            Ok(DecayRow { n, log_level, normalized_rate: -log_level / n as f64 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Distribution, SpecificityProfile, StateSpace};
    use proptest::prelude::*;

    const C_HALVING: f64 = 0.012_581_239_888_442_668;

    #[test]
    fn nonparametric_rates() {
        assert_eq!(nonparam_rate(0.1, 0.0, 0.0).unwrap().rate, 0.0);
        let r = nonparam_rate(1.0 / 32.0, 2f64.ln(), 0.0).unwrap();
        assert!((r.rate - C_HALVING).abs() < 1e-15);
        assert!((r.p_min - 1.0 / 16.0).abs() < 1e-16);
        assert_eq!(nonparam_rate(0.5, 1.0, 0.0).unwrap().rate, f64::INFINITY);
        assert_eq!(nonparam_rate(0.0, 1.0, 0.0), Err(Error::InvalidNull(0.0)));
        assert_eq!(nonparam_rate(1.0 / 32.0, 2f64.ln(), -0.1).unwrap().kind, RateKind::Nuisance);
    }

    #[test]
    fn cumulant_values() {
        assert_eq!(cumulant(0.3, 0.0), 0.0);
        assert_eq!(cumulant(0.0, 5.0), 0.0);
        assert!((cumulant(0.5, 3f64.ln()) - 2f64.ln()).abs() < 1e-15);
    }

    fn binary_family() -> (TiltedFamily, TargetSet) {
        let s = StateSpace::indexed(4).unwrap();
        let p0 = Distribution::new(s.clone(), vec![0.5, 0.3, 0.1625, 0.0375]).unwrap();
        let spec = SpecificityProfile::new(s.clone(), vec![0.0, 0.0, 0.0, 2.0], 2.0).unwrap();
        (TiltedFamily::new(p0, spec).unwrap(), TargetSet::new(s, vec![3]).unwrap())
    }

    #[test]
    fn parametric_matches_nonparametric_for_binary_profile() {
        let (fam, a) = binary_family();
        for i_min in [0.3, 1.0, 2.5] {
            let p = param_rate(&fam, &a, i_min, 0.0).unwrap();
            let np = nonparam_rate(0.0375, i_min, 0.0).unwrap();
            assert!((p.rate - np.rate).abs() < 1e-10, "{} vs {}", p.rate, np.rate);
        }
        let zero = param_rate(&fam, &a, 0.0, 0.0).unwrap();
        assert_eq!((zero.rate, zero.boundary), (0.0, true));
        assert!(param_rate(&fam, &a, 10.0, 0.0).is_err());
    }

    #[test]
    fn exact_tails() {
        assert_eq!(exact_significance(10, 0.2, 1.5).unwrap(), f64::NEG_INFINITY);
        assert_eq!(exact_significance(10, 0.2, 0.0).unwrap(), 0.0);
        assert!(exact_significance(100, 0.999, 0.01).unwrap() > -1e-12);
        // P(Bin(4, 1/2) >= 3) = 5/16
        assert!((exact_significance(4, 0.5, 0.75).unwrap() - (5.0f64 / 16.0).ln()).abs() < 1e-14);
        let v = exact_significance(2000, 1.0 / 32.0, 1.0 / 16.0).unwrap();
        assert!((v - -27.816_836_706_484_47).abs() < 1e-9);
        let v = exact_significance(4000, 1.0 / 32.0, 1.0 / 16.0).unwrap();
        assert!((v - -53.318_602_301_805_81).abs() < 1e-9);
        assert!(((-v / 4000.0 - C_HALVING) / C_HALVING).abs() < 0.10);
    }

    #[test]
    fn decay_toward_rate() {
        let rows = decay_slope(&[250, 500, 1000, 2000, 4000], 1.0 / 32.0, 1.0 / 16.0).unwrap();
        let gaps: Vec<f64> = rows.iter().map(|r| (r.normalized_rate - C_HALVING) / C_HALVING).collect();
        assert!(gaps.last().unwrap().abs() < 0.07);
        for w in gaps.windows(2) {
            let ratio = w[0] / w[1];
            assert!((2.0 / 1.5..=3.0).contains(&ratio), "{gaps:?}");
        }
        assert!(decay_slope(&[10, 5], 0.1, 0.2).is_err());
    }

    proptest! {
        #[test]
        fn rate_grows_with_threshold(p0a in 0.001f64..0.9, i1 in 0.0f64..3.0, di in 0.001f64..1.0) {
            let lo = nonparam_rate(p0a, i1, 0.0).unwrap().rate;
            let hi = nonparam_rate(p0a, i1 + di, 0.0).unwrap().rate;
            prop_assert!(lo >= 0.0);
            prop_assert!(hi > lo || hi == f64::INFINITY);
        }

        #[test]
        fn negative_bias_raises_rate(p0a in 0.001f64..0.5, i_min in 0.01f64..0.5, b in -0.5f64..-0.01) {
            prop_assume!(p0a * (i_min - b).exp() < 1.0);
            prop_assert!(nonparam_rate(p0a, i_min, b).unwrap().rate > nonparam_rate(p0a, i_min, 0.0).unwrap().rate);
        }
    }
}
