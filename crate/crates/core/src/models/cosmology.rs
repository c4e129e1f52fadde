use crate::error::{Error, Result};
use crate::numerics::golden_max;

/// Largest gap between the numeric bound and `1 - ln eps - ln 2` for which
/// the small-interval approximation is reported as usable.
pub const APPROX_TOL: f64 = 0.01;

/// Life-permitting interval `(a, b)` for a quantity with exponential prior
/// of unknown scale `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosmologyModel {
    a: f64,
    b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosmologyBound {
    /// `-log max_xi P_{0 xi}(A)`.
    pub value: f64,
    pub xi_star: f64,
    pub p0max: f64,
    /// Half the relative width, `(b - a) / (a + b)`.
    pub epsilon: f64,
    /// `1 - ln eps - ln 2`.
    pub approximation: f64,
    /// Whether the approximation is within [`APPROX_TOL`] of `value`.
    pub approximation_ok: bool,
}

impl CosmologyModel {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < b && b.is_finite()) {
            return Err(Error::InvalidModel(format!("need 0 < a < b, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }

    /// Interval of midpoint `x` and half relative width `eps`.
    pub fn centered(x: f64, eps: f64) -> Result<Self> {
        Self::new(x * (1.0 - eps), x * (1.0 + eps))
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn epsilon(&self) -> f64 {
        (self.b - self.a) / (self.a + self.b)
    }

    /// `P_{0 xi}(A) = e^{-a/xi} - e^{-b/xi}`; zero for `xi <= 0`.
    pub fn interval_prob(&self, xi: f64) -> f64 {
        if !(xi > 0.0) {
            return 0.0;
        }
        if xi.is_infinite() {
            return 0.0;
        }
        (-self.a / xi).exp() * -(-(self.b - self.a) / xi).exp_m1()
    }

    pub fn actinfo_bound(&self) -> CosmologyBound {
        let lo = (self.b - self.a) / 100.0;
        let hi = 100.0 * self.b;
        let (xi_star, p0max) = golden_max(|xi| self.interval_prob(xi), lo, hi, 1e-12 * self.b);
        let epsilon = self.epsilon();
        let value = -p0max.ln();
        let approximation = 1.0 - epsilon.ln() - 2f64.ln();
        CosmologyBound {
            value,
            xi_star,
            p0max,
            epsilon,
            approximation,
            approximation_ok: (value - approximation).abs() <= APPROX_TOL,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_probability() {
        let m = CosmologyModel::new(2f64.ln(), 4f64.ln()).unwrap();
        assert!((m.interval_prob(1.0) - 0.25).abs() < 1e-15);
        assert_eq!(m.interval_prob(0.0), 0.0);
        assert!(m.interval_prob(1e-3) < 1e-300);
        assert!(m.interval_prob(1e12) < 1e-12);
        let m = CosmologyModel::new(1.0, 1.02).unwrap();
        let eps = m.epsilon();
        assert!((eps - 0.0099).abs() < 1e-4);
        let p = m.interval_prob(1.01);
        assert!(((p - 2.0 * eps * (-1f64).exp()) / p).abs() < 1e-3);
    }

    #[test]
    fn maximizer_matches_logarithmic_mean() {
        for (a, b) in [(1.0, 1.02), (0.5, 3.0), (10.0, 11.0)] {
            let m = CosmologyModel::new(a, b).unwrap();
            let exact = (b - a) / (b / a).ln();
            let bound = m.actinfo_bound();
            assert!((bound.xi_star - exact).abs() < 1e-6 * b, "{} vs {exact}", bound.xi_star);
            assert!((bound.p0max - m.interval_prob(exact)).abs() < 1e-15);
        }
    }

    #[test]
    fn small_interval_approximation() {
        let at = |eps: f64| CosmologyModel::centered(1.0, eps).unwrap().actinfo_bound();
        assert!((at(1e-2).value - 4.912_006).abs() < 1e-5);
        let b = at(1e-3);
        assert!((b.value - (1.0 + 3.0 * 10f64.ln() - 2f64.ln())).abs() < 0.01);
        assert!(b.approximation_ok);
        let wide = at(0.9);
        assert!(!wide.approximation_ok);
        assert!(wide.value.is_finite() && wide.value > 0.0);
        assert!(CosmologyModel::new(1.0, 1.0).is_err());
    }
}
