use libm::erfc;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// `1 - Phi(z)` for the standard normal, accurate in the far tail.
pub fn upper_normal_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Test score `Y` of a student with covariates `Z ~ N(m, Sigma)`, where
/// `Y | Z = z` is normal with mean `xi_0 + xi.z + t(theta_0 + theta.z)` and
/// variance `sigma2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentModel {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    xi: DVector<f64>,
    sigma2: f64,
    theta: DVector<f64>,
    f0: f64,
}

impl StudentModel {
    /// `xi` and `theta` have `d` entries (intercept first); `mean` has
    /// `d - 1` and `cov` is `(d - 1) x (d - 1)` in row-major order.
    pub fn new(mean: Vec<f64>, cov: Vec<f64>, xi: Vec<f64>, sigma2: f64, theta: Vec<f64>, f0: f64) -> Result<Self> {
        let k = mean.len();
        if cov.len() != k * k || xi.len() != k + 1 || theta.len() != k + 1 {
            return Err(Error::InvalidModel(format!(
                "dimension mismatch: {k} covariates, {} covariance entries, {} xi, {} theta",
                cov.len(),
                xi.len(),
                theta.len()
            )));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::DegenerateVariance(sigma2));
        }
        let cov = DMatrix::from_row_slice(k, k, &cov);
        if (&cov - cov.transpose()).amax() > SYMMETRY_TOL * (1.0 + cov.amax()) {
            return Err(Error::InvalidModel("covariance is not symmetric".into()));
        }
        if k > 0 {
            let eig = SymmetricEigen::new(cov.clone()).eigenvalues;
            if eig.min() < -SYMMETRY_TOL * (1.0 + eig.amax()) {
                return Err(Error::InvalidModel(format!("covariance has negative eigenvalue {}", eig.min())));
            }
        }
        Ok(Self { mean: DVector::from_vec(mean), cov, xi: DVector::from_vec(xi), sigma2, theta: DVector::from_vec(theta), f0 })
    }

    fn slopes(&self, t: f64) -> DVector<f64> {
        let k = self.mean.len();
        self.xi.rows(1, k) + self.theta.rows(1, k) * t
    }

    /// Mean of `Y` after preparing for time `t`.
    pub fn score_mean(&self, t: f64) -> f64 {
        self.xi[0] + t * self.theta[0] + self.slopes(t).dot(&self.mean)
    }

    /// Variance of `Y` after preparing for time `t`.
    pub fn score_variance(&self, t: f64) -> f64 {
        let s = self.slopes(t);
        self.sigma2 + (s.transpose() * &self.cov * &s)[(0, 0)]
    }

    /// `P(Y >= f0)` after preparing for time `t`.
    pub fn pass_probability(&self, t: f64) -> Result<f64> {
        let v = self.score_variance(t);
        if !(v > 0.0) {
            return Err(Error::DegenerateVariance(v));
        }
        Ok(upper_normal_tail((self.f0 - self.score_mean(t)) / v.sqrt()))
    }

    /// `log[P(pass at t) / P(pass at t = 0)]`.
    pub fn actinfo(&self, t: f64) -> Result<f64> {
        Ok(self.pass_probability(t)?.ln() - self.pass_probability(0.0)?.ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(theta: Vec<f64>) -> StudentModel {
        StudentModel::new(vec![0.0], vec![1.0], vec![0.0, 1.0], 1.0, theta, 2.0).unwrap()
    }

    #[test]
    fn two_dimensional_instance() {
        let m = small(vec![1.0, 0.0]);
        assert!((m.score_mean(2.0) - 2.0).abs() < 1e-15);
        assert!((m.score_variance(2.0) - 2.0).abs() < 1e-15);
        assert!((m.pass_probability(2.0).unwrap() - 0.5).abs() < 1e-15);
        let p0 = m.pass_probability(0.0).unwrap();
        assert!((p0 - 0.078_649_603_525_142_58).abs() < 1e-12);
        assert!((m.actinfo(2.0).unwrap() - (0.5 / p0).ln()).abs() < 1e-14);
        assert!((m.actinfo(2.0).unwrap() - 1.849).abs() < 1e-3);
        assert_eq!(m.actinfo(0.0).unwrap(), 0.0);
        assert_eq!(small(vec![0.0, 0.0]).actinfo(5.0).unwrap(), 0.0);
    }

    #[test]
    fn normal_tail() {
        assert_eq!(upper_normal_tail(0.0), 0.5);
        assert!((upper_normal_tail(1.959_963_984_540_054) - 0.025).abs() < 1e-15);
        assert!((upper_normal_tail(-1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!(upper_normal_tail(10.0) > 0.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(StudentModel::new(vec![0.0; 2], vec![1.0, 2.0, 2.0, 1.0], vec![0.0; 3], 1.0, vec![0.0; 3], 0.0).is_err());
        assert!(StudentModel::new(vec![0.0; 2], vec![1.0, 0.5, 0.4, 1.0], vec![0.0; 3], 1.0, vec![0.0; 3], 0.0).is_err());
        assert_eq!(
            StudentModel::new(vec![0.0], vec![1.0], vec![0.0; 2], 0.0, vec![0.0; 2], 0.0),
            Err(Error::DegenerateVariance(0.0))
        );
        assert!(StudentModel::new(vec![0.0], vec![1.0], vec![0.0; 3], 1.0, vec![0.0; 2], 0.0).is_err());
    }
}
