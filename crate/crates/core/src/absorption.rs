//! Searches that stop on first entry into the target.
//!
//! The target is clumped into one absorbing state. The hitting time `T`
//! then has a discrete phase-type law determined by the sub-stochastic
//! block `Pi^na` on the complement and the start vector restricted to it.
//! `T = 0` exactly when the initial draw already lies in the target.

use nalgebra::{DMatrix, DVector};

use crate::chains::TransitionKernel;
use crate::error::{Error, Result};
use crate::info::log_ratio;
use crate::space::{ensure_same, Distribution, TargetSet};

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbingDecomposition {
    trans_na: DMatrix<f64>,
    trans_na_a: Vec<f64>,
    start_na: Vec<f64>,
    start_in_a: f64,
    index_map: Vec<usize>,
}

pub fn decompose(kernel: &TransitionKernel, a: &TargetSet, p0: &Distribution) -> Result<AbsorbingDecomposition> {
    ensure_same(kernel.space(), a.space())?;
    ensure_same(kernel.space(), p0.space())?;
    if a.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let index_map = a.complement();
    if index_map.is_empty() {
        return Err(Error::EmptyComplement);
    }
    let k = index_map.len();
    let trans_na = DMatrix::from_fn(k, k, |i, j| kernel.get(index_map[i], index_map[j]));
    let trans_na_a = index_map.iter().map(|&x| a.members().iter().map(|&y| kernel.get(x, y)).sum()).collect();
    let start_na = index_map.iter().map(|&x| p0.mass()[x]).collect();
    let start_in_a = a.members().iter().map(|&x| p0.mass()[x]).sum();
    Ok(AbsorbingDecomposition { trans_na, trans_na_a, start_na, start_in_a, index_map })
}

impl AbsorbingDecomposition {
    pub fn trans_na(&self) -> &DMatrix<f64> {
        &self.trans_na
    }

    pub fn trans_na_a(&self) -> &[f64] {
        &self.trans_na_a
    }

    pub fn start_na(&self) -> &[f64] {
        &self.start_na
    }

    pub fn start_in_a(&self) -> f64 {
        self.start_in_a
    }

    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }

    fn step(&self, v: &[f64]) -> Vec<f64> {
        let row = DVector::from_column_slice(v);
        (0..self.trans_na.ncols()).map(|j| self.trans_na.column(j).dot(&row)).collect()
    }

    /// Surviving mass `P(T > s)` for `s = 0..=t_max`.
    pub fn survival_series(&self, t_max: u64) -> Vec<f64> {
        let mut v = self.start_na.clone();
        let mut out = Vec::with_capacity(t_max as usize + 1);
        out.push(v.iter().sum());
        for _ in 0..t_max {
            v = self.step(&v);
            out.push(v.iter().sum());
        }
        out
    }

    /// `P(T <= t) = 1 - P0^na (Pi^na)^t 1`, accumulated as absorbed mass.
    pub fn absorption_cdf(&self, t: u64) -> f64 {
        *self.cdf_series(t).last().expect("series has t + 1 entries")
    }

    /// `P(T <= s)` for `s = 0..=t_max`, nondecreasing.
    pub fn cdf_series(&self, t_max: u64) -> Vec<f64> {
        let mut best = 0.0f64;
        let start: f64 = self.start_na.iter().sum();
        self.survival_series(t_max)
            .into_iter()
            .map(|s| {
                // monotone in exact arithmetic; guard the last ulp
                best = best.max((self.start_in_a + (start - s)).clamp(0.0, 1.0));
                best
            })
            .collect()
    }

    /// `log[P(T <= t) / P0(A)]`.
    pub fn actinfo_stopped(&self, p0a: f64, t: u64) -> Result<f64> {
        log_ratio(self.absorption_cdf(t), p0a)
    }

    /// `I_s+(theta, s)` for `s = 0..=t_max`.
    pub fn actinfo_stopped_series(&self, p0a: f64, t_max: u64) -> Result<Vec<f64>> {
        self.cdf_series(t_max).into_iter().map(|c| log_ratio(c, p0a)).collect()
    }

    /// `E(T) = P0^na (I - Pi^na)^{-1} 1`.
    pub fn expected_hitting_time(&self) -> Result<f64> {
        let k = self.index_map.len();
        let a = DMatrix::<f64>::identity(k, k) - &self.trans_na;
        let ones = DVector::from_element(k, 1.0);
        let x = a
            .lu()
            .solve(&ones)
            .ok_or_else(|| Error::SingularSystem("I - Pi^na is singular; the target is unreachable".into()))?;
        if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::SingularSystem("fundamental matrix solve is unstable".into()));
        }
        Ok(self.start_na.iter().zip(x.iter()).map(|(p, t)| p * t).sum())
    }

    /// Bound on the decay rate of the surviving mass: the largest row sum of
    /// `Pi^na` when it is below one, otherwise a power-iteration estimate of
    /// the spectral radius.
    pub fn decay_rate(&self) -> f64 {
        let k = self.index_map.len();
        let max_row = (0..k).map(|i| self.trans_na.row(i).sum()).fold(0.0, f64::max);
        if max_row < 1.0 {
            return max_row;
        }
        let mut v = vec![1.0 / k as f64; k];
        let mut rho = 1.0;
        for _ in 0..10_000 {
            let next = self.step(&v);
            let norm: f64 = next.iter().sum();
            if norm == 0.0 {
                return 0.0;
            }
            let prev = rho;
            rho = norm / v.iter().sum::<f64>();
            v = next.into_iter().map(|x| x / norm).collect();
            if (rho - prev).abs() < 1e-14 {
                break;
            }
        }
        rho
    }

    /// Truncated series `sum_{t=0}^{t_max} P(T > t)` with `t_max` chosen so
    /// that `rho^t_max / (1 - rho) < tail_tol`. Returns the sum and `t_max`.
    pub fn hitting_time_series(&self, tail_tol: f64) -> Result<(f64, u64)> {
        let rho = self.decay_rate();
        if rho >= 1.0 {
            return Err(Error::SingularSystem("surviving mass does not decay".into()));
        }
        let t_max = if rho == 0.0 { 1 } else { ((tail_tol * (1.0 - rho)).ln() / rho.ln()).ceil().max(1.0) as u64 };
        let sum = self.survival_series(t_max).iter().sum();
        Ok((sum, t_max))
    }

    /// Chain on `A^c` plus one absorbing state (last index).
    pub fn clumped_matrix(&self) -> DMatrix<f64> {
        let k = self.index_map.len();
        let mut m = DMatrix::zeros(k + 1, k + 1);
        m.view_mut((0, 0), (k, k)).copy_from(&self.trans_na);
        for i in 0..k {
            m[(i, k)] = self.trans_na_a[i];
        }
        m[(k, k)] = 1.0;
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::TransitionKernel;
    use crate::space::StateSpace;

    fn geometric(p: f64, start: Vec<f64>) -> AbsorbingDecomposition {
        let s = StateSpace::indexed(2).unwrap();
        let k = TransitionKernel::from_matrix(s.clone(), DMatrix::from_row_slice(2, 2, &[1.0 - p, p, 0.3, 0.7])).unwrap();
        let a = TargetSet::new(s.clone(), vec![1]).unwrap();
        decompose(&k, &a, &Distribution::new(s, start).unwrap()).unwrap()
    }

    #[test]
    fn one_by_one_blocks() {
        let d = geometric(0.2, vec![0.6, 0.4]);
        assert_eq!(d.trans_na().as_slice(), &[0.8]);
        assert_eq!(d.trans_na_a(), &[0.2]);
        assert_eq!(d.start_na(), &[0.6]);
        assert_eq!(d.start_in_a(), 0.4);
        assert_eq!(d.index_map(), &[0]);
    }

    #[test]
    fn geometric_law() {
        let p = 0.15;
        let d = geometric(p, vec![1.0, 0.0]);
        assert_eq!(d.absorption_cdf(0), 0.0);
        for t in [1u64, 2, 5, 40] {
            let exact = 1.0 - (1.0 - p).powi(t as i32);
            assert!((d.absorption_cdf(t) - exact).abs() < 1e-14);
        }
        assert!((d.absorption_cdf(2000) - 1.0).abs() < 1e-14);
        assert!((d.expected_hitting_time().unwrap() - 1.0 / p).abs() < 1e-12);
        let (series, _) = d.hitting_time_series(1e-8).unwrap();
        assert!((series - 1.0 / p).abs() < 1e-6);
    }

    #[test]
    fn started_in_target() {
        let d = geometric(0.3, vec![0.0, 1.0]);
        assert_eq!(d.absorption_cdf(0), 1.0);
        assert_eq!(d.expected_hitting_time().unwrap(), 0.0);
        assert_eq!(d.actinfo_stopped(1.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn zero_absorption_rows_allowed() {
        let s = StateSpace::indexed(3).unwrap();
        let k = TransitionKernel::from_matrix(
            s.clone(),
            DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.2, 0.4, 0.4, 0.0, 0.1, 0.9]),
        )
        .unwrap();
        let a = TargetSet::new(s.clone(), vec![2]).unwrap();
        let d = decompose(&k, &a, &Distribution::point_mass(s, 0).unwrap()).unwrap();
        assert_eq!(d.trans_na_a()[0], 0.0);
        assert!(d.absorption_cdf(1) == 0.0 && d.absorption_cdf(2) > 0.0);
        let et = d.expected_hitting_time().unwrap();
        let (series, _) = d.hitting_time_series(1e-8).unwrap();
        assert!((et - series).abs() < 1e-6);
    }

    #[test]
    fn empty_complement() {
        let s = StateSpace::indexed(2).unwrap();
        let k = TransitionKernel::from_matrix(s.clone(), DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])).unwrap();
        let a = TargetSet::new(s.clone(), vec![0, 1]).unwrap();
        assert_eq!(decompose(&k, &a, &Distribution::uniform(s)), Err(Error::EmptyComplement));
    }
}
