use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::space::{Distribution, StateSpace};
use crate::tilting::TiltedFamily;

/// Relative step for central-difference scores.
pub const FD_REL_STEP: f64 = 1e-5;
/// Relative step for central-difference score derivatives.
pub const FD_REL_STEP_SECOND: f64 = 1e-4;

/// Upper end of the tilting-parameter box used by the optimizers.
pub const THETA_MAX: f64 = 30.0;

/// A family `{P_params}` on a finite space with at most two parameters.
///
/// `distribution` must accept parameters a finite-difference step outside
/// `bounds`; the box only constrains the optimizers.
pub trait ParametricFamily: Send + Sync {
    fn space(&self) -> &Arc<StateSpace>;
    fn dimension(&self) -> usize;
    fn bounds(&self) -> Vec<(f64, f64)>;
    fn distribution(&self, params: &[f64]) -> Result<Distribution>;

    fn initial(&self) -> Vec<f64> {
        self.bounds().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }
}

/// One-parameter family `theta -> P_theta` from exponential tilting.
#[derive(Debug, Clone)]
pub struct TiltParametric {
    pub family: TiltedFamily,
    pub theta_max: f64,
}

impl TiltParametric {
    pub fn new(family: TiltedFamily) -> Self {
        Self { family, theta_max: THETA_MAX }
    }
}

impl ParametricFamily for TiltParametric {
    fn space(&self) -> &Arc<StateSpace> {
        self.family.base().space()
    }
    fn dimension(&self) -> usize {
        1
    }
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, self.theta_max)]
    }
    fn distribution(&self, params: &[f64]) -> Result<Distribution> {
        Ok(self.family.tilt(params[0]))
    }
    fn initial(&self) -> Vec<f64> {
        vec![0.0]
    }
}

/// Zero-dimensional family: a single known law.
#[derive(Debug, Clone)]
pub struct FixedLaw(pub Distribution);

impl ParametricFamily for FixedLaw {
    fn space(&self) -> &Arc<StateSpace> {
        self.0.space()
    }
    fn dimension(&self) -> usize {
        0
    }
    fn bounds(&self) -> Vec<(f64, f64)> {
        Vec::new()
    }
    fn distribution(&self, _params: &[f64]) -> Result<Distribution> {
        Ok(self.0.clone())
    }
}

/// Family given by a closure.
pub struct FnFamily<F> {
    space: Arc<StateSpace>,
    bounds: Vec<(f64, f64)>,
    eval: F,
}

impl<F> FnFamily<F>
where
    F: Fn(&[f64]) -> Result<Distribution> + Send + Sync,
{
    pub fn new(space: Arc<StateSpace>, bounds: Vec<(f64, f64)>, eval: F) -> Result<Self> {
        if bounds.len() > 2 {
            return Err(Error::InvalidModel(format!("{} parameters; at most 2 are supported", bounds.len())));
        }
        Ok(Self { space, bounds, eval })
    }
}

impl<F> ParametricFamily for FnFamily<F>
where
    F: Fn(&[f64]) -> Result<Distribution> + Send + Sync,
{
    fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }
    fn dimension(&self) -> usize {
        self.bounds.len()
    }
    fn bounds(&self) -> Vec<(f64, f64)> {
        self.bounds.clone()
    }
    fn distribution(&self, params: &[f64]) -> Result<Distribution> {
        (self.eval)(params)
    }
}

fn log_masses(family: &dyn ParametricFamily, params: &[f64]) -> Result<Vec<f64>> {
    Ok(family.distribution(params)?.mass().iter().map(|p| p.ln()).collect())
}

/// `sum_x counts[x] log P_params(x)`; `-inf` if a drawn state has zero mass.
pub fn log_likelihood(family: &dyn ParametricFamily, counts: &[u64], params: &[f64]) -> Result<f64> {
    let p = family.distribution(params)?;
    Ok(counts
        .iter()
        .zip(p.mass())
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &q)| if q > 0.0 { c as f64 * q.ln() } else { f64::NEG_INFINITY })
        .sum())
}

fn step(value: f64, rel: f64) -> f64 {
    rel * (1.0 + value.abs())
}

fn shifted(params: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut p = params.to_vec();
    moves.iter().for_each(|&(j, h)| p[j] += h);
    p
}

/// Score `d log P(x) / d params` for every state, by central differences
/// with relative step `rel`. Row `x` holds the score at state `x`.
pub fn scores(family: &dyn ParametricFamily, at: &[f64], rel: f64) -> Result<DMatrix<f64>> {
    let m = family.space().size();
    let d = family.dimension();
    let mut out = DMatrix::zeros(m, d);
    for j in 0..d {
        let h = step(at[j], rel);
        let up = log_masses(family, &shifted(at, &[(j, h)]))?;
        let down = log_masses(family, &shifted(at, &[(j, -h)]))?;
        for x in 0..m {
            out[(x, j)] = (up[x] - down[x]) / (2.0 * h);
        }
    }
    Ok(out)
}

/// Second derivatives of `log P(x)` for every state, by central differences.
pub fn score_derivatives(family: &dyn ParametricFamily, at: &[f64], rel: f64) -> Result<Vec<DMatrix<f64>>> {
    let m = family.space().size();
    let d = family.dimension();
    let centre = log_masses(family, at)?;
    let mut out = vec![DMatrix::zeros(d, d); m];
    let hs: Vec<f64> = (0..d).map(|j| step(at[j], rel)).collect();
    for i in 0..d {
        let up = log_masses(family, &shifted(at, &[(i, hs[i])]))?;
        let down = log_masses(family, &shifted(at, &[(i, -hs[i])]))?;
        for x in 0..m {
            out[x][(i, i)] = (up[x] - 2.0 * centre[x] + down[x]) / (hs[i] * hs[i]);
        }
        for j in (i + 1)..d {
            let pp = log_masses(family, &shifted(at, &[(i, hs[i]), (j, hs[j])]))?;
            let pm = log_masses(family, &shifted(at, &[(i, hs[i]), (j, -hs[j])]))?;
            let mp = log_masses(family, &shifted(at, &[(i, -hs[i]), (j, hs[j])]))?;
            let mm = log_masses(family, &shifted(at, &[(i, -hs[i]), (j, -hs[j])]))?;
            for x in 0..m {
                let v = (pp[x] - pm[x] - mp[x] + mm[x]) / (4.0 * hs[i] * hs[j]);
                out[x][(i, j)] = v;
                out[x][(j, i)] = v;
            }
        }
    }
    Ok(out)
}

/// `sum_x w(x) psi(x)` restricted to states with positive weight.
pub(crate) fn weighted_score(psi: &DMatrix<f64>, weights: &[f64], states: impl Iterator<Item = usize>) -> DVector<f64> {
    let d = psi.ncols();
    let mut out = DVector::zeros(d);
    for x in states {
        if weights[x] > 0.0 {
            for j in 0..d {
                out[j] += weights[x] * psi[(x, j)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SpecificityProfile;

    #[test]
    fn tilt_scores_match_closed_form() {
        let s = StateSpace::indexed(3).unwrap();
        let fam = TiltedFamily::new(
            Distribution::new(s.clone(), vec![0.5, 0.3, 0.2]).unwrap(),
            SpecificityProfile::new(s, vec![0.0, 0.5, 2.0], 2.0).unwrap(),
        )
        .unwrap();
        let theta = 0.8;
        let (mean, var) = fam.tilted_moments(theta);
        let p = TiltParametric::new(fam.clone());
        let psi = scores(&p, &[theta], FD_REL_STEP).unwrap();
        let dpsi = score_derivatives(&p, &[theta], FD_REL_STEP_SECOND).unwrap();
        for (x, f) in [0.0, 0.5, 2.0].iter().enumerate() {
            assert!((psi[(x, 0)] - (f - mean)).abs() < 1e-8);
            assert!((dpsi[x][(0, 0)] + var).abs() < 1e-6);
        }
    }

    #[test]
    fn fn_family_dimension_limit() {
        let s = StateSpace::indexed(2).unwrap();
        let s2 = s.clone();
        let f = FnFamily::new(s.clone(), vec![(0.0, 1.0); 3], move |_p: &[f64]| Ok(Distribution::uniform(s2.clone())));
        assert!(f.is_err());
    }
}
