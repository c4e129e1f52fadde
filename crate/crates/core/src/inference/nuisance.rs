use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::golden_max;
use crate::sampling::SampleSet;
use crate::space::{ensure_same, TargetSet};

use super::family::{
    log_likelihood, score_derivatives, scores, weighted_score, ParametricFamily, FD_REL_STEP, FD_REL_STEP_SECOND,
};
use super::onesample::nonparam_from_counts;
use super::{EstimationResult, EstimatorKind};

/// Coordinate ascent stops once no parameter moves by more than this.
pub const JOINT_MLE_TOL: f64 = 1e-8;
pub const JOINT_MLE_MAX_SWEEPS: usize = 500;

const GOLDEN_TOL: f64 = 1e-10;
const SINGULAR_REL_TOL: f64 = 1e-8;

/// How `Q(A)` is estimated.
#[derive(Clone, Copy)]
pub enum QEstimator<'a> {
    Nonparametric,
    /// Plug-in `P_{theta xi}(A)` at the joint MLE of this family.
    Parametric(&'a dyn ParametricFamily),
}

fn target_mass(mass: &[f64], a: &TargetSet) -> f64 {
    a.members().iter().map(|&i| mass[i]).sum()
}

/// `max_xi P_{0 xi}(A)` of a scalar nuisance, given `prob(xi)`.
///
/// The grid maximum is refined by golden-section search between its grid
/// neighbours. Returns `(p0max, xi_argmax)`.
pub fn p0_max_by(mut prob: impl FnMut(f64) -> Result<f64>, grid: &[f64]) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::OutOfRange { value: 0.0, range: "nonempty grid".into() });
    }
    let values = grid.iter().map(|&x| prob(x)).collect::<Result<Vec<f64>>>()?;
    let best = (0..grid.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    if grid.len() == 1 {
        return Ok((values[0], grid[0]));
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (lo, hi) = (lo.min(hi), lo.max(hi));
    let mut failure = None;
    let (x, v) = golden_max(
        |xi| match prob(xi) {
            Ok(p) => p,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        GOLDEN_TOL,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(if v > values[best] { (v, x) } else { (values[best], grid[best]) })
}

/// [`p0_max_by`] for a one-parameter null family.
pub fn p0_max(family0: &dyn ParametricFamily, a: &TargetSet, xi_grid: &[f64]) -> Result<(f64, f64)> {
    ensure_same(family0.space(), a.space())?;
    if family0.dimension() != 1 {
        return Err(Error::InvalidModel(format!("grid refinement needs one nuisance parameter, got {}", family0.dimension())));
    }
    p0_max_by(|xi| Ok(target_mass(family0.distribution(&[xi])?.mass(), a)), xi_grid)
}

struct Axis<'a> {
    family: &'a dyn ParametricFamily,
    counts: &'a [u64],
    failure: Option<Error>,
}

impl Axis<'_> {
    fn ll(&mut self, params: &[f64]) -> f64 {
        match log_likelihood(self.family, self.counts, params) {
            Ok(v) => v,
            Err(e) => {
                self.failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        }
    }

    fn along(&mut self, params: &[f64], j: usize, v: f64) -> f64 {
        let mut p = params.to_vec();
        p[j] = v;
        self.ll(&p)
    }

    /// Line search on axis `j`: golden section, then bisection on the
    /// central-difference slope, which resolves the optimum far below the
    /// flatness floor of the likelihood values themselves.
    fn maximize(&mut self, params: &[f64], j: usize, lo: f64, hi: f64) -> f64 {
        let (x, hx) = golden_max(|v| self.along(params, j, v), lo, hi, GOLDEN_TOL * (1.0 + hi - lo));
        for edge in [lo, hi] {
            if (x - edge).abs() <= 1e-6 * (1.0 + hi - lo) && self.along(params, j, edge) >= hx {
                return edge;
            }
        }
        let slope = |s: &mut Self, v: f64| {
            let h = 1e-6 * (1.0 + v.abs());
            s.along(params, j, v + h) - s.along(params, j, v - h)
        };
        let width = 1e-5 * (1.0 + hi - lo);
        let (mut a, mut b) = ((x - width).max(lo), (x + width).min(hi));
        if !(slope(self, a) > 0.0 && slope(self, b) < 0.0) {
            return x;
        }
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if slope(self, mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}

/// Joint maximum likelihood over the family's parameter box by coordinate
/// ascent. Returns the parameters in family order, `(theta, xi)`.
pub fn joint_mle(sample: &SampleSet, family: &dyn ParametricFamily) -> Result<Vec<f64>> {
    ensure_same(sample.space(), family.space())?;
    let d = family.dimension();
    if d > 2 {
        return Err(Error::InvalidModel(format!("{d} parameters; at most 2 are supported")));
    }
    if sample.is_empty() {
        return Err(Error::OutOfRange { value: 0.0, range: "n >= 1".into() });
    }
    if d == 0 {
        return Ok(Vec::new());
    }
    let counts = sample.counts();
    let bounds = family.bounds();
    let mut params: Vec<f64> = family.initial().iter().zip(&bounds).map(|(&v, &(lo, hi))| v.clamp(lo, hi)).collect();
    let mut axis = Axis { family, counts: &counts, failure: None };

    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        let probes = [lo, 0.5 * (lo + hi), hi, lo + 0.25 * (hi - lo)].map(|v| axis.along(&params, j, v));
        let top = probes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bottom = probes.iter().copied().fold(f64::INFINITY, f64::min);
        if top == bottom || (top.is_finite() && top - bottom <= 1e-12 * (1.0 + top.abs())) {
            return Err(Error::NonIdentifiable(j));
        }
    }

    for _ in 0..JOINT_MLE_MAX_SWEEPS {
        let mut change = 0.0f64;
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            let x = axis.maximize(&params, j, lo, hi);
            change = change.max((x - params[j]).abs());
            params[j] = x;
        }
        if let Some(e) = axis.failure.take() {
            return Err(e);
        }
        if change < JOINT_MLE_TOL || d == 1 {
            return Ok(params);
        }
    }
    Err(Error::NoConvergence(format!("coordinate ascent did not settle in {JOINT_MLE_MAX_SWEEPS} sweeps")))
}

fn invert_checked(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= SINGULAR_REL_TOL * max || !min.is_finite() {
        return Err(Error::SingularSandwich);
    }
    m.clone().try_inverse().ok_or(Error::SingularSandwich)
}

fn quad(g: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    (g.transpose() * m * g)[(0, 0)]
}

/// Sandwich variance of the plug-in `log P_{theta xi}(A)` at `at`.
///
/// The conditional score mean over `A` is exact under `P_at`; the outer
/// expectations of `psi'` and `psi psi^T` use the sample's empirical law.
pub fn param_variance_nuisance(sample: &SampleSet, family: &dyn ParametricFamily, a: &TargetSet, at: &[f64]) -> Result<f64> {
    param_variance_nuisance_with_steps(sample, family, a, at, FD_REL_STEP, FD_REL_STEP_SECOND)
}

/// [`param_variance_nuisance`] with explicit relative steps for the scores
/// and their derivatives.
pub fn param_variance_nuisance_with_steps(
    sample: &SampleSet,
    family: &dyn ParametricFamily,
    a: &TargetSet,
    at: &[f64],
    score_step: f64,
    derivative_step: f64,
) -> Result<f64> {
    ensure_same(sample.space(), family.space())?;
    ensure_same(sample.space(), a.space())?;
    let d = family.dimension();
    if d == 0 || at.len() != d {
        return Err(Error::InvalidModel(format!("expected {d} > 0 parameters, got {}", at.len())));
    }
    let p = family.distribution(at)?;
    let pa = target_mass(p.mass(), a);
    if pa <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let psi = scores(family, at, score_step)?;
    let dpsi = score_derivatives(family, at, derivative_step)?;
    let g = weighted_score(&psi, p.mass(), a.members().iter().copied()) / pa;

    let n = sample.len() as f64;
    let mut hess = DMatrix::zeros(d, d);
    let mut outer = DMatrix::zeros(d, d);
    for (x, &c) in sample.counts().iter().enumerate().filter(|(_, &c)| c > 0) {
        let w = c as f64 / n;
        let row = psi.row(x).transpose();
        hess += &dpsi[x] * w;
        outer += &row * row.transpose() * w;
    }
    if outer.iter().all(|&v| v == 0.0) && g.iter().all(|&v| v == 0.0) {
        return Err(Error::SingularSandwich);
    }
    let inv = invert_checked(&hess)?;
    let v = quad(&g, &(&inv * outer * inv.transpose()));
    Ok(v.max(0.0))
}

/// Lower bound `log[Q(A) / p0max]` on the active information when the null
/// depends on an unknown nuisance. `true_p0a` fills in the bias
/// `log[P_{0 xi}(A) / p0max]` for synthetic studies.
pub fn lower_bound_actinfo(
    sample: &SampleSet,
    a: &TargetSet,
    p0max: f64,
    q: QEstimator<'_>,
    true_p0a: Option<f64>,
) -> Result<EstimationResult> {
    ensure_same(sample.space(), a.space())?;
    if !(p0max > 0.0) {
        return Err(Error::NullTargetZero);
    }
    let mut r = match q {
        QEstimator::Nonparametric => lower_bound_from_counts(sample.hits(a), sample.len(), p0max, None)?,
        QEstimator::Parametric(family) => {
            let (estimate, variance, params) = parametric_q(sample, family, a, p0max)?;
            let mut r = EstimationResult::new(EstimatorKind::LowerBoundParametric, estimate, variance, sample.len());
            r.theta_hat = params.first().copied();
            r.xi_hat = params.get(1).copied();
            r
        }
    };
    r.bias = bias(true_p0a, p0max);
    Ok(r)
}

fn bias(true_p0a: Option<f64>, p0max: f64) -> Option<f64> {
    true_p0a.map(|p| p.ln() - p0max.ln())
}

/// Nonparametric lower bound from a hit count.
pub fn lower_bound_from_counts(hits: u64, n: usize, p0max: f64, true_p0a: Option<f64>) -> Result<EstimationResult> {
    let mut r = nonparam_from_counts(hits, n, p0max)?;
    r.kind = EstimatorKind::LowerBoundNonparametric;
    r.bias = bias(true_p0a, p0max);
    Ok(r)
}

fn parametric_q(sample: &SampleSet, family: &dyn ParametricFamily, a: &TargetSet, p0a: f64) -> Result<(f64, f64, Vec<f64>)> {
    let params = joint_mle(sample, family)?;
    let qa = target_mass(family.distribution(&params)?.mass(), a);
    let estimate = if qa > 0.0 { qa.ln() - p0a.ln() } else { f64::NEG_INFINITY };
    let variance = if family.dimension() == 0 { 0.0 } else { param_variance_nuisance(sample, family, a, &params)? };
    Ok((estimate, variance, params))
}

/// Active information with the null fitted on an independent sample from
/// `P_{0 xi}`. The variance is `V1 + (n/n0) V2`, where `V2` carries the
/// uncertainty of the fitted null.
pub fn two_sample_actinfo(
    sample: &SampleSet,
    null_sample: &SampleSet,
    family0: &dyn ParametricFamily,
    a: &TargetSet,
    q: QEstimator<'_>,
) -> Result<EstimationResult> {
    ensure_same(sample.space(), a.space())?;
    ensure_same(null_sample.space(), a.space())?;
    ensure_same(family0.space(), a.space())?;
    if sample.is_empty() || null_sample.is_empty() {
        return Err(Error::OutOfRange { value: 0.0, range: "both samples nonempty".into() });
    }
    let xi = joint_mle(null_sample, family0)?;
    let p0 = family0.distribution(&xi)?;
    let p0a = target_mass(p0.mass(), a);
    if p0a <= 0.0 {
        return Err(Error::NullModelTargetZero);
    }

    let v2 = if xi.is_empty() {
        0.0
    } else {
        let psi = scores(family0, &xi, FD_REL_STEP)?;
        let g0 = weighted_score(&psi, p0.mass(), a.members().iter().copied()) / p0a;
        let d = xi.len();
        let mut fisher = DMatrix::zeros(d, d);
        for (x, &w) in p0.mass().iter().enumerate().filter(|(_, &w)| w > 0.0) {
            let row = psi.row(x).transpose();
            fisher += &row * row.transpose() * w;
        }
        quad(&g0, &invert_checked(&fisher)?)
    };

    let (kind, estimate, v1, theta_hat) = match q {
        QEstimator::Nonparametric => {
            let r = nonparam_from_counts(sample.hits(a), sample.len(), p0a)?;
            (EstimatorKind::TwoSampleNonparametric, r.estimate, r.variance, None)
        }
        QEstimator::Parametric(family) => {
            ensure_same(family.space(), a.space())?;
            let (estimate, variance, params) = parametric_q(sample, family, a, p0a)?;
            (EstimatorKind::TwoSampleParametric, estimate, variance, params.first().copied())
        }
    };
    let lambda = sample.len() as f64 / null_sample.len() as f64;
    let mut r = EstimationResult::new(kind, estimate, v1 + lambda * v2, sample.len());
    r.n0 = Some(null_sample.len());
    r.theta_hat = theta_hat;
    r.xi_hat = xi.first().copied();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{mle_tilt, param_actinfo, FixedLaw, FnFamily, TiltParametric};
    use crate::sampling::{sample_iid, RandomSource};
    use crate::space::{Distribution, SpecificityProfile, StateSpace};
    use crate::tilting::TiltedFamily;

    fn three_state() -> (TiltedFamily, TargetSet) {
        let s = StateSpace::indexed(3).unwrap();
        let fam = TiltedFamily::new(
            Distribution::new(s.clone(), vec![0.6, 0.3, 0.1]).unwrap(),
            SpecificityProfile::new(s.clone(), vec![0.0, 0.4, 1.0], 1.0).unwrap(),
        )
        .unwrap();
        (fam, TargetSet::new(s, vec![2]).unwrap())
    }

    #[test]
    fn one_dimensional_reduction() {
        let (fam, a) = three_state();
        let smp = sample_iid(&fam.tilt(1.2), 5000, &mut RandomSource::new(11));
        let direct = mle_tilt(&smp, &fam).unwrap();
        let wrapped = TiltParametric::new(fam.clone());
        let joint = joint_mle(&smp, &wrapped).unwrap();
        assert!((joint[0] - direct).abs() < 1e-6, "{} vs {direct}", joint[0]);
        let v = param_variance_nuisance(&smp, &wrapped, &a, &[direct]).unwrap();
        let reference = param_actinfo(&smp, &fam, &a).unwrap().variance;
        assert!(((v - reference) / reference).abs() < 1e-4, "{v} vs {reference}");
    }

    #[test]
    fn null_sample_gives_boundary() {
        let (fam, _) = three_state();
        let smp = SampleSet::new(fam.base().space().clone(), vec![0; 50], "zeros", None).unwrap();
        let joint = joint_mle(&smp, &TiltParametric::new(fam)).unwrap();
        assert_eq!(joint[0], 0.0);
    }

    #[test]
    fn flat_axis_detected() {
        let (fam, a) = three_state();
        let s = fam.base().space().clone();
        let fam2 = fam.clone();
        let flat = FnFamily::new(s.clone(), vec![(0.0, 5.0), (0.1, 2.0)], move |p: &[f64]| Ok(fam2.tilt(p[0]))).unwrap();
        let smp = sample_iid(&fam.tilt(1.0), 500, &mut RandomSource::new(5));
        assert_eq!(joint_mle(&smp, &flat), Err(Error::NonIdentifiable(1)));
        assert_eq!(param_variance_nuisance(&smp, &flat, &a, &[1.0, 1.0]), Err(Error::SingularSandwich));
    }

    #[test]
    fn grid_maximum() {
        let (v, x) = p0_max_by(|_| Ok(0.25), &[3.0]).unwrap();
        assert_eq!((v, x), (0.25, 3.0));
        let (v, x) = p0_max_by(|xi| Ok(-(xi - 1.3) * (xi - 1.3)), &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((x - 1.3).abs() < 1e-8 && v.abs() < 1e-15);
        assert!(p0_max_by(|_| Ok(0.0), &[]).is_err());
    }

    #[test]
    fn fixed_null_matches_one_sample() {
        let (fam, a) = three_state();
        let mut rng = RandomSource::new(8);
        let smp = sample_iid(&fam.tilt(0.7), 400, &mut rng);
        let null = sample_iid(fam.base(), 300, &mut rng);
        let two = two_sample_actinfo(&smp, &null, &FixedLaw(fam.base().clone()), &a, QEstimator::Nonparametric).unwrap();
        let one = nonparam_from_counts(smp.hits(&a), smp.len(), 0.1).unwrap();
        assert!((two.estimate - one.estimate).abs() < 1e-12);
        assert!((two.variance - one.variance).abs() < 1e-12);
        assert_eq!(two.n0, Some(300));
    }

    #[test]
    fn lower_bound_is_conservative() {
        let (fam, a) = three_state();
        let smp = sample_iid(&fam.tilt(0.7), 400, &mut RandomSource::new(2));
        let exact = nonparam_from_counts(smp.hits(&a), smp.len(), 0.1).unwrap();
        let lb = lower_bound_actinfo(&smp, &a, 0.15, QEstimator::Nonparametric, Some(0.1)).unwrap();
        assert!(lb.estimate <= exact.estimate);
        assert!(lb.bias.unwrap() < 0.0);
        let tight = lower_bound_actinfo(&smp, &a, 0.1, QEstimator::Nonparametric, Some(0.1)).unwrap();
        assert_eq!(tight.bias, Some(0.0));
        assert_eq!(tight.estimate, exact.estimate);
    }
}
