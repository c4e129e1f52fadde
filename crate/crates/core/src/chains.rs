//! Metropolis-Hastings and Moran-type kernels with equilibrium `P_theta`.
//!
//! A kernel is built from a proposal `q`, the null `P0`, a specificity
//! function and a tilting strength. Off-diagonal moves are
//! `alpha(x, y) q(x, y)`; everything rejected stays on the diagonal
//! together with the proposal's own self-mass `q(x, x)`.
//!
//! Matrices are dense; state spaces up to [`MAX_STATES`] are supported.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::info::log_ratio;
use crate::space::{ensure_same, Distribution, SpecificityProfile, StateSpace, TargetSet, NORMALIZATION_TOL};

pub const MAX_STATES: usize = 4096;

/// Tolerance on the stationary residual `max |pi Pi - pi|`.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

fn check_stochastic(space: &StateSpace, rows: &DMatrix<f64>) -> Result<()> {
    let m = space.size();
    if m > MAX_STATES {
        return Err(Error::InvalidKernel(format!("{m} states exceeds the dense limit {MAX_STATES}")));
    }
    if rows.nrows() != m || rows.ncols() != m {
        return Err(Error::InvalidKernel(format!("expected {m}x{m}, got {}x{}", rows.nrows(), rows.ncols())));
    }
    for i in 0..m {
        let row = rows.row(i);
        if let Some(v) = row.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidKernel(format!("row {i} has entry {v}")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidKernel(format!("row {i} sums to {s}")));
        }
    }
    Ok(())
}

fn reachable(rows: &DMatrix<f64>, start: usize, forward: bool) -> usize {
    let m = rows.nrows();
    let mut seen = vec![false; m];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut count = 1;
    while let Some(x) = queue.pop_front() {
        for y in 0..m {
            let w = if forward { rows[(x, y)] } else { rows[(y, x)] };
            if w > 0.0 && !seen[y] {
                seen[y] = true;
                count += 1;
                queue.push_back(y);
            }
        }
    }
    count
}

/// Row-stochastic proposal `q(x, y)` whose positive entries form a strongly
/// connected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalKernel {
    space: Arc<StateSpace>,
    rows: DMatrix<f64>,
}

impl ProposalKernel {
    pub fn new(space: Arc<StateSpace>, rows: DMatrix<f64>) -> Result<Self> {
        check_stochastic(&space, &rows)?;
        let m = space.size();
        if reachable(&rows, 0, true) != m || reachable(&rows, 0, false) != m {
            return Err(Error::InvalidKernel("proposal graph is not strongly connected".into()));
        }
        Ok(Self { space, rows })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.rows[(x, y)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptanceRule {
    /// `alpha = min(1, r)`.
    MetropolisHastings,
    /// `alpha = C sqrt(r)` with `C` the largest value keeping `alpha <= 1`.
    MoranSquareRoot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    space: Arc<StateSpace>,
    rows: DMatrix<f64>,
    theta: f64,
    rule: Option<AcceptanceRule>,
}

impl TransitionKernel {
    /// Wraps an arbitrary row-stochastic matrix (e.g. one read from CSV).
    pub fn from_matrix(space: Arc<StateSpace>, rows: DMatrix<f64>) -> Result<Self> {
        check_stochastic(&space, &rows)?;
        Ok(Self { space, rows, theta: 0.0, rule: None })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.rows[(x, y)]
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `None` for kernels not built by [`build_kernel`].
    pub fn rule(&self) -> Option<AcceptanceRule> {
        self.rule
    }

    /// One step of the forward equation: `p Pi`.
    pub fn step(&self, p: &[f64]) -> Vec<f64> {
        let row = DVector::from_column_slice(p);
        (0..self.rows.ncols()).map(|j| self.rows.column(j).dot(&row)).collect()
    }

    /// Off-diagonal acceptance probability `pi(x, y) / q(x, y)` recovered
    /// from the kernel (0 where `q(x, y) = 0`).
    pub fn acceptance(&self, q: &ProposalKernel, x: usize, y: usize) -> f64 {
        let qxy = q.get(x, y);
        if x == y || qxy == 0.0 {
            0.0
        } else {
            self.rows[(x, y)] / qxy
        }
    }
}

/// Log of the Hastings ratio `e^{theta f(y)} P0(y) q(y,x) / (e^{theta f(x)} P0(x) q(x,y))`.
fn log_hastings(p0: &[f64], f: &[f64], theta: f64, q: &DMatrix<f64>, x: usize, y: usize) -> f64 {
    let qyx = q[(y, x)];
    if qyx == 0.0 {
        return f64::NEG_INFINITY;
    }
    theta * (f[y] - f[x]) + p0[y].ln() - p0[x].ln() + qyx.ln() - q[(x, y)].ln()
}

pub fn build_kernel(
    p0: &Distribution,
    f: &SpecificityProfile,
    theta: f64,
    q: &ProposalKernel,
    rule: AcceptanceRule,
) -> Result<TransitionKernel> {
    ensure_same(p0.space(), f.space())?;
    ensure_same(p0.space(), q.space())?;
    if !theta.is_finite() {
        return Err(Error::OutOfRange { value: theta, range: "finite".into() });
    }
    let m = p0.len();
    let mass = p0.mass();
    if let Some(i) = mass.iter().position(|&p| p <= 0.0) {
        return Err(Error::ZeroNullMass(i));
    }
    let qm = q.rows();
    let fv = f.values();
    let pairs = || (0..m).flat_map(|x| (0..m).map(move |y| (x, y))).filter(|&(x, y)| x != y && qm[(x, y)] > 0.0);

    let log_c = match rule {
        AcceptanceRule::MetropolisHastings => 0.0,
        AcceptanceRule::MoranSquareRoot => {
            if let Some((x, y)) = pairs().find(|&(x, y)| qm[(y, x)] == 0.0) {
                return Err(Error::ReciprocityViolation(x, y));
            }
            let max_log = pairs().map(|(x, y)| log_hastings(mass, fv, theta, qm, x, y)).fold(f64::NEG_INFINITY, f64::max);
            if max_log == f64::NEG_INFINITY {
                0.0
            } else {
                -0.5 * max_log
            }
        }
    };

    let mut rows = DMatrix::<f64>::zeros(m, m);
    for (x, y) in pairs() {
        let lr = log_hastings(mass, fv, theta, qm, x, y);
        let alpha = match rule {
            AcceptanceRule::MetropolisHastings => lr.min(0.0).exp(),
            AcceptanceRule::MoranSquareRoot => (log_c + 0.5 * lr).exp().min(1.0),
        };
        rows[(x, y)] = alpha * qm[(x, y)];
    }
    for x in 0..m {
        let moved: f64 = (0..m).filter(|&y| y != x).map(|y| rows[(x, y)]).sum();
        rows[(x, x)] = (1.0 - moved).max(0.0);
    }
    Ok(TransitionKernel { space: p0.space().clone(), rows, theta, rule: Some(rule) })
}

fn stationary_of(space: &Arc<StateSpace>, rows: &DMatrix<f64>) -> Result<Distribution> {
    let m = rows.nrows();
    // (Pi^T - I) pi^T = 0 with the last equation replaced by sum(pi) = 1
    let mut a = rows.transpose();
    for i in 0..m {
        a[(i, i)] -= 1.0;
    }
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::SingularSystem("stationary equations are singular; is the chain reducible?".into()))?;
    if pi.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite stationary solution".into()));
    }
    let mut mass: Vec<f64> = pi.iter().copied().collect();
    let residual = {
        let moved: Vec<f64> = (0..m).map(|j| rows.column(j).dot(&pi)).collect();
        moved.iter().zip(&mass).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    if residual > STATIONARY_RESIDUAL_TOL {
        return Err(Error::SingularSystem(format!("stationary residual {residual:e}")));
    }
    // round-off may leave entries at -1e-17
    mass.iter_mut().for_each(|p| {
        if *p < 0.0 && *p > -1e-12 {
            *p = 0.0
        }
    });
    Distribution::new(space.clone(), mass)
}

/// Unique `pi` with `pi Pi = pi`, by a dense linear solve.
pub fn stationary(kernel: &TransitionKernel) -> Result<Distribution> {
    stationary_of(&kernel.space, &kernel.rows)
}

/// Stationary law of the accept-all chain driven by `q` alone.
pub fn reference_null(q: &ProposalKernel) -> Result<Distribution> {
    stationary_of(&q.space, &q.rows)
}

/// `P0 Pi^t` by `t` successive vector-matrix products.
pub fn evolve(p0: &Distribution, kernel: &TransitionKernel, t: u64) -> Result<Distribution> {
    ensure_same(p0.space(), kernel.space())?;
    let mut p = p0.mass().to_vec();
    for _ in 0..t {
        p = kernel.step(&p);
    }
    Ok(Distribution::from_weights(p0.space().clone(), p))
}

/// `log[(P0 Pi^t v) / (P0 v)]` with `v` the indicator of `A`.
pub fn actinfo_at_time(p0: &Distribution, kernel: &TransitionKernel, a: &TargetSet, t: u64) -> Result<f64> {
    Ok(actinfo_time_series(p0, kernel, a, t)?[t as usize])
}

/// `I+(theta, s)` for `s = 0..=t_max`.
pub fn actinfo_time_series(p0: &Distribution, kernel: &TransitionKernel, a: &TargetSet, t_max: u64) -> Result<Vec<f64>> {
    ensure_same(p0.space(), kernel.space())?;
    ensure_same(p0.space(), a.space())?;
    let mass_in = |p: &[f64]| a.members().iter().map(|&i| p[i]).sum::<f64>();
    let mut p = p0.mass().to_vec();
    let p0a = mass_in(&p);
    if p0a <= 0.0 {
        return Err(Error::NullTargetZero);
    }
    let mut out = Vec::with_capacity(t_max as usize + 1);
    out.push(0.0);
    for _ in 0..t_max {
        p = kernel.step(&p);
        out.push(log_ratio(mass_in(&p), p0a)?);
    }
    Ok(out)
}

/// Moran fixation probability of a single mutant with relative fitness `s`
/// in a population of `n`: `(1 - 1/s) / (1 - s^-n)`, and `1/n` at `s = 1`.
pub fn moran_fixation(s: f64, n: u64) -> f64 {
    let n_f = n as f64;
    let delta = s.ln();
    if delta == 0.0 {
        return 1.0 / n_f;
    }
    if delta == f64::INFINITY {
        return 1.0;
    }
    // expm1 keeps s near 1 accurate
    (-delta).exp_m1() / (-delta * n_f).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tilting::TiltedFamily;

    fn two_state(theta: f64, rule: AcceptanceRule) -> (TransitionKernel, ProposalKernel, Distribution, SpecificityProfile) {
        let s = StateSpace::indexed(2).unwrap();
        let q = ProposalKernel::new(s.clone(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let p0 = Distribution::uniform(s.clone());
        let f = SpecificityProfile::new(s, vec![0.0, 1.0], 1.0).unwrap();
        (build_kernel(&p0, &f, theta, &q, rule).unwrap(), q, p0, f)
    }

    #[test]
    fn mh_two_state_kernel() {
        let (k, q, _, _) = two_state(1.0, AcceptanceRule::MetropolisHastings);
        let e = (-1.0f64).exp();
        assert_eq!(k.acceptance(&q, 0, 1), 1.0);
        assert!((k.acceptance(&q, 1, 0) - e).abs() < 1e-15);
        assert_eq!(k.get(0, 0), 0.0);
        assert_eq!(k.get(0, 1), 1.0);
        assert!((k.get(1, 0) - e).abs() < 1e-15);
        assert!((k.get(1, 1) - (1.0 - e)).abs() < 1e-15);
    }

    #[test]
    fn moran_two_state_kernel() {
        let (k, q, _, _) = two_state(1.0, AcceptanceRule::MoranSquareRoot);
        assert!((k.acceptance(&q, 0, 1) - 1.0).abs() < 1e-15);
        assert!((k.acceptance(&q, 1, 0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn zero_tilt_uniform_symmetric_is_proposal() {
        let s = StateSpace::indexed(3).unwrap();
        let qm = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, 0.3, 0.5, 0.1, 0.4, 0.3, 0.4, 0.3]);
        let q = ProposalKernel::new(s.clone(), qm.clone()).unwrap();
        let p0 = Distribution::uniform(s.clone());
        let f = SpecificityProfile::new(s, vec![0.0, 0.5, 1.0], 1.0).unwrap();
        for rule in [AcceptanceRule::MetropolisHastings, AcceptanceRule::MoranSquareRoot] {
            let k = build_kernel(&p0, &f, 0.0, &q, rule).unwrap();
            assert!((k.rows() - &qm).abs().max() < 1e-15);
            let pi = stationary(&k).unwrap();
            assert!(pi.mass().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
        }
    }

    #[test]
    fn two_state_stationary_and_evolution() {
        let (k, _, p0, _) = two_state(1.0, AcceptanceRule::MetropolisHastings);
        let e = 1f64.exp();
        let pi = stationary(&k).unwrap();
        assert!((pi.mass()[0] - 1.0 / (1.0 + e)).abs() < 1e-14);
        assert!((pi.mass()[1] - e / (1.0 + e)).abs() < 1e-14);
        assert_eq!(evolve(&p0, &k, 0).unwrap(), p0);
        let one = evolve(&p0, &k, 1).unwrap();
        assert!((one.mass()[0] - 0.5 / e).abs() < 1e-15);
        assert!((one.mass()[1] - (1.0 - 0.5 / e)).abs() < 1e-15);
        let late = evolve(&p0, &k, 10_000).unwrap();
        assert!(late.total_variation(&pi).unwrap() < 1e-8);
    }

    #[test]
    fn moran_needs_reciprocity() {
        let s = StateSpace::indexed(3).unwrap();
        // cycle 0 -> 1 -> 2 -> 0 is connected but not reciprocal
        let q = ProposalKernel::new(s.clone(), DMatrix::from_row_slice(3, 3, &[0., 1., 0., 0., 0., 1., 1., 0., 0.])).unwrap();
        let p0 = Distribution::uniform(s.clone());
        let f = SpecificityProfile::new(s, vec![0.0, 0.5, 1.0], 1.0).unwrap();
        assert!(matches!(
            build_kernel(&p0, &f, 1.0, &q, AcceptanceRule::MoranSquareRoot),
            Err(Error::ReciprocityViolation(_, _))
        ));
        // MH accepts nothing along one-way proposals, so the chain is frozen
        let k = build_kernel(&p0, &f, 1.0, &q, AcceptanceRule::MetropolisHastings).unwrap();
        assert_eq!(k.get(0, 0), 1.0);
    }

    #[test]
    fn zero_null_mass_rejected() {
        let s = StateSpace::indexed(2).unwrap();
        let q = ProposalKernel::new(s.clone(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let p0 = Distribution::point_mass(s.clone(), 0).unwrap();
        let f = SpecificityProfile::new(s, vec![0.0, 1.0], 1.0).unwrap();
        assert_eq!(build_kernel(&p0, &f, 1.0, &q, AcceptanceRule::MetropolisHastings), Err(Error::ZeroNullMass(1)));
    }

    #[test]
    fn proposal_validation() {
        let s = StateSpace::indexed(2).unwrap();
        assert!(ProposalKernel::new(s.clone(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0])).is_err());
        assert!(ProposalKernel::new(s.clone(), DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.0, 1.0])).is_err());
        assert!(ProposalKernel::new(s, DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])).is_ok());
    }

    #[test]
    fn actinfo_time_limits() {
        let (k, _, p0, f) = two_state(1.0, AcceptanceRule::MoranSquareRoot);
        let a = TargetSet::new(p0.space().clone(), vec![1]).unwrap();
        assert_eq!(actinfo_at_time(&p0, &k, &a, 0).unwrap(), 0.0);
        let fam = TiltedFamily::new(p0.clone(), f).unwrap();
        let eq = fam.actinfo_equilibrium(&a, 1.0).unwrap();
        assert!((actinfo_at_time(&p0, &k, &a, 2000).unwrap() - eq).abs() < 1e-12);

        let (k0, _, _, _) = two_state(0.0, AcceptanceRule::MetropolisHastings);
        let pi0 = stationary(&k0).unwrap();
        for t in [1, 7, 30] {
            assert!(actinfo_at_time(&pi0, &k0, &a, t).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn fixation_probability() {
        assert_eq!(moran_fixation(1.0, 100), 0.01);
        assert!((moran_fixation(1e12, 50) - 1.0).abs() < 1e-11);
        assert!((moran_fixation(4.0, 1000) - 0.75).abs() < 1e-15);
        let n = 1000;
        let s = (0.1 / n as f64).exp();
        assert!((n as f64 * moran_fixation(s, n) - 1.05).abs() < 1e-3);
        // continuity at s = 1
        let near = moran_fixation(1.0 + 1e-12, 100);
        assert!((near - 0.01).abs() < 1e-10);
    }
}
