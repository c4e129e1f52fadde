use std::sync::Arc;

use nalgebra::DMatrix;

use crate::absorption::decompose;
use crate::chains::{actinfo_time_series, build_kernel, reference_null, AcceptanceRule, ProposalKernel, TransitionKernel};
use crate::error::{Error, Result};
use crate::inference::ParametricFamily;
use crate::space::{Distribution, SpecificityProfile, StateSpace, TargetSet};
use crate::tilting::TiltedFamily;

pub const MAX_PARTS: usize = 12;

/// Box for the rate ratio `b` used by the machine families' optimizers.
pub const B_BOUNDS: (f64, f64) = (0.05, 5.0);
const THETA_BOUNDS: (f64, f64) = (0.0, 30.0);
const SLOPE_TOL: f64 = 1e-12;

/// A machine of `d` parts; state `x` in `{0,1}^d` records which parts work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineModel {
    pub d: usize,
    /// Specificity per working part, below the complete machine.
    pub a: f64,
    /// Ratio of beneficial to deleterious mutation rates.
    pub b: f64,
    pub theta: f64,
}

impl MachineModel {
    pub fn new(d: usize, a: f64, b: f64, theta: f64) -> Result<Self> {
        if d == 0 || d > MAX_PARTS {
            return Err(Error::InvalidModel(format!("d = {d} outside 1..={MAX_PARTS}")));
        }
        if !a.is_finite() || a > 1.0 / d as f64 + SLOPE_TOL {
            return Err(Error::InvalidModel(format!("a = {a} exceeds 1/d")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidModel(format!("b = {b} must be positive")));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::InvalidModel(format!("theta = {theta} must be finite and >= 0")));
        }
        Ok(Self { d, a, b, theta })
    }

    pub fn size(&self) -> usize {
        1 << self.d
    }

    fn full(&self) -> usize {
        self.size() - 1
    }

    /// `a |x|`, except `1` at the complete machine.
    pub fn specificity(&self) -> Vec<f64> {
        (0..self.size()).map(|x| if x == self.full() { 1.0 } else { self.a * x.count_ones() as f64 }).collect()
    }
}

/// Label of state `x` is `x_1 x_2 .. x_d`, with `x_{j+1}` bit `j` of the index.
pub fn machine_labels(d: usize) -> Vec<String> {
    (0..1usize << d).map(|x| (0..d).map(|j| if x >> j & 1 == 1 { '1' } else { '0' }).collect()).collect()
}

fn flip_weight(d: usize, b: f64, k: u32) -> f64 {
    k as f64 + b * (d as f64 - k as f64)
}

/// Stationary law of the mutation kernel in closed form,
/// `P0(x) ∝ b^|x| (|x| + b(d - |x|))`.
pub fn machine_null_mass(d: usize, b: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..1usize << d)
        .map(|x| {
            let k = x.count_ones();
            b.powi(k as i32) * flip_weight(d, b, k)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn proposal_rows(d: usize, b: f64) -> DMatrix<f64> {
    let m = 1usize << d;
    let mut rows = DMatrix::zeros(m, m);
    for x in 0..m {
        let w = flip_weight(d, b, x.count_ones());
        for j in 0..d {
            let y = x ^ (1 << j);
            rows[(x, y)] = if x >> j & 1 == 0 { b / w } else { 1.0 / w };
        }
    }
    rows
}

#[derive(Debug, Clone)]
pub struct MachineSystem {
    pub model: MachineModel,
    pub space: Arc<StateSpace>,
    pub spec: SpecificityProfile,
    pub proposal: ProposalKernel,
    pub null: Distribution,
    pub family: TiltedFamily,
    /// The complete machine.
    pub target: TargetSet,
}

pub fn build_machine(model: &MachineModel) -> Result<MachineSystem> {
    let model = MachineModel::new(model.d, model.a, model.b, model.theta)?;
    let space = StateSpace::new(machine_labels(model.d))?;
    let spec = SpecificityProfile::new(space.clone(), model.specificity(), 1.0)?;
    let proposal = ProposalKernel::new(space.clone(), proposal_rows(model.d, model.b))?;
    let null = reference_null(&proposal)?;
    let family = TiltedFamily::new(null.clone(), spec.clone())?;
    let target = TargetSet::new(space.clone(), vec![model.full()])?;
    Ok(MachineSystem { model, space, spec, proposal, null, family, target })
}

impl MachineSystem {
    pub fn kernel(&self, rule: AcceptanceRule) -> Result<TransitionKernel> {
        build_kernel(&self.null, &self.spec, self.model.theta, &self.proposal, rule)
    }

    /// `-log P0(complete machine)`.
    pub fn functional_information(&self) -> f64 {
        -self.null.mass()[self.model.full()].ln()
    }

    /// `P_theta`, the equilibrium law of either chain.
    pub fn equilibrium(&self) -> Distribution {
        self.family.tilt(self.model.theta)
    }

    /// Family in `(theta, b)` with `a` held fixed.
    pub fn parametric_family(&self) -> MachineFamily {
        MachineFamily { space: self.space.clone(), d: self.model.d, spec: self.spec.values().to_vec() }
    }

    /// Null family in `b`.
    pub fn null_family(&self) -> MachineNullFamily {
        MachineNullFamily { space: self.space.clone(), d: self.model.d }
    }
}

/// `P_{theta, b}`: the machine null for rate ratio `b` tilted by `theta f`.
#[derive(Debug, Clone)]
pub struct MachineFamily {
    space: Arc<StateSpace>,
    d: usize,
    spec: Vec<f64>,
}

impl ParametricFamily for MachineFamily {
    fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }
    fn dimension(&self) -> usize {
        2
    }
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![THETA_BOUNDS, B_BOUNDS]
    }
    fn distribution(&self, params: &[f64]) -> Result<Distribution> {
        let (theta, b) = (params[0], params[1]);
        if !(b > 0.0) {
            return Err(Error::OutOfRange { value: b, range: "b > 0".into() });
        }
        let null = machine_null_mass(self.d, b);
        let lw: Vec<f64> = null.iter().zip(&self.spec).map(|(p, f)| theta * f + p.ln()).collect();
        let shift = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lw.iter().map(|v| (v - shift).exp()).collect();
        let total: f64 = w.iter().sum();
        Distribution::new(self.space.clone(), w.into_iter().map(|v| v / total).collect())
    }
    fn initial(&self) -> Vec<f64> {
        vec![1.0, 1.0]
    }
}

/// `P_{0 b}`: the stationary law of the mutation kernel.
#[derive(Debug, Clone)]
pub struct MachineNullFamily {
    space: Arc<StateSpace>,
    d: usize,
}

impl ParametricFamily for MachineNullFamily {
    fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }
    fn dimension(&self) -> usize {
        1
    }
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![B_BOUNDS]
    }
    fn distribution(&self, params: &[f64]) -> Result<Distribution> {
        if !(params[0] > 0.0) {
            return Err(Error::OutOfRange { value: params[0], range: "b > 0".into() });
        }
        Distribution::new(self.space.clone(), machine_null_mass(self.d, params[0]))
    }
    fn initial(&self) -> Vec<f64> {
        vec![1.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumRow {
    pub theta: f64,
    pub iplus: f64,
    pub ifo: f64,
}

/// `I+(theta)` over `theta_grid`, with the functional information `I_f0` as
/// its large-`theta` asymptote. The model's own `theta` is ignored.
pub fn figure_equilibrium_sweep(model: &MachineModel, theta_grid: &[f64]) -> Result<Vec<EquilibriumRow>> {
    let sys = build_machine(model)?;
    let ifo = sys.functional_information();
    theta_grid
        .iter()
        .map(|&theta| Ok(EquilibriumRow { theta, iplus: sys.family.actinfo_equilibrium(&sys.target, theta)?, ifo }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRow {
    pub t: u64,
    pub iplus: f64,
    pub iplus_stopped: f64,
    pub iplus_eq: f64,
    pub ifo: f64,
}

/// `I+(theta, t)` and the stopped `I_s+(theta, t)` for the Moran-rule chain
/// started at `P0`, for `t = 0..=t_max`.
pub fn figure_time_sweep(model: &MachineModel, t_max: u64) -> Result<Vec<TimeRow>> {
    let sys = build_machine(model)?;
    let kernel = sys.kernel(AcceptanceRule::MoranSquareRoot)?;
    let ifo = sys.functional_information();
    let iplus_eq = sys.family.actinfo_equilibrium(&sys.target, model.theta)?;
    let free = actinfo_time_series(&sys.null, &kernel, &sys.target, t_max)?;
    let p0a = sys.null.mass()[model.size() - 1];
    let stopped = decompose(&kernel, &sys.target, &sys.null)?.actinfo_stopped_series(p0a, t_max)?;
    Ok((0..=t_max).map(|t| TimeRow { t, iplus: free[t as usize], iplus_stopped: stopped[t as usize], iplus_eq, ifo }).collect())
}
