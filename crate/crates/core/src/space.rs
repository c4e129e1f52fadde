//! Finite outcome spaces and the objects that live on them.
//!
//! A [`StateSpace`] is an enumerated set of `m` labelled states; index order
//! is canonical. [`Distribution`], [`SpecificityProfile`] and [`TargetSet`]
//! all hold a shared handle to their space and refuse to mix with objects
//! built on a different one.

use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Absolute tolerance on `|sum(mass) - 1|` accepted by [`Distribution::new`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Sums closer to one than this are left untouched, so that masses read back
/// from text keep their exact bits.
const RESCALE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>) -> Result<Arc<Self>> {
        if labels.is_empty() {
            return Err(Error::InvalidSpace("a state space needs at least one state".into()));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate label {l:?}")));
            }
        }
        Ok(Arc::new(Self { labels }))
    }

    /// Space with labels `"0"`, `"1"`, ..., `"m-1"`.
    pub fn indexed(m: usize) -> Result<Arc<Self>> {
        Self::new((0..m).map(|i| i.to_string()).collect())
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

pub(crate) fn same_space(a: &Arc<StateSpace>, b: &Arc<StateSpace>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

pub(crate) fn ensure_same(a: &Arc<StateSpace>, b: &Arc<StateSpace>) -> Result<()> {
    if same_space(a, b) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch)
    }
}

/// Probability mass function on a [`StateSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    space: Arc<StateSpace>,
    mass: Vec<f64>,
}

impl Distribution {
    /// Validates nonnegativity and normalization. A total within
    /// [`NORMALIZATION_TOL`] of one is rescaled to sum to one; anything
    /// further off is rejected.
    pub fn new(space: Arc<StateSpace>, mut mass: Vec<f64>) -> Result<Self> {
        if mass.len() != space.size() {
            return Err(Error::InvalidDistribution(format!("expected {} entries, got {}", space.size(), mass.len())));
        }
        if let Some((i, p)) = mass.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("entry {i} = {p} is not a probability")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
        }
        if (total - 1.0).abs() > RESCALE_TOL {
            mass.iter_mut().for_each(|p| *p /= total);
        }
        Ok(Self { space, mass })
    }

    /// Normalizes nonnegative weights. Used internally where the weights are
    /// known to be finite and to have positive total.
    pub(crate) fn from_weights(space: Arc<StateSpace>, mut weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        debug_assert!(total > 0.0 && total.is_finite());
        weights.iter_mut().for_each(|w| *w /= total);
        Self { space, mass: weights }
    }

    pub fn uniform(space: Arc<StateSpace>) -> Self {
        let m = space.size();
        Self { space, mass: vec![1.0 / m as f64; m] }
    }

    pub fn point_mass(space: Arc<StateSpace>, k: usize) -> Result<Self> {
        if k >= space.size() {
            return Err(Error::OutOfRange { value: k as f64, range: format!("[0, {})", space.size()) });
        }
        let mut mass = vec![0.0; space.size()];
        mass[k] = 1.0;
        Ok(Self { space, mass })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total_variation(&self, other: &Distribution) -> Result<f64> {
        ensure_same(&self.space, &other.space)?;
        Ok(0.5 * self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.mass.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

/// Specificity function `f` on a space together with the threshold `f0`
/// that defines the target `{x : f(x) >= f0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecificityProfile {
    space: Arc<StateSpace>,
    values: Vec<f64>,
    threshold: f64,
}

impl SpecificityProfile {
    pub fn new(space: Arc<StateSpace>, values: Vec<f64>, threshold: f64) -> Result<Self> {
        if values.len() != space.size() {
            return Err(Error::InvalidProfile(format!("expected {} values, got {}", space.size(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) || !threshold.is_finite() {
            return Err(Error::InvalidProfile("values and threshold must be finite".into()));
        }
        Ok(Self { space, values, threshold })
    }

    /// Profile whose threshold is the maximum of `values`.
    pub fn stringent(space: Arc<StateSpace>, values: Vec<f64>) -> Result<Self> {
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(space, values, max)
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        Self::new(self.space.clone(), self.values.clone(), threshold)
    }
}

/// Sorted set of state indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    space: Arc<StateSpace>,
    members: Vec<usize>,
    mask: Vec<bool>,
}

impl TargetSet {
    pub fn new(space: Arc<StateSpace>, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if let Some(&bad) = members.iter().find(|&&i| i >= space.size()) {
            return Err(Error::OutOfRange { value: bad as f64, range: format!("[0, {})", space.size()) });
        }
        let mut mask = vec![false; space.size()];
        members.iter().for_each(|&i| mask[i] = true);
        Ok(Self { space, members, mask })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask.get(i).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Indices not in the set, ascending.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.space.size()).filter(|&i| !self.mask[i]).collect()
    }

    /// 0/1 indicator column of the set.
    pub fn indicator(&self) -> Vec<f64> {
        self.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}
