//! Target sets and the basic information functionals.
//!
//! All logarithms are natural, so every information quantity is in nats.

use crate::error::{Error, Result};
use crate::space::{ensure_same, Distribution, SpecificityProfile, TargetSet};

/// `{i : f(i) >= f0}`. Ties at the threshold are members.
pub fn target_set(f: &SpecificityProfile) -> Result<TargetSet> {
    let members: Vec<usize> = f.values().iter().enumerate().filter(|(_, &v)| v >= f.threshold()).map(|(i, _)| i).collect();
    if members.is_empty() {
        return Err(Error::EmptyTarget);
    }
    TargetSet::new(f.space().clone(), members)
}

/// Argmax set of `f`, all ties included. The profile's own threshold is ignored.
pub fn stringent_target(f: &SpecificityProfile) -> TargetSet {
    let max = f.max();
    let members = f.values().iter().enumerate().filter(|(_, &v)| v == max).map(|(i, _)| i).collect();
    TargetSet::new(f.space().clone(), members).expect("argmax indices are in range")
}

pub fn target_probability(p: &Distribution, a: &TargetSet) -> Result<f64> {
    ensure_same(p.space(), a.space())?;
    Ok(a.members().iter().map(|&i| p.mass()[i]).sum())
}

/// `log[P(A) / P0(A)]`. Returns `-inf` when `P(A) = 0`.
pub fn actinfo(p: &Distribution, p0: &Distribution, a: &TargetSet) -> Result<f64> {
    ensure_same(p.space(), p0.space())?;
    let pa = target_probability(p, a)?;
    let p0a = target_probability(p0, a)?;
    log_ratio(pa, p0a)
}

pub(crate) fn log_ratio(pa: f64, p0a: f64) -> Result<f64> {
    if p0a <= 0.0 {
        return Err(Error::NullTargetZero);
    }
    if pa <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(pa.ln() - p0a.ln())
}

/// `-log P0(A)`: the active information of a search that hits `A` surely.
pub fn functional_information(p0: &Distribution, a: &TargetSet) -> Result<f64> {
    let p0a = target_probability(p0, a)?;
    if p0a <= 0.0 {
        return Err(Error::NullTargetZero);
    }
    Ok(-p0a.ln())
}

/// `sum_x Q(x) log[Q(x)/P(x)]`, with `0 log 0 = 0`.
pub fn kl_divergence(q: &Distribution, p: &Distribution) -> Result<f64> {
    ensure_same(q.space(), p.space())?;
    let mut total = 0.0;
    for (i, (&qi, &pi)) in q.mass().iter().zip(p.mass()).enumerate() {
        if qi == 0.0 {
            continue;
        }
        if pi == 0.0 {
            return Err(Error::SupportViolation(i));
        }
        total += qi * (qi / pi).ln();
    }
    // rounding can leave a tiny negative total for Q = P
    Ok(total.max(0.0))
}

/// Kullback-Leibler divergence between Bernoulli laws `Be(p)` and `Be(q)`.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}
