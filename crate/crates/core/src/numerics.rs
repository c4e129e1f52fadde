//! Scalar root finding, golden-section search and small helpers shared by
//! the estimators and rate functions.

use crate::error::{Error, Result};

pub const MAX_BISECTION_STEPS: usize = 200;

/// `log(sum exp(x_i))` with max subtraction. Empty or all `-inf` input
/// yields `-inf`.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Root of a decreasing function `g` on `[lo, +inf)` with `g(lo) >= 0`.
///
/// The upper end starts at `lo + 1` and doubles its distance from `lo` until
/// `g` turns negative. Stops when `|g| <= tol` or the bracket collapses to
/// adjacent floats.
pub fn bisect_decreasing(mut g: impl FnMut(f64) -> f64, lo: f64, tol: f64) -> Result<f64> {
    let g_lo = g(lo);
    if g_lo.abs() <= tol {
        return Ok(lo);
    }
    if g_lo < 0.0 {
        return Err(Error::OutOfRange { value: g_lo, range: "root bracket needs g(lo) >= 0".into() });
    }
    let mut width = 1.0;
    let mut hi = lo + width;
    let mut expansions = 0;
    loop {
        let g_hi = g(hi);
        if g_hi.abs() <= tol {
            return Ok(hi);
        }
        if g_hi < 0.0 {
            break;
        }
        width *= 2.0;
        hi = lo + width;
        expansions += 1;
        if expansions > 64 || !hi.is_finite() {
            return Err(Error::NoConvergence("could not bracket root".into()));
        }
    }
    bisect_bracket(g, lo, hi, tol)
}

/// Bisection on `[lo, hi]` where `g(lo) >= 0 >= g(hi)`.
pub fn bisect_bracket(mut g: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let v = g(mid);
        if v.abs() <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence(format!("bisection stalled in [{lo}, {hi}]")))
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximizer of a unimodal `h` on `[lo, hi]` by golden-section search,
/// stopping once the bracket is narrower than `tol`.
pub fn golden_max(mut h: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut h1 = h(x1);
    let mut h2 = h(x2);
    while hi - lo > tol {
        if h1 < h2 {
            lo = x1;
            x1 = x2;
            h1 = h2;
            x2 = lo + INV_PHI * (hi - lo);
            h2 = h(x2);
        } else {
            hi = x2;
            x2 = x1;
            h2 = h1;
            x1 = hi - INV_PHI * (hi - lo);
            h1 = h(x1);
        }
        if x1 >= x2 {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    let hx = h(x);
    // endpoints matter when the maximum sits on the boundary
    [(x, hx), (x1, h1), (x2, h2)].into_iter().fold((x, hx), |best, cand| if cand.1 > best.1 { cand } else { best })
}

pub const Z_95: f64 = 1.96;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive() {
        let xs = [0.1, -2.0, 3.5];
        let naive = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(xs) - naive).abs() < 1e-14);
        assert!((log_sum_exp([1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
    }

    #[test]
    fn bisection_finds_roots() {
        let r = bisect_decreasing(|x| 10.0 - x * x, 0.0, 1e-12).unwrap();
        assert!((r - 10f64.sqrt()).abs() < 1e-12);
        assert_eq!(bisect_decreasing(|x| -x, 0.0, 1e-12).unwrap(), 0.0);
        assert!(bisect_decreasing(|x| -1.0 - x, 0.0, 1e-12).is_err());
    }

    #[test]
    fn golden_section() {
        let (x, v) = golden_max(|x| -(x - 2.0) * (x - 2.0) + 1.0, -10.0, 10.0, 1e-10);
        assert!((x - 2.0).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-12);
        let (x, _) = golden_max(|x| x, 0.0, 1.0, 1e-10);
        assert!(x > 1.0 - 1e-9);
    }
}
