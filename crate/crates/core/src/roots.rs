//! Bracketing root finders for monotone scalar maps.

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Solves `g(s) = y` for a continuous, strictly increasing `g` on `[lo, ∞)`.
///
/// The upper end of the bracket is found by doubling from `hint`; the root
/// is then polished by Newton steps that fall back to bisection whenever
/// they leave the bracket. `dg` is the derivative of `g`.
///
/// Stops once `|g(s) - y| <= rtol * max(1, |y|)` or the bracket has
/// collapsed to a few ulps.
pub fn invert_increasing<G, D>(g: G, dg: D, y: f64, lo: f64, hint: f64, rtol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if !y.is_finite() {
        return Err(Error::Range { y });
    }
    let target = rtol * y.abs().max(1.0);
    let g_lo = g(lo);
    if y <= g_lo {
        return Ok(lo);
    }
    let mut a = lo;
    let mut b = if hint > lo && hint.is_finite() { hint } else { lo.abs().max(1.0) + lo };
    let mut g_b = g(b);
    let mut doublings = 0;
    while g_b < y {
        a = b;
        b = 2.0 * b + 1.0;
        g_b = g(b);
        doublings += 1;
        if doublings > 1100 || g_b.is_nan() {
            return Err(Error::Range { y });
        }
    }
    if (g_b - y).abs() <= target {
        return Ok(b);
    }

    let mut s = 0.5 * (a + b);
    for _ in 0..400 {
        let r = g(s) - y;
        if r.abs() <= target {
            return Ok(s);
        }
        if r > 0.0 {
            b = s;
        } else {
            a = s;
        }
        if b - a <= 4.0 * f64::EPSILON * b.abs().max(f64::MIN_POSITIVE) {
            return Ok(s);
        }
        let slope = dg(s);
        let newton = s - r / slope;
        s = if slope > 0.0 && newton > a && newton < b {
            newton
        } else if a > 0.0 && b / a > 16.0 {
            // geometric midpoint when the bracket spans decades
            (a.ln() * 0.5 + b.ln() * 0.5).exp()
        } else {
            0.5 * (a + b)
        };
    }
    Err(Error::Nontermination { iterations: 400 })
}

/// Plain bisection for a sign change of `f` on `[a, b]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::param("bracket", "no sign change on the interval"));
    }
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= xtol {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Err(Error::Nontermination { iterations: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_inverse() {
        let s = invert_increasing(|s| 2.0 * s, |_| 2.0, 3.0, 0.0, 1.0, 1e-12).unwrap();
        assert!((s - 1.5).abs() < 1e-12);
    }

    #[test]
    fn below_range_returns_lower_end() {
        let s = invert_increasing(|s| s + 1.0, |_| 1.0, 0.5, 0.0, 1.0, 1e-12).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn saturating_map_is_a_range_error() {
        let err = invert_increasing(|s| s / (1.0 + s), |s| 1.0 / ((1.0 + s) * (1.0 + s)), 2.0, 0.0, 1.0, 1e-12);
        assert!(matches!(err, Err(Error::Range { .. })));
    }

    #[test]
    fn steep_map_over_many_decades() {
        let y = 1e200;
        let s = invert_increasing(|s| s.powi(8), |s| 8.0 * s.powi(7), y, 0.0, 1.0, 1e-12).unwrap();
        assert!((s.powi(8) - y).abs() <= 1e-12 * y);
    }

    #[test]
    fn bisection_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}
