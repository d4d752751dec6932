//! Numerical core for Lipschitz bounds of minimizers with nonstandard growth.
//!
//! The crate is `no_std` (it needs `alloc`) and splits into:
//!
//! - [`growth`]: convex integrands `F`, hypothesis checks and the two-level
//!   regularization `F_λ`, `F_{λ,μ}`.
//! - [`geometry`]: planar domains with a uniform exterior ball, boundary data
//!   and the local boundary-graph constants.
//! - [`barrier`]: the radial prototype barrier, the affine-corrected true
//!   barrier and every constant needed to make it a local supersolution.
//! - [`mesh`], [`solver`], [`radial`], [`verify`]: P1 energy minimization and
//!   the discrete checks built on top of it.
//!
//! IO, configuration and the command line live in the companion `lipbarrier`
//! crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod barrier;
mod error;
pub mod geometry;
pub mod growth;
pub mod mesh;
pub mod quadrature;
pub mod radial;
pub mod roots;
pub mod solver;
mod sparse;
pub mod verify;

pub use error::{Error, Result};

/// A point or vector in the plane.
pub type Point = [f64; 2];

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    num_traits::Float::hypot(a[0], a[1])
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub(crate) fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

/// `x` reduced into `[0, period)`.
#[inline]
pub(crate) fn wrap(x: f64, period: f64) -> f64 {
    let r = x % period;
    if r < 0.0 {
        r + period
    } else {
        r
    }
}

/// `n` logarithmically spaced points from `lo` to `hi` (both included).
pub fn log_grid(lo: f64, hi: f64, n: usize) -> alloc::vec::Vec<f64> {
    #[allow(unused_imports)]
    use num_traits::Float;
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: alloc::vec::Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    grid
}
