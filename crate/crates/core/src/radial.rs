//! Radial minimizers on annuli: `r^{d-1} G(u'(r)) = q` with `G = F'_{λ,μ}`.

use alloc::vec::Vec;
use core::cell::RefCell;

#[allow(unused_imports)]
use num_traits::Float;

use crate::growth::RegularizedGrowth;
use crate::quadrature::integrate;
use crate::{Error, Result};

const QUAD_TOL: f64 = 1e-12;

/// Radial profile between `r_in` and `r_out`.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub q: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub u_in: f64,
    pub u_out: f64,
    pub d: u32,
    /// `(r, u(r))` on an equispaced grid.
    pub grid: Vec<(f64, f64)>,
    sign: f64,
    rg: RegularizedGrowth,
}

impl RadialProfile {
    /// `u'(r) = ±G^{-1}(q r^{1-d})`.
    pub fn slope(&self, r: f64) -> Result<f64> {
        Ok(self.sign * self.rg.inverse_flux(self.q * r.powi(1 - self.d as i32))?)
    }

    /// `u(r)` by quadrature from `r_in`.
    pub fn value(&self, r: f64) -> Result<f64> {
        if !(r >= self.r_in && r <= self.r_out) {
            return Err(Error::Domain { r, r0: self.r_in });
        }
        if self.q == 0.0 {
            return Ok(self.u_in);
        }
        Ok(self.u_in + self.sign * ring_integral(&self.rg, self.q, self.d, self.r_in, r)?)
    }

    /// `max |r^{d-1} G(|u'(r)|) − q|` over the grid.
    pub fn residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &(r, _) in &self.grid {
            let s = self.slope(r)?.abs();
            worst = worst.max((r.powi(self.d as i32 - 1) * self.rg.flux(s) - self.q).abs());
        }
        Ok(worst)
    }
}

fn ring_integral(rg: &RegularizedGrowth, q: f64, d: u32, a: f64, b: f64) -> Result<f64> {
    let failure = RefCell::new(None);
    let v = integrate(
        |r| match rg.inverse_flux(q * r.powi(1 - d as i32)) {
            Ok(s) => s,
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                f64::NAN
            }
        },
        a,
        b,
        QUAD_TOL,
        QUAD_TOL,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    v
}

/// Solves for the flux constant `q` matching the boundary gap and samples
/// the profile on `points` radii.
pub fn radial_oracle(rg: &RegularizedGrowth, r_in: f64, r_out: f64, u_in: f64, u_out: f64, d: u32, points: usize) -> Result<RadialProfile> {
    if !(r_in > 0.0 && r_out > r_in && r_out.is_finite()) {
        return Err(Error::param("r_out", "need 0 < r_in < r_out"));
    }
    if d < 2 {
        return Err(Error::param("d", "dimension must be at least 2"));
    }
    if points < 2 {
        return Err(Error::param("points", "need at least two grid points"));
    }
    let gap = u_out - u_in;
    let sign = if gap >= 0.0 { 1.0 } else { -1.0 };
    let target = gap.abs();
    let q = if target == 0.0 {
        0.0
    } else {
        let mass = |q: f64| ring_integral(rg, q, d, r_in, r_out);
        let mut hi = 1.0;
        let mut doublings = 0;
        while mass(hi)? < target {
            hi *= 2.0;
            doublings += 1;
            if doublings > 2000 {
                return Err(Error::Range { y: target });
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mass(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut profile = RadialProfile {
        q,
        r_in,
        r_out,
        u_in,
        u_out,
        d,
        grid: Vec::with_capacity(points),
        sign,
        rg: rg.clone(),
    };
    let mut acc = 0.0;
    let mut prev = r_in;
    for i in 0..points {
        let r = if i + 1 == points {
            r_out
        } else {
            r_in + (r_out - r_in) * i as f64 / (points - 1) as f64
        };
        if q != 0.0 && r > prev {
            acc += ring_integral(rg, q, d, prev, r)?;
        }
        prev = r;
        profile.grid.push((r, u_in + sign * acc));
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::PrototypeBarrier;
    use crate::growth::{lookup, make_regularized, GrowthKind};

    #[test]
    fn harmonic_annulus() {
        let g = GrowthKind::Power { p: 2.0 }.build("p2", 0.5).unwrap();
        let rg = make_regularized(&g, 10.0, 0.0).unwrap();
        let p = radial_oracle(&rg, 1.0, 2.0, 0.0, 1.0, 2, 101).unwrap();
        for &(r, u) in &p.grid {
            assert!((u - r.ln() / 2f64.ln()).abs() < 1e-10, "{r}");
        }
        assert!((p.slope(1.0).unwrap() - 1.442_695_040_888_963_4).abs() < 1e-10);
        assert!(p.residual().unwrap() < 1e-9);
    }

    #[test]
    fn equal_values_give_constant() {
        let g = GrowthKind::Power { p: 4.0 }.build("p4", 0.5).unwrap();
        let rg = make_regularized(&g, 10.0, 0.1).unwrap();
        let p = radial_oracle(&rg, 1.0, 3.0, 0.4, 0.4, 2, 11).unwrap();
        assert_eq!(p.q, 0.0);
        assert!(p.grid.iter().all(|&(_, u)| u == 0.4));
    }

    #[test]
    fn prototype_recovers_barrier() {
        let rg = make_regularized(&lookup("prototype").unwrap(), 1e6, 0.0).unwrap();
        let proto = PrototypeBarrier::new(0.5, 1.0, 2).unwrap();
        let top = proto.omega_radial(2.0).unwrap();
        let p = radial_oracle(&rg, 1.0, 2.0, 0.0, top, 2, 21).unwrap();
        assert!((p.q - 0.5).abs() < 1e-9, "{}", p.q);
        for &(r, u) in &p.grid {
            assert!((u - proto.omega_radial(r).unwrap()).abs() < 1e-9);
        }
    }
}
