//! Radial prototype barrier `ω`, its affine correction `v = ±ω + k·x + c`
//! and the constants that make `v` a local super/subsolution.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{BoundaryData, BoundaryPoint, DataNorms, ExteriorBallDomain, LocalGraph, StarPatch};
use crate::growth::RegularizedGrowth;
use crate::quadrature::integrate;
use crate::{dot, norm, Error, Point, Result};

/// Relative slack of every sign check.
pub const SIGN_TOL: f64 = 1e-10;
/// Bisection cap of [`choose_delta_ring`].
pub const DELTA_RING_MAX_ITER: usize = 200;

/// `b(r) = q/(r^{d-1} − q)` and `ω(x) = ∫_{r0}^{|x|} b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrototypeBarrier {
    q: f64,
    r0: f64,
    d: u32,
    /// `r0^{d-1} − q`, kept separately to avoid cancellation.
    gap: f64,
}

impl PrototypeBarrier {
    pub fn new(q: f64, r0: f64, d: u32) -> Result<Self> {
        validate_dim(d)?;
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::param("r0", "must be positive and finite"));
        }
        let top = r0.powi(d as i32 - 1);
        if !(q >= 0.0 && q < top) {
            return Err(Error::param("q", "must lie in [0, r0^(d-1))"));
        }
        Ok(PrototypeBarrier { q, r0, d, gap: top - q })
    }

    /// `q = (1 − δ)^{d-1} r0^{d-1}`.
    pub fn from_ring(r0: f64, delta_ring: f64, d: u32) -> Result<Self> {
        validate_dim(d)?;
        if !(delta_ring > 0.0 && delta_ring < 1.0) {
            return Err(Error::param("delta_ring", "must lie in (0, 1)"));
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::param("r0", "must be positive and finite"));
        }
        let m = (d - 1) as f64;
        let top = r0.powi(d as i32 - 1);
        let factor = (m * (-delta_ring).ln_1p()).exp();
        let gap = top * -(m * (-delta_ring).ln_1p()).exp_m1();
        Ok(PrototypeBarrier {
            q: factor * top,
            r0,
            d,
            gap,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    /// `r^{d-1} − r0^{d-1}` without cancellation.
    fn lift(&self, r: f64) -> f64 {
        if self.d == 2 {
            r - self.r0
        } else {
            let m = (self.d - 1) as f64;
            self.r0.powi(self.d as i32 - 1) * (m * (r / self.r0).ln()).exp_m1()
        }
    }

    /// `lift(r0 + s)` without forming `r0 + s`.
    fn lift_offset(&self, s: f64) -> f64 {
        if self.d == 2 {
            s
        } else {
            let m = (self.d - 1) as f64;
            self.r0.powi(self.d as i32 - 1) * (m * (s / self.r0).ln_1p()).exp_m1()
        }
    }

    fn denominator(&self, r: f64) -> f64 {
        self.lift(r) + self.gap
    }

    /// `b(r)`; errors on the pole `r^{d-1} ≤ q`.
    pub fn b(&self, r: f64) -> Result<f64> {
        let den = self.denominator(r);
        if !(den > 0.0) {
            return Err(Error::Pole { r });
        }
        Ok(self.q / den)
    }

    /// `b'(r) = −(d−1) q r^{d-2} / (r^{d-1} − q)²`.
    pub fn db(&self, r: f64) -> Result<f64> {
        let den = self.denominator(r);
        if !(den > 0.0) {
            return Err(Error::Pole { r });
        }
        let m = (self.d - 1) as f64;
        Ok(-m * self.q * r.powi(self.d as i32 - 2) / (den * den))
    }

    /// `r` with rounding below `r0` (a few ulps) snapped back onto the sphere.
    fn admissible(&self, r: f64) -> Result<f64> {
        if r >= self.r0 {
            Ok(r)
        } else if r >= self.r0 * (1.0 - 8.0 * f64::EPSILON) {
            Ok(self.r0)
        } else {
            Err(Error::Domain { r, r0: self.r0 })
        }
    }

    /// `ω` as a function of `r = |x|`.
    pub fn omega_radial(&self, r: f64) -> Result<f64> {
        let r = self.admissible(r)?;
        self.omega_offset(r - self.r0)
    }

    /// `ω(r0 + t)`, exact in `t` when `t ≪ r0`.
    pub fn omega_offset(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain { r: self.r0 + t, r0: self.r0 });
        }
        if self.q == 0.0 || t == 0.0 {
            return Ok(0.0);
        }
        if self.d == 2 {
            Ok(self.q * (t / self.gap).ln_1p())
        } else {
            self.quadrature_offset(t)
        }
    }

    pub fn omega(&self, x: Point) -> Result<f64> {
        self.omega_radial(norm(x))
    }

    /// Adaptive quadrature of `∫ b` in the variable `u = ln(r − r0 + g)`,
    /// `g = gap/((d−1) r0^{d-2})`, which flattens the peak at `r0`.
    pub fn omega_quadrature(&self, r: f64) -> Result<f64> {
        if !(r >= self.r0) {
            return Err(Error::Domain { r, r0: self.r0 });
        }
        self.quadrature_offset(r - self.r0)
    }

    fn quadrature_offset(&self, t: f64) -> Result<f64> {
        if self.q == 0.0 || t == 0.0 {
            return Ok(0.0);
        }
        let m = (self.d - 1) as f64;
        let g = self.gap / (m * self.r0.powi(self.d as i32 - 2));
        let (u0, u1) = (g.ln(), (t + g).ln());
        let f = |u: f64| {
            let t = u.exp();
            t * self.q / (self.lift_offset((t - g).max(0.0)) + self.gap)
        };
        integrate(f, u0, u1, 1e-12, 1e-13)
    }

    /// `Δω = b' + (d−1) b / r = −(d−1) q² / (r (r^{d-1} − q)²)`.
    pub fn laplacian(&self, r: f64) -> Result<f64> {
        let den = self.denominator(r);
        if !(den > 0.0) {
            return Err(Error::Pole { r });
        }
        let m = (self.d - 1) as f64;
        Ok(-m * self.q * self.q / (r * den * den))
    }

    /// `F̃'(b(r)) · r^{d-1}`, equal to `q`.
    pub fn flux(&self, r: f64) -> Result<f64> {
        let b = self.b(r)?;
        Ok(b / (1.0 + b) * r.powi(self.d as i32 - 1))
    }

    /// `|∇ω|` bound at the touching sphere, `b(r0) = q/(r0^{d-1} − q)`.
    pub fn b_at_r0(&self) -> f64 {
        self.q / self.gap
    }
}

fn validate_dim(d: u32) -> Result<()> {
    if d < 2 {
        return Err(Error::param("d", "dimension must be at least 2"));
    }
    Ok(())
}

/// Worst residuals of the radial equation and of super-harmonicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeReport {
    pub max_flux_residual: f64,
    pub max_laplacian: f64,
    pub worst_r: f64,
    pub holds: bool,
}

/// Checks `F̃'(b(r)) r^{d-1} = q` (the radial form of `div(ã(|∇ω|)∇ω) = 0`)
/// to `1e-12` and `Δω ≤ 0` at the sampled radii.
pub fn verify_prototype_pde(proto: &PrototypeBarrier, radii: &[f64]) -> Result<PdeReport> {
    let mut rep = PdeReport {
        max_flux_residual: 0.0,
        max_laplacian: f64::NEG_INFINITY,
        worst_r: f64::NAN,
        holds: true,
    };
    for &r in radii {
        if !(r > proto.r0) {
            return Err(Error::Domain { r, r0: proto.r0 });
        }
        let res = (proto.flux(r)? - proto.q).abs();
        let lap = proto.laplacian(r)?;
        if res > rep.max_flux_residual {
            rep.max_flux_residual = res;
            rep.worst_r = r;
        }
        rep.max_laplacian = rep.max_laplacian.max(lap);
    }
    rep.holds = rep.max_flux_residual <= 1e-12 * proto.q.max(1.0) && rep.max_laplacian <= 0.0;
    Ok(rep)
}

/// Upper (`+ω`) or lower (`−ω`) barrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierSign {
    Upper,
    Lower,
}

/// `v = ±ω + k·x + c` in the local frame of a boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueBarrier {
    pub proto: PrototypeBarrier,
    pub k: Point,
    pub c: f64,
    pub sign: BarrierSign,
    /// Threshold `M`: the supersolution property is asserted where `b(|x|) ≥ M`.
    pub threshold: f64,
}

impl TrueBarrier {
    fn pm(&self) -> f64 {
        match self.sign {
            BarrierSign::Upper => 1.0,
            BarrierSign::Lower => -1.0,
        }
    }

    pub fn value(&self, x: Point) -> Result<f64> {
        Ok(self.pm() * self.proto.omega(x)? + dot(self.k, x) + self.c)
    }

    pub fn gradient(&self, x: Point) -> Result<Point> {
        let r = self.proto.admissible(norm(x))?;
        let b = self.pm() * self.proto.b(r)?;
        Ok([b * x[0] / r + self.k[0], b * x[1] / r + self.k[1]])
    }
}

/// Sign of `a'_λ(|∇v|)` at the evaluated point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureCase {
    NonPositive,
    Positive,
}

/// Evaluation of `L(x) = −div(a_λ(|∇v|)∇v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LReport {
    /// `L(x)` for the upper barrier, `−L[w]` with `w = ω − k·x` for the lower one.
    pub value: f64,
    pub scale: f64,
    pub case: CurvatureCase,
    pub holds: bool,
    /// The case-split intermediate inequality.
    pub bracket_holds: bool,
    pub b: f64,
    pub grad_norm: f64,
}

/// Evaluates `L(x)` in closed form and checks its sign.
///
/// For the upper barrier the check is `L ≥ −1e-10·scale`. The lower barrier
/// `−ω + k·x + c` is handled through `w = ω − k·x`: it is a subsolution iff
/// `L[w] ≥ 0`, and the reported value `−L[w]` must be `≤ 1e-10·scale`.
pub fn verify_supersolution_l(rg: &RegularizedGrowth, tb: &TrueBarrier, x: Point) -> Result<LReport> {
    let proto = &tb.proto;
    let r = norm(x);
    if !(r > proto.r0) {
        return Err(Error::Domain { r, r0: proto.r0 });
    }
    let b = proto.b(r)?;
    if b < tb.threshold {
        return Err(Error::Precondition { b, threshold: tb.threshold });
    }
    let k = match tb.sign {
        BarrierSign::Upper => tb.k,
        BarrierSign::Lower => [-tb.k[0], -tb.k[1]],
    };
    let bp = proto.db(r)?;
    let m = (proto.d - 1) as f64;
    let grad = [b * x[0] / r + k[0], b * x[1] / r + k[1]];
    let g = norm(grad);
    let fpp = rg.ddf_lambda(g);
    let a = rg.a_lambda(g);
    // g a'(g) = F''_λ(g) − a(g)
    let g_da = fpp - a;
    let cross = k[0] * x[1] - k[1] * x[0];
    let kperp = cross * cross / (r * r * r);
    // r − b/b' = r (1 + 1/((d−1)(1+b)))
    let lever = r * (1.0 + 1.0 / (m * (1.0 + b)));
    let l1 = g_da / (g * g) * bp * lever * kperp;
    let l2 = -bp * (fpp - a / (1.0 + b));
    let l = l1 + l2;
    let scale = l1.abs() + bp.abs() * (fpp.abs() + a.abs());
    let case = if g_da <= 0.0 { CurvatureCase::NonPositive } else { CurvatureCase::Positive };
    let kk = dot(tb.k, tb.k);
    let bracket_holds = match case {
        CurvatureCase::NonPositive => {
            let delta = rg.base().delta_growth();
            let bracket = g * fpp / rg.df_lambda(g) - 1.0 / (1.0 + b);
            let floor = (2f64.powf(delta - 1.0) * b.powf(delta) - 1.0) / b;
            bracket >= floor - SIGN_TOL * (bracket.abs() + floor.abs())
        }
        CurvatureCase::Positive => {
            let bracket = g * g - lever * kperp;
            let floor = 0.25 * b * b - 2.0 * kk;
            bracket >= floor - SIGN_TOL * (bracket.abs() + floor.abs())
        }
    };
    let (value, holds) = match tb.sign {
        BarrierSign::Upper => (l, l >= -SIGN_TOL * scale),
        BarrierSign::Lower => (-l, -l <= SIGN_TOL * scale),
    };
    Ok(LReport {
        value,
        scale,
        case,
        holds,
        bracket_holds,
        b,
        grad_norm: g,
    })
}

/// Thresholds of the barrier construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierConstants {
    pub k: f64,
    pub m1: f64,
    pub m2: f64,
    pub m: f64,
    pub mstar: f64,
    pub norm_1inf: f64,
    pub delta_max: f64,
    pub r_max: f64,
    pub r0: f64,
    pub d: u32,
}

/// `M₁ = 2K`, `M₂ = max{2λ₀, M₁, 2^{(1−δ)/δ}}`, `M = max{M₁, M₂, 2K}`,
/// `(1 − 2δ_max)^{d-1} = max{M/(M+1), P/(1+P)}` with `P = M*‖u₀‖_{1,∞}`,
/// and `r_max = (1 − δ_max) r0 / (1 − 2δ_max)`.
pub fn compute_constants(
    k: f64,
    lambda0: f64,
    delta_growth: f64,
    mstar: f64,
    norm_1inf: f64,
    r0: f64,
    d: u32,
) -> Result<BarrierConstants> {
    validate_dim(d)?;
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::param("K", "must be finite and nonnegative"));
    }
    if !(lambda0 >= 0.0 && lambda0.is_finite()) {
        return Err(Error::param("lambda0", "must be finite and nonnegative"));
    }
    if !(delta_growth > 0.0 && delta_growth <= 1.0) {
        return Err(Error::param("delta_growth", "must lie in (0, 1]"));
    }
    if !(mstar > 0.0 && mstar.is_finite()) {
        return Err(Error::param("Mstar", "must be positive and finite"));
    }
    if !(norm_1inf >= 0.0 && norm_1inf.is_finite()) {
        return Err(Error::param("norm_1inf", "must be finite and nonnegative"));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::param("r0", "must be positive and finite"));
    }
    let m1 = 2.0 * k;
    let m2 = (2.0 * lambda0).max(m1).max(2f64.powf((1.0 - delta_growth) / delta_growth));
    let m = m1.max(m2).max(2.0 * k);
    let p = mstar * norm_1inf;
    // 1 − max{M/(M+1), P/(1+P)}
    let complement = (1.0 / (m + 1.0)).min(1.0 / (1.0 + p));
    let two_delta = if d == 2 {
        complement
    } else {
        -((-complement).ln_1p() / (d - 1) as f64).exp_m1()
    };
    let delta_max = 0.5 * two_delta;
    if !(delta_max > 0.0 && delta_max < 0.5) {
        return Err(Error::VerificationFailed {
            stage: "constants",
            detail: format!("delta_max = {delta_max} outside (0, 1/2)"),
        });
    }
    let r_max = (1.0 - delta_max) / (1.0 - two_delta) * r0;
    Ok(BarrierConstants {
        k,
        m1,
        m2,
        m,
        mstar,
        norm_1inf,
        delta_max,
        r_max,
        r0,
        d,
    })
}

impl BarrierConstants {
    /// `max{M, M*‖u₀‖_{1,∞}}`, the floor of `b` on `B_{r_max}`.
    pub fn b_floor(&self) -> f64 {
        self.m.max(self.mstar * self.norm_1inf)
    }
}

/// `∫_{r0}^{r0+η} b dr` for `q = (1 − δ)^{d-1} r0^{d-1}`.
pub fn ring_integral(r0: f64, eta: f64, delta_ring: f64, d: u32) -> Result<f64> {
    PrototypeBarrier::from_ring(r0, delta_ring, d)?.omega_offset(eta)
}

/// The logarithmic lower bound of [`ring_integral`] that diverges as `δ → 0`.
pub fn ring_integral_lower_bound(r0: f64, eta: f64, delta_ring: f64, delta_max: f64, d: u32) -> f64 {
    let m = (d - 1) as f64;
    let t = 1.0 + eta / r0;
    let one_minus = (m * (-delta_ring).ln_1p()).exp();
    let small = -(m * (-delta_ring).ln_1p()).exp_m1();
    r0 * (1.0 - delta_max).powf(m) / (m * t.powf(m - 1.0)) * ((t.powf(m) - one_minus) / small).ln()
}

/// `2^{-n}` for `0 ≤ n ≤ 1074`, subnormals included.
fn pow2_neg(n: i32) -> f64 {
    if n <= 1022 {
        f64::from_bits(((1023 - n) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (52 - (n - 1022)))
    }
}

/// Largest dyadic `δ ∈ (0, δ_max)` whose ring integral reaches `target`.
///
/// The binary exponent is located first (galloping, then bisection on the
/// exponent), then `[δ, 2δ]` is bisected with dyadic midpoints until the
/// bracket is within `2^{-20}` of its lower end, so `δ(1 + 2^{-20})` always
/// misses the target (or `δ_max`).
pub fn choose_delta_ring(bc: &BarrierConstants, r0: f64, eta: f64, d: u32, target: f64) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::param("eta", "standoff must be positive"));
    }
    if !target.is_finite() {
        return Err(Error::param("target", "must be finite"));
    }
    if target <= 0.0 {
        return Ok(0.5 * bc.delta_max);
    }
    let feasible = |delta: f64| -> Result<bool> {
        if delta >= bc.delta_max {
            return Ok(false);
        }
        Ok(ring_integral(r0, eta, delta, d)? >= target)
    };
    let mut iterations = 0;
    let mut step = |delta: f64| -> Result<bool> {
        iterations += 1;
        if iterations > DELTA_RING_MAX_ITER {
            return Err(Error::Nontermination {
                iterations: DELTA_RING_MAX_ITER,
            });
        }
        feasible(delta)
    };
    // 2^{-bad} infeasible, 2^{-good} feasible
    let (mut bad, mut good) = (0i32, 1i32);
    loop {
        if step(pow2_neg(good))? {
            break;
        }
        if good == 1074 {
            return Err(Error::Nontermination { iterations: DELTA_RING_MAX_ITER });
        }
        bad = good;
        good = (2 * good).min(1074);
    }
    while good - bad > 1 {
        let mid = bad + (good - bad) / 2;
        if step(pow2_neg(mid))? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    let (mut lo, mut hi) = (pow2_neg(good), pow2_neg(bad));
    while hi - lo > lo * 2f64.powi(-20) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if step(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Outcome of one verification stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCheck {
    pub stage: &'static str,
    pub passed: bool,
    /// Smallest margin observed; negative means violated.
    pub worst_margin: f64,
    pub samples: usize,
    pub detail: String,
}

/// Sampling density of the pair verification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOptions {
    pub interior_nx: usize,
    pub interior_ny: usize,
    pub boundary_points: usize,
}

impl Default for PairOptions {
    fn default() -> Self {
        PairOptions {
            interior_nx: 32,
            interior_ny: 16,
            boundary_points: 129,
        }
    }
}

/// Upper and lower barriers at one boundary point, with all constants.
#[derive(Debug, Clone)]
pub struct BarrierPair {
    pub graph: LocalGraph,
    pub constants: BarrierConstants,
    pub patch: StarPatch,
    pub norms: DataNorms,
    pub cstar: f64,
    pub target: f64,
    pub delta_ring: f64,
    pub ring_integral: f64,
    pub upper: TrueBarrier,
    pub lower: TrueBarrier,
    pub gradient_bound: f64,
    pub l_min_observed: f64,
    pub bracket_failures: usize,
    pub stages: Vec<StageCheck>,
}

impl BarrierPair {
    pub fn verified(&self) -> bool {
        self.stages.iter().all(|s| s.passed)
    }

    pub fn x0(&self) -> Point {
        self.graph.frame.x0
    }

    /// The first failing stage as an error.
    pub fn into_verified(self) -> Result<Self> {
        if let Some(s) = self.stages.iter().find(|s| !s.passed) {
            return Err(Error::VerificationFailed {
                stage: s.stage,
                detail: s.detail.clone(),
            });
        }
        Ok(self)
    }
}

/// `max{|∇v̲(x₀)|, |∇v(x₀)|} ≤ b(r0) + |k|`.
pub fn normal_derivative_bound(pair: &BarrierPair) -> f64 {
    pair.upper.proto.b_at_r0() + norm(pair.upper.k)
}

/// Builds the barrier pair at `at` and records every verification stage
/// without failing on them.
pub fn construct_barrier_pair(
    rg: &RegularizedGrowth,
    dom: &ExteriorBallDomain,
    bd: &BoundaryData,
    at: BoundaryPoint,
    opts: PairOptions,
) -> Result<BarrierPair> {
    let d = 2;
    let graph = dom.local_graph(at)?;
    let norms = bd.norms(dom);
    let mstar = graph.compute_mstar(graph.l)?;
    let base = rg.base();
    let constants = compute_constants(norms.grad_sup, base.lambda0(), base.delta_growth(), mstar, norms.norm_1inf, dom.r0(), d)?;
    let patch = graph.star_patch(constants.r_max)?;
    let cstar = dom.diameter() + 1.0;
    let target = cstar * norms.norm_1inf + norms.sup;
    let delta_ring = choose_delta_ring(&constants, dom.r0(), patch.eta, d, target)?;
    let proto = PrototypeBarrier::from_ring(dom.r0(), delta_ring, d)?;
    let ring = proto.omega_offset(patch.eta)?;

    let frame = graph.frame;
    let k = frame.vector_to_local(bd.gradient(frame.x0));
    let c = bd.value(frame.x0) - dot(k, frame.x0_local());
    let make = |sign| TrueBarrier {
        proto,
        k,
        c,
        sign,
        threshold: constants.m,
    };
    let upper = make(BarrierSign::Upper);
    let lower = make(BarrierSign::Lower);
    let tol = SIGN_TOL * (1.0 + norms.norm_1inf);

    // supersolution on Ω₊* and on Γ*
    let mut points = patch.interior_points(&graph, opts.interior_nx, opts.interior_ny);
    points.extend(graph.gamma_points(patch.l_star, opts.boundary_points).into_iter().filter(|p| norm(*p) > dom.r0()));
    let mut l_min = f64::INFINITY;
    let mut bracket_failures = 0;
    let mut super_ok = true;
    let mut super_detail = String::new();
    for &p in &points {
        for tb in [&upper, &lower] {
            let rep = match verify_supersolution_l(rg, tb, p) {
                Ok(rep) => rep,
                Err(e) => {
                    super_ok = false;
                    super_detail = format!("at ({:.6e}, {:.6e}): {e}", p[0], p[1]);
                    continue;
                }
            };
            let signed = match tb.sign {
                BarrierSign::Upper => rep.value,
                BarrierSign::Lower => -rep.value,
            };
            l_min = l_min.min(signed);
            if !rep.bracket_holds {
                bracket_failures += 1;
            }
            if !rep.holds {
                super_ok = false;
                super_detail = format!("L = {:.6e} at ({:.6e}, {:.6e})", signed, p[0], p[1]);
            }
        }
        if proto.laplacian(norm(p))? > 0.0 {
            super_ok = false;
            super_detail = format!("positive laplacian at ({:.6e}, {:.6e})", p[0], p[1]);
        }
    }
    let mut stages = Vec::new();
    stages.push(StageCheck {
        stage: "supersolution",
        passed: super_ok,
        worst_margin: l_min,
        samples: points.len(),
        detail: super_detail,
    });

    // v ≥ u₀ ≥ v̲ on Γ*
    let gamma = graph.gamma_points(patch.l_star, opts.boundary_points);
    let mut margin = f64::INFINITY;
    let mut witness = None;
    for &p in &gamma {
        let u0 = bd.value(frame.to_global(p));
        let m = (upper.value(p)? - u0).min(u0 - lower.value(p)?);
        if m < margin {
            margin = m;
            witness = Some(p);
        }
    }
    stages.push(StageCheck {
        stage: "boundary_gamma",
        passed: margin >= -tol,
        worst_margin: margin,
        samples: gamma.len(),
        detail: witness.map(|p| format!("tightest at ({:.6e}, {:.6e})", p[0], p[1])).unwrap_or_default(),
    });

    // v ≥ ‖u₀‖_∞ and v̲ ≤ −‖u₀‖_∞ on ∂Ω₊* ∖ Γ*
    let outer = patch.outer_boundary_points(&graph, opts.boundary_points);
    let mut margin = f64::INFINITY;
    let mut witness = None;
    for &p in &outer {
        let m = (upper.value(p)? - norms.sup).min(-norms.sup - lower.value(p)?);
        if m < margin {
            margin = m;
            witness = Some(p);
        }
    }
    stages.push(StageCheck {
        stage: "outer_boundary",
        passed: margin >= -tol,
        worst_margin: margin,
        samples: outer.len(),
        detail: witness.map(|p| format!("tightest at ({:.6e}, {:.6e})", p[0], p[1])).unwrap_or_default(),
    });

    let gradient_bound = proto.b_at_r0() + norms.grad_sup;
    Ok(BarrierPair {
        graph,
        constants,
        patch,
        norms,
        cstar,
        target,
        delta_ring,
        ring_integral: ring,
        upper,
        lower,
        gradient_bound,
        l_min_observed: l_min,
        bracket_failures,
        stages,
    })
}

/// [`construct_barrier_pair`] that fails with the first violated stage.
pub fn build_barrier_pair(
    rg: &RegularizedGrowth,
    dom: &ExteriorBallDomain,
    bd: &BoundaryData,
    at: BoundaryPoint,
) -> Result<BarrierPair> {
    construct_barrier_pair(rg, dom, bd, at, PairOptions::default())?.into_verified()
}

/// A row of the plot-ready barrier profile along the inward ray from `x₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub r: f64,
    pub b: f64,
    pub omega: f64,
    pub v_along_ray: f64,
}

/// Samples `b`, `ω` and the upper barrier at `(0, −r)`, `r ∈ [r0, r_max]`.
pub fn barrier_profile(pair: &BarrierPair, count: usize) -> Result<Vec<ProfileRow>> {
    let proto = &pair.upper.proto;
    let (r0, r1) = (proto.r0(), pair.constants.r_max);
    (0..count)
        .map(|i| {
            let r = r0 + (r1 - r0) * i as f64 / (count - 1).max(1) as f64;
            Ok(ProfileRow {
                r,
                b: proto.b(r)?,
                omega: proto.omega_radial(r)?,
                v_along_ray: pair.upper.value([0.0, -r])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{make_regularized, GrowthKind};

    #[test]
    fn b_examples() {
        let p = PrototypeBarrier::new(0.5, 1.0, 2).unwrap();
        assert_eq!(p.b(1.0).unwrap(), 1.0);
        let p3 = PrototypeBarrier::new(0.5, 1.0, 3).unwrap();
        assert!((p3.b(2.0).unwrap() - 1.0 / 7.0).abs() < 1e-16);
        assert!(p.b(1e12).unwrap() < 1e-11);
    }

    #[test]
    fn omega_examples() {
        let p = PrototypeBarrier::new(0.5, 1.0, 2).unwrap();
        assert_eq!(p.omega_radial(1.0).unwrap(), 0.0);
        assert!((p.omega_radial(2.0).unwrap() - 0.549_306_144_334_054_9).abs() < 1e-15);
        assert!((p.omega_quadrature(2.0).unwrap() - 0.549_306_144_334_054_9).abs() < 1e-12);
        assert!(matches!(p.omega_radial(0.9), Err(Error::Domain { .. })));
    }

    #[test]
    fn laplacian_closed_form_d2() {
        let (q, r) = (0.5, 1.7);
        let p = PrototypeBarrier::new(q, 1.0, 2).unwrap();
        let exact = -q * q / (r * (r - q) * (r - q));
        assert!((p.laplacian(r).unwrap() - exact).abs() < 1e-15);
        let via = p.db(r).unwrap() + p.b(r).unwrap() / r;
        assert!((via - exact).abs() < 1e-14);
    }

    #[test]
    fn flux_identity_example() {
        let p = PrototypeBarrier::new(0.3, 1.0, 2).unwrap();
        assert!((p.flux(1.7).unwrap() - 0.3).abs() < 1e-15);
        let zero = PrototypeBarrier::new(0.0, 1.0, 2).unwrap();
        let rep = verify_prototype_pde(&zero, &[1.5, 2.0]).unwrap();
        assert_eq!(rep.max_flux_residual, 0.0);
        assert_eq!(rep.max_laplacian, 0.0);
    }

    #[test]
    fn constants_examples() {
        let c = compute_constants(1.0, 2.0, 0.5, 1.0, 1.0, 1.0, 2).unwrap();
        assert_eq!((c.m1, c.m2, c.m), (2.0, 4.0, 4.0));
        assert_eq!(c.delta_max, 0.1);
        assert_eq!(c.r_max, 1.125);
        let tiny = compute_constants(1e-12, 0.0, 0.25, 1.0, 0.0, 1.0, 2).unwrap();
        assert_eq!(tiny.m, 8.0);
    }

    #[test]
    fn ring_integral_example() {
        let v = ring_integral(1.0, 0.5, 0.1, 2).unwrap();
        assert!((v - 0.9 * 6f64.ln()).abs() < 1e-14);
        let lb = ring_integral_lower_bound(1.0, 0.5, 0.1, 0.1, 2);
        assert!(lb <= v + 1e-14);
    }

    #[test]
    fn delta_ring_examples() {
        let bc = compute_constants(1.0, 2.0, 0.5, 1.0, 1.0, 1.0, 2).unwrap();
        assert_eq!(choose_delta_ring(&bc, 1.0, 0.5, 2, 0.0).unwrap(), 0.05);
        let d = choose_delta_ring(&bc, 1.0, 0.5, 2, 10.0).unwrap();
        assert!(ring_integral(1.0, 0.5, d, 2).unwrap() >= 10.0);
        assert!(ring_integral(1.0, 0.5, 2.0 * d, 2).unwrap() < 10.0);
        // dyadic
        let m = d.frexp_mantissa_bits();
        assert!(m <= 22, "{d} has {m} significant bits");
    }

    trait Bits {
        fn frexp_mantissa_bits(self) -> u32;
    }

    impl Bits for f64 {
        fn frexp_mantissa_bits(self) -> u32 {
            let bits = self.to_bits() & ((1u64 << 52) - 1);
            if bits == 0 {
                1
            } else {
                53 - bits.trailing_zeros()
            }
        }
    }

    #[test]
    fn l_vanishing_k_and_quadratic() {
        let proto = PrototypeBarrier::from_ring(1.0, 0.01, 2).unwrap();
        let tb = TrueBarrier {
            proto,
            k: [0.0, 0.0],
            c: 0.0,
            sign: BarrierSign::Upper,
            threshold: 4.0,
        };
        let g4 = GrowthKind::Power { p: 4.0 }.build("p4", 0.5).unwrap();
        let rg = make_regularized(&g4, 10.0, 0.0).unwrap();
        let rep = verify_supersolution_l(&rg, &tb, [0.0, -1.02]).unwrap();
        assert!(rep.holds && rep.value >= 0.0);
        let g2 = GrowthKind::Power { p: 2.0 }.build("p2", 0.5).unwrap();
        let rq = make_regularized(&g2, 5.0, 0.0).unwrap();
        let tbk = TrueBarrier { k: [0.7, -0.3], ..tb };
        let rep = verify_supersolution_l(&rq, &tbk, [0.4, -0.95]).unwrap();
        assert!(rep.holds && rep.bracket_holds);
        assert!(matches!(
            verify_supersolution_l(&rq, &tbk, [0.0, -50.0]),
            Err(Error::Precondition { .. })
        ));
    }
}
