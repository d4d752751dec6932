//! Convex growth functions `F`, hypothesis checks and the regularizations
//! `F_λ` (quadratic continuation above `λ`) and `F_{λ,μ} = μ s²/2 + F_λ`.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::roots::invert_increasing;
use crate::{log_grid, Error, Result};

/// Default exponent `δ` of the growth hypothesis.
pub const DEFAULT_DELTA: f64 = 0.5;
/// Tolerance for declaring the liminf hypotheses satisfied.
pub const HYPOTHESIS_TOL: f64 = 1e-3;
/// Points of the default hypothesis grids.
pub const GRID_POINTS: usize = 512;

/// A radial integrand `F: [0, ∞) → [0, ∞)`.
///
/// Only [`Integrand::value`] is mandatory. Missing derivatives are
/// synthesized by central differences; analytic ones always win.
pub trait Integrand: Send + Sync {
    fn value(&self, s: f64) -> f64;

    fn first(&self, _s: f64) -> Option<f64> {
        None
    }

    fn second(&self, _s: f64) -> Option<f64> {
        None
    }

    /// `F''(s)/F'(s)` evaluated without forming `F'`, for integrands whose
    /// derivatives overflow long before the ratio does.
    fn curvature_ratio(&self, _s: f64) -> Option<f64> {
        None
    }

    /// Range scanned for the threshold `λ₀`.
    fn scan_range(&self) -> (f64, f64) {
        (1e-2, 1e8)
    }

    /// Range of the liminf tail grid, when it must differ from `[λ₀, 10⁸]`.
    fn tail_range(&self) -> Option<(f64, f64)> {
        None
    }
}

fn fd_step(s: f64) -> f64 {
    1e-6f64.max(1e-6 * s)
}

/// Coarse classification used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthClass {
    Power,
    Oscillating,
    Logarithmic,
    DoubleExponential,
    Prototype,
    Custom,
}

impl GrowthClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            GrowthClass::Power => "power",
            GrowthClass::Oscillating => "oscillating",
            GrowthClass::Logarithmic => "eta_log",
            GrowthClass::DoubleExponential => "eta_double_exp",
            GrowthClass::Prototype => "prototype",
            GrowthClass::Custom => "custom",
        }
    }
}

/// An integrand with its metadata: `δ` of the growth hypothesis and the
/// threshold `λ₀` above which `s^{2-δ} F''/F' ≥ 1`.
#[derive(Clone)]
pub struct GrowthFunction {
    name: String,
    class: GrowthClass,
    integrand: Arc<dyn Integrand>,
    delta_growth: f64,
    lambda0: f64,
}

impl fmt::Debug for GrowthFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrowthFunction")
            .field("name", &self.name)
            .field("class", &self.class)
            .field("delta_growth", &self.delta_growth)
            .field("lambda0", &self.lambda0)
            .finish()
    }
}

impl GrowthFunction {
    /// Wraps an integrand; `λ₀` is found by scanning [`Integrand::scan_range`].
    /// Integrands that never reach the threshold get `λ₀ = 0`.
    pub fn new(name: impl Into<String>, class: GrowthClass, integrand: impl Integrand + 'static, delta_growth: f64) -> Result<Self> {
        if !(delta_growth > 0.0 && delta_growth <= 1.0) {
            return Err(Error::param("delta_growth", "must lie in (0, 1]"));
        }
        let mut g = GrowthFunction {
            name: name.into(),
            class,
            integrand: Arc::new(integrand),
            delta_growth,
            lambda0: 0.0,
        };
        let (lo, hi) = g.integrand.scan_range();
        let grid = log_grid(lo, hi, GRID_POINTS);
        g.lambda0 = scan_lambda0(&g, delta_growth, &grid)?.unwrap_or(0.0);
        Ok(g)
    }

    /// Overrides the scanned threshold.
    pub fn with_lambda0(mut self, lambda0: f64) -> Self {
        self.lambda0 = lambda0;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class(&self) -> GrowthClass {
        self.class
    }

    pub fn delta_growth(&self) -> f64 {
        self.delta_growth
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn f(&self, s: f64) -> f64 {
        self.integrand.value(s)
    }

    pub fn df(&self, s: f64) -> f64 {
        if let Some(v) = self.integrand.first(s) {
            return v;
        }
        let h = fd_step(s);
        if s >= h {
            (self.f(s + h) - self.f(s - h)) / (2.0 * h)
        } else {
            (self.f(s + h) - self.f(s)) / h
        }
    }

    pub fn ddf(&self, s: f64) -> f64 {
        if let Some(v) = self.integrand.second(s) {
            return v;
        }
        let h = fd_step(s);
        if self.integrand.first(s).is_some() {
            if s >= h {
                (self.df(s + h) - self.df(s - h)) / (2.0 * h)
            } else {
                (self.df(s + h) - self.df(s)) / h
            }
        } else {
            let c = s.max(h);
            (self.f(c + h) - 2.0 * self.f(c) + self.f(c - h)) / (h * h)
        }
    }

    /// `a(s) = F'(s)/s`.
    pub fn a(&self, s: f64) -> f64 {
        self.df(s) / s
    }

    /// `F''(s)/F'(s)`; errors when `F'(s) = 0`.
    pub fn curvature_ratio(&self, s: f64) -> Result<f64> {
        if let Some(r) = self.integrand.curvature_ratio(s) {
            return if r.is_nan() { Err(Error::Evaluation { s }) } else { Ok(r) };
        }
        let d1 = self.df(s);
        let d2 = self.ddf(s);
        if d1 == 0.0 {
            return Err(Error::DegenerateDerivative { s });
        }
        let r = d2 / d1;
        if r.is_nan() {
            return Err(Error::Evaluation { s });
        }
        Ok(r)
    }

    /// Liminf grid: 512 log-spaced points over `[λ₀, 10⁸]` unless the
    /// integrand prescribes its own tail range.
    pub fn tail_grid(&self) -> Vec<f64> {
        let (lo, hi) = match self.integrand.tail_range() {
            Some(r) => r,
            None => {
                let (scan_lo, scan_hi) = self.integrand.scan_range();
                (self.lambda0.max(scan_lo), scan_hi)
            }
        };
        let lo = if hi / lo < 1e4 { hi * 1e-4 } else { lo };
        log_grid(lo, hi, GRID_POINTS)
    }

    /// Grid on which the linear minorant is checked.
    pub fn a1_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.integrand.scan_range();
        log_grid(lo, hi, GRID_POINTS)
    }
}

fn scan_lambda0(g: &GrowthFunction, delta: f64, grid: &[f64]) -> Result<Option<f64>> {
    let mut threshold = None;
    for &s in grid.iter().rev() {
        let ratio = s.powf(2.0 - delta) * g.curvature_ratio(s)?;
        if ratio >= 1.0 {
            threshold = Some(s);
        } else {
            break;
        }
    }
    Ok(threshold)
}

// ---------------------------------------------------------------------------
// Catalogue integrands

/// `F(s) = s^p`.
#[derive(Debug, Clone, Copy)]
pub struct Power {
    pub p: f64,
}

impl Integrand for Power {
    fn value(&self, s: f64) -> f64 {
        s.powf(self.p)
    }
    fn first(&self, s: f64) -> Option<f64> {
        Some(self.p * s.powf(self.p - 1.0))
    }
    fn second(&self, s: f64) -> Option<f64> {
        let c = self.p * (self.p - 1.0);
        Some(if c == 0.0 { 0.0 } else { c * s.powf(self.p - 2.0) })
    }
}

/// `F(t) = t^p` up to `t₀ = e^{e^{e^{π/2}}}`, then
/// `t^{(p+q)/2 + (p-q)/2 · sin log log log t}`.
#[derive(Debug, Clone, Copy)]
pub struct Oscillating {
    pub p: f64,
    pub q: f64,
}

impl Oscillating {
    /// Smallest `t` with `sin log log log t = 1`.
    pub fn t0() -> f64 {
        FRAC_PI_2.exp().exp().exp()
    }

    /// The exponent `e(t)` with `F(t) = t^{e(t)}`.
    pub fn exponent(&self, t: f64) -> f64 {
        if t <= Self::t0() {
            self.p
        } else {
            0.5 * (self.p + self.q) + 0.5 * (self.p - self.q) * t.ln().ln().ln().sin()
        }
    }

    /// `(g', g'')` of `g(t) = e(t) ln t` beyond `t₀`.
    fn log_derivatives(&self, t: f64) -> (f64, f64) {
        let amp = 0.5 * (self.p - self.q);
        let l1 = t.ln();
        let l2 = l1.ln();
        let l3 = l2.ln();
        let w = 1.0 / (t * l1 * l2);
        let dw = -w * w * (l1 * l2 + l2 + 1.0);
        let e = self.exponent(t);
        let de = amp * l3.cos() * w;
        let dde = -amp * l3.sin() * w * w + amp * l3.cos() * dw;
        let dg = de * l1 + e / t;
        let ddg = dde * l1 + 2.0 * de / t - e / (t * t);
        (dg, ddg)
    }
}

impl Integrand for Oscillating {
    fn value(&self, t: f64) -> f64 {
        t.powf(self.exponent(t))
    }
    fn first(&self, t: f64) -> Option<f64> {
        if t <= Self::t0() {
            return Power { p: self.p }.first(t);
        }
        let (dg, _) = self.log_derivatives(t);
        Some(self.value(t) * dg)
    }
    fn second(&self, t: f64) -> Option<f64> {
        if t <= Self::t0() {
            return Power { p: self.p }.second(t);
        }
        let (dg, ddg) = self.log_derivatives(t);
        Some(self.value(t) * (ddg + dg * dg))
    }
    fn curvature_ratio(&self, t: f64) -> Option<f64> {
        if t <= Self::t0() {
            return Some((self.p - 1.0) / t);
        }
        let (dg, ddg) = self.log_derivatives(t);
        Some((ddg + dg * dg) / dg)
    }
    fn tail_range(&self) -> Option<(f64, f64)> {
        let t0 = Self::t0();
        Some((t0, 1e8 * t0))
    }
}

/// `F(s) = s η(s)` with `η(s) = 1 + ln^α(1 + s) ~ ln^α s`.
#[derive(Debug, Clone, Copy)]
pub struct EtaLog {
    pub alpha: f64,
}

impl EtaLog {
    fn parts(&self, s: f64) -> (f64, f64, f64) {
        let a = self.alpha;
        let l = s.ln_1p();
        let eta = 1.0 + l.powf(a);
        let deta = if l == 0.0 {
            if a == 1.0 {
                1.0
            } else if a > 1.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            a * l.powf(a - 1.0) / (1.0 + s)
        };
        // s η''(s), written through s/ln(1+s) to stay finite at 0
        let s_over_l = if l == 0.0 { 1.0 } else { s / l };
        let s_ddeta = if l == 0.0 && a >= 1.0 {
            0.0
        } else {
            a * l.powf(a - 1.0) * s_over_l * ((a - 1.0) - l) / ((1.0 + s) * (1.0 + s))
        };
        (eta, deta, s_ddeta)
    }
}

impl Integrand for EtaLog {
    fn value(&self, s: f64) -> f64 {
        s * (1.0 + s.ln_1p().powf(self.alpha))
    }
    fn first(&self, s: f64) -> Option<f64> {
        let (eta, deta, _) = self.parts(s);
        Some(eta + s * deta)
    }
    fn second(&self, s: f64) -> Option<f64> {
        let (_, deta, s_ddeta) = self.parts(s);
        Some(2.0 * deta + s_ddeta)
    }
}

/// `F(s) = s η(s)` with `η(s) = e^{e^s}`.
#[derive(Debug, Clone, Copy)]
pub struct EtaDoubleExp;

impl Integrand for EtaDoubleExp {
    fn value(&self, s: f64) -> f64 {
        s * s.exp().exp()
    }
    fn first(&self, s: f64) -> Option<f64> {
        let es = s.exp();
        Some(es.exp() * (1.0 + s * es))
    }
    fn second(&self, s: f64) -> Option<f64> {
        let es = s.exp();
        Some(es.exp() * es * (2.0 + s + s * es))
    }
    fn curvature_ratio(&self, s: f64) -> Option<f64> {
        Some((2.0 + s + s * s.exp()) / ((-s).exp() + s))
    }
    fn scan_range(&self) -> (f64, f64) {
        (1e-2, 3e2)
    }
}

/// The comparison integrand with `F̃'(s) = s/(1+s)`, i.e. `ã(s) = 1/(1+s)`.
#[derive(Debug, Clone, Copy)]
pub struct Prototype;

impl Prototype {
    pub fn a(s: f64) -> f64 {
        1.0 / (1.0 + s)
    }

    pub fn da(s: f64) -> f64 {
        -1.0 / ((1.0 + s) * (1.0 + s))
    }

    pub fn dfunc(s: f64) -> f64 {
        s / (1.0 + s)
    }

    /// `(F̃')^{-1}(y) = y/(1 - y)` on `[0, 1)`.
    pub fn inverse_dfunc(y: f64) -> f64 {
        y / (1.0 - y)
    }
}

impl Integrand for Prototype {
    fn value(&self, s: f64) -> f64 {
        s - s.ln_1p()
    }
    fn first(&self, s: f64) -> Option<f64> {
        Some(Prototype::dfunc(s))
    }
    fn second(&self, s: f64) -> Option<f64> {
        Some(1.0 / ((1.0 + s) * (1.0 + s)))
    }
}

/// Integrand given by closures; unspecified derivatives are synthesized.
pub struct FnIntegrand {
    value: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    first: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    second: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl FnIntegrand {
    pub fn new(value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        FnIntegrand {
            value: Box::new(value),
            first: None,
            second: None,
        }
    }

    pub fn with_first(mut self, first: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.first = Some(Box::new(first));
        self
    }

    pub fn with_second(mut self, second: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.second = Some(Box::new(second));
        self
    }
}

impl Integrand for FnIntegrand {
    fn value(&self, s: f64) -> f64 {
        (self.value)(s)
    }
    fn first(&self, s: f64) -> Option<f64> {
        self.first.as_ref().map(|f| f(s))
    }
    fn second(&self, s: f64) -> Option<f64> {
        self.second.as_ref().map(|f| f(s))
    }
}

/// Parameters of the catalogue entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthKind {
    Power { p: f64 },
    Oscillating { p: f64, q: f64 },
    EtaLog { alpha: f64 },
    EtaDoubleExp,
    Prototype,
}

impl GrowthKind {
    pub fn build(&self, name: impl Into<String>, delta_growth: f64) -> Result<GrowthFunction> {
        match *self {
            GrowthKind::Power { p } => {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::param("p", "power exponent must be positive"));
                }
                GrowthFunction::new(name, GrowthClass::Power, Power { p }, delta_growth)
            }
            GrowthKind::Oscillating { p, q } => {
                if !(p > 1.0 && q >= p && q.is_finite()) {
                    return Err(Error::param("q", "oscillating exponents need 1 < p <= q"));
                }
                GrowthFunction::new(name, GrowthClass::Oscillating, Oscillating { p, q }, delta_growth)
            }
            GrowthKind::EtaLog { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::param("alpha", "must be positive"));
                }
                GrowthFunction::new(name, GrowthClass::Logarithmic, EtaLog { alpha }, delta_growth)
            }
            GrowthKind::EtaDoubleExp => GrowthFunction::new(name, GrowthClass::DoubleExponential, EtaDoubleExp, delta_growth),
            GrowthKind::Prototype => GrowthFunction::new(name, GrowthClass::Prototype, Prototype, delta_growth),
        }
    }
}

/// Named catalogue entries with `δ = 0.5`.
pub fn catalogue() -> Vec<GrowthFunction> {
    catalogue_kinds()
        .into_iter()
        .map(|(name, kind)| kind.build(name, DEFAULT_DELTA).expect("catalogue entries are valid"))
        .collect()
}

pub fn catalogue_kinds() -> Vec<(&'static str, GrowthKind)> {
    alloc::vec![
        ("power_p2", GrowthKind::Power { p: 2.0 }),
        ("power_p3", GrowthKind::Power { p: 3.0 }),
        ("power_p4", GrowthKind::Power { p: 4.0 }),
        ("oscillating_p2_q4", GrowthKind::Oscillating { p: 2.0, q: 4.0 }),
        ("eta_log1", GrowthKind::EtaLog { alpha: 1.0 }),
        ("eta_log2", GrowthKind::EtaLog { alpha: 2.0 }),
        ("eta_double_exp", GrowthKind::EtaDoubleExp),
        ("prototype", GrowthKind::Prototype),
    ]
}

/// Looks a catalogue entry up by name.
pub fn lookup(name: &str) -> Option<GrowthFunction> {
    catalogue().into_iter().find(|g| g.name() == name)
}

// ---------------------------------------------------------------------------
// Hypothesis checks

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A1Check {
    pub holds: bool,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A2Check {
    pub liminf_estimate: f64,
    pub holds: bool,
    pub lambda0_suggested: Option<f64>,
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param("grid", "must be nonempty"));
    }
    if grid[0] <= 0.0 {
        return Err(Error::param("grid", "points must be positive"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("grid", "must be strictly increasing"));
    }
    Ok(())
}

/// Linear minorant `C₁ s − C₂ ≤ F(s)` with `C₁ > 0`.
///
/// On a finite grid any slope works, so the slope is tied to the tail:
/// `F(s)/s` must not decay over the upper half of the grid (it may not drop
/// below half its value at the start of that half). Then
/// `C₁ = min(1, inf_tail F(s)/s)` and `C₂` is the smallest feasible offset.
pub fn check_a1(g: &GrowthFunction, grid: &[f64]) -> Result<A1Check> {
    validate_grid(grid)?;
    let values: Vec<f64> = grid
        .iter()
        .map(|&s| {
            let v = g.f(s);
            // overflow to +∞ still dominates any linear minorant
            if v.is_finite() || v == f64::INFINITY {
                Ok(v)
            } else {
                Err(Error::Evaluation { s })
            }
        })
        .collect::<Result<_>>()?;
    let half = grid.len() / 2;
    let slopes: Vec<f64> = grid.iter().zip(&values).map(|(s, v)| v / s).collect();
    let tail_inf = slopes[half..].iter().copied().fold(f64::INFINITY, f64::min);
    let holds = tail_inf > 0.0 && tail_inf >= 0.5 * slopes[half];
    let c1 = if holds { tail_inf.min(1.0) } else { 0.0 };
    let c2 = grid
        .iter()
        .zip(&values)
        .map(|(s, v)| c1 * s - v)
        .fold(0.0, f64::max);
    Ok(A1Check { holds, c1, c2 })
}

fn liminf_check<R>(grid: &[f64], ratio: R) -> Result<A2Check>
where
    R: Fn(f64) -> Result<Option<f64>>,
{
    let mut points = Vec::with_capacity(grid.len());
    for &s in grid {
        if let Some(r) = ratio(s)? {
            points.push((s, r));
        }
    }
    if points.is_empty() {
        return Err(Error::param("tail_grid", "no admissible grid points"));
    }
    let half = points.len() / 2;
    let liminf_estimate = points[half..].iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut lambda0_suggested = None;
    for &(s, r) in points.iter().rev() {
        if r >= 1.0 {
            lambda0_suggested = Some(s);
        } else {
            break;
        }
    }
    Ok(A2Check {
        liminf_estimate,
        holds: liminf_estimate >= 2.0 - HYPOTHESIS_TOL,
        lambda0_suggested,
    })
}

fn validate_tail(delta: f64, tail_grid: &[f64]) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1]"));
    }
    validate_grid(tail_grid)?;
    if tail_grid[tail_grid.len() - 1] / tail_grid[0] < 1e4 * (1.0 - 1e-12) {
        return Err(Error::param("tail_grid", "must span at least four decades"));
    }
    Ok(())
}

/// Running infimum of `s^{2-δ} F''(s)/F'(s)` over the upper half of the grid.
pub fn check_a2(g: &GrowthFunction, delta: f64, tail_grid: &[f64]) -> Result<A2Check> {
    validate_tail(delta, tail_grid)?;
    liminf_check(tail_grid, |s| Ok(Some(s.powf(2.0 - delta) * g.curvature_ratio(s)?)))
}

/// Relaxed form `s² F''(s) / ((ln s)^{1+δ} F'(s))`; points with `s ≤ 1` are skipped.
pub fn check_a2_relaxed(g: &GrowthFunction, delta: f64, tail_grid: &[f64]) -> Result<A2Check> {
    validate_tail(delta, tail_grid)?;
    liminf_check(tail_grid, |s| {
        if s <= 1.0 {
            return Ok(None);
        }
        Ok(Some(s * s * g.curvature_ratio(s)? / s.ln().powf(1.0 + delta)))
    })
}

// ---------------------------------------------------------------------------
// Regularization

/// `F_λ` (quadratic Taylor continuation of `F` above `λ`) lifted by `μ s²/2`.
#[derive(Debug, Clone)]
pub struct RegularizedGrowth {
    base: GrowthFunction,
    lambda: f64,
    mu: f64,
    f_at: f64,
    df_at: f64,
    ddf_at: f64,
}

impl RegularizedGrowth {
    pub fn new(base: GrowthFunction, lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidThreshold {
                lambda,
                reason: "threshold must be positive and finite",
            });
        }
        if lambda < base.lambda0() {
            return Err(Error::InvalidThreshold {
                lambda,
                reason: "threshold lies below λ₀",
            });
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::param("mu", "must be finite and nonnegative"));
        }
        let f_at = base.f(lambda);
        let df_at = base.df(lambda);
        let ddf_at = base.ddf(lambda);
        if !(f_at.is_finite() && df_at.is_finite() && ddf_at.is_finite()) {
            return Err(Error::Evaluation { s: lambda });
        }
        if ddf_at <= 0.0 {
            return Err(Error::InvalidThreshold {
                lambda,
                reason: "F'' is not positive at the splice point",
            });
        }
        Ok(RegularizedGrowth {
            base,
            lambda,
            mu,
            f_at,
            df_at,
            ddf_at,
        })
    }

    pub fn base(&self) -> &GrowthFunction {
        &self.base
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Same splice, different lift.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        RegularizedGrowth::new(self.base.clone(), self.lambda, mu)
    }

    pub fn f_lambda(&self, s: f64) -> f64 {
        if s <= self.lambda {
            self.base.f(s)
        } else {
            let t = s - self.lambda;
            self.f_at + self.df_at * t + 0.5 * self.ddf_at * t * t
        }
    }

    pub fn df_lambda(&self, s: f64) -> f64 {
        if s <= self.lambda {
            self.base.df(s)
        } else {
            self.df_at + self.ddf_at * (s - self.lambda)
        }
    }

    pub fn ddf_lambda(&self, s: f64) -> f64 {
        if s <= self.lambda {
            self.base.ddf(s)
        } else {
            self.ddf_at
        }
    }

    /// `a_λ(s) = F'_λ(s)/s`.
    pub fn a_lambda(&self, s: f64) -> f64 {
        self.df_lambda(s) / s
    }

    /// `a'_λ(s) = (F''_λ(s) − F'_λ(s)/s)/s`.
    pub fn da_lambda(&self, s: f64) -> f64 {
        (self.ddf_lambda(s) - self.df_lambda(s) / s) / s
    }

    /// Energy density `F_{λ,μ}(s)`.
    pub fn energy(&self, s: f64) -> f64 {
        0.5 * self.mu * s * s + self.f_lambda(s)
    }

    /// `G(s) = F'_{λ,μ}(s) = μ s + F'_λ(s)`.
    pub fn flux(&self, s: f64) -> f64 {
        self.mu * s + self.df_lambda(s)
    }

    pub fn dflux(&self, s: f64) -> f64 {
        self.mu + self.ddf_lambda(s)
    }

    /// `G(s)/s`, continued by `G'(0)` at the origin.
    pub fn coefficient(&self, s: f64) -> f64 {
        if s > 1e-12 * self.lambda.max(1.0) {
            self.flux(s) / s
        } else {
            self.dflux(s)
        }
    }

    /// `G^{-1}(y)` with `|G(s) − y| ≤ 1e−12·max(1, y)`; values below `G(0⁺)` map to 0.
    pub fn inverse_flux(&self, y: f64) -> Result<f64> {
        if !(y.is_finite()) {
            return Err(Error::Range { y });
        }
        if y <= 0.0 {
            return Ok(0.0);
        }
        // beyond the splice G is affine
        let g_lambda = self.flux(self.lambda);
        if y >= g_lambda {
            let slope = self.mu + self.ddf_at;
            let s = self.lambda + (y - g_lambda) / slope;
            return Ok(s);
        }
        invert_increasing(|s| self.flux(s), |s| self.dflux(s), y, 0.0, self.lambda, 1e-12)
    }
}

/// [`RegularizedGrowth::new`] under its catalogue name.
pub fn make_regularized(g: &GrowthFunction, lambda: f64, mu: f64) -> Result<RegularizedGrowth> {
    RegularizedGrowth::new(g.clone(), lambda, mu)
}

/// [`RegularizedGrowth::inverse_flux`] under its catalogue name.
pub fn inverse_df(rg: &RegularizedGrowth, y: f64) -> Result<f64> {
    rg.inverse_flux(y)
}

/// Quadratic sandwich `C₃ s² − C₄ ≤ F_{λ,μ}(s) ≤ C₄(s² + 1)` on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticBounds {
    pub c3: f64,
    pub c4: f64,
}

pub fn quadratic_bounds(rg: &RegularizedGrowth, grid: &[f64]) -> Result<QuadraticBounds> {
    validate_grid(grid)?;
    // the tail curvature fixes the quadratic rate
    let c3 = 0.25 * (rg.mu + rg.ddf_at);
    let mut c4: f64 = 1.0;
    for &s in grid {
        let e = rg.energy(s);
        if !e.is_finite() {
            return Err(Error::Evaluation { s });
        }
        c4 = c4.max(e / (s * s + 1.0)).max(c3 * s * s - e);
    }
    Ok(QuadraticBounds { c3, c4 })
}

/// Summary row used by reports.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub name: String,
    pub class: String,
    pub delta: f64,
    pub lambda0: f64,
    pub a1: A1Check,
    pub a2: A2Check,
    pub a2_relaxed: A2Check,
}

/// Runs all three hypothesis checks on the default grids.
pub fn growth_report(g: &GrowthFunction) -> Result<GrowthReport> {
    let tail = g.tail_grid();
    Ok(GrowthReport {
        name: g.name().to_string(),
        class: g.class().as_str().to_string(),
        delta: g.delta_growth(),
        lambda0: g.lambda0(),
        a1: check_a1(g, &g.a1_grid())?,
        a2: check_a2(g, g.delta_growth(), &tail)?,
        a2_relaxed: check_a2_relaxed(g, g.delta_growth(), &tail)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power(p: f64) -> GrowthFunction {
        GrowthKind::Power { p }.build("power", DEFAULT_DELTA).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn a1_quadratic_and_linear() {
        let grid = log_grid(0.1, 100.0, 200);
        let c = check_a1(&power(2.0), &grid).unwrap();
        assert!(c.holds);
        assert_eq!(c.c1, 1.0);
        assert!(c.c2 <= 1.0);
        for &s in &grid {
            assert!(c.c1 * s - c.c2 <= s * s + 1e-12);
        }
        let lin = check_a1(&power(1.0), &grid).unwrap();
        assert!(lin.holds);
        assert_eq!((lin.c1, lin.c2), (1.0, 0.0));
    }

    #[test]
    fn a1_fails_for_sqrt() {
        let grid = log_grid(0.1, 1e8, 512);
        assert!(!check_a1(&power(0.5), &grid).unwrap().holds);
    }

    #[test]
    fn a1_reports_offending_point() {
        let g = GrowthFunction::new("bad", GrowthClass::Custom, FnIntegrand::new(|s| if s > 10.0 { f64::NAN } else { s * s }), 0.5);
        // the scan itself hits the NaN
        let g = match g {
            Ok(g) => g,
            Err(e) => {
                assert!(matches!(e, Error::Evaluation { .. } | Error::DegenerateDerivative { .. }));
                return;
            }
        };
        let err = check_a1(&g, &[1.0, 20.0]).unwrap_err();
        assert_eq!(err, Error::Evaluation { s: 20.0 });
    }

    #[test]
    fn a1_rejects_bad_grids() {
        assert!(check_a1(&power(2.0), &[]).is_err());
        assert!(check_a1(&power(2.0), &[1.0, 1.0]).is_err());
        assert!(check_a1(&power(2.0), &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn a2_power_prototype_linear() {
        let grid = log_grid(1.0, 1e8, 512);
        let cubic = check_a2(&power(3.0), 0.5, &grid).unwrap();
        assert!(cubic.holds);
        // ratio (p-1) s^{1-δ} = 2 s^{1/2}; its minimum over the upper half sits at 10⁴
        assert!(close(cubic.liminf_estimate, 2.0 * grid[256].sqrt(), 1e-9));
        let proto = catalogue().into_iter().find(|g| g.name() == "prototype").unwrap();
        let c = check_a2(&proto, 0.5, &grid).unwrap();
        assert!(!c.holds);
        let last = grid[511];
        assert!(close(c.liminf_estimate, last.sqrt() / (1.0 + last), 1e-6));
        assert_eq!(c.lambda0_suggested, None);
        let lin = check_a2(&power(1.0), 0.5, &grid).unwrap();
        assert_eq!(lin.liminf_estimate, 0.0);
        assert!(!lin.holds);
    }

    #[test]
    fn a2_degenerate_derivative() {
        let g = GrowthFunction::new("flat", GrowthClass::Custom, FnIntegrand::new(|_| 1.0).with_first(|_| 0.0), 0.5);
        assert!(matches!(g, Err(Error::DegenerateDerivative { .. })));
    }

    #[test]
    fn a2_grid_must_span_four_decades() {
        assert!(check_a2(&power(2.0), 0.5, &log_grid(1.0, 100.0, 20)).is_err());
        assert!(check_a2(&power(2.0), 0.0, &log_grid(1.0, 1e5, 20)).is_err());
    }

    #[test]
    fn a2_relaxed_examples() {
        let grid = log_grid(1e-2, 1e8, 512);
        let q = check_a2_relaxed(&power(2.0), 0.5, &grid).unwrap();
        assert!(q.holds);
        let proto = lookup("prototype").unwrap();
        assert!(!check_a2_relaxed(&proto, 0.5, &grid).unwrap().holds);
        let dexp = lookup("eta_double_exp").unwrap();
        assert!(check_a2_relaxed(&dexp, 0.5, &dexp.tail_grid()).unwrap().holds);
    }

    #[test]
    fn lambda0_from_scan() {
        // s^{1-δ} ≥ 1 ⇔ s ≥ 1 for F = s²
        let l0 = power(2.0).lambda0();
        assert!(l0 >= 1.0 && l0 < 1.05, "{l0}");
        // 3 s^{1/2} ≥ 1 ⇔ s ≥ 1/9 for F = s⁴
        let l0 = power(4.0).lambda0();
        assert!(l0 >= 1.0 / 9.0 && l0 < 1.0 / 9.0 * 1.05, "{l0}");
    }

    #[test]
    fn splice_examples() {
        let q = make_regularized(&power(2.0), 5.0, 0.0).unwrap();
        assert!(close(q.f_lambda(7.0), 49.0, 1e-14));
        let quartic = make_regularized(&power(4.0), 1.0, 0.0).unwrap();
        assert!(close(quartic.f_lambda(2.0), 11.0, 1e-14));
        for g in catalogue() {
            if g.class() == GrowthClass::DoubleExponential {
                continue;
            }
            let lam = g.lambda0().max(0.5) * 3.0;
            let rg = make_regularized(&g, lam, 0.0).unwrap();
            assert_eq!(rg.f_lambda(lam), g.f(lam));
            assert_eq!(rg.df_lambda(lam), g.df(lam));
            assert_eq!(rg.ddf_lambda(lam), g.ddf(lam));
        }
    }

    #[test]
    fn invalid_threshold() {
        let lin = GrowthKind::Power { p: 1.0 }.build("lin", 0.5).unwrap();
        assert!(matches!(make_regularized(&lin, 2.0, 0.0), Err(Error::InvalidThreshold { .. })));
        assert!(matches!(make_regularized(&power(4.0), 0.01, 0.0), Err(Error::InvalidThreshold { .. })));
    }

    #[test]
    fn inverse_examples() {
        let q = make_regularized(&power(2.0), 1.5, 0.0).unwrap();
        assert!(close(inverse_df(&q, 3.0).unwrap(), 1.5, 1e-12));
        let q1 = make_regularized(&power(2.0), 1.5, 1.0).unwrap();
        assert!(close(inverse_df(&q1, 3.0).unwrap(), 1.0, 1e-12));
        let proto = make_regularized(&lookup("prototype").unwrap(), 10.0, 0.0).unwrap();
        assert!(close(inverse_df(&proto, 0.5).unwrap(), 1.0, 1e-12));
        assert_eq!(inverse_df(&proto, -1.0).unwrap(), 0.0);
        assert!(matches!(inverse_df(&proto, f64::NAN), Err(Error::Range { .. })));
    }

    #[test]
    fn catalogue_examples() {
        assert_eq!(lookup("power_p2").unwrap().f(4.0), 16.0);
        assert!(close(lookup("prototype").unwrap().df(1.0), 0.5, 1e-15));
        let osc = Oscillating { p: 2.0, q: 4.0 };
        let t0 = Oscillating::t0();
        assert!((t0 / 2.123_809_295_215_806_6e53 - 1.0).abs() < 1e-12);
        assert!((osc.exponent(t0) - 2.0).abs() < 1e-9);
        for t in log_grid(t0, 1e40 * t0, 400) {
            let e = osc.exponent(t);
            assert!((2.0..=4.0).contains(&e));
        }
    }

    #[test]
    fn derivative_consistency_on_log_grid() {
        for g in catalogue() {
            let (lo, hi) = match g.class() {
                GrowthClass::DoubleExponential => (1e-2, 5.0),
                _ => (1e-2, 1e6),
            };
            let rel = if g.class() == GrowthClass::DoubleExponential { 1e-7 } else { 1e-5 };
            for s in log_grid(lo, hi, 60) {
                let h = rel * s;
                let fd = (g.df(s + h) - g.df(s - h)) / (2.0 * h);
                let exact = g.ddf(s);
                assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-8 * g.df(s).abs()), "{} at {s}: {fd} vs {exact}", g.name());
            }
        }
    }

    #[test]
    fn fd_synthesis_matches_analytic() {
        let g = GrowthFunction::new("q", GrowthClass::Custom, FnIntegrand::new(|s| s * s * s), 0.5).unwrap();
        for s in [0.5, 2.0, 30.0] {
            assert!(close(g.df(s), 3.0 * s * s, 1e-8));
            assert!(close(g.ddf(s), 6.0 * s, 1e-3));
        }
        let g2 = GrowthFunction::new("q", GrowthClass::Custom, FnIntegrand::new(|s| s * s * s).with_first(|s| 3.0 * s * s), 0.5).unwrap();
        assert!(close(g2.ddf(2.0), 12.0, 1e-8));
    }

    #[test]
    fn da_lambda_identity() {
        let rg = make_regularized(&power(4.0), 3.0, 0.0).unwrap();
        for s in [0.5, 1.0, 2.9, 3.5, 10.0] {
            let h = 1e-6 * s;
            let fd = (rg.a_lambda(s + h) - rg.a_lambda(s - h)) / (2.0 * h);
            let lhs = rg.da_lambda(s) * s;
            let rhs = rg.ddf_lambda(s) - rg.df_lambda(s) / s;
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
            assert!((fd * s - rhs).abs() < 1e-6 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn quadratic_sandwich() {
        let grid = log_grid(1e-3, 1e4, 300);
        for g in catalogue() {
            if g.class() == GrowthClass::DoubleExponential || g.class() == GrowthClass::Oscillating {
                continue;
            }
            let rg = make_regularized(&g, g.lambda0().max(1.0) * 2.0, 0.1).unwrap();
            let b = quadratic_bounds(&rg, &grid).unwrap();
            assert!(b.c3 > 0.0 && b.c4 > 0.0);
            for &s in &grid {
                let e = rg.energy(s);
                assert!(b.c3 * s * s - b.c4 <= e + 1e-9 * e.abs());
                assert!(e <= b.c4 * (s * s + 1.0) * (1.0 + 1e-12));
            }
        }
    }
}
