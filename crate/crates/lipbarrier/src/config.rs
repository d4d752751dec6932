//! Experiment configuration (JSON).

use std::path::Path;

use serde::{Deserialize, Serialize};

use lipbarrier_core::geometry::{BoundaryData, ExteriorBallDomain, Shape};
use lipbarrier_core::growth::{lookup, GrowthFunction, GrowthKind, DEFAULT_DELTA};
use lipbarrier_core::verify::Slacks;
use lipbarrier_core::Point;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub growth: Vec<GrowthSpec>,
    pub domain: DomainSpec,
    /// Also accepted as `u0`, at the top level or inside `domain`.
    #[serde(default, alias = "u0", skip_serializing_if = "Option::is_none")]
    pub boundary_data: Option<BoundaryDataSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub barrier: BarrierSpec,
    #[serde(default)]
    pub verification: VerificationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

/// Hypotheses a growth entry may be required to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    A1,
    A2,
    A2Relaxed,
}

/// A growth function, either a catalogue entry (`name` only) or a
/// parametrized family (`kind` plus parameters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<GrowthKindSpec>,
    #[serde(default = "default_delta")]
    pub delta_growth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(default = "default_require")]
    pub require: Vec<Hypothesis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GrowthKindSpec {
    Power { p: f64 },
    Oscillating { p: f64, q: f64 },
    EtaLog { alpha: f64 },
    EtaDoubleExp,
    Prototype,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_require() -> Vec<Hypothesis> {
    vec![Hypothesis::A1, Hypothesis::A2]
}

impl GrowthSpec {
    pub fn build(&self) -> Result<GrowthFunction, CliError> {
        let g = match self.kind {
            Some(kind) => {
                let kind = match kind {
                    GrowthKindSpec::Power { p } => GrowthKind::Power { p },
                    GrowthKindSpec::Oscillating { p, q } => GrowthKind::Oscillating { p, q },
                    GrowthKindSpec::EtaLog { alpha } => GrowthKind::EtaLog { alpha },
                    GrowthKindSpec::EtaDoubleExp => GrowthKind::EtaDoubleExp,
                    GrowthKindSpec::Prototype => GrowthKind::Prototype,
                };
                kind.build(self.name.clone(), self.delta_growth).map_err(CliError::core_config)?
            }
            None => {
                let base = lookup(&self.name).ok_or_else(|| CliError::config(format!("unknown growth function `{}`", self.name)))?;
                let kind = lipbarrier_core::growth::catalogue_kinds()
                    .into_iter()
                    .find(|(n, _)| *n == self.name)
                    .map(|(_, k)| k)
                    .expect("catalogue names resolve");
                if self.delta_growth == base.delta_growth() {
                    base
                } else {
                    kind.build(self.name.clone(), self.delta_growth).map_err(CliError::core_config)?
                }
            }
        };
        Ok(match self.lambda0 {
            Some(l) if l >= 0.0 && l.is_finite() => g.with_lambda0(l),
            Some(l) => return Err(CliError::config(format!("lambda0 = {l} must be finite and nonnegative"))),
            None => g,
        })
    }

    /// Whether the integrand may enter a Dirichlet solve.
    pub fn solvable(&self) -> bool {
        let kind = self.kind.or_else(|| {
            lipbarrier_core::growth::catalogue_kinds()
                .into_iter()
                .find(|(n, _)| *n == self.name)
                .map(|(_, k)| match k {
                    GrowthKind::Power { p } => GrowthKindSpec::Power { p },
                    GrowthKind::Oscillating { p, q } => GrowthKindSpec::Oscillating { p, q },
                    GrowthKind::EtaLog { alpha } => GrowthKindSpec::EtaLog { alpha },
                    GrowthKind::EtaDoubleExp => GrowthKindSpec::EtaDoubleExp,
                    GrowthKind::Prototype => GrowthKindSpec::Prototype,
                })
        });
        matches!(kind, Some(GrowthKindSpec::Power { .. }) | Some(GrowthKindSpec::Prototype))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Disk {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u0: Option<BoundaryDataSpec>,
    },
    Annulus {
        inner: f64,
        outer: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u0: Option<BoundaryDataSpec>,
    },
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u0: Option<BoundaryDataSpec>,
    },
    SmoothedPolygon {
        vertices: Vec<Point>,
        rounding: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u0: Option<BoundaryDataSpec>,
    },
}

impl DomainSpec {
    pub fn shape(&self) -> Shape {
        match self {
            DomainSpec::Disk { radius, .. } => Shape::Disk { radius: *radius },
            DomainSpec::Annulus { inner, outer, .. } => Shape::Annulus { inner: *inner, outer: *outer },
            DomainSpec::Ellipse { a, b, .. } => Shape::Ellipse { a: *a, b: *b },
            DomainSpec::SmoothedPolygon { vertices, rounding, .. } => Shape::SmoothedPolygon {
                vertices: vertices.clone(),
                rounding: *rounding,
            },
        }
    }

    pub fn r0(&self) -> Option<f64> {
        match self {
            DomainSpec::Disk { r0, .. }
            | DomainSpec::Annulus { r0, .. }
            | DomainSpec::Ellipse { r0, .. }
            | DomainSpec::SmoothedPolygon { r0, .. } => *r0,
        }
    }

    fn take_u0(&mut self) -> Option<BoundaryDataSpec> {
        match self {
            DomainSpec::Disk { u0, .. }
            | DomainSpec::Annulus { u0, .. }
            | DomainSpec::Ellipse { u0, .. }
            | DomainSpec::SmoothedPolygon { u0, .. } => u0.take(),
        }
    }

    fn set_r0(&mut self, value: f64) {
        match self {
            DomainSpec::Disk { r0, .. }
            | DomainSpec::Annulus { r0, .. }
            | DomainSpec::Ellipse { r0, .. }
            | DomainSpec::SmoothedPolygon { r0, .. } => *r0 = Some(value),
        }
    }

    /// Radius of the smallest origin-centred disk containing the domain.
    fn extent(&self) -> f64 {
        match self {
            DomainSpec::Disk { radius, .. } => *radius,
            DomainSpec::Annulus { outer, .. } => *outer,
            DomainSpec::Ellipse { a, b, .. } => a.max(*b),
            DomainSpec::SmoothedPolygon { vertices, rounding, .. } => {
                vertices.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max) + rounding
            }
        }
    }

    pub fn build(&self) -> Result<ExteriorBallDomain, CliError> {
        ExteriorBallDomain::new(self.shape(), self.r0()).map_err(CliError::core_config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryDataSpec {
    Constant {
        value: f64,
    },
    Affine {
        k: Point,
        #[serde(default)]
        c: f64,
    },
    TrigTrace {
        amplitude: f64,
        #[serde(default = "default_mode")]
        mode: u32,
        #[serde(default)]
        phase: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    LogRadial {
        inner_radius: f64,
        outer_radius: f64,
        inner_value: f64,
        outer_value: f64,
    },
}

fn default_mode() -> u32 {
    2
}

impl Default for BoundaryDataSpec {
    fn default() -> Self {
        BoundaryDataSpec::Constant { value: 0.0 }
    }
}

impl BoundaryDataSpec {
    pub fn build(&self, domain: &DomainSpec) -> Result<BoundaryData, CliError> {
        let bd = match *self {
            BoundaryDataSpec::Constant { value } => BoundaryData::Constant { value },
            BoundaryDataSpec::Affine { k, c } => BoundaryData::Affine { k, c },
            BoundaryDataSpec::TrigTrace { amplitude, mode, phase, radius } => BoundaryData::TrigTrace {
                amplitude,
                mode,
                phase,
                radius: radius.unwrap_or_else(|| domain.extent()),
            },
            BoundaryDataSpec::LogRadial {
                inner_radius,
                outer_radius,
                inner_value,
                outer_value,
            } => BoundaryData::LogRadial {
                inner_radius,
                outer_radius,
                inner_value,
                outer_value,
            },
        };
        bd.validate().map_err(CliError::core_config)?;
        let finite = match &bd {
            BoundaryData::Constant { value } => value.is_finite(),
            BoundaryData::Affine { k, c } => k[0].is_finite() && k[1].is_finite() && c.is_finite(),
            BoundaryData::TrigTrace { amplitude, .. } => amplitude.is_finite(),
            BoundaryData::LogRadial { inner_value, outer_value, .. } => inner_value.is_finite() && outer_value.is_finite(),
        };
        if !finite {
            return Err(CliError::config("boundary data must be finite"));
        }
        Ok(bd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// Name of the growth entry to solve with; the first entry by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<String>,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_mu_schedule")]
    pub mu_schedule: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_init: Option<f64>,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_true")]
    pub uniqueness_check: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_h() -> f64 {
    0.05
}
fn default_tol() -> f64 {
    1e-8
}
fn default_mu_schedule() -> Vec<f64> {
    vec![1e-3]
}
fn default_max_rounds() -> usize {
    5
}
fn default_max_iter() -> usize {
    200
}
fn default_true() -> bool {
    true
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            growth: None,
            h: default_h(),
            tol: default_tol(),
            mu_schedule: default_mu_schedule(),
            lambda_init: None,
            max_rounds: default_max_rounds(),
            max_iter: default_max_iter(),
            uniqueness_check: true,
            seed: 0,
        }
    }
}

/// Boundary point selector: arc-length fraction or a point on `∂Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum X0Selector {
    Param(f64),
    Point(Point),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSpec {
    #[serde(default = "default_x0")]
    pub x0: Vec<X0Selector>,
    #[serde(default = "default_nx")]
    pub interior_nx: usize,
    #[serde(default = "default_ny")]
    pub interior_ny: usize,
    #[serde(default = "default_boundary_points")]
    pub boundary_points: usize,
    #[serde(default = "default_profile_points")]
    pub profile_points: usize,
}

fn default_x0() -> Vec<X0Selector> {
    vec![X0Selector::Param(0.0)]
}
fn default_nx() -> usize {
    32
}
fn default_ny() -> usize {
    16
}
fn default_boundary_points() -> usize {
    129
}
fn default_profile_points() -> usize {
    65
}

impl Default for BarrierSpec {
    fn default() -> Self {
        BarrierSpec {
            x0: default_x0(),
            interior_nx: default_nx(),
            interior_ny: default_ny(),
            boundary_points: default_boundary_points(),
            profile_points: default_profile_points(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationSpec {
    #[serde(default = "default_true")]
    pub max_principle: bool,
    #[serde(default = "default_true")]
    pub gradient_principle: bool,
    #[serde(default = "default_true")]
    pub sandwich: bool,
    #[serde(default = "default_true")]
    pub normal_derivative: bool,
    #[serde(default = "default_true")]
    pub fixed_point: bool,
    #[serde(default)]
    pub slacks: SlackSpec,
}

impl Default for VerificationSpec {
    fn default() -> Self {
        VerificationSpec {
            max_principle: true,
            gradient_principle: true,
            sandwich: true,
            normal_derivative: true,
            fixed_point: true,
            slacks: SlackSpec::default(),
        }
    }
}

/// Slack constants `C` of the discrete checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlackSpec {
    #[serde(default = "one")]
    pub max_principle: f64,
    #[serde(default = "one")]
    pub gradient_principle: f64,
    #[serde(default = "one")]
    pub sandwich: f64,
    #[serde(default = "one")]
    pub normal_derivative: f64,
    /// `‖∇u_h‖_∞ ≤ gradient_bound + K + C·h`.
    #[serde(default = "one")]
    pub gradient_bound: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for SlackSpec {
    fn default() -> Self {
        SlackSpec {
            max_principle: 1.0,
            gradient_principle: 1.0,
            sandwich: 1.0,
            normal_derivative: 1.0,
            gradient_bound: 1.0,
        }
    }
}

impl From<SlackSpec> for Slacks {
    fn from(s: SlackSpec) -> Slacks {
        Slacks {
            max_principle: s.max_principle,
            gradient_principle: s.gradient_principle,
            sandwich: s.sandwich,
            normal_derivative: s.normal_derivative,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every parameter and fills in values derived from others
    /// (`r0`, trig-trace radius), so the result is self-describing.
    pub fn materialize(mut self) -> Result<Self, CliError> {
        for g in &self.growth {
            g.build()?;
        }
        let mut names: Vec<&str> = self.growth.iter().map(|g| g.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::config("growth names must be unique"));
        }
        let dom = self.domain.build()?;
        self.domain.set_r0(dom.r0());
        let mut data = match (self.boundary_data.take(), self.domain.take_u0()) {
            (Some(_), Some(_)) => return Err(CliError::config("boundary data given both at the top level and inside domain")),
            (top, nested) => top.or(nested).unwrap_or_default(),
        };
        if let BoundaryDataSpec::TrigTrace { radius, .. } = &mut data {
            if radius.is_none() {
                *radius = Some(self.domain.extent());
            }
        }
        data.build(&self.domain)?;
        self.boundary_data = Some(data);
        let s = &self.solver;
        if !(s.h > 0.0 && s.h.is_finite()) {
            return Err(CliError::config("solver.h must be positive"));
        }
        if !(s.tol > 0.0 && s.tol < 1.0) {
            return Err(CliError::config("solver.tol must lie in (0, 1)"));
        }
        if s.mu_schedule.is_empty() || s.mu_schedule.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(CliError::config("solver.mu_schedule needs nonnegative finite values"));
        }
        if s.mu_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(CliError::config("solver.mu_schedule must be strictly decreasing"));
        }
        if let Some(l) = s.lambda_init {
            if !(l > 0.0 && l.is_finite()) {
                return Err(CliError::config("solver.lambda_init must be positive"));
            }
        }
        if s.max_rounds == 0 || s.max_iter == 0 {
            return Err(CliError::config("solver.max_rounds and solver.max_iter must be positive"));
        }
        if let Some(name) = &s.growth {
            if !self.growth.iter().any(|g| &g.name == name) {
                return Err(CliError::config(format!("solver.growth `{name}` is not declared")));
            }
        }
        let b = &self.barrier;
        if b.interior_nx == 0 || b.interior_ny == 0 || b.boundary_points < 2 || b.profile_points < 2 {
            return Err(CliError::config("barrier sampling counts are too small"));
        }
        for sel in &b.x0 {
            match *sel {
                X0Selector::Param(t) if !(0.0..1.0).contains(&t) => {
                    return Err(CliError::config(format!("x0 param {t} must lie in [0, 1)")));
                }
                X0Selector::Point(p) if !(p[0].is_finite() && p[1].is_finite()) => {
                    return Err(CliError::config("x0 point must be finite"));
                }
                _ => {}
            }
        }
        let sl = &self.verification.slacks;
        if [sl.max_principle, sl.gradient_principle, sl.sandwich, sl.normal_derivative, sl.gradient_bound]
            .iter()
            .any(|c| !(*c >= 0.0 && c.is_finite()))
        {
            return Err(CliError::config("slack constants must be finite and nonnegative"));
        }
        Ok(self)
    }

    /// Boundary data; constant zero when none is given.
    pub fn boundary(&self) -> Result<BoundaryData, CliError> {
        match &self.boundary_data {
            Some(data) => data.build(&self.domain),
            None => match &self.domain {
                DomainSpec::Disk { u0: Some(data), .. }
                | DomainSpec::Annulus { u0: Some(data), .. }
                | DomainSpec::Ellipse { u0: Some(data), .. }
                | DomainSpec::SmoothedPolygon { u0: Some(data), .. } => data.build(&self.domain),
                _ => BoundaryDataSpec::default().build(&self.domain),
            },
        }
    }

    /// The growth entry used by solves.
    pub fn solve_growth(&self) -> Result<&GrowthSpec, CliError> {
        let spec = match &self.solver.growth {
            Some(name) => self.growth.iter().find(|g| &g.name == name),
            None => self.growth.first(),
        }
        .ok_or_else(|| CliError::config("no growth function declared for the solve"))?;
        if !spec.solvable() {
            return Err(CliError::config(format!(
                "growth `{}` takes part in hypothesis checks only and cannot be solved with",
                spec.name
            )));
        }
        Ok(spec)
    }
}
