//! Discrete checks of the maximum principles and the barrier sandwich.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::barrier::{normal_derivative_bound, BarrierPair};
use crate::geometry::BoundaryData;
use crate::mesh::Mesh;
use crate::solver::DiscreteSolution;
use crate::{dot, norm, Point, Result};

/// Slack constants `C` of the discrete checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slacks {
    /// `tol = 1e-8 + C·h`
    pub max_principle: f64,
    /// `tol = C·h^{1/2}·scale`
    pub gradient_principle: f64,
    /// `tol = C·h·‖u₀‖_{1,∞}`
    pub sandwich: f64,
    /// `|∂_n u_h(x₀)| ≤ bound + C·h`
    pub normal_derivative: f64,
}

impl Default for Slacks {
    fn default() -> Self {
        Slacks {
            max_principle: 1.0,
            gradient_principle: 1.0,
            sandwich: 1.0,
            normal_derivative: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPrincipleReport {
    pub sup_u: f64,
    pub sup_u0: f64,
    pub tol: f64,
    pub excess: f64,
    pub passed: bool,
}

/// `‖u_h‖_∞ ≤ ‖u₀‖_∞ + 1e-8 + C·h`.
pub fn verify_max_principle(sol: &DiscreteSolution, sup_u0: f64, c: f64) -> MaxPrincipleReport {
    let tol = 1e-8 + c * sol.mesh.h;
    let excess = sol.sup_u - sup_u0;
    MaxPrincipleReport {
        sup_u: sol.sup_u,
        sup_u0,
        tol,
        excess,
        passed: excess <= tol,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientPrincipleReport {
    pub interior_max: f64,
    pub boundary_max: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Elements touching a boundary vertex.
pub fn boundary_elements(mesh: &Mesh) -> Vec<bool> {
    mesh.elements.iter().map(|e| e.v.iter().any(|&v| mesh.is_boundary(v))).collect()
}

/// Interior element gradients are dominated by boundary-adjacent ones up to
/// `C·h^{1/2}·scale`, `scale = max(boundary max, 1)`.
pub fn verify_gradient_principle(sol: &DiscreteSolution, c: f64) -> GradientPrincipleReport {
    let flags = boundary_elements(&sol.mesh);
    let mut interior_max: f64 = 0.0;
    let mut boundary_max: f64 = 0.0;
    for (t, &b) in flags.iter().enumerate() {
        let g = sol.grad_norm(t);
        if b {
            boundary_max = boundary_max.max(g);
        } else {
            interior_max = interior_max.max(g);
        }
    }
    let tol = c * sol.mesh.h.sqrt() * boundary_max.max(1.0);
    GradientPrincipleReport {
        interior_max,
        boundary_max,
        tol,
        passed: interior_max <= boundary_max + tol,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichReport {
    /// `min (v − u_h)` over the checked points.
    pub upper_margin: f64,
    /// `min (u_h − v̲)` over the checked points.
    pub lower_margin: f64,
    pub tol: f64,
    pub points: usize,
    pub witness: Option<Point>,
    /// `|u_h(x₀) − u₀(x₀)|`
    pub touching_gap: f64,
    pub passed: bool,
}

/// `v̲ − tol ≤ u_h ≤ v + tol` at mesh vertices inside `Ω₊*` and at a lattice
/// of interior points of `Ω₊*`, with `tol = C·h·‖u₀‖_{1,∞}`.
pub fn verify_sandwich(sol: &DiscreteSolution, pair: &BarrierPair, bd: &BoundaryData, c: f64) -> Result<SandwichReport> {
    let mesh = &sol.mesh;
    let frame = pair.graph.frame;
    let patch = pair.patch;
    let tol = c * mesh.h * pair.norms.norm_1inf;
    let mut checks: Vec<(Point, f64)> = Vec::new();
    for (v, &x) in mesh.vertices.iter().enumerate() {
        let p = frame.to_local(x);
        if p[0].abs() >= patch.l_star || norm(p) <= frame.r0 {
            continue;
        }
        let f = pair.graph.f(p[0]);
        if p[1] <= f + 1e-12 && p[1] >= f - patch.l_d_star {
            checks.push((p, sol.values[v]));
        }
    }
    for p in patch.interior_points(&pair.graph, 24, 12) {
        let x = frame.to_global(p);
        if mesh.locate(x).is_some() {
            if let Some(u) = mesh.evaluate(&sol.values, x) {
                checks.push((p, u));
            }
        }
    }
    let mut upper_margin = f64::INFINITY;
    let mut lower_margin = f64::INFINITY;
    let mut witness = None;
    for &(p, u) in &checks {
        let up = pair.upper.value(p)? - u;
        let lo = u - pair.lower.value(p)?;
        if up.min(lo) < upper_margin.min(lower_margin) {
            witness = Some(frame.to_global(p));
        }
        upper_margin = upper_margin.min(up);
        lower_margin = lower_margin.min(lo);
    }
    let x0 = frame.x0;
    let touching_gap = mesh.evaluate(&sol.values, x0).map(|u| (u - bd.value(x0)).abs()).unwrap_or(f64::NAN);
    Ok(SandwichReport {
        upper_margin,
        lower_margin,
        tol,
        points: checks.len(),
        witness,
        touching_gap,
        passed: !checks.is_empty() && upper_margin >= -tol && lower_margin >= -tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalDerivativeReport {
    pub measured: f64,
    pub bound: f64,
    pub tol: f64,
    pub passed: bool,
}

/// `|∂_n u_h|` at `x₀`: the largest `|∇u_T · n|` over elements around the
/// boundary vertex nearest to `x₀`.
pub fn measured_normal_derivative(sol: &DiscreteSolution, x0: Point, normal: Point) -> f64 {
    let mesh = &sol.mesh;
    let nearest = (0..mesh.vertices.len())
        .filter(|&v| mesh.is_boundary(v))
        .min_by(|&a, &b| {
            let da = norm([mesh.vertices[a][0] - x0[0], mesh.vertices[a][1] - x0[1]]);
            let db = norm([mesh.vertices[b][0] - x0[0], mesh.vertices[b][1] - x0[1]]);
            da.partial_cmp(&db).unwrap()
        });
    let Some(v) = nearest else { return 0.0 };
    mesh.elements
        .iter()
        .enumerate()
        .filter(|(_, e)| e.v.contains(&v))
        .map(|(t, _)| dot(sol.gradients[t], normal).abs())
        .fold(0.0, f64::max)
}

/// `|∂_n u_h(x₀)| ≤ b(r0) + |k| + C·h`.
pub fn verify_normal_derivative(sol: &DiscreteSolution, pair: &BarrierPair, c: f64) -> NormalDerivativeReport {
    let frame = pair.graph.frame;
    let measured = measured_normal_derivative(sol, frame.x0, frame.normal);
    let bound = normal_derivative_bound(pair);
    let tol = c * sol.mesh.h;
    NormalDerivativeReport {
        measured,
        bound,
        tol,
        passed: measured <= bound + tol,
    }
}
