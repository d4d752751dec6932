//! Minimization of the discrete energy `Σ_T |T| F_{λ,μ}(|∇u_T|)` over P1
//! functions with Dirichlet data, the `λ` fixed point and the `μ` sweep.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::BoundaryData;
use crate::growth::{make_regularized, GrowthFunction, RegularizedGrowth};
use crate::mesh::Mesh;
use crate::sparse::{pcg, Pattern};
use crate::{norm, Error, Result};

pub use crate::mesh::triangulate;

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Re-solve from a random start and require agreement to `10·tol`.
    pub uniqueness_check: bool,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 200,
            uniqueness_check: true,
            seed: 0,
        }
    }
}

/// A discrete minimizer with its diagnostics.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    /// Constant gradient on each element.
    pub gradients: Vec<[f64; 2]>,
    pub energy: f64,
    pub sup_u: f64,
    pub sup_grad: f64,
    pub boundary_trace_error: f64,
    pub iterations: usize,
    pub grad_inf: f64,
    /// Energy after each accepted step, starting with the initial guess.
    pub energy_history: Vec<f64>,
    /// Max-norm gap to the randomly initialized re-solve, when performed.
    pub restart_gap: Option<f64>,
}

impl DiscreteSolution {
    pub fn grad_norm(&self, element: usize) -> f64 {
        norm(self.gradients[element])
    }
}

struct Problem<'a> {
    rg: &'a RegularizedGrowth,
    mesh: &'a Mesh,
    pattern: Pattern,
    /// For each element, the 3×3 positions in the CSR value array.
    slots: Vec<[usize; 9]>,
    fixed: Vec<bool>,
}

impl<'a> Problem<'a> {
    fn new(rg: &'a RegularizedGrowth, mesh: &'a Mesh) -> Self {
        let pattern = Pattern::from_triangles(mesh.vertices.len(), &mesh.triangles);
        let slots = mesh
            .elements
            .iter()
            .map(|e| {
                let mut s = [0usize; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = pattern.position(e.v[a], e.v[b]);
                    }
                }
                s
            })
            .collect();
        let fixed = (0..mesh.vertices.len()).map(|v| mesh.is_boundary(v)).collect();
        Problem {
            rg,
            mesh,
            pattern,
            slots,
            fixed,
        }
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.mesh
            .elements
            .iter()
            .map(|e| e.area * self.rg.energy(norm(e.gradient(u))))
            .sum()
    }

    /// Gradient (zero at Dirichlet nodes) and, if requested, the Hessian.
    fn derivatives(&self, u: &[f64], grad: &mut [f64], hess: Option<&mut [f64]>) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut hess = hess;
        if let Some(h) = hess.as_deref_mut() {
            h.iter_mut().for_each(|v| *v = 0.0);
        }
        for (t, e) in self.mesh.elements.iter().enumerate() {
            let gu = e.gradient(u);
            let s = norm(gu);
            let coef = self.rg.coefficient(s);
            let proj: [f64; 3] = core::array::from_fn(|k| gu[0] * e.grad[k][0] + gu[1] * e.grad[k][1]);
            for k in 0..3 {
                grad[e.v[k]] += e.area * coef * proj[k];
            }
            if let Some(h) = hess.as_deref_mut() {
                let dcoef = if s > 1e-12 {
                    (self.rg.dflux(s) - coef) / (s * s)
                } else {
                    0.0
                };
                for a in 0..3 {
                    for b in 0..3 {
                        let gg = e.grad[a][0] * e.grad[b][0] + e.grad[a][1] * e.grad[b][1];
                        h[self.slots[t][3 * a + b]] += e.area * (coef * gg + dcoef * proj[a] * proj[b]);
                    }
                }
            }
        }
        for (v, &f) in self.fixed.iter().enumerate() {
            if f {
                grad[v] = 0.0;
            }
        }
        if let Some(h) = hess {
            // decouple Dirichlet rows and columns
            for i in 0..self.pattern.n() {
                for k in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                    let j = self.pattern.cols[k];
                    if self.fixed[i] || self.fixed[j] {
                        h[k] = if i == j { 1.0 } else { 0.0 };
                    }
                }
            }
        }
    }

    fn minimize(&self, mut u: Vec<f64>, opts: &SolverOptions) -> Result<(Vec<f64>, usize, f64, Vec<f64>)> {
        let n = u.len();
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; self.pattern.cols.len()];
        let mut energy = self.energy(&u);
        let mut history = vec![energy];
        for iter in 0..opts.max_iter {
            self.derivatives(&u, &mut grad, Some(&mut hess));
            let grad_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            let mut dir = vec![0.0; n];
            let newton_ok = pcg(&self.pattern, &hess, &rhs, &mut dir, 1e-10, 20 * n + 100).is_some();
            let descent: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
            let (dir, descent) = if newton_ok && descent < 0.0 {
                (dir, descent)
            } else {
                let gg: f64 = grad.iter().map(|g| g * g).sum();
                (rhs, -gg)
            };
            let step_inf = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            let newton = newton_ok && descent < 0.0;
            if grad_inf <= opts.tol * (1.0 + energy.abs()) && step_inf <= opts.tol {
                if newton {
                    for i in 0..n {
                        u[i] += dir[i];
                    }
                }
                return Ok((u, iter, grad_inf, history));
            }
            if descent == 0.0 {
                return Ok((u, iter, grad_inf, history));
            }
            // the decrease is below the roundoff of the summed energy, so
            // backtracking cannot see it; a Newton step here is safe
            if newton && -descent <= 1e3 * f64::EPSILON * (1.0 + energy.abs()) {
                for i in 0..n {
                    u[i] += dir[i];
                }
                energy = self.energy(&u);
                continue;
            }
            // Armijo backtracking with a roundoff allowance
            let slack = 4.0 * f64::EPSILON * energy.abs();
            let mut t = 1.0;
            let mut trial = u.clone();
            let mut accepted = false;
            for _ in 0..60 {
                for i in 0..n {
                    trial[i] = u[i] + t * dir[i];
                }
                let e_new = self.energy(&trial);
                if e_new.is_finite() && e_new <= energy + 1e-4 * t * descent + slack {
                    accepted = e_new < energy || t * step_inf <= opts.tol;
                    if accepted {
                        energy = e_new.min(energy);
                        core::mem::swap(&mut u, &mut trial);
                        history.push(energy);
                    }
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                if grad_inf <= opts.tol * (1.0 + energy.abs()) {
                    return Ok((u, iter, grad_inf, history));
                }
                return Err(Error::SolverFailure {
                    iteration: iter,
                    reason: format!("line search stalled (|grad|_inf = {grad_inf:.3e}, |step|_inf = {step_inf:.3e})"),
                });
            }
        }
        self.derivatives(&u, &mut grad, None);
        let residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        Err(Error::Budget {
            iterations: opts.max_iter,
            residual,
        })
    }
}

fn dirichlet_start(mesh: &Mesh, bd: &BoundaryData) -> Vec<f64> {
    mesh.vertices.iter().map(|&p| bd.value(p)).collect()
}

/// Minimizes the discrete energy with Dirichlet data `bd` at boundary vertices.
///
/// Damped Newton with Armijo backtracking; steepest descent replaces the
/// Newton direction when CG fails or the direction is not a descent one.
/// Requires `μ > 0`.
pub fn minimize_energy(rg: &RegularizedGrowth, mesh: Arc<Mesh>, bd: &BoundaryData, opts: &SolverOptions) -> Result<DiscreteSolution> {
    if !(rg.mu() > 0.0) {
        return Err(Error::param("mu", "the discrete energy needs mu > 0"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let problem = Problem::new(rg, &mesh);
    let start = dirichlet_start(&mesh, bd);
    let (values, iterations, grad_inf, history) = problem.minimize(start.clone(), opts)?;

    let restart_gap = if opts.uniqueness_check {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let amp = 1.0 + start.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let random: Vec<f64> = start
            .iter()
            .enumerate()
            .map(|(v, &x)| if mesh.is_boundary(v) { x } else { x + amp * rng.gen_range(-1.0..1.0) })
            .collect();
        let (other, _, _, _) = problem.minimize(random, opts)?;
        let gap = values.iter().zip(&other).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if gap > 10.0 * opts.tol {
            return Err(Error::VerificationFailed {
                stage: "uniqueness",
                detail: format!("random restart differs by {gap:.3e}"),
            });
        }
        Some(gap)
    } else {
        None
    };

    let energy = problem.energy(&values);
    if !energy.is_finite() {
        return Err(Error::SolverFailure {
            iteration: iterations,
            reason: "non-finite energy".into(),
        });
    }
    let gradients: Vec<[f64; 2]> = mesh.elements.iter().map(|e| e.gradient(&values)).collect();
    let sup_u = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup_grad = gradients.iter().fold(0.0f64, |m, g| m.max(norm(*g)));
    let boundary_trace_error = (0..values.len())
        .filter(|&v| mesh.is_boundary(v))
        .fold(0.0f64, |m, v| m.max((values[v] - start[v]).abs()));
    Ok(DiscreteSolution {
        mesh,
        values,
        gradients,
        energy,
        sup_u,
        sup_grad,
        boundary_trace_error,
        iterations,
        grad_inf,
        energy_history: history,
        restart_gap,
    })
}

/// Outcome of the `λ` iteration.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub lambda_star: f64,
    pub rounds: usize,
    /// `(λ_k, ‖∇u_{λ_k}‖_∞)` per round.
    pub history: Vec<(f64, f64)>,
    pub solution: DiscreteSolution,
    /// `max |u_{λ*} − u_{2λ*}|`.
    pub resolve_change: f64,
    pub resolve_consistent: bool,
}

/// Iterates `λ_{k+1} = max(2‖∇u_{λ_k}‖_∞, λ₀, 1.5 λ_k)` until `‖∇u_λ‖_∞ ≤ λ`,
/// then re-solves at `2λ*` to confirm the splice is inactive.
pub fn lambda_fixed_point(
    g: &GrowthFunction,
    mesh: Arc<Mesh>,
    bd: &BoundaryData,
    mu: f64,
    lambda_init: f64,
    max_rounds: usize,
    opts: &SolverOptions,
) -> Result<FixedPoint> {
    if lambda_init < g.lambda0() {
        return Err(Error::InvalidThreshold {
            lambda: lambda_init,
            reason: "initial threshold lies below λ₀",
        });
    }
    let mut lambda = lambda_init;
    let mut history = Vec::new();
    for round in 1..=max_rounds {
        let rg = make_regularized(g, lambda, mu)?;
        let sol = minimize_energy(&rg, mesh.clone(), bd, opts)?;
        history.push((lambda, sol.sup_grad));
        if sol.sup_grad <= lambda {
            let rg2 = make_regularized(g, 2.0 * lambda, mu)?;
            let sol2 = minimize_energy(&rg2, mesh.clone(), bd, opts)?;
            let change = sol.values.iter().zip(&sol2.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            return Ok(FixedPoint {
                lambda_star: lambda,
                rounds: round,
                history,
                solution: sol,
                resolve_change: change,
                resolve_consistent: change <= 10.0 * opts.tol,
            });
        }
        lambda = (2.0 * sol.sup_grad).max(g.lambda0()).max(1.5 * lambda);
    }
    Err(Error::VerificationFailed {
        stage: "fixed_point",
        detail: format!("no closure after {max_rounds} rounds (last λ = {lambda:.6e})"),
    })
}

/// Discrete `W^{1,2}` distance with the exact P1 mass matrix.
pub fn w12_distance(mesh: &Mesh, u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for e in &mesh.elements {
        let w: [f64; 3] = core::array::from_fn(|k| u[e.v[k]] - v[e.v[k]]);
        let sum = w[0] + w[1] + w[2];
        let sq = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
        acc += e.area / 12.0 * (sq + sum * sum);
        let mut g = [0.0, 0.0];
        for k in 0..3 {
            g[0] += w[k] * e.grad[k][0];
            g[1] += w[k] * e.grad[k][1];
        }
        acc += e.area * (g[0] * g[0] + g[1] * g[1]);
    }
    acc.sqrt()
}

/// Distances between consecutive `μ` solutions.
#[derive(Debug, Clone)]
pub struct MuSweep {
    pub mus: Vec<f64>,
    pub energies: Vec<f64>,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub cauchy_like: bool,
    pub warnings: Vec<alloc::string::String>,
}

/// Distances below this are solver noise and carry no ratio information.
pub const SWEEP_NOISE_FLOOR: f64 = 1e-9;

/// Solves for every `μ` (decreasing, positive) and checks that consecutive
/// `W^{1,2}` distances do not grow by more than 10%.
pub fn mu_sweep(g: &GrowthFunction, mesh: Arc<Mesh>, bd: &BoundaryData, lambda: f64, mus: &[f64], opts: &SolverOptions) -> Result<MuSweep> {
    if mus.is_empty() || mus.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::param("mus", "need a nonempty list of positive values"));
    }
    if mus.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::param("mus", "must be strictly decreasing"));
    }
    let mut sols = Vec::with_capacity(mus.len());
    let mut energies = Vec::with_capacity(mus.len());
    for &mu in mus {
        let rg = make_regularized(g, lambda, mu)?;
        let s = minimize_energy(&rg, mesh.clone(), bd, opts)?;
        energies.push(s.energy);
        sols.push(s.values);
    }
    let distances: Vec<f64> = sols.windows(2).map(|w| w12_distance(&mesh, &w[0], &w[1])).collect();
    let mut ratios = Vec::new();
    let mut warnings = Vec::new();
    let floor = SWEEP_NOISE_FLOOR.max(100.0 * opts.tol);
    for (i, w) in distances.windows(2).enumerate() {
        if w[0] <= floor || w[1] <= floor {
            continue;
        }
        let r = w[1] / w[0];
        ratios.push(r);
        if r > 1.1 {
            warnings.push(format!("distance grows between mu = {:.3e} and mu = {:.3e} (ratio {r:.3})", mus[i + 1], mus[i + 2]));
        }
    }
    Ok(MuSweep {
        mus: mus.to_vec(),
        energies,
        distances,
        cauchy_like: warnings.is_empty(),
        ratios,
        warnings,
    })
}
