//! The four subcommands. Each writes its reports into the output directory
//! and returns the exit status.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use lipbarrier_core::barrier::{
    barrier_profile, construct_barrier_pair, verify_prototype_pde, BarrierPair, PairOptions, PdeReport,
};
use lipbarrier_core::geometry::{geometry_row, BoundaryData, BoundaryPoint, ExteriorBallDomain};
use lipbarrier_core::growth::{growth_report, make_regularized, GrowthFunction, RegularizedGrowth};
use lipbarrier_core::mesh::Mesh;
use lipbarrier_core::solver::{lambda_fixed_point, triangulate, w12_distance, DiscreteSolution, FixedPoint, SolverOptions};
use lipbarrier_core::verify::{
    verify_gradient_principle, verify_max_principle, verify_normal_derivative, verify_sandwich, Slacks,
};

use crate::config::{ExperimentConfig, GrowthSpec, Hypothesis, X0Selector};
use crate::error::{CliError, ExitKind};
use crate::report::*;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "LIPBARRIER_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GrowthCheck,
    Barrier,
    Solve,
    VerifyAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GrowthCheck => "growth-check",
            Command::Barrier => "barrier",
            Command::Solve => "solve",
            Command::VerifyAll => "verify-all",
        }
    }
}

/// What a command did.
#[derive(Debug)]
pub struct Outcome {
    pub exit: ExitKind,
    pub summary: String,
    pub written: Vec<PathBuf>,
}

/// Worker cap from [`THREADS_ENV`]; `None` when unset.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::config(format!("{THREADS_ENV}: {e}"))),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

/// Loads the config, applies overrides and runs `cmd` on a capped pool.
///
/// Errors are reported into `error.json` when the output directory exists.
pub fn run(cmd: Command, config: &Path, out: Option<&Path>, seed: Option<u64>) -> Outcome {
    let setup = || -> Result<(ExperimentConfig, PathBuf, rayon::ThreadPool), CliError> {
        let threads = threads_from_env()?;
        let mut cfg = ExperimentConfig::load(config)?;
        if let Some(seed) = seed {
            cfg.solver.seed = seed;
        }
        let cfg = cfg.materialize()?;
        let out = out
            .map(Path::to_path_buf)
            .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("lipbarrier-out"));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or(0))
            .build()
            .map_err(CliError::io)?;
        Ok((cfg, out, pool))
    };
    let (cfg, out, pool) = match setup() {
        Ok(s) => s,
        Err(e) => return failure(e, None),
    };
    let mut dir = match OutputDir::create(&out) {
        Ok(d) => d,
        Err(e) => return failure(e, None),
    };
    let result = pool.install(|| {
        dir.json("config.json", &cfg)?;
        match cmd {
            Command::GrowthCheck => growth_check(&cfg, &mut dir).map(|s| (s.exit, s.summary)),
            Command::Barrier => barrier(&cfg, &mut dir).map(|s| (s.exit, s.summary)),
            Command::Solve => solve(&cfg, &mut dir).map(|s| (s.exit, s.summary)),
            Command::VerifyAll => verify_all(&cfg, &mut dir),
        }
    });
    match result {
        Ok((exit, summary)) => Outcome {
            exit,
            summary,
            written: dir.written().to_vec(),
        },
        Err(e) => failure(e, Some(dir)),
    }
}

fn failure(e: CliError, dir: Option<OutputDir>) -> Outcome {
    let mut written = Vec::new();
    if let Some(mut dir) = dir {
        let rec = error_record(&e);
        // best effort; the original error is what gets reported
        let _ = dir.json("error.json", &rec);
        written = dir.written().to_vec();
    }
    Outcome {
        exit: e.kind,
        summary: e.to_string(),
        written,
    }
}

fn error_record(e: &CliError) -> ErrorRecord {
    ErrorRecord {
        stage: e.stage.clone(),
        kind: e.kind.as_str().into(),
        exit_code: e.kind.code(),
        message: format!("{:#}", e.source),
    }
}

/// Result of one stage.
#[derive(Debug)]
pub struct StageOutcome<T> {
    pub exit: ExitKind,
    pub summary: String,
    pub data: T,
}

fn required_label(spec: &GrowthSpec) -> String {
    let mut req = spec.require.clone();
    req.sort_unstable();
    req.dedup();
    req.iter()
        .map(|h| match h {
            Hypothesis::A1 => "a1",
            Hypothesis::A2 => "a2",
            Hypothesis::A2Relaxed => "a2_relaxed",
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Hypothesis checks on every declared growth function.
pub fn growth_check(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Result<StageOutcome<Vec<GrowthRecord>>, CliError> {
    let records = cfg
        .growth
        .par_iter()
        .map(|spec| {
            let g = spec.build()?;
            let rep = growth_report(&g).map_err(|e| CliError::core("growth", e))?;
            let passed = spec.require.iter().all(|h| match h {
                Hypothesis::A1 => rep.a1.holds,
                Hypothesis::A2 => rep.a2.holds,
                Hypothesis::A2Relaxed => rep.a2_relaxed.holds,
            });
            Ok(GrowthRecord::new(&rep, &g.tail_grid(), required_label(spec), passed))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    dir.csv("growth_checks.csv", &records)?;
    dir.json("growth_checks.json", &records)?;
    let failed: Vec<&str> = records.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    let summary = if failed.is_empty() {
        format!("growth-check: {} function(s), all required hypotheses hold", records.len())
    } else {
        format!("growth-check: required hypotheses fail for {}", failed.join(", "))
    };
    Ok(StageOutcome {
        exit: if failed.is_empty() { ExitKind::Pass } else { ExitKind::Verification },
        summary,
        data: records,
    })
}

/// The growth entry used for barriers and solves, without the solvability
/// restriction.
fn barrier_growth(cfg: &ExperimentConfig) -> Result<GrowthFunction, CliError> {
    let spec = match &cfg.solver.growth {
        Some(name) => cfg.growth.iter().find(|g| &g.name == name),
        None => cfg.growth.first(),
    }
    .ok_or_else(|| CliError::config("no growth function declared"))?;
    spec.build()
}

fn initial_lambda(cfg: &ExperimentConfig, g: &GrowthFunction) -> f64 {
    cfg.solver.lambda_init.unwrap_or_else(|| g.lambda0().max(1.0))
}

fn resolve_x0(dom: &ExteriorBallDomain, sel: X0Selector) -> Result<BoundaryPoint, CliError> {
    match sel {
        X0Selector::Param(t) => dom.at_fraction(t).map_err(CliError::core_config),
        X0Selector::Point(p) => dom
            .locate(p, 1e-6 * dom.diameter())
            .map_err(|e| CliError::config(format!("x0 = ({}, {}) is not on the boundary: {e}", p[0], p[1]))),
    }
}

fn pair_options(cfg: &ExperimentConfig) -> PairOptions {
    PairOptions {
        interior_nx: cfg.barrier.interior_nx,
        interior_ny: cfg.barrier.interior_ny,
        boundary_points: cfg.barrier.boundary_points,
    }
}

/// One barrier pair per selected boundary point, with its PDE check.
fn build_pairs(
    cfg: &ExperimentConfig,
    rg: &RegularizedGrowth,
    dom: &ExteriorBallDomain,
    bd: &BoundaryData,
) -> Result<Vec<(BarrierPair, PdeReport)>, CliError> {
    let points = cfg
        .barrier
        .x0
        .iter()
        .map(|&sel| resolve_x0(dom, sel))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = pair_options(cfg);
    points
        .par_iter()
        .map(|&at| {
            let pair = construct_barrier_pair(rg, dom, bd, at, opts).map_err(|e| CliError::core("barrier", e))?;
            let proto = &pair.upper.proto;
            let (r0, r1) = (proto.r0(), pair.constants.r_max);
            let radii: Vec<f64> = (1..=64).map(|i| r0 + (r1 - r0) * i as f64 / 64.0).collect();
            let pde = verify_prototype_pde(proto, &radii).map_err(|e| CliError::core("barrier/prototype_pde", e))?;
            Ok((pair, pde))
        })
        .collect()
}

/// Barrier pairs at the selected boundary points.
pub fn barrier(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Result<StageOutcome<Vec<BarrierRecord>>, CliError> {
    let g = barrier_growth(cfg)?;
    let dom = cfg.domain.build()?;
    let bd = cfg.boundary()?;
    let lambda = initial_lambda(cfg, &g);
    let rg = make_regularized(&g, lambda, cfg.solver.mu_schedule[0]).map_err(CliError::core_config)?;
    let pairs = build_pairs(cfg, &rg, &dom, &bd)?;
    write_barrier_reports(cfg, &pairs, dir)
}

fn write_barrier_reports(
    cfg: &ExperimentConfig,
    pairs: &[(BarrierPair, PdeReport)],
    dir: &mut OutputDir,
) -> Result<StageOutcome<Vec<BarrierRecord>>, CliError> {
    let mut records = Vec::new();
    let mut entries = Vec::new();
    let mut geometry = Vec::new();
    let mut profile = Vec::new();
    for (i, (pair, pde)) in pairs.iter().enumerate() {
        let rec = BarrierRecord::new(i, pair, pde);
        let geo = GeometryRecord::new(i, &geometry_row(&pair.graph, pair.constants.mstar));
        entries.push(BarrierEntry {
            record: rec.clone(),
            geometry: geo.clone(),
            stages: pair.stages.iter().map(StageRecord::from).collect(),
        });
        records.push(rec);
        geometry.push(geo);
        let rows = barrier_profile(pair, cfg.barrier.profile_points).map_err(|e| CliError::core("barrier/profile", e))?;
        profile.extend(rows.iter().map(|r| ProfileRecord::new(i, r)));
    }
    dir.json("barrier_report.json", &entries)?;
    dir.csv("barrier_report.csv", &records)?;
    dir.csv("geometry.csv", &geometry)?;
    dir.csv("barrier_profile.csv", &profile)?;
    let failed: Vec<String> = records
        .iter()
        .filter(|r| !r.verified)
        .map(|r| format!("x0[{}] at {}", r.x0_index, r.failed_stage))
        .collect();
    let summary = if failed.is_empty() {
        let bound = records.iter().map(|r| r.gradient_bound).fold(0.0, f64::max);
        format!("barrier: {} pair(s) verified, gradient bound {bound:.6e}", records.len())
    } else {
        format!("barrier: verification failed for {}", failed.join(", "))
    };
    Ok(StageOutcome {
        exit: if failed.is_empty() { ExitKind::Pass } else { ExitKind::Verification },
        summary,
        data: records,
    })
}

/// Everything a solve produced.
#[derive(Debug)]
pub struct SolveData {
    pub report: RunReport,
    pub solution: Option<DiscreteSolution>,
    pub pairs: Vec<(BarrierPair, PdeReport)>,
}

/// Triangulates, closes the threshold for each `μ` and runs the enabled checks.
pub fn solve(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Result<StageOutcome<SolveData>, CliError> {
    let spec = cfg.solve_growth()?;
    let g = spec.build()?;
    let dom = cfg.domain.build()?;
    let bd = cfg.boundary()?;
    let mesh = Arc::new(triangulate(&dom, cfg.solver.h).map_err(|e| CliError::core("mesh", e))?);
    let opts = SolverOptions {
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        uniqueness_check: cfg.solver.uniqueness_check,
        seed: cfg.solver.seed,
    };
    let lambda_init = initial_lambda(cfg, &g);
    if lambda_init < g.lambda0() {
        return Err(CliError::config(format!(
            "solver.lambda_init = {lambda_init} lies below λ₀ = {}",
            g.lambda0()
        )));
    }
    let ver = cfg.verification;
    let slacks: Slacks = ver.slacks.into();
    let mut checks = BTreeMap::new();

    let runs: Vec<Result<FixedPoint, lipbarrier_core::Error>> = cfg
        .solver
        .mu_schedule
        .par_iter()
        .map(|&mu| lambda_fixed_point(&g, mesh.clone(), &bd, mu, lambda_init, cfg.solver.max_rounds, &opts))
        .collect();
    let mut steps = Vec::new();
    let mut fixed: Vec<FixedPoint> = Vec::new();
    let mut closure_failure = None;
    for (mu, run) in cfg.solver.mu_schedule.iter().zip(runs) {
        match run {
            Ok(fp) => {
                let distance = fixed.last().map(|prev| w12_distance(&mesh, &prev.solution.values, &fp.solution.values));
                steps.push(MuStep {
                    mu: *mu,
                    lambda_star: fp.lambda_star,
                    energy: fp.solution.energy,
                    rounds: fp.rounds,
                    distance,
                });
                fixed.push(fp);
            }
            Err(lipbarrier_core::Error::VerificationFailed { stage: "fixed_point", detail }) => {
                closure_failure = Some(format!("μ = {mu:e}: {detail}"));
                break;
            }
            Err(e) => return Err(CliError::core("solve", e)),
        }
    }
    let mut mu_warnings = Vec::new();
    let dists: Vec<f64> = steps.iter().filter_map(|s| s.distance).collect();
    for (i, w) in dists.windows(2).enumerate() {
        if w[1] > 1.1 * w[0] {
            mu_warnings.push(format!(
                "distance grows between μ = {:e} and μ = {:e}: {:.3e} -> {:.3e}",
                steps[i + 1].mu,
                steps[i + 2].mu,
                w[0],
                w[1]
            ));
        }
    }

    let mesh_summary = MeshSummary {
        vertices: mesh.vertices.len(),
        triangles: mesh.triangles.len(),
        boundary_vertices: mesh.boundary_count(),
        h: mesh.h,
    };
    let Some(fp) = fixed.pop().filter(|_| closure_failure.is_none()) else {
        let detail = closure_failure.unwrap_or_default();
        checks.insert("fixed_point".into(), CheckRecord::new(false, f64::NAN, f64::NAN, detail.clone()));
        let report = RunReport {
            growth: spec.name.clone(),
            seed: cfg.solver.seed,
            lambda_star: f64::NAN,
            mu: f64::NAN,
            energy: f64::NAN,
            sup_u: f64::NAN,
            sup_grad: f64::NAN,
            iterations: 0,
            grad_inf: f64::NAN,
            boundary_trace_error: f64::NAN,
            restart_gap: None,
            resolve_change: f64::NAN,
            rounds: Vec::new(),
            mu_schedule: steps,
            mu_warnings,
            mesh: mesh_summary,
            checks,
            passed: false,
        };
        dir.json("run_report.json", &report)?;
        return Ok(StageOutcome {
            exit: ExitKind::Verification,
            summary: format!("solve: threshold did not close ({detail})"),
            data: SolveData {
                report,
                solution: None,
                pairs: Vec::new(),
            },
        });
    };
    let sol = &fp.solution;
    let norms = bd.norms(&dom);

    if ver.fixed_point {
        let last = fp.history.last().map_or(f64::NAN, |h| h.1);
        checks.insert(
            "fixed_point".into(),
            CheckRecord::new(
                fp.resolve_consistent,
                fp.resolve_change,
                10.0 * opts.tol,
                format!(
                    "closed in {} round(s) with sup|∇u| = {last:.6e} ≤ λ* = {:.6e}; re-solve at 2λ* changes u by {:.3e}",
                    fp.rounds, fp.lambda_star, fp.resolve_change
                ),
            ),
        );
    } else {
        checks.insert("fixed_point".into(), CheckRecord::skipped("disabled"));
    }
    if let Some(gap) = sol.restart_gap {
        checks.insert(
            "uniqueness".into(),
            CheckRecord::new(gap <= 10.0 * opts.tol, gap, 10.0 * opts.tol, "random restart agreement in max norm"),
        );
    } else {
        checks.insert("uniqueness".into(), CheckRecord::skipped("disabled"));
    }
    if ver.max_principle {
        let r = verify_max_principle(sol, norms.sup, slacks.max_principle);
        checks.insert(
            "max_principle".into(),
            CheckRecord::new(
                r.passed,
                r.sup_u,
                r.sup_u0 + r.tol,
                format!("sup|u_h| = {:.6e}, sup|u0| = {:.6e}, tol = {:.3e}", r.sup_u, r.sup_u0, r.tol),
            ),
        );
    } else {
        checks.insert("max_principle".into(), CheckRecord::skipped("disabled"));
    }
    if ver.gradient_principle {
        let r = verify_gradient_principle(sol, slacks.gradient_principle);
        checks.insert(
            "gradient_principle".into(),
            CheckRecord::new(
                r.passed,
                r.interior_max,
                r.boundary_max + r.tol,
                format!(
                    "interior max {:.6e}, boundary-adjacent max {:.6e}, tol = {:.3e}",
                    r.interior_max, r.boundary_max, r.tol
                ),
            ),
        );
    } else {
        checks.insert("gradient_principle".into(), CheckRecord::skipped("disabled"));
    }

    let need_pairs = ver.sandwich || ver.normal_derivative;
    let pairs = if need_pairs {
        let rg = make_regularized(&g, fp.lambda_star, *cfg.solver.mu_schedule.last().unwrap())
            .map_err(|e| CliError::core("solve", e))?;
        build_pairs(cfg, &rg, &dom, &bd)?
    } else {
        Vec::new()
    };
    if ver.sandwich {
        let mut passed = true;
        let mut worst = f64::INFINITY;
        let mut tol = 0.0;
        let mut notes = Vec::new();
        for (i, (pair, pde)) in pairs.iter().enumerate() {
            if !(pair.verified() && pde.holds) {
                passed = false;
                notes.push(format!("x0[{i}]: barrier pair not verified"));
                continue;
            }
            let r = verify_sandwich(sol, pair, &bd, slacks.sandwich).map_err(|e| CliError::core("solve/sandwich", e))?;
            passed &= r.passed;
            worst = worst.min(r.upper_margin.min(r.lower_margin));
            tol = r.tol;
            let mut note = format!(
                "x0[{i}]: {} points, margins {:.3e}/{:.3e}, touching gap {:.3e}",
                r.points, r.upper_margin, r.lower_margin, r.touching_gap
            );
            if let (false, Some(w)) = (r.passed, r.witness) {
                note.push_str(&format!(", witness ({:.6}, {:.6})", w[0], w[1]));
            }
            notes.push(note);
        }
        checks.insert("sandwich".into(), CheckRecord::new(passed, worst, -tol, notes.join("; ")));
    } else {
        checks.insert("sandwich".into(), CheckRecord::skipped("disabled"));
    }
    if ver.normal_derivative {
        let mut passed = !pairs.is_empty();
        // the point with the least headroom
        let mut tightest = (f64::NAN, f64::NAN);
        let mut notes = Vec::new();
        for (i, (pair, _)) in pairs.iter().enumerate() {
            let r = verify_normal_derivative(sol, pair, slacks.normal_derivative);
            passed &= r.passed;
            let limit = r.bound + r.tol;
            if !(tightest.1 - tightest.0 <= limit - r.measured) {
                tightest = (r.measured, limit);
            }
            notes.push(format!("x0[{i}]: |∂n u_h| = {:.6e} ≤ {:.6e} + {:.3e}", r.measured, r.bound, r.tol));
        }
        checks.insert("normal_derivative".into(), CheckRecord::new(passed, tightest.0, tightest.1, notes.join("; ")));
    } else {
        checks.insert("normal_derivative".into(), CheckRecord::skipped("disabled"));
    }

    let vertices: Vec<VertexRecord> = mesh
        .vertices
        .iter()
        .zip(&sol.values)
        .enumerate()
        .map(|(i, (p, u))| VertexRecord {
            vertex_id: i,
            x: p[0],
            y: p[1],
            u: *u,
        })
        .collect();
    let elements: Vec<ElementRecord> = element_records(&mesh, sol);
    dir.csv("solution_vertices.csv", &vertices)?;
    dir.csv("solution_elements.csv", &elements)?;

    let passed = !checks.values().any(CheckRecord::failed);
    let report = RunReport {
        growth: spec.name.clone(),
        seed: cfg.solver.seed,
        lambda_star: fp.lambda_star,
        mu: *cfg.solver.mu_schedule.last().unwrap(),
        energy: sol.energy,
        sup_u: sol.sup_u,
        sup_grad: sol.sup_grad,
        iterations: sol.iterations,
        grad_inf: sol.grad_inf,
        boundary_trace_error: sol.boundary_trace_error,
        restart_gap: sol.restart_gap,
        resolve_change: fp.resolve_change,
        rounds: fp
            .history
            .iter()
            .map(|&(lambda, sup_grad)| RoundRecord { lambda, sup_grad })
            .collect(),
        mu_schedule: steps,
        mu_warnings,
        mesh: mesh_summary,
        checks,
        passed,
    };
    dir.json("run_report.json", &report)?;
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|(_, c)| c.failed())
        .map(|(k, _)| k.as_str())
        .collect();
    let summary = if failed.is_empty() {
        format!(
            "solve: λ* = {:.6e}, sup|∇u_h| = {:.6e}, all checks pass",
            report.lambda_star, report.sup_grad
        )
    } else {
        format!("solve: failed checks {}", failed.join(", "))
    };
    Ok(StageOutcome {
        exit: if passed { ExitKind::Pass } else { ExitKind::Verification },
        summary,
        data: SolveData {
            report,
            solution: Some(fp.solution),
            pairs,
        },
    })
}

fn element_records(mesh: &Mesh, sol: &DiscreteSolution) -> Vec<ElementRecord> {
    mesh.triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| ElementRecord {
            tri_id: t,
            v0: tri[0],
            v1: tri[1],
            v2: tri[2],
            grad_norm: sol.grad_norm(t),
        })
        .collect()
}

fn stage_verdict(exit: ExitKind, detail: String) -> StageVerdict {
    StageVerdict {
        status: if exit == ExitKind::Pass { "pass" } else { "fail" }.into(),
        exit_code: exit.code(),
        detail,
    }
}

fn skipped(reason: &str) -> StageVerdict {
    StageVerdict {
        status: "skipped".into(),
        exit_code: 0,
        detail: reason.into(),
    }
}

fn errored(e: &CliError) -> StageVerdict {
    StageVerdict {
        status: "error".into(),
        exit_code: e.kind.code(),
        detail: e.to_string(),
    }
}

const STAGES: [&str; 4] = ["growth", "barrier", "solve", "cross_check"];

/// Growth check, barrier, solve and the cross-check of the measured
/// gradients against the barrier bounds, with one verdict file.
#[allow(unused_assignments)]
pub fn verify_all(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Result<(ExitKind, String), CliError> {
    let mut stages: BTreeMap<String, StageVerdict> = BTreeMap::new();
    let mut checks = BTreeMap::new();
    let mut exit = ExitKind::Pass;
    let mut halted: Option<&str> = None;
    let mut summary = Vec::new();

    macro_rules! stage {
        ($name:expr, $body:expr) => {
            if let Some(at) = halted {
                stages.insert($name.into(), skipped(&format!("stage `{at}` did not pass")));
                None
            } else {
                match $body {
                    Ok(out) => {
                        let out: StageOutcome<_> = out;
                        stages.insert($name.into(), stage_verdict(out.exit, out.summary.clone()));
                        summary.push(out.summary.clone());
                        if out.exit != ExitKind::Pass {
                            exit = exit.max(out.exit);
                            halted = Some($name);
                        }
                        Some(out.data)
                    }
                    Err(e) => {
                        let e: CliError = e;
                        stages.insert($name.into(), errored(&e));
                        summary.push(e.to_string());
                        exit = exit.max(e.kind);
                        halted = Some($name);
                        None
                    }
                }
            }
        };
    }

    stage!(STAGES[0], growth_check(cfg, dir));
    let barriers = stage!(STAGES[1], barrier(cfg, dir));
    let solved = stage!(STAGES[2], solve(cfg, dir));
    if let Some(SolveData { report: run, .. }) = &solved {
        checks.extend(run.checks.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    let cross = stage!(
        STAGES[3],
        cross_check(cfg, barriers.as_deref().unwrap_or(&[]), solved.as_ref())
    );
    if let Some(c) = cross {
        checks.insert("gradient_bound".into(), c);
    }

    let verdict = Verdict {
        passed: exit == ExitKind::Pass,
        exit_code: exit.code(),
        status: exit.as_str().into(),
        stages,
        checks,
    };
    dir.json("verdict.json", &verdict)?;
    Ok((exit, summary.join("\n")))
}

fn cross_check(
    cfg: &ExperimentConfig,
    barriers: &[BarrierRecord],
    solved: Option<&SolveData>,
) -> Result<StageOutcome<CheckRecord>, CliError> {
    let Some(solved) = solved else {
        return Err(CliError::config("cross-check needs a solve"));
    };
    let h = solved.report.mesh.h;
    let bound = solved
        .pairs
        .iter()
        .map(|(p, _)| p.gradient_bound)
        .chain(barriers.iter().map(|b| b.gradient_bound))
        .fold(f64::NEG_INFINITY, f64::max);
    let k = solved
        .pairs
        .first()
        .map(|(p, _)| p.constants.k)
        .or_else(|| barriers.first().map(|b| b.k))
        .unwrap_or(0.0);
    if !bound.is_finite() {
        return Ok(StageOutcome {
            exit: ExitKind::Verification,
            summary: "cross-check: no barrier bound available".into(),
            data: CheckRecord::new(false, solved.report.sup_grad, f64::NAN, "no barrier bound"),
        });
    }
    let limit = bound + k + cfg.verification.slacks.gradient_bound * h;
    let measured = solved.report.sup_grad;
    let passed = measured <= limit;
    let detail = format!("sup|∇u_h| = {measured:.6e} ≤ gradient bound {bound:.6e} + K {k:.3e} + C·h");
    Ok(StageOutcome {
        exit: if passed { ExitKind::Pass } else { ExitKind::Verification },
        summary: format!("cross-check: {detail}: {}", if passed { "pass" } else { "fail" }),
        data: CheckRecord::new(passed, measured, limit, detail),
    })
}
