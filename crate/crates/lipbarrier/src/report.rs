//! Report records and their CSV/JSON writers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use lipbarrier_core::barrier::{BarrierPair, PdeReport, ProfileRow, StageCheck};
use lipbarrier_core::geometry::GeometryRow;
use lipbarrier_core::growth::GrowthReport;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRecord {
    pub name: String,
    pub class: String,
    pub delta: f64,
    pub liminf_estimate: f64,
    pub lambda0: f64,
    pub holds: bool,
    pub a1_holds: bool,
    pub c1: f64,
    pub c2: f64,
    pub relaxed_liminf_estimate: f64,
    pub relaxed_holds: bool,
    pub lambda0_suggested: Option<f64>,
    pub tail_lo: f64,
    pub tail_hi: f64,
    pub tail_points: usize,
    pub required: String,
    pub passed: bool,
}

impl GrowthRecord {
    pub fn new(r: &GrowthReport, tail: &[f64], required: String, passed: bool) -> Self {
        GrowthRecord {
            name: r.name.clone(),
            class: r.class.clone(),
            delta: r.delta,
            liminf_estimate: r.a2.liminf_estimate,
            lambda0: r.lambda0,
            holds: r.a2.holds,
            a1_holds: r.a1.holds,
            c1: r.a1.c1,
            c2: r.a1.c2,
            relaxed_liminf_estimate: r.a2_relaxed.liminf_estimate,
            relaxed_holds: r.a2_relaxed.holds,
            lambda0_suggested: r.a2.lambda0_suggested,
            tail_lo: tail[0],
            tail_hi: tail[tail.len() - 1],
            tail_points: tail.len(),
            required,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryRecord {
    pub x0_index: usize,
    pub x0_x: f64,
    pub x0_y: f64,
    pub r0: f64,
    #[serde(rename = "Mstar")]
    pub mstar: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "L_d")]
    pub l_d: f64,
    #[serde(rename = "N")]
    pub n: f64,
}

impl GeometryRecord {
    pub fn new(index: usize, g: &GeometryRow) -> Self {
        GeometryRecord {
            x0_index: index,
            x0_x: g.x0[0],
            x0_y: g.x0[1],
            r0: g.r0,
            mstar: g.mstar,
            l: g.l,
            l_d: g.l_d,
            n: g.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierRecord {
    pub x0_index: usize,
    pub x0_x: f64,
    pub x0_y: f64,
    pub q: f64,
    pub r0: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "Mstar")]
    pub mstar: f64,
    pub norm_1inf: f64,
    pub delta_max: f64,
    pub delta_ring: f64,
    pub r_max: f64,
    pub eta: f64,
    pub l_star: f64,
    pub l_d_star: f64,
    pub cstar: f64,
    pub target: f64,
    pub ring_integral: f64,
    pub gradient_bound: f64,
    pub normal_derivative_bound: f64,
    #[serde(rename = "L_min_observed")]
    pub l_min_observed: f64,
    pub bracket_failures: usize,
    pub pde_max_flux_residual: f64,
    pub pde_max_laplacian: f64,
    pub verified: bool,
    pub failed_stage: String,
}

impl BarrierRecord {
    pub fn new(index: usize, pair: &BarrierPair, pde: &PdeReport) -> Self {
        let c = &pair.constants;
        let failed = pair
            .stages
            .iter()
            .find(|s| !s.passed)
            .map(|s| s.stage.to_string())
            .or_else(|| (!pde.holds).then(|| "prototype_pde".to_string()))
            .unwrap_or_default();
        BarrierRecord {
            x0_index: index,
            x0_x: pair.x0()[0],
            x0_y: pair.x0()[1],
            q: pair.upper.proto.q(),
            r0: c.r0,
            k: c.k,
            m1: c.m1,
            m2: c.m2,
            m: c.m,
            mstar: c.mstar,
            norm_1inf: c.norm_1inf,
            delta_max: c.delta_max,
            delta_ring: pair.delta_ring,
            r_max: c.r_max,
            eta: pair.patch.eta,
            l_star: pair.patch.l_star,
            l_d_star: pair.patch.l_d_star,
            cstar: pair.cstar,
            target: pair.target,
            ring_integral: pair.ring_integral,
            gradient_bound: pair.gradient_bound,
            normal_derivative_bound: lipbarrier_core::barrier::normal_derivative_bound(pair),
            l_min_observed: pair.l_min_observed,
            bracket_failures: pair.bracket_failures,
            pde_max_flux_residual: pde.max_flux_residual,
            pde_max_laplacian: pde.max_laplacian,
            verified: pair.verified() && pde.holds,
            failed_stage: failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub passed: bool,
    pub worst_margin: f64,
    pub samples: usize,
    pub detail: String,
}

impl From<&StageCheck> for StageRecord {
    fn from(s: &StageCheck) -> Self {
        StageRecord {
            stage: s.stage.to_string(),
            passed: s.passed,
            worst_margin: s.worst_margin,
            samples: s.samples,
            detail: s.detail.clone(),
        }
    }
}

/// JSON entry of one boundary point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierEntry {
    #[serde(flatten)]
    pub record: BarrierRecord,
    pub geometry: GeometryRecord,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRecord {
    pub x0_index: usize,
    pub r: f64,
    pub b: f64,
    pub omega: f64,
    pub v_along_ray: f64,
}

impl ProfileRecord {
    pub fn new(index: usize, row: &ProfileRow) -> Self {
        ProfileRecord {
            x0_index: index,
            r: row.r,
            b: row.b,
            omega: row.omega,
            v_along_ray: row.v_along_ray,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexRecord {
    pub vertex_id: usize,
    pub x: f64,
    pub y: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementRecord {
    pub tri_id: usize,
    pub v0: usize,
    pub v1: usize,
    pub v2: usize,
    pub grad_norm: f64,
}

/// Outcome of one check in a run report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    /// `pass`, `fail` or `skipped`.
    pub status: String,
    pub value: Option<f64>,
    pub limit: Option<f64>,
    pub detail: String,
}

impl CheckRecord {
    pub fn skipped(detail: impl Into<String>) -> Self {
        CheckRecord {
            status: "skipped".into(),
            value: None,
            limit: None,
            detail: detail.into(),
        }
    }

    pub fn new(passed: bool, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        CheckRecord {
            status: if passed { "pass" } else { "fail" }.into(),
            value: Some(value),
            limit: Some(limit),
            detail: detail.into(),
        }
    }

    pub fn failed(&self) -> bool {
        self.status == "fail"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshSummary {
    pub vertices: usize,
    pub triangles: usize,
    pub boundary_vertices: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub lambda: f64,
    pub sup_grad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuStep {
    pub mu: f64,
    pub lambda_star: f64,
    pub energy: f64,
    pub rounds: usize,
    /// `W^{1,2}` distance to the previous `μ` solution.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub growth: String,
    pub seed: u64,
    pub lambda_star: f64,
    pub mu: f64,
    pub energy: f64,
    pub sup_u: f64,
    pub sup_grad: f64,
    pub iterations: usize,
    pub grad_inf: f64,
    pub boundary_trace_error: f64,
    pub restart_gap: Option<f64>,
    pub resolve_change: f64,
    pub rounds: Vec<RoundRecord>,
    pub mu_schedule: Vec<MuStep>,
    pub mu_warnings: Vec<String>,
    pub mesh: MeshSummary,
    pub checks: BTreeMap<String, CheckRecord>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageVerdict {
    /// `pass`, `fail`, `error` or `skipped`.
    pub status: String,
    pub exit_code: i32,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub passed: bool,
    pub exit_code: i32,
    pub status: String,
    pub stages: BTreeMap<String, StageVerdict>,
    pub checks: BTreeMap<String, CheckRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub stage: String,
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
}

/// Writes reports into one directory and remembers what was written.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(anyhow::anyhow!("cannot create {}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.root.join(name);
        let mut text = serde_json::to_string_pretty(value).map_err(CliError::io)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(anyhow::anyhow!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(anyhow::anyhow!("cannot write {}: {e}", path.display())))?;
        for row in rows {
            w.serialize(row).map_err(CliError::io)?;
        }
        w.flush().map_err(CliError::io)?;
        self.written.push(path);
        Ok(())
    }
}
