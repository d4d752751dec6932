use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use lipbarrier::ExperimentConfig;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

struct Run {
    code: i32,
    out: PathBuf,
    stderr: String,
    _tmp: tempfile::TempDir,
}

impl Run {
    fn json(&self, name: &str) -> Value {
        let text = fs::read_to_string(self.out.join(name)).unwrap_or_else(|e| panic!("{name}: {e}\n{}", self.stderr));
        serde_json::from_str(&text).unwrap()
    }

    fn csv(&self, name: &str) -> Vec<csv::StringRecord> {
        let mut r = csv::Reader::from_path(self.out.join(name)).unwrap();
        r.records().map(Result::unwrap).collect()
    }

    fn has(&self, name: &str) -> bool {
        self.out.join(name).exists()
    }
}

fn run_with(cmd: &str, config: &str, extra: &[&str], env: &[(&str, &str)]) -> Run {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("config.json");
    fs::write(&cfg, config).unwrap();
    let out = tmp.path().join("out");
    let mut c = Command::new(env!("CARGO_BIN_EXE_lipbarrier"));
    c.arg(cmd).arg("--config").arg(&cfg).arg("--out").arg(&out).args(extra);
    c.env_remove("LIPBARRIER_THREADS");
    for (k, v) in env {
        c.env(k, v);
    }
    let o = c.output().unwrap();
    Run {
        code: o.status.code().unwrap(),
        out,
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
        _tmp: tmp,
    }
}

fn run(cmd: &str, config: &str) -> Run {
    run_with(cmd, config, &[], &[])
}

fn flagship() -> String {
    fs::read_to_string(configs_dir().join("flagship.json")).unwrap()
}

#[test]
fn growth_check_cubic_power_holds() {
    let r = run("growth-check", r#"{"growth": [{"name": "p3", "kind": {"family": "power", "p": 3}}], "domain": {"shape": "disk", "radius": 1}}"#);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows = r.json("growth_checks.json");
    assert_eq!(rows[0]["name"], "p3");
    assert_eq!(rows[0]["holds"], true);
    assert!(rows[0]["liminf_estimate"].as_f64().unwrap() >= 2.0);
    assert_eq!(r.csv("growth_checks.csv").len(), 1);
}

#[test]
fn growth_check_prototype_required_a2_fails() {
    let r = run("growth-check", r#"{"growth": [{"name": "prototype", "require": ["a2"]}], "domain": {"shape": "disk", "radius": 1}}"#);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert_eq!(r.json("growth_checks.json")[0]["passed"], false);
}

#[test]
fn growth_check_prototype_not_required_passes() {
    let r = run("growth-check", r#"{"growth": [{"name": "prototype", "require": ["a1"]}], "domain": {"shape": "disk", "radius": 1}}"#);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json("growth_checks.json")[0]["holds"], false);
}

#[test]
fn empty_growth_list_is_an_empty_report() {
    let r = run("growth-check", r#"{"domain": {"shape": "disk", "radius": 1}}"#);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json("growth_checks.json"), Value::Array(vec![]));
}

#[test]
fn config_errors_exit_2() {
    for cfg in [
        r#"{"growth": [{"name": "no_such_growth"}], "domain": {"shape": "disk", "radius": 1}}"#,
        r#"{"growth": [], "domain": {"shape": "disk", "radius": 1}, "colour": "red"}"#,
        r#"{"domain": {"shape": "disk", "radius": -1}}"#,
        r#"{"domain": {"shape": "disk", "radius": 1}, "solver": {"mu_schedule": [1e-3, 1e-2]}}"#,
        r#"{"domain": {"shape": "disk", "radius": 1, "u0": {"kind": "constant", "value": 1}}, "u0": {"kind": "constant", "value": 2}}"#,
        "not json",
    ] {
        let r = run("growth-check", cfg);
        assert_eq!(r.code, 2, "{cfg}: {}", r.stderr);
    }
    let r = run("growth-check", &flagship().replace("power_p4", "power_p5"));
    assert_eq!(r.code, 2);
}

#[test]
fn bad_thread_cap_is_a_config_error() {
    let r = run_with("growth-check", r#"{"domain": {"shape": "disk", "radius": 1}}"#, &[], &[("LIPBARRIER_THREADS", "zero")]);
    assert_eq!(r.code, 2);
}

#[test]
fn solving_with_a_check_only_integrand_is_a_config_error() {
    let r = run("solve", &flagship().replace("power_p4", "eta_log2"));
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert_eq!(r.json("error.json")["kind"], "config_error");
}

#[test]
fn barrier_off_boundary_point_is_a_config_error() {
    let cfg = flagship().replace(r#"{ "param": 0.125 }"#, r#"{ "point": [0.5, 0.5] }"#);
    let r = run("barrier", &cfg);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let cfg = flagship().replace(r#"{ "param": 0.125 }"#, r#"{ "param": 1.5 }"#);
    assert_eq!(run("barrier", &cfg).code, 2);
}

#[test]
fn barrier_on_the_disk_with_zero_data() {
    let r = run(
        "barrier",
        r#"{"growth": [{"name": "power_p4"}], "domain": {"shape": "disk", "radius": 1, "r0": 0.5},
            "barrier": {"x0": [{"param": 0.0}, {"point": [0.0, 1.0]}]}}"#,
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows = r.json("barrier_report.json");
    assert_eq!(rows.as_array().unwrap().len(), 2);
    for row in rows.as_array().unwrap() {
        assert_eq!(row["verified"], true);
        assert_eq!(row["K"], 0.0);
        let (q, r0) = (row["q"].as_f64().unwrap(), row["r0"].as_f64().unwrap());
        let b_r0 = q / (r0 - q);
        assert!((row["gradient_bound"].as_f64().unwrap() / b_r0 - 1.0).abs() < 1e-9);
        assert!(row["stages"].as_array().unwrap().iter().all(|s| s["passed"] == true));
    }
    // x0 = (0, 1) is a quarter of the way round
    let y = rows[1]["x0_y"].as_f64().unwrap();
    assert!((y - 1.0).abs() < 1e-9);
    let profile = r.csv("barrier_profile.csv");
    assert_eq!(profile.len(), 2 * 65);
    assert_eq!(r.csv("geometry.csv").len(), 2);
}

#[test]
fn barrier_on_the_ellipse_emits_the_full_table() {
    let r = run_with("barrier", &fs::read_to_string(configs_dir().join("ellipse_trig.json")).unwrap(), &[], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows = r.json("barrier_report.json");
    for row in rows.as_array().unwrap() {
        for key in ["q", "r0", "K", "M1", "M2", "M", "Mstar", "delta_max", "delta_ring", "r_max", "eta", "gradient_bound", "L_min_observed"] {
            let v = row[key].as_f64().unwrap_or_else(|| panic!("{key} missing"));
            assert!(v.is_finite(), "{key} = {v}");
        }
        assert!(row["delta_ring"].as_f64() < row["delta_max"].as_f64());
        assert!(row["geometry"]["L"].as_f64().unwrap() > 0.0);
    }
    let header: Vec<String> = csv::Reader::from_path(r.out.join("barrier_report.csv"))
        .unwrap()
        .headers()
        .unwrap()
        .iter()
        .map(String::from)
        .collect();
    assert!(header.iter().any(|h| h == "Mstar") && header.iter().any(|h| h == "verified"));
}

#[test]
fn annulus_harmonic_solve_matches_the_logarithm() {
    let r = run("solve", &fs::read_to_string(configs_dir().join("annulus_harmonic.json")).unwrap());
    assert_eq!(r.code, 0, "{}", r.stderr);
    let mut err: f64 = 0.0;
    for row in r.csv("solution_vertices.csv") {
        let (x, y, u): (f64, f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap(), row[3].parse().unwrap());
        let rad = x.hypot(y).clamp(1.0, 2.0);
        err = err.max((u - rad.ln() / 2f64.ln()).abs());
    }
    assert!(err < 1e-2, "{err}");
    let rep = r.json("run_report.json");
    assert_eq!(rep["passed"], true);
    for key in ["max_principle", "gradient_principle", "sandwich", "fixed_point"] {
        assert_eq!(rep["checks"][key]["status"], "pass", "{key}");
    }
}

#[test]
fn affine_data_is_reproduced_exactly() {
    let r = run(
        "solve",
        r#"{"growth": [{"name": "power_p3"}], "domain": {"shape": "ellipse", "a": 1.5, "b": 1},
            "u0": {"kind": "affine", "k": [0.7, -0.4], "c": 0.2}, "solver": {"h": 0.15}}"#,
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    for row in r.csv("solution_vertices.csv") {
        let (x, y, u): (f64, f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap(), row[3].parse().unwrap());
        assert!((u - (0.7 * x - 0.4 * y + 0.2)).abs() <= 1e-7);
    }
    for row in r.csv("solution_elements.csv") {
        let g: f64 = row[4].parse().unwrap();
        assert!((g - 0.7f64.hypot(0.4)).abs() <= 1e-6);
    }
}

#[test]
fn unclosed_threshold_is_a_verification_failure() {
    // λ starts far below the trace gradient and gets one round only
    let r = run(
        "solve",
        r#"{"growth": [{"name": "power_p4"}], "domain": {"shape": "disk", "radius": 1},
            "u0": {"kind": "trig_trace", "amplitude": 1.0, "mode": 3},
            "solver": {"h": 0.4, "lambda_init": 0.2, "max_rounds": 1}}"#,
    );
    assert_eq!(r.code, 1, "{}", r.stderr);
    let rep = r.json("run_report.json");
    assert_eq!(rep["checks"]["fixed_point"]["status"], "fail");
    assert!(!r.has("solution_vertices.csv"));
}

#[test]
fn zero_gradient_slack_still_passes_on_a_coarse_mesh() {
    let r = run(
        "solve",
        r#"{"growth": [{"name": "power_p4"}], "domain": {"shape": "disk", "radius": 1},
            "u0": {"kind": "trig_trace", "amplitude": 1.0, "mode": 3},
            "solver": {"h": 0.5},
            "verification": {"sandwich": false, "normal_derivative": false,
                             "slacks": {"gradient_principle": 0.0, "max_principle": 0.0}}}"#,
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = r.json("run_report.json");
    assert_eq!(rep["checks"]["gradient_principle"]["status"], "pass");
    assert_eq!(rep["checks"]["sandwich"]["status"], "skipped");
}

#[test]
fn flagship_verify_all_is_green() {
    let r = run("verify-all", &flagship());
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json("verdict.json");
    assert_eq!(v["passed"], true);
    for stage in ["growth", "barrier", "solve", "cross_check"] {
        assert_eq!(v["stages"][stage]["status"], "pass", "{stage}");
    }
    for check in ["max_principle", "gradient_principle", "sandwich", "normal_derivative", "fixed_point", "gradient_bound"] {
        assert_eq!(v["checks"][check]["status"], "pass", "{check}");
    }
    let nd = &v["checks"]["normal_derivative"];
    assert!(nd["value"].as_f64().unwrap() <= nd["limit"].as_f64().unwrap());
    let cfg = r.json("config.json");
    assert_eq!(cfg["domain"]["r0"], 0.5);
    assert_eq!(cfg["boundary_data"]["radius"], 1.0);
}

#[test]
fn prototype_verify_all_stops_after_growth() {
    let cfg = flagship().replace(r#"{ "name": "power_p4" }"#, r#"{ "name": "prototype" }"#);
    let r = run("verify-all", &cfg);
    assert_eq!(r.code, 1, "{}", r.stderr);
    let v = r.json("verdict.json");
    assert_eq!(v["stages"]["growth"]["status"], "fail");
    for stage in ["barrier", "solve", "cross_check"] {
        assert_eq!(v["stages"][stage]["status"], "skipped", "{stage}");
    }
    assert!(r.has("growth_checks.csv"));
    assert!(!r.has("barrier_report.json"));
}

#[test]
fn affine_verify_all_is_green() {
    let r = run(
        "verify-all",
        r#"{"growth": [{"name": "power_p2"}], "domain": {"shape": "disk", "radius": 1},
            "u0": {"kind": "affine", "k": [0.5, 0.25]}, "solver": {"h": 0.2},
            "barrier": {"x0": [{"param": 0.0}, {"param": 0.5}]}}"#,
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json("verdict.json")["passed"], true);
}

fn file_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let cfg = fs::read_to_string(configs_dir().join("ellipse_trig.json")).unwrap();
    let a = run_with("verify-all", &cfg, &["--seed", "3"], &[("LIPBARRIER_THREADS", "1")]);
    let b = run_with("verify-all", &cfg, &["--seed", "3"], &[("LIPBARRIER_THREADS", "4")]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    let (fa, fb) = (file_bytes(&a.out), file_bytes(&b.out));
    assert_eq!(fa.len(), fb.len());
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs");
    }
    assert_eq!(a.json("config.json")["solver"]["seed"], 3);
}

#[test]
fn configs_round_trip() {
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
        let full = cfg.materialize().unwrap();
        assert_eq!(ExperimentConfig::from_json(&full.to_json()).unwrap(), full);
    }
}

#[test]
fn nested_u0_matches_top_level() {
    let nested = ExperimentConfig::from_json(
        r#"{"domain": {"shape": "ellipse", "a": 2.0, "b": 1.0, "u0": {"kind": "trig_trace", "amplitude": 0.3}}}"#,
    )
    .unwrap()
    .materialize()
    .unwrap();
    let top = ExperimentConfig::from_json(
        r#"{"domain": {"shape": "ellipse", "a": 2.0, "b": 1.0}, "u0": {"kind": "trig_trace", "amplitude": 0.3}}"#,
    )
    .unwrap()
    .materialize()
    .unwrap();
    assert_eq!(nested, top);
}
