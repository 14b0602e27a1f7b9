use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn semilab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semilab"))
        .args(args)
        .env_remove("SEMILAB_WORKERS")
        .output()
        .unwrap()
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run_warped(dir: &Path) {
    let out = semilab(&["run", config("warped_goodness.toml").to_str().unwrap(), "-o", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn fresh_run_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    run_warped(&dir);
    for f in ["manifest.json", "config.toml", "family.json", "restriction_0.csv", "restriction_0.json", "restriction_0.svg"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let out = semilab(&["verify", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    assert!(text(&out).contains("PASS theorem verdicts (restriction_0)"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("restriction_0.json")).unwrap()).unwrap();
    assert_eq!(report["verdicts"]["sandwich"], serde_json::json!(true));
}

#[test]
fn manifest_traces_every_reported_number() {
    let tmp = tempfile::tempdir().unwrap();
    run_warped(tmp.path());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    let cfg = fs::read(tmp.path().join("config.toml")).unwrap();
    assert_eq!(m["config_sha256"].as_str().unwrap(), semilab::cli::run::sha256_hex(&cfg));
    assert!(m["versions"]["semilab"].is_string());
    assert!(m["timings"].as_array().unwrap().iter().any(|t| t["stage"] == "models"));
    let rows = m["provenance"].as_array().unwrap();
    for q in ["r_H[0]", "r_tube[0]", "d_R[0]", "d_A[0]", "beta[0]"] {
        let row = rows.iter().find(|r| r["quantity"] == q).unwrap_or_else(|| panic!("{q}"));
        assert_eq!(row["config"], "hypersurface[0]");
        assert!(!row["method"].as_str().unwrap().is_empty());
    }
}

#[test]
fn edited_norm_fails_naming_the_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    run_warped(tmp.path());
    let csv = tmp.path().join("restriction_0.csv");
    let mut lines: Vec<String> = fs::read_to_string(&csv).unwrap().lines().map(str::to_string).collect();
    let mut fields: Vec<String> = lines[3].split(',').map(str::to_string).collect();
    fields[1] = (fields[1].parse::<f64>().unwrap() + 8.0).to_string();
    lines[3] = fields.join(",");
    fs::write(&csv, lines.join("\n") + "\n").unwrap();
    let out = semilab(&["verify", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("FAIL norm monotonicity (restriction_0)"), "{}", text(&out));
}

#[test]
fn older_manifest_is_a_version_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    run_warped(tmp.path());
    let path = tmp.path().join("manifest.json");
    let body = fs::read_to_string(&path).unwrap().replace("\"manifest_version\": 1", "\"manifest_version\": 0");
    fs::write(&path, body).unwrap();
    let out = semilab(&["verify", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("version mismatch"), "{}", text(&out));
}

#[test]
fn malformed_configs_exit_two_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(config("warped_goodness.toml")).unwrap();
    let cases = [
        (base.replace("lambda = 1.0", "lamda = 1.0"), "unknown field `lamda`"),
        (base.replacen("tube_radius = 0.05", "tube_radius = \"wide\"", 1), "line 20"),
        (base.replace("\"2 + cos(y1)\"", "\"2 + cos(y1\""), "model.profile"),
        (base.replace("0.03, 0.025", "0.025, 0.03"), "strictly decreasing"),
        (base.replace("schema_version = 1", "schema_version = 0"), "schema_version 0"),
    ];
    for (i, (body, needle)) in cases.iter().enumerate() {
        let path = write(tmp.path(), &format!("bad{i}.toml"), body);
        let out = semilab(&["run", path.to_str().unwrap(), "-o", tmp.path().join("out").to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", text(&out));
        assert!(text(&out).contains(needle), "case {i}: {}", text(&out));
    }
}

#[test]
fn numerical_failure_names_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let body = fs::read_to_string(config("warped_goodness.toml")).unwrap().replace("\"2 + cos(y1)\"", "\"cos(y1)\"");
    let path = write(tmp.path(), "neg.toml", &body);
    let out = semilab(&["run", path.to_str().unwrap(), "-o", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out).contains("stage 'models'"), "{}", text(&out));
}

#[test]
fn floor_limited_runs_exit_zero_with_warnings() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
schema_version = 1
name = "harmonic_floor"

[model]
kind = "schrodinger"
potential = "y1^2"
energy = 1.0
domain = { kind = "interval", a = -4.0, b = 4.0 }

[h_grid]
values = ["1/21", "1/41", "1/81", "1/161"]

[support]
cell_size = 0.05

[[lacunarity]]
operator = "resolvent_ratio"
chi1 = { center = 3.0, plateau = 0.6, transition = 0.2 }
chi2 = { center = 3.0, plateau = 0.2, transition = 0.2 }
"#;
    let path = write(tmp.path(), "floor.toml", body);
    let dir = tmp.path().join("out");
    let out = semilab(&["run", path.to_str().unwrap(), "-o", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: microlocal.lacunarity: lacunarity[0] is floor-limited"));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["warnings"].as_array().unwrap().len(), 1);
    assert_eq!(semilab(&["verify", dir.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn bracket_config_writes_margin_and_tau() {
    let tmp = tempfile::tempdir().unwrap();
    let out = semilab(&["run", "bracket_circle", "-o", tmp.path().to_str().unwrap(), "--workers", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let tau: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("tau.json")).unwrap()).unwrap();
    assert!(tau["tau_y"].as_f64().unwrap() >= 0.05);
    let csv = fs::read_to_string(tmp.path().join("tau_trace.csv")).unwrap();
    assert!(csv.starts_with("tau,margin\n"));
    assert!(fs::read_to_string(tmp.path().join("bracket_samples.csv")).unwrap().starts_with("y1,y2,xi1,xi2,abs_p,bracket,projected\n"));
    assert_eq!(semilab(&["verify", tmp.path().to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn plot_rebuilds_svgs_from_csv() {
    let tmp = tempfile::tempdir().unwrap();
    run_warped(tmp.path());
    let svg = tmp.path().join("restriction_0.svg");
    let before = fs::read_to_string(&svg).unwrap();
    fs::remove_file(&svg).unwrap();
    let out = semilab(&["plot", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    assert_eq!(fs::read_to_string(&svg).unwrap(), before);
}

#[test]
fn list_models_and_worker_override() {
    let out = semilab(&["list-models"]);
    assert_eq!(out.status.code(), Some(0));
    let t = text(&out);
    assert!(t.contains("warped") && t.contains("bundled config: warped_goodness.toml"));
    let out = Command::new(env!("CARGO_BIN_EXE_semilab"))
        .args(["run", "warped_goodness"])
        .env("SEMILAB_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn worker_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = config("warped_goodness.toml");
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let out = semilab(&["run", cfg.to_str().unwrap(), "-o", dir.to_str().unwrap(), "--workers", workers]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["restriction_0.csv", "restriction_1.csv", "family_4.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn documented_example_config_parses() {
    let doc = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/config.md")).unwrap();
    let start = doc.find("```toml\n").unwrap() + 8;
    let end = start + doc[start..].find("```").unwrap();
    let cfg = semilab::cli::config::ExperimentConfig::from_toml(&doc[start..end]).unwrap();
    assert!(cfg.model.is_some() && cfg.carleman.is_some() && cfg.factorize.is_some());
    assert_eq!(cfg.lacunarity.len(), 2);
}
