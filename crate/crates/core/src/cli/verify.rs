//! `semilab verify`: re-checks invariants from the artifacts of a run.

use std::fs;
use std::path::Path;

use serde_json::Value;

use super::config::ExperimentConfig;
use super::plot::Table;
use super::run::{sha256_hex, Manifest, MANIFEST, MANIFEST_VERSION};
use super::CliError;
use crate::analysis::fit::{decay_rate_fit, loglog_slope};
use crate::analysis::{theorem_verdicts, RestrictionReport};

#[derive(Clone, Debug)]
pub struct Check {
    pub invariant: String,
    pub passed: bool,
    pub detail: String,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => close(a, b),
        (None, None) => true,
        _ => false,
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, invariant: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.0.push(Check {
            invariant: invariant.into(),
            passed,
            detail: detail.into(),
        });
    }
}

fn read_json(dir: &Path, name: &str) -> std::result::Result<Value, CliError> {
    let text = fs::read_to_string(dir.join(name)).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{name}: line {}, column {}: {e}", e.line(), e.column())))
}

fn table(dir: &Path, name: &str) -> std::result::Result<Table, CliError> {
    Table::read(&dir.join(name)).map_err(|e| CliError::Schema(format!("{name}: {e}")))
}

fn col(t: &Table, name: &str, file: &str) -> std::result::Result<Vec<Option<f64>>, CliError> {
    t.column(name).map_err(|e| CliError::Schema(format!("{file}: {e}")))
}

/// Reads `manifest.json`, rejecting other manifest versions explicitly.
pub fn read_manifest(dir: &Path) -> std::result::Result<Manifest, CliError> {
    let raw = read_json(dir, MANIFEST)?;
    let version = raw.get("manifest_version").and_then(Value::as_u64);
    if version != Some(u64::from(MANIFEST_VERSION)) {
        return Err(CliError::Schema(format!(
            "version mismatch: {MANIFEST} has manifest_version {}, this build reads version {MANIFEST_VERSION}",
            version.map(|v| v.to_string()).unwrap_or_else(|| "(missing)".into())
        )));
    }
    serde_json::from_value(raw).map_err(|e| CliError::Schema(format!("{MANIFEST}: {e}")))
}

pub fn verify_dir(dir: &Path) -> std::result::Result<Vec<Check>, CliError> {
    let manifest = read_manifest(dir)?;
    let mut checks = Checks(Vec::new());

    let mut broken = Vec::new();
    for a in &manifest.artifacts {
        match fs::read(dir.join(&a.file)) {
            Ok(bytes) if sha256_hex(&bytes) == a.sha256 => {}
            Ok(_) => broken.push(format!("{} (hash differs)", a.file)),
            Err(_) => broken.push(format!("{} (missing)", a.file)),
        }
    }
    checks.push(
        "artifact integrity",
        broken.is_empty(),
        if broken.is_empty() {
            format!("{} artifacts match their recorded hashes", manifest.artifacts.len())
        } else {
            broken.join(", ")
        },
    );

    let text = fs::read_to_string(dir.join(&manifest.config_file)).map_err(|e| CliError::Io(format!("{}: {e}", manifest.config_file)))?;
    checks.push(
        "config hash",
        sha256_hex(text.as_bytes()) == manifest.config_sha256,
        format!("sha256 {}", manifest.config_sha256),
    );
    let cfg = ExperimentConfig::from_toml(&text).map_err(|e| CliError::Schema(format!("{}: {e}", manifest.config_file)))?;

    if dir.join("family.json").exists() {
        family_checks(dir, &cfg, &mut checks)?;
    }
    restriction_checks(dir, cfg.hypersurface.len(), &mut checks)?;
    if dir.join("support.json").exists() {
        support_checks(dir, &mut checks)?;
    }
    if dir.join("lacunarity.json").exists() {
        lacunarity_checks(dir, &mut checks)?;
    }
    if dir.join("bracket.json").exists() {
        bracket_checks(dir, &mut checks)?;
    }
    if dir.join("tau.json").exists() {
        let tau = read_json(dir, "tau.json")?;
        let tau_y = tau["tau_y"].as_f64();
        let ok = tau["trace"]
            .as_array()
            .map(|t| {
                t.iter()
                    .any(|p| p[0].as_f64() == tau_y && p[1].as_f64().map(|m| m > 0.0).unwrap_or(false))
            })
            .unwrap_or(false);
        checks.push("tau admissibility", ok, format!("tau_Y = {tau_y:?} has a positive recorded margin"));
    }
    if dir.join("sigma.json").exists() {
        let t = table(dir, "sigma.csv")?;
        let h = col(&t, "h", "sigma.csv")?;
        let s = col(&t, "sigma_min", "sigma.csv")?;
        let xs: Vec<f64> = h.iter().map(|v| v.unwrap_or(f64::NAN).ln()).collect();
        let ys: Vec<f64> = s.iter().map(|v| v.unwrap_or(f64::NAN).ln()).collect();
        let refit = loglog_slope(&xs, &ys).ok();
        let stored = read_json(dir, "sigma.json")?["slope"].as_f64();
        checks.push("sigma slope refit", close_opt(refit, stored), format!("refit {refit:?}, stored {stored:?}"));
    }
    if dir.join("factorize.json").exists() {
        factorize_checks(dir, &mut checks)?;
    }
    Ok(checks.0)
}

fn family_checks(dir: &Path, cfg: &ExperimentConfig, checks: &mut Checks) -> std::result::Result<(), CliError> {
    let fam = read_json(dir, "family.json")?;
    let entries = fam["entries"].as_array().cloned().unwrap_or_default();
    let norm_bad: Vec<String> = entries
        .iter()
        .filter(|e| !e["weighted_norm_sq"].as_f64().map(|n| (n - 1.0).abs() < 1e-8).unwrap_or(false))
        .map(|e| format!("h = {}", e["h"]))
        .collect();
    checks.push("unit normalization", norm_bad.is_empty(), if norm_bad.is_empty() { format!("{} entries", entries.len()) } else { norm_bad.join(", ") });
    let tol = cfg.tolerances.max_residual;
    let res_bad: Vec<String> = entries
        .iter()
        .filter(|e| !e["residual"].as_f64().map(|r| r <= tol).unwrap_or(false))
        .map(|e| format!("h = {}: {}", e["h"], e["residual"]))
        .collect();
    checks.push("solver residual", res_bad.is_empty(), if res_bad.is_empty() { format!("all at most {tol:e}") } else { res_bad.join(", ") });
    let finite_bad: Vec<String> = (0..entries.len())
        .filter_map(|i| {
            let name = format!("family_{i}.csv");
            match Table::read(&dir.join(&name)) {
                Ok(t) => t.rows.iter().any(|r| r[..3].iter().any(|v| !v.map(f64::is_finite).unwrap_or(false))).then_some(name),
                Err(_) => Some(name),
            }
        })
        .collect();
    checks.push("finite samples", finite_bad.is_empty(), if finite_bad.is_empty() { "all entry tables".to_string() } else { finite_bad.join(", ") });
    Ok(())
}

fn restriction_checks(dir: &Path, count: usize, checks: &mut Checks) -> std::result::Result<(), CliError> {
    let mut rates: Vec<(f64, f64, f64)> = Vec::new();
    for i in 0..count {
        let name = format!("restriction_{i}");
        let json = read_json(dir, &format!("{name}.json"))?;
        let mut report: RestrictionReport<f64> =
            serde_json::from_value(json).map_err(|e| CliError::Schema(format!("{name}.json: {e}")))?;
        let t = table(dir, &format!("{name}.csv"))?;
        let h: Vec<f64> = col(&t, "h", &format!("{name}.csv"))?.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let log_h = col(&t, "log_restriction", &format!("{name}.csv"))?;
        let log_tube = col(&t, "log_tube", &format!("{name}.csv"))?;

        // Deep in the forbidden region the norms must fall as h decreases.
        if report.d_a > 0.0 {
            let rising: Vec<String> = h
                .windows(2)
                .zip(log_h.windows(2))
                .filter_map(|(hw, lw)| match (lw[0], lw[1]) {
                    (Some(a), Some(b)) if b >= a => Some(format!("log N rises from {a} at h = {} to {b} at h = {}", hw[0], hw[1])),
                    _ => None,
                })
                .collect();
            checks.push(
                format!("norm monotonicity ({name})"),
                rising.is_empty(),
                if rising.is_empty() { "log N(h) decreases with h".to_string() } else { rising.join("; ") },
            );
        }

        let refit_h = decay_rate_fit(&h, &log_h, None).ok();
        let refit_tube = decay_rate_fit(&h, &log_tube, None).ok();
        let stored_h = report.r_h.as_ref().map(|f| f.rate);
        let stored_tube = report.r_tube.as_ref().map(|f| f.rate);
        let ok = close_opt(refit_h.as_ref().map(|f| f.rate), stored_h) && close_opt(refit_tube.as_ref().map(|f| f.rate), stored_tube);
        checks.push(
            format!("rate refit ({name})"),
            ok,
            format!(
                "r_H refit {:?} stored {stored_h:?}; r_tube refit {:?} stored {stored_tube:?}",
                refit_h.as_ref().map(|f| f.rate),
                refit_tube.as_ref().map(|f| f.rate)
            ),
        );

        checks.push(
            format!("metric comparison ({name})"),
            report.d_a <= report.beta * report.d_r + report.eps_margin + 1e-9,
            format!("d_A = {} vs beta d_R + eps = {}", report.d_a, report.beta * report.d_r + report.eps_margin),
        );

        let stored = report.verdicts.clone();
        report.r_h = refit_h;
        report.r_tube = refit_tube;
        let recomputed = theorem_verdicts(&report, report.eps_margin).ok();
        checks.push(
            format!("theorem verdicts ({name})"),
            stored == recomputed,
            format!("stored {stored:?}, recomputed {recomputed:?}"),
        );
        if let Some(f) = &report.r_h {
            rates.push((report.d_a, f.rate, f.stderr));
        }
    }
    if rates.len() > 1 {
        rates.sort_by(|a, b| a.0.total_cmp(&b.0));
        let bad: Vec<String> = rates
            .windows(2)
            .filter(|w| w[1].1 + 2.0 * (w[0].2 + w[1].2) < w[0].1)
            .map(|w| format!("r_H {} at d_A {} below r_H {} at d_A {}", w[1].1, w[1].0, w[0].1, w[0].0))
            .collect();
        checks.push(
            "rate monotonicity",
            bad.is_empty(),
            if bad.is_empty() { "r_H grows with d_A".to_string() } else { bad.join("; ") },
        );
    }
    Ok(())
}

fn support_checks(dir: &Path, checks: &mut Checks) -> std::result::Result<(), CliError> {
    let json = read_json(dir, "support.json")?;
    let t = table(dir, "support.csv")?;
    let rates = col(&t, "rate", "support.csv")?;
    let cells = json["cells"].as_array().cloned().unwrap_or_default();
    let same = cells.len() == rates.len() && cells.iter().zip(&rates).all(|(c, r)| close_opt(c["rate"].as_f64(), *r));
    checks.push("support table consistency", same, format!("{} cells", cells.len()));
    let inclusion = json["inclusion"].as_bool();
    checks.push(
        "support inclusion",
        inclusion != Some(false),
        format!("K_hat within the dilated allowed region: {inclusion:?}"),
    );
    Ok(())
}

fn lacunarity_checks(dir: &Path, checks: &mut Checks) -> std::result::Result<(), CliError> {
    let json = read_json(dir, "lacunarity.json")?;
    for (i, f) in json.as_array().cloned().unwrap_or_default().iter().enumerate() {
        let h: Vec<f64> = f["h"].as_array().map(|a| a.iter().filter_map(Value::as_f64).collect()).unwrap_or_default();
        let logs: Vec<Option<f64>> = f["log_norms"].as_array().map(|a| a.iter().map(Value::as_f64).collect()).unwrap_or_default();
        let usable = logs.iter().filter(|v| v.is_some()).count();
        let refit = if usable >= 3 { decay_rate_fit(&h, &logs, None).ok().map(|r| r.rate) } else { None };
        let stored = f["rate"].as_f64();
        checks.push(format!("lacunarity refit ({i})"), close_opt(refit, stored), format!("refit {refit:?}, stored {stored:?}"));
    }
    Ok(())
}

fn bracket_checks(dir: &Path, checks: &mut Checks) -> std::result::Result<(), CliError> {
    let json = read_json(dir, "bracket.json")?;
    let t = table(dir, "bracket_samples.csv")?;
    let bracket = col(&t, "bracket", "bracket_samples.csv")?;
    let projected = col(&t, "projected", "bracket_samples.csv")?;
    let min = bracket
        .iter()
        .zip(&projected)
        .filter(|(_, p)| **p == Some(1.0))
        .filter_map(|(b, _)| *b)
        .fold(None, |m: Option<f64>, b| Some(m.map_or(b, |m| m.min(b))));
    let stored = json["margin"].as_f64();
    checks.push("bracket margin", close_opt(min, stored), format!("min over samples {min:?}, stored {stored:?}"));
    Ok(())
}

fn factorize_checks(dir: &Path, checks: &mut Checks) -> std::result::Result<(), CliError> {
    let json = read_json(dir, "factorize.json")?;
    let t = table(dir, "residual.csv")?;
    let k = col(&t, "truncation", "residual.csv")?;
    let h = col(&t, "h", "residual.csv")?;
    let r = col(&t, "residual", "residual.csv")?;
    let fl = col(&t, "floor", "residual.csv")?;
    for fit in json["fits"].as_array().cloned().unwrap_or_default() {
        let trunc = fit["truncation"].as_f64();
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..k.len())
            .filter(|&i| k[i] == trunc)
            .filter_map(|i| match (h[i], r[i], fl[i]) {
                (Some(h), Some(r), Some(f)) if r > f => Some((h.ln(), r.ln())),
                _ => None,
            })
            .unzip();
        let refit: Option<f64> = if xs.len() >= 2 { loglog_slope(&xs, &ys).ok() } else { None };
        let stored = fit["slope"].as_f64();
        checks.push(
            format!("residual slope refit (K = {})", trunc.unwrap_or(f64::NAN)),
            close_opt(refit, stored),
            format!("refit {refit:?}, stored {stored:?}"),
        );
    }
    Ok(())
}

/// Runs [`verify_dir`] and converts failed invariants into an error naming them.
pub fn verify(dir: &Path) -> std::result::Result<Vec<Check>, CliError> {
    let checks = verify_dir(dir)?;
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.invariant, c.detail)).collect();
    if failed.is_empty() {
        Ok(checks)
    } else {
        Err(CliError::Verify { checks, failed })
    }
}
