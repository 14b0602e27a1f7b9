//! `semilab run`: executes the pipelines of a config and writes artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::config::*;
use super::plot;
use super::CliError;
use crate::analysis::{restriction_report, HypersurfaceSpec, Orientation};
use crate::carleman::{
    bracket_margin, discrete_carleman_sigma_min, max_tau_estimate, CarlemanWeight, GeodesicSphereModel, Rho, ScanSpec,
    SigmaGrid, WeightFamily,
};
use crate::error::{Error, Result};
use crate::factorize::{factor_symbols, plateau_cutoff, residual_order_fit, PeriodicDomain, TestFunctionPool};
use crate::microlocal::{
    arc_cutoff, defect_mass, lacunarity_fit, support_estimate, LacunaryOperator, RateTolerance, SupportEstimate,
};
use crate::models::*;
use crate::phase_symbols::{Expr, ExprField, FieldRef, PhaseGrid, SymbolExpansion};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Where a reported quantity came from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProvenanceRow {
    pub quantity: String,
    pub value: serde_json::Value,
    pub artifact: String,
    pub stage: String,
    pub config: String,
    pub method: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub name: String,
    pub config_file: String,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub scalar: String,
    pub versions: BTreeMap<String, String>,
    pub timings: Vec<Timing>,
    pub artifacts: Vec<ArtifactRecord>,
    pub provenance: Vec<ProvenanceRow>,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("semilab".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("config_schema".to_string(), SCHEMA_VERSION.to_string()),
        ("manifest".to_string(), MANIFEST_VERSION.to_string()),
        ("rng".to_string(), "ChaCha8 (rand_chacha 0.3)".to_string()),
    ])
}

struct Writer {
    dir: PathBuf,
    records: Vec<ArtifactRecord>,
}

impl Writer {
    fn put(&mut self, name: &str, contents: &str) -> std::result::Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.records.retain(|r| r.file != name);
        self.records.push(ArtifactRecord {
            file: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len(),
        });
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> std::result::Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        self.put(name, &(text + "\n"))
    }
}

struct Ledger {
    timings: Vec<Timing>,
    provenance: Vec<ProvenanceRow>,
    warnings: Vec<String>,
}

impl Ledger {
    fn stage<R>(&mut self, stage: &str, f: impl FnOnce() -> Result<R>) -> std::result::Result<R, CliError> {
        let start = Instant::now();
        let out = f().map_err(|e| CliError::stage(stage, e));
        self.timings.push(Timing {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    fn cite(&mut self, quantity: impl Into<String>, value: serde_json::Value, artifact: &str, stage: &str, config: &str, method: &str) {
        self.provenance.push(ProvenanceRow {
            quantity: quantity.into(),
            value,
            artifact: artifact.to_string(),
            stage: stage.to_string(),
            config: config.to_string(),
            method: method.to_string(),
        });
    }

    fn warn(&mut self, message: String) {
        self.warnings.push(message);
    }
}

pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

fn domain(block: &DomainBlock, field: &str) -> Result<Domain1D<f64>> {
    Ok(match block {
        DomainBlock::Circle { start, length } => Domain1D::Circle {
            start: start.value(&format!("{field}.start"))?,
            length: length.value(&format!("{field}.length"))?,
        },
        DomainBlock::Interval { a, b } => Domain1D::Interval {
            a: a.value(&format!("{field}.a"))?,
            b: b.value(&format!("{field}.b"))?,
        },
    })
}

fn solver_options(parity: &Option<ParityBlock>, points_per_h: Option<f64>, seed: u64) -> Result<SolverOptions<f64>> {
    Ok(SolverOptions {
        points_per_h,
        seed,
        parity: match parity {
            Some(p) => Some(Parity {
                center: p.center.value("model.parity.center")?,
                even: p.even,
            }),
            None => None,
        },
        ..SolverOptions::default()
    })
}

fn build_family(model: &ModelBlock, hs: &[f64], seed: u64) -> Result<EigenfunctionFamily<f64>> {
    match model {
        ModelBlock::Warped {
            profile,
            lambda,
            energy,
            domain: d,
            parity,
            points_per_h,
        } => {
            let profile = Curve::from_expr(Expr::parse(profile)?)?;
            let wp = WarpedProduct::new(profile, *lambda, domain(d, "model.domain")?, hs.to_vec())?;
            warped_eigenfamily(&wp, *energy, &solver_options(parity, *points_per_h, seed)?)
        }
        ModelBlock::Schrodinger {
            potential,
            energy,
            domain: d,
            parity,
            points_per_h,
        } => {
            let potential = Curve::from_expr(Expr::parse(potential)?)?;
            let prob = SchrodingerProblem1D::new(domain(d, "model.domain")?, potential, *energy, hs.to_vec())?;
            schrodinger_family(&prob, &solver_options(parity, *points_per_h, seed)?)
        }
        ModelBlock::Torus { momentum } => torus_family(*momentum, hs),
    }
}

/// Reads, validates and runs a config file. `out` overrides the config's
/// output directory.
pub fn run_file(path: &Path, out: Option<&Path>, workers: Option<usize>) -> std::result::Result<RunOutcome, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let cfg = ExperimentConfig::from_toml(&text).map_err(|e| CliError::Schema(format!("{}: {}", path.display(), strip(e))))?;
    let dir = match (out, &cfg.output) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => PathBuf::from(o),
        (None, None) => PathBuf::from("runs").join(&cfg.name),
    };
    let workers = workers
        .or(cfg.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    pool.install(|| run_config(&cfg, &text, &dir, workers))
}

fn strip(e: Error) -> String {
    super::config::inner(e)
}

pub fn run_config(cfg: &ExperimentConfig, text: &str, dir: &Path, workers: usize) -> std::result::Result<RunOutcome, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut w = Writer {
        dir: dir.to_path_buf(),
        records: Vec::new(),
    };
    let mut led = Ledger {
        timings: Vec::new(),
        provenance: Vec::new(),
        warnings: Vec::new(),
    };
    w.put("config.toml", text)?;

    if let Some(model) = &cfg.model {
        run_family(cfg, model, &mut w, &mut led)?;
    }
    if let Some(c) = &cfg.carleman {
        run_carleman(cfg, c, &mut w, &mut led)?;
    }
    if let Some(f) = &cfg.factorize {
        run_factorize(cfg, f, &mut w, &mut led)?;
    }
    let plots = led.stage("plots", || plot::plots_for_dir(dir))?;
    for (name, svg) in plots {
        w.put(&name, &svg)?;
    }

    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        name: cfg.name.clone(),
        config_file: "config.toml".into(),
        config_sha256: sha256_hex(text.as_bytes()),
        seed: cfg.seed,
        workers,
        scalar: "f64".into(),
        versions: versions(),
        timings: led.timings,
        artifacts: w.records,
        provenance: led.provenance,
        warnings: led.warnings,
    };
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    fs::write(dir.join(MANIFEST), body).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        manifest,
    })
}

fn run_family(cfg: &ExperimentConfig, model: &ModelBlock, w: &mut Writer, led: &mut Ledger) -> std::result::Result<(), CliError> {
    let hs = cfg
        .h_grid
        .as_ref()
        .ok_or_else(|| CliError::Schema("h_grid: required with a model block".into()))?
        .resolve()
        .map_err(|e| CliError::Schema(strip(e)))?;
    let fam = led.stage("models", || build_family(model, &hs, cfg.seed))?;
    w.json("family.json", &fam.summary_json())?;
    for i in 0..fam.entries.len() {
        w.put(&format!("family_{i}.csv"), &fam.entry_csv(i))?;
    }
    for e in &fam.entries {
        if let Some(n) = &e.notice {
            led.warn(format!("models: h = {}: {n}", e.h));
        }
        if e.residual > cfg.tolerances.max_residual {
            led.warn(format!("models: h = {}: residual {:.3e} above tolerance", e.h, e.residual));
        }
    }

    let support = match &cfg.support {
        Some(s) => {
            let cell = s.cell_size.value("support.cell_size").map_err(|e| CliError::Schema(strip(e)))?;
            let tol = s.tolerance.unwrap_or_else(RateTolerance::default_auto);
            let est = led.stage("microlocal.support", || support_estimate(&fam, cell, tol))?;
            w.json("support.json", &serde_json::to_value(&est).unwrap_or_default())?;
            w.put("support.csv", &est.to_csv())?;
            led.cite("K_hat", json!(est.k_hat), "support.json", "microlocal.support", "support", "cells with fitted decay rate at most the tolerance");
            if est.inclusion == Some(false) {
                led.warn("microlocal.support: K_hat leaves the dilated allowed region".into());
            }
            Some(est)
        }
        None => None,
    };

    if !cfg.symbol.is_empty() {
        let probes = led.stage("microlocal.defect", || {
            cfg.symbol
                .iter()
                .map(|s| {
                    let a = SymbolExpansion::from_exprs(0, 1, vec![Expr::parse(&s.expr)?])?;
                    let p = defect_mass(&fam, &a)?;
                    Ok(json!({ "name": s.name, "expr": s.expr, "probe": p }))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (i, p) in probes.iter().enumerate() {
            if p["probe"]["nonconvergent"] == json!(true) {
                led.warn(format!("microlocal.defect: symbol[{i}] pairings do not settle"));
            }
            led.cite(format!("mu({})", cfg.symbol[i].name), p["probe"]["limit"].clone(), "defect.json", "microlocal.defect", &format!("symbol[{i}]"), "linear extrapolation of <Op_h(a) u, u> to h = 0");
        }
        w.json("defect.json", &json!(probes))?;
    }

    if !cfg.lacunarity.is_empty() {
        let k_hat = support.as_ref().ok_or_else(|| CliError::Schema("support: required by lacunarity blocks".into()))?;
        let fits = led.stage("microlocal.lacunarity", || lacunarity(cfg, &fam, k_hat))?;
        for (i, f) in fits.iter().enumerate() {
            if f.floor_limited {
                led.warn(format!(
                    "microlocal.lacunarity: lacunarity[{i}] is floor-limited (observed exponent {:.4})",
                    f.observed_exponent
                ));
            }
            led.cite(format!("C[{i}]"), json!(f.rate), "lacunarity.json", "microlocal.lacunarity", &format!("lacunarity[{i}]"), "weighted LSQ of -h log |chi2 Q chi1 u| = C + c h");
        }
        w.json("lacunarity.json", &serde_json::to_value(&fits).unwrap_or_default())?;
    }

    for (i, hb) in cfg.hypersurface.iter().enumerate() {
        let stage = &format!("analysis.restriction[{i}]");
        let tag = format!("hypersurface[{i}]");
        let x0 = hb.x0.value(&format!("{tag}.x0")).map_err(|e| CliError::Schema(strip(e)))?;
        let spec = HypersurfaceSpec {
            x0,
            orientation: Orientation::Increasing,
            sub_arc: hb.sub_arc,
        };
        let to = hb.distance_to.unwrap_or(if support.is_some() {
            DistanceTo::Estimated
        } else {
            DistanceTo::TurningPoints
        });
        let k_hat = match to {
            DistanceTo::Estimated => support.as_ref(),
            DistanceTo::TurningPoints => None,
        };
        let report = led.stage(stage, || {
            let d_a_margin = hb.eps_margin;
            let mut r = restriction_report(&fam, &spec, hb.tube_radius, k_hat, d_a_margin)?;
            if d_a_margin.is_none() {
                r.eps_margin = cfg.tolerances.eps_margin_fraction * r.d_a;
                r.verdicts = crate::analysis::theorem_verdicts(&r, r.eps_margin).ok();
            }
            Ok(r)
        })?;
        let name = format!("restriction_{i}");
        w.json(&format!("{name}.json"), &report.to_json())?;
        w.put(&format!("{name}.csv"), &report.to_csv())?;
        if report.floor_limited {
            led.warn(format!("{stage}: {tag} at x0 = {x0} is floor-limited; verdicts unavailable"));
        }
        if let Some(v) = &report.verdicts {
            if !(v.sandwich && v.restriction_upper && v.tube_upper && v.metric_comparison) {
                led.warn(format!("{stage}: {tag} has a failed verdict: {}", serde_json::to_string(v).unwrap_or_default()));
            }
        }
        let art = format!("{name}.json");
        let fit = "weighted LSQ of -h log N(h) = r + c h";
        led.cite(format!("r_H[{i}]"), json!(report.r_h.as_ref().map(|f| f.rate)), &art, stage, &tag, fit);
        led.cite(format!("r_tube[{i}]"), json!(report.r_tube.as_ref().map(|f| f.rate)), &art, stage, &tag, fit);
        led.cite(format!("d_R[{i}]"), json!(report.d_r), &art, stage, &tag, "distance from x0 to K_hat or to the turning points");
        led.cite(format!("d_A[{i}]"), json!(report.d_a), &art, stage, &tag, "adaptive quadrature of sqrt((V - E)_+) to {V <= E}");
        led.cite(format!("beta[{i}]"), json!(report.beta), &art, stage, &tag, "1.05 sqrt(max |V - E|) on a sample of the domain");
    }
    Ok(())
}

fn lacunarity(cfg: &ExperimentConfig, fam: &EigenfunctionFamily<f64>, k_hat: &SupportEstimate<f64>) -> Result<Vec<crate::microlocal::LacunarityFit<f64>>> {
    cfg.lacunarity
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let cut = |a: &ArcBlock, which: &str| -> Result<_> {
                Ok(arc_cutoff(
                    fam.domain.clone(),
                    a.center.value(&format!("lacunarity[{i}].{which}.center"))?,
                    a.plateau,
                    a.transition,
                ))
            };
            let chi1 = cut(&l.chi1, "chi1")?;
            let chi2 = cut(&l.chi2, "chi2")?;
            let op = match l.operator {
                LacunaryKind::Identity => LacunaryOperator::Identity,
                LacunaryKind::ResolventRatio => LacunaryOperator::ResolventRatio,
            };
            lacunarity_fit(&op, fam, &chi1, &chi2, k_hat)
        })
        .collect()
}

fn carleman_model(c: &CarlemanBlock) -> Result<GeodesicSphereModel<f64>> {
    let model = match c.geometry {
        GeometryKind::Circle => GeodesicSphereModel::circle(c.radius),
        GeometryKind::Sphere => GeodesicSphereModel::sphere(c.dim, c.radius),
        GeometryKind::ConcaveSphere => GeodesicSphereModel::concave_sphere(c.dim, c.radius),
        GeometryKind::Flat => GeodesicSphereModel::flat(c.dim),
    };
    Ok(match &c.potential {
        Some(p) => {
            let e = Expr::parse(p)?;
            let v: crate::carleman::PotentialFn<f64> = Arc::new(move |y: &[f64]| e.value(y, &[], 0.0).re);
            model.with_potential(v, c.energy.unwrap_or(0.0))
        }
        None => model,
    })
}

fn carleman_weight(c: &CarlemanBlock) -> Result<CarlemanWeight<f64>> {
    let w = CarlemanWeight::new(c.tau, c.eps, c.c_y, c.beta)?;
    Ok(match c.cutoff {
        CutoffKind::Standard => w,
        CutoffKind::None => w.with_rho(Rho::Custom(Arc::new(|_: &[f64]| 0.0))),
    })
}

fn run_carleman(cfg: &ExperimentConfig, c: &CarlemanBlock, w: &mut Writer, led: &mut Ledger) -> std::result::Result<(), CliError> {
    let stage = "carleman.bracket";
    let model = carleman_model(c).map_err(|e| CliError::stage(stage, e))?;
    let weight = carleman_weight(c).map_err(|e| CliError::stage(stage, e))?;
    let scan = led.stage(stage, || {
        let grid = ScanSpec::uniform(model.dim(), c.scan.xi_radius, c.scan.points).grid(&weight)?;
        bracket_margin(&model, &weight, &grid, c.scan.char_tol)
    })?;
    let mut csv = String::new();
    let n = model.dim();
    let head: Vec<String> = (1..=n).map(|k| format!("y{k}")).chain((1..=n).map(|k| format!("xi{k}"))).collect();
    let _ = writeln!(csv, "{},abs_p,bracket,projected", head.join(","));
    for s in &scan.samples {
        let coords: Vec<String> = s.point.y.iter().chain(&s.point.xi).map(|v| v.to_string()).collect();
        let _ = writeln!(csv, "{},{},{},{}", coords.join(","), s.abs_p, s.bracket, s.projected);
    }
    w.put("bracket_samples.csv", &csv)?;
    w.json(
        "bracket.json",
        &json!({
            "model": model.name(),
            "weight": { "tau": c.tau, "eps": c.eps, "c_y": c.c_y, "beta": c.beta, "cutoff": c.cutoff },
            "margin": scan.margin,
            "witness": scan.witness,
            "raw_margin": scan.raw_margin,
            "char_tol": scan.char_tol,
            "grid_points": scan.grid_points,
            "samples": scan.samples.len(),
            "admissible": scan.margin.map(|m| m > 0.0),
        }),
    )?;
    match scan.margin {
        None => led.warn(format!("{stage}: no characteristic points found on the scan grid")),
        Some(m) if m <= 0.0 => led.warn(format!("{stage}: bracket margin {m:.4e} is not positive")),
        _ => {}
    }
    led.cite("bracket_margin", json!(scan.margin), "bracket.json", stage, "carleman.scan", "min of {Re p_psi, Im p_psi} over projected characteristic points");

    if let Some(t) = &c.tau_estimate {
        let stage = "carleman.tau";
        let family = WeightFamily {
            beta: c.beta,
            c_y: c.c_y,
            eps_ratio: t.eps_ratio,
        };
        let spec = ScanSpec::uniform(model.dim(), c.scan.xi_radius, t.points.unwrap_or(c.scan.points));
        let est = led.stage(stage, || max_tau_estimate(&model, &family, &spec, t.tau_min, t.tau_cap, t.bisections))?;
        let mut csv = String::from("tau,margin\n");
        for (tau, m) in &est.trace {
            let _ = writeln!(csv, "{tau},{}", m.map(|v| v.to_string()).unwrap_or_default());
        }
        w.put("tau_trace.csv", &csv)?;
        w.json("tau.json", &serde_json::to_value(&est).unwrap_or_default())?;
        if !est.monotone {
            led.warn(format!("{stage}: margins along tau are not monotone"));
        }
        led.cite("tau_Y", json!(est.tau_y), "tau.json", stage, "carleman.tau_estimate", "doubling then bisection on the sign of the bracket margin");
    }

    if let Some(s) = &c.sigma {
        let stage = "carleman.sigma";
        let study = led.stage(stage, || {
            discrete_carleman_sigma_min(
                &model,
                &weight,
                &s.h,
                SigmaGrid {
                    n_tan: s.n_tan,
                    n_normal: s.n_normal,
                },
                cfg.seed,
            )
        })?;
        let mut csv = String::from("h,sigma_min,points_per_wavelength,iterations\n");
        for p in &study.points {
            let _ = writeln!(csv, "{},{},{},{}", p.h, p.sigma_min, p.points_per_wavelength, p.iterations);
        }
        w.put("sigma.csv", &csv)?;
        w.json("sigma.json", &serde_json::to_value(&study).unwrap_or_default())?;
        led.cite("sigma_slope", json!(study.slope), "sigma.json", stage, "carleman.sigma", "least-squares slope of log sigma_min against log h");
    }
    Ok(())
}

fn run_factorize(cfg: &ExperimentConfig, f: &FactorizeBlock, w: &mut Writer, led: &mut Ledger) -> std::result::Result<(), CliError> {
    let stage = "factorize";
    let hs = f.resolve_h().map_err(|e| CliError::Schema(strip(e)))?;
    let dim = f.period.len();
    let (fact, fits) = led.stage(stage, || {
        let q = SymbolExpansion::from_exprs(0, dim, f.q.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?)?;
        let b: FieldRef<f64> = Arc::new(ExprField::new(Expr::parse(&f.b)?, dim)?);
        let sample = PhaseGrid::uniform(f.sample_lo.clone(), f.sample_hi.clone(), f.sample_points)?;
        let fact = factor_symbols(&q, b, f.order, &sample)?;
        let chi1 = plateau_cutoff(f.chi1.lo.clone(), f.chi1.hi.clone(), f.chi1.width);
        let chi2 = plateau_cutoff(f.chi2.lo.clone(), f.chi2.hi.clone(), f.chi2.width);
        let pool = TestFunctionPool {
            seed: cfg.seed,
            count: f.pool.count,
            xi_max: f.pool.xi_max,
            width: f.pool.width,
            center_lo: f.pool.center_lo.clone(),
            center_hi: f.pool.center_hi.clone(),
        };
        let domain = PeriodicDomain {
            origin: vec![0.0; dim],
            lengths: f.period.clone(),
        };
        let fits = residual_order_fit(&fact, &domain, &chi1, &chi2, &hs, &pool, &f.truncations)?;
        Ok((fact, fits))
    })?;
    let mut csv = String::from("truncation,h,residual,floor\n");
    for fit in &fits {
        for ((h, r), fl) in fit.trace.iter().zip(&fit.floor) {
            let _ = writeln!(csv, "{},{h},{r},{fl}", fit.truncation);
        }
        if fit.floor_limited {
            led.warn(format!("{stage}: truncation {} is floor-limited", fit.truncation));
        }
        led.cite(format!("residual_slope[K={}]", fit.truncation), json!(fit.slope), "factorize.json", stage, "factorize", "log-log slope of the operator residual above the floor");
    }
    w.put("residual.csv", &csv)?;
    w.json("factorize.json", &json!({ "summary": fact.summary(), "fits": fits }))?;
    Ok(())
}
