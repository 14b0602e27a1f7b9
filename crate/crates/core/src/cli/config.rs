//! Experiment configuration (TOML).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microlocal::RateTolerance;
use crate::phase_symbols::Expr;

pub const SCHEMA_VERSION: u32 = 1;

/// A number, or a constant expression such as `"pi - 0.4"` or `"1/107"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    pub fn value(&self, field: &str) -> Result<f64> {
        match self {
            Scalar::Number(v) => Ok(*v),
            Scalar::Text(s) => {
                let e = Expr::parse(s).map_err(|e| Error::Schema(format!("{field}: {}", inner(e))))?;
                if e.arity() != (0, 0) || e.uses_h() {
                    return Err(Error::Schema(format!("{field}: '{s}' must be a constant expression")));
                }
                let v = e.value::<f64>(&[], &[], 0.0);
                if v.im != 0.0 || !v.re.is_finite() {
                    return Err(Error::Schema(format!("{field}: '{s}' is not a finite real number")));
                }
                Ok(v.re)
            }
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Number(v)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Artifact directory (relative paths resolve against the working directory).
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub model: Option<ModelBlock>,
    #[serde(default)]
    pub h_grid: Option<HGridBlock>,
    #[serde(default)]
    pub hypersurface: Vec<HypersurfaceBlock>,
    #[serde(default)]
    pub support: Option<SupportBlock>,
    #[serde(default)]
    pub lacunarity: Vec<LacunarityBlock>,
    #[serde(default)]
    pub symbol: Vec<SymbolBlock>,
    #[serde(default)]
    pub carleman: Option<CarlemanBlock>,
    #[serde(default)]
    pub factorize: Option<FactorizeBlock>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// `eps_margin = fraction * d_A` unless a hypersurface sets its own.
    #[serde(default = "default_margin_fraction")]
    pub eps_margin_fraction: f64,
    /// Largest accepted solver residual when verifying artifacts.
    #[serde(default = "default_residual")]
    pub max_residual: f64,
}

fn default_margin_fraction() -> f64 {
    0.05
}

fn default_residual() -> f64 {
    1e-6
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_margin_fraction: default_margin_fraction(),
            max_residual: default_residual(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainBlock {
    Circle { start: Scalar, length: Scalar },
    Interval { a: Scalar, b: Scalar },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParityBlock {
    #[serde(default = "zero")]
    pub center: Scalar,
    pub even: bool,
}

fn zero() -> Scalar {
    Scalar::Number(0.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelBlock {
    /// Surface of revolution `dx^2 + f(x)^2 dtheta^2` with fiber frequency `lambda`.
    Warped {
        profile: String,
        lambda: f64,
        energy: f64,
        domain: DomainBlock,
        #[serde(default)]
        parity: Option<ParityBlock>,
        #[serde(default)]
        points_per_h: Option<f64>,
    },
    Schrodinger {
        potential: String,
        energy: f64,
        domain: DomainBlock,
        #[serde(default)]
        parity: Option<ParityBlock>,
        #[serde(default)]
        points_per_h: Option<f64>,
    },
    /// Plane waves `e^{i k x / h}` on the flat circle.
    Torus { momentum: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HGridBlock {
    pub values: Vec<Scalar>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceTo {
    Estimated,
    TurningPoints,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypersurfaceBlock {
    pub x0: Scalar,
    pub tube_radius: f64,
    #[serde(default)]
    pub sub_arc: Option<f64>,
    #[serde(default)]
    pub eps_margin: Option<f64>,
    #[serde(default)]
    pub distance_to: Option<DistanceTo>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportBlock {
    pub cell_size: Scalar,
    #[serde(default)]
    pub tolerance: Option<RateTolerance<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcBlock {
    pub center: Scalar,
    pub plateau: f64,
    pub transition: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LacunaryKind {
    Identity,
    ResolventRatio,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LacunarityBlock {
    pub operator: LacunaryKind,
    pub chi1: ArcBlock,
    pub chi2: ArcBlock,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolBlock {
    pub name: String,
    /// Expression in `y1` and `xi1`.
    pub expr: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Circle,
    Sphere,
    ConcaveSphere,
    Flat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    /// Mollified tangential ramp.
    #[default]
    Standard,
    /// `rho = 0`: the weight is `beta y_n`.
    None,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub xi_radius: f64,
    pub points: usize,
    #[serde(default)]
    pub char_tol: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauBlock {
    pub tau_min: f64,
    pub tau_cap: f64,
    #[serde(default = "default_bisections")]
    pub bisections: usize,
    pub eps_ratio: f64,
    #[serde(default)]
    pub points: Option<usize>,
}

fn default_bisections() -> usize {
    5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaBlock {
    pub h: Vec<f64>,
    pub n_tan: usize,
    pub n_normal: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlemanBlock {
    pub geometry: GeometryKind,
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(default = "one")]
    pub radius: f64,
    /// Potential in `y1..yn` (Schrödinger case).
    #[serde(default)]
    pub potential: Option<String>,
    #[serde(default)]
    pub energy: Option<f64>,
    pub tau: f64,
    pub eps: f64,
    pub c_y: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub cutoff: CutoffKind,
    pub scan: ScanBlock,
    #[serde(default)]
    pub tau_estimate: Option<TauBlock>,
    #[serde(default)]
    pub sigma: Option<SigmaBlock>,
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxCutoffBlock {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub width: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolBlock {
    pub count: usize,
    pub xi_max: f64,
    pub width: (f64, f64),
    pub center_lo: Vec<f64>,
    pub center_hi: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorizeBlock {
    /// Terms `q_0, q_{-1}, ...` in `y1..yn`, `xi1..xin`.
    pub q: Vec<String>,
    pub b: String,
    pub order: usize,
    pub truncations: Vec<usize>,
    pub h: Vec<Scalar>,
    /// Phase-space sample `[lo, hi]` (positions then momenta) for the ellipticity check.
    pub sample_lo: Vec<f64>,
    pub sample_hi: Vec<f64>,
    pub sample_points: usize,
    pub period: Vec<f64>,
    pub chi1: BoxCutoffBlock,
    pub chi2: BoxCutoffBlock,
    pub pool: PoolBlock,
}

pub(crate) fn inner(e: Error) -> String {
    match e {
        Error::Schema(m) => m,
        other => other.to_string(),
    }
}

fn scalars(list: &[Scalar], field: &str) -> Result<Vec<f64>> {
    list.iter()
        .enumerate()
        .map(|(i, s)| s.value(&format!("{field}[{i}]")))
        .collect()
}

impl HGridBlock {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        let hs = scalars(&self.values, "h_grid.values")?;
        if hs.is_empty() || hs.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::Schema("h_grid.values: must be nonempty and positive".into()));
        }
        if let Some(i) = hs.windows(2).position(|w| w[1] >= w[0]) {
            return Err(Error::Schema(format!(
                "h_grid.values: must be strictly decreasing ({} then {})",
                hs[i],
                hs[i + 1]
            )));
        }
        Ok(hs)
    }
}

impl FactorizeBlock {
    pub fn resolve_h(&self) -> Result<Vec<f64>> {
        let hs = scalars(&self.h, "factorize.h")?;
        if hs.iter().any(|h| !(*h > 0.0)) || hs.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Schema("factorize.h: must be positive and strictly decreasing".into()));
        }
        Ok(hs)
    }
}

impl ExperimentConfig {
    /// Parses and validates; every failure is an [`Error::Schema`] naming the
    /// offending line or field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Schema(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.trim().is_empty() {
            return Err(Error::Schema("name: must not be empty".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Schema("workers: must be at least 1".into()));
        }
        let needs_family = !self.hypersurface.is_empty()
            || self.support.is_some()
            || !self.lacunarity.is_empty()
            || !self.symbol.is_empty();
        if needs_family && self.model.is_none() {
            return Err(Error::Schema("model: required by hypersurface/support/lacunarity/symbol blocks".into()));
        }
        if self.model.is_some() {
            match &self.h_grid {
                Some(g) => {
                    g.resolve()?;
                }
                None => return Err(Error::Schema("h_grid: required with a model block".into())),
            }
        }
        if !self.lacunarity.is_empty() && self.support.is_none() {
            return Err(Error::Schema("support: required by lacunarity blocks".into()));
        }
        for (i, h) in self.hypersurface.iter().enumerate() {
            h.x0.value(&format!("hypersurface[{i}].x0"))?;
            if !(h.tube_radius >= 0.0) {
                return Err(Error::Schema(format!("hypersurface[{i}].tube_radius: must be nonnegative")));
            }
            if h.distance_to == Some(DistanceTo::Estimated) && self.support.is_none() {
                return Err(Error::Schema(format!(
                    "hypersurface[{i}].distance_to: 'estimated' needs a support block"
                )));
            }
        }
        for (i, s) in self.symbol.iter().enumerate() {
            let e = Expr::parse(&s.expr).map_err(|e| Error::Schema(format!("symbol[{i}].expr: {}", inner(e))))?;
            let (ny, nxi) = e.arity();
            if ny > 1 || nxi > 1 || e.uses_h() {
                return Err(Error::Schema(format!("symbol[{i}].expr: only y1 and xi1 are allowed")));
            }
        }
        if let Some(s) = &self.support {
            let c = s.cell_size.value("support.cell_size")?;
            if !(c > 0.0) {
                return Err(Error::Schema("support.cell_size: must be positive".into()));
            }
        }
        if let Some(m) = &self.model {
            let (expr, field) = match m {
                ModelBlock::Warped { profile, .. } => (profile, "model.profile"),
                ModelBlock::Schrodinger { potential, .. } => (potential, "model.potential"),
                ModelBlock::Torus { .. } => return Ok(()),
            };
            let e = Expr::parse(expr).map_err(|e| Error::Schema(format!("{field}: {}", inner(e))))?;
            let (ny, nxi) = e.arity();
            if ny > 1 || nxi > 0 || e.uses_h() {
                return Err(Error::Schema(format!("{field}: only y1 is allowed")));
            }
        }
        if let Some(c) = &self.carleman {
            if c.scan.points < 2 {
                return Err(Error::Schema("carleman.scan.points: need at least 2".into()));
            }
            if let Some(p) = &c.potential {
                Expr::parse(p).map_err(|e| Error::Schema(format!("carleman.potential: {}", inner(e))))?;
            }
        }
        if let Some(f) = &self.factorize {
            f.resolve_h()?;
            for (i, q) in f.q.iter().enumerate() {
                Expr::parse(q).map_err(|e| Error::Schema(format!("factorize.q[{i}]: {}", inner(e))))?;
            }
            Expr::parse(&f.b).map_err(|e| Error::Schema(format!("factorize.b: {}", inner(e))))?;
        }
        Ok(())
    }

    /// Config blocks present, for the provenance table.
    pub fn blocks(&self) -> BTreeMap<&'static str, bool> {
        BTreeMap::from([
            ("model", self.model.is_some()),
            ("h_grid", self.h_grid.is_some()),
            ("hypersurface", !self.hypersurface.is_empty()),
            ("support", self.support.is_some()),
            ("lacunarity", !self.lacunarity.is_empty()),
            ("symbol", !self.symbol.is_empty()),
            ("carleman", self.carleman.is_some()),
            ("factorize", self.factorize.is_some()),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_accept_constant_expressions() {
        assert_eq!(Scalar::Number(0.5).value("x").unwrap(), 0.5);
        let v = Scalar::Text("pi - 0.4".into()).value("x").unwrap();
        assert!((v - (std::f64::consts::PI - 0.4)).abs() < 1e-15);
        assert!(Scalar::Text("y1 + 1".into()).value("x").is_err());
        assert!(Scalar::Text("sqrt(-1)".into()).value("x").is_err());
    }

    #[test]
    fn h_grid_must_decrease() {
        let g = HGridBlock {
            values: vec![Scalar::Text("1/10".into()), Scalar::Number(0.05)],
        };
        assert_eq!(g.resolve().unwrap(), vec![0.1, 0.05]);
        let g = HGridBlock {
            values: vec![Scalar::Number(0.05), Scalar::Number(0.05)],
        };
        assert!(matches!(g.resolve(), Err(Error::Schema(_))));
    }

    #[test]
    fn bundled_configs_validate() {
        for (name, text) in crate::cli::BUNDLED {
            ExperimentConfig::from_toml(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn blocks_require_their_dependencies() {
        let text = "schema_version = 1\nname = \"x\"\n[[hypersurface]]\nx0 = 1.0\ntube_radius = 0.1\n";
        let err = ExperimentConfig::from_toml(text).unwrap_err().to_string();
        assert!(err.contains("model"), "{err}");
    }
}
