//! Families of eigenfunctions over a list of `h`, with portable output.

use std::fmt::Write as _;

use num_complex::Complex;
use serde::Serialize;

use super::curve::Curve;
use super::schrodinger::{Discretization, Domain1D};
use super::warped::{WarpedOperator, WarpedProduct};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Schrodinger,
    Warped,
    Torus,
}

/// Fiber mode `e^{i m theta}` of a warped product.
#[derive(Clone, Debug, Serialize)]
pub struct FiberMode<T> {
    pub m: i64,
    /// `m h`.
    pub lambda_h: T,
    /// `|m h - lambda|`.
    pub drift: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyEntry<T> {
    pub h: T,
    pub energy: T,
    pub nodes: Vec<T>,
    pub dx: T,
    /// Base profile `v`; the full eigenfunction is `v(x) e^{i m theta} / sqrt(2 pi)`
    /// for warped products.
    pub values: Vec<Complex<T>>,
    pub log_amplitude: Vec<T>,
    /// Density of the base measure (`f^n` for warped products, else 1).
    pub weight: Vec<T>,
    pub residual: T,
    pub normalization: T,
    pub fiber: Option<FiberMode<T>>,
    pub reconstructed_intervals: Vec<(T, T)>,
    pub reconstruction_mismatch: T,
    pub notice: Option<String>,
}

impl<T: Real> FamilyEntry<T> {
    /// `int |v|^2 weight dx` by the rectangle rule (exact for the periodic
    /// trapezoid, and interval grids vanish at both ends).
    pub fn weighted_norm_sq(&self) -> T {
        self.values
            .iter()
            .zip(&self.weight)
            .fold(T::zero(), |s, (v, w)| s + v.norm_sqr() * *w)
            * self.dx
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyMeta {
    pub kind: FamilyKind,
    pub name: String,
    pub domain: Domain1D<f64>,
    pub energy_target: f64,
    /// Potential governing the Agmon metric.
    pub potential: String,
    pub profile: Option<String>,
    pub lambda: Option<f64>,
    pub fiber_dimension: usize,
}

#[derive(Clone, Debug)]
pub struct EigenfunctionFamily<T> {
    pub meta: FamilyMeta,
    pub domain: Domain1D<T>,
    /// `V` for Schrödinger families, `lambda^2 / f^2` for warped products.
    pub potential: Curve<T>,
    pub profile: Option<Curve<T>>,
    pub warped: Option<WarpedProduct<T>>,
    pub entries: Vec<FamilyEntry<T>>,
}

#[derive(Serialize)]
struct EntrySummary {
    h: f64,
    energy: f64,
    energy_drift: f64,
    grid_points: usize,
    dx: f64,
    residual: f64,
    normalization: f64,
    weighted_norm_sq: f64,
    fiber_mode: Option<i64>,
    lambda_h: Option<f64>,
    lambda_drift: Option<f64>,
    reconstructed_intervals: Vec<(f64, f64)>,
    reconstruction_mismatch: f64,
    notice: Option<String>,
}

impl<T: Real> EigenfunctionFamily<T> {
    pub fn h_values(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.h).collect()
    }

    /// The discrete operator an entry was solved with (`P(h)` acting on `v`).
    pub fn entry_operator(&self, index: usize) -> Result<WarpedOperator<T>> {
        let e = self
            .entries
            .get(index)
            .ok_or_else(|| Error::Domain(format!("no entry {index}")))?;
        let dx = e.dx * (T::one() + T::lit(1e-9));
        let op = match (&self.meta.kind, &self.warped) {
            (FamilyKind::Warped, Some(wp)) => WarpedOperator::new(wp, e.h, dx)?,
            (FamilyKind::Schrodinger, _) => {
                let disc = Discretization::new(&self.domain, &self.potential, e.h, dx)?;
                let half_weight = vec![T::one(); disc.len()];
                WarpedOperator { disc, half_weight }
            }
            _ => {
                return Err(Error::Capability(
                    "torus entries are exact plane waves and carry no discrete operator".into(),
                ))
            }
        };
        if op.disc.nodes.len() != e.nodes.len() {
            return Err(Error::numerical("operator", "rebuilt grid differs from the entry grid"));
        }
        Ok(op)
    }

    /// Metadata and per-entry diagnostics (no samples).
    pub fn summary_json(&self) -> serde_json::Value {
        let entries: Vec<EntrySummary> = self
            .entries
            .iter()
            .map(|e| EntrySummary {
                h: e.h.to_f64_lossy(),
                energy: e.energy.to_f64_lossy(),
                energy_drift: (e.energy.to_f64_lossy() - self.meta.energy_target).abs(),
                grid_points: e.nodes.len(),
                dx: e.dx.to_f64_lossy(),
                residual: e.residual.to_f64_lossy(),
                normalization: e.normalization.to_f64_lossy(),
                weighted_norm_sq: e.weighted_norm_sq().to_f64_lossy(),
                fiber_mode: e.fiber.as_ref().map(|f| f.m),
                lambda_h: e.fiber.as_ref().map(|f| f.lambda_h.to_f64_lossy()),
                lambda_drift: e.fiber.as_ref().map(|f| f.drift.to_f64_lossy()),
                reconstructed_intervals: e
                    .reconstructed_intervals
                    .iter()
                    .map(|(a, b)| (a.to_f64_lossy(), b.to_f64_lossy()))
                    .collect(),
                reconstruction_mismatch: e.reconstruction_mismatch.to_f64_lossy(),
                notice: e.notice.clone(),
            })
            .collect();
        serde_json::json!({ "meta": self.meta, "entries": entries })
    }

    /// CSV block `x,re_v,im_v,log_abs_v` for one entry.
    pub fn entry_csv(&self, index: usize) -> String {
        let e = &self.entries[index];
        let mut out = String::from("x,re_v,im_v,log_abs_v\n");
        for ((x, v), l) in e.nodes.iter().zip(&e.values).zip(&e.log_amplitude) {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                x.to_f64_lossy(),
                v.re.to_f64_lossy(),
                v.im.to_f64_lossy(),
                l.to_f64_lossy()
            );
        }
        out
    }
}
