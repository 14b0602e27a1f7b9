//! Restriction norms, tube masses and their decay rates, with the theorem
//! checks built on them.

use std::fmt::Write as _;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::agmon::{admissible_beta, agmon_distance_1d, allowed_set_distance, AgmonTarget};
use super::fit::{decay_rate_fit, RateFit};
use crate::error::{Error, Result};
use crate::microlocal::support::{in_intervals, log_density, logsumexp};
use crate::microlocal::{fourier_coefficients, PeriodicGrid, SupportEstimate};
use crate::models::schrodinger::wrap_mod;
use crate::models::{Domain1D, EigenfunctionFamily, FamilyEntry};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Increasing,
    Decreasing,
}

/// `H = {x = x0}`: a fiber circle of a warped product, a point in 1D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct HypersurfaceSpec<T> {
    pub x0: T,
    #[serde(default)]
    pub orientation: Orientation,
    /// Fraction of the fiber circle kept (`1` for the whole circle).
    #[serde(default)]
    pub sub_arc: Option<T>,
}

impl<T: Real> HypersurfaceSpec<T> {
    pub fn at(x0: T) -> Self {
        Self {
            x0,
            orientation: Orientation::Increasing,
            sub_arc: None,
        }
    }

    fn log_fraction(&self) -> Result<T> {
        match self.sub_arc {
            None => Ok(T::zero()),
            Some(f) if f > T::zero() && f <= T::one() => Ok(f.ln()),
            Some(f) => Err(Error::Domain(format!("sub-arc fraction {f} outside (0, 1]"))),
        }
    }
}

fn lagrange4<T: Real, V>(t: T, ys: [V; 4]) -> V
where
    V: Copy + std::ops::Mul<T, Output = V> + std::ops::Add<Output = V>,
{
    // nodes at -1, 0, 1, 2
    let one = T::one();
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let w = [
        -t * (t - one) * (t - two) / six,
        (t + one) * (t - one) * (t - two) / two,
        -(t + one) * t * (t - two) / two,
        (t + one) * t * (t - one) / six,
    ];
    ys[0] * w[0] + ys[1] * w[1] + ys[2] * w[2] + ys[3] * w[3]
}

/// Node indices of a 4-point stencil around `x` and the offset of `x` from
/// the second node (stencils shift inward at interval ends).
fn stencil<T: Real>(domain: &Domain1D<T>, e: &FamilyEntry<T>, x: T) -> ([usize; 4], T) {
    let n = e.nodes.len() as i64;
    let pos = (x - e.nodes[0]) / e.dx;
    let j = pos.floor().to_f64_lossy() as i64;
    let start = if domain.is_periodic() { j - 1 } else { (j - 1).clamp(0, (n - 4).max(0)) };
    let mut idx = [0usize; 4];
    for (k, slot) in idx.iter_mut().enumerate() {
        let i = start + k as i64;
        *slot = if domain.is_periodic() { i.rem_euclid(n) } else { i.min(n - 1) } as usize;
    }
    (idx, pos - T::lit((start + 1) as f64))
}

/// Band-limited interpolant of the samples on a circle.
fn trigonometric_value<T: Real>(domain: &Domain1D<T>, entry: &FamilyEntry<T>, x: T) -> Result<Complex<T>> {
    let grid = PeriodicGrid::circle(entry.nodes[0], domain.length(), entry.nodes.len())?;
    let coeffs = fourier_coefficients(&grid, &entry.values);
    Ok(coeffs
        .iter()
        .enumerate()
        .fold(Complex::new(T::zero(), T::zero()), |s, (i, c)| {
            s + c * Complex::from_polar(T::one(), grid.wavenumber(0, i) * x)
        }))
}

fn check_point<T: Real>(domain: &Domain1D<T>, x: T) -> Result<T> {
    if !domain.contains(x) {
        return Err(Error::Domain(format!("x0 = {x} outside the chart")));
    }
    Ok(if domain.is_periodic() { domain.wrap(x) } else { x })
}

/// `log |u|_{L^2(H)}`, or `None` when `v(x0)` sits below the numerical floor
/// with no reconstruction available.
///
/// For warped products `|u|^2_{L^2(H)} = f(x0) |v(x0)|^2` under the
/// `1/sqrt(2 pi)` fiber convention; in 1D it is `|v(x0)|^2`.
pub fn log_restriction_norm<T: Real>(
    domain: &Domain1D<T>,
    entry: &FamilyEntry<T>,
    hs: &HypersurfaceSpec<T>,
) -> Result<Option<T>> {
    let x = check_point(domain, hs.x0)?;
    let (idx, t) = stencil(domain, entry, x);
    let weight = lagrange4(t, idx.map(|i| entry.weight[i]));
    let reconstructed = idx
        .iter()
        .all(|&i| in_intervals(entry.nodes[i], &entry.reconstructed_intervals));
    let log_amp = if reconstructed {
        lagrange4(t, idx.map(|i| entry.log_amplitude[i]))
    } else {
        let v = if domain.is_periodic() {
            trigonometric_value(domain, entry, x)?
        } else {
            lagrange4(t, idx.map(|i| entry.values[i]))
        };
        let floor = T::lit(1e3) * T::epsilon() * T::from_usize_lossy(entry.nodes.len());
        if v.norm() < floor {
            return Ok(None);
        }
        v.norm().ln()
    };
    Ok(Some(log_amp + (weight.ln() + hs.log_fraction()?) / T::lit(2.0)))
}

/// `|u|_{L^2(H)}` (zero below the floor).
pub fn restriction_norm<T: Real>(domain: &Domain1D<T>, entry: &FamilyEntry<T>, hs: &HypersurfaceSpec<T>) -> Result<T> {
    Ok(log_restriction_norm(domain, entry, hs)?.map_or(T::zero(), T::exp))
}

/// `log |u|_{L^2(U_H(eps))}` over `{|x - x0| < eps}` in the weighted base
/// measure, with partial-cell weights at the tube ends. `None` when every
/// node in the tube is below the floor.
pub fn tube_mass<T: Real>(
    domain: &Domain1D<T>,
    entry: &FamilyEntry<T>,
    hs: &HypersurfaceSpec<T>,
    eps: T,
) -> Result<Option<T>> {
    let x = check_point(domain, hs.x0)?;
    if eps < T::zero() {
        return Err(Error::Domain(format!("tube radius {eps} is negative")));
    }
    let dens = log_density(entry);
    let half = entry.dx / T::lit(2.0);
    let n = entry.nodes.len();
    let terms = (0..n).filter_map(|j| {
        let d = dens[j]?;
        let overlap = if domain.is_periodic() && eps >= domain.length() / T::lit(2.0) {
            entry.dx
        } else {
            let offset = if domain.is_periodic() {
                let l = domain.length();
                wrap_mod(entry.nodes[j] - x + l / T::lit(2.0), l) - l / T::lit(2.0)
            } else {
                entry.nodes[j] - x
            };
            let lo = (offset - half).max(-eps);
            let hi = (offset + half).min(eps);
            (hi - lo).max(T::zero())
        };
        (overlap > T::zero()).then(|| d + overlap.ln())
    });
    let lm = logsumexp(terms);
    if !lm.is_finite() {
        return Ok(None);
    }
    Ok(Some((lm + hs.log_fraction()?) / T::lit(2.0)))
}

/// Base distance from `x0` to `K_hat`, both arcs on a circle.
pub fn riemannian_distance<T: Real>(hs: &HypersurfaceSpec<T>, k_hat: &SupportEstimate<T>) -> Result<T> {
    k_hat.distance(hs.x0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceSource {
    /// Distances to the estimated support `K_hat`.
    Estimated,
    /// Distances to the turning-point set `{V <= E}`.
    TurningPoints,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremVerdicts {
    /// `r_H <= d_R + eps`.
    pub restriction_upper: bool,
    /// `r_tube <= d_R + eps`.
    pub tube_upper: bool,
    /// `r_H <= beta (d_R + eps)`.
    pub schrodinger_upper: bool,
    /// `r_H >= d_A - eps`.
    pub agmon_lower: bool,
    pub sandwich: bool,
    /// `r_tube <= r_H + stderr`.
    pub tube_consistency: bool,
    /// `d_A <= beta d_R + eps`.
    pub metric_comparison: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestrictionReport<T> {
    pub hypersurface: HypersurfaceSpec<T>,
    pub tube_radius: T,
    pub h: Vec<T>,
    /// `log |u_h|_{L^2(H)}` per `h` (`None` below the floor).
    pub log_restriction: Vec<Option<T>>,
    /// `log |u_h|_{L^2(U_H(eps))}`.
    pub log_tube: Vec<Option<T>>,
    pub r_h: Option<RateFit<T>>,
    pub r_tube: Option<RateFit<T>>,
    pub floor_limited: bool,
    pub d_r: T,
    pub d_a: T,
    pub beta: T,
    pub distance_source: DistanceSource,
    pub eps_margin: T,
    pub verdicts: Option<TheoremVerdicts>,
}

fn rate_or_none<T: Real>(h: &[T], logs: &[Option<T>]) -> Option<RateFit<T>> {
    (logs.iter().flatten().count() >= 3)
        .then(|| decay_rate_fit(h, logs, None).ok())
        .flatten()
}

/// Evaluates `H` and its tube across the family, fits both rates and checks
/// the theorem bounds. `k_hat = None` measures `d_R` to `{V <= E}`;
/// `eps_margin = None` uses `0.05 d_A`.
pub fn restriction_report<T: Real>(
    fam: &EigenfunctionFamily<T>,
    hs: &HypersurfaceSpec<T>,
    tube_radius: T,
    k_hat: Option<&SupportEstimate<T>>,
    eps_margin: Option<T>,
) -> Result<RestrictionReport<T>> {
    let energy = T::lit(fam.meta.energy_target);
    let h = fam.h_values();
    let log_restriction = fam
        .entries
        .iter()
        .map(|e| log_restriction_norm(&fam.domain, e, hs))
        .collect::<Result<Vec<_>>>()?;
    let log_tube = fam
        .entries
        .iter()
        .map(|e| tube_mass(&fam.domain, e, hs, tube_radius))
        .collect::<Result<Vec<_>>>()?;
    let (d_r, distance_source) = match k_hat {
        Some(k) => (riemannian_distance(hs, k)?, DistanceSource::Estimated),
        None => (
            allowed_set_distance(&fam.potential, energy, &fam.domain, hs.x0)?,
            DistanceSource::TurningPoints,
        ),
    };
    let d_a = agmon_distance_1d(&fam.potential, energy, &fam.domain, hs.x0, AgmonTarget::AllowedSet)?.distance;
    let beta = admissible_beta(&fam.potential, energy, &fam.domain);
    let r_h = rate_or_none(&h, &log_restriction);
    let r_tube = rate_or_none(&h, &log_tube);
    let mut report = RestrictionReport {
        hypersurface: hs.clone(),
        tube_radius,
        floor_limited: r_h.is_none() || r_tube.is_none(),
        h,
        log_restriction,
        log_tube,
        r_h,
        r_tube,
        d_r,
        d_a,
        beta,
        distance_source,
        eps_margin: eps_margin.unwrap_or(T::lit(0.05) * d_a),
        verdicts: None,
    };
    report.verdicts = theorem_verdicts(&report, report.eps_margin).ok();
    Ok(report)
}

/// Upper bounds are checked at `r - 2 stderr`, lower bounds at `r + 2 stderr`.
pub fn theorem_verdicts<T: Real>(report: &RestrictionReport<T>, eps_margin: T) -> Result<TheoremVerdicts> {
    let r_h = report
        .r_h
        .as_ref()
        .ok_or_else(|| Error::FloorLimited("restriction rate unavailable".into()))?;
    let r_tube = report
        .r_tube
        .as_ref()
        .ok_or_else(|| Error::FloorLimited("tube rate unavailable".into()))?;
    let slack = T::lit(1e-9);
    let two = T::lit(2.0);
    let h_low = r_h.rate - two * r_h.stderr;
    let h_high = r_h.rate + two * r_h.stderr;
    let tube_low = r_tube.rate - two * r_tube.stderr;
    let restriction_upper = h_low <= report.d_r + eps_margin + slack;
    let schrodinger_upper = h_low <= report.beta * (report.d_r + eps_margin) + slack;
    let agmon_lower = h_high + slack >= report.d_a - eps_margin;
    Ok(TheoremVerdicts {
        restriction_upper,
        tube_upper: tube_low <= report.d_r + eps_margin + slack,
        schrodinger_upper,
        agmon_lower,
        sandwich: agmon_lower && schrodinger_upper,
        tube_consistency: r_tube.rate <= r_h.rate + r_h.stderr + r_tube.stderr + slack,
        metric_comparison: report.d_a <= report.beta * report.d_r + eps_margin + slack,
    })
}

impl<T: Real> RestrictionReport<T> {
    /// `h,log_restriction,log_tube` with empty fields below the floor.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,log_restriction,log_tube\n");
        let opt = |v: Option<T>| v.map(|v| v.to_f64_lossy().to_string()).unwrap_or_default();
        for (i, h) in self.h.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{}",
                h.to_f64_lossy(),
                opt(self.log_restriction[i]),
                opt(self.log_tube[i])
            );
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value
    where
        T: Serialize,
    {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}
