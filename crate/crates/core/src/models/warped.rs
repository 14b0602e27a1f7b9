//! Warped products `M x_f S^1` reduced to the base by fiber modes, and
//! plain 1D Schrödinger families.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use super::curve::Curve;
use super::family::{EigenfunctionFamily, FamilyEntry, FamilyKind, FamilyMeta, FiberMode};
use super::schrodinger::{solve_1d_eigen, Discretization, Domain1D, SchrodingerProblem1D, SolverOptions};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Debug)]
pub struct WarpedProduct<T> {
    pub profile: Curve<T>,
    pub lambda: T,
    pub fiber_dimension: usize,
    pub domain: Domain1D<T>,
    pub h_grid: Vec<T>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileBounds<T> {
    pub min: T,
    pub max: T,
}

impl<T: Real> WarpedProduct<T> {
    pub fn new(profile: Curve<T>, lambda: T, domain: Domain1D<T>, h_grid: Vec<T>) -> Result<Self> {
        let wp = Self {
            profile,
            lambda,
            fiber_dimension: 1,
            domain,
            h_grid,
        };
        let b = wp.profile_bounds();
        if !(b.min > T::zero()) {
            return Err(Error::Domain(format!("warping profile must stay positive, min f = {}", b.min)));
        }
        // validates the domain and h grid
        SchrodingerProblem1D::new(wp.domain.clone(), wp.potential(), T::zero(), wp.h_grid.clone())?;
        Ok(wp)
    }

    pub fn profile_bounds(&self) -> ProfileBounds<T> {
        let (lo, len) = match &self.domain {
            Domain1D::Circle { start, length } => (*start, *length),
            Domain1D::Interval { a, b } => (*a, *b - *a),
        };
        let vals: Vec<T> = (0..=4000)
            .map(|i| self.profile.value(lo + len * T::from_usize_lossy(i) / T::lit(4000.0)))
            .collect();
        ProfileBounds {
            min: vals.iter().copied().fold(T::infinity(), T::min),
            max: vals.iter().copied().fold(T::neg_infinity(), T::max),
        }
    }

    /// `V = lambda^2 / f^2`.
    pub fn potential(&self) -> Curve<T> {
        let l2 = self.lambda * self.lambda;
        self.profile.power(l2, T::lit(-2.0), format!("({})^2 / ({})^2", self.lambda, self.profile.label()))
    }

    /// `(m, m h)` with `m = round(lambda / h)`.
    pub fn fiber_mode(&self, h: T) -> (i64, T) {
        let m = (self.lambda / h).round();
        (m.to_f64_lossy() as i64, m * h)
    }

    /// Potential of the Liouville-transformed base operator acting on
    /// `psi = f^{n/2} v`: `lambda_h^2 / f^2 + h^2 (f^{n/2})'' / f^{n/2}`.
    pub fn liouville_potential(&self, h: T) -> Curve<T> {
        let (_, lh) = self.fiber_mode(h);
        let half_n = T::from_usize_lossy(self.fiber_dimension) / T::lit(2.0);
        let f = self.profile.clone();
        let label = format!("liouville[{}]", self.profile.label());
        Curve::new(label, move |x| {
            let [v, d1, d2] = f.eval3(x);
            let q = half_n * d2 / v + half_n * (half_n - T::one()) * (d1 / v) * (d1 / v);
            [lh * lh / (v * v) + h * h * q, T::zero(), T::zero()]
        })
    }
}

/// `P(h) v = -h^2 (v'' + n f'/f v') + lambda_h^2 / f^2 v`, discretised as
/// `F^{-n/2} P_psi F^{n/2}` with `P_psi` the symmetric fourth-order
/// Liouville operator, hence symmetric in the `f^n`-weighted product.
#[derive(Clone, Debug)]
pub struct WarpedOperator<T> {
    pub disc: Discretization<T>,
    /// `f^{n/2}` at the unknowns.
    pub half_weight: Vec<T>,
}

impl<T: Real> WarpedOperator<T> {
    pub fn new(wp: &WarpedProduct<T>, h: T, dx: T) -> Result<Self> {
        let disc = Discretization::new(&wp.domain, &wp.liouville_potential(h), h, dx)?;
        let half_n = T::from_usize_lossy(wp.fiber_dimension) / T::lit(2.0);
        let half_weight = disc
            .unknowns
            .iter()
            .map(|&i| wp.profile.value(disc.nodes[i]).powf(half_n))
            .collect();
        Ok(Self { disc, half_weight })
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        let psi: Vec<T> = v.iter().zip(&self.half_weight).map(|(a, w)| *a * *w).collect();
        self.disc.apply(&psi).iter().zip(&self.half_weight).map(|(a, w)| *a / *w).collect()
    }

    /// `(P - shift)^{-1} y` on the unknowns.
    pub fn solve_shifted(&self, shift: T, y: &[T]) -> Result<Vec<T>> {
        let (band, perm) = self.disc.shifted_band(shift);
        let lu = band.factor().map_err(|e| Error::numerical("operator-solve", e.to_string()))?;
        let n = y.len();
        let mut b = vec![T::zero(); n];
        for i in 0..n {
            b[perm[i]] = y[i] * self.half_weight[i];
        }
        lu.solve(&mut b);
        Ok((0..n).map(|i| b[perm[i]] / self.half_weight[i]).collect())
    }

    /// `sum u v f^n dx`.
    pub fn weighted_inner(&self, u: &[T], v: &[T]) -> T {
        u.iter()
            .zip(v)
            .zip(&self.half_weight)
            .fold(T::zero(), |s, ((a, b), w)| s + *a * *b * *w * *w)
            * self.disc.dx
    }
}

fn check_regular<T: Real>(prob: &SchrodingerProblem1D<T>) -> Result<()> {
    let band = T::lit(1e-3);
    if let Some(m) = prob.regular_value_margin(band) {
        if m < T::lit(1e-6) {
            return Err(Error::Domain(format!(
                "E = {} is not a regular value of {} (|V'| = {m} near the level set)",
                prob.energy_target,
                prob.potential.label()
            )));
        }
    }
    Ok(())
}

/// Eigenfunctions of the warped Laplacian `-h^2 Delta` nearest `E_target`
/// in the fiber mode `m = round(lambda / h)`, one per `h`.
pub fn warped_eigenfamily<T: Real>(
    wp: &WarpedProduct<T>,
    energy_target: T,
    opts: &SolverOptions<T>,
) -> Result<EigenfunctionFamily<T>> {
    let base = SchrodingerProblem1D::new(wp.domain.clone(), wp.potential(), energy_target, wp.h_grid.clone())?;
    check_regular(&base)?;
    let half_n = T::from_usize_lossy(wp.fiber_dimension) / T::lit(2.0);
    let entries = wp
        .h_grid
        .par_iter()
        .map(|&h| {
            let (m, lambda_h) = wp.fiber_mode(h);
            let prob = SchrodingerProblem1D::new(wp.domain.clone(), wp.liouville_potential(h), energy_target, vec![h])?;
            let sol = solve_1d_eigen(&prob, h, opts)?;
            let fvals: Vec<T> = sol.nodes.iter().map(|&x| wp.profile.value(x)).collect();
            let values = sol
                .values
                .iter()
                .zip(&fvals)
                .map(|(psi, f)| Complex::new(*psi / f.powf(half_n), T::zero()))
                .collect();
            let log_amplitude = sol
                .log_amplitude
                .iter()
                .zip(&fvals)
                .map(|(l, f)| *l - half_n * f.ln())
                .collect();
            Ok(FamilyEntry {
                h,
                energy: sol.energy,
                weight: fvals.iter().map(|f| f.powi(wp.fiber_dimension as i32)).collect(),
                nodes: sol.nodes,
                dx: sol.dx,
                values,
                log_amplitude,
                residual: sol.residual,
                normalization: sol.normalization,
                fiber: Some(FiberMode {
                    m,
                    lambda_h,
                    drift: (lambda_h - wp.lambda).abs(),
                }),
                reconstructed_intervals: sol.reconstruction.intervals,
                reconstruction_mismatch: sol.reconstruction.mismatch,
                notice: sol.reconstruction.notice,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenfunctionFamily {
        meta: FamilyMeta {
            kind: FamilyKind::Warped,
            name: format!("warped f = {}, lambda = {}", wp.profile.label(), wp.lambda),
            domain: domain_f64(&wp.domain),
            energy_target: energy_target.to_f64_lossy(),
            potential: wp.potential().label().to_string(),
            profile: Some(wp.profile.label().to_string()),
            lambda: Some(wp.lambda.to_f64_lossy()),
            fiber_dimension: wp.fiber_dimension,
        },
        domain: wp.domain.clone(),
        potential: wp.potential(),
        profile: Some(wp.profile.clone()),
        warped: Some(wp.clone()),
        entries,
    })
}

/// Scales `h = 1 / m`, `m` in `modes`, for which `lambda_h = lambda` (when
/// `lambda` is an integer) and the selected eigenvalue lies within
/// `max_drift` of `E_target`; returned in decreasing order.
pub fn resonant_h_grid<T: Real>(
    wp: &WarpedProduct<T>,
    energy_target: T,
    modes: std::ops::RangeInclusive<usize>,
    max_drift: T,
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    let candidates: Vec<T> = modes.map(|m| T::one() / T::from_usize_lossy(m.max(1))).collect();
    let probe = WarpedProduct {
        h_grid: candidates,
        ..wp.clone()
    };
    let opts = SolverOptions {
        window: Some(T::infinity()),
        ..opts.clone()
    };
    let fam = warped_eigenfamily(&probe, energy_target, &opts)?;
    Ok(fam
        .entries
        .iter()
        .filter(|e| (e.energy - energy_target).abs() <= max_drift)
        .map(|e| e.h)
        .collect())
}

pub(crate) fn domain_f64<T: Real>(d: &Domain1D<T>) -> Domain1D<f64> {
    match d {
        Domain1D::Circle { start, length } => Domain1D::Circle {
            start: start.to_f64_lossy(),
            length: length.to_f64_lossy(),
        },
        Domain1D::Interval { a, b } => Domain1D::Interval {
            a: a.to_f64_lossy(),
            b: b.to_f64_lossy(),
        },
    }
}

/// Eigenfunctions of `-h^2 d^2/dx^2 + V` nearest `E_target`, one per `h`.
pub fn schrodinger_family<T: Real>(prob: &SchrodingerProblem1D<T>, opts: &SolverOptions<T>) -> Result<EigenfunctionFamily<T>> {
    check_regular(prob)?;
    let entries = prob
        .h_grid
        .par_iter()
        .map(|&h| {
            let sol = solve_1d_eigen(prob, h, opts)?;
            Ok(FamilyEntry {
                h,
                energy: sol.energy,
                weight: vec![T::one(); sol.nodes.len()],
                values: sol.values.iter().map(|v| Complex::new(*v, T::zero())).collect(),
                log_amplitude: sol.log_amplitude,
                nodes: sol.nodes,
                dx: sol.dx,
                residual: sol.residual,
                normalization: sol.normalization,
                fiber: None,
                reconstructed_intervals: sol.reconstruction.intervals,
                reconstruction_mismatch: sol.reconstruction.mismatch,
                notice: sol.reconstruction.notice,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenfunctionFamily {
        meta: FamilyMeta {
            kind: FamilyKind::Schrodinger,
            name: format!("schrodinger V = {}", prob.potential.label()),
            domain: domain_f64(&prob.domain),
            energy_target: prob.energy_target.to_f64_lossy(),
            potential: prob.potential.label().to_string(),
            profile: None,
            lambda: None,
            fiber_dimension: 0,
        },
        domain: prob.domain.clone(),
        potential: prob.potential.clone(),
        profile: None,
        warped: None,
        entries,
    })
}
