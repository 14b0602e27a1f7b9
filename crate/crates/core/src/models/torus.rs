//! Joint eigenfunctions `e^{i <k, x> / h} (2 pi)^{-n/2}` of the flat torus.

use num_complex::Complex;
use serde::Serialize;

use super::curve::Curve;
use super::family::{EigenfunctionFamily, FamilyEntry, FamilyKind, FamilyMeta};
use super::schrodinger::Domain1D;
use crate::error::{Error, Result};
use crate::microlocal::PeriodicGrid;
use crate::real::Real;

#[derive(Clone, Debug, Serialize)]
pub struct TorusEigen<T> {
    pub h: T,
    pub momentum: Vec<T>,
    /// Integer modes `k / h`.
    pub modes: Vec<i64>,
    /// `(k_j)^2`, the eigenvalues of `(h D_{x_j})^2`.
    pub joint_eigenvalues: Vec<T>,
    #[serde(skip)]
    pub grid: PeriodicGrid<T>,
    #[serde(skip)]
    pub values: Vec<Complex<T>>,
}

/// Samples on `[0, 2 pi)^n` with at least 8 points per wavelength.
pub fn torus_joint_eigen<T: Real>(momentum: &[T], h: T) -> Result<TorusEigen<T>> {
    if momentum.is_empty() || !(h > T::zero()) {
        return Err(Error::Domain("torus eigenfunction needs a momentum vector and h > 0".into()));
    }
    let mut modes = Vec::with_capacity(momentum.len());
    for &k in momentum {
        let m = k / h;
        if (m - m.round()).abs() > T::lit(1e-9) * m.abs().max(T::one()) {
            return Err(Error::Domain(format!("k / h = {m} is not an integer; e^{{ikx/h}} is not periodic")));
        }
        modes.push(m.round().to_f64_lossy() as i64);
    }
    let n = momentum.len();
    let counts: Vec<usize> = modes
        .iter()
        .map(|m| (8 * m.unsigned_abs() as usize + 1).next_power_of_two().max(16))
        .collect();
    let grid = PeriodicGrid::new(vec![T::zero(); n], vec![T::TAU(); n], counts)?;
    let amp = T::TAU().powf(-T::from_usize_lossy(n) / T::lit(2.0));
    let kf: Vec<T> = modes.iter().map(|m| T::lit(*m as f64)).collect();
    let values = grid.sample(|x| {
        let phase = x.iter().zip(&kf).fold(T::zero(), |s, (x, k)| s + *x * *k);
        Complex::from_polar(amp, phase)
    });
    Ok(TorusEigen {
        h,
        momentum: momentum.to_vec(),
        joint_eigenvalues: momentum.iter().map(|k| *k * *k).collect(),
        modes,
        grid,
        values,
    })
}

impl<T: Real> TorusEigen<T> {
    /// `|u|_{L^2}` over a straight segment of length `ell`.
    pub fn line_norm(&self, ell: T) -> T {
        let amp = T::TAU().powf(-T::from_usize_lossy(self.momentum.len()) / T::lit(2.0));
        amp * ell.sqrt()
    }

    /// Circle entry (`n = 1`) in family form.
    pub fn to_family_entry(&self) -> Result<FamilyEntry<T>> {
        if self.momentum.len() != 1 {
            return Err(Error::Domain("family entries are one-dimensional".into()));
        }
        let count = self.grid.counts[0];
        let nodes: Vec<T> = (0..count).map(|i| self.grid.node(0, i)).collect();
        Ok(FamilyEntry {
            h: self.h,
            energy: self.joint_eigenvalues[0],
            dx: self.grid.spacing(0),
            log_amplitude: self.values.iter().map(|v| v.norm().ln()).collect(),
            weight: vec![T::one(); count],
            values: self.values.clone(),
            nodes,
            residual: T::zero(),
            normalization: T::one(),
            fiber: None,
            reconstructed_intervals: Vec::new(),
            reconstruction_mismatch: T::zero(),
            notice: Some("exact plane wave".into()),
        })
    }
}

/// Flat-circle family `e^{i k x / h} / sqrt(2 pi)` over admissible `h`.
pub fn torus_family<T: Real>(momentum: T, h_grid: &[T]) -> Result<EigenfunctionFamily<T>> {
    let entries = h_grid
        .iter()
        .map(|&h| torus_joint_eigen(&[momentum], h)?.to_family_entry())
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenfunctionFamily {
        meta: FamilyMeta {
            kind: FamilyKind::Torus,
            name: format!("flat circle k = {momentum}"),
            domain: Domain1D::Circle {
                start: 0.0,
                length: std::f64::consts::TAU,
            },
            energy_target: (momentum * momentum).to_f64_lossy(),
            potential: "0".into(),
            profile: None,
            lambda: None,
            fiber_dimension: 0,
        },
        domain: Domain1D::Circle {
            start: T::zero(),
            length: T::TAU(),
        },
        potential: Curve::constant(T::zero()),
        profile: None,
        warped: None,
        entries,
    })
}
