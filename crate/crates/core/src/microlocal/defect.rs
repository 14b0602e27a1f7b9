//! Pairings `<Op_h(a) u_h, u_h>` along a family and their limit as `h -> 0`.

use num_complex::Complex;
use serde::Serialize;

use super::quantize::{quantize_apply, quantize_apply_with, PeriodicGrid};
use crate::analysis::fit::linear_fit;
use crate::error::{Error, Result};
use crate::models::{Domain1D, EigenfunctionFamily, FamilyEntry};
use crate::phase_symbols::SymbolExpansion;
use crate::real::Real;

/// Samples of an entry as a function on a periodic grid, together with the
/// density of the base measure. Interval grids drop their right end node,
/// where the eigenfunction vanishes.
pub fn entry_on_grid<T: Real>(
    domain: &Domain1D<T>,
    entry: &FamilyEntry<T>,
) -> Result<(PeriodicGrid<T>, Vec<Complex<T>>, Vec<T>)> {
    let count = if domain.is_periodic() { entry.nodes.len() } else { entry.nodes.len() - 1 };
    let grid = PeriodicGrid::circle(entry.nodes[0], domain.length(), count)?;
    Ok((grid, entry.values[..count].to_vec(), entry.weight[..count].to_vec()))
}

#[derive(Clone, Debug, Serialize)]
pub struct MicrolocalProbe<T> {
    pub symbol: String,
    pub h: Vec<T>,
    pub pairings: Vec<Complex<T>>,
    /// Largest `|Im <Op_h(a) u, u>|` over the family.
    pub max_imaginary: T,
    /// Limit of the real parts as `h -> 0` (linear in `h`).
    pub limit: T,
    pub error: T,
    /// Successive pairings oscillate by more than the error estimate.
    pub nonconvergent: bool,
}

fn weighted_pairing<T: Real>(grid: &PeriodicGrid<T>, au: &[Complex<T>], u: &[Complex<T>], weight: &[T]) -> Complex<T> {
    au.iter()
        .zip(u)
        .zip(weight)
        .fold(Complex::new(T::zero(), T::zero()), |s, ((a, b), w)| s + a * b.conj() * *w)
        * grid.cell_volume()
}

/// Pairings of a symbol on `T^* M` against every entry of the family.
pub fn defect_mass<T: Real>(fam: &EigenfunctionFamily<T>, a: &SymbolExpansion<T>) -> Result<MicrolocalProbe<T>> {
    let label = a.terms().first().map(|t| t.describe()).unwrap_or_default();
    probe(fam, label, |grid, u, h| quantize_apply(a, grid, u, h))
}

/// As [`defect_mass`] for a symbol given as a closure `(x, xi) -> a`.
pub fn defect_mass_with<T, F>(
    fam: &EigenfunctionFamily<T>,
    label: &str,
    dependence: (bool, bool),
    a: F,
) -> Result<MicrolocalProbe<T>>
where
    T: Real,
    F: Fn(&[T], &[T]) -> Result<Complex<T>> + Sync,
{
    probe(fam, label.to_string(), |grid, u, h| quantize_apply_with(grid, u, h, dependence, &a))
}

fn probe<T: Real>(
    fam: &EigenfunctionFamily<T>,
    symbol: String,
    apply: impl Fn(&PeriodicGrid<T>, &[Complex<T>], T) -> Result<Vec<Complex<T>>>,
) -> Result<MicrolocalProbe<T>> {
    if fam.entries.is_empty() {
        return Err(Error::Domain("empty family".into()));
    }
    let mut h = Vec::new();
    let mut pairings = Vec::new();
    for e in &fam.entries {
        let (grid, u, w) = entry_on_grid(&fam.domain, e)?;
        let au = apply(&grid, &u, e.h)?;
        h.push(e.h);
        pairings.push(weighted_pairing(&grid, &au, &u, &w));
    }
    let re: Vec<T> = pairings.iter().map(|p| p.re).collect();
    let max_imaginary = pairings.iter().fold(T::zero(), |m, p| m.max(p.im.abs()));
    let (limit, error) = match linear_fit(&h, &re, None) {
        Ok((a, _, se, rms)) => (a, T::lit(2.0) * se + rms),
        Err(_) => (*re.last().unwrap_or(&T::zero()), T::infinity()),
    };
    let error = error.max(T::lit(1e-12));
    let jumps: Vec<T> = re.windows(2).map(|w| w[1] - w[0]).collect();
    let sign_changes = jumps.windows(2).filter(|w| w[0] * w[1] < T::zero()).count();
    let largest = jumps.iter().fold(T::zero(), |m, j| m.max(j.abs()));
    Ok(MicrolocalProbe {
        symbol,
        h,
        pairings,
        max_imaginary,
        limit,
        error,
        nonconvergent: sign_changes >= 2 && largest > error,
    })
}
