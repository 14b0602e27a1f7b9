//! Standard quantization on periodic tensor grids.

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase_symbols::{eval_symbol, PhasePoint, SymbolExpansion};
use crate::real::Real;

/// Uniform periodic grid `origin + [0, length)` per axis, last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicGrid<T> {
    pub origin: Vec<T>,
    pub lengths: Vec<T>,
    pub counts: Vec<usize>,
}

impl<T: Real> PeriodicGrid<T> {
    pub fn new(origin: Vec<T>, lengths: Vec<T>, counts: Vec<usize>) -> Result<Self> {
        if origin.len() != lengths.len() || origin.len() != counts.len() || origin.is_empty() {
            return Err(Error::Domain("periodic grid axes disagree".into()));
        }
        if counts.iter().any(|&c| c < 2) || lengths.iter().any(|l| !(*l > T::zero())) {
            return Err(Error::Domain("periodic grid needs >= 2 nodes and positive length per axis".into()));
        }
        Ok(Self { origin, lengths, counts })
    }

    /// `[origin, origin + length)` with `count` nodes.
    pub fn circle(origin: T, length: T, count: usize) -> Result<Self> {
        Self::new(vec![origin], vec![length], vec![count])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> T {
        self.lengths[axis] / T::from_usize_lossy(self.counts[axis])
    }

    pub fn node(&self, axis: usize, i: usize) -> T {
        self.origin[axis] + self.spacing(axis) * T::from_usize_lossy(i)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.counts[a];
            flat /= self.counts[a];
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<T> {
        self.unflatten(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.node(a, i))
            .collect()
    }

    /// Signed mode number of FFT bin `i` along `axis`.
    pub fn mode(&self, axis: usize, i: usize) -> i64 {
        let n = self.counts[axis];
        if i < n.div_ceil(2) {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Angular wavenumber `2 pi m / L` of bin `i`.
    pub fn wavenumber(&self, axis: usize, i: usize) -> T {
        T::TAU() * T::lit(self.mode(axis, i) as f64) / self.lengths[axis]
    }

    /// Samples a function on the grid.
    pub fn sample(&self, f: impl Fn(&[T]) -> Complex<T>) -> Vec<Complex<T>> {
        (0..self.len()).map(|k| f(&self.point(k))).collect()
    }

    pub fn cell_volume(&self) -> T {
        (0..self.dim()).fold(T::one(), |s, a| s * self.spacing(a))
    }

    /// `sum |u|^2 dV`.
    pub fn norm_sq(&self, u: &[Complex<T>]) -> T {
        u.iter().fold(T::zero(), |s, z| s + z.norm_sqr()) * self.cell_volume()
    }

    pub fn norm(&self, u: &[Complex<T>]) -> T {
        self.norm_sq(u).sqrt()
    }

    /// `sum u conj(v) dV`.
    pub fn inner(&self, u: &[Complex<T>], v: &[Complex<T>]) -> Complex<T> {
        let dv = (0..self.dim()).fold(T::one(), |s, a| s * self.spacing(a));
        u.iter()
            .zip(v)
            .fold(Complex::new(T::zero(), T::zero()), |s, (a, b)| s + a * b.conj())
            * dv
    }
}

/// In-place multidimensional DFT (unnormalized).
pub fn fft_nd<T: Real>(data: &mut [Complex<T>], counts: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<T>::new();
    let total: usize = counts.iter().product();
    let mut stride = 1;
    for axis in (0..counts.len()).rev() {
        let n = counts[axis];
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let mut line = vec![Complex::new(T::zero(), T::zero()); n];
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
        stride *= n;
    }
}

/// Fourier coefficients `c_k` with `u(x) = sum_k c_k e^{i k.x}`.
pub fn fourier_coefficients<T: Real>(grid: &PeriodicGrid<T>, u: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut c = u.to_vec();
    fft_nd(&mut c, &grid.counts, false);
    let scale = T::one() / T::from_usize_lossy(grid.len());
    for (flat, v) in c.iter_mut().enumerate() {
        let idx = grid.unflatten(flat);
        let phase = idx
            .iter()
            .enumerate()
            .fold(T::zero(), |s, (a, &i)| s - grid.wavenumber(a, i) * grid.origin[a]);
        *v *= Complex::from_polar(scale, phase);
    }
    c
}

fn check_resolved<T: Real>(grid: &PeriodicGrid<T>, c: &[Complex<T>]) -> Result<()> {
    let max = c.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    if max == T::zero() {
        return Ok(());
    }
    let mut edge = T::zero();
    for (flat, z) in c.iter().enumerate() {
        let idx = grid.unflatten(flat);
        let near_nyquist = idx.iter().enumerate().any(|(a, &i)| {
            let m = grid.mode(a, i).unsigned_abs() as usize;
            10 * m >= 4 * grid.counts[a]
        });
        if near_nyquist {
            edge = edge.max(z.norm());
        }
    }
    if edge > max * T::lit(1e-9) {
        return Err(Error::Resolution(format!(
            "input not resolved: relative spectral content {:.2e} beyond 0.4 x Nyquist",
            (edge / max).to_f64_lossy()
        )));
    }
    Ok(())
}

/// `Op_h(a) u` for a symbol given as a closure `(x, xi) -> a(x, xi)`.
///
/// `dependence = (position, momentum)` selects the exact fast paths: pure
/// multiplication, Fourier multiplier, or the semidiscrete sum over modes
/// carrying non-negligible coefficients.
pub fn quantize_apply_with<T, F>(
    grid: &PeriodicGrid<T>,
    u: &[Complex<T>],
    h: T,
    dependence: (bool, bool),
    a: F,
) -> Result<Vec<Complex<T>>>
where
    T: Real,
    F: Fn(&[T], &[T]) -> Result<Complex<T>> + Sync,
{
    if u.len() != grid.len() {
        return Err(Error::Domain(format!("grid function has {} samples, grid {}", u.len(), grid.len())));
    }
    let n = grid.dim();
    let zero_xi = vec![T::zero(); n];
    let (pos, mom) = dependence;
    if !mom {
        return (0..grid.len())
            .map(|k| Ok(a(&grid.point(k), &zero_xi)? * u[k]))
            .collect();
    }
    let c = fourier_coefficients(grid, u);
    check_resolved(grid, &c)?;
    let xi_of = |flat: usize| -> Vec<T> {
        grid.unflatten(flat)
            .iter()
            .enumerate()
            .map(|(ax, &i)| h * grid.wavenumber(ax, i))
            .collect()
    };
    if !pos {
        let x0 = grid.origin.clone();
        let mut spec = u.to_vec();
        fft_nd(&mut spec, &grid.counts, false);
        for (flat, v) in spec.iter_mut().enumerate() {
            *v *= a(&x0, &xi_of(flat))?;
        }
        fft_nd(&mut spec, &grid.counts, true);
        let scale = T::one() / T::from_usize_lossy(grid.len());
        return Ok(spec.into_iter().map(|z| z * scale).collect());
    }
    let cmax = c.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    let cut = cmax * T::epsilon() * T::lit(8.0);
    let modes: Vec<(Vec<T>, Vec<T>, Complex<T>)> = c
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > cut)
        .map(|(flat, z)| {
            let k: Vec<T> = grid
                .unflatten(flat)
                .iter()
                .enumerate()
                .map(|(ax, &i)| grid.wavenumber(ax, i))
                .collect();
            let xi = k.iter().map(|v| *v * h).collect();
            (k, xi, *z)
        })
        .collect();
    (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let x = grid.point(p);
            let mut acc = Complex::new(T::zero(), T::zero());
            for (k, xi, z) in &modes {
                let phase = k.iter().zip(&x).fold(T::zero(), |s, (k, x)| s + *k * *x);
                acc += a(&x, xi)? * z * Complex::from_polar(T::one(), phase);
            }
            Ok(acc)
        })
        .collect()
}

/// `Op_h(a) u` for a symbol expansion `a ~ sum h^j a_j`.
pub fn quantize_apply<T: Real>(
    a: &SymbolExpansion<T>,
    grid: &PeriodicGrid<T>,
    u: &[Complex<T>],
    h: T,
) -> Result<Vec<Complex<T>>> {
    if a.dim() != grid.dim() {
        return Err(Error::Domain(format!(
            "symbol dimension {} vs grid dimension {}",
            a.dim(),
            grid.dim()
        )));
    }
    let dep = a
        .terms()
        .iter()
        .fold((false, false), |(p, m), t| {
            let (tp, tm) = t.dependence();
            (p || tp, m || tm)
        });
    if let Some(region) = a.region() {
        if dep.1 {
            let c = fourier_coefficients(grid, u);
            let cmax = c.iter().fold(T::zero(), |m, z| m.max(z.norm()));
            let n = grid.dim();
            for (flat, z) in c.iter().enumerate() {
                if z.norm() <= cmax * T::lit(1e-12) {
                    continue;
                }
                for (ax, &i) in grid.unflatten(flat).iter().enumerate() {
                    let xi = h * grid.wavenumber(ax, i);
                    if xi < region.lo[n + ax] || xi > region.hi[n + ax] {
                        return Err(Error::Domain(format!(
                            "momentum window exceeded: h k = {xi} outside [{}, {}]",
                            region.lo[n + ax],
                            region.hi[n + ax]
                        )));
                    }
                }
            }
        }
    }
    quantize_apply_with(grid, u, h, dep, |x, xi| {
        let pt = PhasePoint { y: x.to_vec(), xi: xi.to_vec() };
        eval_symbol(a, &pt, h)
    })
}
