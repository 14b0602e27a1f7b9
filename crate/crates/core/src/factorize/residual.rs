//! Operator-level residual of a factorization on periodic grids.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::symbols::FactorizationResult;
use crate::analysis::fit::loglog_slope;
use crate::carleman::smoothstep;
use crate::error::{Error, Result};
use crate::microlocal::{fourier_coefficients, quantize_apply, quantize_apply_with, PeriodicGrid};
use crate::phase_symbols::PhasePoint;
use crate::real::Real;

/// Cutoff in position space.
pub type Cutoff<'a, T> = &'a (dyn Fn(&[T]) -> T + Sync);

/// `1` on `[lo, hi]` per axis, `0` outside `[lo - width, hi + width]`.
pub fn plateau_cutoff<T: Real>(lo: Vec<T>, hi: Vec<T>, width: T) -> impl Fn(&[T]) -> T + Sync + Send {
    move |x: &[T]| {
        x.iter().enumerate().fold(T::one(), |acc, (a, &v)| {
            acc * smoothstep((v - lo[a] + width) / width) * smoothstep((hi[a] + width - v) / width)
        })
    }
}

/// Seeded wave packets `exp(-|x - x0|^2 / 2 s^2) e^{i k.x}` with
/// `h k` in `[-xi_max, xi_max]` per axis, rounded to grid wavenumbers.
#[derive(Clone, Debug, Serialize)]
pub struct TestFunctionPool<T> {
    pub seed: u64,
    pub count: usize,
    pub xi_max: T,
    pub width: (T, T),
    pub center_lo: Vec<T>,
    pub center_hi: Vec<T>,
}

#[derive(Clone, Debug)]
struct Packet<T> {
    center: Vec<T>,
    width: T,
    xi: Vec<T>,
}

impl<T: Real> TestFunctionPool<T> {
    fn packets(&self) -> Vec<Packet<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut uniform = |lo: T, hi: T| lo + (hi - lo) * T::lit(rng.gen::<f64>());
        (0..self.count)
            .map(|_| {
                let center = self.center_lo.iter().zip(&self.center_hi).map(|(l, h)| uniform(*l, *h)).collect();
                let width = uniform(self.width.0, self.width.1);
                let xi = self.center_lo.iter().map(|_| uniform(-self.xi_max, self.xi_max)).collect();
                Packet { center, width, xi }
            })
            .collect()
    }

    /// Smallest power-of-two grid per axis keeping every packet below
    /// 0.4 times the Nyquist mode.
    pub fn grid_for(&self, origin: &[T], lengths: &[T], h: T) -> Result<PeriodicGrid<T>> {
        let counts = lengths
            .iter()
            .map(|&len| {
                let k = self.xi_max / h + T::lit(10.0) / self.width.0;
                let modes = (k * len / T::TAU()).to_f64_lossy();
                let n = ((5.0 * modes).ceil() as usize + 1).next_power_of_two();
                if n > 1 << 15 {
                    Err(Error::Resolution(format!("{n} grid points per axis needed at h = {h}")))
                } else {
                    Ok(n.max(16))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        PeriodicGrid::new(origin.to_vec(), lengths.to_vec(), counts)
    }

    /// Samples every packet on `grid`; frequencies are rounded to the grid.
    pub fn sample(&self, grid: &PeriodicGrid<T>, h: T) -> Vec<Vec<Complex<T>>> {
        self.packets()
            .into_iter()
            .map(|p| {
                let k: Vec<T> = (0..grid.dim())
                    .map(|a| {
                        let unit = T::TAU() / grid.lengths[a];
                        (p.xi[a] / h / unit).round() * unit
                    })
                    .collect();
                grid.sample(|x| {
                    let mut r2 = T::zero();
                    let mut phase = T::zero();
                    for a in 0..x.len() {
                        let len = grid.lengths[a];
                        let mut d = x[a] - p.center[a];
                        d = d - (d / len).round() * len;
                        r2 += d * d;
                        phase += k[a] * x[a];
                    }
                    Complex::from_polar((-r2 / (T::lit(2.0) * p.width * p.width)).exp(), phase)
                })
            })
            .collect()
    }
}

/// Per-truncation result of [`residual_order_fit`].
#[derive(Clone, Debug, Serialize)]
pub struct ResidualFit<T> {
    pub truncation: usize,
    /// `(h, r(h))`.
    pub trace: Vec<(T, T)>,
    /// Roundoff level of each `r(h)`.
    pub floor: Vec<T>,
    /// Log-log slope over the points above the floor.
    pub slope: Option<T>,
    pub floor_limited: bool,
}

/// Periodic box on which residuals are measured.
#[derive(Clone, Debug, Serialize)]
pub struct PeriodicDomain<T> {
    pub origin: Vec<T>,
    pub lengths: Vec<T>,
}

/// Measures `r(h) = max_u |chi2 (Op(q) - Op(a_K) Op(xi_n - i B)) chi1 u| / |u|`
/// for every requested truncation `K <= fact.truncation()` and fits
/// `log r` against `log h`.
#[allow(clippy::too_many_arguments)]
pub fn residual_order_fit<T: Real>(
    fact: &FactorizationResult<T>,
    domain: &PeriodicDomain<T>,
    chi1: Cutoff<'_, T>,
    chi2: Cutoff<'_, T>,
    h_list: &[T],
    tests: &TestFunctionPool<T>,
    truncations: &[usize],
) -> Result<Vec<ResidualFit<T>>> {
    let kmax = fact.truncation();
    if let Some(&k) = truncations.iter().find(|&&k| k > kmax) {
        return Err(Error::Capability(format!("truncation {k} exceeds the computed order {kmax}")));
    }
    let n = fact.q().dim();
    if domain.origin.len() != n || domain.lengths.len() != n {
        return Err(Error::Domain("periodic domain dimension mismatch".into()));
    }
    let mut traces: Vec<Vec<(T, T)>> = vec![Vec::new(); truncations.len()];
    let mut floors: Vec<Vec<T>> = vec![Vec::new(); truncations.len()];
    for &h in h_list {
        if !(h > T::zero()) {
            return Err(Error::Domain(format!("h must be positive, got {h}")));
        }
        let grid = tests.grid_for(&domain.origin, &domain.lengths, h)?;
        let c1: Vec<T> = (0..grid.len()).map(|p| chi1(&grid.point(p))).collect();
        let c2: Vec<T> = (0..grid.len()).map(|p| chi2(&grid.point(p))).collect();
        let tiny = T::lit(1e-14);
        if c2.iter().zip(&c1).any(|(b, a)| *b > tiny && (*a - T::one()).abs() > T::lit(1e-12)) {
            return Err(Error::Precondition("chi2 is not supported where chi1 = 1".into()));
        }
        let support: Vec<usize> = (0..grid.len()).filter(|&p| c2[p] > tiny).collect();
        let mut worst = vec![T::zero(); truncations.len()];
        let mut floor = T::zero();
        for u in tests.sample(&grid, h) {
            let unorm = grid.norm(&u);
            let w: Vec<Complex<T>> = u.iter().zip(&c1).map(|(z, c)| *z * *c).collect();
            let qw = quantize_apply(fact.q(), &grid, &w, h)?;
            let b = fact.b.clone();
            let b_mom = b.dependence().1;
            let g = quantize_apply_with(&grid, &w, h, (true, true), |x, xi| {
                let pt = PhasePoint { y: x.to_vec(), xi: xi.to_vec() };
                let bv = if b_mom {
                    b.value(&pt, h)?
                } else {
                    b.value(&PhasePoint { y: x.to_vec(), xi: vec![T::zero(); xi.len()] }, h)?
                };
                Ok(Complex::new(xi[xi.len() - 1], T::zero()) - Complex::<T>::i() * bv)
            })?;
            let ag = apply_all_truncations(fact, &grid, &g, h, &support, kmax)?;
            let qmax = support.iter().fold(T::zero(), |m, &p| m.max(qw[p].norm()));
            let support_volume = T::from_usize_lossy(support.len()) * grid.cell_volume();
            floor = floor.max(T::lit(1e3) * T::epsilon() * qmax * support_volume.sqrt() / unorm);
            for (slot, &k) in truncations.iter().enumerate() {
                let mut r2 = T::zero();
                for (idx, &p) in support.iter().enumerate() {
                    let d = (qw[p] - ag[k][idx]) * c2[p];
                    r2 += d.norm_sqr();
                }
                let r = (r2 * grid.cell_volume()).sqrt() / unorm;
                worst[slot] = worst[slot].max(r);
            }
        }
        for slot in 0..truncations.len() {
            traces[slot].push((h, worst[slot]));
            floors[slot].push(floor);
        }
    }
    Ok(truncations
        .iter()
        .enumerate()
        .map(|(slot, &k)| {
            let usable: Vec<(T, T)> = traces[slot]
                .iter()
                .zip(&floors[slot])
                .filter(|((_, r), f)| *r > **f)
                .map(|((h, r), _)| (h.ln(), r.ln()))
                .collect();
            let slope = if usable.len() >= 2 {
                let (xs, ys): (Vec<T>, Vec<T>) = usable.into_iter().unzip();
                loglog_slope(&xs, &ys).ok()
            } else {
                None
            };
            ResidualFit {
                truncation: k,
                trace: traces[slot].clone(),
                floor: floors[slot].clone(),
                floor_limited: slope.is_none(),
                slope,
            }
        })
        .collect())
}

/// `Op(sum_{j <= K} h^j a_{-j}) g` on `support` for every `K <= kmax`;
/// the symbol terms are evaluated once per (point, mode).
fn apply_all_truncations<T: Real>(
    fact: &FactorizationResult<T>,
    grid: &PeriodicGrid<T>,
    g: &[Complex<T>],
    h: T,
    support: &[usize],
    kmax: usize,
) -> Result<Vec<Vec<Complex<T>>>> {
    let c = fourier_coefficients(grid, g);
    let cmax = c.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    let cut = cmax * T::epsilon() * T::lit(1e3);
    let modes: Vec<(Vec<T>, Complex<T>)> = c
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > cut)
        .map(|(flat, z)| {
            let k = grid
                .unflatten(flat)
                .iter()
                .enumerate()
                .map(|(a, &i)| grid.wavenumber(a, i))
                .collect();
            (k, *z)
        })
        .collect();
    let rows: Vec<Vec<Complex<T>>> = support
        .par_iter()
        .map(|&p| {
            let x = grid.point(p);
            let mut acc = vec![Complex::new(T::zero(), T::zero()); kmax + 1];
            for (k, z) in &modes {
                let xi: Vec<T> = k.iter().map(|v| *v * h).collect();
                let phase = k.iter().zip(&x).fold(T::zero(), |s, (k, x)| s + *k * *x);
                let wave = *z * Complex::from_polar(T::one(), phase);
                let terms = fact.term_values(&PhasePoint { y: x.clone(), xi }, h)?;
                let mut partial = Complex::new(T::zero(), T::zero());
                let mut hp = T::one();
                for (j, t) in terms.iter().enumerate() {
                    partial += *t * hp;
                    hp *= h;
                    acc[j] += partial * wave;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok((0..=kmax).map(|k| rows.iter().map(|r| r[k]).collect()).collect())
}
