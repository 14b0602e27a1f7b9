//! Smallest singular value of the discretized conjugated operator.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{CarlemanWeight, GeodesicSphereModel};
use crate::error::{Error, Result};
use crate::linalg::{dot, jacobi_eigh, BandMatrix};
use crate::real::Real;

#[derive(Clone, Debug, Serialize)]
pub struct SigmaPoint<T> {
    pub h: T,
    pub sigma_min: T,
    /// `2 pi h / max(dy', dy_n)`.
    pub points_per_wavelength: T,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaStudy<T> {
    pub points: Vec<SigmaPoint<T>>,
    /// Least-squares slope of `log sigma_min` against `log h`.
    pub slope: T,
}

/// Interior grid `(n_tan, n_normal)` on `W_Y(tau, eps)`:
/// `|y'| < c_Y`, `-2 eps < y_n < tau + 2 eps`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SigmaGrid {
    pub n_tan: usize,
    pub n_normal: usize,
}

const MIN_POINTS_PER_WAVELENGTH: f64 = 8.0;

/// Discretized conjugated operator acting on grid functions that vanish on
/// the boundary ring. Rows at interior nodes form `interior`; rows at ring
/// nodes only see one interior neighbour and are kept as `(column, value)`.
#[derive(Clone, Debug)]
pub struct ConjugatedOperator<T> {
    pub interior: BandMatrix<T>,
    pub ring: Vec<(usize, T)>,
    pub points_per_wavelength: T,
}

impl<T: Real> ConjugatedOperator<T> {
    /// `A^T A` for the stacked operator `[interior; ring]`.
    pub fn normal_matrix(&self) -> BandMatrix<T> {
        let a = &self.interior;
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let bw = kl + ku;
        let mut out = BandMatrix::zeros(n, bw, bw);
        let mut entries = Vec::with_capacity(8);
        for row in 0..n {
            let lo = row.saturating_sub(kl);
            let hi = (row + ku).min(n - 1);
            entries.clear();
            entries.extend((lo..=hi).map(|c| (c, a.get(row, c))).filter(|e| e.1 != T::zero()));
            for &(i, ai) in &entries {
                for &(j, aj) in &entries {
                    out.add(i, j, ai * aj);
                }
            }
        }
        for &(col, v) in &self.ring {
            out.add(col, col, v * v);
        }
        out
    }
}

/// Assembles `e^{psi/h} P(h) e^{-psi/h}` with `P = -h^2 d_n^2 - h^2 d'(G d') + V - E`,
/// second-order centred differences, on grid functions supported strictly
/// inside the box. The conjugation is the exact diagonal similarity of the
/// discrete operator.
pub fn assemble_conjugated<T: Real>(
    model: &GeodesicSphereModel<T>,
    w: &CarlemanWeight<T>,
    h: T,
    grid: SigmaGrid,
) -> Result<ConjugatedOperator<T>> {
    if model.dim() != 2 {
        return Err(Error::Domain("sigma_min discretization is two-dimensional only".into()));
    }
    let two = T::lit(2.0);
    let (nt, nn) = (grid.n_tan, grid.n_normal);
    let lo_t = -w.c_y;
    let lo_n = -two * w.eps;
    let dt = two * w.c_y / T::from_usize_lossy(nt + 1);
    let dn = (w.tau + T::lit(4.0) * w.eps) / T::from_usize_lossy(nn + 1);
    let ppw = T::TAU() * h / dt.max(dn);
    if ppw < T::lit(MIN_POINTS_PER_WAVELENGTH) {
        return Err(Error::Resolution(format!(
            "{ppw:.2} points per wavelength at h = {h} (spacings {dt:.3e}, {dn:.3e}); need {MIN_POINTS_PER_WAVELENGTH}"
        )));
    }
    let one = Complex::new(T::one(), T::zero());
    let g = |yt: T, yn: T| model.tangential(&[yt, yn], &[one]).re;
    // node coordinates, with index 0 and n + 1 on the boundary ring
    let yt = |i: isize| lo_t + dt * T::lit((i + 1) as f64);
    let yn = |j: isize| lo_n + dn * T::lit((j + 1) as f64);
    let normal_fast = nn <= nt;
    let idx = |i: usize, j: usize| if normal_fast { i * nn + j } else { j * nt + i };
    let band = if normal_fast { nn } else { nt };
    let n = nt * nn;
    let mut a = BandMatrix::zeros(n, band, band);
    let mut ring = Vec::new();
    let h2 = h * h;
    let psi = |i: isize, j: isize| w.psi(&[yt(i), yn(j)]);
    let half = T::lit(0.5);
    for i in 0..nt as isize {
        for j in 0..nn as isize {
            let p = idx(i as usize, j as usize);
            let y = [yt(i), yn(j)];
            let gp = g(yt(i) + half * dt, yn(j));
            let gm = g(yt(i) - half * dt, yn(j));
            let diag = h2 * (gp + gm) / (dt * dt) + two * h2 / (dn * dn) + model.potential(&y) - model.energy();
            a.add(p, p, diag);
            let psi_p = psi(i, j);
            let neighbours = [
                (i - 1, j, -h2 * gm / (dt * dt)),
                (i + 1, j, -h2 * gp / (dt * dt)),
                (i, j - 1, -h2 / (dn * dn)),
                (i, j + 1, -h2 / (dn * dn)),
            ];
            for (qi, qj, val) in neighbours {
                let psi_q = psi(qi, qj);
                let inside = qi >= 0 && qj >= 0 && (qi as usize) < nt && (qj as usize) < nn;
                if inside {
                    // row p, column q
                    a.add(p, idx(qi as usize, qj as usize), val * ((psi_p - psi_q) / h).exp());
                } else {
                    // row at the ring node q, column p
                    ring.push((p, val * ((psi_q - psi_p) / h).exp()));
                }
            }
        }
    }
    Ok(ConjugatedOperator {
        interior: a,
        ring,
        points_per_wavelength: ppw,
    })
}

fn tridiagonal_top<T: Real>(alpha: &[T], beta: &[T]) -> T {
    let k = alpha.len();
    let mut m = vec![vec![T::zero(); k]; k];
    for i in 0..k {
        m[i][i] = alpha[i];
        if i + 1 < k {
            m[i][i + 1] = beta[i];
            m[i + 1][i] = beta[i];
        }
    }
    let (vals, _) = jacobi_eigh(&m);
    vals.into_iter().fold(T::neg_infinity(), T::max)
}

/// Smallest singular value `sqrt(lambda_min(N))` of an operator with normal
/// matrix `N`, by Lanczos on `N^{-1}` with full reorthogonalization.
pub fn smallest_singular_value<T: Real>(normal: BandMatrix<T>, seed: u64, max_iter: usize) -> Result<(T, usize)> {
    let n = normal.dim();
    let lu = normal.factor()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    let nrm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= nrm);
    let mut basis = vec![q];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut last = T::zero();
    let steps = max_iter.min(n);
    for it in 1..=steps {
        let mut w = basis[it - 1].clone();
        lu.solve(&mut w);
        alpha.push(dot(&w, &basis[it - 1]));
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * *y);
            }
        }
        let top = tridiagonal_top(&alpha, &beta);
        if !(top > T::zero()) || !top.is_finite() {
            return Err(Error::numerical("sigma_min", "Lanczos produced no positive Ritz value"));
        }
        if it > 3 && ((top - last) / top).abs() < T::lit(1e-12) {
            return Ok((T::one() / top.sqrt(), it));
        }
        last = top;
        let b = dot(&w, &w).sqrt();
        if b <= top * T::epsilon() {
            return Ok((T::one() / top.sqrt(), it));
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    }
    Ok((T::one() / last.sqrt(), steps))
}

pub fn discrete_carleman_sigma_min<T: Real>(
    model: &GeodesicSphereModel<T>,
    w: &CarlemanWeight<T>,
    h_list: &[T],
    grid: SigmaGrid,
    seed: u64,
) -> Result<SigmaStudy<T>> {
    let mut points = Vec::new();
    for &h in h_list {
        let op = assemble_conjugated(model, w, h, grid)?;
        let ppw = op.points_per_wavelength;
        let (sigma_min, iterations) = smallest_singular_value(op.normal_matrix(), seed, 400)?;
        points.push(SigmaPoint {
            h,
            sigma_min,
            points_per_wavelength: ppw,
            iterations,
        });
    }
    let xs: Vec<T> = points.iter().map(|p| p.h.ln()).collect();
    let ys: Vec<T> = points.iter().map(|p| p.sigma_min.ln()).collect();
    let slope = crate::analysis::fit::loglog_slope(&xs, &ys)?;
    Ok(SigmaStudy { points, slope })
}
