//! Characteristic-set bracket scans.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use super::model::{conjugated_symbol, CarlemanWeight, ConjugatedSymbol, GeodesicSphereModel};
use crate::error::{Error, Result};
use crate::phase_symbols::{real_imag_bracket_fd, PhaseGrid, PhasePoint};
use crate::real::Real;

/// One characteristic sample: the grid seed and its projection onto
/// `{p_psi = 0}`.
#[derive(Clone, Debug, Serialize)]
pub struct CharSample<T> {
    pub seed: PhasePoint<T>,
    pub seed_abs_p: T,
    pub seed_bracket: T,
    pub point: PhasePoint<T>,
    pub abs_p: T,
    pub bracket: T,
    pub projected: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BracketScan<T> {
    /// Minimum bracket over projected characteristic points.
    pub margin: Option<T>,
    pub witness: Option<PhasePoint<T>>,
    /// Minimum bracket over the unprojected grid seeds.
    pub raw_margin: Option<T>,
    pub raw_witness: Option<PhasePoint<T>>,
    pub char_tol: T,
    pub grid_points: usize,
    pub samples: Vec<CharSample<T>>,
}

impl<T: Real> BracketScan<T> {
    pub fn found_characteristic_points(&self) -> bool {
        self.margin.is_some()
    }

    /// Margin or an error when the sample is empty.
    pub fn require_margin(&self) -> Result<T> {
        self.margin
            .ok_or_else(|| Error::numerical("bracket-scan", "no char points found"))
    }
}

fn newton_project<T: Real>(
    sym: &ConjugatedSymbol<T>,
    y: &[T],
    grad: &[T],
    xi0: &[T],
) -> Option<(Vec<T>, Complex<T>)> {
    let n = xi0.len();
    let mut xi = xi0.to_vec();
    let f = |xi: &[T]| sym.eval_with_grad(y, xi, grad);
    let mut val = f(&xi);
    let tol = T::epsilon() * T::lit(64.0);
    for _ in 0..30 {
        if val.norm() <= tol * (T::one() + xi.iter().fold(T::zero(), |s, v| s + *v * *v)) {
            return Some((xi, val));
        }
        // columns d p / d xi_k
        let mut cols = Vec::with_capacity(n);
        for k in 0..n {
            let s = T::fd_step(xi[k]);
            let mut q = xi.clone();
            q[k] = xi[k] + s;
            let fp = f(&q);
            q[k] = xi[k] - s;
            let fm = f(&q);
            cols.push((fp - fm) / (T::lit(2.0) * s));
        }
        // minimum-norm solution of J d = -F with J the 2 x n real Jacobian
        let (mut g11, mut g12, mut g22) = (T::zero(), T::zero(), T::zero());
        for c in &cols {
            g11 += c.re * c.re;
            g12 += c.re * c.im;
            g22 += c.im * c.im;
        }
        let det = g11 * g22 - g12 * g12;
        let step: Vec<T> = if n >= 2 && det.abs() > T::epsilon() * (g11 * g22).max(T::min_positive_value()) {
            let (fr, fi) = (-val.re, -val.im);
            let l1 = (g22 * fr - g12 * fi) / det;
            let l2 = (-g12 * fr + g11 * fi) / det;
            cols.iter().map(|c| c.re * l1 + c.im * l2).collect()
        } else {
            let g = g11 + g22;
            if g <= T::min_positive_value() {
                return None;
            }
            cols.iter()
                .map(|c| -(c.re * val.re + c.im * val.im) / g)
                .collect()
        };
        for k in 0..n {
            xi[k] += step[k];
        }
        val = f(&xi);
    }
    if val.norm() <= T::epsilon().sqrt() {
        Some((xi, val))
    } else {
        None
    }
}

fn estimate_gradient_bound<T: Real>(sym: &ConjugatedSymbol<T>, grid: &PhaseGrid<T>) -> T {
    let total = grid.len();
    let stride = (total / 997).max(1);
    let mut best = T::zero();
    for flat in (0..total).step_by(stride) {
        let pt = grid.point(flat);
        let g = sym.weight.grad_psi(&pt.y);
        let n = pt.dim();
        let mut acc = T::zero();
        for k in 0..n {
            let s = T::fd_step(pt.xi[k]);
            let mut q = pt.xi.clone();
            q[k] += s;
            let fp = sym.eval_with_grad(&pt.y, &q, &g);
            q[k] = pt.xi[k] - s;
            let fm = sym.eval_with_grad(&pt.y, &q, &g);
            let d = (fp - fm).norm() / (T::lit(2.0) * s);
            acc += d * d;
        }
        best = best.max(acc.sqrt());
    }
    best
}

/// Default characteristic tolerance: ten momentum spacings times a sampled
/// bound on `|grad_xi p_psi|`.
pub fn default_char_tol<T: Real>(model: &GeodesicSphereModel<T>, w: &CarlemanWeight<T>, grid: &PhaseGrid<T>) -> T {
    let sym = conjugated_symbol(model, w);
    let n = grid.dim();
    let dxi = (n..2 * n).map(|a| grid.spacing(a)).fold(T::zero(), |m, v| m.max(v));
    T::lit(10.0) * dxi * estimate_gradient_bound(&sym, grid)
}

/// Minimum of `{Re p_psi, Im p_psi}` over the sampled characteristic set.
///
/// For each position node the momentum sub-grid is scanned for discrete
/// local minima of `|p_psi|` below `char_tol`; each such seed is projected
/// onto `{p_psi = 0}` by Gauss-Newton steps in momentum before the bracket
/// is evaluated.
pub fn bracket_margin<T: Real>(
    model: &GeodesicSphereModel<T>,
    w: &CarlemanWeight<T>,
    grid: &PhaseGrid<T>,
    char_tol: Option<T>,
) -> Result<BracketScan<T>> {
    if grid.is_empty() {
        return Err(Error::Domain("empty grid".into()));
    }
    let n = model.dim();
    if grid.dim() != n {
        return Err(Error::Domain(format!(
            "grid of dimension {} for a model of dimension {n}",
            grid.dim()
        )));
    }
    let sym = conjugated_symbol(model, w);
    let tol = char_tol.unwrap_or_else(|| default_char_tol(model, w, grid));
    let y_counts = &grid.counts[..n];
    let xi_counts = &grid.counts[n..];
    let ny: usize = y_counts.iter().product();
    let nxi: usize = xi_counts.iter().product();
    let xi_lo: Vec<T> = (n..2 * n).map(|a| grid.lo[a] - grid.spacing(a)).collect();
    let xi_hi: Vec<T> = (n..2 * n).map(|a| grid.hi[a] + grid.spacing(a)).collect();

    let unflatten = |mut flat: usize, counts: &[usize]| {
        let mut idx = vec![0usize; counts.len()];
        for a in (0..counts.len()).rev() {
            idx[a] = flat % counts[a];
            flat /= counts[a];
        }
        idx
    };

    let per_y: Vec<Vec<CharSample<T>>> = (0..ny)
        .into_par_iter()
        .map(|yflat| {
            let yi = unflatten(yflat, y_counts);
            let y: Vec<T> = yi.iter().enumerate().map(|(a, &i)| grid.node(a, i)).collect();
            let grad = w.grad_psi(&y);
            let mut vals = vec![T::zero(); nxi];
            let mut xi = vec![T::zero(); n];
            for (f, v) in vals.iter_mut().enumerate() {
                let xidx = unflatten(f, xi_counts);
                for k in 0..n {
                    xi[k] = grid.node(n + k, xidx[k]);
                }
                *v = sym.eval_with_grad(&y, &xi, &grad).norm();
            }
            let mut out = Vec::new();
            for f in 0..nxi {
                let v = vals[f];
                if !(v < tol) {
                    continue;
                }
                let xidx = unflatten(f, xi_counts);
                let mut is_min = true;
                // compare against the 3^n - 1 neighbours
                let nb = 3usize.pow(n as u32);
                'nbr: for code in 0..nb {
                    let mut c = code;
                    let mut flat = 0usize;
                    let mut center = true;
                    for k in 0..n {
                        let off = (c % 3) as isize - 1;
                        c /= 3;
                        if off != 0 {
                            center = false;
                        }
                        let j = xidx[k] as isize + off;
                        if j < 0 || j >= xi_counts[k] as isize {
                            continue 'nbr;
                        }
                        flat = flat * xi_counts[k] + j as usize;
                    }
                    if center {
                        continue;
                    }
                    let u = vals[flat];
                    if u < v || (u == v && flat < f) {
                        is_min = false;
                        break;
                    }
                }
                if !is_min {
                    continue;
                }
                let seed_xi: Vec<T> = (0..n).map(|k| grid.node(n + k, xidx[k])).collect();
                let seed = PhasePoint { y: y.clone(), xi: seed_xi.clone() };
                let p = |q: &PhasePoint<T>| sym.eval(q);
                let seed_bracket = match real_imag_bracket_fd(&p, &seed) {
                    Ok(b) => b,
                    Err(_) => continue,
                };
                let proj = newton_project(&sym, &y, &grad, &seed_xi).filter(|(x, _)| {
                    x.iter()
                        .enumerate()
                        .all(|(k, v)| *v >= xi_lo[k] && *v <= xi_hi[k])
                });
                let sample = match proj {
                    Some((pxi, val)) => {
                        let point = PhasePoint { y: y.clone(), xi: pxi };
                        match real_imag_bracket_fd(&p, &point) {
                            Ok(b) => CharSample {
                                seed,
                                seed_abs_p: v,
                                seed_bracket,
                                point,
                                abs_p: val.norm(),
                                bracket: b,
                                projected: true,
                            },
                            Err(_) => continue,
                        }
                    }
                    None => CharSample {
                        seed: seed.clone(),
                        seed_abs_p: v,
                        seed_bracket,
                        point: seed,
                        abs_p: v,
                        bracket: seed_bracket,
                        projected: false,
                    },
                };
                out.push(sample);
            }
            out
        })
        .collect();

    let samples: Vec<CharSample<T>> = per_y.into_iter().flatten().collect();
    let mut margin: Option<(T, PhasePoint<T>)> = None;
    let mut raw: Option<(T, PhasePoint<T>)> = None;
    for s in &samples {
        if raw.as_ref().map(|(m, _)| s.seed_bracket < *m).unwrap_or(true) {
            raw = Some((s.seed_bracket, s.seed.clone()));
        }
        if s.projected && margin.as_ref().map(|(m, _)| s.bracket < *m).unwrap_or(true) {
            margin = Some((s.bracket, s.point.clone()));
        }
    }
    Ok(BracketScan {
        margin: margin.as_ref().map(|m| m.0),
        witness: margin.map(|m| m.1),
        raw_margin: raw.as_ref().map(|m| m.0),
        raw_witness: raw.map(|m| m.1),
        char_tol: tol,
        grid_points: grid.len(),
        samples,
    })
}

/// Momentum box and resolution for scans over the chart `W_Y(tau, eps)`.
#[derive(Clone, Debug, Serialize)]
pub struct ScanSpec<T> {
    pub xi_lo: Vec<T>,
    pub xi_hi: Vec<T>,
    pub y_counts: Vec<usize>,
    pub xi_counts: Vec<usize>,
}

impl<T: Real> ScanSpec<T> {
    pub fn uniform(n: usize, xi_radius: T, per_axis: usize) -> Self {
        Self {
            xi_lo: vec![-xi_radius; n],
            xi_hi: vec![xi_radius; n],
            y_counts: vec![per_axis; n],
            xi_counts: vec![per_axis; n],
        }
    }

    /// Grid over `|y'_k| <= c_Y`, `-2 eps <= y_n <= tau + 2 eps`.
    pub fn grid(&self, w: &CarlemanWeight<T>) -> Result<PhaseGrid<T>> {
        let n = self.xi_lo.len();
        let two = T::lit(2.0);
        let mut lo = vec![-w.c_y; n - 1];
        let mut hi = vec![w.c_y; n - 1];
        lo.push(-two * w.eps);
        hi.push(w.tau + two * w.eps);
        lo.extend(self.xi_lo.iter().copied());
        hi.extend(self.xi_hi.iter().copied());
        let mut counts = self.y_counts.clone();
        counts.extend(self.xi_counts.iter().copied());
        PhaseGrid::new(lo, hi, counts)
    }
}

/// Weights `beta y_n + 2 tau rho_eps` with `eps = eps_ratio * tau`.
#[derive(Clone, Debug, Serialize)]
pub struct WeightFamily<T> {
    pub beta: T,
    pub c_y: T,
    pub eps_ratio: T,
}

impl<T: Real> WeightFamily<T> {
    pub fn weight(&self, tau: T) -> Result<CarlemanWeight<T>> {
        CarlemanWeight::new(tau, self.eps_ratio * tau, self.c_y, self.beta)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TauEstimate<T> {
    pub tau_y: T,
    /// Tested `(tau, margin)` pairs in the order evaluated.
    pub trace: Vec<(T, Option<T>)>,
    /// Whether the margins along increasing tested `tau` are non-increasing.
    pub monotone: bool,
}

/// Largest tested `tau` with positive bracket margin, found by doubling
/// from `tau_min` and then bisecting.
pub fn max_tau_estimate<T: Real>(
    model: &GeodesicSphereModel<T>,
    family: &WeightFamily<T>,
    spec: &ScanSpec<T>,
    tau_min: T,
    tau_cap: T,
    bisections: usize,
) -> Result<TauEstimate<T>> {
    let mut trace: Vec<(T, Option<T>)> = Vec::new();
    let eval = |tau: T, trace: &mut Vec<(T, Option<T>)>| -> Result<bool> {
        let w = family.weight(tau)?;
        let grid = spec.grid(&w)?;
        let scan = bracket_margin(model, &w, &grid, None)?;
        trace.push((tau, scan.margin));
        Ok(scan.margin.map(|m| m > T::zero()).unwrap_or(false))
    };
    if !eval(tau_min, &mut trace)? {
        return Err(Error::Inadmissible(format!(
            "bracket margin {:?} is not positive at tau = {tau_min}",
            trace[0].1
        )));
    }
    let two = T::lit(2.0);
    let mut good = tau_min;
    let mut bad: Option<T> = None;
    let mut tau = tau_min;
    while bad.is_none() {
        tau = (tau * two).min(tau_cap);
        if eval(tau, &mut trace)? {
            good = tau;
            if tau >= tau_cap {
                break;
            }
        } else {
            bad = Some(tau);
        }
    }
    if let Some(mut hi) = bad {
        for _ in 0..bisections {
            let mid = (good + hi) / two;
            if eval(mid, &mut trace)? {
                good = mid;
            } else {
                hi = mid;
            }
        }
    }
    let mut sorted: Vec<(T, T)> = trace
        .iter()
        .map(|(t, m)| (*t, m.unwrap_or(T::neg_infinity())))
        .collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let monotone = sorted.windows(2).all(|p| p[1].1 <= p[0].1 + T::lit(1e-9));
    Ok(TauEstimate {
        tau_y: good,
        trace,
        monotone,
    })
}
