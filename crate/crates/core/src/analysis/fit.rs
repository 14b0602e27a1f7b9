//! Least-squares fits: decay rates, log-log slopes and extrapolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::real::Real;

/// Fit of `-h log N(h) = rate + slope_h * h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit<T> {
    pub rate: T,
    /// Coefficient of the linear-in-`h` nuisance term.
    pub intercept: T,
    pub stderr: T,
    pub residual_rms: T,
    pub points: usize,
}

/// Weighted least squares of `y(h) = -h log N(h)` against `r + c h`.
///
/// `log_values[i]` is `log N(h_i)`; `None` marks floor-limited entries,
/// which are excluded.
pub fn decay_rate_fit<T: Real>(h: &[T], log_values: &[Option<T>], weights: Option<&[T]>) -> Result<RateFit<T>> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (i, (hv, lv)) in h.iter().zip(log_values).enumerate() {
        if let Some(l) = lv {
            if l.is_finite() {
                xs.push(*hv);
                ys.push(-*hv * *l);
                ws.push(weights.map(|w| w[i]).unwrap_or(T::one()));
            }
        }
    }
    linear_fit(&xs, &ys, Some(&ws)).map(|(a, b, se, rms)| RateFit {
        rate: a,
        intercept: b,
        stderr: se,
        residual_rms: rms,
        points: xs.len(),
    })
}

/// `y = a + b x`; returns `(a, b, stderr(a), residual rms)`.
pub fn linear_fit<T: Real>(xs: &[T], ys: &[T], weights: Option<&[T]>) -> Result<(T, T, T, T)> {
    if xs.len() < 3 {
        return Err(Error::FloorLimited(format!(
            "{} usable points; at least 3 are needed for a fit",
            xs.len()
        )));
    }
    let design: Vec<Vec<T>> = xs.iter().map(|&x| vec![T::one(), x]).collect();
    let (coef, cov) = least_squares(&design, ys, weights)?;
    let n = xs.len();
    let mut ss = T::zero();
    let mut wsum = T::zero();
    for i in 0..n {
        let w = weights.map(|w| w[i]).unwrap_or(T::one());
        let r = ys[i] - coef[0] - coef[1] * xs[i];
        ss += w * r * r;
        wsum += w;
    }
    let dof = T::from_usize_lossy(n - 2);
    let sigma2 = ss / dof;
    let stderr = (sigma2 * cov[0][0]).max(T::zero()).sqrt();
    let rms = (ss / wsum).sqrt();
    Ok((coef[0], coef[1], stderr, rms))
}

/// Least-squares slope of `ys` against `xs` (two or more points).
pub fn loglog_slope<T: Real>(xs: &[T], ys: &[T]) -> Result<T> {
    if xs.len() < 2 {
        return Err(Error::FloorLimited("slope needs two points".into()));
    }
    let n = T::from_usize_lossy(xs.len());
    let mx = xs.iter().fold(T::zero(), |s, v| s + *v) / n;
    let my = ys.iter().fold(T::zero(), |s, v| s + *v) / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (x, y) in xs.iter().zip(ys) {
        sxy += (*x - mx) * (*y - my);
        sxx += (*x - mx) * (*x - mx);
    }
    if sxx <= T::zero() {
        return Err(Error::numerical("slope-fit", "degenerate abscissae"));
    }
    Ok(sxy / sxx)
}

/// Richardson extrapolation of `values(h)` to `h = 0` by Neville's scheme
/// on the polynomial in `h`; returns `(estimate, error estimate)` where the
/// error is the change between the two highest-order estimates.
pub fn richardson_to_zero<T: Real>(h: &[T], values: &[T]) -> Result<(T, T)> {
    let n = h.len();
    if n == 0 || n != values.len() {
        return Err(Error::Domain("extrapolation needs matching nonempty data".into()));
    }
    if n == 1 {
        return Ok((values[0], T::infinity()));
    }
    let mut p = values.to_vec();
    let mut prev_top = p[n - 1];
    let mut top = p[n - 1];
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (h[i + k] * p[i] - h[i] * p[i + 1]) / (h[i + k] - h[i]);
        }
        prev_top = top;
        top = p[0];
    }
    Ok((top, (top - prev_top).abs()))
}
