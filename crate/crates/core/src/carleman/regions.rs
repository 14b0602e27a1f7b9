//! Cutoffs and the control / black-box / transition regions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{smoothstep, CarlemanWeight};
use crate::error::{Error, Result};
use crate::real::Real;

/// `{ r_lo <= |y'| <= r_hi, n_lo <= y_n <= n_hi }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Region<T> {
    pub radial: (T, T),
    pub normal: (T, T),
}

impl<T: Real> Region<T> {
    pub fn contains(&self, y: &[T]) -> bool {
        let m = y.len() - 1;
        let r = y[..m].iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
        r >= self.radial.0 && r <= self.radial.1 && y[m] >= self.normal.0 && y[m] <= self.normal.1
    }
}

/// Geometric parameters of the partition.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PartitionParams<T> {
    pub tau_h: T,
    pub eps: T,
    pub c_y: T,
    pub tau_y: T,
    pub eps_y: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionPartition<T> {
    pub params: PartitionParams<T>,
    pub u_cn: Region<T>,
    pub u_bb: Region<T>,
    pub u_tr: Region<T>,
}

/// Checks `eps < min(eps_Y, tau_H/10)`, `eps_Y < min(tau_Y/10, c_Y/10)` and
/// `tau_H + 2 eps_Y < tau_Y`, then lays out the regions.
pub fn region_partition<T: Real>(p: PartitionParams<T>) -> Result<RegionPartition<T>> {
    let ten = T::lit(10.0);
    let two = T::lit(2.0);
    let mut failed = Vec::new();
    if !(p.eps > T::zero()) {
        failed.push(format!("eps > 0 (eps = {})", p.eps));
    }
    if !(p.eps < p.eps_y) {
        failed.push(format!("eps < eps_Y ({} vs {})", p.eps, p.eps_y));
    }
    if !(p.eps < p.tau_h / ten) {
        failed.push(format!("eps < tau_H/10 ({} vs {})", p.eps, p.tau_h / ten));
    }
    if !(p.eps_y < p.tau_y / ten) {
        failed.push(format!("eps_Y < tau_Y/10 ({} vs {})", p.eps_y, p.tau_y / ten));
    }
    if !(p.eps_y < p.c_y / ten) {
        failed.push(format!("eps_Y < c_Y/10 ({} vs {})", p.eps_y, p.c_y / ten));
    }
    if !(p.tau_h + two * p.eps_y < p.tau_y) {
        failed.push(format!(
            "tau_H + 2 eps_Y < tau_Y ({} vs {})",
            p.tau_h + two * p.eps_y,
            p.tau_y
        ));
    }
    if !failed.is_empty() {
        return Err(Error::Geometry(format!("violated: {}", failed.join("; "))));
    }
    let third = p.c_y / T::lit(3.0);
    Ok(RegionPartition {
        params: p,
        u_cn: Region {
            radial: (T::zero(), p.c_y),
            normal: (-two * p.eps, -p.eps),
        },
        u_bb: Region {
            radial: (T::zero(), p.c_y),
            normal: (p.tau_h - p.eps, p.tau_h + p.eps),
        },
        u_tr: Region {
            radial: (third, p.c_y),
            normal: (-two * p.eps, p.tau_h + p.eps),
        },
    })
}

impl<T: Real> RegionPartition<T> {
    pub fn in_u_tr_tilde(&self, y: &[T]) -> bool {
        self.u_tr.contains(y) && !self.u_bb.contains(y) && !self.u_cn.contains(y)
    }

    fn chi_y(&self, yn: T) -> T {
        let e = self.params.eps;
        smoothstep((yn + T::lit(1.9) * e) / (T::lit(0.8) * e))
    }

    fn chi_h(&self, yn: T) -> T {
        let e = self.params.eps;
        T::one() - smoothstep((yn - (self.params.tau_h - T::lit(0.9) * e)) / (T::lit(1.8) * e))
    }

    fn chi_tr(&self, r: T) -> T {
        let c = self.params.c_y;
        let third = c / T::lit(3.0);
        let margin = T::lit(0.05) * (c - third);
        T::one() - smoothstep((r - third - margin) / (c - third - T::lit(2.0) * margin))
    }

    /// `chi_eps = chi_Y(y_n) chi_H(y_n) chi_tr(y')`.
    pub fn chi_eps(&self, y: &[T]) -> T {
        let m = y.len() - 1;
        let r = y[..m].iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
        self.chi_y(y[m]) * self.chi_h(y[m]) * self.chi_tr(r)
    }

    pub fn chi_eps_gradient(&self, y: &[T]) -> Vec<T> {
        let mut q = y.to_vec();
        (0..y.len())
            .map(|k| {
                let s = T::lit(1e-4) * self.params.eps;
                q[k] = y[k] + s;
                let fp = self.chi_eps(&q);
                q[k] = y[k] - s;
                let fm = self.chi_eps(&q);
                q[k] = y[k];
                (fp - fm) / (T::lit(2.0) * s)
            })
            .collect()
    }

    /// Samples `count` random points in the chart and returns those where
    /// `grad chi_eps` is nonzero but the point lies outside
    /// `U~_tr ∪ U_bb ∪ U_cn`.
    pub fn gradient_support_violations(&self, n: usize, count: usize, seed: u64) -> Vec<Vec<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = self.params;
        let lo_n = (-T::lit(3.0) * p.eps).to_f64_lossy();
        let hi_n = (p.tau_h + T::lit(3.0) * p.eps).to_f64_lossy();
        let c = (p.c_y * T::lit(1.1)).to_f64_lossy();
        let mut bad = Vec::new();
        for _ in 0..count {
            let mut y: Vec<T> = (0..n - 1).map(|_| T::lit(rng.gen_range(-c..c))).collect();
            y.push(T::lit(rng.gen_range(lo_n..hi_n)));
            let g = self.chi_eps_gradient(&y);
            let gn = g.iter().fold(T::zero(), |s, v| s.max(v.abs()));
            if gn > T::lit(1e-12)
                && !(self.in_u_tr_tilde(&y) || self.u_bb.contains(&y) || self.u_cn.contains(&y))
            {
                bad.push(y);
            }
        }
        bad
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport<T> {
    /// `psi <= y_n` on `U_cn`.
    pub control: bool,
    /// `psi <= -9 eps` on `U~_tr`.
    pub transition: bool,
    /// `psi <= tau_H + eps` on `U_bb`.
    pub black_box: bool,
    pub worst_control: T,
    pub worst_transition: T,
    pub worst_black_box: T,
}

impl<T> EnvelopeReport<T> {
    pub fn all(&self) -> bool {
        self.control && self.transition && self.black_box
    }
}

/// Grid check of the three weight envelopes used in the proof chain.
/// Margins are reported as `max(psi - bound)` (nonpositive when the bound holds).
pub fn weight_envelope_report<T: Real>(
    w: &CarlemanWeight<T>,
    parts: &RegionPartition<T>,
    n: usize,
    per_axis: usize,
) -> Result<EnvelopeReport<T>> {
    if (w.beta - T::one()).abs() > T::epsilon() {
        return Err(Error::Precondition(format!(
            "envelope checks assume beta = 1, got {}",
            w.beta
        )));
    }
    let p = parts.params;
    let two = T::lit(2.0);
    let lo = [-p.c_y, -two * p.eps];
    let hi = [p.c_y, p.tau_h + two * p.eps];
    let mut worst = [T::neg_infinity(); 3];
    let m = n - 1;
    let total = per_axis.pow(n as u32);
    let step = |a: usize| (hi[a] - lo[a]) / T::from_usize_lossy(per_axis - 1);
    for flat in 0..total {
        let mut rem = flat;
        let mut y = vec![T::zero(); n];
        for k in (0..n).rev() {
            let i = rem % per_axis;
            rem /= per_axis;
            let axis = if k == m { 1 } else { 0 };
            y[k] = lo[axis] + step(axis) * T::from_usize_lossy(i);
        }
        let psi = w.psi(&y);
        if parts.u_cn.contains(&y) {
            worst[0] = worst[0].max(psi - y[m]);
        }
        if parts.in_u_tr_tilde(&y) {
            worst[1] = worst[1].max(psi + T::lit(9.0) * p.eps);
        }
        if parts.u_bb.contains(&y) {
            worst[2] = worst[2].max(psi - (p.tau_h + p.eps));
        }
    }
    let tol = T::epsilon() * T::lit(16.0);
    Ok(EnvelopeReport {
        control: worst[0] <= tol,
        transition: worst[1] <= tol,
        black_box: worst[2] <= tol,
        worst_control: worst[0],
        worst_transition: worst[1],
        worst_black_box: worst[2],
    })
}

/// Point of the Euclidean plane at chart coordinates `(y', y_n)` around a
/// circle of radius `r` centred at the origin, with `q_0 = (0, r)`.
pub fn circle_embedding<T: Real>(r: T, y: &[T]) -> [T; 2] {
    let ang = y[0] / r;
    [(r + y[1]) * ang.sin(), (r + y[1]) * ang.cos()]
}

/// Smallest `k` with `{|y_n - tau_H| < eps, |y'| <= 4 eps} ⊂ U_H(k eps)` for
/// the circle chart, where `H` is the line through `q_H = (0, r + tau_H)`
/// orthogonal to the normal geodesic.
pub fn ubb_inclusion_constant<T: Real>(r: T, tau_h: T, eps: T, samples: usize) -> T {
    let mut k = T::zero();
    let s = T::from_usize_lossy(samples - 1);
    for i in 0..samples {
        for j in 0..samples {
            let yt = T::lit(-4.0) * eps + T::lit(8.0) * eps * T::from_usize_lossy(i) / s;
            let yn = tau_h - eps + T::lit(2.0) * eps * T::from_usize_lossy(j) / s;
            let pt = circle_embedding(r, &[yt, yn]);
            k = k.max((pt[1] - (r + tau_h)).abs() / eps);
        }
    }
    k
}

/// Largest `c_0` with the Euclidean ball `B(q_0, c_0 eps)` inside the chart
/// ball `{|y| < eps/5}` for the circle chart.
pub fn control_ball_constant<T: Real>(r: T, eps: T, samples: usize) -> T {
    let rad = eps / T::lit(5.0);
    let q0 = circle_embedding(r, &[T::zero(), T::zero()]);
    let mut best = T::infinity();
    for i in 0..samples {
        let th = T::TAU() * T::from_usize_lossy(i) / T::from_usize_lossy(samples);
        let y = [rad * th.cos(), rad * th.sin()];
        let p = circle_embedding(r, &y);
        let d = ((p[0] - q0[0]).powi(2) + (p[1] - q0[1]).powi(2)).sqrt();
        best = best.min(d / eps);
    }
    best
}
