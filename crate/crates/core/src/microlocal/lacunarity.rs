//! Empirical lacunarity constants: decay of `|chi_2 Q(h) chi_1 u_h|`.

use num_complex::Complex;
use serde::Serialize;

use super::support::SupportEstimate;
use crate::analysis::fit::decay_rate_fit;
use crate::carleman::smoothstep;
use crate::error::{Error, Result};
use crate::models::{Domain1D, EigenfunctionFamily};
use crate::real::Real;

type Applier<'a, T> = dyn Fn(&EigenfunctionFamily<T>, usize, &[Complex<T>]) -> Result<Vec<Complex<T>>> + Sync + 'a;

pub enum LacunaryOperator<'a, T> {
    Identity,
    /// `P(h)^{-1} (P(h) - E(h))` with the discretisation each entry was
    /// solved with; annihilates the eigenfunctions up to solver residuals.
    ResolventRatio,
    /// `(family, entry index, samples on the entry nodes) -> Q(h) samples`.
    Custom { name: String, apply: &'a Applier<'a, T> },
}

impl<T> LacunaryOperator<'_, T> {
    pub fn name(&self) -> String {
        match self {
            LacunaryOperator::Identity => "identity".into(),
            LacunaryOperator::ResolventRatio => "P^-1 (P - E)".into(),
            LacunaryOperator::Custom { name, .. } => name.clone(),
        }
    }
}

/// `1` within `plateau` of `center`, `0` beyond `plateau + transition`
/// (distance measured along the domain, both arcs on a circle).
pub fn arc_cutoff<T: Real>(domain: Domain1D<T>, center: T, plateau: T, transition: T) -> impl Fn(T) -> T + Send + Sync + Clone {
    move |x| smoothstep((plateau + transition - domain.distance(x, center)) / transition)
}

#[derive(Clone, Debug, Serialize)]
pub struct LacunarityFit<T> {
    pub operator: String,
    pub h: Vec<T>,
    /// `log |chi_2 Q chi_1 u_h|`, `None` at or below the floor. The identity
    /// is evaluated from the log-amplitudes and has no floor.
    pub log_norms: Vec<Option<T>>,
    pub floors: Vec<T>,
    /// Fitted `C` in `-h log n(h) = C + c h`.
    pub rate: Option<T>,
    /// `C_0 = e^{-c}`.
    pub prefactor: Option<T>,
    pub stderr: Option<T>,
    /// Fewer than three norms above the floor.
    pub floor_limited: bool,
    /// `min_h -h log max(n(h), floor(h))`: the exponent every sample attains.
    pub observed_exponent: T,
}

fn logsumexp<T: Real>(values: impl Iterator<Item = T>) -> T {
    let v: Vec<T> = values.filter(|x| x.is_finite()).collect();
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + v.iter().fold(T::zero(), |s, x| s + (*x - m).exp()).ln()
}

/// Fits `-h log |chi_2 Q(h) chi_1 u_h| = C + c h` over the family. Requires
/// `chi_1 = 1` on `supp chi_2` and `supp chi_1` disjoint from `K_hat`.
pub fn lacunarity_fit<T: Real>(
    op: &LacunaryOperator<'_, T>,
    fam: &EigenfunctionFamily<T>,
    chi1: &(dyn Fn(T) -> T + Sync),
    chi2: &(dyn Fn(T) -> T + Sync),
    k_hat: &SupportEstimate<T>,
) -> Result<LacunarityFit<T>> {
    for e in &fam.entries {
        for &x in &e.nodes {
            let (c1, c2) = (chi1(x), chi2(x));
            if c2 > T::zero() && (c1 - T::one()).abs() > T::lit(1e-12) {
                return Err(Error::Precondition(format!("chi_1 = {c1} at x = {x} inside supp chi_2")));
            }
            if c1 > T::zero() && k_hat.contains(x) {
                return Err(Error::Precondition(format!("supp chi_1 meets K_hat at x = {x}")));
            }
        }
    }
    let mut h = Vec::new();
    let mut log_norms = Vec::new();
    let mut floors = Vec::new();
    for (i, e) in fam.entries.iter().enumerate() {
        let floor = T::lit(1e3) * T::epsilon() * T::from_usize_lossy(e.nodes.len());
        let log_n = match op {
            LacunaryOperator::Identity => {
                let ls = logsumexp(e.nodes.iter().enumerate().map(|(j, &x)| {
                    T::lit(2.0) * (chi2(x).ln() + e.log_amplitude[j]) + e.weight[j].ln()
                }));
                Some((ls + e.dx.ln()) / T::lit(2.0))
            }
            _ => {
                let cut: Vec<Complex<T>> = e.nodes.iter().zip(&e.values).map(|(&x, v)| v * chi1(x)).collect();
                let q = match op {
                    LacunaryOperator::Custom { apply, .. } => apply(fam, i, &cut)?,
                    _ => resolvent_ratio(fam, i, &cut)?,
                };
                let n2 = e
                    .nodes
                    .iter()
                    .zip(&q)
                    .zip(&e.weight)
                    .fold(T::zero(), |s, ((&x, v), w)| s + (v * chi2(x)).norm_sqr() * *w)
                    * e.dx;
                let n = n2.sqrt();
                (n > floor).then(|| n.ln())
            }
        };
        h.push(e.h);
        floors.push(floor);
        log_norms.push(log_n);
    }
    let observed_exponent = h
        .iter()
        .zip(&log_norms)
        .zip(&floors)
        .map(|((&h, l), f)| -h * l.unwrap_or(f.ln()).max(f.ln()))
        .fold(T::infinity(), T::min);
    let fit = decay_rate_fit(&h, &log_norms, None).ok();
    Ok(LacunarityFit {
        operator: op.name(),
        floor_limited: fit.is_none(),
        rate: fit.as_ref().map(|f| f.rate),
        prefactor: fit.as_ref().map(|f| (-f.intercept).exp()),
        stderr: fit.as_ref().map(|f| f.stderr),
        h,
        log_norms,
        floors,
        observed_exponent,
    })
}

fn resolvent_ratio<T: Real>(fam: &EigenfunctionFamily<T>, index: usize, w: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let op = fam.entry_operator(index)?;
    let energy = fam.entries[index].energy;
    let part = |f: &dyn Fn(&Complex<T>) -> T| -> Result<Vec<T>> {
        let x: Vec<T> = op.disc.unknowns.iter().map(|&i| f(&w[i])).collect();
        let px = op.apply(&x);
        let y: Vec<T> = px.iter().zip(&x).map(|(p, v)| *p - energy * *v).collect();
        op.solve_shifted(T::zero(), &y)
    };
    let re = part(&|z| z.re)?;
    let im = part(&|z| z.im)?;
    let mut out = vec![Complex::new(T::zero(), T::zero()); w.len()];
    for (k, &i) in op.disc.unknowns.iter().enumerate() {
        out[i] = Complex::new(re[k], im[k]);
    }
    Ok(out)
}
