//! Symbol-level factorization `q ~ a # (xi_n - i B)` and left parametrices.

use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase_symbols::field::{embed, multi_factorial, multi_indices, DerivedField, FieldRef};
use crate::phase_symbols::jet::{Jet, JetSpace};
use crate::phase_symbols::{ellipticity_margin, sharp_coefficient, PhaseGrid, PhasePoint, SymbolExpansion};
use crate::real::Real;

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `i^l`.
fn ipow<T: Real>(l: usize) -> Complex<T> {
    match l % 4 {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), -T::one()),
    }
}

/// `(-i)^l`.
fn neg_ipow<T: Real>(l: usize) -> Complex<T> {
    ipow::<T>(l).conj()
}

/// Jets of `a_0, ..., a_{-m}` at `pt`, where `a_{-j}` has order `r + m - j`.
fn factor_jets<T: Real>(
    q: &[FieldRef<T>],
    b: &FieldRef<T>,
    pt: &PhasePoint<T>,
    h: T,
    m: usize,
    r: usize,
) -> Result<Vec<Jet<T>>> {
    let n = pt.dim();
    let top = r + m;
    let space = JetSpace::get(2 * n, top);
    let bj = b.jet(pt, h, top)?;
    let xi_n = Jet::variable(&space, top, 2 * n - 1, pt.xi[n - 1]);
    let denom = &xi_n - &bj.scale(Complex::new(T::zero(), T::one()));
    let inv = denom.recip();
    let mut a: Vec<Jet<T>> = Vec::with_capacity(m + 1);
    a.push(&q[0].jet(pt, h, top)? * &inv);
    for step in 1..=m {
        let ord = top - step;
        let mut acc = match q.get(step) {
            Some(t) => t.jet(pt, h, ord)?,
            None => Jet::constant(&space, ord, czero()),
        };
        for l in 1..=step {
            let coef = Complex::new(T::zero(), T::one()) * neg_ipow::<T>(l);
            for alpha in multi_indices(n, l) {
                let w = coef / T::lit(multi_factorial(&alpha));
                let da = a[step - l].derivative_multi(&embed(&alpha, true)).truncate(ord);
                let db = bj.derivative_multi(&embed(&alpha, false)).truncate(ord);
                acc = &acc + &da.mul_jet(&db).scale(w);
            }
        }
        a.push(acc.truncate(ord).mul_jet(&inv.truncate(ord)));
    }
    Ok(a)
}

/// Output of [`factor_symbols`].
#[derive(Clone)]
pub struct FactorizationResult<T: Real> {
    /// `a_0, a_{-1}, ..., a_{-K}` as an order-0 expansion in powers of `h`.
    pub a: SymbolExpansion<T>,
    pub b: FieldRef<T>,
    /// Smallest sampled value of `B`.
    pub c0: T,
    /// `(h, residual)` pairs filled in by residual fits.
    pub residual_trace: Vec<(T, T)>,
    q: SymbolExpansion<T>,
}

impl<T: Real> std::fmt::Debug for FactorizationResult<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FactorizationResult")
            .field("terms", &self.a.truncation())
            .field("b", &self.b.describe())
            .field("c0", &self.c0)
            .finish()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationSummary {
    pub q: Vec<String>,
    pub b: String,
    pub truncation: usize,
    pub c0: f64,
    pub residual_trace: Vec<(f64, f64)>,
}

impl<T: Real> FactorizationResult<T> {
    pub fn truncation(&self) -> usize {
        self.a.truncation()
    }

    pub fn q(&self) -> &SymbolExpansion<T> {
        &self.q
    }

    /// Values `a_0(pt), ..., a_{-K}(pt)` in one recursive pass.
    pub fn term_values(&self, pt: &PhasePoint<T>, h: T) -> Result<Vec<Complex<T>>> {
        Ok(factor_jets(self.q.terms(), &self.b, pt, h, self.truncation(), 0)?
            .iter()
            .map(|j| j.value())
            .collect())
    }

    /// `max_m |(a # (xi_n - i B))_m - q_{-m}| / max(1, |q_{-m}|)` over
    /// `m <= K`, with the composition evaluated independently of the recursion.
    pub fn recursion_residual(&self, pt: &PhasePoint<T>, h: T) -> Result<T> {
        let k = self.truncation();
        let n = pt.dim();
        let a = factor_jets(self.q.terms(), &self.b, pt, h, k, k)?;
        let space = JetSpace::get(2 * n, 2 * k);
        let bj = self.b.jet(pt, h, 2 * k)?;
        let xi_n = Jet::variable(&space, 2 * k, 2 * n - 1, pt.xi[n - 1]);
        let sym = &xi_n - &bj.scale(Complex::new(T::zero(), T::one()));
        let mut worst = T::zero();
        for m in 0..=k {
            let comp = sharp_coefficient(&a, std::slice::from_ref(&sym), m, 0, n).value();
            let qm = match self.q.term(m) {
                Some(t) => t.value(pt, h)?,
                None => czero(),
            };
            worst = worst.max((comp - qm).norm() / qm.norm().max(T::one()));
        }
        Ok(worst)
    }

    pub fn summary(&self) -> FactorizationSummary {
        FactorizationSummary {
            q: self.q.terms().iter().map(|t| t.describe()).collect(),
            b: self.b.describe(),
            truncation: self.truncation(),
            c0: self.c0.to_f64_lossy(),
            residual_trace: self
                .residual_trace
                .iter()
                .map(|(h, r)| (h.to_f64_lossy(), r.to_f64_lossy()))
                .collect(),
        }
    }
}

/// Builds `a_0 = q_0 / (xi_n - i B)` and the corrections `a_{-m}`,
/// `1 <= m <= K`, from the recursion
/// `a_{-m} = (xi_n - i B)^{-1} (q_{-m} + i sum_{l=1}^{m} (-i)^l sum_{|alpha|=l} d_xi^alpha a_{l-m} d_x^alpha B / alpha!)`.
///
/// `sample` is used to check that `B` is real, tangential and bounded below.
pub fn factor_symbols<T: Real>(
    q: &SymbolExpansion<T>,
    b: FieldRef<T>,
    k: usize,
    sample: &PhaseGrid<T>,
) -> Result<FactorizationResult<T>> {
    let n = q.dim();
    if b.dim() != n || sample.dim() != n {
        return Err(Error::Domain("q, B and the sample grid must share a dimension".into()));
    }
    if sample.is_empty() {
        return Err(Error::Domain("empty sample grid".into()));
    }
    let need = k;
    if b.max_order() < need {
        return Err(Error::Capability(format!(
            "B provides derivatives up to order {}, truncation {k} needs {need}",
            b.max_order()
        )));
    }
    if q.available_order() < need {
        return Err(Error::Capability(format!(
            "q provides derivatives up to order {}, truncation {k} needs {need}",
            q.available_order()
        )));
    }
    let h = T::one();
    let mut c0 = T::infinity();
    for flat in 0..sample.len() {
        let pt = sample.point(flat);
        let bv = b.value(&pt, h)?;
        if bv.im.abs() > T::lit(1e-12) * bv.re.abs().max(T::one()) {
            return Err(Error::Domain(format!("B is not real at {pt:?}: {bv}")));
        }
        c0 = c0.min(bv.re);
        if b.max_order() >= 1 && b.dependence().1 {
            let dj = b.jet(&pt, h, 1)?;
            let mut alpha = vec![0u8; 2 * n];
            alpha[2 * n - 1] = 1;
            let d = dj.partial(&alpha).unwrap_or(czero());
            if d.norm() > T::lit(1e-10) * bv.norm().max(T::one()) {
                return Err(Error::Domain(format!("B depends on xi_n at {pt:?}")));
            }
        }
    }
    if !(c0 > T::zero()) {
        return Err(Error::Ellipticity(format!("B is not bounded below by a positive constant: min B = {c0}")));
    }
    let q_terms: Arc<Vec<FieldRef<T>>> = Arc::new(q.terms().to_vec());
    let avail = b.max_order().min(q.available_order());
    let mut terms: Vec<FieldRef<T>> = Vec::with_capacity(k + 1);
    for m in 0..=k {
        let qt = q_terms.clone();
        let bb = b.clone();
        terms.push(Arc::new(DerivedField::new(
            n,
            avail.saturating_sub(m),
            format!("a_-{m}"),
            move |pt, h, r| Ok(factor_jets(&qt, &bb, pt, h, m, r)?.pop().expect("m + 1 jets")),
        )));
    }
    let mut a = SymbolExpansion::new(0, terms)?;
    if let Some(region) = q.region() {
        a = a.with_region(region.clone())?;
    }
    Ok(FactorizationResult {
        a,
        b,
        c0,
        residual_trace: Vec::new(),
        q: q.clone(),
    })
}

/// Jets of `l_0, ..., l_{-m}` with `l_{-j}` of order `r + m - j`.
fn parametrix_jets<T: Real>(a: &[FieldRef<T>], pt: &PhasePoint<T>, h: T, m: usize, r: usize) -> Result<Vec<Jet<T>>> {
    let n = pt.dim();
    let top = r + m;
    let space = JetSpace::get(2 * n, top);
    let a_jets: Vec<Jet<T>> = (0..=m)
        .map(|j| match a.get(j) {
            Some(t) => t.jet(pt, h, top),
            None => Ok(Jet::constant(&space, top, czero())),
        })
        .collect::<Result<_>>()?;
    let inv = a_jets[0].recip();
    let mut l = vec![inv.clone()];
    for j in 1..=m {
        let ord = top - j;
        let mut partial = l.clone();
        partial.push(Jet::constant(&space, ord, czero()));
        let acc = sharp_coefficient(&partial, &a_jets, j, ord, n);
        l.push(acc.mul_jet(&inv.truncate(ord)).scale(-Complex::new(T::one(), T::zero())));
    }
    Ok(l)
}

/// Symbol `l ~ sum h^j l_{-j}` with `l # a = 1 + O(h^{K+1})`.
pub fn left_parametrix<T: Real>(
    a: &SymbolExpansion<T>,
    k: usize,
    sample: &PhaseGrid<T>,
) -> Result<SymbolExpansion<T>> {
    if a.available_order() < k {
        return Err(Error::Capability(format!(
            "parametrix to order {k} needs derivatives of order {k}, only {} available",
            a.available_order()
        )));
    }
    let margin = ellipticity_margin(a, sample, T::zero())?;
    if !(margin.margin > T::lit(1e-12)) {
        return Err(Error::Ellipticity(format!(
            "principal symbol vanishes (margin {}) at {:?}",
            margin.margin, margin.witness
        )));
    }
    let n = a.dim();
    let a_terms: Arc<Vec<FieldRef<T>>> = Arc::new(a.terms().to_vec());
    let avail = a.available_order();
    let mut terms: Vec<FieldRef<T>> = Vec::with_capacity(k + 1);
    for m in 0..=k {
        let at = a_terms.clone();
        terms.push(Arc::new(DerivedField::new(
            n,
            avail.saturating_sub(m),
            format!("l_-{m}"),
            move |pt, h, r| Ok(parametrix_jets(&at, pt, h, m, r)?.pop().expect("m + 1 jets")),
        )));
    }
    let mut l = SymbolExpansion::new(-a.order(), terms)?;
    if let Some(region) = a.region() {
        l = l.with_region(region.clone())?;
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_symbols::{compose, Expr, ExprField};

    fn grid1() -> PhaseGrid<f64> {
        PhaseGrid::uniform(vec![0.0, -3.0], vec![6.0, 3.0], 9).unwrap()
    }

    fn field(e: Expr) -> FieldRef<f64> {
        Arc::new(ExprField::new(e, 1).unwrap())
    }

    #[test]
    fn exact_first_order_factor() {
        let q = SymbolExpansion::from_exprs(0, 1, vec![Expr::xi(0) - Expr::Const(0.0, 2.0)]).unwrap();
        let f = factor_symbols(&q, field(Expr::c(2.0)), 3, &grid1()).unwrap();
        let pt = PhasePoint::new(vec![0.4], vec![1.3]).unwrap();
        let v = f.term_values(&pt, 0.1).unwrap();
        assert!((v[0] - Complex::new(1.0, 0.0)).norm() < 1e-14);
        assert!(v[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn constant_coefficient_factor() {
        let q = SymbolExpansion::from_exprs(0, 1, vec![Expr::xi(0) * Expr::xi(0) + Expr::c(1.0)]).unwrap();
        let f = factor_symbols(&q, field(Expr::c(1.0)), 2, &grid1()).unwrap();
        let pt = PhasePoint::new(vec![0.4], vec![0.7]).unwrap();
        let v = f.term_values(&pt, 0.1).unwrap();
        assert!((v[0] - Complex::new(0.7, 1.0)).norm() < 1e-14);
        assert!(v[1].norm() < 1e-14);
    }

    #[test]
    fn recursion_matches_composition() {
        let q = SymbolExpansion::from_exprs(0, 1, vec![Expr::xi(0) * Expr::xi(0) + Expr::c(1.0)]).unwrap();
        let b = field(Expr::c(2.0) + Expr::y(0).sin());
        let f = factor_symbols(&q, b, 3, &grid1()).unwrap();
        for &(x, xi) in &[(0.3, -1.0), (2.0, 0.5), (4.4, 2.2)] {
            let pt = PhasePoint::new(vec![x], vec![xi]).unwrap();
            assert!(f.recursion_residual(&pt, 0.1).unwrap() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_b() {
        let q = SymbolExpansion::from_exprs(0, 1, vec![Expr::xi(0) * Expr::xi(0) + Expr::c(1.0)]).unwrap();
        let r = factor_symbols(&q, field(Expr::y(0).sin()), 1, &grid1());
        assert!(matches!(r, Err(Error::Ellipticity(_))));
    }

    #[test]
    fn parametrix_inverts() {
        let g = grid1();
        let two = SymbolExpansion::constant(1, Complex::new(2.0, 0.0));
        let l = left_parametrix(&two, 2, &g).unwrap();
        let pt = PhasePoint::new(vec![1.0], vec![1.0]).unwrap();
        assert!((l.term(0).unwrap().value(&pt, 0.1).unwrap() - 0.5).norm() < 1e-15);
        let a = SymbolExpansion::from_exprs(0, 1, vec![Expr::xi(0) + Expr::Const(0.0, 1.0) + Expr::y(0).cos() * Expr::c(0.3)]).unwrap();
        let l = left_parametrix(&a, 3, &g).unwrap();
        let la = compose(&l, &a, 3).unwrap();
        for &(x, xi) in &[(0.3, -1.0), (2.0, 0.5)] {
            let pt = PhasePoint::new(vec![x], vec![xi]).unwrap();
            assert!((la.term(0).unwrap().value(&pt, 0.1).unwrap() - 1.0).norm() < 1e-13);
            for j in 1..=3 {
                assert!(la.term(j).unwrap().value(&pt, 0.1).unwrap().norm() < 1e-12);
            }
        }
    }

    #[test]
    fn parametrix_rejects_vanishing_symbol() {
        let a = SymbolExpansion::from_exprs(0, 1, vec![Expr::xi(0)]).unwrap();
        assert!(matches!(left_parametrix(&a, 1, &grid1()), Err(Error::Ellipticity(_))));
    }
}
