//! Phase-space scalar fields with Taylor-jet access.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;

use super::expr::Expr;
use super::jet::{Jet, JetSpace};
use super::PhasePoint;
use crate::error::{Error, Result};
use crate::real::Real;

/// A complex scalar field on `T*R^n` that can report derivatives.
pub trait Field<T: Real>: Send + Sync {
    /// Spatial dimension `n`; jets live in `2n` variables `(y, xi)`.
    fn dim(&self) -> usize;

    /// Taylor jet of the requested order at `pt`.
    fn jet(&self, pt: &PhasePoint<T>, h: T, order: usize) -> Result<Jet<T>>;

    fn value(&self, pt: &PhasePoint<T>, h: T) -> Result<Complex<T>> {
        Ok(self.jet(pt, h, 0)?.value())
    }

    /// Highest derivative order this field can provide.
    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn describe(&self) -> String;

    /// Whether the field varies with position and with momentum.
    fn dependence(&self) -> (bool, bool) {
        (true, true)
    }
}

pub type FieldRef<T> = Arc<dyn Field<T>>;

impl<T: Real> fmt::Debug for dyn Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field({})", self.describe())
    }
}

pub(crate) fn check_order<T: Real>(field: &dyn Field<T>, order: usize) -> Result<()> {
    if order > field.max_order() {
        Err(Error::Capability(format!(
            "field `{}` provides derivatives up to order {}, {} requested",
            field.describe(),
            field.max_order(),
            order
        )))
    } else {
        Ok(())
    }
}

/// Field given by an expression tree; derivatives are exact.
#[derive(Clone, Debug)]
pub struct ExprField {
    expr: Arc<Expr>,
    dim: usize,
}

impl ExprField {
    pub fn new(expr: Expr, dim: usize) -> Result<Self> {
        let (ny, nxi) = expr.arity();
        if ny > dim || nxi > dim {
            return Err(Error::Domain(format!(
                "expression `{expr}` references coordinates beyond dimension {dim}"
            )));
        }
        Ok(Self {
            expr: Arc::new(expr),
            dim,
        })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl<T: Real> Field<T> for ExprField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn jet(&self, pt: &PhasePoint<T>, h: T, order: usize) -> Result<Jet<T>> {
        Ok(self.expr.jet(&pt.y, &pt.xi, h, order))
    }
    fn value(&self, pt: &PhasePoint<T>, h: T) -> Result<Complex<T>> {
        Ok(self.expr.value(&pt.y, &pt.xi, h))
    }
    fn describe(&self) -> String {
        self.expr.to_string()
    }
    fn dependence(&self) -> (bool, bool) {
        let (ny, nxi) = self.expr.arity();
        (ny > 0, nxi > 0)
    }
}

/// Constant field.
#[derive(Clone, Debug)]
pub struct ConstField<T> {
    pub value: Complex<T>,
    pub dim: usize,
}

impl<T: Real> Field<T> for ConstField<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn jet(&self, _pt: &PhasePoint<T>, _h: T, order: usize) -> Result<Jet<T>> {
        let space = JetSpace::get(2 * self.dim, order);
        Ok(Jet::constant(&space, order, self.value))
    }
    fn value(&self, _pt: &PhasePoint<T>, _h: T) -> Result<Complex<T>> {
        Ok(self.value)
    }
    fn describe(&self) -> String {
        format!("{}", self.value)
    }
    fn dependence(&self) -> (bool, bool) {
        (false, false)
    }
}

type ValueFn<T> = dyn Fn(&PhasePoint<T>, T) -> Complex<T> + Send + Sync;

/// Field known only through point values. Derivatives up to order two are
/// taken by central differences with step `cbrt(eps) * max(1, |x|)`
/// (first order) and `eps^(1/4) * max(1, |x|)` (second order).
#[derive(Clone)]
pub struct FnField<T> {
    f: Arc<ValueFn<T>>,
    dim: usize,
    name: String,
}

impl<T: Real> FnField<T> {
    pub fn new(
        dim: usize,
        name: impl Into<String>,
        f: impl Fn(&PhasePoint<T>, T) -> Complex<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            dim,
            name: name.into(),
        }
    }
}

fn shifted<T: Real>(pt: &PhasePoint<T>, moves: &[(usize, T)]) -> PhasePoint<T> {
    let n = pt.y.len();
    let mut q = pt.clone();
    for &(v, d) in moves {
        if v < n {
            q.y[v] += d;
        } else {
            q.xi[v - n] += d;
        }
    }
    q
}

pub(crate) fn coordinate<T: Real>(pt: &PhasePoint<T>, v: usize) -> T {
    let n = pt.y.len();
    if v < n {
        pt.y[v]
    } else {
        pt.xi[v - n]
    }
}

/// Central-difference gradient of a point function (length `2n`).
pub fn fd_gradient<T: Real>(
    f: &dyn Fn(&PhasePoint<T>) -> Complex<T>,
    pt: &PhasePoint<T>,
) -> Result<Vec<Complex<T>>> {
    let nv = 2 * pt.y.len();
    let mut g = Vec::with_capacity(nv);
    for v in 0..nv {
        let x = coordinate(pt, v);
        let s = T::fd_step(x);
        let s = (x + s) - x;
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::numerical(
                "finite-difference",
                format!("step underflow at coordinate {v} (x = {x})"),
            ));
        }
        let fp = f(&shifted(pt, &[(v, s)]));
        let fm = f(&shifted(pt, &[(v, -s)]));
        g.push((fp - fm) / (T::lit(2.0) * s));
    }
    Ok(g)
}

impl<T: Real> Field<T> for FnField<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> usize {
        2
    }

    fn value(&self, pt: &PhasePoint<T>, h: T) -> Result<Complex<T>> {
        Ok((self.f)(pt, h))
    }

    fn jet(&self, pt: &PhasePoint<T>, h: T, order: usize) -> Result<Jet<T>> {
        check_order(self, order)?;
        let nv = 2 * self.dim;
        let space = JetSpace::get(nv, order);
        let f0 = (self.f)(pt, h);
        let mut c = vec![Complex::new(T::zero(), T::zero()); space.len(order)];
        c[0] = f0;
        if order >= 1 {
            let grad = fd_gradient(&|q: &PhasePoint<T>| (self.f)(q, h), pt)?;
            c[1..=nv].copy_from_slice(&grad);
        }
        if order >= 2 {
            let step = |v: usize| {
                let x = coordinate(pt, v);
                let s = T::epsilon().sqrt().sqrt() * x.abs().max(T::one());
                (x + s) - x
            };
            let two = T::lit(2.0);
            for k in (nv + 1)..space.len(2) {
                let alpha = space.monomial(k);
                let vars: Vec<usize> = (0..nv).filter(|&v| alpha[v] > 0).collect();
                let d2 = if vars.len() == 1 {
                    let v = vars[0];
                    let s = step(v);
                    let fp = (self.f)(&shifted(pt, &[(v, s)]), h);
                    let fm = (self.f)(&shifted(pt, &[(v, -s)]), h);
                    // coefficient of x_v^2 is f''/2
                    (fp - f0 * two + fm) / (s * s) / two
                } else {
                    let (a, b) = (vars[0], vars[1]);
                    let (sa, sb) = (step(a), step(b));
                    let fpp = (self.f)(&shifted(pt, &[(a, sa), (b, sb)]), h);
                    let fpm = (self.f)(&shifted(pt, &[(a, sa), (b, -sb)]), h);
                    let fmp = (self.f)(&shifted(pt, &[(a, -sa), (b, sb)]), h);
                    let fmm = (self.f)(&shifted(pt, &[(a, -sa), (b, -sb)]), h);
                    (fpp - fpm - fmp + fmm) / (T::lit(4.0) * sa * sb)
                };
                c[k] = d2;
            }
        }
        Ok(Jet::from_coefficients(&space, order, c))
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

type JetFn<T> = dyn Fn(&PhasePoint<T>, T, usize) -> Result<Jet<T>> + Send + Sync;

/// Field computed pointwise from other fields' jets.
#[derive(Clone)]
pub struct DerivedField<T> {
    f: Arc<JetFn<T>>,
    dim: usize,
    max_order: usize,
    name: String,
}

impl<T: Real> DerivedField<T> {
    pub fn new(
        dim: usize,
        max_order: usize,
        name: impl Into<String>,
        f: impl Fn(&PhasePoint<T>, T, usize) -> Result<Jet<T>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            dim,
            max_order,
            name: name.into(),
        }
    }
}

impl<T: Real> Field<T> for DerivedField<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn max_order(&self) -> usize {
        self.max_order
    }
    fn jet(&self, pt: &PhasePoint<T>, h: T, order: usize) -> Result<Jet<T>> {
        check_order(self, order)?;
        (self.f)(pt, h, order)
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// All multi-indices of length `n` and total degree `total`.
pub fn multi_indices(n: usize, total: usize) -> Vec<Vec<u8>> {
    fn rec(n: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() == n - 1 {
            cur.push(left as u8);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e as u8);
            rec(n, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(n, total, &mut Vec::new(), &mut out);
    out
}

/// `alpha!` for a multi-index.
pub fn multi_factorial(alpha: &[u8]) -> f64 {
    alpha.iter().map(|&e| super::jet::factorial(e as usize)).product()
}

/// Embeds a multi-index over `n` momentum (or position) variables into the
/// `2n` jet variables.
pub fn embed(alpha: &[u8], momentum: bool) -> Vec<u8> {
    let n = alpha.len();
    let mut out = vec![0u8; 2 * n];
    let off = if momentum { n } else { 0 };
    out[off..off + n].copy_from_slice(alpha);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(2, 3).len(), 4);
        assert_eq!(multi_indices(3, 2).len(), 6);
        assert_eq!(multi_indices(1, 5), vec![vec![5u8]]);
    }

    #[test]
    fn fd_field_matches_expr_field() {
        let e = Expr::xi(0) * Expr::xi(0) * Expr::y(0).sin() + Expr::y(0) * Expr::xi(0);
        let ef = ExprField::new(e.clone(), 1).unwrap();
        let ff = FnField::new(1, "fd", move |p: &PhasePoint<f64>, h| e.value(&p.y, &p.xi, h));
        let pt = PhasePoint::new(vec![0.7], vec![1.3]).unwrap();
        let a = Field::<f64>::jet(&ef, &pt, 0.1, 2).unwrap();
        let b = ff.jet(&pt, 0.1, 2).unwrap();
        for k in 1..3 {
            let rel = (a.coefficients()[k] - b.coefficients()[k]).norm() / a.coefficients()[k].norm();
            assert!(rel < 1e-6, "first-order coefficient {k}: rel {rel}");
        }
        for k in 3..6 {
            let d = (a.coefficients()[k] - b.coefficients()[k]).norm();
            assert!(d < 1e-4 * a.coefficients()[k].norm().max(1.0));
        }
        assert!(matches!(ff.jet(&pt, 0.1, 3), Err(Error::Capability(_))));
    }
}
