//! Smooth scalar functions of one variable with two derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::phase_symbols::Expr;
use crate::real::Real;

type CurveFn<T> = dyn Fn(T) -> [T; 3] + Send + Sync;

/// `x -> (g(x), g'(x), g''(x))`.
#[derive(Clone)]
pub struct Curve<T> {
    eval: Arc<CurveFn<T>>,
    label: String,
}

impl<T> fmt::Debug for Curve<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Curve({})", self.label)
    }
}

impl<T: Real> Curve<T> {
    pub fn new(label: impl Into<String>, eval: impl Fn(T) -> [T; 3] + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            label: label.into(),
        }
    }

    pub fn constant(c: T) -> Self {
        Self::new(format!("{c}"), move |_| [c, T::zero(), T::zero()])
    }

    /// Curve in the variable `y1`; the expression must be real-valued and
    /// must not involve momenta or `h`.
    pub fn from_expr(expr: Expr) -> Result<Self> {
        let (ny, nxi) = expr.arity();
        if ny > 1 || nxi > 0 || expr.uses_h() {
            return Err(Error::Schema(format!("`{expr}` must depend on y1 only")));
        }
        let label = expr.to_string();
        Ok(Self::new(label, move |x| {
            let jet = expr.jet(&[x], &[T::zero()], T::one(), 2);
            let d = |k: u8| jet.partial(&[k, 0]).map(|z| z.re).unwrap_or(T::zero());
            [d(0), d(1), d(2)]
        }))
    }

    pub fn value(&self, x: T) -> T {
        (self.eval)(x)[0]
    }

    pub fn derivative(&self, x: T) -> T {
        (self.eval)(x)[1]
    }

    pub fn eval3(&self, x: T) -> [T; 3] {
        (self.eval)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `x -> c * g(x)^p`.
    pub fn power(&self, c: T, p: T, label: impl Into<String>) -> Self {
        let g = self.eval.clone();
        Self::new(label, move |x| {
            let [v, d1, d2] = g(x);
            let vp = v.powf(p);
            let first = c * p * v.powf(p - T::one()) * d1;
            let second = c * p * ((p - T::one()) * v.powf(p - T::lit(2.0)) * d1 * d1 + v.powf(p - T::one()) * d2);
            [c * vp, first, second]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expr_derivatives() {
        let c = Curve::<f64>::from_expr(Expr::c(2.0) + Expr::y(0).cos()).unwrap();
        let [v, d1, d2] = c.eval3(0.7);
        assert!((v - (2.0 + 0.7f64.cos())).abs() < 1e-15);
        assert!((d1 + 0.7f64.sin()).abs() < 1e-15);
        assert!((d2 + 0.7f64.cos()).abs() < 1e-15);
        let inv = c.power(1.0, -2.0, "f^-2");
        let f = 2.0 + 0.7f64.cos();
        assert!((inv.derivative(0.7) - 2.0 * 0.7f64.sin() / f.powi(3)).abs() < 1e-14);
    }

    #[test]
    fn rejects_momentum() {
        assert!(Curve::<f64>::from_expr(Expr::xi(0)).is_err());
    }
}
