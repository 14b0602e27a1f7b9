//! Expression trees over phase-space variables.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::jet::{Jet, JetSpace};
use crate::real::Real;

/// A variable of the symbol grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Var {
    /// Position coordinate `y_k` (0-based).
    Y(usize),
    /// Momentum coordinate `xi_k` (0-based).
    Xi(usize),
    /// Semiclassical parameter.
    H,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64, f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Ln(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Sqrt(Box<Expr>),
}

/// Arithmetic needed to evaluate an [`Expr`].
pub trait ExprAlgebra<T: Real>: Clone {
    fn constant(&self, v: Complex<T>) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powc(&self, p: Complex<T>) -> Self;
}

impl<T: Real> ExprAlgebra<T> for Complex<T> {
    fn constant(&self, v: Complex<T>) -> Self {
        v
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn exp(&self) -> Self {
        Complex::exp(*self)
    }
    fn ln(&self) -> Self {
        Complex::ln(*self)
    }
    fn sin(&self) -> Self {
        Complex::sin(*self)
    }
    fn cos(&self) -> Self {
        Complex::cos(*self)
    }
    fn sqrt(&self) -> Self {
        Complex::sqrt(*self)
    }
    fn powi(&self, n: i32) -> Self {
        Complex::powi(self, n)
    }
    fn powc(&self, p: Complex<T>) -> Self {
        Complex::powc(*self, p)
    }
}

impl<T: Real> ExprAlgebra<T> for Jet<T> {
    fn constant(&self, v: Complex<T>) -> Self {
        Jet::constant(self.space(), self.order(), v)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn ln(&self) -> Self {
        Jet::ln(self)
    }
    fn sin(&self) -> Self {
        Jet::sin(self)
    }
    fn cos(&self) -> Self {
        Jet::cos(self)
    }
    fn sqrt(&self) -> Self {
        Jet::sqrt(self)
    }
    fn powi(&self, n: i32) -> Self {
        Jet::powi(self, n)
    }
    fn powc(&self, p: Complex<T>) -> Self {
        Jet::powc(self, p)
    }
}

impl Expr {
    pub fn c(v: f64) -> Self {
        Expr::Const(v, 0.0)
    }
    pub fn y(k: usize) -> Self {
        Expr::Var(Var::Y(k))
    }
    pub fn xi(k: usize) -> Self {
        Expr::Var(Var::Xi(k))
    }

    /// Evaluates the tree with variables supplied by `var`.
    pub fn eval<T: Real, A: ExprAlgebra<T>>(&self, proto: &A, var: &dyn Fn(Var) -> A) -> A {
        use Expr::*;
        match self {
            Const(r, i) => proto.constant(Complex::new(T::lit(*r), T::lit(*i))),
            Var(v) => var(*v),
            Neg(a) => a.eval(proto, var).neg(),
            Add(a, b) => a.eval(proto, var).add(&b.eval(proto, var)),
            Sub(a, b) => a.eval(proto, var).sub(&b.eval(proto, var)),
            Mul(a, b) => a.eval(proto, var).mul(&b.eval(proto, var)),
            Div(a, b) => a.eval(proto, var).div(&b.eval(proto, var)),
            Pow(a, b) => {
                let base = a.eval(proto, var);
                match b.as_ref() {
                    Const(p, 0.0) if p.fract() == 0.0 && p.abs() < 64.0 => base.powi(*p as i32),
                    Const(p, q) => base.powc(Complex::new(T::lit(*p), T::lit(*q))),
                    _ => base.ln().mul(&b.eval(proto, var)).exp(),
                }
            }
            Exp(a) => a.eval(proto, var).exp(),
            Ln(a) => a.eval(proto, var).ln(),
            Sin(a) => a.eval(proto, var).sin(),
            Cos(a) => a.eval(proto, var).cos(),
            Sqrt(a) => a.eval(proto, var).sqrt(),
        }
    }

    /// Largest coordinate index used, as `(max y index + 1, max xi index + 1)`.
    pub fn arity(&self) -> (usize, usize) {
        use Expr::*;
        match self {
            Const(..) => (0, 0),
            Var(super::expr::Var::Y(k)) => (k + 1, 0),
            Var(super::expr::Var::Xi(k)) => (0, k + 1),
            Var(super::expr::Var::H) => (0, 0),
            Neg(a) | Exp(a) | Ln(a) | Sin(a) | Cos(a) | Sqrt(a) => a.arity(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => {
                let (p, q) = a.arity();
                let (r, s) = b.arity();
                (p.max(r), q.max(s))
            }
        }
    }

    pub fn uses_h(&self) -> bool {
        use Expr::*;
        match self {
            Const(..) => false,
            Var(v) => *v == super::expr::Var::H,
            Neg(a) | Exp(a) | Ln(a) | Sin(a) | Cos(a) | Sqrt(a) => a.uses_h(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => a.uses_h() || b.uses_h(),
        }
    }

    pub fn into_arc(self) -> Arc<Expr> {
        Arc::new(self)
    }

    /// Evaluates at a phase point with complex arithmetic.
    pub fn value<T: Real>(&self, y: &[T], xi: &[T], h: T) -> Complex<T> {
        let proto = Complex::new(T::zero(), T::zero());
        self.eval(&proto, &|v| match v {
            Var::Y(k) => Complex::new(y[k], T::zero()),
            Var::Xi(k) => Complex::new(xi[k], T::zero()),
            Var::H => Complex::new(h, T::zero()),
        })
    }

    /// Evaluates at complex coordinates.
    pub fn value_complex<T: Real>(&self, y: &[Complex<T>], xi: &[Complex<T>], h: T) -> Complex<T> {
        let proto = Complex::new(T::zero(), T::zero());
        self.eval(&proto, &|v| match v {
            Var::Y(k) => y[k],
            Var::Xi(k) => xi[k],
            Var::H => Complex::new(h, T::zero()),
        })
    }

    /// Taylor jet in the `2n` variables `(y, xi)` at the given point.
    pub fn jet<T: Real>(&self, y: &[T], xi: &[T], h: T, order: usize) -> Jet<T> {
        let n = y.len();
        let space = JetSpace::get(2 * n, order);
        let proto = Jet::constant(&space, order, Complex::new(T::zero(), T::zero()));
        self.eval(&proto, &|v| match v {
            Var::Y(k) => Jet::variable(&space, order, k, y[k]),
            Var::Xi(k) => Jet::variable(&space, order, n + k, xi[k]),
            Var::H => Jet::constant(&space, order, Complex::new(h, T::zero())),
        })
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Y(k) => write!(f, "y{}", k + 1),
            Var::Xi(k) => write!(f, "xi{}", k + 1),
            Var::H => write!(f, "h"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Expr::*;
        match self {
            Const(r, i) if *i == 0.0 => write!(f, "{r}"),
            Const(r, i) => write!(f, "({r}+{i}*i)"),
            Var(v) => write!(f, "{v}"),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, b) => write!(f, "pow({a}, {b})"),
            Exp(a) => write!(f, "exp({a})"),
            Ln(a) => write!(f, "ln({a})"),
            Sin(a) => write!(f, "sin({a})"),
            Cos(a) => write!(f, "cos({a})"),
            Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $var:ident) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$var(Box::new(self), Box::new(rhs))
            }
        }
    };
}
binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl Expr {
    pub fn pow(self, p: Expr) -> Expr {
        Expr::Pow(Box::new(self), Box::new(p))
    }
    pub fn sin(self) -> Expr {
        Expr::Sin(Box::new(self))
    }
    pub fn cos(self) -> Expr {
        Expr::Cos(Box::new(self))
    }
    pub fn exp(self) -> Expr {
        Expr::Exp(Box::new(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_and_jet_agree() {
        let e = (Expr::xi(0) * Expr::xi(0) + Expr::y(0).sin()) / (Expr::xi(0) - Expr::Const(0.0, 1.0));
        let v = e.value(&[0.3f64], &[1.2], 0.1);
        let j = e.jet(&[0.3f64], &[1.2], 0.1, 3);
        assert!((v - j.value()).norm() < 1e-14);
        // d/dy = cos(y)/(xi - i)
        let dy = Complex::new(0.3f64.cos(), 0.0) / Complex::new(1.2, -1.0);
        assert!((j.partial(&[1, 0]).unwrap() - dy).norm() < 1e-14);
    }

    #[test]
    fn non_integer_pow() {
        let e = Expr::y(0).pow(Expr::c(1.5));
        let j = e.jet(&[4.0f64], &[0.0], 0.1, 2);
        assert!((j.value().re - 8.0).abs() < 1e-12);
        assert!((j.partial(&[1, 0]).unwrap().re - 3.0).abs() < 1e-12);
    }
}
