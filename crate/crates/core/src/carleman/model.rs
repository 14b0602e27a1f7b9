//! Principal symbols near a geodesic sphere and the Carleman weight.

use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;

use crate::analysis::quadrature;
use crate::error::{Error, Result};
use crate::phase_symbols::{Expr, FieldRef, FnField, PhasePoint, SymbolExpansion};
use crate::real::Real;

/// Quadratic forms `a(y', .)`, `b(y', .)` and remainder `R(y, .)` evaluated
/// on a complex tangential covector. `y` is the full position `(y', y_n)`.
pub trait TangentialForms<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    fn a(&self, y: &[T], z: &[Complex<T>]) -> Complex<T>;
    fn b(&self, y: &[T], z: &[Complex<T>]) -> Complex<T>;
    fn remainder(&self, y: &[T], z: &[Complex<T>]) -> Complex<T>;
    fn describe(&self) -> String;
}

fn sum_sq<T: Real>(z: &[Complex<T>]) -> Complex<T> {
    z.iter().fold(Complex::new(T::zero(), T::zero()), |s, v| s + v * v)
}

/// Euclidean half-space: `a = |xi'|^2`, `b = 0`, `R = 0`.
#[derive(Clone, Debug)]
pub struct FlatForms {
    pub n: usize,
}

impl<T: Real> TangentialForms<T> for FlatForms {
    fn dim(&self) -> usize {
        self.n
    }
    fn a(&self, _y: &[T], z: &[Complex<T>]) -> Complex<T> {
        sum_sq(z)
    }
    fn b(&self, _y: &[T], _z: &[Complex<T>]) -> Complex<T> {
        Complex::new(T::zero(), T::zero())
    }
    fn remainder(&self, _y: &[T], _z: &[Complex<T>]) -> Complex<T> {
        Complex::new(T::zero(), T::zero())
    }
    fn describe(&self) -> String {
        format!("flat(n={})", self.n)
    }
}

/// Round sphere of radius `r` in `R^n` with outward normal coordinate
/// `y_n` (distance from the sphere). The dual metric is
/// `dual = (r / (r + s y_n))^2 g_Y^{-1}` where `s = +1` for the convex side
/// and `s = -1` for the concave side, so `b = s a / r`.
///
/// Tangential coordinates are geodesic normal coordinates on the sphere.
#[derive(Clone, Debug)]
pub struct SphereForms<T> {
    pub n: usize,
    pub radius: T,
    pub convex: bool,
}

impl<T: Real> SphereForms<T> {
    fn sign(&self) -> T {
        if self.convex {
            T::one()
        } else {
            -T::one()
        }
    }

    /// `(r / (r + s y_n))^2`.
    pub fn conformal_factor(&self, y_n: T) -> T {
        let g = self.radius / (self.radius + self.sign() * y_n);
        g * g
    }
}

impl<T: Real> TangentialForms<T> for SphereForms<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn a(&self, y: &[T], z: &[Complex<T>]) -> Complex<T> {
        let m = self.n - 1;
        let rho2 = y[..m].iter().fold(T::zero(), |s, v| s + *v * *v);
        if m <= 1 || rho2 == T::zero() {
            return sum_sq(z);
        }
        let rho = rho2.sqrt();
        let radial = y[..m]
            .iter()
            .zip(z)
            .fold(Complex::new(T::zero(), T::zero()), |s, (yk, zk)| s + zk * (*yk / rho));
        let ratio = rho / (self.radius * (rho / self.radius).sin());
        let full = sum_sq(z);
        radial * radial + (full - radial * radial) * (ratio * ratio)
    }

    fn b(&self, y: &[T], z: &[Complex<T>]) -> Complex<T> {
        self.a(y, z) * (self.sign() / self.radius)
    }

    fn remainder(&self, y: &[T], z: &[Complex<T>]) -> Complex<T> {
        let yn = y[self.n - 1];
        let g = self.conformal_factor(yn);
        let lin = T::one() - T::lit(2.0) * self.sign() * yn / self.radius;
        self.a(y, z) * (g - lin)
    }

    fn describe(&self) -> String {
        format!(
            "{}sphere(n={}, r={})",
            if self.convex { "" } else { "concave-" },
            self.n,
            self.radius
        )
    }
}

/// Forms given by expressions in `y1..yn` and `xi1..xi(n-1)`; the
/// expressions are evaluated at complex covectors.
#[derive(Clone, Debug)]
pub struct ExprForms {
    pub n: usize,
    pub a: Expr,
    pub b: Expr,
    pub remainder: Expr,
}

impl ExprForms {
    fn eval<T: Real>(&self, e: &Expr, y: &[T], z: &[Complex<T>]) -> Complex<T> {
        let yc: Vec<Complex<T>> = y.iter().map(|v| Complex::new(*v, T::zero())).collect();
        e.value_complex(&yc, z, T::one())
    }
}

impl<T: Real> TangentialForms<T> for ExprForms {
    fn dim(&self) -> usize {
        self.n
    }
    fn a(&self, y: &[T], z: &[Complex<T>]) -> Complex<T> {
        self.eval(&self.a, y, z)
    }
    fn b(&self, y: &[T], z: &[Complex<T>]) -> Complex<T> {
        self.eval(&self.b, y, z)
    }
    fn remainder(&self, y: &[T], z: &[Complex<T>]) -> Complex<T> {
        self.eval(&self.remainder, y, z)
    }
    fn describe(&self) -> String {
        format!("custom(a={}, b={}, R={})", self.a, self.b, self.remainder)
    }
}

pub type PotentialFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// `p(y, xi) = xi_n^2 + a(y', xi') - 2 y_n b(y', xi') + R(y, xi') + V(y) - E`.
#[derive(Clone)]
pub struct GeodesicSphereModel<T> {
    forms: Arc<dyn TangentialForms<T>>,
    potential: Option<PotentialFn<T>>,
    energy: T,
    name: String,
}

impl<T: Real> std::fmt::Debug for GeodesicSphereModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GeodesicSphereModel({}, E={})", self.name, self.energy)
    }
}

impl<T: Real> GeodesicSphereModel<T> {
    /// Laplace case: `V = 0`, `E = 1`.
    pub fn laplace(forms: Arc<dyn TangentialForms<T>>) -> Self {
        let name = forms.describe();
        Self {
            forms,
            potential: None,
            energy: T::one(),
            name,
        }
    }

    pub fn schrodinger(forms: Arc<dyn TangentialForms<T>>, potential: PotentialFn<T>, energy: T) -> Self {
        let name = format!("{} + V", forms.describe());
        Self {
            forms,
            potential: Some(potential),
            energy,
            name,
        }
    }

    pub fn flat(n: usize) -> Self {
        Self::laplace(Arc::new(FlatForms { n }))
    }

    pub fn circle(radius: T) -> Self {
        Self::sphere(2, radius)
    }

    pub fn sphere(n: usize, radius: T) -> Self {
        Self::laplace(Arc::new(SphereForms {
            n,
            radius,
            convex: true,
        }))
    }

    pub fn concave_sphere(n: usize, radius: T) -> Self {
        Self::laplace(Arc::new(SphereForms {
            n,
            radius,
            convex: false,
        }))
    }

    pub fn with_potential(mut self, potential: PotentialFn<T>, energy: T) -> Self {
        self.potential = Some(potential);
        self.energy = energy;
        self.name = format!("{} + V", self.forms.describe());
        self
    }

    pub fn dim(&self) -> usize {
        self.forms.dim()
    }

    pub fn energy(&self) -> T {
        self.energy
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn forms(&self) -> &Arc<dyn TangentialForms<T>> {
        &self.forms
    }

    pub fn potential(&self, y: &[T]) -> T {
        self.potential.as_ref().map(|v| v(y)).unwrap_or(T::zero())
    }

    pub fn is_schrodinger(&self) -> bool {
        self.potential.is_some()
    }

    /// Tangential part `a - 2 y_n b + R` at a complex covector.
    pub fn tangential(&self, y: &[T], z: &[Complex<T>]) -> Complex<T> {
        let yn = y[self.dim() - 1];
        self.forms.a(y, z) - self.forms.b(y, z) * (T::lit(2.0) * yn) + self.forms.remainder(y, z)
    }

    /// Principal symbol at a complex covector `zeta`.
    pub fn p_complex(&self, y: &[T], zeta: &[Complex<T>]) -> Complex<T> {
        let n = self.dim();
        let zn = zeta[n - 1];
        zn * zn + self.tangential(y, &zeta[..n - 1]) + (self.potential(y) - self.energy)
    }

    pub fn p(&self, pt: &PhasePoint<T>) -> Complex<T> {
        let z: Vec<Complex<T>> = pt.xi.iter().map(|v| Complex::new(*v, T::zero())).collect();
        self.p_complex(&pt.y, &z)
    }

    /// Sampled checks of the model hypotheses on `y` samples: lower bound of
    /// `a` on unit covectors, minimum of `b/a`, and the fitted constant of
    /// `|R| <= C y_n^2 |xi'|^2`.
    pub fn check_invariants(&self, ys: &[Vec<T>]) -> ModelInvariants<T> {
        let m = self.dim() - 1;
        let mut a_min = T::infinity();
        let mut ratio_min = T::infinity();
        let mut r_const = T::zero();
        let dirs = m.max(1) * 8;
        for y in ys {
            for d in 0..dirs {
                let z: Vec<Complex<T>> = (0..m)
                    .map(|k| {
                        let ang = T::lit(d as f64 * 0.7 + k as f64 * 1.3);
                        let v = if k == 0 { ang.cos() } else { ang.sin() / T::from_usize_lossy(k) };
                        Complex::new(v, T::zero())
                    })
                    .collect();
                let norm2 = z.iter().fold(T::zero(), |s, v| s + v.re * v.re);
                if norm2 == T::zero() {
                    continue;
                }
                let a = self.forms.a(y, &z).re / norm2;
                let b = self.forms.b(y, &z).re / norm2;
                a_min = a_min.min(a);
                ratio_min = ratio_min.min(b / a);
                let yn = y[m];
                if yn != T::zero() {
                    let r = self.forms.remainder(y, &z).norm() / norm2;
                    r_const = r_const.max(r / (yn * yn));
                }
            }
        }
        ModelInvariants {
            a_lower_bound: a_min,
            min_curvature_ratio: ratio_min,
            remainder_constant: r_const,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelInvariants<T> {
    pub a_lower_bound: T,
    pub min_curvature_ratio: T,
    pub remainder_constant: T,
}

/// `S(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})`, 0 for `t <= 0` and 1 for `t >= 1`.
pub fn smoothstep<T: Real>(t: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    if t >= T::one() {
        return T::one();
    }
    let a = (-T::one() / t).exp();
    let b = (-T::one() / (T::one() - t)).exp();
    a / (a + b)
}

pub fn smoothstep_derivative<T: Real>(t: T) -> T {
    if t <= T::zero() || t >= T::one() {
        return T::zero();
    }
    let s = T::one() - t;
    let a = (-T::one() / t).exp();
    let b = (-T::one() / s).exp();
    let d = a + b;
    a * b * (T::one() / (t * t) + T::one() / (s * s)) / (d * d)
}

type RhoFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

fn bump_mass() -> f64 {
    static M: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *M.get_or_init(|| {
        quadrature::composite_gl(&|s: f64| raw_bump(s), -1.0, 1.0, 16)
    })
}

fn raw_bump<T: Real>(s: T) -> T {
    let q = T::one() - s * s;
    if q <= T::zero() {
        T::zero()
    } else {
        (-T::one() / q).exp()
    }
}

/// Normalised bump `exp(-1/(1-s^2))` on `(-1, 1)` with unit mass.
pub fn mollifier<T: Real>(s: T) -> T {
    raw_bump(s) / T::lit(bump_mass())
}

/// Distribution function of the mollifier and its first moment, integrated up to `t`.
fn mollifier_integrals<T: Real>(t: T) -> (T, T) {
    if t <= -T::one() {
        return (T::zero(), T::zero());
    }
    if t >= T::one() {
        return (T::one(), T::zero());
    }
    let cdf = quadrature::composite_gl(&|s| mollifier(s), -T::one(), t, 4);
    let moment = quadrature::composite_gl(&|s| s * mollifier(s), -T::one(), t, 4);
    (cdf, moment)
}

/// Mollified unit ramp: the clamp `min(max(x, 0), 1)` scaled to `[start, end]`,
/// convolved with the bump at a quarter of the ramp length.
#[derive(Clone, Copy, Debug)]
pub struct MollifiedRamp<T> {
    corner_lo: T,
    slope_len: T,
    width: T,
}

impl<T: Real> MollifiedRamp<T> {
    pub fn new(start: T, end: T) -> Self {
        let width = (end - start) * T::lit(0.25);
        MollifiedRamp {
            corner_lo: start + width,
            slope_len: (end - start) * T::lit(0.5),
            width,
        }
    }

    fn second_moment(t: T) -> T {
        if t <= -T::one() {
            return T::zero();
        }
        if t >= T::one() {
            return t;
        }
        let (cdf, moment) = mollifier_integrals(t);
        t * cdf - moment
    }

    pub fn value(&self, x: T) -> T {
        let ta = (x - self.corner_lo) / self.width;
        let tb = (x - self.corner_lo - self.slope_len) / self.width;
        if ta <= -T::one() {
            return T::zero();
        }
        if tb >= T::one() {
            return T::one();
        }
        self.width / self.slope_len * (Self::second_moment(ta) - Self::second_moment(tb))
    }

    pub fn derivative(&self, x: T) -> T {
        let ta = (x - self.corner_lo) / self.width;
        let tb = (x - self.corner_lo - self.slope_len) / self.width;
        (mollifier_integrals(ta).0 - mollifier_integrals(tb).0) / self.slope_len
    }

    pub fn second_derivative(&self, x: T) -> T {
        let ta = (x - self.corner_lo) / self.width;
        let tb = (x - self.corner_lo - self.slope_len) / self.width;
        (mollifier(ta) - mollifier(tb)) / (self.slope_len * self.width)
    }
}

/// Tangential cutoff `rho_eps(y')`.
#[derive(Clone)]
pub enum Rho<T> {
    /// Mollified ramp from 0 at `|y'| = 3 eps` down to -1 at `|y'| = c_Y / 3`.
    Mollified { eps: T, c_y: T, ramp: MollifiedRamp<T> },
    /// Arbitrary profile (gradient by central differences).
    Custom(RhoFn<T>),
}

/// Builds the standard tangential cutoff.
pub fn build_rho<T: Real>(eps: T, c_y: T) -> Result<Rho<T>> {
    let three = T::lit(3.0);
    if !(eps > T::zero()) || !(three * eps < c_y / three) {
        return Err(Error::Geometry(format!(
            "need 0 < 3 eps < c_Y / 3, got eps = {eps}, c_Y = {c_y}"
        )));
    }
    Ok(Rho::Mollified { eps, c_y, ramp: MollifiedRamp::new(three * eps, c_y / three) })
}

fn radius<T: Real>(y_tan: &[T]) -> T {
    y_tan.iter().fold(T::zero(), |s, v| s + *v * *v).sqrt()
}

impl<T: Real> Rho<T> {
    pub fn value(&self, y_tan: &[T]) -> T {
        match self {
            Rho::Mollified { ramp, .. } => -ramp.value(radius(y_tan)),
            Rho::Custom(f) => f(y_tan),
        }
    }

    pub fn gradient(&self, y_tan: &[T]) -> Vec<T> {
        match self {
            Rho::Mollified { ramp, .. } => {
                let r = radius(y_tan);
                if r == T::zero() {
                    return vec![T::zero(); y_tan.len()];
                }
                let d = -ramp.derivative(r);
                y_tan.iter().map(|v| d * *v / r).collect()
            }
            Rho::Custom(f) => {
                let mut g = Vec::with_capacity(y_tan.len());
                let mut q = y_tan.to_vec();
                for k in 0..y_tan.len() {
                    let s = T::fd_step(y_tan[k]);
                    q[k] = y_tan[k] + s;
                    let fp = f(&q);
                    q[k] = y_tan[k] - s;
                    let fm = f(&q);
                    q[k] = y_tan[k];
                    g.push((fp - fm) / (T::lit(2.0) * s));
                }
                g
            }
        }
    }
}

/// `psi(y', y_n) = beta y_n + 2 tau rho_eps(y')`.
#[derive(Clone)]
pub struct CarlemanWeight<T> {
    pub tau: T,
    pub eps: T,
    pub c_y: T,
    pub beta: T,
    pub rho: Rho<T>,
}

impl<T: Real> std::fmt::Debug for CarlemanWeight<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "CarlemanWeight(tau={}, eps={}, c_Y={}, beta={})",
            self.tau, self.eps, self.c_y, self.beta
        )
    }
}

impl<T: Real> CarlemanWeight<T> {
    pub fn new(tau: T, eps: T, c_y: T, beta: T) -> Result<Self> {
        if tau < T::zero() {
            return Err(Error::Geometry(format!("tau must be nonnegative, got {tau}")));
        }
        Ok(Self {
            tau,
            eps,
            c_y,
            beta,
            rho: build_rho(eps, c_y)?,
        })
    }

    pub fn with_rho(mut self, rho: Rho<T>) -> Self {
        self.rho = rho;
        self
    }

    pub fn psi(&self, y: &[T]) -> T {
        let m = y.len() - 1;
        self.beta * y[m] + T::lit(2.0) * self.tau * self.rho.value(&y[..m])
    }

    pub fn grad_psi(&self, y: &[T]) -> Vec<T> {
        let m = y.len() - 1;
        let two_tau = T::lit(2.0) * self.tau;
        let mut g: Vec<T> = self.rho.gradient(&y[..m]).into_iter().map(|v| two_tau * v).collect();
        g.push(self.beta);
        g
    }
}

/// Conjugated principal symbol `p_psi(y, xi) = p(y, xi + i grad psi(y))`.
#[derive(Clone)]
pub struct ConjugatedSymbol<T> {
    pub model: GeodesicSphereModel<T>,
    pub weight: CarlemanWeight<T>,
}

impl<T: Real> ConjugatedSymbol<T> {
    /// Value with a precomputed weight gradient at `y`.
    pub fn eval_with_grad(&self, y: &[T], xi: &[T], grad: &[T]) -> Complex<T> {
        let zeta: Vec<Complex<T>> = xi
            .iter()
            .zip(grad)
            .map(|(x, g)| Complex::new(*x, *g))
            .collect();
        self.model.p_complex(y, &zeta)
    }

    pub fn eval(&self, pt: &PhasePoint<T>) -> Complex<T> {
        let g = self.weight.grad_psi(&pt.y);
        self.eval_with_grad(&pt.y, &pt.xi, &g)
    }

    pub fn re(&self, pt: &PhasePoint<T>) -> T {
        self.eval(pt).re
    }

    pub fn im(&self, pt: &PhasePoint<T>) -> T {
        self.eval(pt).im
    }

    /// As a one-term symbol expansion (derivatives by finite differences).
    pub fn as_symbol(&self) -> SymbolExpansion<T> {
        let me = self.clone();
        let n = self.model.dim();
        let f = FnField::new(n, "p_psi", move |pt: &PhasePoint<T>, _h| me.eval(pt));
        SymbolExpansion::new(0, vec![Arc::new(f) as FieldRef<T>]).expect("one term")
    }
}

impl<T: Real> std::fmt::Debug for ConjugatedSymbol<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ConjugatedSymbol({:?}, {:?})", self.model, self.weight)
    }
}

pub fn conjugated_symbol<T: Real>(
    model: &GeodesicSphereModel<T>,
    weight: &CarlemanWeight<T>,
) -> ConjugatedSymbol<T> {
    ConjugatedSymbol {
        model: model.clone(),
        weight: weight.clone(),
    }
}
