//! Tube functions in Fermi coordinates, the normal propagator `E(h)` and
//! the transport chain from `(hD_n - iB_0) v = F` to a restriction bound.

use num_complex::Complex;
use serde::Serialize;

use crate::analysis::finite_diff::UniformDerivative;
use crate::analysis::quadrature::gauss_legendre;
use crate::error::{Error, Result};
use crate::real::Real;

const STENCIL: usize = 9;
const INTERP_NODES: usize = 6;

/// Quadrature nodes on the hypersurface `H` (tangential variables `x'`).
#[derive(Clone, Debug, Serialize)]
pub struct TangentialGrid<T> {
    pub points: Vec<Vec<T>>,
    pub weights: Vec<T>,
    pub spacing: T,
}

impl<T: Real> TangentialGrid<T> {
    /// Periodic grid on a closed curve of the given length.
    pub fn circle(length: T, count: usize) -> Result<Self> {
        if count == 0 || !(length > T::zero()) {
            return Err(Error::Domain("circle grid needs a positive length and count".into()));
        }
        let dx = length / T::from_usize_lossy(count);
        Ok(Self {
            points: (0..count).map(|i| vec![dx * T::from_usize_lossy(i)]).collect(),
            weights: vec![dx; count],
            spacing: dx,
        })
    }

    /// Trapezoid nodes on `[a, b]`.
    pub fn interval(a: T, b: T, count: usize) -> Result<Self> {
        if count < 2 || !(b > a) {
            return Err(Error::Domain("interval grid needs b > a and two nodes".into()));
        }
        let dx = (b - a) / T::from_usize_lossy(count - 1);
        let mut weights = vec![dx; count];
        weights[0] = dx / T::lit(2.0);
        weights[count - 1] = dx / T::lit(2.0);
        Ok(Self {
            points: (0..count).map(|i| vec![a + dx * T::from_usize_lossy(i)]).collect(),
            weights,
            spacing: dx,
        })
    }

    /// A single point of unit weight (one-dimensional ambient space).
    pub fn point() -> Self {
        Self {
            points: vec![Vec::new()],
            weights: vec![T::one()],
            spacing: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: &[T]) -> T {
        self.weights.iter().zip(f).fold(T::zero(), |s, (w, v)| s + *w * *v)
    }
}

/// Samples on the tensor grid `(x', x_n)` of a Fermi tube.
#[derive(Clone, Debug, Serialize)]
pub struct TubeFunction<T> {
    pub tangential: TangentialGrid<T>,
    /// Uniform, increasing normal nodes.
    pub normal: Vec<T>,
    pub h: T,
    /// `values[i * normal.len() + j]` at `(tangential.points[i], normal[j])`.
    pub values: Vec<Complex<T>>,
}

impl<T: Real> TubeFunction<T> {
    pub fn new(tangential: TangentialGrid<T>, normal: Vec<T>, h: T, values: Vec<Complex<T>>) -> Result<Self> {
        if normal.len() < 2 {
            return Err(Error::Domain("tube needs at least two normal nodes".into()));
        }
        if values.len() != tangential.len() * normal.len() {
            return Err(Error::Domain(format!(
                "{} samples for a {} x {} grid",
                values.len(),
                tangential.len(),
                normal.len()
            )));
        }
        if !(h > T::zero()) {
            return Err(Error::Domain(format!("h must be positive, got {h}")));
        }
        let dx = normal[1] - normal[0];
        let uniform = normal
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dx).abs() <= T::lit(1e-9) * dx.abs() && w[1] > w[0]);
        if !uniform {
            return Err(Error::Domain("normal nodes must be uniform and increasing".into()));
        }
        let limit = h / T::lit(8.0);
        if dx > limit * T::lit(1.000001) || tangential.spacing > limit * T::lit(1.000001) {
            return Err(Error::Resolution(format!(
                "tube grid spacings ({dx}, {}) exceed h/8 = {limit}",
                tangential.spacing
            )));
        }
        Ok(Self { tangential, normal, h, values })
    }

    /// Samples `f(x', x_n)` on `count` uniform normal nodes in `[lo, hi]`.
    pub fn sample(
        tangential: TangentialGrid<T>,
        lo: T,
        hi: T,
        count: usize,
        h: T,
        f: impl Fn(&[T], T) -> Complex<T>,
    ) -> Result<Self> {
        if count < 2 {
            return Err(Error::Domain("tube needs at least two normal nodes".into()));
        }
        let dx = (hi - lo) / T::from_usize_lossy(count - 1);
        let normal: Vec<T> = (0..count).map(|j| lo + dx * T::from_usize_lossy(j)).collect();
        let mut values = Vec::with_capacity(tangential.len() * count);
        for p in &tangential.points {
            for &xn in &normal {
                values.push(f(p, xn));
            }
        }
        Self::new(tangential, normal, h, values)
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<Complex<T>>) -> Result<Self> {
        Self::new(self.tangential.clone(), self.normal.clone(), self.h, values)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![Complex::new(T::zero(), T::zero()); self.values.len()],
            ..self.clone()
        }
    }

    pub fn normal_spacing(&self) -> T {
        self.normal[1] - self.normal[0]
    }

    pub fn at(&self, i: usize, j: usize) -> Complex<T> {
        self.values[i * self.normal.len() + j]
    }

    fn column(&self, i: usize) -> &[Complex<T>] {
        let m = self.normal.len();
        &self.values[i * m..(i + 1) * m]
    }

    /// Restriction to the level set `{x_n = normal[j]}`.
    pub fn slice(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.tangential.len()).map(|i| self.at(i, j)).collect()
    }

    /// Index of the `x_n = 0` slice.
    pub fn zero_index(&self) -> Result<usize> {
        let tol = self.normal_spacing() * T::lit(1e-9);
        self.normal
            .iter()
            .position(|x| x.abs() <= tol)
            .ok_or_else(|| Error::Domain("tube grid has no x_n = 0 slice".into()))
    }

    /// `gamma_H v`.
    pub fn trace(&self) -> Result<Vec<Complex<T>>> {
        Ok(self.slice(self.zero_index()?))
    }

    /// `N(x_n) = |gamma_{H_{x_n}} v|^2_{L^2(H)}` for every normal node.
    pub fn slice_norms_sq(&self) -> Vec<T> {
        (0..self.normal.len())
            .map(|j| {
                let m: Vec<T> = (0..self.tangential.len()).map(|i| self.at(i, j).norm_sqr()).collect();
                self.tangential.integrate(&m)
            })
            .collect()
    }

    /// `|v|^2` over the whole tube.
    pub fn norm_sq(&self) -> T {
        let rule = CellRule::new(self.normal.len(), self.normal_spacing(), T::zero());
        rule.integral(&self.slice_norms_sq())
    }

    /// Part of the tube with `x_n >= 0`, multiplied by `chi`.
    pub fn positive_part(&self, chi: impl Fn(&[T], T) -> T) -> Result<Self> {
        let j0 = self.zero_index()?;
        let normal = self.normal[j0..].to_vec();
        let mut values = Vec::with_capacity(self.tangential.len() * normal.len());
        for (i, p) in self.tangential.points.iter().enumerate() {
            for (j, &xn) in normal.iter().enumerate() {
                values.push(self.at(i, j0 + j) * chi(p, xn));
            }
        }
        Self::new(self.tangential.clone(), normal, self.h, values)
    }

    /// Multiplication by a function of `x'` only.
    pub fn multiply_tangential(&self, psi: impl Fn(&[T]) -> Complex<T>) -> Self {
        let m = self.normal.len();
        let mut out = self.clone();
        for (i, p) in self.tangential.points.iter().enumerate() {
            let s = psi(p);
            for v in &mut out.values[i * m..(i + 1) * m] {
                *v *= s;
            }
        }
        out
    }

    /// `d/dx_n` by 9-point finite differences, shifted at the edges.
    pub fn normal_derivative(&self) -> Self {
        let m = self.normal.len();
        let d = UniformDerivative::new(m, self.normal_spacing(), STENCIL);
        let mut out = self.clone();
        for i in 0..self.tangential.len() {
            let col = d.apply(self.column(i));
            out.values[i * m..(i + 1) * m].copy_from_slice(&col);
        }
        out
    }

    /// `(hD_{x_n} - i b0) v`.
    pub fn transport_operator(&self, b0: T) -> Self {
        let dv = self.normal_derivative();
        let ih = Complex::new(T::zero(), -self.h);
        let ib = Complex::new(T::zero(), b0);
        let values = dv.values.iter().zip(&self.values).map(|(d, v)| *d * ih - *v * ib).collect();
        Self { values, ..self.clone() }
    }
}

/// Weights `W[k][s] = int_0^d e^{-a (d - t)} L_s(x_k + t) dt` on each cell of
/// a uniform grid, with `L_s` the Lagrange basis of a local 6-node stencil.
#[derive(Clone, Debug)]
struct CellRule<T> {
    starts: Vec<usize>,
    weights: Vec<Vec<T>>,
    decay: T,
}

impl<T: Real> CellRule<T> {
    fn new(count: usize, dx: T, rate: T) -> Self {
        let width = INTERP_NODES.min(count);
        let (gx, gw) = gauss_legendre(20);
        let mut starts = Vec::with_capacity(count.saturating_sub(1));
        let mut weights = Vec::with_capacity(count.saturating_sub(1));
        for k in 0..count.saturating_sub(1) {
            let start = k.saturating_sub(width / 2 - 1).min(count - width);
            let offsets: Vec<T> = (0..width).map(|m| T::from_usize_lossy(start + m) - T::from_usize_lossy(k)).collect();
            let mut w = vec![T::zero(); width];
            for (x, wq) in gx.iter().zip(&gw) {
                let s = T::lit(0.5 * (x + 1.0));
                let kernel = (-rate * dx * (T::one() - s)).exp() * dx * T::lit(0.5 * wq);
                for (m, wm) in w.iter_mut().enumerate() {
                    let mut l = T::one();
                    for (r, o) in offsets.iter().enumerate() {
                        if r != m {
                            l = l * (s - *o) / (offsets[m] - *o);
                        }
                    }
                    *wm += kernel * l;
                }
            }
            starts.push(start);
            weights.push(w);
        }
        Self {
            starts,
            weights,
            decay: (-rate * dx).exp(),
        }
    }

    /// `y' = -rate y + f`, `y(x_0) = 0`, at every node.
    fn propagate<V>(&self, source: &[V]) -> Vec<V>
    where
        V: Copy + std::ops::Add<Output = V> + std::ops::Mul<T, Output = V> + num_traits::Zero,
    {
        let mut out = Vec::with_capacity(self.starts.len() + 1);
        let mut y = V::zero();
        out.push(y);
        for (s, w) in self.starts.iter().zip(&self.weights) {
            let inc = w.iter().enumerate().fold(V::zero(), |acc, (m, c)| acc + source[s + m] * *c);
            y = y * self.decay + inc;
            out.push(y);
        }
        out
    }

    fn integral(&self, f: &[T]) -> T {
        self.propagate(f).last().copied().unwrap_or(T::zero())
    }
}

/// `(E f)(x', x_n) = -(i/h) int_0^{x_n} e^{-(x_n - s) B_0 / h} f(x', s) ds`
/// on the half-tube `x_n >= 0`.
pub fn apply_propagator<T: Real>(source: &TubeFunction<T>, b0: T, h: T) -> Result<TubeFunction<T>> {
    if !(b0 > T::zero()) {
        return Err(Error::Domain(format!("B_0 must be positive, got {b0}")));
    }
    let tol = source.normal_spacing() * T::lit(1e-9);
    if source.normal[0].abs() > tol {
        return Err(Error::Domain("propagator source must start at x_n = 0".into()));
    }
    let m = source.normal.len();
    let rule = CellRule::new(m, source.normal_spacing(), b0 / h);
    let scale = Complex::new(T::zero(), -T::one() / h);
    let mut out = source.clone();
    out.h = h;
    for i in 0..source.tangential.len() {
        let col = rule.propagate(source.column(i));
        for (j, v) in col.into_iter().enumerate() {
            out.values[i * m + j] = v * scale;
        }
    }
    Ok(out)
}

/// `max |(hD_n - iB_0) E f + f| / max |f|`.
pub fn propagator_ode_residual<T: Real>(ef: &TubeFunction<T>, source: &TubeFunction<T>, b0: T) -> T {
    let lhs = ef.transport_operator(b0);
    let scale = source.values.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    let worst = lhs
        .values
        .iter()
        .zip(&source.values)
        .fold(T::zero(), |m, (a, f)| m.max((*a + *f).norm()));
    if scale > T::zero() {
        worst / scale
    } else {
        worst
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TransportSample<T> {
    pub x_n: T,
    pub mass: T,
    pub mass_derivative: T,
    pub forcing: T,
    pub defect: T,
}

/// Defect of `h N'/2 + B_0 N = D` along the tube; the relative defect is
/// scaled by `(|B_0| + h / extent) max N`.
#[derive(Clone, Debug, Serialize)]
pub struct TransportCheck<T> {
    pub max_defect: T,
    pub relative_defect: T,
    pub profile: Vec<TransportSample<T>>,
}

/// Checks `h N'(x_n)/2 + B_0 N(x_n) = D(x_n)` with
/// `N = |gamma_{H_{x_n}} v|^2` and `D = Re <i F, v>_{L^2(H_{x_n})}`, where
/// `F = (hD_n - iB_0) v` is the declared forcing (zero if absent).
pub fn transport_identity_check<T: Real>(
    v: &TubeFunction<T>,
    b0: T,
    h: T,
    forcing: Option<&TubeFunction<T>>,
) -> Result<TransportCheck<T>> {
    if let Some(f) = forcing {
        if f.values.len() != v.values.len() {
            return Err(Error::Domain("forcing and v live on different grids".into()));
        }
    }
    let mass = v.slice_norms_sq();
    let d = UniformDerivative::new(mass.len(), v.normal_spacing(), STENCIL);
    let dmass = d.apply(&mass);
    let ntan = v.tangential.len();
    let mut profile = Vec::with_capacity(mass.len());
    let mut max_defect = T::zero();
    let extent = v.normal[v.normal.len() - 1] - v.normal[0];
    let max_mass = mass.iter().fold(T::zero(), |m, v| m.max(*v));
    let mut scale = (b0.abs() + h / extent) * max_mass;
    for j in 0..mass.len() {
        let forcing_j = match forcing {
            Some(f) => {
                let dens: Vec<T> = (0..ntan)
                    .map(|i| (Complex::new(T::zero(), T::one()) * f.at(i, j) * v.at(i, j).conj()).re)
                    .collect();
                v.tangential.integrate(&dens)
            }
            None => T::zero(),
        };
        let half_h = h / T::lit(2.0);
        let defect = half_h * dmass[j] + b0 * mass[j] - forcing_j;
        max_defect = max_defect.max(defect.abs());
        scale = scale.max(forcing_j.abs());
        profile.push(TransportSample {
            x_n: v.normal[j],
            mass: mass[j],
            mass_derivative: dmass[j],
            forcing: forcing_j,
            defect,
        });
    }
    let relative_defect = if max_defect == T::zero() { T::zero() } else { max_defect / scale };
    Ok(TransportCheck {
        max_defect,
        relative_defect,
        profile,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RestrictionBound<T> {
    /// `h |gamma_H v|^2`.
    pub lhs: T,
    /// `2 B_0 |v|^2` over `0 <= x_n <= eps/8`.
    pub rhs: T,
    /// Twice the integrated transport defect plus roundoff.
    pub tolerance: T,
    pub verdict: bool,
    pub transport: TransportCheck<T>,
}

/// Integrates the transport identity across `0 <= x_n <= eps/8`.
pub fn tube_to_restriction_bound<T: Real>(v: &TubeFunction<T>, b0: T, eps: T, h: T) -> Result<RestrictionBound<T>> {
    let dx = v.normal_spacing();
    let top = eps / T::lit(8.0);
    if v.normal[0].abs() > dx * T::lit(1e-9) || (v.normal[v.normal.len() - 1] - top).abs() > dx * T::lit(1e-6) {
        return Err(Error::Precondition(format!(
            "v must be sampled on 0 <= x_n <= eps/8 = {top}, got [{}, {}]",
            v.normal[0],
            v.normal[v.normal.len() - 1]
        )));
    }
    let transport = transport_identity_check(v, b0, h, None)?;
    let mass: Vec<T> = transport.profile.iter().map(|s| s.mass).collect();
    let rule = CellRule::new(mass.len(), dx, T::zero());
    let lhs = h * mass[0];
    let rhs = T::lit(2.0) * b0 * rule.integral(&mass);
    let defects: Vec<T> = transport.profile.iter().map(|s| s.defect.abs()).collect();
    let tolerance = T::lit(2.0) * rule.integral(&defects) + T::lit(1e-10) * lhs.max(rhs);
    Ok(RestrictionBound {
        lhs,
        rhs,
        tolerance,
        verdict: lhs >= rhs - tolerance,
        transport,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_rule_integrates_polynomials() {
        let rule = CellRule::new(11, 0.1, 0.0);
        let f: Vec<f64> = (0..11).map(|i| (0.1 * i as f64).powi(5)).collect();
        assert!((rule.integral(&f) - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn propagator_constant_source() {
        let h = 0.05_f64;
        let b0 = 1.5_f64;
        let t = TubeFunction::sample(TangentialGrid::point(), 0.0, 0.5, 81, h, |_, _| Complex::new(2.0, 0.0)).unwrap();
        let ef = apply_propagator(&t, b0, h).unwrap();
        for (j, &x) in t.normal.iter().enumerate() {
            let exact = Complex::new(0.0, -2.0 / b0) * (1.0 - (-x * b0 / h).exp());
            assert!((ef.at(0, j) - exact).norm() < 1e-12);
        }
    }
}
