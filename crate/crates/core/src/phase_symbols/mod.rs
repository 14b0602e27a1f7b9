//! Phase-space points, asymptotic symbol expansions, Poisson brackets,
//! the standard-quantization `#`-product and ellipticity checks.
//!
//! Index convention: the last coordinate is the normal one, so
//! `y = (y', y_n)` and `xi = (xi', xi_n)`.

pub mod expr;
pub mod field;
pub mod jet;
pub mod parse;

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

pub use expr::{Expr, ExprAlgebra, Var};
pub use field::{ConstField, DerivedField, ExprField, Field, FieldRef, FnField};
pub use jet::{Jet, JetSpace};

use crate::error::{Error, Result};
use crate::real::Real;
use field::{check_order, embed, multi_factorial, multi_indices};

/// Point `(y, xi)` of `T*R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint<T> {
    pub y: Vec<T>,
    pub xi: Vec<T>,
}

impl<T: Real> PhasePoint<T> {
    pub fn new(y: Vec<T>, xi: Vec<T>) -> Result<Self> {
        if y.len() != xi.len() {
            return Err(Error::Domain(format!(
                "position has {} coordinates, momentum {}",
                y.len(),
                xi.len()
            )));
        }
        if y.iter().chain(&xi).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite phase-space coordinate".into()));
        }
        Ok(Self { y, xi })
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// Coordinate `k` of the flattened `(y, xi)` vector.
    pub fn coord(&self, k: usize) -> T {
        field::coordinate(self, k)
    }
}

/// Axis-aligned box in phase space (bounds over `(y, xi)` flattened).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBox<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> PhaseBox<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() || !lo.len().is_multiple_of(2) {
            return Err(Error::Domain("phase box needs 2n lower and upper bounds".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::Domain("phase box with empty side".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, pt: &PhasePoint<T>) -> bool {
        (0..self.lo.len()).all(|k| {
            let v = pt.coord(k);
            v >= self.lo[k] && v <= self.hi[k]
        })
    }
}

/// Uniform tensor grid over a phase box, endpoints included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub counts: Vec<usize>,
}

impl<T: Real> PhaseGrid<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>, counts: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() || !lo.len().is_multiple_of(2) {
            return Err(Error::Domain("grid needs 2n axes".into()));
        }
        if counts.contains(&0) {
            return Err(Error::Domain("empty grid".into()));
        }
        Ok(Self { lo, hi, counts })
    }

    pub fn uniform(lo: Vec<T>, hi: Vec<T>, per_axis: usize) -> Result<Self> {
        let n = lo.len();
        Self::new(lo, hi, vec![per_axis; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len() / 2
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> T {
        if self.counts[axis] <= 1 {
            T::zero()
        } else {
            (self.hi[axis] - self.lo[axis]) / T::from_usize_lossy(self.counts[axis] - 1)
        }
    }

    pub fn node(&self, axis: usize, i: usize) -> T {
        self.lo[axis] + self.spacing(axis) * T::from_usize_lossy(i)
    }

    /// Multi-index of a flat index (axis 0 slowest).
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.counts.len()];
        for a in (0..self.counts.len()).rev() {
            idx[a] = flat % self.counts[a];
            flat /= self.counts[a];
        }
        idx
    }

    pub fn point(&self, flat: usize) -> PhasePoint<T> {
        let idx = self.unflatten(flat);
        let n = self.dim();
        let coords: Vec<T> = idx.iter().enumerate().map(|(a, &i)| self.node(a, i)).collect();
        PhasePoint {
            y: coords[..n].to_vec(),
            xi: coords[n..].to_vec(),
        }
    }
}

/// `a ~ h^{-m} (a_0 + h a_1 + h^2 a_2 + ...)`.
#[derive(Clone)]
pub struct SymbolExpansion<T> {
    order: i32,
    terms: Vec<FieldRef<T>>,
    region: Option<PhaseBox<T>>,
    dim: usize,
}

impl<T: Real> std::fmt::Debug for SymbolExpansion<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymbolExpansion")
            .field("order", &self.order)
            .field(
                "terms",
                &self.terms.iter().map(|t| t.describe()).collect::<Vec<_>>(),
            )
            .field("dim", &self.dim)
            .finish()
    }
}

impl<T: Real> SymbolExpansion<T> {
    pub fn new(order: i32, terms: Vec<FieldRef<T>>) -> Result<Self> {
        let dim = terms
            .first()
            .ok_or_else(|| Error::Domain("symbol expansion needs at least one term".into()))?
            .dim();
        if terms.iter().any(|t| t.dim() != dim) {
            return Err(Error::Domain("terms of mixed dimension".into()));
        }
        Ok(Self {
            order,
            terms,
            region: None,
            dim,
        })
    }

    /// Expansion from expression trees, one per power of `h`.
    pub fn from_exprs(order: i32, dim: usize, exprs: Vec<Expr>) -> Result<Self> {
        let terms = exprs
            .into_iter()
            .map(|e| ExprField::new(e, dim).map(|f| Arc::new(f) as FieldRef<T>))
            .collect::<Result<Vec<_>>>()?;
        Self::new(order, terms)
    }

    pub fn constant(dim: usize, v: Complex<T>) -> Self {
        Self::new(0, vec![Arc::new(ConstField { value: v, dim })]).expect("one term")
    }

    pub fn with_region(mut self, region: PhaseBox<T>) -> Result<Self> {
        if region.lo.len() != 2 * self.dim {
            return Err(Error::Domain("region dimension mismatch".into()));
        }
        self.region = Some(region);
        Ok(self)
    }

    pub fn order(&self) -> i32 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of terms minus one.
    pub fn truncation(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn terms(&self) -> &[FieldRef<T>] {
        &self.terms
    }

    pub fn term(&self, j: usize) -> Option<&FieldRef<T>> {
        self.terms.get(j)
    }

    pub fn principal(&self) -> &FieldRef<T> {
        &self.terms[0]
    }

    pub fn region(&self) -> Option<&PhaseBox<T>> {
        self.region.as_ref()
    }

    pub fn check_domain(&self, pt: &PhasePoint<T>) -> Result<()> {
        if pt.dim() != self.dim {
            return Err(Error::Domain(format!(
                "point of dimension {} for a symbol of dimension {}",
                pt.dim(),
                self.dim
            )));
        }
        match &self.region {
            Some(b) if !b.contains(pt) => Err(Error::Domain(format!(
                "point y={:?} xi={:?} outside the declared region",
                pt.y, pt.xi
            ))),
            _ => Ok(()),
        }
    }

    /// Lowest derivative order available from every term.
    pub fn available_order(&self) -> usize {
        self.terms.iter().map(|t| t.max_order()).min().unwrap_or(0)
    }

    /// Truncated copy keeping terms `0..=k`.
    pub fn truncated(&self, k: usize) -> Self {
        let mut out = self.clone();
        out.terms.truncate(k + 1);
        out
    }
}

/// `h^{-m} sum_j h^j a_j(pt)`.
pub fn eval_symbol<T: Real>(sym: &SymbolExpansion<T>, pt: &PhasePoint<T>, h: T) -> Result<Complex<T>> {
    if !(h > T::zero()) {
        return Err(Error::Domain(format!("h must be positive, got {h}")));
    }
    sym.check_domain(pt)?;
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut hp = T::one();
    for t in sym.terms() {
        acc += t.value(pt, h)? * hp;
        hp *= h;
    }
    Ok(acc * h.powi(-sym.order()))
}

/// `{f, g} = sum_k (d_xi_k f d_y_k g - d_y_k f d_xi_k g)`, so `{xi, y} = 1`.
pub fn poisson_bracket<T: Real>(
    f: &dyn Field<T>,
    g: &dyn Field<T>,
    pt: &PhasePoint<T>,
    h: T,
) -> Result<Complex<T>> {
    check_order(f, 1)?;
    check_order(g, 1)?;
    let jf = f.jet(pt, h, 1)?;
    let jg = g.jet(pt, h, 1)?;
    let n = pt.dim();
    let c = |j: &Jet<T>, v: usize| j.coefficients()[1 + v];
    let mut acc = Complex::new(T::zero(), T::zero());
    for k in 0..n {
        acc += c(&jf, n + k) * c(&jg, k) - c(&jf, k) * c(&jg, n + k);
    }
    if !acc.re.is_finite() || !acc.im.is_finite() {
        return Err(Error::numerical("poisson-bracket", "non-finite derivative"));
    }
    Ok(acc)
}

/// `{Re p, Im p}` of a single complex point function, by central differences.
pub fn real_imag_bracket_fd<T: Real>(
    p: &dyn Fn(&PhasePoint<T>) -> Complex<T>,
    pt: &PhasePoint<T>,
) -> Result<T> {
    let g = field::fd_gradient(p, pt)?;
    let n = pt.dim();
    let mut acc = T::zero();
    for k in 0..n {
        acc += g[n + k].re * g[k].im - g[k].re * g[n + k].im;
    }
    Ok(acc)
}

fn imag_power<T: Real>(l: usize) -> Complex<T> {
    // (h/i)^l carries (-i)^l
    match l % 4 {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), -T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), T::one()),
    }
}

/// Coefficient of `h^j` in `a # b` from jets of the terms of `a` and `b`.
///
/// `a_jets[i]` and `b_jets[k]` must have order at least `r + j`; the result
/// has order `r`.
pub(crate) fn sharp_coefficient<T: Real>(
    a_jets: &[Jet<T>],
    b_jets: &[Jet<T>],
    j: usize,
    r: usize,
    n: usize,
) -> Jet<T> {
    let space = a_jets[0].space().clone();
    let mut acc = Jet::constant(&space, r, Complex::new(T::zero(), T::zero()));
    for l in 0..=j {
        let phase = imag_power::<T>(l);
        for alpha in multi_indices(n, l) {
            let w = phase / T::lit(multi_factorial(&alpha));
            let da = embed(&alpha, true);
            let db = embed(&alpha, false);
            for i in 0..=(j - l) {
                let k = j - l - i;
                if i >= a_jets.len() || k >= b_jets.len() {
                    continue;
                }
                let term = a_jets[i]
                    .derivative_multi(&da)
                    .truncate(r)
                    .mul_jet(&b_jets[k].derivative_multi(&db).truncate(r));
                acc = &acc + &term.scale(w);
            }
        }
    }
    acc
}

/// Standard-quantization composition truncated at `h^K`:
/// `a # b = sum_{|alpha| <= K} (1/alpha!) (h/i)^|alpha| d_xi^alpha a d_y^alpha b`.
pub fn compose<T: Real>(
    a: &SymbolExpansion<T>,
    b: &SymbolExpansion<T>,
    k_max: usize,
) -> Result<SymbolExpansion<T>> {
    if a.dim() != b.dim() {
        return Err(Error::Domain("composing symbols of different dimension".into()));
    }
    let avail = a.available_order().min(b.available_order());
    if k_max > avail {
        return Err(Error::Capability(format!(
            "composition to order {k_max} needs derivatives of order {k_max}, only {avail} available"
        )));
    }
    let n = a.dim();
    let mut terms: Vec<FieldRef<T>> = Vec::with_capacity(k_max + 1);
    for j in 0..=k_max {
        let at: Vec<FieldRef<T>> = a.terms().iter().take(j + 1).cloned().collect();
        let bt: Vec<FieldRef<T>> = b.terms().iter().take(j + 1).cloned().collect();
        let max_order = avail.saturating_sub(j);
        let name = format!("(a#b)_{j}");
        terms.push(Arc::new(DerivedField::new(n, max_order, name, move |pt, h, r| {
            let aj = at
                .iter()
                .map(|t| t.jet(pt, h, r + j))
                .collect::<Result<Vec<_>>>()?;
            let bj = bt
                .iter()
                .map(|t| t.jet(pt, h, r + j))
                .collect::<Result<Vec<_>>>()?;
            Ok(sharp_coefficient(&aj, &bj, j, r, n))
        })));
    }
    let mut out = SymbolExpansion::new(a.order() + b.order(), terms)?;
    out.region = match (a.region(), b.region()) {
        (Some(ra), Some(rb)) => Some(PhaseBox {
            lo: ra.lo.iter().zip(&rb.lo).map(|(x, y)| x.max(*y)).collect(),
            hi: ra.hi.iter().zip(&rb.hi).map(|(x, y)| x.min(*y)).collect(),
        }),
        (Some(r), None) | (None, Some(r)) => Some(r.clone()),
        (None, None) => None,
    };
    Ok(out)
}

/// Result of an ellipticity scan.
#[derive(Clone, Debug, Serialize)]
pub struct EllipticityMargin<T> {
    pub margin: T,
    pub witness: PhasePoint<T>,
}

/// `min |a_0|` over the grid together with momentum-tail samples at radii
/// `xi_tail * {1, 2, 4}` along each momentum axis. Tail samples outside the
/// symbol's declared region are skipped.
pub fn ellipticity_margin<T: Real>(
    sym: &SymbolExpansion<T>,
    grid: &PhaseGrid<T>,
    xi_tail: T,
) -> Result<EllipticityMargin<T>> {
    if grid.is_empty() {
        return Err(Error::Domain("empty grid".into()));
    }
    let h = T::one();
    let a0 = sym.principal();
    let mut best: Option<(T, PhasePoint<T>)> = None;
    let mut visit = |pt: PhasePoint<T>| -> Result<()> {
        if let Some(r) = sym.region() {
            if !r.contains(&pt) {
                return Ok(());
            }
        }
        let v = a0.value(&pt, h)?.norm();
        if best.as_ref().map(|(b, _)| v < *b).unwrap_or(true) {
            best = Some((v, pt));
        }
        Ok(())
    };
    for flat in 0..grid.len() {
        visit(grid.point(flat))?;
    }
    let n = grid.dim();
    if xi_tail > T::zero() {
        let ny: usize = grid.counts[..n].iter().product();
        let stride = (ny / 64).max(1);
        for yflat in (0..ny).step_by(stride) {
            let mut rem = yflat;
            let mut y = vec![T::zero(); n];
            for a in (0..n).rev() {
                y[a] = grid.node(a, rem % grid.counts[a]);
                rem /= grid.counts[a];
            }
            for k in 0..n {
                for scale in [1.0, 2.0, 4.0] {
                    for sign in [-1.0, 1.0] {
                        let mut xi = vec![T::zero(); n];
                        xi[k] = xi_tail * T::lit(scale * sign);
                        visit(PhasePoint { y: y.clone(), xi })?;
                    }
                }
            }
        }
    }
    let (margin, witness) = best.ok_or_else(|| Error::Domain("no admissible sample".into()))?;
    Ok(EllipticityMargin { margin, witness })
}
