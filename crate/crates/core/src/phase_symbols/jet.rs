//! Truncated multivariate Taylor series ("jets") with complex coefficients.
//!
//! A jet of order `r` at a base point stores the Taylor coefficients
//! `c_alpha` of `f(x0 + dx) = sum c_alpha dx^alpha` for `|alpha| <= r`.
//! Monomials are ordered by total degree so a jet of lower order is a
//! prefix of the coefficient vector.

use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex;

use crate::real::Real;

/// Monomial tables shared by all jets with the same variable count and
/// maximal order.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    monos: Vec<Vec<u8>>,
    /// `count[r]` = number of monomials of degree `<= r`.
    count: Vec<usize>,
    /// `(i, j, k)` with `mono_i + mono_j = mono_k`, sorted by degree of `k`.
    products: Vec<(u32, u32, u32)>,
    /// `prod_count[r]` = number of products whose result has degree `<= r`.
    prod_count: Vec<usize>,
    /// `raise[v][k]` = index of `mono_k + e_v` when it exists.
    raise: Vec<Vec<Option<u32>>>,
    factorial_weight: Vec<f64>,
}

impl JetSpace {
    fn build(nvars: usize, order: usize) -> Self {
        let mut monos: Vec<Vec<u8>> = vec![vec![0; nvars]];
        let mut count = vec![1usize];
        let mut frontier: Vec<Vec<u8>> = vec![vec![0; nvars]];
        for _deg in 1..=order {
            let mut next: Vec<Vec<u8>> = Vec::new();
            for m in &frontier {
                let last = m.iter().rposition(|&e| e > 0).unwrap_or(0);
                for v in last..nvars {
                    let mut q = m.clone();
                    q[v] += 1;
                    next.push(q);
                }
            }
            monos.extend(next.iter().cloned());
            count.push(monos.len());
            frontier = next;
        }
        let index: HashMap<Vec<u8>, usize> =
            monos.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let deg = |m: &Vec<u8>| m.iter().map(|&e| e as usize).sum::<usize>();
        let mut products = Vec::new();
        for (i, a) in monos.iter().enumerate() {
            for (j, b) in monos.iter().enumerate() {
                if deg(a) + deg(b) <= order {
                    let s: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                    products.push((i as u32, j as u32, index[&s] as u32));
                }
            }
        }
        products.sort_by_key(|&(_, _, k)| (deg(&monos[k as usize]), k));
        let mut prod_count = vec![0usize; order + 1];
        for r in 0..=order {
            prod_count[r] = products
                .iter()
                .take_while(|&&(_, _, k)| deg(&monos[k as usize]) <= r)
                .count();
        }
        let raise = (0..nvars)
            .map(|v| {
                monos
                    .iter()
                    .map(|m| {
                        let mut q = m.clone();
                        q[v] += 1;
                        index.get(&q).map(|&k| k as u32)
                    })
                    .collect()
            })
            .collect();
        let factorial_weight = monos
            .iter()
            .map(|m| m.iter().map(|&e| factorial(e as usize)).product())
            .collect();
        Self {
            nvars,
            order,
            monos,
            count,
            products,
            prod_count,
            raise,
            factorial_weight,
        }
    }

    /// Shared space for `nvars` variables up to `order`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self, order: usize) -> usize {
        self.count[order.min(self.order)]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn monomial(&self, k: usize) -> &[u8] {
        &self.monos[k]
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        let d: usize = alpha.iter().map(|&e| e as usize).sum();
        if d > self.order {
            return None;
        }
        (self.count.get(d.wrapping_sub(1)).copied().unwrap_or(0)..self.count[d])
            .find(|&k| self.monos[k] == alpha)
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// Truncated Taylor expansion at a point.
#[derive(Clone, Debug)]
pub struct Jet<T> {
    space: Arc<JetSpace>,
    valid: usize,
    c: Vec<Complex<T>>,
}

impl<T: Real> Jet<T> {
    pub fn constant(space: &Arc<JetSpace>, order: usize, v: Complex<T>) -> Self {
        let valid = order.min(space.order);
        let mut c = vec![Complex::new(T::zero(), T::zero()); space.len(valid)];
        c[0] = v;
        Self {
            space: space.clone(),
            valid,
            c,
        }
    }

    /// The coordinate function `x_var` expanded at `x0`.
    pub fn variable(space: &Arc<JetSpace>, order: usize, var: usize, x0: T) -> Self {
        let mut j = Self::constant(space, order, Complex::new(x0, T::zero()));
        if j.valid >= 1 {
            j.c[1 + var] = Complex::new(T::one(), T::zero());
        }
        j
    }

    pub fn from_coefficients(space: &Arc<JetSpace>, order: usize, c: Vec<Complex<T>>) -> Self {
        let valid = order.min(space.order);
        assert_eq!(c.len(), space.len(valid));
        Self {
            space: space.clone(),
            valid,
            c,
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.valid
    }

    pub fn value(&self) -> Complex<T> {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[Complex<T>] {
        &self.c
    }

    /// Partial derivative `d^alpha f(x0)`; `None` above the jet's order.
    pub fn partial(&self, alpha: &[u8]) -> Option<Complex<T>> {
        let k = self.space.index_of(alpha)?;
        if k >= self.c.len() {
            return None;
        }
        Some(self.c[k] * T::lit(self.space.factorial_weight[k]))
    }

    pub fn truncate(&self, order: usize) -> Self {
        let valid = order.min(self.valid);
        Self {
            space: self.space.clone(),
            valid,
            c: self.c[..self.space.len(valid)].to_vec(),
        }
    }

    /// Exact derivative in variable `var`; the order drops by one.
    pub fn derivative(&self, var: usize) -> Self {
        assert!(self.valid >= 1, "cannot differentiate an order-0 jet");
        let valid = self.valid - 1;
        let n = self.space.len(valid);
        let mut c = Vec::with_capacity(n);
        for k in 0..n {
            let up = self.space.raise[var][k].expect("raised monomial in space") as usize;
            let e = self.space.monos[k][var] as f64 + 1.0;
            c.push(self.c[up] * T::lit(e));
        }
        Self {
            space: self.space.clone(),
            valid,
            c,
        }
    }

    /// Mixed derivative `d^alpha`, dropping the order by `|alpha|`.
    pub fn derivative_multi(&self, alpha: &[u8]) -> Self {
        let mut out = self.clone();
        for (v, &e) in alpha.iter().enumerate() {
            for _ in 0..e {
                out = out.derivative(v);
            }
        }
        out
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            space: self.space.clone(),
            valid: self.valid,
            c: self.c.iter().map(|v| *v * s).collect(),
        }
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        let valid = self.valid.min(rhs.valid);
        let n = self.space.len(valid);
        let c = (0..n).map(|k| f(self.c[k], rhs.c[k])).collect();
        Self {
            space: self.space.clone(),
            valid,
            c,
        }
    }

    pub fn mul_jet(&self, rhs: &Self) -> Self {
        let valid = self.valid.min(rhs.valid);
        let n = self.space.len(valid);
        let mut c = vec![Complex::new(T::zero(), T::zero()); n];
        for &(i, j, k) in &self.space.products[..self.space.prod_count[valid]] {
            c[k as usize] += self.c[i as usize] * rhs.c[j as usize];
        }
        Self {
            space: self.space.clone(),
            valid,
            c,
        }
    }

    /// `f(self)` for a univariate `f` given its Taylor coefficients
    /// `f^(k)(a0)/k!` at the value of `self`.
    pub fn compose_series(&self, coeffs: &[Complex<T>]) -> Self {
        let mut nil = self.clone();
        nil.c[0] = Complex::new(T::zero(), T::zero());
        let mut out = Jet::constant(&self.space, self.valid, coeffs[0]);
        let mut power = Jet::constant(&self.space, self.valid, Complex::new(T::one(), T::zero()));
        for coeff in coeffs.iter().take(self.valid + 1).skip(1) {
            power = power.mul_jet(&nil);
            for (o, p) in out.c.iter_mut().zip(&power.c) {
                *o += *p * *coeff;
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        let coeffs: Vec<_> = (0..=self.valid)
            .map(|k| e / T::lit(factorial(k)))
            .collect();
        self.compose_series(&coeffs)
    }

    pub fn ln(&self) -> Self {
        let a = self.c[0];
        let mut coeffs = vec![a.ln()];
        for k in 1..=self.valid {
            let sign = if k % 2 == 1 { T::one() } else { -T::one() };
            coeffs.push(a.powi(-(k as i32)) * (sign / T::lit(k as f64)));
        }
        self.compose_series(&coeffs)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = (self.c[0].sin(), self.c[0].cos());
        let cycle = [s, c, -s, -c];
        let coeffs: Vec<_> = (0..=self.valid)
            .map(|k| cycle[k % 4] / T::lit(factorial(k)))
            .collect();
        self.compose_series(&coeffs)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = (self.c[0].sin(), self.c[0].cos());
        let cycle = [c, -s, -c, s];
        let coeffs: Vec<_> = (0..=self.valid)
            .map(|k| cycle[k % 4] / T::lit(factorial(k)))
            .collect();
        self.compose_series(&coeffs)
    }

    /// `self^p` for a complex exponent through the binomial series.
    pub fn powc(&self, p: Complex<T>) -> Self {
        let a = self.c[0];
        let mut coeffs = Vec::with_capacity(self.valid + 1);
        let mut binom = Complex::new(T::one(), T::zero());
        for k in 0..=self.valid {
            if k > 0 {
                binom = binom * (p - T::lit((k - 1) as f64)) / T::lit(k as f64);
            }
            coeffs.push(binom * a.powc(p - T::lit(k as f64)));
        }
        self.compose_series(&coeffs)
    }

    pub fn powi(&self, n: i32) -> Self {
        if n >= 0 {
            let mut out = Jet::constant(&self.space, self.valid, Complex::new(T::one(), T::zero()));
            for _ in 0..n {
                out = out.mul_jet(self);
            }
            out
        } else {
            self.recip().powi(-n)
        }
    }

    pub fn recip(&self) -> Self {
        let a = self.c[0];
        let inv = Complex::new(T::one(), T::zero()) / a;
        let mut coeffs = Vec::with_capacity(self.valid + 1);
        let mut term = inv;
        for _ in 0..=self.valid {
            coeffs.push(term);
            term = -term * inv;
        }
        self.compose_series(&coeffs)
    }

    pub fn sqrt(&self) -> Self {
        self.powc(Complex::new(T::lit(0.5), T::zero()))
    }
}

impl<T: Real> Add for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: &Jet<T>) -> Jet<T> {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: &Jet<T>) -> Jet<T> {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<T: Real> Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: &Jet<T>) -> Jet<T> {
        self.mul_jet(rhs)
    }
}

impl<T: Real> Div for &Jet<T> {
    type Output = Jet<T>;
    fn div(self, rhs: &Jet<T>) -> Jet<T> {
        self.mul_jet(&rhs.recip())
    }
}

impl<T: Real> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.scale(Complex::new(-T::one(), T::zero()))
    }
}
