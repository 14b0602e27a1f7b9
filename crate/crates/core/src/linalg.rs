//! Banded matrices with partially pivoted LU, plus small dense helpers.

use crate::error::{Error, Result};
use crate::real::Real;

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Each row stores `2*kl + ku + 1` slots so that the LU factorization can
/// fill in the extra `kl` super-diagonals produced by row pivoting.
#[derive(Clone, Debug)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            T::zero()
        }
    }

    /// Adds `v` to entry `(i, j)`; the entry must lie inside the band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(
            self.in_band(i, j),
            "entry ({i},{j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j));
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut acc = T::zero();
            for j in lo..=hi {
                acc += self.data[self.slot(i, j)] * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn matvec_transpose(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                y[j] += self.data[self.slot(i, j)] * x[i];
            }
        }
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|` over the band.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            let hi = (i + self.ku.max(self.kl)).min(self.n - 1);
            for j in i..=hi {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandLu<T>> {
        let n = self.n;
        let kl = self.kl;
        let ku_f = self.kl + self.ku;
        let mut piv = vec![0usize; n];
        let scale = self
            .data
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()))
            .max(T::min_positive_value());
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for i in k + 1..=last {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best <= T::epsilon() * T::epsilon() * scale {
                return Err(Error::numerical(
                    "band-lu",
                    format!("singular pivot at column {k}"),
                ));
            }
            let jmax = (k + ku_f).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.slot(k, j);
                    let b = self.slot(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for i in k + 1..=last {
                let sik = self.slot(i, k);
                let l = self.data[sik] / pivot;
                self.data[sik] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..=jmax {
                    let skj = self.data[self.slot(k, j)];
                    let sij = self.slot(i, j);
                    self.data[sij] -= l * skj;
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// Factored band matrix.
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    m: BandMatrix<T>,
    piv: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    pub fn dim(&self) -> usize {
        self.m.n
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [T]) {
        let n = self.m.n;
        let kl = self.m.kl;
        let ku_f = self.m.kl + self.m.ku;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.m.data[self.m.slot(i, k)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..=(i + ku_f).min(n - 1) {
                acc -= self.m.data[self.m.slot(i, j)] * b[j];
            }
            b[i] = acc / self.m.data[self.m.slot(i, i)];
        }
    }

    /// Solves `A^T x = b` in place.
    pub fn solve_transpose(&self, b: &mut [T]) {
        let n = self.m.n;
        let kl = self.m.kl;
        let ku_f = self.m.kl + self.m.ku;
        for i in 0..n {
            let mut acc = b[i];
            for j in i.saturating_sub(ku_f)..i {
                acc -= self.m.data[self.m.slot(j, i)] * b[j];
            }
            b[i] = acc / self.m.data[self.m.slot(i, i)];
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                acc -= self.m.data[self.m.slot(i, k)] * b[i];
            }
            b[k] = acc;
            b.swap(k, self.piv[k]);
        }
    }
}

/// Permutation turning a periodic stencil of half-width `p` into a band of
/// half-width `2p`: the circle is walked outward from both ends at once.
pub fn periodic_interleave(n: usize) -> Vec<usize> {
    (0..n)
        .map(|i| if i < n.div_ceil(2) { 2 * i } else { 2 * (n - 1 - i) + 1 })
        .collect()
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Symmetric eigen-decomposition of a small dense matrix by cyclic Jacobi
/// rotations. Returns eigenvalues (ascending) and column eigenvectors.
pub fn jacobi_eigh<T: Real>(a: &[Vec<T>]) -> (Vec<T>, Vec<Vec<T>>) {
    let n = a.len();
    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() < T::epsilon() * T::epsilon() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < T::min_positive_value() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (two * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap());
    let vals = order.iter().map(|&i| m[i][i]).collect();
    let vecs = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (vals, vecs)
}

/// Ordinary least squares on a dense design matrix via normal equations
/// solved by Gaussian elimination. Returns coefficients and the inverse of
/// the normal matrix (for standard errors).
pub fn least_squares<T: Real>(
    design: &[Vec<T>],
    y: &[T],
    weights: Option<&[T]>,
) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let p = design.first().map(|r| r.len()).unwrap_or(0);
    let mut ata = vec![vec![T::zero(); p]; p];
    let mut aty = vec![T::zero(); p];
    for (r, row) in design.iter().enumerate() {
        let w = weights.map(|w| w[r]).unwrap_or(T::one());
        for i in 0..p {
            aty[i] += w * row[i] * y[r];
            for j in 0..p {
                ata[i][j] += w * row[i] * row[j];
            }
        }
    }
    let inv = invert_dense(&ata)?;
    let coef = (0..p)
        .map(|i| (0..p).fold(T::zero(), |s, j| s + inv[i][j] * aty[j]))
        .collect();
    Ok((coef, inv))
}

pub fn invert_dense<T: Real>(a: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let n = a.len();
    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut inv: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].abs().partial_cmp(&m[j][k].abs()).unwrap())
            .unwrap();
        if m[p][k].abs() <= T::min_positive_value() {
            return Err(Error::numerical("least-squares", "singular normal matrix"));
        }
        m.swap(k, p);
        inv.swap(k, p);
        let d = m[k][k];
        for j in 0..n {
            m[k][j] /= d;
            inv[k][j] /= d;
        }
        for i in 0..n {
            if i != k {
                let f = m[i][k];
                for j in 0..n {
                    let mkj = m[k][j];
                    let ikj = inv[k][j];
                    m[i][j] -= f * mkj;
                    inv[i][j] -= f * ikj;
                }
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> BandMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                a.add(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        a
    }

    #[test]
    fn band_lu_solves_both_orientations() {
        let a = random_band(40, 3, 2, 1);
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; 40];
        a.matvec(&x, &mut b);
        let lu = a.clone().factor().unwrap();
        let mut sol = b.clone();
        lu.solve(&mut sol);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-10);
        }
        a.matvec_transpose(&x, &mut b);
        let mut sol = b.clone();
        lu.solve_transpose(&mut sol);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-10);
        }
    }

    #[test]
    fn interleave_makes_periodic_neighbors_close() {
        let n = 11;
        let perm = periodic_interleave(n);
        let mut seen = perm.clone();
        seen.sort();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
        for i in 0..n {
            for d in 1..=2 {
                let j = (i + d) % n;
                assert!(perm[i].abs_diff(perm[j]) <= 2 * d);
            }
        }
    }

    #[test]
    fn jacobi_diagonalizes() {
        let a = vec![
            vec![2.0, 1.0, 0.0],
            vec![1.0, 2.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ];
        let (vals, _) = jacobi_eigh(&a);
        let s2 = 2f64.sqrt();
        assert!((vals[0] - (2.0 - s2)).abs() < 1e-12);
        assert!((vals[2] - (2.0 + s2)).abs() < 1e-12);
    }

    #[test]
    fn least_squares_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let design: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let y: Vec<f64> = xs.iter().map(|&x| 2.0 + 0.5 * x).collect();
        let (c, _) = least_squares(&design, &y, None).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
    }
}
