//! Finite-difference weights on arbitrary and uniform stencils.

use crate::real::Real;

/// Fornberg weights: `w[m][j]` approximates the `m`-th derivative at `x0`
/// from samples at `nodes[j]`, for `m <= max_order`.
pub fn fornberg_weights<T: Real>(x0: T, nodes: &[T], max_order: usize) -> Vec<Vec<T>> {
    let n = nodes.len();
    let mut c = vec![vec![T::zero(); n]; max_order + 1];
    if n == 0 {
        return c;
    }
    c[0][0] = T::one();
    let mut c1 = T::one();
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = T::one();
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (T::from_usize_lossy(k) * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - T::from_usize_lossy(k) * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First-derivative operator on `count` uniform nodes with spacing `dx`:
/// `stencil`-point rules, centred where possible and shifted at the edges.
#[derive(Clone, Debug)]
pub struct UniformDerivative<T> {
    starts: Vec<usize>,
    weights: Vec<Vec<T>>,
}

impl<T: Real> UniformDerivative<T> {
    pub fn new(count: usize, dx: T, stencil: usize) -> Self {
        let width = stencil.min(count).max(1);
        let half = width / 2;
        let mut starts = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for j in 0..count {
            let start = j.saturating_sub(half).min(count - width);
            let nodes: Vec<T> = (0..width).map(|m| T::from_usize_lossy(start + m)).collect();
            let w = fornberg_weights(T::from_usize_lossy(j), &nodes, 1);
            starts.push(start);
            weights.push(w[1].iter().map(|v| *v / dx).collect());
        }
        Self { starts, weights }
    }

    pub fn apply<V>(&self, values: &[V]) -> Vec<V>
    where
        V: Copy + std::ops::Add<Output = V> + std::ops::Mul<T, Output = V> + num_traits::Zero,
    {
        self.starts
            .iter()
            .zip(&self.weights)
            .map(|(&s, w)| w.iter().enumerate().fold(V::zero(), |acc, (m, c)| acc + values[s + m] * *c))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_three_point() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
    }

    #[test]
    fn polynomials_exact() {
        let d = UniformDerivative::new(20, 0.1, 9);
        let xs: Vec<f64> = (0..20).map(|i| 0.1 * i as f64).collect();
        let f: Vec<f64> = xs.iter().map(|x| x.powi(7) - 3.0 * x * x).collect();
        let df = d.apply(&f);
        for (x, v) in xs.iter().zip(df) {
            assert!((v - (7.0 * x.powi(6) - 6.0 * x)).abs() < 1e-9);
        }
    }
}
