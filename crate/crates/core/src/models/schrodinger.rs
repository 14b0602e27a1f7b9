//! Finite-difference eigenpairs of `-h^2 d^2/dx^2 + V` on a circle or an
//! interval with Dirichlet ends.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curve::Curve;
use super::riccati::{reconstruct_log_amplitude, Reconstruction};
use crate::error::{Error, Result};
use crate::linalg::{dot, jacobi_eigh, periodic_interleave, BandMatrix};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain1D<T> {
    /// `[start, start + length)` with periodic ends.
    Circle { start: T, length: T },
    /// `[a, b]` with `v(a) = v(b) = 0`.
    Interval { a: T, b: T },
}

pub(crate) fn wrap_mod<T: Real>(x: T, period: T) -> T {
    let r = x - (x / period).floor() * period;
    if r >= period {
        r - period
    } else {
        r
    }
}

impl<T: Real> Domain1D<T> {
    pub fn length(&self) -> T {
        match self {
            Domain1D::Circle { length, .. } => *length,
            Domain1D::Interval { a, b } => *b - *a,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Domain1D::Circle { .. })
    }

    pub fn contains(&self, x: T) -> bool {
        match self {
            Domain1D::Circle { .. } => x.is_finite(),
            Domain1D::Interval { a, b } => x >= *a && x <= *b,
        }
    }

    /// Representative of `x` in the chart (periodic reduction on circles).
    pub fn wrap(&self, x: T) -> T {
        match self {
            Domain1D::Circle { start, length } => *start + wrap_mod(x - *start, *length),
            Domain1D::Interval { .. } => x,
        }
    }

    /// Base-metric distance (shorter arc on circles).
    pub fn distance(&self, x: T, y: T) -> T {
        match self {
            Domain1D::Circle { length, .. } => {
                let d = wrap_mod(x - y, *length);
                d.min(*length - d)
            }
            Domain1D::Interval { .. } => (x - y).abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Domain1D::Circle { start, length } => start.is_finite() && *length > T::zero(),
            Domain1D::Interval { a, b } => a.is_finite() && *b > *a,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("degenerate domain {self:?}")))
        }
    }
}

/// `(-h^2 d^2/dx^2 + V - E) u = 0` near a target energy, over a list of `h`.
#[derive(Clone, Debug)]
pub struct SchrodingerProblem1D<T> {
    pub domain: Domain1D<T>,
    pub potential: Curve<T>,
    pub energy_target: T,
    pub h_grid: Vec<T>,
}

impl<T: Real> SchrodingerProblem1D<T> {
    pub fn new(domain: Domain1D<T>, potential: Curve<T>, energy_target: T, h_grid: Vec<T>) -> Result<Self> {
        domain.validate()?;
        if h_grid.is_empty() || h_grid.iter().any(|h| !(*h > T::zero())) {
            return Err(Error::Domain("h grid must be nonempty and positive".into()));
        }
        if h_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Domain("h grid must be strictly decreasing".into()));
        }
        Ok(Self {
            domain,
            potential,
            energy_target,
            h_grid,
        })
    }

    /// `min |V'|` over sampled points where `|V - E| < band`.
    pub fn regular_value_margin(&self, band: T) -> Option<T> {
        let n = 4000;
        let (lo, len) = chart(&self.domain);
        (0..=n)
            .map(|i| lo + len * T::from_usize_lossy(i) / T::from_usize_lossy(n))
            .filter(|&x| (self.potential.value(x) - self.energy_target).abs() < band)
            .map(|x| self.potential.derivative(x).abs())
            .reduce(T::min)
    }
}

fn chart<T: Real>(domain: &Domain1D<T>) -> (T, T) {
    match domain {
        Domain1D::Circle { start, length } => (*start, *length),
        Domain1D::Interval { a, b } => (*a, *b - *a),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions<T> {
    /// Grid points per unit of `h`; `None` picks `40 sqrt(E - min V)` (at least 8).
    pub points_per_h: Option<T>,
    /// Largest accepted `|E(h) - E_target|`; `None` means `5 h max(1, sqrt|E_target|)`.
    pub window: Option<T>,
    pub lanczos_steps: usize,
    pub seed: u64,
    /// Restrict to eigenfunctions even or odd about a reflection centre.
    pub parity: Option<Parity<T>>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Parity<T> {
    pub center: T,
    pub even: bool,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            points_per_h: None,
            window: None,
            lanczos_steps: 40,
            seed: 17,
            parity: None,
        }
    }
}

/// One eigenpair with samples and log-amplitudes.
#[derive(Clone, Debug, Serialize)]
pub struct EigenSolution<T> {
    pub h: T,
    pub energy: T,
    /// Nodes; interval grids include both Dirichlet ends.
    pub nodes: Vec<T>,
    pub dx: T,
    /// Real eigenvector, unit `L^2` norm, largest entry positive.
    pub values: Vec<T>,
    /// `log |v|`, reconstructed in deep forbidden regions.
    pub log_amplitude: Vec<T>,
    /// `|(P - E) v| / |v|` on the solver grid.
    pub residual: T,
    /// Factor applied to the raw solver vector.
    pub normalization: T,
    pub reconstruction: Reconstruction<T>,
}

/// Discretized `-h^2 d^2/dx^2 + V` (fourth order).
#[derive(Clone, Debug)]
pub struct Discretization<T> {
    pub nodes: Vec<T>,
    /// Indices into `nodes` of the unknowns.
    pub unknowns: Vec<usize>,
    pub dx: T,
    pub h: T,
    pub potential: Vec<T>,
    periodic: bool,
}

const STENCIL: [f64; 3] = [-30.0, 16.0, -1.0];

impl<T: Real> Discretization<T> {
    pub fn new(domain: &Domain1D<T>, potential: &Curve<T>, h: T, dx_target: T) -> Result<Self> {
        domain.validate()?;
        let (lo, len) = chart(domain);
        let cells = (len / dx_target).ceil().to_f64_lossy().max(8.0) as usize;
        let dx = len / T::from_usize_lossy(cells);
        let periodic = domain.is_periodic();
        let count = if periodic { cells } else { cells + 1 };
        let nodes: Vec<T> = (0..count).map(|i| lo + dx * T::from_usize_lossy(i)).collect();
        let unknowns: Vec<usize> = if periodic { (0..count).collect() } else { (1..count - 1).collect() };
        let potential = unknowns.iter().map(|&i| potential.value(nodes[i])).collect();
        Ok(Self {
            nodes,
            unknowns,
            dx,
            h,
            potential,
            periodic,
        })
    }

    pub fn len(&self) -> usize {
        self.unknowns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unknowns.is_empty()
    }

    fn coefficient(&self, offset: usize) -> T {
        -self.h * self.h * T::lit(STENCIL[offset]) / (T::lit(12.0) * self.dx * self.dx)
    }

    /// `P v` for a vector over the unknowns.
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        let n = self.len();
        let get = |i: isize| -> T {
            if self.periodic {
                v[i.rem_euclid(n as isize) as usize]
            } else if i < 0 {
                if i == -1 { T::zero() } else { -v[(-i - 2) as usize] }
            } else if i >= n as isize {
                let over = i - n as isize;
                if over == 0 { T::zero() } else { -v[n - over as usize] }
            } else {
                v[i as usize]
            }
        };
        (0..n as isize)
            .map(|i| {
                let mut acc = self.coefficient(0) * get(i) + self.potential[i as usize] * get(i);
                for off in 1..=2 {
                    acc += self.coefficient(off) * (get(i - off as isize) + get(i + off as isize));
                }
                acc
            })
            .collect()
    }

    /// Band matrix of `P - shift` (in interleaved order on circles) and the
    /// permutation from unknown index to band row.
    pub fn shifted_band(&self, shift: T) -> (BandMatrix<T>, Vec<usize>) {
        let n = self.len();
        let perm: Vec<usize> = if self.periodic { periodic_interleave(n) } else { (0..n).collect() };
        let half = if self.periodic { 4 } else { 2 };
        let mut m = BandMatrix::zeros(n, half, half);
        for i in 0..n {
            m.add(perm[i], perm[i], self.coefficient(0) + self.potential[i] - shift);
            for off in 1..=2usize {
                let c = self.coefficient(off);
                if self.periodic {
                    for j in [(i + off) % n, (i + n - off % n) % n] {
                        m.add(perm[i], perm[j], c);
                    }
                } else {
                    if i >= off {
                        m.add(perm[i], perm[i - off], c);
                    }
                    if i + off < n {
                        m.add(perm[i], perm[i + off], c);
                    }
                }
            }
            if !self.periodic {
                // odd reflection: the ghost two cells outside carries -v
                if i == 0 {
                    m.add(perm[i], perm[i], -self.coefficient(2));
                }
                if i == n - 1 {
                    m.add(perm[i], perm[i], -self.coefficient(2));
                }
            }
        }
        (m, perm)
    }
}

/// Index of the mirror image of every unknown under `x -> 2 center - x`.
/// Fails unless the grid and the potential are both symmetric.
pub fn mirror_map<T: Real>(disc: &Discretization<T>, domain: &Domain1D<T>, center: T) -> Result<Vec<usize>> {
    let mut by_node = vec![usize::MAX; disc.nodes.len()];
    for (k, &i) in disc.unknowns.iter().enumerate() {
        by_node[i] = k;
    }
    let x0 = disc.nodes[0];
    let vscale = disc.potential.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let mut map = Vec::with_capacity(disc.len());
    for (k, &i) in disc.unknowns.iter().enumerate() {
        let image = T::lit(2.0) * center - disc.nodes[i];
        let pos = (image - x0) / disc.dx;
        let j = pos.round();
        let mut jj = j.to_f64_lossy() as i64;
        let count = disc.nodes.len() as i64;
        if domain.is_periodic() {
            jj = jj.rem_euclid(count);
        }
        let target = if (0..count).contains(&jj) { by_node[jj as usize] } else { usize::MAX };
        if (pos - j).abs() > T::lit(1e-6) || target == usize::MAX {
            return Err(Error::Domain(format!("grid is not symmetric about {center}")));
        }
        if (disc.potential[k] - disc.potential[target]).abs() > T::lit(1e-9) * vscale {
            return Err(Error::Domain(format!("potential is not symmetric about {center}")));
        }
        map.push(target);
    }
    Ok(map)
}

fn symmetrize<T: Real>(v: &mut [T], mirror: &[usize], sign: T) {
    let src = v.to_vec();
    for (k, &j) in mirror.iter().enumerate() {
        v[k] = (src[k] + sign * src[j]) / T::lit(2.0);
    }
}

/// Eigenpair of a discretization nearest `target` by shift-invert Lanczos
/// followed by inverse iteration at the Ritz value. With `parity`, the search
/// is confined to vectors with `v[mirror[k]] = sign v[k]`.
pub fn nearest_eigenpair<T: Real>(
    disc: &Discretization<T>,
    target: T,
    steps: usize,
    seed: u64,
    parity: Option<(&[usize], T)>,
) -> Result<(T, Vec<T>, T)> {
    let n = disc.len();
    if n < 3 {
        return Err(Error::Resolution("fewer than three unknowns".into()));
    }
    let project = |v: &mut [T]| {
        if let Some((mirror, sign)) = parity {
            symmetrize(v, mirror, sign);
        }
    };
    let (band, perm) = disc.shifted_band(target);
    let lu = band.factor().map_err(|e| Error::numerical("eigen-solve", e.to_string()))?;
    let solve = |x: &[T]| -> Vec<T> {
        let mut b = vec![T::zero(); n];
        for i in 0..n {
            b[perm[i]] = x[i];
        }
        lu.solve(&mut b);
        (0..n).map(|i| b[perm[i]]).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    project(&mut q);
    let nrm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= nrm);
    let mut basis = vec![q];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let m = steps.min(n).max(2);
    for it in 0..m {
        let mut w = solve(&basis[it]);
        project(&mut w);
        alpha.push(dot(&w, &basis[it]));
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * *y);
            }
        }
        let b = dot(&w, &w).sqrt();
        if it + 1 == m || b <= T::epsilon() * alpha.iter().fold(T::zero(), |s, a| s.max(a.abs())) {
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    }
    let k = alpha.len();
    let mut tri = vec![vec![T::zero(); k]; k];
    for i in 0..k {
        tri[i][i] = alpha[i];
        if i + 1 < k {
            tri[i][i + 1] = beta[i];
            tri[i + 1][i] = beta[i];
        }
    }
    let (vals, vecs) = jacobi_eigh(&tri);
    let best = (0..k)
        .max_by(|&a, &b| vals[a].abs().partial_cmp(&vals[b].abs()).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or_else(|| Error::numerical("eigen-solve", "empty Lanczos basis"))?;
    if vals[best] == T::zero() || !vals[best].is_finite() {
        return Err(Error::numerical("eigen-solve", "Lanczos produced no usable Ritz value"));
    }
    let mut v = vec![T::zero(); n];
    for (j, b) in basis.iter().take(k).enumerate() {
        let c = vecs[j][best];
        v.iter_mut().zip(b).for_each(|(x, y)| *x += c * *y);
    }
    let mut energy = target + T::one() / vals[best];
    let (band2, perm2) = disc.shifted_band(energy + T::lit(1e-10) * energy.abs().max(T::one()));
    let lu2 = band2.factor().map_err(|e| Error::numerical("eigen-solve", e.to_string()))?;
    let mut residual = T::infinity();
    for _ in 0..6 {
        project(&mut v);
        let nrm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nrm);
        let pv = disc.apply(&v);
        energy = dot(&pv, &v);
        let r: Vec<T> = pv.iter().zip(&v).map(|(p, x)| *p - energy * *x).collect();
        residual = dot(&r, &r).sqrt();
        if residual <= T::lit(1e-11) * energy.abs().max(T::one()) {
            break;
        }
        let mut b = vec![T::zero(); n];
        for i in 0..n {
            b[perm2[i]] = v[i];
        }
        lu2.solve(&mut b);
        v = (0..n).map(|i| b[perm2[i]]).collect();
    }
    if !residual.is_finite() {
        return Err(Error::numerical("eigen-solve", "inverse iteration diverged"));
    }
    Ok((energy, v, residual))
}

fn potential_min<T: Real>(domain: &Domain1D<T>, v: &Curve<T>) -> T {
    let (lo, len) = chart(domain);
    (0..=2000)
        .map(|i| v.value(lo + len * T::from_usize_lossy(i) / T::lit(2000.0)))
        .fold(T::infinity(), T::min)
}

/// Eigenpair nearest `E_target` at scale `h`, normalised to unit `L^2` norm.
pub fn solve_1d_eigen<T: Real>(prob: &SchrodingerProblem1D<T>, h: T, opts: &SolverOptions<T>) -> Result<EigenSolution<T>> {
    let vmin = potential_min(&prob.domain, &prob.potential);
    let per_h = opts
        .points_per_h
        .unwrap_or_else(|| (T::lit(40.0) * (prob.energy_target - vmin).max(T::lit(0.05)).sqrt()).max(T::lit(8.0)));
    if per_h < T::lit(8.0) {
        return Err(Error::Resolution(format!("{per_h} points per h; at least 8 are needed")));
    }
    let disc = Discretization::new(&prob.domain, &prob.potential, h, h / per_h)?;
    let mirror = match &opts.parity {
        Some(p) => Some((mirror_map(&disc, &prob.domain, p.center)?, if p.even { T::one() } else { -T::one() })),
        None => None,
    };
    let (energy, raw, residual) = nearest_eigenpair(
        &disc,
        prob.energy_target,
        opts.lanczos_steps,
        opts.seed,
        mirror.as_ref().map(|(m, s)| (m.as_slice(), *s)),
    )?;
    let window = opts
        .window
        .unwrap_or_else(|| T::lit(5.0) * h * prob.energy_target.abs().sqrt().max(T::one()));
    if (energy - prob.energy_target).abs() > window {
        return Err(Error::numerical(
            "eigen-solve",
            format!("no eigenvalue within {window} of {}: nearest is {energy}", prob.energy_target),
        ));
    }
    let mut values = vec![T::zero(); disc.nodes.len()];
    for (k, &i) in disc.unknowns.iter().enumerate() {
        values[i] = raw[k];
    }
    let peak = values.iter().fold(T::zero(), |m, v| if v.abs() > m.abs() { *v } else { m });
    let norm = (values.iter().fold(T::zero(), |s, v| s + *v * *v) * disc.dx).sqrt();
    let normalization = peak.signum() / norm;
    values.iter_mut().for_each(|v| *v *= normalization);
    let reconstruction = reconstruct_log_amplitude(&prob.domain, &prob.potential, energy, h, &disc.nodes, &values)?;
    Ok(EigenSolution {
        h,
        energy,
        log_amplitude: reconstruction.log_amplitude.clone(),
        nodes: disc.nodes,
        dx: disc.dx,
        values,
        residual,
        normalization,
        reconstruction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_matches_apply() {
        for domain in [Domain1D::Circle { start: 0.0, length: 3.0 }, Domain1D::Interval { a: -1.0, b: 2.0 }] {
            let v = Curve::new("x", |x: f64| [x.sin(), x.cos(), -x.sin()]);
            let d = Discretization::new(&domain, &v, 0.3, 0.1).unwrap();
            let (band, perm) = d.shifted_band(0.0);
            let n = d.len();
            let x: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
            let mut xp = vec![0.0; n];
            for i in 0..n {
                xp[perm[i]] = x[i];
            }
            let mut y = vec![0.0; n];
            band.matvec(&xp, &mut y);
            let direct = d.apply(&x);
            for i in 0..n {
                assert!((y[perm[i]] - direct[i]).abs() < 1e-12, "{domain:?} row {i}");
            }
            assert!(band.asymmetry() < 1e-12);
        }
    }
}
