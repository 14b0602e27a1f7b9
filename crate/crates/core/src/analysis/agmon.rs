//! Agmon distances `d_E` for 1D potentials and the admissible `beta`.

use serde::Serialize;

use super::quadrature::adaptive_gk;
use crate::error::{Error, Result};
use crate::models::{Curve, Domain1D};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AgmonTarget<T> {
    Point(T),
    /// The classically allowed set `{V <= E}`.
    AllowedSet,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AgmonDistance<T> {
    pub distance: T,
    /// Along increasing `x` (`None` when no such path reaches the target).
    pub forward: Option<T>,
    pub backward: Option<T>,
}

fn bisect<T: Real>(g: &dyn Fn(T) -> T, mut a: T, mut b: T) -> T {
    let mut ga = g(a);
    for _ in 0..200 {
        let m = (a + b) / T::lit(2.0);
        if m == a || m == b {
            break;
        }
        let gm = g(m);
        if (gm > T::zero()) == (ga > T::zero()) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    (a + b) / T::lit(2.0)
}

fn sample_count<T: Real>(len: T) -> usize {
    ((len / T::lit(0.002)).ceil().to_f64_lossy() as usize).max(64)
}

/// `int_a^b sqrt((V - E)_+) dx` for `a <= b`, with square-root endpoint
/// singularities at simple turning points removed by `x = a + (b - a)(1 - cos(pi t))/2`.
pub fn agmon_length<T: Real>(g: &dyn Fn(T) -> T, a: T, b: T) -> Result<T> {
    if b <= a {
        return Ok(T::zero());
    }
    let n = sample_count(b - a);
    let mut breaks = vec![a];
    let mut prev = g(a);
    for i in 1..=n {
        let x = a + (b - a) * T::from_usize_lossy(i) / T::from_usize_lossy(n);
        let gx = g(x);
        if (gx > T::zero()) != (prev > T::zero()) {
            let xl = a + (b - a) * T::from_usize_lossy(i - 1) / T::from_usize_lossy(n);
            breaks.push(bisect(g, xl, x));
        }
        prev = gx;
    }
    breaks.push(b);
    let mut total = T::zero();
    for w in breaks.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r <= l || g((l + r) / T::lit(2.0)) <= T::zero() {
            continue;
        }
        let span = r - l;
        let f = |t: T| {
            let s = (T::PI() * t).sin();
            let x = l + span * (T::one() - (T::PI() * t).cos()) / T::lit(2.0);
            g(x).max(T::zero()).sqrt() * span * T::PI() * s / T::lit(2.0)
        };
        total += adaptive_gk(&f, T::zero(), T::one(), T::lit(1e-13) * span.max(T::one()))?;
    }
    Ok(total)
}

/// First point at or beyond `x` (stepping by `dir`) where `g <= 0`, within `reach`.
fn first_allowed<T: Real>(g: &dyn Fn(T) -> T, x: T, dir: T, reach: T) -> Option<T> {
    let n = sample_count(reach);
    let mut prev = x;
    for i in 1..=n {
        let y = x + dir * reach * T::from_usize_lossy(i) / T::from_usize_lossy(n);
        if g(y) <= T::zero() {
            return Some(bisect(g, prev, y));
        }
        prev = y;
    }
    None
}

/// Agmon distance from `x` to a point or to `{V <= E}`; on a circle the
/// smaller of the two arcs.
pub fn agmon_distance_1d<T: Real>(
    potential: &Curve<T>,
    energy: T,
    domain: &Domain1D<T>,
    x: T,
    target: AgmonTarget<T>,
) -> Result<AgmonDistance<T>> {
    if !domain.contains(x) {
        return Err(Error::Domain(format!("x = {x} outside the domain")));
    }
    let wrap = |y: T| if domain.is_periodic() { domain.wrap(y) } else { y };
    let g = |y: T| potential.value(wrap(y)) - energy;
    let (forward, backward) = match (target, domain) {
        (AgmonTarget::Point(y), Domain1D::Circle { length, .. }) => {
            let ahead = crate::models::schrodinger::wrap_mod(y - x, *length);
            (
                Some(agmon_length(&g, x, x + ahead)?),
                Some(agmon_length(&g, x - (*length - ahead), x)?),
            )
        }
        (AgmonTarget::Point(y), Domain1D::Interval { .. }) => {
            if !domain.contains(y) {
                return Err(Error::Domain(format!("target {y} outside the domain")));
            }
            let d = if y >= x { agmon_length(&g, x, y)? } else { agmon_length(&g, y, x)? };
            if y >= x {
                (Some(d), None)
            } else {
                (None, Some(d))
            }
        }
        (AgmonTarget::AllowedSet, _) => {
            if g(x) <= T::zero() {
                return Ok(AgmonDistance {
                    distance: T::zero(),
                    forward: Some(T::zero()),
                    backward: Some(T::zero()),
                });
            }
            let (ahead, behind) = match domain {
                Domain1D::Circle { length, .. } => (*length, *length),
                Domain1D::Interval { a, b } => (*b - x, x - *a),
            };
            let f = match first_allowed(&g, x, T::one(), ahead) {
                Some(t) => Some(agmon_length(&g, x, t)?),
                None => None,
            };
            let b = match first_allowed(&g, x, -T::one(), behind) {
                Some(t) => Some(agmon_length(&g, t, x)?),
                None => None,
            };
            if f.is_none() && b.is_none() {
                return Err(Error::Domain("the allowed set {V <= E} is empty".into()));
            }
            (f, b)
        }
    };
    let distance = forward
        .into_iter()
        .chain(backward)
        .fold(T::infinity(), T::min);
    Ok(AgmonDistance {
        distance,
        forward,
        backward,
    })
}

/// `1.05 max |V - E|^{1/2}` over the domain.
pub fn admissible_beta<T: Real>(potential: &Curve<T>, energy: T, domain: &Domain1D<T>) -> T {
    let (lo, len) = match domain {
        Domain1D::Circle { start, length } => (*start, *length),
        Domain1D::Interval { a, b } => (*a, *b - *a),
    };
    let n = 20000;
    let m = (0..=n)
        .map(|i| (potential.value(lo + len * T::from_usize_lossy(i) / T::from_usize_lossy(n)) - energy).abs())
        .fold(T::zero(), T::max);
    T::lit(1.05) * m.sqrt()
}

/// Base distance from `x` to `{V <= E}` (both arcs on a circle).
pub fn allowed_set_distance<T: Real>(potential: &Curve<T>, energy: T, domain: &Domain1D<T>, x: T) -> Result<T> {
    let wrap = |y: T| if domain.is_periodic() { domain.wrap(y) } else { y };
    let g = |y: T| potential.value(wrap(y)) - energy;
    if g(x) <= T::zero() {
        return Ok(T::zero());
    }
    let (ahead, behind) = match domain {
        Domain1D::Circle { length, .. } => (*length, *length),
        Domain1D::Interval { a, b } => (*b - x, x - *a),
    };
    let f = first_allowed(&g, x, T::one(), ahead).map(|t| t - x);
    let b = first_allowed(&g, x, -T::one(), behind).map(|t| x - t);
    f.into_iter()
        .chain(b)
        .reduce(T::min)
        .ok_or_else(|| Error::Domain("the allowed set {V <= E} is empty".into()))
}
