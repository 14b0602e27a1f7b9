//! Estimation of `K = supp(pi_* mu)` from local exponential decay rates of
//! the mass of a family.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::fit::decay_rate_fit;
use crate::error::{Error, Result};
use crate::models::{Domain1D, EigenfunctionFamily, FamilyEntry};
use crate::real::Real;

/// Threshold on fitted cell rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RateTolerance<T> {
    /// `max(3 stderr, floor)` per cell.
    Auto { floor: T },
    Fixed { value: T },
}

impl<T: Real> RateTolerance<T> {
    pub fn default_auto() -> Self {
        RateTolerance::Auto { floor: T::lit(0.002) }
    }

    fn threshold(&self, stderr: T) -> T {
        match *self {
            RateTolerance::Auto { floor } => (T::lit(3.0) * stderr).max(floor),
            RateTolerance::Fixed { value } => value,
        }
    }

    fn scaled(&self, s: T) -> Self {
        match *self {
            RateTolerance::Auto { floor } => RateTolerance::Auto { floor: floor * s },
            RateTolerance::Fixed { value } => RateTolerance::Fixed { value: value * s },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CellRate<T> {
    pub lo: T,
    pub hi: T,
    pub rate: Option<T>,
    pub stderr: Option<T>,
    /// Fewer than three masses above the numerical floor.
    pub below_floor: bool,
    pub in_support: bool,
}

impl<T: Real> CellRate<T> {
    pub fn center(&self) -> T {
        (self.lo + self.hi) / T::lit(2.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Sensitivity<T> {
    pub measure_half_tolerance: T,
    pub measure: T,
    pub measure_double_tolerance: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportEstimate<T> {
    pub domain: Domain1D<T>,
    pub cell_size: T,
    pub tolerance: RateTolerance<T>,
    pub cells: Vec<CellRate<T>>,
    /// Closed intervals making up `K_hat`; on a circle an interval with
    /// `lo > hi` wraps through the seam.
    pub k_hat: Vec<(T, T)>,
    pub sensitivity: Sensitivity<T>,
    /// `K_hat` lies in `{V <= E}` dilated by one cell.
    pub inclusion: Option<bool>,
}

pub(crate) fn in_intervals<T: Real>(x: T, intervals: &[(T, T)]) -> bool {
    intervals
        .iter()
        .any(|&(a, b)| if a <= b { x >= a && x <= b } else { x >= a || x <= b })
}

pub(crate) fn logsumexp<T: Real>(values: impl Iterator<Item = T>) -> T {
    let v: Vec<T> = values.filter(|x| x.is_finite()).collect();
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + v.iter().fold(T::zero(), |s, x| s + (*x - m).exp()).ln()
}

/// `log(|v|^2 weight)` per node, `None` where the direct sample sits below
/// the numerical floor and no reconstruction is available.
pub(crate) fn log_density<T: Real>(e: &FamilyEntry<T>) -> Vec<Option<T>> {
    let floor = T::lit(1e3) * T::epsilon() * T::from_usize_lossy(e.nodes.len());
    e.nodes
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let trusted = in_intervals(x, &e.reconstructed_intervals) || e.values[i].norm() >= floor;
            let l = T::lit(2.0) * e.log_amplitude[i] + e.weight[i].ln();
            (trusted && l.is_finite()).then_some(l)
        })
        .collect()
}

/// Log of `sum_j g_j dens_j dx` over the nodes with `x_j` in `[a, b]`
/// (wrapping on circles), where `g_j = log_weight(x_j)`.
fn window_log_mass<T: Real>(
    domain: &Domain1D<T>,
    e: &FamilyEntry<T>,
    dens: &[Option<T>],
    a: T,
    b: T,
    log_weight: impl Fn(T) -> T,
) -> Option<T> {
    let x0 = e.nodes[0];
    let n = e.nodes.len() as i64;
    let first = ((a - x0) / e.dx).ceil().to_f64_lossy() as i64;
    let last = ((b - x0) / e.dx).floor().to_f64_lossy() as i64;
    let periodic = domain.is_periodic();
    let (first, last) = if periodic {
        (first, last.min(first + n - 1))
    } else {
        (first.max(0), last.min(n - 1))
    };
    let mut any = false;
    let lm = logsumexp((first..=last).filter_map(|j| {
        let x = x0 + e.dx * T::lit(j as f64);
        let j = if periodic { j.rem_euclid(n) } else { j };
        let d = dens[j as usize].map(|d| d + log_weight(x));
        any |= d.is_some();
        d
    }));
    (any && lm.is_finite()).then(|| lm + e.dx.ln())
}

/// Fits `-h log m_c(h) = r(c) + c' h` for the local mass `m_c` of every cell
/// and collects the cells with `r(c)` below the tolerance. In classically
/// allowed cells the mass density is a Gaussian average over the allowed
/// nodes with width half the local wavelength `2 pi h / sqrt(E - V)`,
/// which removes the oscillation of `|u|^2` from the fit.
pub fn support_estimate<T: Real>(
    fam: &EigenfunctionFamily<T>,
    cell_size: T,
    tolerance: RateTolerance<T>,
) -> Result<SupportEstimate<T>> {
    if fam.entries.len() < 3 {
        return Err(Error::Precondition(format!(
            "support estimation needs at least 3 h values, got {}",
            fam.entries.len()
        )));
    }
    if !(cell_size > T::zero()) {
        return Err(Error::Domain("cell size must be positive".into()));
    }
    let (lo, len) = match &fam.domain {
        Domain1D::Circle { start, length } => (*start, *length),
        Domain1D::Interval { a, b } => (*a, *b - *a),
    };
    let ncell = (len / cell_size).round().to_f64_lossy().max(1.0) as usize;
    let cs = len / T::from_usize_lossy(ncell);
    let bounds: Vec<(T, T)> = (0..ncell)
        .map(|i| (lo + cs * T::from_usize_lossy(i), lo + cs * T::from_usize_lossy(i + 1)))
        .collect();
    let hs = fam.h_values();
    let mut logs = vec![Vec::with_capacity(hs.len()); ncell];
    for e in &fam.entries {
        let dens = log_density(e);
        let unit = vec![Some(T::zero()); dens.len()];
        for (c, &(a, b)) in bounds.iter().enumerate() {
            let center = (a + b) / T::lit(2.0);
            let gap = e.energy - fam.potential.value(center);
            let lm = if gap > T::zero() {
                let sigma = (T::PI() * e.h / gap.sqrt()).min(len / T::lit(8.0));
                let reach = T::lit(5.0) * sigma;
                let two_s2 = T::lit(2.0) * sigma * sigma;
                let g = |x: T| {
                    if fam.potential.value(x) < e.energy {
                        -(x - center) * (x - center) / two_s2
                    } else {
                        T::neg_infinity()
                    }
                };
                let total = window_log_mass(&fam.domain, e, &dens, center - reach, center + reach, g);
                let norm = window_log_mass(&fam.domain, e, &unit, center - reach, center + reach, g);
                total.zip(norm).map(|(t, n)| t - n + (b - a).ln())
            } else {
                window_log_mass(&fam.domain, e, &dens, a, b, |_| T::zero())
            };
            logs[c].push(lm);
        }
    }
    let mut cells: Vec<CellRate<T>> = bounds
        .iter()
        .zip(&logs)
        .map(|(&(a, b), l)| match decay_rate_fit(&hs, l, None) {
            Ok(fit) => CellRate {
                lo: a,
                hi: b,
                rate: Some(fit.rate),
                stderr: Some(fit.stderr),
                below_floor: false,
                in_support: false,
            },
            Err(_) => CellRate {
                lo: a,
                hi: b,
                rate: None,
                stderr: None,
                below_floor: true,
                in_support: false,
            },
        })
        .collect();
    mark(&mut cells, &tolerance);
    let mut est = SupportEstimate {
        domain: fam.domain.clone(),
        cell_size: cs,
        tolerance,
        k_hat: Vec::new(),
        sensitivity: Sensitivity {
            measure_half_tolerance: T::zero(),
            measure: T::zero(),
            measure_double_tolerance: T::zero(),
        },
        cells,
        inclusion: None,
    };
    est.refresh();
    est.inclusion = Some(est.cells.iter().filter(|c| c.in_support).all(|c| {
        (0..=16).any(|k| {
            let x = c.lo - cs + (cs * T::lit(3.0)) * T::from_usize_lossy(k) / T::lit(16.0);
            let x = if fam.domain.is_periodic() { fam.domain.wrap(x) } else { x };
            fam.potential.value(x) <= T::lit(fam.meta.energy_target)
        })
    }));
    Ok(est)
}

fn mark<T: Real>(cells: &mut [CellRate<T>], tol: &RateTolerance<T>) {
    for c in cells.iter_mut() {
        c.in_support = match (c.rate, c.stderr) {
            (Some(r), Some(se)) => r <= tol.threshold(se),
            _ => false,
        };
    }
}

fn measure_with<T: Real>(cells: &[CellRate<T>], tol: &RateTolerance<T>) -> T {
    let mut c = cells.to_vec();
    mark(&mut c, tol);
    c.iter()
        .filter(|c| c.in_support)
        .fold(T::zero(), |s, c| s + (c.hi - c.lo))
}

impl<T: Real> SupportEstimate<T> {
    /// Same fits, different tolerance.
    pub fn with_tolerance(&self, tolerance: RateTolerance<T>) -> Self {
        let mut out = self.clone();
        out.tolerance = tolerance;
        mark(&mut out.cells, &tolerance);
        out.refresh();
        out
    }

    fn refresh(&mut self) {
        let mut runs: Vec<(T, T)> = Vec::new();
        let mut open: Option<(T, T)> = None;
        for c in &self.cells {
            match (&mut open, c.in_support) {
                (Some(run), true) => run.1 = c.hi,
                (None, true) => open = Some((c.lo, c.hi)),
                (Some(_), false) => runs.extend(open.take()),
                (None, false) => {}
            }
        }
        runs.extend(open);
        if self.domain.is_periodic() && runs.len() > 1 {
            let first = runs[0];
            let last = *runs.last().unwrap();
            if first.0 == self.cells[0].lo && last.1 == self.cells.last().unwrap().hi {
                runs.pop();
                runs[0] = (last.0, first.1);
            }
        }
        self.k_hat = runs;
        self.sensitivity = Sensitivity {
            measure_half_tolerance: measure_with(&self.cells, &self.tolerance.scaled(T::lit(0.5))),
            measure: self.measure(),
            measure_double_tolerance: measure_with(&self.cells, &self.tolerance.scaled(T::lit(2.0))),
        };
    }

    pub fn measure(&self) -> T {
        self.cells
            .iter()
            .filter(|c| c.in_support)
            .fold(T::zero(), |s, c| s + (c.hi - c.lo))
    }

    pub fn is_empty(&self) -> bool {
        self.k_hat.is_empty()
    }

    pub fn contains(&self, x: T) -> bool {
        let x = if self.domain.is_periodic() { self.domain.wrap(x) } else { x };
        self.cells.iter().any(|c| c.in_support && x >= c.lo && x <= c.hi)
    }

    /// Base distance from `x` to `K_hat` (both arcs on a circle).
    pub fn distance(&self, x: T) -> Result<T> {
        if self.is_empty() {
            return Err(Error::Domain("K_hat is empty".into()));
        }
        if self.contains(x) {
            return Ok(T::zero());
        }
        Ok(self
            .cells
            .iter()
            .filter(|c| c.in_support)
            .flat_map(|c| [self.domain.distance(x, c.lo), self.domain.distance(x, c.hi)])
            .fold(T::infinity(), T::min))
    }

    /// `cell_center,rate,stderr` with empty fields for cells below the floor.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell_center,rate,stderr\n");
        let opt = |v: Option<T>| v.map(|v| v.to_f64_lossy().to_string()).unwrap_or_default();
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{}", c.center().to_f64_lossy(), opt(c.rate), opt(c.stderr));
        }
        out
    }
}
