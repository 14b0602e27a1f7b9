//! Underflow-free `log |v|` in forbidden regions from the log-derivative
//! `w = h v'/v`, which solves `h w' = (V - E) - w^2`.

use serde::Serialize;

use super::curve::Curve;
use super::schrodinger::Domain1D;
use crate::error::Result;
use crate::real::Real;

/// Relative amplitude below which direct samples are replaced.
const ANCHOR_LEVEL: f64 = 1e-6;
/// Relative amplitude above which direct samples are trusted for comparison.
const TRUST_LEVEL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct Reconstruction<T> {
    pub log_amplitude: Vec<T>,
    /// Forbidden stretches that were reconstructed, as `(x_left, x_right)`.
    pub intervals: Vec<(T, T)>,
    /// Largest `|log|v|_reconstructed - log|v|_direct|` where the direct
    /// samples exceed `1e-10 max |v|`.
    pub mismatch: T,
    pub notice: Option<String>,
}

/// `log |a e^x + b e^y|` for signed weights.
fn signed_logsumexp<T: Real>(la: T, sa: T, lb: T, sb: T) -> T {
    if la == T::neg_infinity() && lb == T::neg_infinity() {
        return T::neg_infinity();
    }
    let (hi, shi, lo, slo) = if la >= lb { (la, sa, lb, sb) } else { (lb, sb, la, sa) };
    let t = T::one() + shi * slo * (lo - hi).exp();
    hi + t.abs().ln()
}

/// RK4 for `(w, L)` with `h w' = (V - E) - w^2`, `L' = w / h` from `x0` to `x1`.
fn rk4_step<T: Real>(pot: &Curve<T>, energy: T, h: T, x0: T, x1: T, w: T, l: T) -> (T, T) {
    let f = |x: T, w: T| ((pot.value(x) - energy - w * w) / h, w / h);
    let dx = x1 - x0;
    let half = dx / T::lit(2.0);
    let (k1w, k1l) = f(x0, w);
    let (k2w, k2l) = f(x0 + half, w + half * k1w);
    let (k3w, k3l) = f(x0 + half, w + half * k2w);
    let (k4w, k4l) = f(x1, w + dx * k3w);
    let six = T::lit(6.0);
    (
        w + dx * (k1w + T::lit(2.0) * (k2w + k3w) + k4w) / six,
        l + dx * (k1l + T::lit(2.0) * (k2l + k3l) + k4l) / six,
    )
}

/// Replaces `log |v|` on deep forbidden stretches by the combination of a
/// recessive and a dominant Riccati branch matched to the direct samples at
/// the two anchors where `|v|` falls through `1e-6 max |v|`.
pub fn reconstruct_log_amplitude<T: Real>(
    domain: &Domain1D<T>,
    potential: &Curve<T>,
    energy: T,
    h: T,
    nodes: &[T],
    values: &[T],
) -> Result<Reconstruction<T>> {
    let n = nodes.len();
    let mut log_amplitude: Vec<T> = values.iter().map(|v| v.abs().ln()).collect();
    let vmax = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let forbidden: Vec<bool> = nodes.iter().map(|&x| potential.value(x) > energy).collect();
    let periodic = domain.is_periodic();
    let mut out = Reconstruction {
        log_amplitude: Vec::new(),
        intervals: Vec::new(),
        mismatch: T::zero(),
        notice: None,
    };
    let Some(first_allowed) = forbidden.iter().position(|f| !f) else {
        out.notice = Some("no allowed region: E lies below min V".into());
        out.log_amplitude = log_amplitude;
        return Ok(out);
    };
    if forbidden.iter().all(|f| !f) {
        out.notice = Some("no turning point: E lies above max V; reconstruction skipped".into());
        out.log_amplitude = log_amplitude;
        return Ok(out);
    }
    // walk order: cyclic from an allowed node on circles, natural otherwise
    let order: Vec<usize> = if periodic {
        (0..n).map(|k| (first_allowed + k) % n).collect()
    } else {
        (0..n).collect()
    };
    let length = domain.length();
    let coord = |pos: usize| -> T {
        let i = order[pos];
        if periodic && i < first_allowed {
            nodes[i] + length
        } else {
            nodes[i]
        }
    };
    let anchor = vmax * T::lit(ANCHOR_LEVEL);
    let trust = vmax * T::lit(TRUST_LEVEL);
    let mut pos = 0;
    while pos < n {
        if !forbidden[order[pos]] {
            pos += 1;
            continue;
        }
        let start = pos;
        while pos < n && forbidden[order[pos]] {
            pos += 1;
        }
        let end = pos - 1;
        let touches_left = !periodic && start == 0;
        let touches_right = !periodic && end == n - 1;
        let below: Vec<usize> = (start..=end).filter(|&p| values[order[p]].abs() < anchor).collect();
        let (Some(&first_below), Some(&last_below)) = (below.first(), below.last()) else {
            continue;
        };
        let left = if touches_left && first_below == 0 { 0 } else { first_below.saturating_sub(1) };
        let right = if touches_right && last_below == n - 1 { n - 1 } else { (last_below + 1).min(n - 1) };
        if right <= left + 1 {
            continue;
        }
        let xs: Vec<T> = (left..=right).map(coord).collect();
        let m = xs.len();
        // dominant branch forward from the left anchor
        let mut dom = vec![T::zero(); m];
        let mut w = (potential.value(xs[0]) - energy).max(T::zero()).sqrt();
        for k in 1..m {
            let (w1, l1) = rk4_step(potential, energy, h, xs[k - 1], xs[k], w, dom[k - 1]);
            w = w1;
            dom[k] = l1;
        }
        // recessive branch backward from the right anchor
        let mut rec = vec![T::zero(); m];
        let mut w = -(potential.value(xs[m - 1]) - energy).max(T::zero()).sqrt();
        for k in (0..m - 1).rev() {
            let (w1, l1) = rk4_step(potential, energy, h, xs[k + 1], xs[k], w, rec[k + 1]);
            w = w1;
            rec[k] = l1;
        }
        if dom.iter().chain(&rec).any(|v| !v.is_finite()) {
            out.notice = Some(format!("Riccati integration failed on [{}, {}]; direct values kept", xs[0], xs[m - 1]));
            continue;
        }
        // basis: v1 = exp(rec - rec[0]) (v1(x_L) = 1), v2 = exp(dom - dom[m-1]) (v2(x_R) = 1)
        let l1: Vec<T> = rec.iter().map(|r| *r - rec[0]).collect();
        let l2: Vec<T> = dom.iter().map(|d| *d - dom[m - 1]).collect();
        let vl = values[order[left]];
        let vr = values[order[right]];
        let e1r = l1[m - 1].exp();
        let e2l = l2[0].exp();
        let det = T::one() - e1r * e2l;
        let a1 = (vl - vr * e2l) / det;
        let a2 = (vr - vl * e1r) / det;
        for k in 1..m - 1 {
            let p = left + k;
            let i = order[p];
            let rebuilt = signed_logsumexp(a1.abs().ln() + l1[k], a1.signum(), a2.abs().ln() + l2[k], a2.signum());
            if values[i].abs() > trust {
                out.mismatch = out.mismatch.max((rebuilt - log_amplitude[i]).abs());
            }
            log_amplitude[i] = rebuilt;
        }
        out.intervals.push((domain.wrap(xs[0]), domain.wrap(xs[m - 1])));
    }
    out.log_amplitude = log_amplitude;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_sum() {
        let v = signed_logsumexp(2.0f64.ln(), 1.0, 3.0f64.ln(), -1.0);
        assert!(v.abs() < 1e-15);
        assert_eq!(signed_logsumexp(0.0f64, 1.0, 0.0, -1.0), f64::NEG_INFINITY);
        assert!((signed_logsumexp(-1000.0f64, 1.0, -1001.0, 1.0) - (-1000.0 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-12);
    }
}
