//! Adaptive Gauss–Kronrod quadrature and improper integrals toward
//! (possibly infinite, possibly singular) endpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extrap::{self, Estimate};

/// A running integral larger than this is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
/// Maximum number of geometric panels toward an endpoint.
pub const MAX_DEPTH: usize = 60;
/// Panels contributing less than this fraction of the total end the march.
pub const TAIL_TRUNCATION: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("integrand is not finite at x = {0}")]
    NonFinite(f64),
    #[error("integral diverges toward {endpoint} (running value {running:e} after {panels} panels)")]
    Diverges { endpoint: f64, running: f64, panels: usize },
    #[error("integral toward {endpoint} neither converged nor diverged within {panels} panels")]
    Undecided { endpoint: f64, panels: usize },
}

// Kronrod 21-point abscissae and weights with the embedded 10-point Gauss rule.
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600973963164,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// One Gauss–Kronrod 21 panel: integral estimate and error estimate.
pub fn gk21<F>(f: &F, a: f64, b: f64) -> Result<(C64, f64), QuadError>
where
    F: Fn(f64) -> C64 + ?Sized,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.re.is_finite() || !fc.im.is_finite() {
        return Err(QuadError::NonFinite(center));
    }
    let mut kronrod = fc * WGK[10];
    let mut gauss = C64::new(0.0, 0.0);
    for j in 0..10 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let f1 = f(x1);
        let f2 = f(x2);
        if !f1.re.is_finite() || !f1.im.is_finite() {
            return Err(QuadError::NonFinite(x1));
        }
        if !f2.re.is_finite() || !f2.im.is_finite() {
            return Err(QuadError::NonFinite(x2));
        }
        kronrod += (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).norm();
    Ok((value, err))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
    pub panels: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive Gauss–Kronrod integration over a finite interval.
///
/// Bisects the panel with the largest error estimate until the total error
/// is below `max(abs_tol, rel_tol |I|)` or `max_panels` is reached; the
/// returned error is the honest sum either way.
pub fn adaptive<F>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_panels: usize) -> Result<QuadResult, QuadError>
where
    F: Fn(f64) -> C64 + ?Sized,
{
    if a == b {
        return Ok(QuadResult { value: C64::new(0.0, 0.0), error: 0.0, panels: 0 });
    }
    let (value, error) = gk21(f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    while total_err > abs_tol.max(rel_tol * total.norm()) && heap.len() < max_panels {
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(f, worst.a, mid)?;
        let (v2, e2) = gk21(f, mid, worst.b)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed accumulated rounding in the running totals
    let mut value = C64::new(0.0, 0.0);
    let mut error = 0.0;
    let panels = heap.len();
    for p in heap {
        value += p.value;
        error += p.error;
    }
    Ok(QuadResult { value, error, panels })
}

/// Integral over `[a, b]` split at the given interior breakpoints.
pub fn adaptive_split<F>(f: &F, a: f64, b: f64, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Result<QuadResult, QuadError>
where
    F: Fn(f64) -> C64 + ?Sized,
{
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut nodes = vec![lo];
    nodes.extend(pts);
    nodes.push(hi);
    let mut out = QuadResult { value: C64::new(0.0, 0.0), error: 0.0, panels: 0 };
    for w in nodes.windows(2) {
        let r = adaptive(f, w[0], w[1], abs_tol / (nodes.len() as f64), rel_tol, 400)?;
        out.value += r.value;
        out.error += r.error;
        out.panels += r.panels;
    }
    out.value *= sign;
    Ok(out)
}

/// Geometric panel boundaries from `from` toward `endpoint`.
///
/// Toward a finite endpoint the distance halves per panel; toward an
/// infinite one the panel length doubles.
pub fn geometric_point(from: f64, endpoint: f64, k: usize) -> f64 {
    if endpoint.is_finite() {
        endpoint - (endpoint - from) * 0.5f64.powi(k as i32)
    } else {
        let scale = from.abs().max(1.0);
        let dir = endpoint.signum();
        from + dir * scale * (2f64.powi(k as i32) - 1.0)
    }
}

/// Options for [`improper`].
#[derive(Debug, Clone, Copy)]
pub struct ImproperOpts {
    /// Smallest distance to a finite endpoint at which the integrand is sampled,
    /// relative to the starting distance.
    pub cutoff: f64,
    /// Largest coordinate magnitude visited toward an infinite endpoint.
    pub far: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for ImproperOpts {
    fn default() -> Self {
        ImproperOpts { cutoff: 1e-8, far: 1e6, abs_tol: 1e-15, rel_tol: 1e-13 }
    }
}

/// Outcome of an improper integral toward an endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailResult {
    pub value: C64,
    pub error: f64,
    /// Partial integrals at the end of each geometric panel.
    pub partials: Vec<C64>,
    /// Panel boundaries matching `partials`.
    pub points: Vec<f64>,
    /// Set when the value came from extrapolating the partial integrals.
    pub extrapolation: Option<Estimate>,
}

/// Improper integral of `f` from `from` toward `endpoint`.
///
/// Panels follow [`geometric_point`]. The march stops once two successive
/// panels contribute less than [`TAIL_TRUNCATION`] of the total. If the
/// cutoff is reached first, the partial integrals are extrapolated, using
/// `sigma(x)` as the remainder scale when one is supplied.
pub fn improper<F>(f: &F, from: f64, endpoint: f64, opts: &ImproperOpts, sigma: Option<&dyn Fn(f64) -> f64>) -> Result<TailResult, QuadError>
where
    F: Fn(f64) -> C64 + ?Sized,
{
    let sign = if endpoint > from { 1.0 } else { -1.0 };
    let start_dist = (endpoint - from).abs();
    let mut total = C64::new(0.0, 0.0);
    let mut total_err = 0.0;
    let mut partials = Vec::new();
    let mut points = Vec::new();
    let mut small_run = 0;
    let mut prev = from;
    for k in 1..=MAX_DEPTH {
        let next = geometric_point(from, endpoint, k);
        let beyond = if endpoint.is_finite() {
            (endpoint - next).abs() < opts.cutoff * start_dist
        } else {
            next.abs() > opts.far
        };
        if beyond {
            break;
        }
        let (lo, hi) = if sign > 0.0 { (prev, next) } else { (next, prev) };
        let r = adaptive(f, lo, hi, opts.abs_tol, opts.rel_tol, 200)?;
        let c = r.value * sign;
        total += c;
        total_err += r.error;
        partials.push(total);
        points.push(next);
        prev = next;
        if total.norm() > DIVERGENCE_THRESHOLD {
            return Err(QuadError::Diverges { endpoint, running: total.norm(), panels: k });
        }
        if c.norm() <= TAIL_TRUNCATION * total.norm() || c.norm() <= opts.abs_tol {
            small_run += 1;
            if small_run >= 2 {
                return Ok(TailResult { value: total, error: total_err + c.norm(), partials, points, extrapolation: None });
            }
        } else {
            small_run = 0;
        }
    }
    if partials.len() < 4 {
        return Err(QuadError::Undecided { endpoint, panels: partials.len() });
    }
    if !decaying(&partials) {
        return Err(QuadError::Diverges { endpoint, running: total.norm(), panels: partials.len() });
    }
    let est = match sigma {
        Some(s) => {
            let sig: Vec<f64> = points.iter().map(|&x| s(x)).collect();
            extrap::limit_in_variable(&sig, &partials)
        }
        None => extrap::limit(&partials),
    }
    .map_err(|_| QuadError::Undecided { endpoint, panels: partials.len() })?;
    Ok(TailResult {
        value: est.value,
        error: est.error + total_err,
        partials,
        points,
        extrapolation: Some(est),
    })
}

/// Panel contributions must shrink on the deeper half of the march for an
/// extrapolated limit to make sense.
fn decaying(partials: &[C64]) -> bool {
    let contrib: Vec<f64> = partials.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    if contrib.len() < 4 {
        return true;
    }
    let n = contrib.len();
    let recent = &contrib[n / 2..];
    let first = recent[0];
    let last = *recent.last().unwrap();
    last <= first || last <= 1e-13 * partials.last().unwrap().norm()
}

/// Verdict of the integrability detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrability {
    Convergent,
    Divergent,
    Undetermined,
}

/// Decides whether a nonnegative integrand is integrable up to `endpoint`.
///
/// Divergence: running integral above [`DIVERGENCE_THRESHOLD`], more than
/// [`MAX_DEPTH`] panels, or panel contributions that stop decaying over ten
/// panels. Convergence: contributions below [`TAIL_TRUNCATION`] of the total,
/// or a sustained geometric decay whose remaining tail is negligible.
pub fn integrability<F>(f: &F, from: f64, endpoint: f64) -> Integrability
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let g = |x: f64| C64::new(f(x).abs(), 0.0);
    let mut total = 0.0;
    let mut contrib: Vec<f64> = Vec::new();
    let mut prev = from;
    for k in 1..=MAX_DEPTH + 1 {
        if k > MAX_DEPTH {
            return Integrability::Divergent;
        }
        let next = geometric_point(from, endpoint, k);
        if next == prev || (endpoint.is_finite() && next == endpoint) {
            // panel width has fallen below floating-point resolution
            return if stalled_decay(&contrib) { Integrability::Convergent } else { Integrability::Divergent };
        }
        let (lo, hi) = if next > prev { (prev, next) } else { (next, prev) };
        let c = match adaptive(&g, lo, hi, 0.0, 1e-10, 200) {
            Ok(r) => r.value.re,
            Err(_) => return Integrability::Divergent,
        };
        total += c;
        contrib.push(c);
        prev = next;
        if total > DIVERGENCE_THRESHOLD {
            return Integrability::Divergent;
        }
        if total > 0.0 && c <= TAIL_TRUNCATION * total {
            return Integrability::Convergent;
        }
        if total == 0.0 && k >= 3 {
            return Integrability::Convergent;
        }
        let n = contrib.len();
        if n >= 10 {
            let window = &contrib[n - 10..];
            let ratios: Vec<f64> = window.windows(2).map(|w| w[1] / w[0]).collect();
            let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
            if ratios.iter().all(|&r| r >= 0.95) {
                return Integrability::Divergent;
            }
            if max_ratio < 0.9 {
                // sustained geometric decay leaves a finite tail
                return Integrability::Convergent;
            }
        }
    }
    Integrability::Undetermined
}

fn stalled_decay(contrib: &[f64]) -> bool {
    let n = contrib.len();
    if n < 6 {
        return false;
    }
    contrib[n - 5..].windows(2).all(|w| w[1] < 0.9 * w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn re(f: impl Fn(f64) -> f64) -> impl Fn(f64) -> C64 {
        move |x| C64::new(f(x), 0.0)
    }

    #[test]
    fn gk21_is_exact_for_low_degree_polynomials() {
        let f = re(|x| 3.0 * x.powi(5) - x * x + 2.0);
        let (v, _) = gk21(&f, -1.0, 2.0).unwrap();
        let exact = 0.5 * (64.0 - 1.0) - (8.0 + 1.0) / 3.0 + 6.0;
        assert_abs_diff_eq!(v.re, exact, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let f = re(|x: f64| 1.0 / x.sqrt());
        let r = adaptive(&f, 0.0, 1.0, 1e-12, 1e-12, 2000).unwrap();
        assert_abs_diff_eq!(r.value.re, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn adaptive_reversed_bounds_not_needed_for_split() {
        let f = re(|x: f64| x.cos());
        let r = adaptive_split(&f, 1.0, 0.0, &[0.5], 1e-14, 1e-14).unwrap();
        assert_abs_diff_eq!(r.value.re, -1f64.sin(), epsilon = 1e-13);
    }

    #[test]
    fn improper_to_infinity_by_truncation() {
        let f = re(|x: f64| (-x).exp());
        let r = improper(&f, 0.0, f64::INFINITY, &ImproperOpts::default(), None).unwrap();
        assert_abs_diff_eq!(r.value.re, 1.0, epsilon = 1e-12);
        assert!(r.extrapolation.is_none());
    }

    #[test]
    fn improper_with_slow_tail_uses_extrapolation() {
        // integral of x^{-1/2} on (0, 1], approached from 1 toward 0
        let f = re(|x: f64| x.powf(-0.5));
        let r = improper(&f, 1.0, 0.0, &ImproperOpts::default(), None).unwrap();
        assert_abs_diff_eq!(r.value.re, -2.0, epsilon = 1e-8);
        assert!(r.extrapolation.is_some());
    }

    #[test]
    fn logarithmic_tail_with_scale_variable() {
        // integral over (0, 1/2) of 1/(x ln(x)^2) = 1/ln 2, remainder 1/|ln x|
        let f = re(|x: f64| 1.0 / (x * x.ln().powi(2)));
        let sigma = |x: f64| 1.0 / x.ln().abs();
        let r = improper(&f, 0.5, 0.0, &ImproperOpts::default(), Some(&sigma)).unwrap();
        assert_abs_diff_eq!(r.value.re, -1.0 / 2f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn improper_detects_divergence() {
        let f = re(|x: f64| 1.0 / (x * x));
        let r = improper(&f, 1.0, 0.0, &ImproperOpts::default(), None);
        assert!(matches!(r, Err(QuadError::Diverges { .. })));
    }

    #[test]
    fn integrability_verdicts() {
        assert_eq!(integrability(&|x: f64| 1.0 / (1.0 - x * x), 0.0, 1.0), Integrability::Divergent);
        assert_eq!(integrability(&|x: f64| 3.75 / (x * x), 0.5, 0.0), Integrability::Divergent);
        assert_eq!(integrability(&|_x: f64| 1.0, 0.5, 0.0), Integrability::Convergent);
        assert_eq!(integrability(&|x: f64| 1.0 / x.sqrt(), 0.5, 0.0), Integrability::Convergent);
        assert_eq!(integrability(&|_x: f64| 0.0, 0.5, 0.0), Integrability::Convergent);
        assert_eq!(integrability(&|_x: f64| 1.0, 0.0, f64::INFINITY), Integrability::Divergent);
    }
}
