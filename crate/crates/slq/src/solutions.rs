//! Principal and nonprincipal solutions at the reference energy near each
//! endpoint, normalized by `W(û, u) = 1`.
//!
//! Conventions:
//! * at a regular endpoint `e` the canonical pair is used: `u(e) = 0`,
//!   `u^[1](e) = 1` and `û(e) = 1`, `û^[1](e) = 0`;
//! * at a limit-circle singular endpoint the principal solution is the
//!   combination of a fundamental system whose ratio to the other member
//!   tends to zero; the limit is extrapolated from geometric levels;
//! * at a limit-point endpoint the principal solution is integrated inward
//!   from the approach limit with WKB data;
//! * away from regular endpoints, `u(x0) = +1` at `a` and `-1` at `b`, and
//!   `û = u ∫_x^{x0} dt/(p u²)`, so `û(x0) = 0`, `û^[1](x0) = -1/u(x0)`.

use std::ops::ControlFlow;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{self, ClassifyOpts, EndpointKind, Nonoscillation, DEFAULT_PROBE};
use crate::extrap::{self, Estimate, ExtrapError};
use crate::odecore::{integrate_two_sided, integrate_with, MarchOpts, OdeError, QuasiFn, QuasiState, SolutionFn};
use crate::problem::{endpoint_regularity, End, ProblemSpec, RegularFlag};
use crate::quad::{self, Integrability, DIVERGENCE_THRESHOLD};

/// Distance from the reference point to the far point used for an infinite
/// endpoint.
pub const FAR_DISTANCE: f64 = 30.0;
/// Closest approach to a finite singular endpoint, relative to its distance
/// from the reference point.
pub const CUTOFF_RELATIVE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolutionsError {
    #[error("solutions oscillate at the reference energy near endpoint {0}")]
    OscillatoryAtLambda0(End),
    #[error("cannot decide which solution is principal at endpoint {end}: {reason}")]
    IntegralClassificationInconclusive { end: End, reason: String },
    #[error("endpoint {0} could not be classified")]
    Unclassified(End),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

impl From<ExtrapError> for SolutionsError {
    fn from(e: ExtrapError) -> Self {
        SolutionsError::IntegralClassificationInconclusive { end: End::A, reason: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Regular,
    LimitCircle,
    LimitPoint,
}

impl BasisKind {
    pub fn is_limit_circle(self) -> bool {
        self != BasisKind::LimitPoint
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BasisOpts {
    pub tol: f64,
    pub far: f64,
    /// Skip classification when the endpoint type is already known.
    pub kind: Option<BasisKind>,
    pub check_oscillation: bool,
}

impl Default for BasisOpts {
    fn default() -> Self {
        BasisOpts { tol: 1e-12, far: FAR_DISTANCE, kind: None, check_oscillation: true }
    }
}

/// Wronskian-normalized principal/nonprincipal pair at one endpoint.
#[derive(Debug, Clone)]
pub struct SolutionBasis {
    pub endpoint: End,
    pub kind: BasisKind,
    pub u: Arc<SolutionFn>,
    pub u_hat: Arc<SolutionFn>,
    pub lambda0: f64,
    /// Both solutions are nonvanishing strictly between this point and the
    /// endpoint.
    pub nonvanish_bound: f64,
    /// Base point of the reduction-of-order integral.
    pub anchor: f64,
    /// Closest point to the endpoint at which the pair is evaluated.
    pub approach_limit: f64,
    /// The endpoint itself, possibly infinite.
    pub endpoint_x: f64,
    /// Extrapolated ratio that fixed the principal combination.
    pub principal_ratio: Option<Estimate>,
    pub principal_integral: Integrability,
    pub nonprincipal_integral: Integrability,
    pub oscillation: Option<Nonoscillation>,
}

/// Serializable summary of a basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisReport {
    pub endpoint: End,
    pub kind: BasisKind,
    pub lambda0: f64,
    pub nonvanish_bound: f64,
    pub anchor: f64,
    pub approach_limit: f64,
    pub principal_ratio: Option<C64>,
    pub principal_ratio_error: Option<f64>,
    pub principal_integral: Integrability,
    pub nonprincipal_integral: Integrability,
    pub oscillation: Option<Nonoscillation>,
    pub max_wronskian_residual: f64,
    pub wronskian_residuals: Vec<(f64, f64)>,
    pub convention: String,
}

impl SolutionBasis {
    pub fn endpoint_value(&self) -> f64 {
        self.endpoint_x
    }

    /// `|u/û|(x)`, which tends to zero at the endpoint.
    pub fn sigma(&self, x: f64) -> f64 {
        match (self.u.eval(x), self.u_hat.eval(x)) {
            (Ok(u), Ok(v)) => (u.u.norm() / v.u.norm()) * (u.log_scale - v.log_scale).exp(),
            _ => f64::NAN,
        }
    }

    /// `|W(û, u)(x) - 1|` on `n` points between the nonvanishing bound and
    /// the approach limit, spaced geometrically toward a finite endpoint.
    pub fn wronskian_residuals(&self, n: usize) -> Vec<(f64, f64)> {
        let from = self.nonvanish_bound;
        let to = self.approach_limit;
        (0..n)
            .map(|k| {
                let t = k as f64 / (n.max(2) - 1) as f64;
                let x = if to.is_finite() && self.kind != BasisKind::LimitPoint {
                    let e = to;
                    e + (from - e) * (1e-8f64).powf(t).max(((e - to) / (from - e)).abs())
                } else {
                    from + (to - from) * t
                };
                let x = if self.kind == BasisKind::LimitPoint { from + (to - from) * t } else { x };
                let r = crate::odecore::wronskian(&*self.u_hat, &*self.u, x)
                    .map(|w| (w - 1.0).norm())
                    .unwrap_or(f64::INFINITY);
                (x, r)
            })
            .collect()
    }

    pub fn report(&self) -> BasisReport {
        let residuals = self.wronskian_residuals(50);
        let max = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
        let convention = match self.kind {
            BasisKind::Regular => "canonical endpoint data: u = (0, 1), û = (1, 0) at the endpoint",
            BasisKind::LimitCircle => {
                "principal from the extrapolated ratio of a fundamental system; u(x0) = ±1, û = u ∫_x^x0 dt/(p u²)"
            }
            BasisKind::LimitPoint => "principal integrated inward with WKB data; u(x0) = ±1, û = u ∫_x^x0 dt/(p u²)",
        };
        BasisReport {
            endpoint: self.endpoint,
            kind: self.kind,
            lambda0: self.lambda0,
            nonvanish_bound: self.nonvanish_bound,
            anchor: self.anchor,
            approach_limit: self.approach_limit,
            principal_ratio: self.principal_ratio.as_ref().map(|e| e.value),
            principal_ratio_error: self.principal_ratio.as_ref().map(|e| e.error),
            principal_integral: self.principal_integral,
            nonprincipal_integral: self.nonprincipal_integral,
            oscillation: self.oscillation,
            max_wronskian_residual: max,
            wronskian_residuals: residuals,
            convention: convention.to_string(),
        }
    }
}

/// Closest point to an endpoint used for evaluation.
pub fn approach_limit(spec: &ProblemSpec, end: End, regular: bool, far: f64) -> f64 {
    let e = spec.endpoint(end);
    let m = spec.reference_point();
    if !e.is_finite() {
        m + e.signum() * far
    } else if regular {
        e
    } else {
        e - end.outward() * CUTOFF_RELATIVE * (e - m).abs()
    }
}

/// Type of an endpoint: regular by quadrature, otherwise by the Weyl
/// alternative at the default probe.
pub fn endpoint_kind(spec: &ProblemSpec, end: End) -> Result<BasisKind, SolutionsError> {
    if endpoint_regularity(spec, end).regular == RegularFlag::Regular {
        return Ok(BasisKind::Regular);
    }
    match classify::classify_evidence(spec, end, DEFAULT_PROBE, &ClassifyOpts::default()).kind {
        Some(EndpointKind::LimitCircle) => Ok(BasisKind::LimitCircle),
        Some(EndpointKind::LimitPoint) => Ok(BasisKind::LimitPoint),
        None => Err(SolutionsError::Unclassified(end)),
    }
}

/// Integration range shared by all global solutions of a problem.
pub fn support_range(spec: &ProblemSpec, kinds: (BasisKind, BasisKind), far: f64) -> (f64, f64) {
    (
        approach_limit(spec, End::A, kinds.0 == BasisKind::Regular, far),
        approach_limit(spec, End::B, kinds.1 == BasisKind::Regular, far),
    )
}

/// `u1/u` for the solution decaying toward the endpoint, from the local
/// WKB approximation; zero where `q - λr <= 0`.
pub fn wkb_log_derivative(spec: &ProblemSpec, lambda: f64, end: End, x: f64) -> f64 {
    let v = spec.p(x) * (spec.q(x) - lambda * spec.r(x));
    if v > 0.0 {
        end.outward() * -v.sqrt()
    } else {
        0.0
    }
}

/// Marches `state` toward an endpoint up to its approach limit,
/// renormalizing when the state grows past the threshold.
pub fn rescaled_march(spec: &ProblemSpec, lambda: C64, state: QuasiState, end: End, tol: f64) -> Result<SolutionFn, OdeError> {
    let regular = endpoint_regularity(spec, end).regular == RegularFlag::Regular;
    let target = approach_limit(spec, end, regular, FAR_DISTANCE);
    integrate_with(spec, lambda, state.x, [state.u, state.u1], target, &MarchOpts::rescaled(tol))
}

/// Verdict on `∫ dx/(p w²)` toward the endpoint from window contributions.
fn reciprocal_integral(spec: &ProblemSpec, w: &SolutionFn, end: End, from: f64, limit: f64) -> Integrability {
    let f = |x: f64| -> C64 {
        match w.eval(x) {
            Ok(v) => C64::new((-2.0 * v.log_scale).exp() / (spec.p(x) * v.u.norm_sqr()), 0.0),
            Err(_) => C64::new(f64::NAN, 0.0),
        }
    };
    let e = spec.endpoint(end);
    let mut edges = vec![from];
    for k in 1..=60 {
        let x = if e.is_finite() {
            e + (from - e) * 0.5f64.powi(k)
        } else {
            from + end.outward() * (2f64.powi(k) - 1.0) / 8.0
        };
        let reached = if e.is_finite() { (x - e).abs() <= (limit - e).abs() } else { (x - from).abs() >= (limit - from).abs() };
        if reached {
            if e.is_infinite() {
                edges.push(limit);
            }
            break;
        }
        edges.push(x);
    }
    let mut contrib = Vec::new();
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (lo, hi) = if w[0] < w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
        let c = match quad::adaptive(&f, lo, hi, 0.0, 1e-8, 200) {
            Ok(r) if r.value.re.is_finite() => r.value.re,
            _ => f64::INFINITY,
        };
        total += c;
        contrib.push(c);
        if !(total <= DIVERGENCE_THRESHOLD) {
            return Integrability::Divergent;
        }
    }
    let n = contrib.len();
    if n < 4 {
        return Integrability::Undetermined;
    }
    let last = contrib[n - 1];
    let mid = contrib[n / 2];
    if last >= 0.5 * mid {
        Integrability::Divergent
    } else {
        Integrability::Convergent
    }
}

/// Zero of `u` (or `û` too, when given) closest to the endpoint on the way
/// from the reference point.
fn nearest_zero(sols: &[&SolutionFn], m: f64, limit: f64) -> Result<Option<f64>, OdeError> {
    let mut best: Option<f64> = None;
    for s in sols {
        for z in classify::zeros_in(s, m, limit)? {
            best = Some(match best {
                Some(b) if (b - limit).abs() <= (z - limit).abs() => b,
                _ => z,
            });
        }
    }
    Ok(best)
}

fn anchor_and_bound(e: f64, end: End, lim: f64) -> (f64, f64) {
    if e.is_finite() {
        let x0 = e + 0.75 * (lim - e);
        (x0, e + 0.9 * (x0 - e))
    } else {
        let x0 = lim - end.outward() * -1.0;
        (x0, x0 - end.outward() * -0.1)
    }
}

/// Extrapolated limit of `y1/y2` (or `y2/y1`) on geometric levels toward
/// the endpoint; returns the initial data of the principal combination.
fn principal_data(
    y1: &SolutionFn,
    y2: &SolutionFn,
    e: f64,
    m: f64,
    limit: f64,
    end: End,
) -> Result<([C64; 2], Estimate), SolutionsError> {
    let d0 = 0.5 * (e - m).abs();
    let mut xs = Vec::new();
    let mut k = 0;
    loop {
        let x = e + end.outward() * -d0 * 0.5f64.powi(k);
        if (x - e).abs() < (limit - e).abs() {
            break;
        }
        xs.push(x);
        k += 1;
    }
    let ratio = |x: f64| -> Result<C64, OdeError> {
        let a = y1.eval(x)?;
        let b = y2.eval(x)?;
        Ok(a.u / b.u * (a.log_scale - b.log_scale).exp())
    };
    let seq: Vec<C64> = xs.iter().map(|&x| ratio(x)).collect::<Result<_, _>>()?;
    let last = *seq.last().ok_or(ExtrapError::TooShort(0))?;
    let inconclusive = |reason: String| SolutionsError::IntegralClassificationInconclusive { end, reason };
    if last.norm() <= 1.0 {
        let est = extrap::limit(&seq).map_err(|e| inconclusive(e.to_string()))?;
        Ok(([C64::new(1.0, 0.0), -est.value], est))
    } else {
        let inv: Vec<C64> = seq.iter().map(|r| 1.0 / r).collect();
        let est = extrap::limit(&inv).map_err(|e| inconclusive(e.to_string()))?;
        Ok(([-est.value, C64::new(1.0, 0.0)], est))
    }
}

/// Principal/nonprincipal pair at one endpoint at the reference energy.
pub fn construct_basis(spec: &ProblemSpec, end: End, opts: &BasisOpts) -> Result<SolutionBasis, SolutionsError> {
    let kind = match opts.kind {
        Some(k) => k,
        None => endpoint_kind(spec, end)?,
    };
    let other_kind = match end.other() {
        o if spec.endpoint(o).is_finite() && endpoint_regularity(spec, o).regular == RegularFlag::Regular => {
            BasisKind::Regular
        }
        _ => BasisKind::LimitCircle,
    };
    let kinds = match end {
        End::A => (kind, other_kind),
        End::B => (other_kind, kind),
    };
    let (lo, hi) = support_range(spec, kinds, opts.far);
    let limit = match end {
        End::A => lo,
        End::B => hi,
    };
    let far_side = match end {
        End::A => hi,
        End::B => lo,
    };
    let e = spec.endpoint(end);
    let m = spec.reference_point();
    let lambda0 = spec.lambda0;
    let z0 = C64::new(lambda0, 0.0);
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let march = MarchOpts::rescaled(opts.tol);

    let oscillation = if opts.check_oscillation {
        let v = classify::nonoscillation_at(spec, lambda0, end).verdict;
        if v == Nonoscillation::Refuted {
            return Err(SolutionsError::OscillatoryAtLambda0(end));
        }
        Some(v)
    } else {
        None
    };

    let (u, u_hat, principal_ratio, anchor, bound) = match kind {
        BasisKind::Regular => {
            let u = integrate_with(spec, z0, e, [zero, one], far_side, &march)?;
            let uh = integrate_with(spec, z0, e, [one, zero], far_side, &march)?;
            let lim = nearest_zero(&[&u, &uh], m, e)?.unwrap_or(m);
            let (x0, bound) = anchor_and_bound(e, end, lim);
            (u, uh, None, x0, bound)
        }
        BasisKind::LimitCircle | BasisKind::LimitPoint => {
            let (mut u, ratio) = if kind == BasisKind::LimitCircle {
                let (y1, y2) = rayon::join(
                    || integrate_with(spec, z0, m, [one, zero], limit, &march),
                    || integrate_with(spec, z0, m, [zero, one], limit, &march),
                );
                let (init, est) = principal_data(&y1?, &y2?, e, m, limit, end)?;
                (integrate_two_sided(spec, z0, m, init, lo, hi, &march)?, Some(est))
            } else {
                let s = wkb_log_derivative(spec, lambda0, end, limit);
                (integrate_with(spec, z0, limit, [one, C64::new(s, 0.0)], far_side, &march)?, None)
            };
            let lim = nearest_zero(&[&u], m, limit)?.unwrap_or(m);
            let (x0, bound) = anchor_and_bound(e, end, lim);
            let v0 = u.eval(x0)?;
            let target = C64::new(-end.outward(), 0.0);
            u.scale_log(target / v0.u, -v0.log_scale);
            let uh = integrate_two_sided(spec, z0, x0, [zero, -1.0 / target], lo, hi, &march)?;
            (u, uh, ratio, x0, bound)
        }
    };
    let principal_integral = reciprocal_integral(spec, &u, end, bound, limit);
    let nonprincipal_integral = reciprocal_integral(spec, &u_hat, end, bound, limit);
    Ok(SolutionBasis {
        endpoint: end,
        kind,
        u: Arc::new(u),
        u_hat: Arc::new(u_hat),
        lambda0,
        nonvanish_bound: bound,
        anchor,
        approach_limit: limit,
        endpoint_x: e,
        principal_ratio: ratio_or_none(principal_ratio),
        principal_integral,
        nonprincipal_integral,
        oscillation,
    })
}

fn ratio_or_none(e: Option<Estimate>) -> Option<Estimate> {
    e
}

/// Bases at both endpoints, built in parallel.
pub fn construct_bases(spec: &ProblemSpec, opts: &BasisOpts) -> Result<(SolutionBasis, SolutionBasis), SolutionsError> {
    let (a, b) = rayon::join(|| construct_basis(spec, End::A, opts), || construct_basis(spec, End::B, opts));
    Ok((a?, b?))
}

/// Endpoint regime of a problem, regular ends counting as limit circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LcLc,
    LcLp { lc: End },
    LpLp,
}

/// Bases at both endpoints of a problem.
#[derive(Debug, Clone)]
pub struct BasisPair {
    pub a: SolutionBasis,
    pub b: SolutionBasis,
}

impl BasisPair {
    pub fn new(spec: &ProblemSpec, opts: &BasisOpts) -> Result<BasisPair, SolutionsError> {
        let (a, b) = construct_bases(spec, opts)?;
        Ok(BasisPair { a, b })
    }

    pub fn at(&self, end: End) -> &SolutionBasis {
        match end {
            End::A => &self.a,
            End::B => &self.b,
        }
    }

    pub fn regime(&self) -> Regime {
        match (self.a.kind.is_limit_circle(), self.b.kind.is_limit_circle()) {
            (true, true) => Regime::LcLc,
            (true, false) => Regime::LcLp { lc: End::A },
            (false, true) => Regime::LcLp { lc: End::B },
            (false, false) => Regime::LpLp,
        }
    }

    /// Whether generalized boundary values are defined at an endpoint.
    pub fn is_limit_circle(&self, end: End) -> bool {
        self.at(end).kind.is_limit_circle()
    }

    /// Evaluation range shared by functions built from the bases.
    pub fn support(&self) -> (f64, f64) {
        (self.a.approach_limit, self.b.approach_limit)
    }
}

/// Samples `u/û` on the final approach windows; used to check domination.
pub fn domination_ratios(basis: &SolutionBasis, levels: usize) -> Vec<(f64, f64)> {
    let e = basis.approach_limit;
    let from = basis.nonvanish_bound;
    let mut out = Vec::new();
    let _ = (0..levels).try_for_each(|k| {
        let x = if basis.kind == BasisKind::LimitPoint && !basis.endpoint_value().is_finite() {
            from + (e - from) * k as f64 / (levels.max(2) - 1) as f64
        } else {
            e + (from - e) * 0.5f64.powi(k as i32)
        };
        if (x - e).abs() < 1e-300 {
            return ControlFlow::Break(());
        }
        out.push((x, basis.sigma(x)));
        ControlFlow::Continue(())
    });
    out
}
