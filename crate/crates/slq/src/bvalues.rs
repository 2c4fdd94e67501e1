//! Generalized boundary values `g̃ = -W(u, g)` and `g̃' = W(û, g)` at an
//! endpoint, as extrapolated limits along a geometric approach, and the
//! patched reference functions that equal the basis solutions near each end.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extrap::{self, Estimate};
use crate::odecore::{wronskian_scaled, OdeError, QuasiFn, QuasiValue};
use crate::problem::{End, ProblemSpec};
use crate::solutions::{BasisKind, SolutionBasis, FAR_DISTANCE};

/// Largest accepted extrapolation error, relative to `1 + |value|`.
pub const ACCEPT_RELATIVE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BvaluesError {
    #[error("{quantity} at endpoint {endpoint} did not settle (error estimate {error:e})")]
    NoConvergence { endpoint: End, quantity: &'static str, error: f64 },
    #[error("nonvanishing windows overlap: a0 = {a0}, b0 = {b0}")]
    WindowsOverlap { a0: f64, b0: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    RatioLimit,
    WronskianLimit,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub x: f64,
    pub tilde: C64,
    pub tilde_prime: C64,
    pub ratio: Option<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedBoundaryValues {
    pub endpoint: End,
    pub tilde: C64,
    /// Unavailable when the Wronskian sequence does not settle, as for
    /// functions that lie only in the form domain.
    pub tilde_prime: Option<C64>,
    pub route: Route,
    pub tilde_error: f64,
    pub tilde_prime_error: f64,
    /// Limit of `g/û`, a cross-check on `g̃`.
    pub ratio_tilde: Option<C64>,
    pub ratio_error: Option<f64>,
    /// Limit of `(g - g̃ û)/u`, a loose cross-check on `g̃'`.
    pub difference_quotient: Option<C64>,
    pub extrapolation_table: Vec<TableRow>,
}

impl GeneralizedBoundaryValues {
    /// `|g̃_ratio - g̃|` against the combined error estimates.
    pub fn route_discrepancy(&self) -> Option<(f64, f64)> {
        let r = self.ratio_tilde?;
        Some(((r - self.tilde).norm(), self.tilde_error + self.ratio_error.unwrap_or(0.0)))
    }

    pub fn tilde_prime_or_nan(&self) -> C64 {
        self.tilde_prime.unwrap_or(C64::new(f64::NAN, f64::NAN))
    }

    /// `(g̃, g̃')` with an unavailable derivative read as zero.
    pub fn pair(&self) -> (C64, C64) {
        (self.tilde, self.tilde_prime.unwrap_or(C64::new(0.0, 0.0)))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GbvOpts {
    pub accept: f64,
    /// Fail when `g̃'` does not settle instead of reporting it unavailable.
    pub require_derivative: bool,
}

impl Default for GbvOpts {
    fn default() -> Self {
        GbvOpts { accept: ACCEPT_RELATIVE, require_derivative: false }
    }
}

/// Approach levels `x_k = e ∓ d0 2^-k` from the nonvanishing bound down to
/// the approach limit; doubling steps toward a far point for infinite ends.
pub fn approach_levels(basis: &SolutionBasis) -> Vec<f64> {
    let e = basis.endpoint_value();
    let from = basis.nonvanish_bound;
    let limit = basis.approach_limit;
    let mut xs = Vec::new();
    if e.is_finite() {
        let d0 = (e - from).abs();
        let s = -basis.endpoint.outward();
        for k in 0..64 {
            let x = e + s * d0 * 0.5f64.powi(k);
            if (x - e).abs() < (limit - e).abs() {
                break;
            }
            xs.push(x);
        }
    } else {
        let span = limit - from;
        for k in 0..=10 {
            xs.push(from + span * (1.0 - 0.5f64.powi(k)));
        }
        xs.push(limit);
    }
    xs
}

fn scaled(v: (C64, f64)) -> C64 {
    v.0 * v.1.exp()
}

fn ratio(g: &QuasiValue, w: &QuasiValue) -> C64 {
    g.u / w.u * (g.log_scale - w.log_scale).exp()
}

fn settle(sigma: &[f64], seq: &[C64]) -> Option<Estimate> {
    if seq.len() < 3 {
        return seq.last().map(|v| Estimate { value: *v, error: f64::INFINITY, method: extrap::Method::LastTerm, trail: seq.to_vec() });
    }
    if sigma.iter().all(|s| s.is_finite() && *s > 0.0) {
        extrap::limit_in_variable(sigma, seq).ok()
    } else {
        extrap::limit(seq).ok()
    }
}

/// Generalized boundary values of `g` at the basis endpoint.
pub fn gbv(basis: &SolutionBasis, g: &dyn QuasiFn, opts: &GbvOpts) -> Result<GeneralizedBoundaryValues, BvaluesError> {
    let end = basis.endpoint;
    let u = &*basis.u;
    let uh = &*basis.u_hat;
    if basis.kind == BasisKind::Regular {
        let e = basis.approach_limit;
        let tilde = -scaled(wronskian_scaled(u, g, e)?);
        let tilde_prime = scaled(wronskian_scaled(uh, g, e)?);
        return Ok(GeneralizedBoundaryValues {
            endpoint: end,
            tilde,
            tilde_prime: Some(tilde_prime),
            route: Route::Direct,
            tilde_error: 0.0,
            tilde_prime_error: 0.0,
            ratio_tilde: None,
            ratio_error: None,
            difference_quotient: None,
            extrapolation_table: vec![TableRow { x: e, tilde, tilde_prime, ratio: None }],
        });
    }
    let xs = approach_levels(basis);
    let mut table = Vec::with_capacity(xs.len());
    let mut sigma = Vec::with_capacity(xs.len());
    for &x in &xs {
        let gv = g.eval(x)?;
        let uhv = uh.eval(x)?;
        table.push(TableRow {
            x,
            tilde: -scaled(wronskian_scaled(u, g, x)?),
            tilde_prime: scaled(wronskian_scaled(uh, g, x)?),
            ratio: Some(ratio(&gv, &uhv)),
        });
        sigma.push(basis.sigma(x));
    }
    let tildes: Vec<C64> = table.iter().map(|r| r.tilde).collect();
    let primes: Vec<C64> = table.iter().map(|r| r.tilde_prime).collect();
    let ratios: Vec<C64> = table.iter().filter_map(|r| r.ratio).collect();

    let t = settle(&sigma, &tildes).ok_or(BvaluesError::NoConvergence { endpoint: end, quantity: "g̃", error: f64::NAN })?;
    if !(t.error <= opts.accept * (1.0 + t.value.norm())) {
        return Err(BvaluesError::NoConvergence { endpoint: end, quantity: "g̃", error: t.error });
    }
    let tp = settle(&sigma, &primes);
    let (tilde_prime, tilde_prime_error) = match tp {
        Some(e) if e.error <= opts.accept * (1.0 + e.value.norm()) => (Some(e.value), e.error),
        Some(e) if opts.require_derivative => {
            return Err(BvaluesError::NoConvergence { endpoint: end, quantity: "g̃'", error: e.error })
        }
        Some(e) => (None, e.error),
        None => (None, f64::INFINITY),
    };
    let rt = if basis.kind == BasisKind::LimitCircle { settle(&sigma, &ratios) } else { None };
    let dq = match (basis.kind, tilde_prime) {
        (BasisKind::LimitCircle, Some(_)) => {
            let seq: Vec<C64> = xs
                .iter()
                .take(xs.len().div_ceil(2))
                .map(|&x| -> Result<C64, OdeError> {
                    let gv = g.eval(x)?;
                    let uv = u.eval(x)?;
                    let uhv = uh.eval(x)?;
                    let rest = gv.u * gv.log_scale.exp() - t.value * uhv.u * uhv.log_scale.exp();
                    Ok(rest / (uv.u * uv.log_scale.exp()))
                })
                .collect::<Result<_, _>>()?;
            extrap::limit(&seq).ok().map(|e| e.value)
        }
        _ => None,
    };
    Ok(GeneralizedBoundaryValues {
        endpoint: end,
        tilde: t.value,
        tilde_prime,
        route: Route::WronskianLimit,
        tilde_error: t.error,
        tilde_prime_error,
        ratio_tilde: rt.as_ref().map(|e| e.value),
        ratio_error: rt.as_ref().map(|e| e.error),
        difference_quotient: dq,
        extrapolation_table: table,
    })
}

/// Quintic smoothstep on `[l, r]` with its first two derivatives.
pub fn smoothstep(x: f64, l: f64, r: f64) -> (f64, f64, f64) {
    if x <= l {
        return (0.0, 0.0, 0.0);
    }
    if x >= r {
        return (1.0, 0.0, 0.0);
    }
    let h = r - l;
    let s = (x - l) / h;
    let v = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let d = 30.0 * s * s * (1.0 - s) * (1.0 - s) / h;
    let d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (h * h);
    (v, d, d2)
}

/// `(1 - χ) w_a + χ w_b`, with a missing piece read as zero.
#[derive(Clone)]
pub struct Patched {
    spec: ProblemSpec,
    left: Option<Arc<dyn QuasiFn>>,
    right: Option<Arc<dyn QuasiFn>>,
    window: (f64, f64),
}

impl Patched {
    pub fn new(spec: &ProblemSpec, left: Option<Arc<dyn QuasiFn>>, right: Option<Arc<dyn QuasiFn>>, window: (f64, f64)) -> Patched {
        Patched { spec: spec.clone(), left, right, window }
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    fn piece(w: &Option<Arc<dyn QuasiFn>>, x: f64) -> Result<(C64, C64), OdeError> {
        match w {
            Some(f) => f.value(x),
            None => Ok((C64::new(0.0, 0.0), C64::new(0.0, 0.0))),
        }
    }

    fn piece_tau(&self, w: &Option<Arc<dyn QuasiFn>>, x: f64) -> Result<Option<C64>, OdeError> {
        match w {
            Some(f) => f.exact_tau(x),
            None => Ok(Some(C64::new(0.0, 0.0))),
        }
    }
}

impl QuasiFn for Patched {
    fn eval(&self, x: f64) -> Result<QuasiValue, OdeError> {
        let (l, r) = self.window;
        let zero = QuasiValue::real(0.0, 0.0);
        if x <= l {
            return self.left.as_ref().map_or(Ok(zero), |f| f.eval(x));
        }
        if x >= r {
            return self.right.as_ref().map_or(Ok(zero), |f| f.eval(x));
        }
        let (c, dc, _) = smoothstep(x, l, r);
        let (a, a1) = Self::piece(&self.left, x)?;
        let (b, b1) = Self::piece(&self.right, x)?;
        let u = a * (1.0 - c) + b * c;
        let u1 = a1 * (1.0 - c) + b1 * c + (b - a) * (self.spec.p(x) * dc);
        Ok(QuasiValue::new(u, u1))
    }

    fn exact_tau(&self, x: f64) -> Result<Option<C64>, OdeError> {
        let (l, r) = self.window;
        if x <= l {
            return self.piece_tau(&self.left, x);
        }
        if x >= r {
            return self.piece_tau(&self.right, x);
        }
        let (c, dc, d2c) = smoothstep(x, l, r);
        let (Some(ta), Some(tb)) = (self.piece_tau(&self.left, x)?, self.piece_tau(&self.right, x)?) else {
            return Ok(None);
        };
        let (a, a1) = Self::piece(&self.left, x)?;
        let (b, b1) = Self::piece(&self.right, x)?;
        let pdc_prime = self.spec.dp(x) * dc + self.spec.p(x) * d2c;
        let corr = ((b1 - a1) * (2.0 * dc) + (b - a) * pdc_prime) / self.spec.r(x);
        Ok(Some(ta * (1.0 - c) + tb * c - corr))
    }

    fn support(&self) -> (f64, f64) {
        let lo = self.left.as_ref().map_or(f64::NEG_INFINITY, |f| f.support().0);
        let hi = self.right.as_ref().map_or(f64::INFINITY, |f| f.support().1);
        (lo, hi)
    }
}

/// `v1 = û` and `v2 = u` near each end, blended on the central third of
/// `(a0, b0)`.
#[derive(Clone)]
pub struct PatchedPair {
    pub v1: Patched,
    pub v2: Patched,
    pub a0: f64,
    pub b0: f64,
    pub window: (f64, f64),
}

fn side_bound(spec: &ProblemSpec, basis: Option<&SolutionBasis>, end: End) -> f64 {
    match basis {
        Some(b) => b.nonvanish_bound,
        None => {
            let e = spec.endpoint(end);
            if e.is_finite() {
                e
            } else {
                spec.reference_point() + e.signum() * FAR_DISTANCE
            }
        }
    }
}

/// Patched pair from the bases available at each end; a missing side
/// contributes nothing beyond the blend window.
pub fn patched_pair(
    spec: &ProblemSpec,
    basis_a: Option<&SolutionBasis>,
    basis_b: Option<&SolutionBasis>,
) -> Result<PatchedPair, BvaluesError> {
    let a0 = side_bound(spec, basis_a, End::A);
    let b0 = side_bound(spec, basis_b, End::B);
    if a0 >= b0 {
        return Err(BvaluesError::WindowsOverlap { a0, b0 });
    }
    let third = (b0 - a0) / 3.0;
    let window = (a0 + third, b0 - third);
    let hat = |b: Option<&SolutionBasis>| b.map(|b| b.u_hat.clone() as Arc<dyn QuasiFn>);
    let prin = |b: Option<&SolutionBasis>| b.map(|b| b.u.clone() as Arc<dyn QuasiFn>);
    Ok(PatchedPair {
        v1: Patched::new(spec, hat(basis_a), hat(basis_b), window),
        v2: Patched::new(spec, prin(basis_a), prin(basis_b), window),
        a0,
        b0,
        window,
    })
}
