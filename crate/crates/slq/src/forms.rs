//! Regularized sesquilinear forms `𝔔_{c,d}` in all endpoint regimes, their
//! boundary decorations for each extension, and Green-type identities.
//!
//! With `w` the nonprincipal solution at a limit-circle end and the
//! principal one at a limit-point end, and `N f = (f^[1] - f w^[1]/w)/√p`,
//!
//! ```text
//! 𝔔(f, g) = ∫_a^c N̄f Ng + ∫_d^b N̄f Ng + λ₀ ∫_a^c r f̄ g + λ₀ ∫_d^b r f̄ g
//!         + ∫_c^d (p⁻¹ f̄^[1] g^[1] + q f̄ g)
//!         + (w^[1]/w)(c) f̄(c) g(c) - (w^[1]/w)(d) f̄(d) g(d).
//! ```
//!
//! The endpoint pieces are computed once up to fixed anchors inside each
//! window and continued to `c` or `d` by a regular integral, so every cut
//! point shares the same singular tail.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extrap;
use crate::bvalues::{gbv, BvaluesError, GbvOpts, GeneralizedBoundaryValues};
use crate::extensions::ExtensionSpec;
use crate::odecore::{tau_at, OdeError, QuasiFn};
use crate::problem::{End, ProblemSpec};
use crate::quad::{self, ImproperOpts, QuadError};
use crate::solutions::{BasisKind, BasisPair, Regime, SolutionBasis};

/// Real-line integrand shared across worker threads.
pub type Integrand<'a> = dyn Fn(f64) -> C64 + Sync + 'a;

const ABS_TOL: f64 = 1e-15;
const REL_TOL: f64 = 1e-12;
const MAX_PANELS: usize = 4000;
/// Domain constraints on generalized boundary values hold within this
/// tolerance, relative to `1 + |g̃|` at the other quantities involved.
pub const DOMAIN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormsError {
    #[error("basis function vanishes at x = {x}")]
    BasisVanishes { x: f64 },
    #[error("invalid window (c = {c}, d = {d}): {reason}")]
    WindowInvalid { c: f64, d: f64, reason: String },
    #[error("{piece} integral diverges: {source}")]
    FormIntegralDiverges { piece: &'static str, source: QuadError },
    #[error("domain constraint violated: {0}")]
    DomainConstraintViolated(String),
    #[error("extension {ext} does not match the {regime:?} regime")]
    VariantMismatch { ext: String, regime: Regime },
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Bvalues(#[from] BvaluesError),
}

/// Cut points `a < c < a₀ ≤ b₀ < d < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormWindow {
    pub c: f64,
    pub d: f64,
}

/// Fixed point inside an endpoint window from which the singular tail is
/// integrated; also the default cut point.
pub fn tail_anchor(basis: &SolutionBasis) -> f64 {
    let e = basis.endpoint_value();
    let bound = basis.nonvanish_bound;
    if e.is_finite() {
        e + 0.5 * (bound - e)
    } else {
        bound + basis.endpoint.outward()
    }
}

impl FormWindow {
    pub fn default_for(pair: &BasisPair) -> FormWindow {
        FormWindow { c: tail_anchor(&pair.a), d: tail_anchor(&pair.b) }
    }

    /// Checks that each cut lies strictly inside its endpoint window.
    pub fn validate(&self, pair: &BasisPair) -> Result<(), FormsError> {
        let inside = |x: f64, basis: &SolutionBasis| {
            let lim = basis.approach_limit;
            let bound = basis.nonvanish_bound;
            let (lo, hi) = if lim < bound { (lim, bound) } else { (bound, lim) };
            x > lo && x < hi
        };
        let err = |reason: &str| FormsError::WindowInvalid { c: self.c, d: self.d, reason: reason.to_string() };
        if !(self.c < self.d) {
            return Err(err("c must lie left of d"));
        }
        if !inside(self.c, &pair.a) {
            return Err(err("c outside the window at a"));
        }
        if !inside(self.d, &pair.b) {
            return Err(err("d outside the window at b"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorationTerm {
    pub label: String,
    pub value: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormPieces {
    pub left_n: C64,
    pub right_n: C64,
    pub left_mass: C64,
    pub right_mass: C64,
    pub middle: C64,
    pub boundary_c: C64,
    pub boundary_d: C64,
    pub decoration: Vec<DecorationTerm>,
}

impl FormPieces {
    pub fn sum(&self) -> C64 {
        self.left_n
            + self.right_n
            + self.left_mass
            + self.right_mass
            + self.middle
            + self.boundary_c
            + self.boundary_d
            + self.decoration.iter().map(|t| t.value).sum::<C64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormValue {
    pub value: C64,
    pub pieces: FormPieces,
    pub window: FormWindow,
    pub regime: Regime,
    /// Sum of quadrature and extrapolation error estimates.
    pub error: f64,
}

/// `w^[1]/w` for the weight solution at an end, independent of its scale.
fn log_derivative(basis: &SolutionBasis, x: f64) -> Result<C64, FormsError> {
    let w = weight(basis).eval(x)?;
    if w.u.norm() == 0.0 {
        return Err(FormsError::BasisVanishes { x });
    }
    Ok(w.u1 / w.u)
}

/// Nonprincipal solution at a limit-circle end, principal at a limit-point end.
fn weight(basis: &SolutionBasis) -> &dyn QuasiFn {
    if basis.kind == BasisKind::LimitPoint {
        &*basis.u
    } else {
        &*basis.u_hat
    }
}

/// `N f = √p w (f/w)'` at the given points, evaluated as
/// `(f^[1] - f w^[1]/w)/√p`.
pub fn n_operator_apply(spec: &ProblemSpec, basis: &SolutionBasis, f: &dyn QuasiFn, xs: &[f64]) -> Result<Vec<C64>, FormsError> {
    xs.iter().map(|&x| n_at(spec, basis, f, x)).collect()
}

fn n_at(spec: &ProblemSpec, basis: &SolutionBasis, f: &dyn QuasiFn, x: f64) -> Result<C64, FormsError> {
    let rho = log_derivative(basis, x)?;
    let (v, v1) = f.value(x)?;
    Ok((v1 - v * rho) / spec.p(x).sqrt())
}

/// Integrand wrapper turning evaluation failures into NaN, which the
/// quadrature reports as a non-finite integrand.
fn guarded<F: Fn(f64) -> Result<C64, FormsError>>(f: F) -> impl Fn(f64) -> C64 {
    move |x| f(x).unwrap_or(C64::new(f64::NAN, f64::NAN))
}

fn quad_err(piece: &'static str) -> impl Fn(QuadError) -> FormsError {
    move |source| FormsError::FormIntegralDiverges { piece, source }
}

/// Signed regular integral from `from` to `to`.
fn regular(piece: &'static str, f: &Integrand, from: f64, to: f64) -> Result<(C64, f64), FormsError> {
    if from == to {
        return Ok((C64::new(0.0, 0.0), 0.0));
    }
    let (lo, hi, s) = if from < to { (from, to, 1.0) } else { (to, from, -1.0) };
    let r = quad::adaptive(f, lo, hi, ABS_TOL, REL_TOL, MAX_PANELS).map_err(quad_err(piece))?;
    Ok((r.value * s, r.error))
}

/// Integral from `from` to the endpoint of a basis: direct at a regular end,
/// geometric panels at a singular finite end, truncated at the far point at
/// an infinite end. Returned with the orientation `from → e`.
///
/// `remainder(x)` estimates the integral from `x` to the endpoint; the
/// corrected partial sums are then extrapolated instead of the raw ones.
pub fn endpoint_integral(
    piece: &'static str,
    basis: &SolutionBasis,
    f: &Integrand,
    from: f64,
    remainder: Option<&Integrand>,
) -> Result<(C64, f64), FormsError> {
    let e = basis.endpoint_value();
    match basis.kind {
        BasisKind::Regular => regular(piece, f, from, e),
        _ if !e.is_finite() => regular(piece, f, from, basis.approach_limit),
        _ => {
            let start = (e - from).abs();
            let opts = ImproperOpts { cutoff: 2.0 * (basis.approach_limit - e).abs() / start, ..ImproperOpts::default() };
            let r = quad::improper(f, from, e, &opts, None).map_err(quad_err(piece))?;
            let Some(rem) = remainder else {
                return Ok((r.value, r.error));
            };
            let corrected: Vec<C64> = r.partials.iter().zip(&r.points).map(|(s, &x)| s + rem(x)).collect();
            if corrected.len() < 3 || corrected.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Ok((r.value, r.error));
            }
            let est = extrap::limit(&corrected).map_err(|_| {
                quad_err(piece)(QuadError::Undecided { endpoint: e, panels: corrected.len() })
            })?;
            Ok((est.value, est.error))
        }
    }
}

/// Leading remainder of the N-integral toward a singular limit-circle end:
/// `conj W(û, f) W(û, g) ∫_x^e dt/(p û²)`, the last factor being `|u/û|`.
fn n_remainder(basis: &SolutionBasis, f: &dyn QuasiFn, g: &dyn QuasiFn, x: f64) -> Result<C64, FormsError> {
    let (w, w1) = basis.u_hat.value(x)?;
    let (fv, f1) = f.value(x)?;
    let (gv, g1) = g.value(x)?;
    let wf = w * f1 - w1 * fv;
    let wg = w * g1 - w1 * gv;
    let orient = if basis.endpoint_value() > x { 1.0 } else { -1.0 };
    Ok(wf.conj() * wg * (orient * basis.sigma(x)))
}

/// `∫_e^{x}` of an endpoint integrand, oriented from the endpoint inward:
/// tail up to the fixed anchor plus a regular piece to `x`.
fn endpoint_piece(
    piece: &'static str,
    basis: &SolutionBasis,
    f: &Integrand,
    x: f64,
    remainder: Option<&Integrand>,
) -> Result<(C64, f64), FormsError> {
    let anchor = tail_anchor(basis);
    let (tail, e1) = endpoint_integral(piece, basis, f, anchor, remainder)?;
    let (reg, e2) = regular(piece, f, anchor, x)?;
    // tail runs anchor → e; the piece runs e → x
    let (inner, outer) = (-tail, reg);
    let oriented = match basis.endpoint {
        End::A => inner + outer,
        End::B => -(inner + outer),
    };
    Ok((oriented, e1 + e2))
}

/// Undecorated form `𝔔_{c,d}(f, g)`.
pub fn q_base(spec: &ProblemSpec, pair: &BasisPair, window: FormWindow, f: &dyn QuasiFn, g: &dyn QuasiFn) -> Result<FormValue, FormsError> {
    window.validate(pair)?;
    let lambda0 = spec.lambda0;
    let mass_integrand = guarded(|x| {
        let (fv, _) = f.value(x)?;
        let (gv, _) = g.value(x)?;
        Ok(fv.conj() * gv * (lambda0 * spec.r(x)))
    });
    let middle_integrand = guarded(|x| {
        let (fv, f1) = f.value(x)?;
        let (gv, g1) = g.value(x)?;
        Ok(f1.conj() * g1 / spec.p(x) + fv.conj() * gv * spec.q(x))
    });
    let na = guarded(|x| Ok(n_at(spec, &pair.a, f, x)?.conj() * n_at(spec, &pair.a, g, x)?));
    let nb = guarded(|x| Ok(n_at(spec, &pair.b, f, x)?.conj() * n_at(spec, &pair.b, g, x)?));
    let ra = guarded(|x| n_remainder(&pair.a, f, g, x));
    let rb = guarded(|x| n_remainder(&pair.b, f, g, x));
    let ((left_n, right_n), ((left_mass, right_mass), middle)) = rayon::join(
        || rayon::join(|| endpoint_piece("left N", &pair.a, &na, window.c, Some(&ra)), || endpoint_piece("right N", &pair.b, &nb, window.d, Some(&rb))),
        || {
            rayon::join(
                || {
                    if lambda0 == 0.0 {
                        let z = Ok((C64::new(0.0, 0.0), 0.0));
                        (z.clone(), z)
                    } else {
                        (
                            endpoint_piece("left mass", &pair.a, &mass_integrand, window.c, None),
                            endpoint_piece("right mass", &pair.b, &mass_integrand, window.d, None),
                        )
                    }
                },
                || regular("middle", &middle_integrand, window.c, window.d),
            )
        },
    );
    let (left_n, e1) = left_n?;
    let (right_n, e2) = right_n?;
    let (left_mass, e3) = left_mass?;
    let (right_mass, e4) = right_mass?;
    let (middle, e5) = middle?;
    let point = |x: f64| -> Result<C64, FormsError> {
        let (fv, _) = f.value(x)?;
        let (gv, _) = g.value(x)?;
        Ok(fv.conj() * gv)
    };
    let boundary_c = log_derivative(&pair.a, window.c)? * point(window.c)?;
    let boundary_d = -log_derivative(&pair.b, window.d)? * point(window.d)?;
    let pieces = FormPieces { left_n, right_n, left_mass, right_mass, middle, boundary_c, boundary_d, decoration: Vec::new() };
    Ok(FormValue { value: pieces.sum(), pieces, window, regime: pair.regime(), error: e1 + e2 + e3 + e4 + e5 })
}

/// Generalized boundary values of a function at every limit-circle end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndValues {
    pub a: Option<GeneralizedBoundaryValues>,
    pub b: Option<GeneralizedBoundaryValues>,
}

impl EndValues {
    pub fn at(&self, end: End) -> Option<&GeneralizedBoundaryValues> {
        match end {
            End::A => self.a.as_ref(),
            End::B => self.b.as_ref(),
        }
    }

    fn tilde(&self, end: End) -> C64 {
        self.at(end).map_or(C64::new(0.0, 0.0), |v| v.tilde)
    }

    fn tilde_prime(&self, end: End) -> C64 {
        self.at(end).and_then(|v| v.tilde_prime).unwrap_or(C64::new(0.0, 0.0))
    }
}

pub fn end_values(pair: &BasisPair, f: &dyn QuasiFn) -> Result<EndValues, FormsError> {
    let one = |end: End| -> Result<Option<GeneralizedBoundaryValues>, FormsError> {
        if pair.is_limit_circle(end) {
            Ok(Some(gbv(pair.at(end), f, &GbvOpts::default())?))
        } else {
            Ok(None)
        }
    };
    Ok(EndValues { a: one(End::A)?, b: one(End::B)? })
}

pub fn check_variant(ext: &ExtensionSpec, regime: Regime) -> Result<(), FormsError> {
    if ext.matches(regime) {
        Ok(())
    } else {
        Err(FormsError::VariantMismatch { ext: format!("{ext:?}"), regime })
    }
}

fn require_zero(label: &str, v: C64) -> Result<(), FormsError> {
    if v.norm() <= DOMAIN_TOL {
        Ok(())
    } else {
        Err(FormsError::DomainConstraintViolated(format!("{label} = {v} should vanish")))
    }
}

fn cot(t: f64) -> f64 {
    t.cos() / t.sin()
}

/// Decoration terms of an extension, checking the domain constraints on
/// both arguments.
pub fn decoration(ext: &ExtensionSpec, fv: &EndValues, gv: &EndValues) -> Result<Vec<DecorationTerm>, FormsError> {
    let term = |label: &str, value: C64| DecorationTerm { label: label.to_string(), value };
    let (fa, fb, ga, gb) = (fv.tilde(End::A), fv.tilde(End::B), gv.tilde(End::A), gv.tilde(End::B));
    let mut out = Vec::new();
    match *ext {
        ExtensionSpec::Separated { alpha, beta } => {
            if alpha == 0.0 {
                require_zero("f̃(a)", fa)?;
                require_zero("g̃(a)", ga)?;
            } else {
                out.push(term("-cot α f̃(a)* g̃(a)", -cot(alpha) * fa.conj() * ga));
            }
            if beta == 0.0 {
                require_zero("f̃(b)", fb)?;
                require_zero("g̃(b)", gb)?;
            } else {
                out.push(term("cot β f̃(b)* g̃(b)", cot(beta) * fb.conj() * gb));
            }
        }
        ExtensionSpec::Coupled { phi, r } => {
            let e = C64::from_polar(1.0, phi);
            if r[0][1] != 0.0 {
                let k = -1.0 / r[0][1];
                out.push(term("-R11/R12 f̃(a)* g̃(a)", k * r[0][0] * fa.conj() * ga));
                out.push(term("e^{-iφ}/R12 f̃(a)* g̃(b)", -k * e.conj() * fa.conj() * gb));
                out.push(term("e^{iφ}/R12 f̃(b)* g̃(a)", -k * e * fb.conj() * ga));
                out.push(term("-R22/R12 f̃(b)* g̃(b)", k * r[1][1] * fb.conj() * gb));
            } else {
                require_zero("f̃(b) - e^{iφ}R11 f̃(a)", fb - e * r[0][0] * fa)?;
                require_zero("g̃(b) - e^{iφ}R11 g̃(a)", gb - e * r[0][0] * ga)?;
                out.push(term("-R11 R21 f̃(a)* g̃(a)", -r[0][0] * r[1][0] * fa.conj() * ga));
            }
        }
        ExtensionSpec::OneLc { alpha, endpoint } => {
            let (ft, gt) = (fv.tilde(endpoint), gv.tilde(endpoint));
            if alpha == 0.0 {
                require_zero("f̃", ft)?;
                require_zero("g̃", gt)?;
            } else {
                let s = match endpoint {
                    End::A => -1.0,
                    End::B => 1.0,
                };
                out.push(term("∓cot α f̃* g̃", s * cot(alpha) * ft.conj() * gt));
            }
        }
        ExtensionSpec::LpLp => {}
    }
    Ok(out)
}

/// Form of an extension: `q_base` plus its boundary decoration.
pub fn q_decorated(
    spec: &ProblemSpec,
    pair: &BasisPair,
    window: FormWindow,
    ext: &ExtensionSpec,
    f: &dyn QuasiFn,
    g: &dyn QuasiFn,
) -> Result<FormValue, FormsError> {
    check_variant(ext, pair.regime())?;
    let fv = end_values(pair, f)?;
    let gv = end_values(pair, g)?;
    q_decorated_with(spec, pair, window, ext, f, g, &fv, &gv)
}

/// As [`q_decorated`] with precomputed boundary values.
#[allow(clippy::too_many_arguments)]
pub fn q_decorated_with(
    spec: &ProblemSpec,
    pair: &BasisPair,
    window: FormWindow,
    ext: &ExtensionSpec,
    f: &dyn QuasiFn,
    g: &dyn QuasiFn,
    fv: &EndValues,
    gv: &EndValues,
) -> Result<FormValue, FormsError> {
    let decoration = decoration(ext, fv, gv)?;
    let mut v = q_base(spec, pair, window, f, g)?;
    v.pieces.decoration = decoration;
    v.value = v.pieces.sum();
    Ok(v)
}

/// Integral over the whole interval, split at the reference point.
pub fn integrate_full(piece: &'static str, spec: &ProblemSpec, pair: &BasisPair, f: &Integrand) -> Result<(C64, f64), FormsError> {
    let m = spec.reference_point();
    let (left, right) = rayon::join(|| endpoint_integral(piece, &pair.a, f, m, None), || endpoint_integral(piece, &pair.b, f, m, None));
    let (l, e1) = left?;
    let (r, e2) = right?;
    Ok((r - l, e1 + e2))
}

/// `(f, g) = ∫ r f̄ g`.
pub fn inner(spec: &ProblemSpec, pair: &BasisPair, f: &dyn QuasiFn, g: &dyn QuasiFn) -> Result<C64, FormsError> {
    let h = guarded(|x| {
        let (fv, _) = f.value(x)?;
        let (gv, _) = g.value(x)?;
        Ok(fv.conj() * gv * spec.r(x))
    });
    Ok(integrate_full("inner product", spec, pair, &h)?.0)
}

/// `(f, τ g) = ∫ r f̄ τg`.
pub fn pairing_with_tau(spec: &ProblemSpec, pair: &BasisPair, f: &dyn QuasiFn, g: &dyn QuasiFn) -> Result<C64, FormsError> {
    let h = guarded(|x| {
        let (fv, _) = f.value(x)?;
        Ok(fv.conj() * tau_at(spec, g, x, 1e-9)? * spec.r(x))
    });
    Ok(integrate_full("pairing", spec, pair, &h)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenResidual {
    pub residual: C64,
    pub pairing: C64,
    pub form: C64,
    pub boundary_a: C64,
    pub boundary_b: C64,
    pub regime: Regime,
}

/// `(f, T_max g) - 𝔔_{c,d}(f, g) - f̃(a)* g̃'(a) + f̃(b)* g̃'(b)`, keeping
/// only the terms at limit-circle ends.
pub fn green_identity_residual(
    spec: &ProblemSpec,
    pair: &BasisPair,
    window: FormWindow,
    f: &dyn QuasiFn,
    g: &dyn QuasiFn,
) -> Result<GreenResidual, FormsError> {
    let (pairing, form) = rayon::join(|| pairing_with_tau(spec, pair, f, g), || q_base(spec, pair, window, f, g));
    let pairing = pairing?;
    let form = form?.value;
    let fv = end_values(pair, f)?;
    let gv = end_values(pair, g)?;
    let boundary_a = fv.tilde(End::A).conj() * gv.tilde_prime(End::A);
    let boundary_b = -fv.tilde(End::B).conj() * gv.tilde_prime(End::B);
    Ok(GreenResidual {
        residual: pairing - form - boundary_a - boundary_b,
        pairing,
        form,
        boundary_a,
        boundary_b,
        regime: pair.regime(),
    })
}

/// `f̄(x)/u(x) · W(u, g)(x)` toward a limit-point end, which tends to zero
/// for `f` in the form domain and `g` in the maximal domain.
pub fn lp_limit_sequence(basis: &SolutionBasis, f: &dyn QuasiFn, g: &dyn QuasiFn, levels: usize) -> Result<Vec<(f64, C64)>, FormsError> {
    let from = basis.nonvanish_bound;
    let to = basis.approach_limit;
    let e = basis.endpoint_value();
    (0..levels)
        .map(|k| {
            let x = if e.is_finite() {
                let t = (to - e) / (from - e);
                e + (from - e) * t.powf(k as f64 / (levels.max(2) - 1) as f64)
            } else {
                from + (to - from) * k as f64 / (levels.max(2) - 1) as f64
            };
            let uv = basis.u.eval(x)?;
            let (fv, _) = f.value(x)?;
            let (gv, g1) = g.value(x)?;
            // W(u, g)/u = g^[1] - g u^[1]/u, free of the scale of u
            let w_over_u = g1 - gv * (uv.u1 / uv.u);
            Ok((x, fv.conj() * w_over_u))
        })
        .collect()
}
