//! Self-adjoint extensions: boundary-condition parametrizations, membership
//! residuals and eigenvalues by shooting in generalized-boundary-value
//! coordinates.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvalues::{gbv, BvaluesError, GbvOpts, GeneralizedBoundaryValues};
use crate::odecore::{integrate_two_sided, integrate_with, MarchOpts, OdeError, QuasiFn, SolutionFn};
use crate::problem::{End, ProblemSpec};
use crate::solutions::{wkb_log_derivative, BasisPair, Regime};

/// Relative tolerance on `det R = 1`.
pub const DET_TOL: f64 = 1e-12;
/// Default λ-grid density for bracketing.
pub const GRID_PER_UNIT: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtensionsError {
    #[error("extension {ext} does not match the {regime:?} regime")]
    VariantMismatch { ext: String, regime: Regime },
    #[error("invalid extension parameters: {0}")]
    InvalidParameters(String),
    #[error("shooting failed at λ = {lambda}: {source}")]
    ShootingOverflow { lambda: f64, source: OdeError },
    #[error("boundary values failed at λ = {lambda}: {source}")]
    BoundaryValues { lambda: f64, source: BvaluesError },
    #[error("invalid λ range ({0}, {1})")]
    InvalidRange(f64, f64),
}

/// Boundary-condition parametrization of a self-adjoint extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExtensionSpec {
    Separated { alpha: f64, beta: f64 },
    Coupled {
        phi: f64,
        #[serde(rename = "R")]
        r: [[f64; 2]; 2],
    },
    OneLc { alpha: f64, endpoint: End },
    LpLp,
}

fn angle_ok(t: f64) -> bool {
    (0.0..std::f64::consts::PI).contains(&t)
}

impl ExtensionSpec {
    /// Parameter ranges and `det R = 1`.
    pub fn validate(&self) -> Result<(), ExtensionsError> {
        let bad = |m: String| Err(ExtensionsError::InvalidParameters(m));
        match *self {
            ExtensionSpec::Separated { alpha, beta } => {
                if !angle_ok(alpha) || !angle_ok(beta) {
                    return bad(format!("angles must lie in [0, π): α = {alpha}, β = {beta}"));
                }
            }
            ExtensionSpec::Coupled { phi, r } => {
                if !angle_ok(phi) {
                    return bad(format!("φ must lie in [0, π): {phi}"));
                }
                let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
                let scale = r.iter().flatten().map(|v| v.abs()).fold(1.0, f64::max);
                if (det - 1.0).abs() > DET_TOL * scale * scale {
                    return bad(format!("det R = {det} must equal 1"));
                }
            }
            ExtensionSpec::OneLc { alpha, .. } => {
                if !angle_ok(alpha) {
                    return bad(format!("α must lie in [0, π): {alpha}"));
                }
            }
            ExtensionSpec::LpLp => {}
        }
        Ok(())
    }

    pub fn matches(&self, regime: Regime) -> bool {
        match (self, regime) {
            (ExtensionSpec::Separated { .. } | ExtensionSpec::Coupled { .. }, Regime::LcLc) => true,
            (ExtensionSpec::OneLc { endpoint, .. }, Regime::LcLp { lc }) => *endpoint == lc,
            (ExtensionSpec::LpLp, Regime::LpLp) => true,
            _ => false,
        }
    }

    pub fn check(&self, regime: Regime) -> Result<(), ExtensionsError> {
        self.validate()?;
        if self.matches(regime) {
            Ok(())
        } else {
            Err(ExtensionsError::VariantMismatch { ext: format!("{self:?}"), regime })
        }
    }
}

/// Extension whose form domain is the closure of the minimal form.
pub fn friedrichs_spec(regime: Regime) -> ExtensionSpec {
    match regime {
        Regime::LcLc => ExtensionSpec::Separated { alpha: 0.0, beta: 0.0 },
        Regime::LcLp { lc } => ExtensionSpec::OneLc { alpha: 0.0, endpoint: lc },
        Regime::LpLp => ExtensionSpec::LpLp,
    }
}

/// `sin θ g̃' + cos θ g̃`.
fn angle_residual(theta: f64, (t, tp): (C64, C64)) -> C64 {
    tp * theta.sin() + t * theta.cos()
}

/// Residual of the boundary conditions of an extension for a function with
/// the given boundary values: two components for separated and coupled
/// conditions, one for a single limit-circle end, none for limit point at
/// both ends.
pub fn boundary_residual(
    ext: &ExtensionSpec,
    gbv_a: Option<&GeneralizedBoundaryValues>,
    gbv_b: Option<&GeneralizedBoundaryValues>,
) -> Result<Vec<C64>, ExtensionsError> {
    let mismatch = || ExtensionsError::VariantMismatch { ext: format!("{ext:?}"), regime: Regime::LpLp };
    match *ext {
        ExtensionSpec::Separated { alpha, beta } => {
            let (a, b) = (gbv_a.ok_or_else(mismatch)?, gbv_b.ok_or_else(mismatch)?);
            Ok(vec![angle_residual(alpha, a.pair()), angle_residual(beta, b.pair())])
        }
        ExtensionSpec::Coupled { phi, r } => {
            let (a, b) = (gbv_a.ok_or_else(mismatch)?, gbv_b.ok_or_else(mismatch)?);
            let e = C64::from_polar(1.0, phi);
            let (ta, tpa) = a.pair();
            let (tb, tpb) = b.pair();
            Ok(vec![tb - e * (ta * r[0][0] + tpa * r[0][1]), tpb - e * (ta * r[1][0] + tpa * r[1][1])])
        }
        ExtensionSpec::OneLc { alpha, endpoint } => {
            let v = match endpoint {
                End::A => gbv_a,
                End::B => gbv_b,
            }
            .ok_or_else(mismatch)?;
            Ok(vec![angle_residual(alpha, v.pair())])
        }
        ExtensionSpec::LpLp => Ok(Vec::new()),
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: f64,
    pub bracket: (f64, f64),
    /// Value of the shooting function at the reported eigenvalue.
    pub shooting_residual: f64,
    pub eigenfunction: Arc<SolutionFn>,
}

/// Serializable eigenvalue row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub index: usize,
    pub lambda: f64,
    pub bracket: (f64, f64),
    pub shooting_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ShootOpts {
    pub tol: f64,
    pub grid_per_unit: usize,
    pub ode_tol: f64,
}

impl Default for ShootOpts {
    fn default() -> Self {
        ShootOpts { tol: 1e-10, grid_per_unit: GRID_PER_UNIT, ode_tol: 1e-12 }
    }
}

/// Solutions at `λ` used by the shooting function.
struct Shot {
    value: f64,
    init: [C64; 2],
    anchor: f64,
    from_lp: Option<SolutionFn>,
}

struct Shooter<'a> {
    spec: &'a ProblemSpec,
    pair: &'a BasisPair,
    ext: &'a ExtensionSpec,
    ode_tol: f64,
}

fn real_parts(v: &GeneralizedBoundaryValues) -> (C64, C64) {
    v.pair()
}

impl Shooter<'_> {
    fn march(&self, lambda: f64) -> MarchOpts {
        let _ = lambda;
        MarchOpts::rescaled(self.ode_tol)
    }

    /// Fundamental system at λ normalized at the reference point.
    fn fundamental(&self, lambda: f64) -> Result<(SolutionFn, SolutionFn), ExtensionsError> {
        let m = self.spec.reference_point();
        let (lo, hi) = self.pair.support();
        let z = C64::new(lambda, 0.0);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let opts = self.march(lambda);
        let (p1, p2) = rayon::join(
            || integrate_two_sided(self.spec, z, m, [one, zero], lo, hi, &opts),
            || integrate_two_sided(self.spec, z, m, [zero, one], lo, hi, &opts),
        );
        let wrap = |source| ExtensionsError::ShootingOverflow { lambda, source };
        Ok((p1.map_err(wrap)?, p2.map_err(wrap)?))
    }

    /// Solution decaying into a limit-point end, integrated inward.
    fn decaying(&self, lambda: f64, end: End) -> Result<SolutionFn, ExtensionsError> {
        let basis = self.pair.at(end);
        let start = basis.approach_limit;
        let target = self.pair.at(end.other()).approach_limit;
        let s = wkb_log_derivative(self.spec, lambda, end, start);
        let wrap = |source| ExtensionsError::ShootingOverflow { lambda, source };
        let mut psi = integrate_with(
            self.spec,
            C64::new(lambda, 0.0),
            start,
            [C64::new(1.0, 0.0), C64::new(s, 0.0)],
            target,
            &self.march(lambda),
        )
        .map_err(wrap)?;
        // unit state at the reference point
        let v = psi.eval(self.spec.reference_point()).map_err(wrap)?;
        let n = (v.u.norm_sqr() + v.u1.norm_sqr()).sqrt();
        psi.scale_log(C64::new(1.0 / n, 0.0), -v.log_scale);
        Ok(psi)
    }

    fn values(&self, lambda: f64, end: End, f: &dyn QuasiFn) -> Result<(C64, C64), ExtensionsError> {
        let v = gbv(self.pair.at(end), f, &GbvOpts { accept: 1e-4, require_derivative: true })
            .map_err(|source| ExtensionsError::BoundaryValues { lambda, source })?;
        Ok(real_parts(&v))
    }

    fn unit_state(f: &SolutionFn, x: f64) -> Result<(C64, C64), OdeError> {
        let v = f.eval(x)?;
        let n = (v.u.norm_sqr() + v.u1.norm_sqr()).sqrt();
        Ok((v.u / n, v.u1 / n))
    }

    fn shoot(&self, lambda: f64) -> Result<Shot, ExtensionsError> {
        let m = self.spec.reference_point();
        let wrap = |source| ExtensionsError::ShootingOverflow { lambda, source };
        match *self.ext {
            ExtensionSpec::Separated { alpha, beta } => {
                let (p1, p2) = self.fundamental(lambda)?;
                let (a1, a2) = (self.values(lambda, End::A, &p1)?, self.values(lambda, End::A, &p2)?);
                let (b1, b2) = (self.values(lambda, End::B, &p1)?, self.values(lambda, End::B, &p2)?);
                let (ba1, ba2) = (angle_residual(alpha, a1), angle_residual(alpha, a2));
                let (bb1, bb2) = (angle_residual(beta, b1), angle_residual(beta, b2));
                let f = ba1 * bb2 - ba2 * bb1;
                Ok(Shot { value: f.re, init: [ba2, -ba1], anchor: m, from_lp: None })
            }
            ExtensionSpec::Coupled { phi, r } => {
                let (p1, p2) = self.fundamental(lambda)?;
                let (a1, a2) = (self.values(lambda, End::A, &p1)?, self.values(lambda, End::A, &p2)?);
                let (b1, b2) = (self.values(lambda, End::B, &p1)?, self.values(lambda, End::B, &p2)?);
                let e = C64::from_polar(1.0, phi);
                // columns: boundary coordinates (g̃, g̃') of each solution
                let ga = [[a1.0, a2.0], [a1.1, a2.1]];
                let gb = [[b1.0, b2.0], [b1.1, b2.1]];
                let rga = |i: usize, j: usize| e * (ga[0][j] * r[i][0] + ga[1][j] * r[i][1]);
                let mat = [[gb[0][0] - rga(0, 0), gb[0][1] - rga(0, 1)], [gb[1][0] - rga(1, 0), gb[1][1] - rga(1, 1)]];
                let det = mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0];
                let f = det / e;
                // null vector from the better-conditioned row
                let row = if mat[0][0].norm() + mat[0][1].norm() >= mat[1][0].norm() + mat[1][1].norm() { 0 } else { 1 };
                Ok(Shot { value: f.re, init: [mat[row][1], -mat[row][0]], anchor: m, from_lp: None })
            }
            ExtensionSpec::OneLc { alpha, endpoint } => {
                let psi = self.decaying(lambda, endpoint.other())?;
                let bt = angle_residual(alpha, self.values(lambda, endpoint, &psi)?);
                let (u, u1) = Self::unit_state(&psi, m).map_err(wrap)?;
                Ok(Shot { value: bt.re, init: [u, u1], anchor: m, from_lp: Some(psi) })
            }
            ExtensionSpec::LpLp => {
                let (pa, pb) = rayon::join(|| self.decaying(lambda, End::A), || self.decaying(lambda, End::B));
                let (pa, pb) = (pa?, pb?);
                let (ua, ua1) = Self::unit_state(&pa, m).map_err(wrap)?;
                let (ub, ub1) = Self::unit_state(&pb, m).map_err(wrap)?;
                let w = ua * ub1 - ua1 * ub;
                Ok(Shot { value: w.re, init: [ua, ua1], anchor: m, from_lp: Some(pa) })
            }
        }
    }

    fn value(&self, lambda: f64) -> Result<f64, ExtensionsError> {
        Ok(self.shoot(lambda)?.value)
    }

    fn eigenfunction(&self, lambda: f64) -> Result<(f64, SolutionFn), ExtensionsError> {
        let shot = self.shoot(lambda)?;
        if let Some(psi) = shot.from_lp {
            return Ok((shot.value, psi));
        }
        let (lo, hi) = self.pair.support();
        let f = integrate_two_sided(self.spec, C64::new(lambda, 0.0), shot.anchor, shot.init, lo, hi, &self.march(lambda))
            .map_err(|source| ExtensionsError::ShootingOverflow { lambda, source })?;
        Ok((shot.value, f))
    }

    /// Illinois-modified regula falsi on a sign-change bracket.
    fn refine(&self, (mut a, mut fa): (f64, f64), (mut b, mut fb): (f64, f64), tol: f64) -> Result<f64, ExtensionsError> {
        let mut side = 0;
        for _ in 0..200 {
            if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
                break;
            }
            let mut c = (a * fb - b * fa) / (fb - fa);
            if !(c > a.min(b) && c < a.max(b)) {
                c = 0.5 * (a + b);
            }
            let fc = self.value(c)?;
            if fc == 0.0 {
                return Ok(c);
            }
            if fc.signum() == fb.signum() {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
        }
        Ok(if fa.abs() < fb.abs() { a } else { b })
    }
}

/// Eigenvalues of an extension in `(lmin, lmax)` by sign changes of a
/// shooting function on a λ-grid, refined by regula falsi.
pub fn eigenvalues_shoot(
    spec: &ProblemSpec,
    pair: &BasisPair,
    ext: &ExtensionSpec,
    range: (f64, f64),
    opts: &ShootOpts,
) -> Result<Vec<Eigenpair>, ExtensionsError> {
    ext.check(pair.regime())?;
    let (lmin, lmax) = range;
    if !(lmin < lmax) || !lmin.is_finite() || !lmax.is_finite() {
        return Err(ExtensionsError::InvalidRange(lmin, lmax));
    }
    let shooter = Shooter { spec, pair, ext, ode_tol: opts.ode_tol };
    let n = ((lmax - lmin) * opts.grid_per_unit as f64).ceil().max(2.0) as usize;
    let grid: Vec<f64> = (0..=n).map(|k| lmin + (lmax - lmin) * k as f64 / n as f64).collect();
    let values: Vec<f64> = grid.par_iter().map(|&l| shooter.value(l)).collect::<Result<_, _>>()?;
    let mut roots = Vec::new();
    for k in 0..n {
        let (l0, l1) = (grid[k], grid[k + 1]);
        let (f0, f1) = (values[k], values[k + 1]);
        if f0 == 0.0 {
            roots.push((l0, (l0, l0)));
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            roots.push((shooter.refine((l0, f0), (l1, f1), opts.tol)?, (l0, l1)));
        }
    }
    if values[n] == 0.0 {
        roots.push((grid[n], (grid[n], grid[n])));
    }
    roots
        .into_par_iter()
        .map(|(lambda, bracket)| {
            let (res, f) = shooter.eigenfunction(lambda)?;
            Ok(Eigenpair { lambda, bracket, shooting_residual: res, eigenfunction: Arc::new(f) })
        })
        .collect()
}

pub fn eigen_rows(pairs: &[Eigenpair]) -> Vec<EigenRow> {
    pairs
        .iter()
        .enumerate()
        .map(|(index, p)| EigenRow { index, lambda: p.lambda, bracket: p.bracket, shooting_residual: p.shooting_residual })
        .collect()
}
