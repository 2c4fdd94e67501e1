//! Quasi-derivative system `u' = u1/p`, `u1' = (q - λr) u` for `τu = λu`,
//! integrated by an embedded Runge–Kutta 5(4) pair with dense output.

use std::f64::consts::LN_10;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at x = {x} (coefficient singularity inside the integration range?)")]
    StepSizeUnderflow { x: f64 },
    #[error("state became non-finite at x = {x}")]
    NonFiniteState { x: f64 },
    #[error("step budget of {steps} exhausted at x = {x}")]
    StepBudgetExhausted { x: f64, steps: usize },
    #[error("evaluation at x = {x} outside support [{lo}, {hi}]")]
    EvaluationOutsideSupport { x: f64, lo: f64, hi: f64 },
    #[error("difference stencil at x = {x} disagrees with its refinement by {discrepancy:e}")]
    GridTooCoarse { x: f64, discrepancy: f64 },
    #[error("integration range [{from}, {to}] leaves the closed interval [{a}, {b}]")]
    InvalidRange { from: f64, to: f64, a: f64, b: f64 },
}

pub type State = [C64; 2];

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Position with solution value and first quasi-derivative `u1 = p u'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiState {
    pub x: f64,
    pub u: C64,
    pub u1: C64,
}

impl QuasiState {
    pub fn real(x: f64, u: f64, u1: f64) -> QuasiState {
        QuasiState { x, u: C64::new(u, 0.0), u1: C64::new(u1, 0.0) }
    }
}

/// Value and quasi-derivative, both to be multiplied by `exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiValue {
    pub u: C64,
    pub u1: C64,
    pub log_scale: f64,
}

impl QuasiValue {
    pub fn new(u: C64, u1: C64) -> QuasiValue {
        QuasiValue { u, u1, log_scale: 0.0 }
    }

    pub fn real(u: f64, u1: f64) -> QuasiValue {
        QuasiValue::new(C64::new(u, 0.0), C64::new(u1, 0.0))
    }

    /// Unscaled `(u, u1)`.
    pub fn actual(&self) -> (C64, C64) {
        if self.log_scale == 0.0 {
            (self.u, self.u1)
        } else {
            let s = self.log_scale.exp();
            (self.u * s, self.u1 * s)
        }
    }
}

/// A function known together with its first quasi-derivative.
pub trait QuasiFn: Send + Sync {
    fn eval(&self, x: f64) -> Result<QuasiValue, OdeError>;

    /// `τg(x)` when an exact formula is available.
    fn exact_tau(&self, _x: f64) -> Result<Option<C64>, OdeError> {
        Ok(None)
    }

    /// Closed interval on which `eval` succeeds.
    fn support(&self) -> (f64, f64);

    fn value(&self, x: f64) -> Result<(C64, C64), OdeError> {
        self.eval(x).map(|v| v.actual())
    }
}

/// `W(f, g)(x) = f g^[1] - f^[1] g`.
pub fn wronskian(f: &dyn QuasiFn, g: &dyn QuasiFn, x: f64) -> Result<C64, OdeError> {
    let (w, ls) = wronskian_scaled(f, g, x)?;
    Ok(if ls == 0.0 { w } else { w * ls.exp() })
}

/// Wronskian as `(w, log_scale)` with the true value `w exp(log_scale)`.
pub fn wronskian_scaled(f: &dyn QuasiFn, g: &dyn QuasiFn, x: f64) -> Result<(C64, f64), OdeError> {
    let a = f.eval(x)?;
    let b = g.eval(x)?;
    Ok((a.u * b.u1 - a.u1 * b.u, a.log_scale + b.log_scale))
}

/// Wronskian of raw states.
pub fn wronskian_states(f: State, g: State) -> C64 {
    f[0] * g[1] - f[1] * g[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    FromLeftAnchor,
    FromRightAnchor,
    TwoSided,
}

/// One accepted step with its quartic-plus dense-output coefficients.
#[derive(Debug, Clone)]
struct Step {
    x0: f64,
    h: f64,
    rcont: [State; 5],
    log_scale: f64,
}

impl Step {
    fn lo(&self) -> f64 {
        self.x0.min(self.x0 + self.h)
    }

    fn hi(&self) -> f64 {
        self.x0.max(self.x0 + self.h)
    }

    fn eval(&self, x: f64) -> State {
        let th = ((x - self.x0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let mut out = [ZERO; 2];
        for (i, o) in out.iter_mut().enumerate() {
            let r = &self.rcont;
            *o = r[0][i] + (r[1][i] + (r[2][i] + (r[3][i] + r[4][i] * th1) * th) * th1) * th;
        }
        out
    }
}

/// Renormalization event of a rescaled march.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleEvent {
    pub x: f64,
    /// Natural log of the factor divided out at `x`.
    pub log_factor: f64,
}

/// Dense output of a solved trajectory.
#[derive(Debug, Clone)]
pub struct SolutionFn {
    pub lambda: C64,
    pub anchor: f64,
    pub orientation: Orientation,
    steps: Vec<Step>,
    init: State,
    pub ledger: Vec<ScaleEvent>,
}

impl SolutionFn {
    pub fn lo(&self) -> f64 {
        self.steps.first().map_or(self.anchor, |s| s.lo())
    }

    pub fn hi(&self) -> f64 {
        self.steps.last().map_or(self.anchor, |s| s.hi())
    }

    /// Breakpoints of the dense output in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.steps.iter().map(|s| s.lo()).collect();
        xs.push(self.hi());
        xs
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Total natural-log growth recorded by renormalizations.
    pub fn ledger_log(&self) -> f64 {
        self.ledger.iter().map(|e| e.log_factor).sum()
    }

    /// Ledger growth in decades.
    pub fn ledger_decades(&self) -> f64 {
        self.ledger_log() / LN_10
    }

    /// Multiplies the function by a nonzero constant.
    pub fn scale(&mut self, factor: C64) {
        self.scale_log(factor, 0.0);
    }

    /// Multiplies the function by `factor * exp(log_shift)`, for factors
    /// outside the floating-point range.
    pub fn scale_log(&mut self, factor: C64, log_shift: f64) {
        let mag = factor.norm();
        let phase = factor / mag;
        let shift = mag.ln() + log_shift;
        let full = factor * log_shift.exp();
        for s in &mut self.steps {
            for r in &mut s.rcont {
                r[0] *= phase;
                r[1] *= phase;
            }
            s.log_scale += shift;
        }
        self.init = [self.init[0] * full, self.init[1] * full];
    }

    /// Joins a leftward and a rightward march started from the same anchor
    /// and state.
    pub fn join(left: SolutionFn, right: SolutionFn) -> SolutionFn {
        let mut steps = left.steps;
        steps.extend(right.steps);
        steps.sort_by(|a, b| a.lo().partial_cmp(&b.lo()).unwrap());
        let mut ledger = left.ledger;
        ledger.extend(right.ledger);
        SolutionFn {
            lambda: right.lambda,
            anchor: right.anchor,
            orientation: Orientation::TwoSided,
            steps,
            init: right.init,
            ledger,
        }
    }

    /// CSV with one row per breakpoint: `x, Re u, Im u, Re u1, Im u1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,re_u,im_u,re_u1,im_u1\n");
        for x in self.breakpoints() {
            if let Ok((u, u1)) = self.value(x) {
                let _ = writeln!(out, "{x:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", u.re, u.im, u1.re, u1.im);
            }
        }
        out
    }
}

impl QuasiFn for SolutionFn {
    fn eval(&self, x: f64) -> Result<QuasiValue, OdeError> {
        let (lo, hi) = (self.lo(), self.hi());
        let slack = 1e-13 * (hi - lo).abs().max(x.abs()).max(1e-300);
        if !(x >= lo - slack && x <= hi + slack) {
            return Err(OdeError::EvaluationOutsideSupport { x, lo, hi });
        }
        if self.steps.is_empty() {
            return Ok(QuasiValue::new(self.init[0], self.init[1]));
        }
        let i = self.steps.partition_point(|s| s.hi() < x).min(self.steps.len() - 1);
        let s = &self.steps[i];
        let y = s.eval(x);
        Ok(QuasiValue { u: y[0], u1: y[1], log_scale: s.log_scale })
    }

    fn exact_tau(&self, x: f64) -> Result<Option<C64>, OdeError> {
        let (u, _) = self.value(x)?;
        Ok(Some(self.lambda * u))
    }

    fn support(&self) -> (f64, f64) {
        (self.lo(), self.hi())
    }
}

/// Options for the marching integrator.
#[derive(Debug, Clone, Copy)]
pub struct MarchOpts {
    pub tol: f64,
    /// Divide the state out when `|u| + |u1|` exceeds this (never when `None`).
    pub renormalize_above: Option<f64>,
    pub max_steps: usize,
}

impl MarchOpts {
    pub fn plain(tol: f64) -> MarchOpts {
        MarchOpts { tol, renormalize_above: None, max_steps: 2_000_000 }
    }

    pub fn rescaled(tol: f64) -> MarchOpts {
        MarchOpts { tol, renormalize_above: Some(RENORMALIZE_ABOVE), max_steps: 2_000_000 }
    }
}

/// Threshold of `|u| + |u1|` that triggers renormalization.
pub const RENORMALIZE_ABOVE: f64 = 1e8;

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct System<'a> {
    spec: &'a ProblemSpec,
    lambda: C64,
}

impl System<'_> {
    fn rhs(&self, x: f64, y: &State) -> State {
        let p = self.spec.p(x);
        let v = C64::new(self.spec.q(x), 0.0) - self.lambda * self.spec.r(x);
        [y[1] / p, v * y[0]]
    }
}

fn finite(y: &State) -> bool {
    y.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

fn norm(y: &State) -> f64 {
    y[0].norm() + y[1].norm()
}

fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += k[0] * (c * h);
        out[1] += k[1] * (c * h);
    }
    out
}

fn march(
    sys: &System<'_>,
    x0: f64,
    y0: State,
    target: f64,
    opts: &MarchOpts,
) -> Result<(Vec<Step>, Vec<ScaleEvent>), OdeError> {
    let mut steps = Vec::new();
    let mut ledger = Vec::new();
    if target == x0 {
        return Ok((steps, ledger));
    }
    if !finite(&y0) {
        return Err(OdeError::NonFiniteState { x: x0 });
    }
    let dir = (target - x0).signum();
    let span = (target - x0).abs();
    let mut x = x0;
    let mut y = y0;
    let mut log_scale = 0.0;
    let mut k1 = sys.rhs(x, &y);
    let mut h = {
        let d0 = norm(&y);
        let d1 = if finite(&k1) { norm(&k1) } else { f64::INFINITY };
        let guess = if d0 < 1e-300 || d1 < 1e-300 { 1e-3 * span } else { 0.01 * d0 / d1 };
        dir * guess.min(span).min(0.1 * span.max(1e-300)).max(1e-12 * span)
    };
    let mut rejected_last = false;
    let tol = opts.tol;
    for _ in 0..opts.max_steps {
        if (x - target) * dir >= 0.0 {
            return Ok((steps, ledger));
        }
        if (x + h - target) * dir > 0.0 {
            h = target - x;
        }
        let tiny = 64.0 * f64::EPSILON * x.abs().max(span).max(1e-300);
        if h.abs() < tiny {
            return Err(OdeError::StepSizeUnderflow { x });
        }
        let k2 = sys.rhs(x + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = sys.rhs(x + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = sys.rhs(x + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = sys.rhs(x + C5 * h, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let ystage = axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h);
        let xnew = if (x + h - target) * dir >= 0.0 { target } else { x + h };
        let k6 = sys.rhs(x + h, &ystage);
        let ynew = axpy(&y, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], h);
        let k7 = sys.rhs(xnew, &ynew);
        let all = [&k2, &k3, &k4, &k5, &k6, &k7, &ynew];
        let err = if all.iter().all(|k| finite(k)) {
            let big = norm(&y).max(norm(&ynew));
            let mut acc = 0.0;
            for i in 0..2 {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
                let sc = tol * (y[i].norm().max(ynew[i].norm()) + 1e-3 * big) + 1e-300;
                acc += (e.norm() / sc).powi(2);
            }
            (acc / 2.0).sqrt()
        } else {
            f64::INFINITY
        };
        if err <= 1.0 {
            let ydiff = [ynew[0] - y[0], ynew[1] - y[1]];
            let mut rcont = [[ZERO; 2]; 5];
            for i in 0..2 {
                let bspl = k1[i] * h - ydiff[i];
                rcont[0][i] = y[i];
                rcont[1][i] = ydiff[i];
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff[i] - k7[i] * h - bspl;
                rcont[4][i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
            }
            steps.push(Step { x0: x, h: xnew - x, rcont, log_scale });
            x = xnew;
            y = ynew;
            k1 = k7;
            if let Some(limit) = opts.renormalize_above {
                let n = norm(&y);
                if n > limit {
                    y = [y[0] / n, y[1] / n];
                    k1 = [k1[0] / n, k1[1] / n];
                    log_scale += n.ln();
                    ledger.push(ScaleEvent { x, log_factor: n.ln() });
                }
            }
            if !finite(&y) {
                return Err(OdeError::NonFiniteState { x });
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let fac = if rejected_last { fac.min(1.0) } else { fac };
            h *= fac;
            rejected_last = false;
        } else {
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= fac;
            rejected_last = true;
        }
    }
    Err(OdeError::StepBudgetExhausted { x, steps: opts.max_steps })
}

fn check_range(spec: &ProblemSpec, from: f64, to: f64) -> Result<(), OdeError> {
    let (a, b) = (spec.interval.a, spec.interval.b);
    let inside = |x: f64| x.is_finite() && x >= a && x <= b;
    if inside(from) && inside(to) {
        Ok(())
    } else {
        Err(OdeError::InvalidRange { from, to, a, b })
    }
}

/// Solves `τu = λu` from `anchor` with `(u, u1) = init` up to `target`.
pub fn integrate_with(
    spec: &ProblemSpec,
    lambda: C64,
    anchor: f64,
    init: State,
    target: f64,
    opts: &MarchOpts,
) -> Result<SolutionFn, OdeError> {
    check_range(spec, anchor, target)?;
    let sys = System { spec, lambda };
    let (mut steps, ledger) = march(&sys, anchor, init, target, opts)?;
    let orientation = if target >= anchor { Orientation::FromLeftAnchor } else { Orientation::FromRightAnchor };
    if target < anchor {
        steps.reverse();
    }
    Ok(SolutionFn { lambda, anchor, orientation, steps, init, ledger })
}

/// Solves `τu = λu` with local error per step below `tol`.
pub fn integrate_tau(
    spec: &ProblemSpec,
    lambda: C64,
    anchor: f64,
    init: (C64, C64),
    target: f64,
    tol: f64,
) -> Result<SolutionFn, OdeError> {
    integrate_with(spec, lambda, anchor, [init.0, init.1], target, &MarchOpts::plain(tol))
}

/// Solution on `[lo, hi]` through `anchor`, optionally rescaled.
pub fn integrate_two_sided(
    spec: &ProblemSpec,
    lambda: C64,
    anchor: f64,
    init: State,
    lo: f64,
    hi: f64,
    opts: &MarchOpts,
) -> Result<SolutionFn, OdeError> {
    let left = integrate_with(spec, lambda, anchor, init, lo, opts)?;
    let right = integrate_with(spec, lambda, anchor, init, hi, opts)?;
    Ok(SolutionFn::join(left, right))
}

/// `τg` on a grid: exact when `g` provides it, otherwise fourth-order
/// central differences of `g^[1]` checked against a halved step.
pub fn tau_apply(spec: &ProblemSpec, g: &dyn QuasiFn, xs: &[f64], tol: f64) -> Result<Vec<C64>, OdeError> {
    xs.iter().map(|&x| tau_at(spec, g, x, tol)).collect()
}

pub fn tau_at(spec: &ProblemSpec, g: &dyn QuasiFn, x: f64, tol: f64) -> Result<C64, OdeError> {
    if let Some(v) = g.exact_tau(x)? {
        return Ok(v);
    }
    let (lo, hi) = g.support();
    let room = (x - lo).min(hi - x);
    let mut h = 1e-2 * room.min(1.0).max(1e-300);
    let d = |h: f64| -> Result<C64, OdeError> {
        let f = |t: f64| g.value(t).map(|v| v.1);
        Ok((-f(x + 2.0 * h)? + f(x + h)? * 8.0 - f(x - h)? * 8.0 + f(x - 2.0 * h)?) / (12.0 * h))
    };
    let mut best = (f64::INFINITY, ZERO);
    for _ in 0..6 {
        let coarse = d(h)?;
        let fine = d(0.5 * h)?;
        let refined = (fine * 16.0 - coarse) / 15.0;
        let discrepancy = (refined - fine).norm();
        if discrepancy < best.0 {
            best = (discrepancy, refined);
        }
        if discrepancy <= tol * (1.0 + refined.norm()) {
            break;
        }
        h *= 0.25;
    }
    let (discrepancy, d1) = best;
    if discrepancy > tol.sqrt() * (1.0 + d1.norm()) {
        return Err(OdeError::GridTooCoarse { x, discrepancy });
    }
    let (u, _) = g.value(x)?;
    Ok((-d1 + u * spec.q(x)) / spec.r(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::catalog;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    #[test]
    fn sine_from_midpoint() {
        let spec = catalog("regular_dirichlet_pi").unwrap();
        let s = integrate_tau(&spec, c(1.0), PI / 2.0, (c(1.0), c(0.0)), 0.0, 1e-12).unwrap();
        assert_eq!(s.orientation, Orientation::FromRightAnchor);
        for k in 0..=20 {
            let x = PI / 2.0 * k as f64 / 20.0;
            let (u, u1) = s.value(x).unwrap();
            assert_abs_diff_eq!(u.re, x.sin(), epsilon = 1e-10);
            assert_abs_diff_eq!(u1.re, x.cos(), epsilon = 1e-10);
        }
    }

    #[test]
    fn legendre_constant_and_logarithm() {
        let spec = catalog("legendre").unwrap();
        let one = integrate_tau(&spec, c(0.0), 0.0, (c(1.0), c(0.0)), 0.9, 1e-12).unwrap();
        let log = integrate_tau(&spec, c(0.0), 0.0, (c(0.0), c(1.0)), 0.9, 1e-12).unwrap();
        for k in 0..=30 {
            let x = 0.9 * k as f64 / 30.0;
            let (u, u1) = one.value(x).unwrap();
            assert_abs_diff_eq!(u.re, 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(u1.re, 0.0, epsilon = 1e-13);
            let (v, v1) = log.value(x).unwrap();
            assert_abs_diff_eq!(v.re, 0.5 * ((1.0 + x) / (1.0 - x)).ln(), epsilon = 1e-10);
            assert_abs_diff_eq!(v1.re, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(wronskian(&one, &log, x).unwrap().re, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn wronskian_is_constant_for_complex_energy() {
        let spec = catalog("bessel(2)").unwrap();
        let z = C64::new(3.0, 1.0);
        let f = integrate_tau(&spec, z, 0.5, (c(1.0), c(0.0)), 0.2, 1e-11).unwrap();
        let g = integrate_tau(&spec, z, 0.5, (c(0.0), c(1.0)), 0.2, 1e-11).unwrap();
        let w0 = wronskian(&f, &g, 0.5).unwrap();
        for k in 0..50 {
            let x = 0.5 - 0.3 * k as f64 / 49.0;
            let w = wronskian(&f, &g, x).unwrap();
            assert!((w - w0).norm() <= 100.0 * 1e-11 * (1.0 + w0.norm()), "{x}: {w} vs {w0}");
        }
    }

    #[test]
    fn dense_output_matches_breakpoints() {
        let spec = catalog("regular_dirichlet_pi").unwrap();
        let s = integrate_tau(&spec, c(4.0), 0.3, (c(0.0), c(1.0)), 3.0, 1e-10).unwrap();
        let xs = s.breakpoints();
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert_abs_diff_eq!(s.value(0.3).unwrap().0.re, 0.0);
        let exact = |x: f64| (2.0 * (x - 0.3)).sin() / 2.0;
        for x in xs {
            assert_abs_diff_eq!(s.value(x).unwrap().0.re, exact(x), epsilon = 1e-8);
        }
        assert!(matches!(s.eval(3.5), Err(OdeError::EvaluationOutsideSupport { .. })));
    }

    #[test]
    fn rescaled_growth_is_recorded() {
        let spec = catalog("free_halfline").unwrap();
        let s = integrate_with(&spec, c(-1.0), 1.0, [c(1.0), c(1.0)], 41.0, &MarchOpts::rescaled(1e-10)).unwrap();
        assert_abs_diff_eq!(s.ledger_decades(), 40.0 / LN_10, epsilon = 8.1);
        let (u, _) = s.value(41.0).unwrap();
        assert_abs_diff_eq!(u.ln().re, 40.0, epsilon = 1e-7);
        let v = s.eval(41.0).unwrap();
        assert!(v.u.norm() + v.u1.norm() <= 1e8 + 1.0);
    }

    #[test]
    fn zero_data_stays_zero() {
        let spec = catalog("free_halfline").unwrap();
        let s = integrate_with(&spec, c(-1.0), 1.0, [c(0.0), c(0.0)], 30.0, &MarchOpts::rescaled(1e-10)).unwrap();
        assert!(s.ledger.is_empty());
        assert_eq!(s.value(20.0).unwrap().0, c(0.0));
    }

    #[test]
    fn singular_coefficient_underflows() {
        let spec = crate::problem::ProblemSpec::from_strings(
            crate::problem::Interval { a: -1.0, b: 1.0 },
            "1",
            "1/x",
            "1",
            0.0,
        )
        .unwrap();
        let err = integrate_tau(&spec, c(0.0), -0.5, (c(1.0), c(0.0)), 0.5, 1e-10).unwrap_err();
        assert!(matches!(err, OdeError::StepSizeUnderflow { .. } | OdeError::NonFiniteState { .. }));
    }

    #[test]
    fn numerical_tau_matches_solution_energy() {
        let spec = catalog("legendre").unwrap();
        let s = integrate_tau(&spec, c(6.0), 0.0, (c(-0.5), c(0.0)), 0.8, 1e-12).unwrap();
        struct NoExact<'a>(&'a SolutionFn);
        impl QuasiFn for NoExact<'_> {
            fn eval(&self, x: f64) -> Result<QuasiValue, OdeError> {
                self.0.eval(x)
            }
            fn support(&self) -> (f64, f64) {
                self.0.support()
            }
        }
        let xs = [0.2, 0.4, 0.6];
        let t = tau_apply(&spec, &NoExact(&s), &xs, 1e-8).unwrap();
        for (x, v) in xs.iter().zip(t) {
            let p2 = (3.0 * x * x - 1.0) / 2.0;
            assert_abs_diff_eq!(v.re, 6.0 * p2, epsilon = 1e-5);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let spec = catalog("regular_dirichlet_pi").unwrap();
        let s = integrate_tau(&spec, c(1.0), 0.0, (c(0.0), c(1.0)), 1.0, 1e-8).unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with("x,re_u,im_u,re_u1,im_u1\n"));
        assert_eq!(csv.lines().count(), s.step_count() + 2);
    }
}
