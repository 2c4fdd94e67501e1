//! Limit-point/limit-circle classification of endpoints, zero counting and
//! nonoscillation certificates for a reference energy.

use std::ops::ControlFlow;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::odecore::{integrate_with, MarchOpts, OdeError, QuasiFn, SolutionFn, State};
use crate::problem::{End, ProblemSpec};
use crate::quad::{self, Integrability, DIVERGENCE_THRESHOLD};

/// Number of geometric windows toward an endpoint.
pub const CLASSIFY_WINDOWS: usize = 40;
/// Windows whose zero counts decide nonoscillation.
pub const NONOSC_WINDOWS: usize = 24;
/// Trailing zero-free windows that certify nonoscillation.
pub const NONOSC_CLEAN_RUN: usize = 20;
/// Trailing windows with zeros that refute nonoscillation.
pub const NONOSC_ZERO_RUN: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("classification of endpoint {endpoint} inconclusive at probe {probe}")]
    Inconclusive { endpoint: End, probe: C64 },
    #[error("two zeros closer than the resolvable spacing near x = {x}")]
    ResolutionExceeded { x: f64 },
    #[error("window ({0}, {1}) is not strictly inside the interval")]
    WindowOutside(f64, f64),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    LimitCircle,
    LimitPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub from: f64,
    pub to: f64,
    pub contribution: f64,
}

/// Square-integrability evidence for one solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionEvidence {
    /// Initial `(u, u1)` at the anchor.
    pub init: (f64, f64),
    pub verdict: Integrability,
    pub total: f64,
    pub tail_estimate: f64,
    pub windows: Vec<WindowRow>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointClassification {
    pub endpoint: End,
    /// `None` when the evidence is inconclusive.
    pub kind: Option<EndpointKind>,
    pub probe: C64,
    pub anchor: f64,
    pub evidence: Vec<SolutionEvidence>,
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyOpts {
    pub tol: f64,
    pub windows: usize,
    pub anchor: Option<f64>,
    pub ode_tol: f64,
}

impl Default for ClassifyOpts {
    fn default() -> Self {
        ClassifyOpts { tol: 1e-6, windows: CLASSIFY_WINDOWS, anchor: None, ode_tol: 1e-10 }
    }
}

/// Default probe energy.
pub const DEFAULT_PROBE: C64 = C64 { re: 0.0, im: 1.0 };

/// Window edges from `anchor` toward the endpoint: halving distances for a
/// finite endpoint, doubling lengths for an infinite one.
pub fn window_edges(endpoint: f64, anchor: f64, count: usize) -> Vec<f64> {
    (0..=count)
        .map(|k| {
            if endpoint.is_finite() {
                endpoint - (endpoint - anchor) * 0.5f64.powi(k as i32)
            } else {
                anchor + endpoint.signum() * (2f64.powi(k as i32) - 1.0)
            }
        })
        .collect()
}

/// Marches a solution window by window, handing each piece to `visit`
/// together with the accumulated natural-log scale of the piece.
pub fn march_windows<F>(
    spec: &ProblemSpec,
    lambda: C64,
    init: State,
    edges: &[f64],
    ode_tol: f64,
    mut visit: F,
) -> Result<(), OdeError>
where
    F: FnMut(usize, &SolutionFn, f64) -> ControlFlow<()>,
{
    let mut state = init;
    let mut offset = 0.0;
    let opts = MarchOpts { max_steps: 200_000, ..MarchOpts::rescaled(ode_tol) };
    for (k, w) in edges.windows(2).enumerate() {
        let piece = integrate_with(spec, lambda, w[0], state, w[1], &opts)?;
        if visit(k, &piece, offset).is_break() {
            break;
        }
        let end = piece.eval(w[1])?;
        let n = end.u.norm() + end.u1.norm();
        if n == 0.0 {
            state = [end.u, end.u1];
        } else {
            state = [end.u / n, end.u1 / n];
            offset += end.log_scale + n.ln();
        }
    }
    Ok(())
}

fn window_mass(spec: &ProblemSpec, piece: &SolutionFn, from: f64, to: f64, offset: f64) -> f64 {
    let f = |x: f64| -> C64 {
        match piece.eval(x) {
            Ok(v) => {
                let s = (2.0 * (v.log_scale + offset)).exp();
                C64::new(spec.r(x) * v.u.norm_sqr() * s, 0.0)
            }
            Err(_) => C64::new(f64::NAN, 0.0),
        }
    };
    let (lo, hi) = if from < to { (from, to) } else { (to, from) };
    match quad::adaptive(&f, lo, hi, 0.0, 1e-10, 200) {
        Ok(r) => r.value.re,
        Err(_) => f64::INFINITY,
    }
}

fn evidence_for(
    spec: &ProblemSpec,
    z: C64,
    init: (f64, f64),
    edges: &[f64],
    opts: &ClassifyOpts,
) -> SolutionEvidence {
    let mut rows: Vec<WindowRow> = Vec::new();
    let mut total = 0.0;
    let mut verdict = Integrability::Undetermined;
    let mut tail_estimate = f64::INFINITY;
    let state = [C64::new(init.0, 0.0), C64::new(init.1, 0.0)];
    let run = march_windows(spec, z, state, edges, opts.ode_tol, |k, piece, offset| {
        let c = window_mass(spec, piece, edges[k], edges[k + 1], offset);
        rows.push(WindowRow { from: edges[k], to: edges[k + 1], contribution: c });
        total += c;
        if !(total <= DIVERGENCE_THRESHOLD) {
            verdict = Integrability::Divergent;
            return ControlFlow::Break(());
        }
        let n = rows.len();
        if n >= 8 {
            let r1 = rows[n - 1].contribution / rows[n - 2].contribution;
            let r2 = rows[n - 2].contribution / rows[n - 3].contribution;
            let rho = r1.max(r2);
            if rho < 0.95 {
                tail_estimate = rows[n - 1].contribution * rho / (1.0 - rho);
                if tail_estimate <= opts.tol * total {
                    verdict = Integrability::Convergent;
                    return ControlFlow::Break(());
                }
            } else if total == 0.0 {
                verdict = Integrability::Convergent;
                tail_estimate = 0.0;
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    });
    let mut note = None;
    if let Err(e) = run {
        note = Some(e.to_string());
    } else if verdict == Integrability::Undetermined && rows.len() >= 10 {
        let last: Vec<f64> = rows[rows.len() - 10..].iter().map(|r| r.contribution).collect();
        let growing = last.windows(2).filter(|w| w[1] >= w[0]).count();
        if growing >= 5 {
            verdict = Integrability::Divergent;
        }
    }
    SolutionEvidence { init, verdict, total, tail_estimate, windows: rows, note }
}

/// Classification evidence; `kind` is `None` when neither alternative could
/// be certified.
pub fn classify_evidence(spec: &ProblemSpec, endpoint: End, probe: C64, opts: &ClassifyOpts) -> EndpointClassification {
    let anchor = opts.anchor.unwrap_or_else(|| spec.reference_point());
    let edges = window_edges(spec.endpoint(endpoint), anchor, opts.windows);
    let (e1, e2) = rayon::join(
        || evidence_for(spec, probe, (1.0, 0.0), &edges, opts),
        || evidence_for(spec, probe, (0.0, 1.0), &edges, opts),
    );
    let verdicts = [e1.verdict, e2.verdict];
    let kind = if verdicts.contains(&Integrability::Divergent) {
        Some(EndpointKind::LimitPoint)
    } else if verdicts.iter().all(|v| *v == Integrability::Convergent) {
        Some(EndpointKind::LimitCircle)
    } else {
        None
    };
    EndpointClassification { endpoint, kind, probe, anchor, evidence: vec![e1, e2] }
}

/// Weyl alternative at an endpoint: limit circle when both test solutions
/// are square-integrable (weight `r`) near it.
pub fn classify_endpoint(
    spec: &ProblemSpec,
    endpoint: End,
    probe: C64,
    opts: &ClassifyOpts,
) -> Result<EndpointClassification, ClassifyError> {
    let c = classify_evidence(spec, endpoint, probe, opts);
    match c.kind {
        Some(_) => Ok(c),
        None => Err(ClassifyError::Inconclusive { endpoint, probe }),
    }
}

/// Zeros of `u` in the dense output on `(from, to]`, located by bisection.
fn zeros_of(sol: &SolutionFn, from: f64, to: f64, offset_sign: f64) -> Result<Vec<f64>, OdeError> {
    let (lo, hi) = if from < to { (from, to) } else { (to, from) };
    let mut xs = sol.breakpoints();
    xs.retain(|&x| x >= lo && x <= hi);
    if xs.first() != Some(&lo) {
        xs.insert(0, lo);
    }
    if xs.last() != Some(&hi) {
        xs.push(hi);
    }
    let mut grid = Vec::with_capacity(xs.len() * 8);
    for w in xs.windows(2) {
        for j in 0..8 {
            grid.push(w[0] + (w[1] - w[0]) * j as f64 / 8.0);
        }
    }
    grid.push(hi);
    if from > to {
        grid.reverse();
    }
    let sign_at = |x: f64| -> Result<f64, OdeError> { Ok((sol.eval(x)?.u.re * offset_sign).signum_or_zero()) };
    let mut zeros = Vec::new();
    let mut prev_x = grid[0];
    let mut prev_s = sign_at(prev_x)?;
    for &x in &grid[1..] {
        let s = sign_at(x)?;
        if s != 0.0 && prev_s != 0.0 && s != prev_s {
            let (mut l, mut r) = (prev_x, x);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                if mid == l || mid == r || (r - l).abs() <= 1e-12 * mid.abs().max(1e-300) {
                    break;
                }
                if sign_at(mid)? == prev_s {
                    l = mid;
                } else {
                    r = mid;
                }
            }
            zeros.push(0.5 * (l + r));
        }
        if s != 0.0 {
            prev_s = s;
        }
        prev_x = x;
    }
    Ok(zeros)
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// Number of sign changes on `(x1, x2]` of the real solution with
/// `(u, u1) = init` at `x1` (default `(0, 1)`).
/// Sign changes of `Re u` between `from` and `to`, ordered from `from`.
pub fn zeros_in(sol: &SolutionFn, from: f64, to: f64) -> Result<Vec<f64>, OdeError> {
    zeros_of(sol, from, to, 1.0)
}

pub fn count_zeros(
    spec: &ProblemSpec,
    lambda: f64,
    window: (f64, f64),
    init: Option<(f64, f64)>,
) -> Result<usize, ClassifyError> {
    let (x1, x2) = window;
    if !(spec.interval.contains(x1) && spec.interval.contains(x2) && x1 < x2) {
        return Err(ClassifyError::WindowOutside(x1, x2));
    }
    let (u0, v0) = init.unwrap_or((0.0, 1.0));
    let sol = integrate_with(
        spec,
        C64::new(lambda, 0.0),
        x1,
        [C64::new(u0, 0.0), C64::new(v0, 0.0)],
        x2,
        &MarchOpts::rescaled(1e-11),
    )?;
    let zeros = zeros_of(&sol, x1, x2, 1.0)?;
    let resolution = 1e-9 * (x2 - x1);
    for w in zeros.windows(2) {
        if (w[1] - w[0]).abs() < resolution {
            return Err(ClassifyError::ResolutionExceeded { x: w[0] });
        }
    }
    Ok(zeros.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonoscillation {
    Certified,
    Refuted,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonoscillationEvidence {
    pub endpoint: End,
    pub verdict: Nonoscillation,
    /// Sign changes per geometric window, nearest the anchor first.
    pub zero_counts: Vec<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonoscillationReport {
    pub lambda: f64,
    pub a: NonoscillationEvidence,
    pub b: NonoscillationEvidence,
}

impl NonoscillationReport {
    pub fn at(&self, end: End) -> &NonoscillationEvidence {
        match end {
            End::A => &self.a,
            End::B => &self.b,
        }
    }
}

fn nonosc_edges(spec: &ProblemSpec, end: End) -> Vec<f64> {
    let e = spec.endpoint(end);
    let m = spec.reference_point();
    (0..=NONOSC_WINDOWS)
        .map(|k| {
            if e.is_finite() {
                e - (e - m) * 0.5f64.powi(k as i32)
            } else {
                m + e.signum() * 0.3 * (1.3f64.powi(k as i32) - 1.0)
            }
        })
        .collect()
}

/// Nonoscillation at one endpoint from zero counts of a real solution over
/// geometric windows.
pub fn nonoscillation_at(spec: &ProblemSpec, lambda: f64, end: End) -> NonoscillationEvidence {
    let edges = nonosc_edges(spec, end);
    let mut counts: Vec<usize> = Vec::new();
    let mut failure: Option<String> = None;
    let init = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let run = march_windows(spec, C64::new(lambda, 0.0), init, &edges, 1e-9, |k, piece, _| {
        match zeros_of(piece, edges[k], edges[k + 1], 1.0) {
            Ok(z) => counts.push(z.len()),
            Err(e) => {
                failure = Some(e.to_string());
                return ControlFlow::Break(());
            }
        }
        let n = counts.len();
        if n >= NONOSC_ZERO_RUN && counts[n - NONOSC_ZERO_RUN..].iter().all(|&c| c > 0) {
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    if let Err(e) = run {
        failure = Some(e.to_string());
    }
    let n = counts.len();
    let verdict = if n >= NONOSC_ZERO_RUN && counts[n - NONOSC_ZERO_RUN..].iter().all(|&c| c > 0) {
        Nonoscillation::Refuted
    } else if n >= NONOSC_CLEAN_RUN && counts[n - NONOSC_CLEAN_RUN..].iter().all(|&c| c == 0) {
        Nonoscillation::Certified
    } else {
        Nonoscillation::Inconclusive
    };
    NonoscillationEvidence { endpoint: end, verdict, zero_counts: counts, note: failure }
}

/// Nonoscillation verdicts at both endpoints.
pub fn certify_nonoscillatory(spec: &ProblemSpec, lambda: f64) -> NonoscillationReport {
    let (a, b) = rayon::join(|| nonoscillation_at(spec, lambda, End::A), || nonoscillation_at(spec, lambda, End::B));
    NonoscillationReport { lambda, a, b }
}
