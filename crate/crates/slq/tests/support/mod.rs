//! Problems and test-function families shared by the integration tests and
//! the acceptance harness.
#![allow(dead_code)]

use std::sync::Arc;

use num_complex::Complex64 as C64;
use slq::bvalues::{patched_pair, Patched, PatchedPair};
use slq::expr::Expr;
use slq::odecore::QuasiFn;
use slq::problem::{catalog, End, Interval, ProblemSpec};
use slq::solutions::{BasisOpts, BasisPair};
use slq::testfns::Analytic;

pub type Func = Arc<dyn QuasiFn>;

pub struct Setup {
    pub name: &'static str,
    pub spec: ProblemSpec,
    pub pair: BasisPair,
    pub patched: PatchedPair,
}

pub fn oscillator() -> ProblemSpec {
    ProblemSpec::from_strings(Interval::new(f64::NEG_INFINITY, f64::INFINITY).unwrap(), "1", "x^2", "1", 0.0).unwrap()
}

pub fn setup(name: &'static str) -> Setup {
    let spec = if name == "oscillator" { oscillator() } else { catalog(name).unwrap() };
    let pair = BasisPair::new(&spec, &BasisOpts::default()).unwrap();
    let lc = |end: End| pair.is_limit_circle(end).then(|| pair.at(end));
    let patched = patched_pair(&spec, lc(End::A), lc(End::B)).unwrap();
    Setup { name, spec, pair, patched }
}

fn expr(spec: &ProblemSpec, src: &str) -> Func {
    Arc::new(Analytic::new(spec, Expr::parse(src).unwrap()))
}

fn bump(spec: &ProblemSpec, c: f64, w: f64) -> Func {
    Arc::new(Analytic::bump(spec, c, w))
}

/// Members of the maximal domain: closed forms suited to the problem,
/// compact bumps, the patched pair and the basis solutions themselves.
pub fn family(s: &Setup) -> Vec<(String, Func)> {
    let spec = &s.spec;
    let mut out: Vec<(String, Func)> = Vec::new();
    let closed: &[&str] = match s.name {
        "legendre" => &["1", "x", "0.3 - x + 2*x^2", "x^3 - 0.5*x"],
        "regular_dirichlet_pi" => &["sin(x)", "1 + x", "x^2 - 3*x", "cos(2*x)"],
        "free_halfline" => &["exp(-x)", "x*exp(-x)", "(1 + x)*exp(-2*x)", "exp(-x^2)", "cos(x)*exp(-x)"],
        "oscillator" => &["exp(-x^2/2)", "x*exp(-x^2/2)", "(2*x^2 - 1)*exp(-x^2/2)", "(2*x^3 - 3*x)*exp(-x^2/2)"],
        "bessel(2)" => &["x^3", "x^3*(1 - x)", "x^4"],
        _ => &["x", "x^2"],
    };
    for src in closed {
        out.push(((*src).to_string(), expr(spec, src)));
    }
    let (lo, hi) = s.pair.support();
    let (lo, hi) = (lo.max(-5.0), hi.min(5.0));
    let mid = 0.5 * (lo + hi);
    let w = 0.25 * (hi - lo);
    out.push((format!("bump({mid:.3},{w:.3})"), bump(spec, mid, w)));
    out.push((format!("bump({:.3},{:.3})", mid + 0.3 * w, 0.5 * w), bump(spec, mid + 0.3 * w, 0.5 * w)));
    if s.pair.regime() != slq::solutions::Regime::LpLp {
        out.push(("v1".into(), Arc::new(s.patched.v1.clone())));
        out.push(("v2".into(), Arc::new(s.patched.v2.clone())));
    }
    // solutions at λ₀ lie in the maximal domain only when no end is limit point
    for end in [End::A, End::B] {
        if s.pair.regime() == slq::solutions::Regime::LcLc {
            let b = s.pair.at(end);
            out.push((format!("u_{end}"), b.u.clone()));
            out.push((format!("uhat_{end}"), b.u_hat.clone()));
        }
    }
    out
}

/// Functions with exactly known boundary values `Λf = (f̃(a), f̃(b))` at
/// the limit-circle ends: single-ended patched pieces and bumps.
pub fn pieces(s: &Setup) -> Vec<(String, Func, Vec<C64>)> {
    let spec = &s.spec;
    let ends: Vec<End> = [End::A, End::B].into_iter().filter(|&e| s.pair.is_limit_circle(e)).collect();
    let unit = |k: usize| -> Vec<C64> { (0..ends.len()).map(|j| C64::new(if j == k { 1.0 } else { 0.0 }, 0.0)).collect() };
    let zero: Vec<C64> = vec![C64::new(0.0, 0.0); ends.len()];
    let window = s.patched.window;
    let mut out: Vec<(String, Func, Vec<C64>)> = Vec::new();
    for (k, &end) in ends.iter().enumerate() {
        let b = s.pair.at(end);
        let one = |f: Func| -> Func {
            Arc::new(match end {
                End::A => Patched::new(spec, Some(f), None, window),
                End::B => Patched::new(spec, None, Some(f), window),
            })
        };
        out.push((format!("hat_{end}"), one(b.u_hat.clone()), unit(k)));
        out.push((format!("prin_{end}"), one(b.u.clone()), zero.clone()));
    }
    let (lo, hi) = s.pair.support();
    let (lo, hi) = (lo.max(-5.0), hi.min(5.0));
    let mid = 0.5 * (lo + hi);
    let w = 0.2 * (hi - lo);
    out.push(("bump_mid".into(), bump(spec, mid, w), zero.clone()));
    out.push(("bump_off".into(), bump(spec, mid - 0.4 * w, 0.6 * w), zero.clone()));
    if s.name == "free_halfline" {
        // decays at the limit-point end and vanishes at 0
        out.push(("x exp(-x)".into(), expr(spec, "x*exp(-x)"), zero));
    }
    out
}

/// Deterministic selection of `count` index pairs `(i, j)` out of `n`.
pub fn index_pairs(n: usize, count: usize) -> Vec<(usize, usize)> {
    let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    if all.len() <= count {
        return all;
    }
    (0..count).map(|k| all[k * all.len() / count]).collect()
}

/// `Σ c_k f_k` as a single function.
pub fn combine(terms: Vec<(C64, Func)>) -> Func {
    Arc::new(slq::testfns::Combination::new(terms))
}
