//! Members of the maximal domain assembled from closed-form expressions,
//! compactly supported bumps and linear combinations, with exact `τ`.

use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ParseError};
use crate::odecore::{OdeError, QuasiFn, QuasiValue};
use crate::problem::{End, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FnSpecError {
    #[error("unrecognized function specifier '{0}'")]
    Unrecognized(String),
    #[error("bad numeric argument in '{0}'")]
    BadNumber(String),
    #[error("bump width must be positive, got {0}")]
    BadWidth(f64),
    #[error("expression: {0}")]
    Expression(#[from] ParseError),
}

/// Smooth function given by an expression, optionally restricted to a
/// compact support outside of which it vanishes identically.
#[derive(Debug, Clone)]
pub struct Analytic {
    g: Expr,
    dg: Expr,
    d2g: Expr,
    p: Expr,
    dp: Expr,
    q: Expr,
    r: Expr,
    compact: Option<(f64, f64)>,
    domain: (f64, f64),
}

impl Analytic {
    pub fn new(spec: &ProblemSpec, g: Expr) -> Analytic {
        Analytic::with_support(spec, g, None)
    }

    pub fn with_support(spec: &ProblemSpec, g: Expr, compact: Option<(f64, f64)>) -> Analytic {
        let dg = g.derivative();
        let d2g = dg.derivative();
        Analytic {
            g,
            dg,
            d2g,
            p: spec.coeffs.p.expr.clone(),
            dp: spec.coeffs.p.derivative.clone(),
            q: spec.coeffs.q.expr.clone(),
            r: spec.coeffs.r.expr.clone(),
            compact,
            domain: (spec.interval.a, spec.interval.b),
        }
    }

    /// `exp(-1/(1 - s^2))` with `s = (x - center)/width`, zero for `|s| >= 1`.
    pub fn bump(spec: &ProblemSpec, center: f64, width: f64) -> Analytic {
        let src = format!("exp(-1/(1 - ((x - {center:?})/{width:?})^2))");
        let g = Expr::parse(&src).expect("well-formed bump expression");
        Analytic::with_support(spec, g, Some((center - width, center + width)))
    }

    pub fn polynomial(spec: &ProblemSpec, coeffs: &[f64]) -> Analytic {
        let terms: Vec<String> = coeffs.iter().enumerate().map(|(k, c)| format!("({c:?})*x^{k}")).collect();
        let src = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
        Analytic::new(spec, Expr::parse(&src).expect("well-formed polynomial"))
    }

    pub fn expression(&self) -> &Expr {
        &self.g
    }

    fn vanishes_at(&self, x: f64) -> bool {
        match self.compact {
            Some((lo, hi)) => {
                let half = 0.5 * (hi - lo);
                let s = (x - 0.5 * (lo + hi)) / half;
                // exp(-1/(1-s^2)) underflows well before |s| = 1
                1.0 - s * s < 1.0 / 700.0
            }
            None => false,
        }
    }
}

impl QuasiFn for Analytic {
    fn eval(&self, x: f64) -> Result<QuasiValue, OdeError> {
        if self.vanishes_at(x) {
            return Ok(QuasiValue::real(0.0, 0.0));
        }
        let u = self.g.eval(x);
        let u1 = self.p.eval(x) * self.dg.eval(x);
        Ok(QuasiValue::real(u, u1))
    }

    fn exact_tau(&self, x: f64) -> Result<Option<C64>, OdeError> {
        if self.vanishes_at(x) {
            return Ok(Some(C64::new(0.0, 0.0)));
        }
        let d1 = self.dp.eval(x) * self.dg.eval(x) + self.p.eval(x) * self.d2g.eval(x);
        let v = (-d1 + self.q.eval(x) * self.g.eval(x)) / self.r.eval(x);
        Ok(Some(C64::new(v, 0.0)))
    }

    fn support(&self) -> (f64, f64) {
        self.domain
    }
}

/// `Σ c_i f_i`.
#[derive(Clone)]
pub struct Combination {
    pub terms: Vec<(C64, Arc<dyn QuasiFn>)>,
}

impl Combination {
    pub fn new(terms: Vec<(C64, Arc<dyn QuasiFn>)>) -> Combination {
        Combination { terms }
    }
}

impl QuasiFn for Combination {
    fn eval(&self, x: f64) -> Result<QuasiValue, OdeError> {
        let mut u = C64::new(0.0, 0.0);
        let mut u1 = C64::new(0.0, 0.0);
        for (c, f) in &self.terms {
            let (a, b) = f.value(x)?;
            u += c * a;
            u1 += c * b;
        }
        Ok(QuasiValue::new(u, u1))
    }

    fn exact_tau(&self, x: f64) -> Result<Option<C64>, OdeError> {
        let mut acc = C64::new(0.0, 0.0);
        for (c, f) in &self.terms {
            match f.exact_tau(x)? {
                Some(v) => acc += c * v,
                None => return Ok(None),
            }
        }
        Ok(Some(acc))
    }

    fn support(&self) -> (f64, f64) {
        self.terms.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), (_, f)| {
            let (a, b) = f.support();
            (lo.max(a), hi.min(b))
        })
    }
}

/// Which member of a solution basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisMember {
    Principal,
    Nonprincipal,
}

/// Named test functions for the command line:
/// `sin`, `poly:c0,c1,...`, `bump:center,width` (or `bump(center,width)`),
/// `expr:<expression>`, `v1`, `v2`, `u_a`, `uhat_a`, `u_b`, `uhat_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FnSpec {
    Sin,
    Poly(Vec<f64>),
    Bump { center: f64, width: f64 },
    Expr(String),
    V1,
    V2,
    Basis { member: BasisMember, end: End },
}

fn numbers(text: &str, whole: &str) -> Result<Vec<f64>, FnSpecError> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| FnSpecError::BadNumber(whole.to_string())))
        .collect()
}

impl FromStr for FnSpec {
    type Err = FnSpecError;

    fn from_str(s: &str) -> Result<FnSpec, FnSpecError> {
        let t = s.trim();
        let bump = |args: &str| -> Result<FnSpec, FnSpecError> {
            let v = numbers(args, t)?;
            match v.as_slice() {
                [center, width] if *width > 0.0 => Ok(FnSpec::Bump { center: *center, width: *width }),
                [_, width] => Err(FnSpecError::BadWidth(*width)),
                _ => Err(FnSpecError::BadNumber(t.to_string())),
            }
        };
        Ok(match t {
            "sin" => FnSpec::Sin,
            "v1" => FnSpec::V1,
            "v2" => FnSpec::V2,
            "u_a" => FnSpec::Basis { member: BasisMember::Principal, end: End::A },
            "uhat_a" => FnSpec::Basis { member: BasisMember::Nonprincipal, end: End::A },
            "u_b" => FnSpec::Basis { member: BasisMember::Principal, end: End::B },
            "uhat_b" => FnSpec::Basis { member: BasisMember::Nonprincipal, end: End::B },
            _ => {
                if let Some(rest) = t.strip_prefix("poly:") {
                    FnSpec::Poly(numbers(rest, t)?)
                } else if let Some(rest) = t.strip_prefix("bump:") {
                    bump(rest)?
                } else if let Some(rest) = t.strip_prefix("bump(").and_then(|r| r.strip_suffix(')')) {
                    bump(rest)?
                } else if let Some(rest) = t.strip_prefix("expr:") {
                    Expr::parse(rest)?;
                    FnSpec::Expr(rest.to_string())
                } else {
                    return Err(FnSpecError::Unrecognized(t.to_string()));
                }
            }
        })
    }
}

impl FnSpec {
    /// Builds the function when it needs no solution basis.
    pub fn analytic(&self, spec: &ProblemSpec) -> Option<Analytic> {
        match self {
            FnSpec::Sin => Some(Analytic::new(spec, Expr::parse("sin(x)").unwrap())),
            FnSpec::Poly(c) => Some(Analytic::polynomial(spec, c)),
            FnSpec::Bump { center, width } => Some(Analytic::bump(spec, *center, *width)),
            FnSpec::Expr(src) => Expr::parse(src).ok().map(|e| Analytic::new(spec, e)),
            _ => None,
        }
    }
}
