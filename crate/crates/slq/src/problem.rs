//! Sturm–Liouville problems: interval, coefficients `p, q, r`, reference
//! energy, validation and the catalog of model problems.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::expr::{Expr, ParseError};
use crate::extensions::ExtensionSpec;
use crate::quad::{self, Integrability};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("unknown catalog entry '{0}'")]
    UnknownCatalogEntry(String),
    #[error("coefficient {coefficient} = {value:e} is not positive at x = {x}")]
    NonPositiveCoefficient { coefficient: char, x: f64, value: f64 },
    #[error("coefficient {coefficient} is not finite at x = {x}")]
    NonFiniteValue { coefficient: char, x: f64 },
    #[error("invalid interval: a = {a}, b = {b}")]
    InvalidInterval { a: f64, b: f64 },
    #[error("cannot parse coefficient {coefficient}: {source}")]
    Expression { coefficient: char, source: ParseError },
    #[error("problem file: {0}")]
    Document(String),
}

/// Endpoint label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum End {
    A,
    B,
}

impl End {
    pub fn other(self) -> End {
        match self {
            End::A => End::B,
            End::B => End::A,
        }
    }

    /// `-1` at `a` (interior lies to the right), `+1` at `b`.
    pub fn outward(self) -> f64 {
        match self {
            End::A => -1.0,
            End::B => 1.0,
        }
    }
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            End::A => "a",
            End::B => "b",
        })
    }
}

fn ser_extended<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

fn de_extended<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) => match t.trim() {
            "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            other => Err(serde::de::Error::custom(format!("expected a number, \"inf\" or \"-inf\", got \"{other}\""))),
        },
    }
}

/// Open interval `(a, b)` with `-inf <= a < b <= inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    #[serde(serialize_with = "ser_extended", deserialize_with = "de_extended")]
    pub a: f64,
    #[serde(serialize_with = "ser_extended", deserialize_with = "de_extended")]
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Interval, ProblemError> {
        if a.is_nan() || b.is_nan() || a >= b || a == f64::INFINITY || b == f64::NEG_INFINITY {
            return Err(ProblemError::InvalidInterval { a, b });
        }
        Ok(Interval { a, b })
    }

    pub fn endpoint(&self, end: End) -> f64 {
        match end {
            End::A => self.a,
            End::B => self.b,
        }
    }

    /// Interior reference point: the midpoint of a finite interval, one unit
    /// inside a finite endpoint of a half-line, the origin on the real line.
    pub fn reference_point(&self) -> f64 {
        match (self.a.is_finite(), self.b.is_finite()) {
            (true, true) => 0.5 * (self.a + self.b),
            (true, false) => self.a + 1.0,
            (false, true) => self.b - 1.0,
            (false, false) => 0.0,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.a && x < self.b
    }
}

/// A coefficient function given by an expression tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub expr: Expr,
    pub derivative: Expr,
}

impl Coefficient {
    pub fn new(expr: Expr) -> Coefficient {
        let derivative = expr.derivative();
        Coefficient { expr, derivative }
    }

    pub fn parse(name: char, src: &str) -> Result<Coefficient, ProblemError> {
        Expr::parse(src)
            .map(Coefficient::new)
            .map_err(|source| ProblemError::Expression { coefficient: name, source })
    }

    pub fn constant(v: f64) -> Coefficient {
        Coefficient::new(Expr::constant(v))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.expr.eval(x)
    }
}

impl Serialize for Coefficient {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.expr.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSet {
    pub p: Coefficient,
    pub q: Coefficient,
    pub r: Coefficient,
}

/// Whether the problem is regular on `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularFlag {
    Regular,
    Singular,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub name: Option<String>,
    pub interval: Interval,
    pub coeffs: CoefficientSet,
    pub lambda0: f64,
    pub regular: RegularFlag,
}

impl ProblemSpec {
    pub fn from_strings(interval: Interval, p: &str, q: &str, r: &str, lambda0: f64) -> Result<ProblemSpec, ProblemError> {
        Ok(ProblemSpec {
            name: None,
            interval,
            coeffs: CoefficientSet {
                p: Coefficient::parse('p', p)?,
                q: Coefficient::parse('q', q)?,
                r: Coefficient::parse('r', r)?,
            },
            lambda0,
            regular: RegularFlag::Undetermined,
        })
    }

    pub fn p(&self, x: f64) -> f64 {
        self.coeffs.p.eval(x)
    }

    pub fn dp(&self, x: f64) -> f64 {
        self.coeffs.p.derivative.eval(x)
    }

    pub fn q(&self, x: f64) -> f64 {
        self.coeffs.q.eval(x)
    }

    pub fn r(&self, x: f64) -> f64 {
        self.coeffs.r.eval(x)
    }

    pub fn endpoint(&self, end: End) -> f64 {
        self.interval.endpoint(end)
    }

    pub fn reference_point(&self) -> f64 {
        self.interval.reference_point()
    }

    /// Characteristic length used to scale distances to an endpoint.
    pub fn length_scale(&self) -> f64 {
        let Interval { a, b } = self.interval;
        if a.is_finite() && b.is_finite() {
            b - a
        } else {
            1.0
        }
    }

    /// Smallest distance to a finite endpoint at which functions are
    /// evaluated directly.
    pub fn endpoint_cutoff(&self, end: End) -> f64 {
        1e-8 * (self.endpoint(end) - self.reference_point()).abs()
    }

    /// Validated copy with the regularity flag set.
    pub fn validated(&self, n_samples: usize) -> Result<(ProblemSpec, ValidationReport), ProblemError> {
        let report = validate(self, n_samples)?;
        let mut spec = self.clone();
        spec.regular = report.regular;
        Ok((spec, report))
    }
}

/// Per-coefficient sample statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientVerdict {
    pub coefficient: char,
    pub min: f64,
    pub max: f64,
    pub finite: bool,
    /// `None` for `q`, which carries no sign condition.
    pub positive: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointRegularity {
    pub end: End,
    pub finite: bool,
    pub inv_p: Integrability,
    pub q: Integrability,
    pub r: Integrability,
    pub regular: RegularFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub coefficients: Vec<CoefficientVerdict>,
    pub endpoints: Vec<EndpointRegularity>,
    pub regular: RegularFlag,
}

/// Interior sample grid, log-uniformly clustered toward each endpoint.
pub fn sample_points(interval: &Interval, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let m = interval.reference_point();
    let per_side = n.div_ceil(2);
    let mut xs = Vec::with_capacity(2 * per_side);
    for end in [End::A, End::B] {
        let e = interval.endpoint(end);
        for i in 0..per_side {
            let t = if per_side == 1 { 0.5 } else { i as f64 / (per_side - 1) as f64 };
            let x = if e.is_finite() {
                // distance from the endpoint between 1e-8 and 1 times the half width
                let d = (e - m).abs() * 10f64.powf(-8.0 * t);
                e - end.outward() * d
            } else {
                m + end.outward() * 10f64.powf(-1.0 + 7.0 * t)
            };
            if interval.contains(x) {
                xs.push(x);
            }
        }
    }
    xs.push(m);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    xs
}

/// Regularity of one endpoint: finite, with `1/p`, `q` and `r` integrable.
pub fn endpoint_regularity(spec: &ProblemSpec, end: End) -> EndpointRegularity {
    let e = spec.endpoint(end);
    let m = spec.reference_point();
    let finite = e.is_finite();
    let inv_p = quad::integrability(&|x: f64| 1.0 / spec.p(x), m, e);
    let q = quad::integrability(&|x: f64| spec.q(x), m, e);
    let r = quad::integrability(&|x: f64| spec.r(x), m, e);
    let verdicts = [inv_p, q, r];
    let regular = if !finite || verdicts.contains(&Integrability::Divergent) {
        RegularFlag::Singular
    } else if verdicts.iter().all(|v| *v == Integrability::Convergent) {
        RegularFlag::Regular
    } else {
        RegularFlag::Undetermined
    };
    EndpointRegularity { end, finite, inv_p, q, r, regular }
}

/// Checks positivity of `p, r` and finiteness of all coefficients on a
/// log-uniform interior grid, then decides regularity by quadrature.
pub fn validate(spec: &ProblemSpec, n_samples: usize) -> Result<ValidationReport, ProblemError> {
    Interval::new(spec.interval.a, spec.interval.b)?;
    let xs = sample_points(&spec.interval, n_samples);
    let mut verdicts = Vec::new();
    for (name, coef, needs_sign) in [
        ('p', &spec.coeffs.p, true),
        ('q', &spec.coeffs.q, false),
        ('r', &spec.coeffs.r, true),
    ] {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &x in &xs {
            let v = coef.eval(x);
            if !v.is_finite() {
                return Err(ProblemError::NonFiniteValue { coefficient: name, x });
            }
            if needs_sign && v <= 0.0 {
                return Err(ProblemError::NonPositiveCoefficient { coefficient: name, x, value: v });
            }
            min = min.min(v);
            max = max.max(v);
        }
        verdicts.push(CoefficientVerdict {
            coefficient: name,
            min,
            max,
            finite: true,
            positive: needs_sign.then_some(true),
        });
    }
    let endpoints: Vec<EndpointRegularity> = [End::A, End::B].iter().map(|&e| endpoint_regularity(spec, e)).collect();
    let regular = if endpoints.iter().all(|e| e.regular == RegularFlag::Regular) {
        RegularFlag::Regular
    } else if endpoints.iter().any(|e| e.regular == RegularFlag::Singular) {
        RegularFlag::Singular
    } else {
        RegularFlag::Undetermined
    };
    Ok(ValidationReport { samples: xs.len(), coefficients: verdicts, endpoints, regular })
}

/// Model problems. Names: `legendre`, `regular_dirichlet_pi`, `bessel(γ)`,
/// `free_halfline`. All use reference energy zero.
pub fn catalog(name: &str) -> Result<ProblemSpec, ProblemError> {
    let key = name.trim();
    let unknown = || ProblemError::UnknownCatalogEntry(name.to_string());
    let mut spec = match key {
        "legendre" => ProblemSpec::from_strings(Interval { a: -1.0, b: 1.0 }, "(1 - x)*(1 + x)", "0", "1", 0.0)?,
        "regular_dirichlet_pi" => ProblemSpec::from_strings(Interval { a: 0.0, b: PI }, "1", "0", "1", 0.0)?,
        "free_halfline" => ProblemSpec::from_strings(Interval { a: 0.0, b: f64::INFINITY }, "1", "0", "1", 0.0)?,
        _ => {
            let order = key
                .strip_prefix("bessel(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(|g| g.trim().parse::<f64>().ok())
                .filter(|g| g.is_finite() && *g >= 0.0)
                .ok_or_else(unknown)?;
            let c = order * order - 0.25;
            let q = if c == 0.0 { Expr::constant(0.0) } else { Expr::parse(&format!("{c:?}/x^2")).expect("well-formed") };
            ProblemSpec {
                name: None,
                interval: Interval { a: 0.0, b: 1.0 },
                coeffs: CoefficientSet { p: Coefficient::constant(1.0), q: Coefficient::new(q), r: Coefficient::constant(1.0) },
                lambda0: 0.0,
                regular: RegularFlag::Undetermined,
            }
        }
    };
    spec.name = Some(key.to_string());
    Ok(spec)
}

/// Names accepted by [`catalog`], with a representative Bessel order.
pub const CATALOG_NAMES: [&str; 4] = ["legendre", "regular_dirichlet_pi", "bessel(2)", "free_halfline"];

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawCoefficient {
    Text(String),
    Number(f64),
    Catalog(CatalogRef),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogRef {
    catalog: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoefficients {
    p: RawCoefficient,
    q: RawCoefficient,
    r: RawCoefficient,
}

fn resolve(name: char, raw: RawCoefficient) -> Result<Coefficient, ProblemError> {
    match raw {
        RawCoefficient::Text(s) => Coefficient::parse(name, &s),
        RawCoefficient::Number(v) => Ok(Coefficient::constant(v)),
        RawCoefficient::Catalog(CatalogRef { catalog: entry }) => {
            let spec = catalog(&entry)?;
            Ok(match name {
                'p' => spec.coeffs.p,
                'q' => spec.coeffs.q,
                _ => spec.coeffs.r,
            })
        }
    }
}

/// On-disk problem description.
///
/// ```json
/// { "name": "oscillator",
///   "interval": {"a": "-inf", "b": "inf"},
///   "coefficients": {"p": "1", "q": "x^2", "r": {"catalog": "legendre"}},
///   "lambda0": 0,
///   "extension": {"kind": "lp_lp"} }
/// ```
///
/// `catalog` may replace `interval`/`coefficients` to start from a model
/// problem. Unknown fields are rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub catalog: Option<String>,
    #[serde(default)]
    pub interval: Option<Interval>,
    #[serde(default)]
    coefficients: Option<RawCoefficients>,
    #[serde(default)]
    pub lambda0: Option<f64>,
    #[serde(default)]
    pub extension: Option<ExtensionSpec>,
}

impl ProblemDocument {
    pub fn from_json(text: &str) -> Result<ProblemDocument, ProblemError> {
        serde_json::from_str(text).map_err(|e| ProblemError::Document(e.to_string()))
    }

    pub fn into_spec(self) -> Result<(ProblemSpec, Option<ExtensionSpec>), ProblemError> {
        let mut spec = match (&self.catalog, &self.interval, &self.coefficients) {
            (Some(name), None, None) => catalog(name)?,
            (None, Some(_), Some(_)) => {
                let interval = self.interval.unwrap();
                let raw = self.coefficients.unwrap();
                let interval = Interval::new(interval.a, interval.b)?;
                ProblemSpec {
                    name: None,
                    interval,
                    coeffs: CoefficientSet { p: resolve('p', raw.p)?, q: resolve('q', raw.q)?, r: resolve('r', raw.r)? },
                    lambda0: 0.0,
                    regular: RegularFlag::Undetermined,
                }
            }
            _ => {
                return Err(ProblemError::Document(
                    "give either \"catalog\" or both \"interval\" and \"coefficients\"".into(),
                ))
            }
        };
        if let Some(name) = self.name {
            spec.name = Some(name);
        }
        if let Some(l) = self.lambda0 {
            spec.lambda0 = l;
        }
        Ok((spec, self.extension))
    }
}

/// Reads a problem file, or treats the argument as a catalog name when no
/// such file exists.
pub fn load(arg: &str) -> Result<(ProblemSpec, Option<ExtensionSpec>), ProblemError> {
    match std::fs::read_to_string(arg) {
        Ok(text) => ProblemDocument::from_json(&text)?.into_spec(),
        Err(_) => catalog(arg).map(|s| (s, None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn catalog_entries() {
        let l = catalog("legendre").unwrap();
        assert_eq!(l.interval, Interval { a: -1.0, b: 1.0 });
        assert_relative_eq!(l.p(0.5), 0.75);
        assert_eq!(l.lambda0, 0.0);
        let b = catalog("bessel(2)").unwrap();
        assert_relative_eq!(b.q(0.5), 3.75 / 0.25);
        let d = catalog("regular_dirichlet_pi").unwrap();
        assert_relative_eq!(d.interval.b, PI);
        assert!(matches!(catalog("airy"), Err(ProblemError::UnknownCatalogEntry(_))));
        assert!(matches!(catalog("bessel(x)"), Err(ProblemError::UnknownCatalogEntry(_))));
    }

    #[test]
    fn legendre_is_singular() {
        let (spec, report) = catalog("legendre").unwrap().validated(16).unwrap();
        assert_eq!(report.regular, RegularFlag::Singular);
        assert_eq!(spec.regular, RegularFlag::Singular);
        assert!(report.endpoints.iter().all(|e| e.inv_p == Integrability::Divergent));
    }

    #[test]
    fn dirichlet_is_regular() {
        let (_, report) = catalog("regular_dirichlet_pi").unwrap().validated(16).unwrap();
        assert_eq!(report.regular, RegularFlag::Regular);
    }

    #[test]
    fn bessel_two_is_singular_at_zero() {
        let (_, report) = catalog("bessel(2)").unwrap().validated(16).unwrap();
        assert_eq!(report.regular, RegularFlag::Singular);
        assert_eq!(report.endpoints[0].q, Integrability::Divergent);
        assert_eq!(report.endpoints[1].regular, RegularFlag::Regular);
    }

    #[test]
    fn validation_is_idempotent() {
        for name in CATALOG_NAMES {
            let (once, r1) = catalog(name).unwrap().validated(8).unwrap();
            let (twice, r2) = once.validated(8).unwrap();
            assert_eq!(once, twice);
            assert_eq!(r1, r2);
        }
    }

    #[test]
    fn rejects_nonpositive_and_nonfinite() {
        let spec = ProblemSpec::from_strings(Interval { a: -1.0, b: 1.0 }, "x", "0", "1", 0.0).unwrap();
        assert!(matches!(validate(&spec, 16), Err(ProblemError::NonPositiveCoefficient { coefficient: 'p', .. })));
        let spec = ProblemSpec::from_strings(Interval { a: -1.0, b: 1.0 }, "1", "1/x", "1", 0.0).unwrap();
        assert!(matches!(validate(&spec, 17), Err(ProblemError::NonFiniteValue { coefficient: 'q', .. })));
    }

    #[test]
    fn document_parsing() {
        let doc = r#"{"interval": {"a": "-inf", "b": "inf"},
                      "coefficients": {"p": "1", "q": "x^2", "r": 1},
                      "lambda0": 0.5,
                      "extension": {"kind": "lp_lp"}}"#;
        let (spec, ext) = ProblemDocument::from_json(doc).unwrap().into_spec().unwrap();
        assert_eq!(spec.interval.a, f64::NEG_INFINITY);
        assert_relative_eq!(spec.q(3.0), 9.0);
        assert_eq!(spec.lambda0, 0.5);
        assert_eq!(ext, Some(ExtensionSpec::LpLp));

        let doc = r#"{"interval": {"a": 0, "b": 1}, "coefficients": {"p": {"catalog": "legendre"}, "q": "0", "r": "1"}}"#;
        let (spec, _) = ProblemDocument::from_json(doc).unwrap().into_spec().unwrap();
        assert_relative_eq!(spec.p(0.5), 0.75);

        let bad = r#"{"interval": {"a": 0, "b": 1}, "coefficients": {"p": "1", "q": "0", "r": "1"}, "colour": 3}"#;
        assert!(ProblemDocument::from_json(bad).is_err());
        let bad = r#"{"interval": {"a": 0, "b": 1, "c": 2}, "coefficients": {"p": "1", "q": "0", "r": "1"}}"#;
        assert!(ProblemDocument::from_json(bad).is_err());
    }

    #[test]
    fn interval_serializes_infinities_as_text() {
        let text = serde_json::to_string(&Interval { a: 0.0, b: f64::INFINITY }).unwrap();
        assert_eq!(text, r#"{"a":0.0,"b":"inf"}"#);
    }

    #[test]
    fn sample_grid_is_interior() {
        for name in CATALOG_NAMES {
            let spec = catalog(name).unwrap();
            let xs = sample_points(&spec.interval, 20);
            assert!(xs.len() >= 8);
            assert!(xs.iter().all(|&x| spec.interval.contains(x)));
        }
    }
}
