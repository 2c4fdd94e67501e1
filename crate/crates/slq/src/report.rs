//! Structured run reports assembled from the numerical modules, shared by
//! the command-line front end and the tests.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::bvalues::{gbv, patched_pair, BvaluesError, GbvOpts, GeneralizedBoundaryValues};
use crate::classify::{classify_evidence, certify_nonoscillatory, ClassifyOpts, EndpointClassification, NonoscillationReport};
use crate::extensions::{eigen_rows, eigenvalues_shoot, friedrichs_spec, EigenRow, Eigenpair, ExtensionSpec, ExtensionsError, ShootOpts};
use crate::forms::{green_identity_residual, q_base, q_decorated, FormValue, FormWindow, FormsError, GreenResidual};
use crate::odecore::QuasiFn;
use crate::problem::{End, ProblemError, ProblemSpec, ValidationReport};
use crate::solutions::{BasisOpts, BasisPair, BasisReport, Regime, SolutionsError};
use crate::testfns::{BasisMember, FnSpec, FnSpecError};
use crate::triplets::{
    decompose, form_from_relation, pair_for_extension, relation_report, triplet_green_residual, RelationReport, TripletGreen,
    TripletsError,
};

/// Versioned identifier of the report layout.
pub const SCHEMA: &str = "slq.report/1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    FnSpec(#[from] FnSpecError),
    #[error("{0} needs a solution basis at a limit-circle end")]
    FunctionNeedsBasis(String),
    #[error(transparent)]
    Solutions(#[from] SolutionsError),
    #[error(transparent)]
    Bvalues(#[from] BvaluesError),
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error(transparent)]
    Extensions(#[from] ExtensionsError),
    #[error(transparent)]
    Triplets(#[from] TripletsError),
    #[error("classification inconclusive at endpoint {0}")]
    Inconclusive(End),
}

impl ReportError {
    /// Process exit code: 2 for input errors, 3 for inconclusive
    /// classification under `--strict`, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Problem(_) | ReportError::FnSpec(_) | ReportError::FunctionNeedsBasis(_) => 2,
            ReportError::Inconclusive(_) => 3,
            _ => 4,
        }
    }
}

/// Builds a named test function on a problem.
pub fn resolve_fn(spec: &ProblemSpec, pair: &BasisPair, f: &FnSpec) -> Result<Arc<dyn QuasiFn>, ReportError> {
    if let Some(a) = f.analytic(spec) {
        return Ok(Arc::new(a));
    }
    let lc = |end: End| pair.is_limit_circle(end).then(|| pair.at(end));
    match f {
        FnSpec::V1 | FnSpec::V2 => {
            let pp = patched_pair(spec, lc(End::A), lc(End::B))?;
            Ok(if *f == FnSpec::V1 { Arc::new(pp.v1) } else { Arc::new(pp.v2) })
        }
        FnSpec::Basis { member, end } => {
            let b = pair.at(*end);
            Ok(match member {
                BasisMember::Principal => b.u.clone(),
                BasisMember::Nonprincipal => b.u_hat.clone(),
            })
        }
        _ => Err(ReportError::FunctionNeedsBasis(format!("{f:?}"))),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub tol: f64,
    pub ode_tol: f64,
    pub gbv_accept: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationSection {
    pub endpoints: Vec<EndpointClassification>,
    pub nonoscillation: NonoscillationReport,
}

pub fn classification_section(spec: &ProblemSpec, probe: C64, opts: &ClassifyOpts) -> ClassificationSection {
    let (a, b) = rayon::join(|| classify_evidence(spec, End::A, probe, opts), || classify_evidence(spec, End::B, probe, opts));
    ClassificationSection { endpoints: vec![a, b], nonoscillation: certify_nonoscillatory(spec, spec.lambda0) }
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisSection {
    pub regime: Regime,
    pub a: BasisReport,
    pub b: BasisReport,
}

pub fn basis_section(pair: &BasisPair) -> BasisSection {
    BasisSection { regime: pair.regime(), a: pair.a.report(), b: pair.b.report() }
}

#[derive(Debug, Clone, Serialize)]
pub struct GbvSection {
    pub function: String,
    pub values: Vec<GeneralizedBoundaryValues>,
}

pub fn gbv_section(pair: &BasisPair, label: &str, f: &dyn QuasiFn, opts: &GbvOpts) -> Result<GbvSection, ReportError> {
    let mut values = Vec::new();
    for end in [End::A, End::B] {
        if pair.is_limit_circle(end) {
            values.push(gbv(pair.at(end), f, opts)?);
        }
    }
    Ok(GbvSection { function: label.to_string(), values })
}

#[derive(Debug, Clone, Serialize)]
pub struct FormSection {
    pub f: String,
    pub g: String,
    pub extension: ExtensionSpec,
    pub base: FormValue,
    pub decorated: Option<FormValue>,
    /// Reason the decorated form is unavailable.
    pub decorated_failure: Option<String>,
}

#[allow(clippy::too_many_arguments)]
pub fn form_section(
    spec: &ProblemSpec,
    pair: &BasisPair,
    window: FormWindow,
    ext: &ExtensionSpec,
    labels: (&str, &str),
    f: &dyn QuasiFn,
    g: &dyn QuasiFn,
) -> Result<FormSection, ReportError> {
    let base = q_base(spec, pair, window, f, g)?;
    let (decorated, decorated_failure) = match q_decorated(spec, pair, window, ext, f, g) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(FormSection { f: labels.0.into(), g: labels.1.into(), extension: ext.clone(), base, decorated, decorated_failure })
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenSection {
    pub f: String,
    pub g: String,
    pub concrete: GreenResidual,
    pub triplet: Option<TripletGreen>,
}

pub fn green_section(
    spec: &ProblemSpec,
    pair: &BasisPair,
    window: FormWindow,
    labels: (&str, &str),
    f: &dyn QuasiFn,
    g: &dyn QuasiFn,
) -> Result<GreenSection, ReportError> {
    let concrete = green_identity_residual(spec, pair, window, f, g)?;
    let triplet = match pair.regime() {
        Regime::LpLp => None,
        _ => Some(triplet_green_residual(spec, pair, f, g)?),
    };
    Ok(GreenSection { f: labels.0.into(), g: labels.1.into(), concrete, triplet })
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenSection {
    pub extension: ExtensionSpec,
    pub range: (f64, f64),
    pub grid_per_unit: usize,
    pub tol: f64,
    pub eigenvalues: Vec<EigenRow>,
}

pub fn eigen_section(
    spec: &ProblemSpec,
    pair: &BasisPair,
    ext: &ExtensionSpec,
    range: (f64, f64),
    opts: &ShootOpts,
) -> Result<(EigenSection, Vec<Eigenpair>), ReportError> {
    let pairs = eigenvalues_shoot(spec, pair, ext, range, opts)?;
    let section = EigenSection {
        extension: ext.clone(),
        range,
        grid_per_unit: opts.grid_per_unit,
        tol: opts.tol,
        eigenvalues: eigen_rows(&pairs),
    };
    Ok((section, pairs))
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossPath {
    pub f: String,
    pub g: String,
    pub from_relation: Option<C64>,
    pub decorated: Option<C64>,
    pub difference: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TripletSection {
    pub extension: ExtensionSpec,
    pub relation: RelationReport,
    pub cross_path: Vec<CrossPath>,
}

/// Relation of an extension and the agreement of the two form routes on
/// the given functions.
pub fn triplet_section(
    spec: &ProblemSpec,
    pair: &BasisPair,
    window: FormWindow,
    ext: &ExtensionSpec,
    functions: &[(String, Arc<dyn QuasiFn>)],
) -> Result<TripletSection, ReportError> {
    let sa = pair_for_extension(ext)?;
    let relation = relation_report(&decompose(&sa));
    let mut cross_path = Vec::new();
    for (lf, f) in functions {
        for (lg, g) in functions {
            let a = form_from_relation(spec, pair, window, &sa, f.as_ref(), g.as_ref());
            let b = q_decorated(spec, pair, window, ext, f.as_ref(), g.as_ref());
            let row = match (a, b) {
                (Ok(a), Ok(b)) => CrossPath {
                    f: lf.clone(),
                    g: lg.clone(),
                    from_relation: Some(a.value),
                    decorated: Some(b.value),
                    difference: Some((a.value - b.value).norm()),
                    failure: None,
                },
                (a, b) => CrossPath {
                    f: lf.clone(),
                    g: lg.clone(),
                    from_relation: a.as_ref().ok().map(|v| v.value),
                    decorated: b.as_ref().ok().map(|v| v.value),
                    difference: None,
                    failure: Some(format!(
                        "{}; {}",
                        a.err().map_or("relation ok".into(), |e| e.to_string()),
                        b.err().map_or("decorated ok".into(), |e| e.to_string())
                    )),
                },
            };
            cross_path.push(row);
        }
    }
    Ok(TripletSection { extension: ext.clone(), relation, cross_path })
}

#[derive(Debug, Clone, Serialize)]
pub struct Timestamp {
    pub unix_seconds: u64,
    pub elapsed_seconds: f64,
}

/// One structured document per run. Sections that were not requested or
/// failed are absent; failures are listed by section.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub version: &'static str,
    pub command: String,
    pub problem: ProblemSpec,
    pub validation: Option<ValidationReport>,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisSection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub gbv: Vec<GbvSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub form: Option<FormSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub green: Option<GreenSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen: Option<EigenSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triplet: Option<TripletSection>,
    pub failures: Vec<String>,
    pub timestamp: Timestamp,
}

impl RunReport {
    pub fn new(command: &str, problem: ProblemSpec, tolerances: Tolerances) -> RunReport {
        RunReport {
            schema: SCHEMA,
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            problem,
            validation: None,
            tolerances,
            classification: None,
            basis: None,
            gbv: Vec::new(),
            form: None,
            green: None,
            eigen: None,
            triplet: None,
            failures: Vec::new(),
            timestamp: Timestamp { unix_seconds: 0, elapsed_seconds: 0.0 },
        }
    }
}

/// The extension given in the problem file, or the Friedrichs one.
pub fn extension_or_friedrichs(ext: Option<ExtensionSpec>, pair: &BasisPair) -> ExtensionSpec {
    ext.unwrap_or_else(|| friedrichs_spec(pair.regime()))
}

pub fn default_basis_opts(tol: f64) -> BasisOpts {
    BasisOpts { tol, ..BasisOpts::default() }
}

/// Parses `1.5`, `2i`, `-i`, `0.5-3i` and `1e-3+2e-1i`.
pub fn parse_complex(s: &str) -> Option<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return None;
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().ok().map(|re| C64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |txt: &str| -> Option<f64> {
        match txt {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            _ => txt.parse().ok(),
        }
    };
    match split {
        Some(k) => Some(C64::new(body[..k].parse().ok()?, imag(&body[k..])?)),
        None => Some(C64::new(0.0, imag(body)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::catalog;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("2i"), Some(C64::new(0.0, 2.0)));
        assert_eq!(parse_complex("-i"), Some(C64::new(0.0, -1.0)));
        assert_eq!(parse_complex("0.5-3i"), Some(C64::new(0.5, -3.0)));
        assert_eq!(parse_complex("1e-3+2e-1i"), Some(C64::new(1e-3, 0.2)));
        assert_eq!(parse_complex("4"), Some(C64::new(4.0, 0.0)));
        assert_eq!(parse_complex("x"), None);
    }

    #[test]
    fn named_functions_resolve() {
        let spec = catalog("legendre").unwrap();
        let pair = BasisPair::new(&spec, &BasisOpts::default()).unwrap();
        for s in ["sin", "poly:1,2", "bump:0,0.5", "v1", "v2", "u_a", "uhat_b"] {
            let f = resolve_fn(&spec, &pair, &s.parse().unwrap()).unwrap();
            assert!(f.value(0.3).unwrap().0.re.is_finite(), "{s}");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(ReportError::Inconclusive(End::A).exit_code(), 3);
        assert_eq!(ReportError::FnSpec(FnSpecError::BadWidth(-1.0)).exit_code(), 2);
        assert_eq!(ReportError::Extensions(ExtensionsError::InvalidRange(1.0, 0.0)).exit_code(), 4);
    }
}
