//! Finite-dimensional self-adjoint relations `{(u, v) : ℬu = 𝒜v}` in ℂⁿ,
//! `n ∈ {1, 2}`, their operator parts, and the boundary-triplet form of the
//! Green identity and of the extension forms.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvalues::{gbv, BvaluesError, GbvOpts, GeneralizedBoundaryValues};
use crate::extensions::ExtensionSpec;
use crate::forms::{pairing_with_tau, q_base, DecorationTerm, FormValue, FormWindow, FormsError, DOMAIN_TOL};
use crate::odecore::QuasiFn;
use crate::problem::{End, ProblemSpec};
use crate::solutions::{BasisPair, Regime};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative tolerance of `𝒜ℬ* = ℬ𝒜*`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Singular values below this fraction of the largest count as zero.
pub const KERNEL_TOL: f64 = 1e-10;
/// Relative tolerance of `ℬu = 𝒜v` in membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TripletsError {
    #[error("matrices must be square of equal size 1 or 2, got {0}")]
    Dimension(String),
    #[error("𝒜ℬ* - ℬ𝒜* has norm {defect}, pair is not self-adjoint")]
    NotSelfAdjointPair { defect: f64 },
    #[error("(ℬ 𝒜) has rank {rank} < {n}")]
    RankDeficient { rank: usize, n: usize },
    #[error("no boundary space when both ends are limit point")]
    NoBoundarySpace,
    #[error("boundary space of dimension {n} does not match the {regime:?} regime")]
    RegimeMismatch { n: usize, regime: Regime },
    #[error("domain constraint violated: {0}")]
    DomainConstraintViolated(String),
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error(transparent)]
    Bvalues(#[from] BvaluesError),
}

/// A validated pair `(𝒜, ℬ)` describing a self-adjoint relation.
#[derive(Debug, Clone, PartialEq)]
pub struct SaPair {
    pub a: CMat,
    pub b: CMat,
}

impl SaPair {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
}

fn norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn rank(m: &CMat) -> usize {
    let s = m.clone().svd(false, false).singular_values;
    let top = s.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > KERNEL_TOL * top).count()
}

/// Checks `𝒜ℬ* = ℬ𝒜*` and `rank(ℬ 𝒜) = n`.
pub fn validate_pair(a: CMat, b: CMat) -> Result<SaPair, TripletsError> {
    let n = a.nrows();
    if !(1..=2).contains(&n) || a.ncols() != n || b.shape() != (n, n) {
        return Err(TripletsError::Dimension(format!("𝒜 {:?}, ℬ {:?}", a.shape(), b.shape())));
    }
    let block = CMat::from_fn(n, 2 * n, |i, j| if j < n { b[(i, j)] } else { a[(i, j - n)] });
    let r = rank(&block);
    if r < n {
        return Err(TripletsError::RankDeficient { rank: r, n });
    }
    let defect = norm(&(&a * b.adjoint() - &b * a.adjoint()));
    if defect > HERMITIAN_TOL * (norm(&a) * norm(&b)).max(f64::MIN_POSITIVE) {
        return Err(TripletsError::NotSelfAdjointPair { defect });
    }
    Ok(SaPair { a, b })
}

fn real(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// The pair `(𝒜, ℬ)` of the boundary conditions of an extension in the
/// coordinates `Γ₀g = (g̃(a), g̃(b))`, `Γ₁g = (g̃'(a), -g̃'(b))`.
pub fn pair_for_extension(ext: &ExtensionSpec) -> Result<SaPair, TripletsError> {
    match *ext {
        ExtensionSpec::Separated { alpha, beta } => validate_pair(
            CMat::from_diagonal(&CVec::from_vec(vec![real(-alpha.sin()), real(beta.sin())])),
            CMat::from_diagonal(&CVec::from_vec(vec![real(alpha.cos()), real(beta.cos())])),
        ),
        ExtensionSpec::Coupled { phi, r } => {
            let e = C64::from_polar(1.0, phi);
            let a = -CMat::from_row_slice(2, 2, &[e * r[0][1], real(0.0), e * r[1][1], real(1.0)]);
            let b = CMat::from_row_slice(2, 2, &[e * r[0][0], real(-1.0), e * r[1][0], real(0.0)]);
            validate_pair(a, b)
        }
        ExtensionSpec::OneLc { alpha, endpoint } => {
            let s = match endpoint {
                End::A => -alpha.sin(),
                End::B => alpha.sin(),
            };
            validate_pair(CMat::from_element(1, 1, real(s)), CMat::from_element(1, 1, real(alpha.cos())))
        }
        ExtensionSpec::LpLp => Err(TripletsError::NoBoundarySpace),
    }
}

/// Moore–Penrose inverse by SVD, dropping singular values below
/// `KERNEL_TOL` times the largest.
pub fn pinv(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = CMat::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > KERNEL_TOL * top {
            out += vt.row(k).adjoint() * u.column(k).adjoint() * real(1.0 / s);
        }
    }
    out
}

/// Residuals of the four Moore–Penrose identities, each relative to `‖m‖`
/// or `‖m⁺‖`.
pub fn penrose_defects(m: &CMat) -> [f64; 4] {
    let p = pinv(m);
    let (nm, np) = (norm(m).max(f64::MIN_POSITIVE), norm(&p).max(f64::MIN_POSITIVE));
    let mp = m * &p;
    let pm = &p * m;
    [
        norm(&(&mp * m - m)) / nm,
        norm(&(&pm * &p - &p)) / np,
        norm(&(mp.adjoint() - &mp)) / (1.0 + norm(&mp)),
        norm(&(pm.adjoint() - &pm)) / (1.0 + norm(&pm)),
    ]
}

/// Decomposition `Θ = Θ_op ⊕ ({0} × mul Θ)` with `mul Θ = ker 𝒜`.
#[derive(Debug, Clone)]
pub struct SelfAdjointRelation {
    pub pair: SaPair,
    pub mul_basis: Vec<CVec>,
    pub dom_basis: Vec<CVec>,
    /// Operator part in the coordinates of `dom_basis`.
    pub theta_op: CMat,
    /// `P 𝒜⁺ℬ P` on ℂⁿ, with `P` the projection onto `(ker 𝒜)^⊥`.
    pub theta_full: CMat,
    /// Scalar operator part on a one-dimensional domain inside ℂ².
    pub c_theta: Option<f64>,
    /// A singular value sits within a factor 100 of the kernel threshold.
    pub near_threshold: bool,
}

pub fn decompose(pair: &SaPair) -> SelfAdjointRelation {
    let n = pair.n();
    let svd = pair.a.clone().svd(true, true);
    let vt = svd.v_t.unwrap();
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut mul_basis = Vec::new();
    let mut dom_basis = Vec::new();
    let mut near_threshold = false;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let v: CVec = vt.row(k).adjoint();
        if top > 0.0 && s > KERNEL_TOL * top {
            dom_basis.push(v);
            near_threshold |= s < 100.0 * KERNEL_TOL * top;
        } else {
            mul_basis.push(v);
        }
    }
    let q = CMat::from_fn(n, dom_basis.len(), |i, j| dom_basis[j][i]);
    let op = pinv(&pair.a) * &pair.b;
    let theta_op = q.adjoint() * &op * &q;
    let theta_full = &q * &theta_op * q.adjoint();
    let c_theta = if n == 2 && dom_basis.len() == 1 {
        let w = &dom_basis[0];
        let (aw, bw) = (&pair.a * w, &pair.b * w);
        Some((aw.dotc(&bw) / aw.norm_squared()).re)
    } else {
        None
    };
    SelfAdjointRelation { pair: pair.clone(), mul_basis, dom_basis, theta_op, theta_full, c_theta, near_threshold }
}

impl SelfAdjointRelation {
    /// `‖ℬu - 𝒜Θ_op u‖` over the domain basis.
    pub fn operator_residual(&self) -> f64 {
        let q = CMat::from_fn(self.pair.n(), self.dom_basis.len(), |i, j| self.dom_basis[j][i]);
        norm(&(&self.pair.b * &q - &self.pair.a * &q * &self.theta_op))
    }

    /// Component of `x` along `mul Θ`.
    pub fn mul_component(&self, x: &CVec) -> f64 {
        self.mul_basis.iter().map(|v| v.dotc(x).norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `‖ℬu - 𝒜v‖ ≤ tol (‖ℬ‖‖u‖ + ‖𝒜‖‖v‖)`.
pub fn relation_membership(pair: &SaPair, u: &CVec, v: &CVec) -> bool {
    let lhs = (&pair.b * u - &pair.a * v).norm();
    lhs <= MEMBERSHIP_TOL * (norm(&pair.b) * u.norm() + norm(&pair.a) * v.norm()) || lhs == 0.0
}

fn require_regime(n: usize, regime: Regime) -> Result<Vec<End>, TripletsError> {
    match (n, regime) {
        (2, Regime::LcLc) => Ok(vec![End::A, End::B]),
        (1, Regime::LcLp { lc }) => Ok(vec![lc]),
        _ => Err(TripletsError::RegimeMismatch { n, regime }),
    }
}

/// Boundary maps `(Γ₀g, Γ₁g)` at the limit-circle ends.
pub fn gamma(pair: &BasisPair, g: &dyn QuasiFn) -> Result<(CVec, CVec), TripletsError> {
    let regime = pair.regime();
    let ends = match regime {
        Regime::LcLc => vec![End::A, End::B],
        Regime::LcLp { lc } => vec![lc],
        Regime::LpLp => return Err(TripletsError::NoBoundarySpace),
    };
    let opts = GbvOpts { require_derivative: true, ..GbvOpts::default() };
    let mut g0 = Vec::new();
    let mut g1 = Vec::new();
    for end in ends {
        let v = gbv(pair.at(end), g, &opts)?;
        let (t, tp) = v.pair();
        g0.push(t);
        g1.push(match end {
            End::A => tp,
            End::B => -tp,
        });
    }
    Ok((CVec::from_vec(g0), CVec::from_vec(g1)))
}

/// `Λg = Γ₀g` from the boundary values alone, with no derivative needed.
pub fn lambda_map(pair: &BasisPair, g: &dyn QuasiFn) -> Result<(CVec, Vec<GeneralizedBoundaryValues>), TripletsError> {
    let ends = require_regime(
        match pair.regime() {
            Regime::LcLc => 2,
            Regime::LcLp { .. } => 1,
            Regime::LpLp => return Err(TripletsError::NoBoundarySpace),
        },
        pair.regime(),
    )?;
    let vals: Vec<GeneralizedBoundaryValues> =
        ends.iter().map(|&e| gbv(pair.at(e), g, &GbvOpts::default())).collect::<Result<_, _>>()?;
    Ok((CVec::from_iterator(vals.len(), vals.iter().map(|v| v.tilde)), vals))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletGreen {
    pub residual: C64,
    pub pairing_difference: C64,
    pub boundary: C64,
}

/// `(f, T g) - (T f, g) - [(Γ₀f, Γ₁g) - (Γ₁f, Γ₀g)]`.
pub fn triplet_green_residual(
    spec: &ProblemSpec,
    pair: &BasisPair,
    f: &dyn QuasiFn,
    g: &dyn QuasiFn,
) -> Result<TripletGreen, TripletsError> {
    let ((fg, gf), (gf_, gg_)) = rayon::join(
        || rayon::join(|| pairing_with_tau(spec, pair, f, g), || pairing_with_tau(spec, pair, g, f)),
        || rayon::join(|| gamma(pair, f), || gamma(pair, g)),
    );
    let (f0, f1) = gf_?;
    let (g0, g1) = gg_?;
    let pairing_difference = fg? - gf?.conj();
    let boundary = f0.dotc(&g1) - f1.dotc(&g0);
    Ok(TripletGreen { residual: pairing_difference - boundary, pairing_difference, boundary })
}

/// `𝔱_{S₁}[f, g] + (Λf, Θ_op Λg)` with `Λf, Λg` constrained to
/// `(mul Θ)^⊥`.
pub fn form_from_relation(
    spec: &ProblemSpec,
    pair: &BasisPair,
    window: FormWindow,
    sa: &SaPair,
    f: &dyn QuasiFn,
    g: &dyn QuasiFn,
) -> Result<FormValue, TripletsError> {
    require_regime(sa.n(), pair.regime())?;
    let rel = decompose(sa);
    let (lf, _) = lambda_map(pair, f)?;
    let (lg, _) = lambda_map(pair, g)?;
    for (label, v) in [("Λf", &lf), ("Λg", &lg)] {
        let c = rel.mul_component(v);
        if c > DOMAIN_TOL {
            return Err(TripletsError::DomainConstraintViolated(format!("{label} has component {c:.3e} along mul Θ")));
        }
    }
    let deco = lf.dotc(&(&rel.theta_full * &lg));
    let mut v = q_base(spec, pair, window, f, g)?;
    v.pieces.decoration = vec![DecorationTerm { label: "(Λf, Θ_op Λg)".to_string(), value: deco }];
    v.value = v.pieces.sum();
    Ok(v)
}

/// One function of a boundary-pair test family.
#[derive(Clone)]
pub struct FamilyMember {
    pub label: String,
    pub f: Arc<dyn QuasiFn>,
    /// Expected to lie in the Friedrichs form domain (`Λf = 0`).
    pub friedrichs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub label: String,
    pub lambda: Vec<C64>,
    pub route_discrepancy: Option<f64>,
    pub route_tolerance: Option<f64>,
    pub norm_sq: f64,
    pub form: f64,
    pub friedrichs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPairReport {
    pub rows: Vec<FamilyRow>,
    /// `(ε, C_ε)` with `‖Λg‖² ≤ ε 𝔱[g] + C_ε ‖g‖²` on the family.
    pub c_eps: Vec<(f64, f64)>,
    pub counterexamples: Vec<String>,
    pub consistent: bool,
}

/// Checks on a test family that `Λ` agrees with `Γ₀` across routes, that
/// Friedrichs members lie in `ker Λ`, and fits `C_ε` for each `ε`.
pub fn boundary_pair_check(
    spec: &ProblemSpec,
    pair: &BasisPair,
    window: FormWindow,
    eps: &[f64],
    family: &[FamilyMember],
) -> Result<BoundaryPairReport, TripletsError> {
    use rayon::prelude::*;
    let rows: Vec<FamilyRow> = family
        .par_iter()
        .map(|m| -> Result<FamilyRow, TripletsError> {
            let (lam, vals) = lambda_map(pair, m.f.as_ref())?;
            let mut disc: Option<(f64, f64)> = None;
            for v in &vals {
                if let Some((d, t)) = v.route_discrepancy() {
                    let (d0, t0) = disc.unwrap_or((0.0, 0.0));
                    disc = Some((d0.max(d), t0.max(t)));
                }
            }
            let norm_sq = crate::forms::inner(spec, pair, m.f.as_ref(), m.f.as_ref())?.re;
            let form = q_base(spec, pair, window, m.f.as_ref(), m.f.as_ref())?.value.re;
            Ok(FamilyRow {
                label: m.label.clone(),
                lambda: lam.iter().cloned().collect(),
                route_discrepancy: disc.map(|d| d.0),
                route_tolerance: disc.map(|d| d.1),
                norm_sq,
                form,
                friedrichs: m.friedrichs,
            })
        })
        .collect::<Result<_, _>>()?;
    let mut counterexamples = Vec::new();
    for r in &rows {
        let lam_norm = r.lambda.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if r.friedrichs && lam_norm > DOMAIN_TOL {
            counterexamples.push(format!("{}: Friedrichs member with |Λ| = {lam_norm:.3e}", r.label));
        }
        if let (Some(d), Some(t)) = (r.route_discrepancy, r.route_tolerance) {
            if d > (10.0 * t).max(1e-6 * (1.0 + lam_norm)) {
                counterexamples.push(format!("{}: routes disagree by {d:.3e}", r.label));
            }
        }
    }
    let c_eps: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| {
            let c = rows
                .iter()
                .filter(|r| r.norm_sq > 0.0)
                .map(|r| (r.lambda.iter().map(|z| z.norm_sqr()).sum::<f64>() - e * r.form) / r.norm_sq)
                .fold(0.0, f64::max);
            (e, c)
        })
        .collect();
    for &(e, c) in &c_eps {
        if !c.is_finite() {
            counterexamples.push(format!("no finite C_ε for ε = {e}"));
        }
    }
    let consistent = counterexamples.is_empty();
    Ok(BoundaryPairReport { rows, c_eps, counterexamples, consistent })
}

/// Row-major complex entries for reports.
pub fn matrix_rows(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub a: Vec<Vec<C64>>,
    pub b: Vec<Vec<C64>>,
    pub mul_dimension: usize,
    pub theta_full: Vec<Vec<C64>>,
    pub c_theta: Option<f64>,
    pub operator_residual: f64,
    pub penrose_defects: [f64; 4],
    pub near_threshold: bool,
}

pub fn relation_report(rel: &SelfAdjointRelation) -> RelationReport {
    RelationReport {
        a: matrix_rows(&rel.pair.a),
        b: matrix_rows(&rel.pair.b),
        mul_dimension: rel.mul_basis.len(),
        theta_full: matrix_rows(&rel.theta_full),
        c_theta: rel.c_theta,
        operator_residual: rel.operator_residual(),
        penrose_defects: penrose_defects(&rel.pair.a),
        near_threshold: rel.near_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvalues::patched_pair;
    use crate::forms::q_decorated;
    use crate::problem::catalog;
    use crate::solutions::BasisOpts;
    use crate::testfns::Analytic;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(m: &CMat, rows: &[[f64; 2]; 2]) -> f64 {
        let mut d = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((m[(i, j)] - real(rows[i][j])).norm());
            }
        }
        d
    }

    #[test]
    fn separated_operator_part_is_diagonal_cotangent() {
        let (a, b) = (0.7, 2.2);
        let rel = decompose(&pair_for_extension(&ExtensionSpec::Separated { alpha: a, beta: b }).unwrap());
        assert!(rel.mul_basis.is_empty());
        let cot = |t: f64| t.cos() / t.sin();
        assert!(close(&rel.theta_full, &[[-cot(a), 0.0], [0.0, cot(b)]]) < 1e-12);
        let n = decompose(&pair_for_extension(&ExtensionSpec::Separated { alpha: PI / 2.0, beta: PI / 2.0 }).unwrap());
        assert!(close(&n.theta_full, &[[0.0, 0.0], [0.0, 0.0]]) < 1e-15);
        let f = decompose(&pair_for_extension(&ExtensionSpec::Separated { alpha: 0.0, beta: 0.0 }).unwrap());
        assert_eq!(f.mul_basis.len(), 2);
        let zero = CVec::zeros(2);
        let any = CVec::from_vec(vec![real(1.3), C64::new(0.2, -4.0)]);
        assert!(relation_membership(&f.pair, &zero, &any));
        assert!(!relation_membership(&f.pair, &any, &zero));
    }

    #[test]
    fn zero_pair_is_rank_deficient() {
        let z = CMat::zeros(2, 2);
        assert!(matches!(validate_pair(z.clone(), z), Err(TripletsError::RankDeficient { rank: 0, n: 2 })));
        let a = CMat::identity(2, 2);
        let b = CMat::from_row_slice(2, 2, &[real(0.0), real(1.0), real(0.0), real(0.0)]);
        assert!(matches!(validate_pair(a, b), Err(TripletsError::NotSelfAdjointPair { .. })));
    }

    #[test]
    fn coupled_with_vanishing_r12_has_scalar_part() {
        let r = 0.8;
        let rel = decompose(&pair_for_extension(&ExtensionSpec::Coupled { phi: 0.0, r: [[1.0, 0.0], [r, 1.0]] }).unwrap());
        assert_eq!(rel.mul_basis.len(), 1);
        assert_abs_diff_eq!(rel.c_theta.unwrap(), -r / 2.0, epsilon = 1e-12);
        assert!(rel.operator_residual() < 1e-12);
    }

    #[test]
    fn one_dimensional_relation() {
        let g = 0.9;
        let rel = decompose(&pair_for_extension(&ExtensionSpec::OneLc { alpha: g, endpoint: End::A }).unwrap());
        assert_abs_diff_eq!(rel.theta_full[(0, 0)].re, -g.cos() / g.sin(), epsilon = 1e-12);
        let f = decompose(&pair_for_extension(&ExtensionSpec::OneLc { alpha: 0.0, endpoint: End::B }).unwrap());
        assert_eq!(f.mul_basis.len(), 1);
        assert!(pair_for_extension(&ExtensionSpec::LpLp).is_err());
    }

    proptest! {
        #[test]
        fn coupled_operator_part_matches_closed_form(phi in 0.0..3.1f64, r11 in 0.3..3.0f64, r12 in 0.2..2.0f64, r21 in -2.0..2.0f64) {
            let r22 = (1.0 + r12 * r21) / r11;
            let rel = decompose(&pair_for_extension(&ExtensionSpec::Coupled { phi, r: [[r11, r12], [r21, r22]] }).unwrap());
            let e = C64::from_polar(1.0, phi);
            let expect = CMat::from_row_slice(2, 2, &[real(r11), -e.conj(), -e, real(r22)]) * real(-1.0 / r12);
            prop_assert!(norm(&(&rel.theta_full - expect)) < 1e-10 * (1.0 + 1.0 / r12));
            prop_assert!(penrose_defects(&rel.pair.a).iter().all(|d| *d < 1e-12));
        }
    }

    #[test]
    fn triplet_green_vanishes_for_patched_pair_on_legendre() {
        let spec = catalog("legendre").unwrap();
        let pair = BasisPair::new(&spec, &BasisOpts::default()).unwrap();
        let pp = patched_pair(&spec, Some(&pair.a), Some(&pair.b)).unwrap();
        let p = Analytic::polynomial(&spec, &[0.3, -1.0, 2.0]);
        let res = triplet_green_residual(&spec, &pair, &pp.v1, &p).unwrap();
        assert!(res.pairing_difference.norm() > 1e-3, "{res:?}");
        assert!(res.residual.norm() < 1e-6 * (1.0 + res.pairing_difference.norm()), "{res:?}");
        let same = triplet_green_residual(&spec, &pair, &p, &p).unwrap();
        assert!(same.residual.norm() < 1e-8);
    }

    #[test]
    fn relation_form_matches_decorated_form() {
        let spec = catalog("regular_dirichlet_pi").unwrap();
        let pair = BasisPair::new(&spec, &BasisOpts::default()).unwrap();
        let w = FormWindow::default_for(&pair);
        let f = Analytic::polynomial(&spec, &[1.0, 0.5]);
        let g = Analytic::polynomial(&spec, &[-0.2, 0.1, 0.3]);
        let ext = ExtensionSpec::Separated { alpha: 0.4, beta: 1.9 };
        let sa = pair_for_extension(&ext).unwrap();
        let a = form_from_relation(&spec, &pair, w, &sa, &f, &g).unwrap().value;
        let b = q_decorated(&spec, &pair, w, &ext, &f, &g).unwrap().value;
        assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()));
        let dir = pair_for_extension(&ExtensionSpec::Separated { alpha: 0.0, beta: 0.0 }).unwrap();
        assert!(matches!(
            form_from_relation(&spec, &pair, w, &dir, &f, &g),
            Err(TripletsError::DomainConstraintViolated(_))
        ));
    }

    #[test]
    fn boundary_pair_on_the_regular_problem() {
        let spec = catalog("regular_dirichlet_pi").unwrap();
        let pair = BasisPair::new(&spec, &BasisOpts::default()).unwrap();
        let w = FormWindow::default_for(&pair);
        let pp = patched_pair(&spec, Some(&pair.a), Some(&pair.b)).unwrap();
        let family = vec![
            FamilyMember { label: "sin".into(), f: Arc::new(Analytic::new(&spec, crate::expr::Expr::parse("sin(x)").unwrap())), friedrichs: true },
            FamilyMember { label: "v1".into(), f: Arc::new(pp.v1.clone()), friedrichs: false },
            FamilyMember { label: "bump".into(), f: Arc::new(Analytic::bump(&spec, 1.5, 0.5)), friedrichs: true },
        ];
        let rep = boundary_pair_check(&spec, &pair, w, &[1.0, 0.1], &family).unwrap();
        assert!(rep.consistent, "{rep:?}");
        let v1 = &rep.rows[1].lambda;
        assert_abs_diff_eq!(v1[0].re, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v1[1].re, 1.0, epsilon = 1e-8);
        assert!(rep.c_eps.iter().all(|(_, c)| c.is_finite() && *c > 0.0));
    }
}
