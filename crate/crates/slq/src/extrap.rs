//! Limits of slowly converging sequences.
//!
//! Sequences arrive sampled on geometric levels (distance to an endpoint
//! halved per level). Several accelerators are run side by side and the one
//! whose own estimates settle best is reported:
//!
//! * Richardson elimination with empirically detected ratios, repeated so
//!   that `k 2^-k` style remainders are also removed;
//! * iterated Aitken delta-squared;
//! * the harmonic transform, exact for remainders `C/(k + c)`, which is the
//!   logarithmic convergence seen at endpoints where the nonprincipal
//!   solution grows like a logarithm, followed by Richardson;
//! * polynomial extrapolation in a caller-supplied scale variable that
//!   vanishes at the limit point.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtrapError {
    #[error("sequence has {0} terms, at least 3 are needed")]
    TooShort(usize),
    #[error("sequence contains non-finite terms")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LastTerm,
    Richardson,
    Aitken,
    Harmonic,
    Polynomial,
    Rho,
}

/// Extrapolated limit with a heuristic error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: C64,
    pub error: f64,
    pub method: Method,
    /// Successive estimates of the chosen method, last one reported.
    pub trail: Vec<C64>,
}

fn spread(trail: &[C64]) -> f64 {
    match trail.len() {
        0 => f64::INFINITY,
        1 => f64::INFINITY,
        2 => (trail[1] - trail[0]).norm(),
        n => {
            let d1 = (trail[n - 1] - trail[n - 2]).norm();
            let d2 = (trail[n - 2] - trail[n - 3]).norm();
            d1.max(0.25 * d2)
        }
    }
}

/// One Aitken step on consecutive triples.
pub fn aitken_step(seq: &[C64]) -> Vec<C64> {
    transform_triples(seq, 1.0)
}

/// Harmonic step: exact for `s_k = t + C/(k + c)`.
pub fn harmonic_step(seq: &[C64]) -> Vec<C64> {
    transform_triples(seq, 2.0)
}

/// `s1 + w d0 d2 / (d0 + d2)` with `d0 = s0 - s1`, `d2 = s2 - s1`;
/// `w = 1` is Aitken, `w = 2` the harmonic transform.
fn transform_triples(seq: &[C64], w: f64) -> Vec<C64> {
    seq.windows(3)
        .map(|t| {
            let d0 = t[0] - t[1];
            let d2 = t[2] - t[1];
            let den = d0 + d2;
            let scale = d0.norm().max(d2.norm());
            if den.norm() <= 1e-300 || den.norm() <= 1e-14 * scale || scale == 0.0 {
                t[2]
            } else {
                t[1] + d0 * d2 * w / den
            }
        })
        .collect()
}

/// Even columns of Wynn's rho algorithm on the level index; exact for
/// remainders rational in the index, as produced by logarithmic terms.
pub fn rho_columns(seq: &[C64], max_order: usize) -> Vec<Vec<C64>> {
    let mut prev: Vec<C64> = vec![C64::new(0.0, 0.0); seq.len() + 1];
    let mut cur: Vec<C64> = seq.to_vec();
    let mut evens = Vec::new();
    for k in 1..=2 * max_order {
        if cur.len() < 2 {
            break;
        }
        let next: Vec<C64> = (0..cur.len() - 1)
            .map(|n| {
                let d = cur[n + 1] - cur[n];
                if d.norm() == 0.0 {
                    C64::new(f64::INFINITY, 0.0)
                } else {
                    prev[n + 1] + k as f64 / d
                }
            })
            .collect();
        prev = cur;
        cur = next;
        if k % 2 == 0 {
            evens.push(cur.clone());
        }
    }
    evens
}

/// Ratio of successive differences of a column, from the median over its
/// deeper half, snapped to a power of `sqrt 2` when close to one.
fn detect_ratio(col: &[C64]) -> Option<f64> {
    let diffs: Vec<C64> = col.windows(2).map(|w| w[1] - w[0]).collect();
    let mut ratios: Vec<f64> = diffs
        .windows(2)
        .filter(|w| w[1].norm() > 0.0 && w[0].norm() > 0.0)
        .map(|w| {
            let r = w[0] / w[1];
            if r.re.abs() >= 4.0 * r.im.abs() {
                r.re
            } else {
                f64::NAN
            }
        })
        .filter(|r| r.is_finite())
        .collect();
    if ratios.len() < 2 {
        return None;
    }
    let keep = (ratios.len() / 2).max(2).min(ratios.len());
    let mut tail = ratios.split_off(ratios.len() - keep);
    tail.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ratio = tail[tail.len() / 2];
    if !(ratio.abs() > 1.05 && ratio.abs() < 1e6) {
        return None;
    }
    let j = (2.0 * ratio.abs().log2()).round();
    let snapped = 2f64.powf(j / 2.0).copysign(ratio);
    Some(if (ratio / snapped - 1.0).abs() < 0.1 { snapped } else { ratio })
}

/// Richardson eliminations using ratios estimated from the data itself.
/// Each detected ratio is eliminated twice, which also removes remainders
/// of the form `k R^-k`. Returns the columns produced, the first being the
/// input.
pub fn richardson_columns(seq: &[C64], max_stages: usize) -> Vec<Vec<C64>> {
    let mut cols = vec![seq.to_vec()];
    let mut pending: Option<f64> = None;
    for _ in 0..max_stages {
        let col = cols.last().unwrap();
        if col.len() < 3 {
            break;
        }
        let ratio = match pending.take() {
            Some(r) => r,
            None => {
                if col.len() < 4 {
                    break;
                }
                match detect_ratio(col) {
                    Some(r) => {
                        pending = Some(r);
                        r
                    }
                    None => break,
                }
            }
        };
        let next: Vec<C64> = col.windows(2).map(|w| (w[1] * ratio - w[0]) / (ratio - 1.0)).collect();
        cols.push(next);
    }
    cols
}

fn check(seq: &[C64]) -> Result<(), ExtrapError> {
    if seq.len() < 3 {
        return Err(ExtrapError::TooShort(seq.len()));
    }
    if seq.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(ExtrapError::NonFinite);
    }
    Ok(())
}

fn candidate(method: Method, trail: Vec<C64>) -> Option<Estimate> {
    let value = *trail.last()?;
    if !value.re.is_finite() || !value.im.is_finite() {
        return None;
    }
    let error = spread(&trail);
    Some(Estimate { value, error, method, trail })
}

/// Most settled point of a trail whose deep end is dominated by amplified
/// rounding: the middle of the consecutive triple with the smallest spread.
fn settled_candidate(method: Method, trail: Vec<C64>) -> Option<Estimate> {
    let (i, err) = trail
        .windows(3)
        .enumerate()
        .filter(|(_, w)| w.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
        .map(|(i, w)| (i + 1, (w[1] - w[0]).norm().max((w[2] - w[1]).norm())))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))?;
    Some(Estimate { value: trail[i], error: err, method, trail: trail[..=i + 1].to_vec() })
}

/// Candidate estimates from every accelerator applied to a sequence sampled
/// on geometric levels.
pub fn candidates(seq: &[C64]) -> Result<Vec<Estimate>, ExtrapError> {
    check(seq)?;
    let mut out = Vec::new();
    out.extend(candidate(Method::LastTerm, seq.to_vec()));

    let cols = richardson_columns(seq, 8);
    if cols.len() > 1 {
        out.extend(candidate(Method::Richardson, cols.last().unwrap().clone()));
    }

    let mut col = seq.to_vec();
    let mut best_aitken: Option<Estimate> = None;
    while col.len() >= 3 {
        col = aitken_step(&col);
        if let Some(c) = candidate(Method::Aitken, col.clone()) {
            if best_aitken.as_ref().map_or(true, |b| c.error < b.error) {
                best_aitken = Some(c);
            }
        }
    }
    out.extend(best_aitken);

    for col in rho_columns(seq, 2) {
        let finite: Vec<C64> = col.into_iter().filter(|v| v.re.is_finite() && v.im.is_finite()).collect();
        if finite.len() >= 3 {
            // geometric remainder left by the halving levels
            let halved: Vec<C64> = finite.windows(2).map(|w| 2.0 * w[1] - w[0]).collect();
            out.extend(settled_candidate(Method::Rho, halved));
            out.extend(settled_candidate(Method::Rho, finite));
        }
    }

    let h = harmonic_step(seq);
    if h.len() >= 3 {
        let hc = richardson_columns(&h, 4);
        out.extend(candidate(Method::Harmonic, hc.last().unwrap().clone()));
    }
    Ok(out)
}

/// Best estimate of the limit of a sequence sampled on geometric levels.
pub fn limit(seq: &[C64]) -> Result<Estimate, ExtrapError> {
    let cands = candidates(seq)?;
    Ok(pick(cands))
}

fn pick(cands: Vec<Estimate>) -> Estimate {
    cands
        .into_iter()
        .min_by(|a, b| a.error.partial_cmp(&b.error).unwrap_or(std::cmp::Ordering::Equal))
        .expect("at least the last term is a candidate")
}

/// Neville extrapolation to `sigma = 0` of a polynomial through the points.
pub fn neville_at_zero(sigma: &[f64], vals: &[C64]) -> C64 {
    let n = sigma.len();
    let mut p: Vec<C64> = vals.to_vec();
    for m in 1..n {
        for i in 0..n - m {
            let (si, sj) = (sigma[i], sigma[i + m]);
            p[i] = (p[i + 1] * si - p[i] * sj) / (si - sj);
        }
    }
    p[0]
}

/// Limit at `sigma -> 0`, where `sigma` is a scale variable known to govern
/// the remainder to leading order. Geometric-level accelerators are tried as
/// well and the best settled estimate wins.
pub fn limit_in_variable(sigma: &[f64], seq: &[C64]) -> Result<Estimate, ExtrapError> {
    let mut cands = candidates(seq)?;
    for degree in 1..=3usize {
        let m = degree + 1;
        if seq.len() < m + 2 {
            continue;
        }
        let trail: Vec<C64> = (m..=seq.len())
            .map(|end| neville_at_zero(&sigma[end - m..end], &seq[end - m..end]))
            .collect();
        cands.extend(candidate(Method::Polynomial, trail));
    }
    Ok(pick(cands))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn real(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    #[test]
    fn rho_settles_logarithmic_remainder() {
        let seq: Vec<f64> = (0..26)
            .map(|k| 0.25 + 1.0 / (2.0 + 0.35 * k as f64) + 1e-3 * 0.5f64.powi(k))
            .collect();
        let est = limit(&real(&seq)).unwrap();
        assert_abs_diff_eq!(est.value.re, 0.25, epsilon = 1e-9);
    }

    #[test]
    fn richardson_removes_geometric_and_k_weighted_terms() {
        let seq: Vec<f64> = (0..14)
            .map(|k| {
                let h = 0.5f64.powi(k);
                3.0 + 2.0 * h + 0.7 * k as f64 * h + 0.3 * h * h
            })
            .collect();
        let est = limit(&real(&seq)).unwrap();
        assert_abs_diff_eq!(est.value.re, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn harmonic_is_exact_for_reciprocal_remainders() {
        let seq: Vec<f64> = (0..10).map(|k| 1.25 + 0.8 / (k as f64 + 2.3)).collect();
        let h = harmonic_step(&real(&seq));
        for v in h {
            assert_abs_diff_eq!(v.re, 1.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn logarithmic_sequence_with_geometric_noise() {
        // ratio of two solutions near an endpoint with logarithmic growth
        let seq: Vec<f64> = (0..26)
            .map(|k| {
                let d = 0.75 * 0.5f64.powi(k);
                let l = 0.5 * ((2.0 - d) / d).ln();
                (2.0 + 0.5 * l) / (1.0 + 3.0 * l)
            })
            .collect();
        let est = limit(&real(&seq)).unwrap();
        assert_abs_diff_eq!(est.value.re, 0.5 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn aitken_exact_for_pure_geometric() {
        let seq: Vec<f64> = (0..6).map(|k| 1.0 + 0.6f64.powi(k)).collect();
        for v in aitken_step(&real(&seq)) {
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn variable_extrapolation_linear_in_sigma() {
        let sigma: Vec<f64> = (0..12).map(|k| 1.0 / (1.0 + 0.35 * k as f64)).collect();
        let seq: Vec<C64> = sigma.iter().map(|s| C64::new(0.4 - 1.3 * s, 0.2 * s)).collect();
        let est = limit_in_variable(&sigma, &seq).unwrap();
        assert_abs_diff_eq!(est.value.re, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(est.value.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_sequence_is_its_own_limit() {
        let est = limit(&real(&[2.0; 8])).unwrap();
        assert_abs_diff_eq!(est.value.re, 2.0);
        assert_eq!(est.error, 0.0);
    }

    #[test]
    fn too_short_is_rejected() {
        assert_eq!(limit(&real(&[1.0, 2.0])), Err(ExtrapError::TooShort(2)));
    }
}
