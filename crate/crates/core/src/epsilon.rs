//! The ε metric: radius of the largest origin-centered ball inside the convex
//! hull of the basis wrenches.
//!
//! [`epsilon_exact`] enumerates candidate facets (every d-subset of columns
//! spanning a supporting hyperplane). [`epsilon_sampled`] minimizes the
//! support function over random unit directions; since every direction
//! yields a valid supporting half-space, the sampled value is an *upper*
//! bound on ε and must never be used to certify robustness.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::min_weight::solve_min_weight_matrix;
use crate::wrench::WrenchSet;
use crate::{GraspError, Result};

pub const MAX_EXACT_WRENCHES: usize = 24;
const FACET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum EpsilonMethod {
    ExactFacet,
    Sampled,
}

#[derive(Debug, Clone)]
pub struct EpsilonResult {
    pub epsilon: f64,
    pub method: EpsilonMethod,
    /// Unit direction achieving the minimum support value.
    pub witness: DVector<f64>,
}

/// Exact ε for a wrench set; computes `ℓ*` to decide force closure.
pub fn epsilon_exact(ws: &WrenchSet) -> Result<EpsilonResult> {
    let ell = solve_min_weight_matrix(&ws.matrix)?.ell;
    epsilon_exact_points(&ws.matrix, ell)
}

/// Exact ε for `d × m` points given their min-weight value `ell`.
pub fn epsilon_exact_points(points: &DMatrix<f64>, ell: f64) -> Result<EpsilonResult> {
    let d = points.nrows();
    let m = points.ncols();
    if m > MAX_EXACT_WRENCHES {
        return Err(GraspError::TooManyWrenches { max: MAX_EXACT_WRENCHES, got: m });
    }
    let zero = EpsilonResult { epsilon: 0.0, method: EpsilonMethod::ExactFacet, witness: DVector::zeros(d) };
    if ell <= 0.0 || m < d {
        return Ok(zero);
    }
    let scale = points.amax().max(1.0);
    // Ties resolve to the lowest subset index so the witness is reproducible.
    let best = combinations(m, d)
        .par_iter()
        .enumerate()
        .filter_map(|(idx, subset)| facet_distance(points, subset, scale).map(|(e, n)| (e, idx, n)))
        .reduce_with(|a, b| if (b.0, b.1) < (a.0, a.1) { b } else { a });
    Ok(match best {
        Some((eps, _, normal)) => EpsilonResult { epsilon: eps, method: EpsilonMethod::ExactFacet, witness: normal },
        None => zero,
    })
}

/// Distance from the origin to the hyperplane through `subset`, if that
/// hyperplane supports the point set.
fn facet_distance(points: &DMatrix<f64>, subset: &[usize], scale: f64) -> Option<(f64, DVector<f64>)> {
    let d = points.nrows();
    let base = points.column(subset[0]);
    let mut diffs = DMatrix::zeros(d - 1, d);
    for (r, &j) in subset[1..].iter().enumerate() {
        let v = points.column(j) - base;
        diffs.row_mut(r).copy_from(&v.transpose());
    }
    // Generalized cross product of the d−1 difference vectors.
    let mut normal = DVector::zeros(d);
    for k in 0..d {
        let minor = diffs.clone().remove_column(k);
        let det = if d == 1 { 1.0 } else { minor.determinant() };
        normal[k] = if k % 2 == 0 { det } else { -det };
    }
    let len = normal.norm();
    if len <= 1e-12 * scale.powi(d as i32 - 1) {
        return None;
    }
    normal /= len;
    let mut offset = normal.dot(&base);
    let tol = FACET_TOL * scale;
    let mut above = false;
    let mut below = false;
    for j in 0..points.ncols() {
        let s = normal.dot(&points.column(j)) - offset;
        above |= s > tol;
        below |= s < -tol;
        if above && below {
            return None;
        }
    }
    if above {
        normal = -normal;
        offset = -offset;
    }
    Some((offset.max(0.0), normal))
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > m {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == m - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Sampled ε estimate: `max(0, min_d max_i W_i·d)` over `n_dirs` uniformly
/// random unit directions drawn from a seeded generator.
pub fn epsilon_sampled(ws: &WrenchSet, n_dirs: usize, seed: u64) -> EpsilonResult {
    epsilon_sampled_points(&ws.matrix, n_dirs, seed)
}

pub fn epsilon_sampled_points(points: &DMatrix<f64>, n_dirs: usize, seed: u64) -> EpsilonResult {
    let d = points.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts_t = points.transpose();
    let mut best = f64::INFINITY;
    let mut witness = DVector::zeros(d);
    let mut dir = DVector::zeros(d);
    for _ in 0..n_dirs {
        loop {
            for k in 0..d {
                dir[k] = StandardNormal.sample(&mut rng);
            }
            let len = dir.norm();
            if len > 1e-12 {
                dir /= len;
                break;
            }
        }
        let support = (&pts_t * &dir).max();
        if support < best {
            best = support;
            witness.copy_from(&dir);
        }
    }
    EpsilonResult { epsilon: best.max(0.0), method: EpsilonMethod::Sampled, witness }
}

/// Pearson correlation of paired samples.
pub fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (mx / n, my / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn slope(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (mx / n, my / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

#[derive(Debug, Clone)]
pub struct Correlation {
    pub pearson_r: f64,
    pub slope: f64,
    /// `(ℓ̄*, ε)` for each force-closure grasp.
    pub pairs: Vec<(f64, f64)>,
}

pub const MIN_CORRELATION_SAMPLES: usize = 30;

/// Pearson r between `ℓ̄*` and exact ε over the force-closure members of
/// `grasps`.
pub fn correlate_metrics(grasps: &[WrenchSet]) -> Result<Correlation> {
    let pairs: Vec<(f64, f64)> = grasps
        .par_iter()
        .filter_map(|ws| {
            let sol = solve_min_weight_matrix(&ws.matrix).ok()?;
            if sol.ell <= 0.0 {
                return None;
            }
            let eps = epsilon_exact_points(&ws.matrix, sol.ell).ok()?;
            Some((sol.ell_bar, eps.epsilon))
        })
        .collect();
    correlation_from_pairs(pairs)
}

pub fn correlation_from_pairs(pairs: Vec<(f64, f64)>) -> Result<Correlation> {
    if pairs.len() < MIN_CORRELATION_SAMPLES {
        return Err(GraspError::InsufficientSamples { needed: MIN_CORRELATION_SAMPLES, got: pairs.len() });
    }
    Ok(Correlation { pearson_r: pearson(&pairs), slope: slope(&pairs), pairs })
}

/// Formats like C's `%.{digits}g`: shortest of fixed or exponent notation
/// with trailing zeros removed.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, v))
    }
}

/// `lbar,eps` CSV with nine significant digits per value.
pub fn pairs_to_csv(pairs: &[(f64, f64)]) -> String {
    let mut out = String::from("lbar,eps\n");
    for (l, e) in pairs {
        out.push_str(&format_significant(*l, 9));
        out.push(',');
        out.push_str(&format_significant(*e, 9));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cross_polytope() -> DMatrix<f64> {
        let mut w = DMatrix::zeros(6, 12);
        for i in 0..6 {
            w[(i, 2 * i)] = 1.0;
            w[(i, 2 * i + 1)] = -1.0;
        }
        w
    }

    #[test]
    fn combination_count() {
        assert_eq!(combinations(16, 6).len(), 8008);
        assert_eq!(combinations(5, 5).len(), 1);
        assert_eq!(combinations(3, 4).len(), 0);
    }

    #[test]
    fn cross_polytope_exact() {
        let ws = WrenchSet::from_matrix(cross_polytope());
        let r = epsilon_exact(&ws).unwrap();
        assert!((r.epsilon - 1.0 / 6f64.sqrt()).abs() < 1e-12);
        assert!((r.witness.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outside_origin_gives_zero() {
        let mut w = cross_polytope();
        for j in 0..12 {
            w[(0, j)] += 5.0;
        }
        let ws = WrenchSet::from_matrix(w);
        assert_eq!(epsilon_exact(&ws).unwrap().epsilon, 0.0);
        assert_eq!(epsilon_sampled(&ws, 20_000, 1).epsilon, 0.0);
    }

    #[test]
    fn too_many_wrenches() {
        let w = DMatrix::from_fn(6, 25, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        assert!(matches!(epsilon_exact_points(&w, 0.01), Err(GraspError::TooManyWrenches { .. })));
    }

    #[test]
    fn single_direction_is_its_support_value() {
        let w = DMatrix::from_fn(3, 5, |i, j| (i as f64 - 1.0) * (j as f64 - 2.0) + 0.1 * j as f64);
        let r = epsilon_sampled_points(&w, 1, 42);
        let support = (w.transpose() * &r.witness).max();
        assert_eq!(r.epsilon, support.max(0.0));
    }

    /// `h(d) = ‖d‖∞` grows linearly away from the 64 minimizers on S⁵, so a
    /// million random directions still leave a gap of a few percent.
    #[test]
    fn cross_polytope_sampling_converges_from_above() {
        let ws = WrenchSet::from_matrix(cross_polytope());
        let exact = 1.0 / 6f64.sqrt();
        let rel = |n| (epsilon_sampled(&ws, n, 0).epsilon - exact) / exact;
        let (coarse, fine) = (rel(10_000), rel(1_000_000));
        assert!(fine >= 0.0 && fine < coarse, "{coarse} {fine}");
        assert!(fine < 0.05, "{fine}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let ws = WrenchSet::from_matrix(cross_polytope());
        let a = epsilon_sampled(&ws, 5000, 9);
        let b = epsilon_sampled(&ws, 5000, 9);
        assert_eq!(a.epsilon.to_bits(), b.epsilon.to_bits());
    }

    #[test]
    fn perfectly_linear_pairs() {
        let pairs: Vec<_> = (0..40).map(|i| (i as f64, 3.0 * i as f64 - 2.0)).collect();
        let c = correlation_from_pairs(pairs).unwrap();
        assert!((c.pearson_r - 1.0).abs() < 1e-12);
        assert!((c.slope - 3.0).abs() < 1e-12);
        assert!(matches!(correlation_from_pairs(vec![(0.0, 1.0); 5]), Err(GraspError::InsufficientSamples { .. })));
    }
    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(0.1, 9), "0.1");
        assert_eq!(format_significant(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_significant(123456789.0, 9), "123456789");
        assert_eq!(format_significant(1234567890.0, 9), "1.23456789e+09");
        assert_eq!(format_significant(0.0000123, 9), "1.23e-05");
        assert_eq!(format_significant(-2.5, 9), "-2.5");
        assert_eq!(pairs_to_csv(&[(0.5, 0.25)]), "lbar,eps\n0.5,0.25\n");
    }
}
