//! Stability constants: upper bounds derived from dichotomy data, sharper
//! planar bounds for autonomous expansions, and closed-form lower bounds
//! with a sweep that searches for the worst case.
//!
//! All constants refer to the same contract: a residual of size `eps` in
//! `L^q` admits a true solution within `L eps` in `L^p`, where the
//! exponents are tied by `1/p + 1 = 1/q + 1/r`.

use num_complex::Complex64;
use serde::Serialize;

use crate::defaults::{
    DELTA_MARGIN, GAMMA_GRID, GAMMA_RANGE, SWEEP_REFINEMENTS, U_PHASES, U_RADII,
};
use crate::dichotomy::{DichotomyKind, DichotomySpec};
use crate::error::{Error, Result};
use crate::exponent::{ConjugateTriple, Exponent};
use crate::linear::{
    identity, jordan_decompose, max_vector_norm, CMatrix, CVector, CanonicalCase,
};
use crate::norms::young_factor;

fn cvec_pairs<S>(v: &CVector, ser: S) -> std::result::Result<S::Ok, S::Error>
where
    S: serde::Serializer,
{
    let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
    serde::Serialize::serialize(&pairs, ser)
}

/// Upper stability constant obtained from dichotomy data.
#[derive(Debug, Clone, Serialize)]
pub struct UpperConstant {
    /// The constant `L`.
    pub value: f64,
    /// Contraction factor of the fixed-point iteration behind the bound.
    pub kappa: f64,
    /// Largest admissible Lipschitz bound for this dichotomy.
    pub smallness_limit: f64,
}

/// Upper stability constant for a system with a dichotomy and a
/// nonlinearity with Lipschitz bound `c`.
///
/// A general dichotomy needs `c < lambda / (2 D)` and yields
/// `L = 2 D k_r / (1 - 2 c D / lambda)`; a pure contraction or expansion
/// drops both factors of two. Here `k_r` is the `L^r` norm of the decay
/// kernel `e^{-lambda t}`.
pub fn upper_hus_constant(
    dichotomy: &DichotomySpec,
    c: f64,
    triple: &ConjugateTriple,
) -> Result<UpperConstant> {
    if !(c >= 0.0) {
        return Err(Error::invalid("Lipschitz bound must be nonnegative"));
    }
    let d = dichotomy.constant;
    let lambda = dichotomy.rate;
    let (mult, kind) = match dichotomy.kind() {
        DichotomyKind::General => (2.0, "general"),
        DichotomyKind::Contraction => (1.0, "contraction"),
        DichotomyKind::Expansion => (1.0, "expansion"),
    };
    let smallness_limit = lambda / (mult * d);
    if c >= smallness_limit {
        return Err(Error::SmallnessViolation {
            c,
            limit: smallness_limit,
            kind: kind.into(),
        });
    }
    let kappa = mult * c * d / lambda;
    let value = mult * d * young_factor(lambda, triple.r) / (1.0 - kappa);
    Ok(UpperConstant {
        value,
        kappa,
        smallness_limit,
    })
}

/// Which canonical form a planar constant was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralCase {
    Diagonal,
    JordanBlock,
}

/// Upper stability constant for a planar autonomous expansion.
#[derive(Debug, Clone, Serialize)]
pub struct PlanarUpperConstant {
    pub value: f64,
    pub case: SpectralCase,
    /// Basis conditioning `|M| |M^{-1}|` entering the constant.
    pub conditioning: f64,
    /// Shift used in the defective case, if any.
    pub delta: Option<f64>,
    /// Smallest real part of the spectrum.
    pub slowest_rate: f64,
    pub ill_conditioned: bool,
}

/// The defective-case factor `(e^{delta - 1} / delta) k_r(nu_re - delta)`.
pub fn block_delta_factor(delta: f64, nu_re: f64, r: Exponent) -> f64 {
    ((delta - 1.0).exp() / delta) * young_factor(nu_re - delta, r)
}

/// Minimizes the defective-case factor over `delta` in
/// `(0, min(1, nu_re))`, returning the minimizer and its value.
///
/// The factor is log-convex in `delta`, so a golden-section search finds
/// the global minimum; endpoint minima (for example `r = infinity`, where
/// the factor decreases all the way to the right edge) end up a margin
/// inside the open interval.
pub fn optimize_block_delta(nu_re: f64, r: Exponent) -> (f64, f64) {
    let edge = nu_re.min(1.0);
    let margin = DELTA_MARGIN * edge;
    let mut lo = margin;
    let mut hi = edge - margin;
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = block_delta_factor(x1, nu_re, r);
    let mut f2 = block_delta_factor(x2, nu_re, r);
    for _ in 0..120 {
        if hi - lo <= 1e-12 * hi.max(1e-12) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = block_delta_factor(x1, nu_re, r);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = block_delta_factor(x2, nu_re, r);
        }
    }
    let delta = 0.5 * (lo + hi);
    (delta, block_delta_factor(delta, nu_re, r))
}

/// Upper stability constant for `x' = A x` with a 2x2 matrix whose
/// spectrum lies strictly in the right half plane, measured in maximum
/// norms on both sides.
///
/// Diagonalizable systems give `|M| |M^{-1}| k_r(min Re mu)`. A defective
/// eigenvalue `nu` costs an extra factor minimized over the shift
/// `delta`; pass `delta` to pin it, or `None` to optimize. The shift is
/// ignored for diagonalizable input.
pub fn planar_upper_constant(
    a: &CMatrix,
    triple: &ConjugateTriple,
    delta: Option<f64>,
) -> Result<PlanarUpperConstant> {
    let jf = jordan_decompose(a)?;
    let eigs = jf.eigenvalues();
    if eigs.iter().any(|mu| mu.re <= 0.0) {
        return Err(Error::NotExpansion(format!(
            "spectrum {{{}, {}}} is not strictly in the right half plane",
            eigs[0], eigs[1]
        )));
    }
    let conditioning = jf.conditioning;
    match jf.case {
        CanonicalCase::Diagonal { mu1, mu2 } => {
            let slowest = mu1.re.min(mu2.re);
            Ok(PlanarUpperConstant {
                value: conditioning * young_factor(slowest, triple.r),
                case: SpectralCase::Diagonal,
                conditioning,
                delta: None,
                slowest_rate: slowest,
                ill_conditioned: jf.is_ill_conditioned(),
            })
        }
        CanonicalCase::JordanBlock { nu } => {
            let edge = nu.re.min(1.0);
            let (delta, factor) = match delta {
                Some(d) => {
                    if !(d > 0.0 && d < edge) {
                        return Err(Error::invalid(format!(
                            "shift {d} outside the admissible interval (0, {edge})"
                        )));
                    }
                    (d, block_delta_factor(d, nu.re, triple.r))
                }
                None => optimize_block_delta(nu.re, triple.r),
            };
            Ok(PlanarUpperConstant {
                value: conditioning * factor,
                case: SpectralCase::JordanBlock,
                conditioning,
                delta: Some(delta),
                slowest_rate: nu.re,
                ill_conditioned: jf.is_ill_conditioned(),
            })
        }
    }
}

fn exponent_scale(e: Exponent, gamma: f64) -> f64 {
    // (e gamma)^{1/e}, read as 1 when e is infinite
    match e.as_finite() {
        Some(v) => e.root(v * gamma),
        None => 1.0,
    }
}

fn planar_inverse(a: &CMatrix) -> Result<CMatrix> {
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let scale = crate::linear::op_norm_inf(a).max(1e-300);
    let tol = 1e-12 * scale * scale;
    if det.norm() <= tol {
        return Err(Error::SingularMatrix {
            det: det.norm(),
            tol,
        });
    }
    let inv_det = Complex64::new(1.0, 0.0) / det;
    Ok(CMatrix::from_row_slice(
        2,
        2,
        &[
            a[(1, 1)] * inv_det,
            -a[(0, 1)] * inv_det,
            -a[(1, 0)] * inv_det,
            a[(0, 0)] * inv_det,
        ],
    ))
}

fn require_planar_expansion(a: &CMatrix) -> Result<CMatrix> {
    let jf = jordan_decompose(a)?;
    let eigs = jf.eigenvalues();
    if eigs.iter().any(|mu| mu.re <= 0.0) {
        return Err(Error::NotExpansion(format!(
            "spectrum {{{}, {}}} is not strictly in the right half plane",
            eigs[0], eigs[1]
        )));
    }
    planar_inverse(a)
}

fn lower_bound_value(
    a_inv: &CMatrix,
    u: &CVector,
    gamma: f64,
    triple: &ConjugateTriple,
) -> f64 {
    let numerator = max_vector_norm(&(a_inv * u)) * exponent_scale(triple.q, gamma);
    let shifted = (a_inv * Complex64::new(gamma, 0.0) + identity(2)) * u;
    let denominator = max_vector_norm(&shifted) * exponent_scale(triple.p, gamma);
    numerator / denominator
}

/// Lower bound on every admissible stability constant of a planar
/// autonomous expansion, from the direction `u` (with `|u| = 1` in the
/// maximum norm) and decay rate `gamma > 0` of a family of explicit
/// pseudosolutions.
pub fn planar_lower_bound(
    a: &CMatrix,
    u: &CVector,
    gamma: f64,
    triple: &ConjugateTriple,
) -> Result<f64> {
    if u.len() != 2 {
        return Err(Error::invalid("direction must be two dimensional"));
    }
    if (max_vector_norm(u) - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("direction must have unit maximum norm"));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("decay rate gamma must be positive"));
    }
    let a_inv = require_planar_expansion(a)?;
    Ok(lower_bound_value(&a_inv, u, gamma, triple))
}

/// Search ranges and resolutions for the lower-bound sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_count: usize,
    pub phases: usize,
    pub radii: usize,
    pub refinements: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            gamma_min: GAMMA_RANGE.0,
            gamma_max: GAMMA_RANGE.1,
            gamma_count: GAMMA_GRID,
            phases: U_PHASES,
            radii: U_RADII,
            refinements: SWEEP_REFINEMENTS,
        }
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if !(self.gamma_min > 0.0 && self.gamma_max >= self.gamma_min) {
            return Err(Error::invalid("sweep needs 0 < gamma_min <= gamma_max"));
        }
        if self.gamma_count < 2 || self.phases == 0 || self.radii < 2 {
            return Err(Error::invalid(
                "sweep needs at least two gamma nodes, one phase, two radii",
            ));
        }
        Ok(())
    }
}

/// Result of sweeping the lower bound over directions and decay rates.
#[derive(Debug, Clone, Serialize)]
pub struct LowerSweep {
    /// Largest lower bound found.
    pub value: f64,
    /// Decay rate attaining it.
    pub gamma: f64,
    /// Direction attaining it.
    #[serde(serialize_with = "cvec_pairs")]
    pub u: CVector,
    pub evaluations: usize,
}

fn unit_directions(phases: usize, radii: usize) -> Vec<CVector> {
    let mut out = Vec::new();
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    for k in 0..2usize {
        for ri in 0..radii {
            let rho = ri as f64 / (radii - 1) as f64;
            let ws: Vec<Complex64> = if rho == 0.0 {
                vec![zero]
            } else {
                (0..phases)
                    .map(|j| {
                        let phi = 2.0 * std::f64::consts::PI * j as f64 / phases as f64;
                        Complex64::from_polar(rho, phi)
                    })
                    .collect()
            };
            for w in ws {
                let mut u = CVector::from_vec(vec![zero, zero]);
                u[k] = one;
                u[1 - k] = w;
                out.push(u);
            }
        }
    }
    out
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    (0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            lo * (hi / lo).powf(t)
        })
        .collect()
}

/// Sweeps `planar_lower_bound` over a grid of unit directions and a
/// log-spaced range of decay rates, refining the rate range around the
/// incumbent. The configured range is never left, so a maximum on its
/// boundary stays reachable.
pub fn planar_lower_sweep(
    a: &CMatrix,
    triple: &ConjugateTriple,
    config: &SweepConfig,
) -> Result<LowerSweep> {
    config.validate()?;
    let a_inv = require_planar_expansion(a)?;
    let directions = unit_directions(config.phases, config.radii);
    let mut evaluations = 0usize;
    let mut best_value = f64::NEG_INFINITY;
    let mut best_gamma = config.gamma_min;
    let mut best_u = directions[0].clone();
    let mut lo = config.gamma_min;
    let mut hi = config.gamma_max;
    for _pass in 0..=config.refinements {
        for &gamma in &log_grid(lo, hi, config.gamma_count) {
            for u in &directions {
                let value = lower_bound_value(&a_inv, u, gamma, triple);
                evaluations += 1;
                if value > best_value {
                    best_value = value;
                    best_gamma = gamma;
                    best_u = u.clone();
                }
            }
        }
        let step = if hi > lo {
            (hi / lo).powf(1.0 / (config.gamma_count - 1) as f64)
        } else {
            1.0
        };
        lo = (best_gamma / step).max(config.gamma_min);
        hi = (best_gamma * step).min(config.gamma_max);
    }
    Ok(LowerSweep {
        value: best_value,
        gamma: best_gamma,
        u: best_u,
        evaluations,
    })
}

/// Upper and lower stability constants for a planar autonomous expansion
/// and how far apart they are.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub upper: PlanarUpperConstant,
    pub lower: LowerSweep,
    /// `lower / upper`, at most one; close to one means nearly sharp.
    pub ratio: f64,
}

/// Computes both planar constants and their ratio.
pub fn constant_gap(
    a: &CMatrix,
    triple: &ConjugateTriple,
    delta: Option<f64>,
    config: &SweepConfig,
) -> Result<GapReport> {
    let upper = planar_upper_constant(a, triple, delta)?;
    let lower = planar_lower_sweep(a, triple, config)?;
    let ratio = lower.value / upper.value;
    Ok(GapReport {
        upper,
        lower,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::ConjugateTriple;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(a: f64, b: f64) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(a), c(0.0), c(0.0), c(b)])
    }

    #[test]
    fn upper_constant_basic_formulas() {
        let triple = ConjugateTriple::from_f64(2.0, 2.0).unwrap();
        // r = 1, young factor (1 / (2 * 1))^1 = 0.5
        let general = DichotomySpec::new(
            CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]),
            1.0,
            2.0,
        )
        .unwrap();
        let u = upper_hus_constant(&general, 0.0, &triple).unwrap();
        assert!((u.value - 1.0).abs() < 1e-14);
        assert_eq!(u.kappa, 0.0);
        let contraction = DichotomySpec::contraction(2, 1.0, 2.0).unwrap();
        let u = upper_hus_constant(&contraction, 0.0, &triple).unwrap();
        assert!((u.value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn smallness_limit_is_enforced() {
        let triple = ConjugateTriple::from_f64(2.0, 2.0).unwrap();
        let contraction = DichotomySpec::contraction(1, 1.0, 1.0).unwrap();
        assert!(upper_hus_constant(&contraction, 0.99, &triple).is_ok());
        let err = upper_hus_constant(&contraction, 1.0, &triple).unwrap_err();
        assert!(matches!(err, Error::SmallnessViolation { .. }));
        // general dichotomies halve the admissible range
        let general = DichotomySpec::new(
            CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]),
            1.0,
            1.0,
        )
        .unwrap();
        assert!(upper_hus_constant(&general, 0.49, &triple).is_ok());
        assert!(upper_hus_constant(&general, 0.51, &triple).is_err());
    }

    #[test]
    fn kappa_scales_the_constant() {
        let triple = ConjugateTriple::from_f64(2.0, 2.0).unwrap();
        let contraction = DichotomySpec::contraction(1, 1.0, 2.0).unwrap();
        let base = upper_hus_constant(&contraction, 0.0, &triple).unwrap();
        let tight = upper_hus_constant(&contraction, 1.0, &triple).unwrap();
        assert!((tight.kappa - 0.5).abs() < 1e-14);
        assert!((tight.value - base.value / 0.5).abs() < 1e-12);
    }

    #[test]
    fn planar_constant_for_diagonal_sup_norms() {
        let triple = ConjugateTriple::from_f64(f64::INFINITY, f64::INFINITY).unwrap();
        let out = planar_upper_constant(&diag(1.0, 3.0), &triple, None).unwrap();
        assert_eq!(out.case, SpectralCase::Diagonal);
        assert_eq!(out.value, 1.0);
        assert_eq!(out.delta, None);
        assert_eq!(out.slowest_rate, 1.0);
    }

    #[test]
    fn planar_constant_rejects_non_expansion() {
        let triple = ConjugateTriple::from_f64(2.0, 2.0).unwrap();
        let err = planar_upper_constant(&diag(2.0, -1.0), &triple, None).unwrap_err();
        assert!(matches!(err, Error::NotExpansion(_)));
    }

    #[test]
    fn optimized_shift_matches_stationarity_condition() {
        // for nu = 2, r = 1 the minimizer solves delta^2 - 4 delta + 2 = 0;
        // comparison-based search localizes a flat minimum to about sqrt(eps)
        let (delta, factor) = optimize_block_delta(2.0, Exponent::finite(1.0).unwrap());
        let exact = 2.0 - 2.0f64.sqrt();
        assert!((delta - exact).abs() < 5e-7, "delta = {delta}");
        assert!((factor - block_delta_factor(exact, 2.0, Exponent::finite(1.0).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn optimized_shift_against_dense_scan() {
        let r = Exponent::finite(1.0).unwrap();
        let (delta, factor) = optimize_block_delta(2.0, r);
        let mut scan_best = f64::INFINITY;
        let mut scan_delta = 0.0;
        for k in 1..100_000 {
            let d = k as f64 / 100_000.0;
            let f = block_delta_factor(d, 2.0, r);
            if f < scan_best {
                scan_best = f;
                scan_delta = d;
            }
        }
        assert!((delta - scan_delta).abs() < 1e-4);
        assert!((factor - scan_best).abs() < 1e-8, "{factor} vs {scan_best}");
        assert!(factor <= scan_best + 1e-15);
    }

    #[test]
    fn infinite_r_pushes_the_shift_to_the_edge() {
        let (delta, factor) = optimize_block_delta(0.5, Exponent::Infinity);
        assert!((delta - 0.5).abs() < 1e-6);
        let edge_value = (0.5f64 - 1.0).exp() / 0.5;
        assert!((factor - edge_value).abs() < 1e-6);
    }

    #[test]
    fn planar_constant_for_jordan_block() {
        let a = CMatrix::from_row_slice(2, 2, &[c(2.0), c(1.0), c(0.0), c(2.0)]);
        let triple = ConjugateTriple::from_f64(f64::INFINITY, 1.0).unwrap();
        // r = infinity here, so the young factor is one
        let out = planar_upper_constant(&a, &triple, None).unwrap();
        assert_eq!(out.case, SpectralCase::JordanBlock);
        assert!(out.delta.is_some());
        let d = out.delta.unwrap();
        assert!((d - 1.0).abs() < 1e-6, "delta = {d}");
        assert!((out.value - 1.0).abs() < 1e-6);
        let pinned = planar_upper_constant(&a, &triple, Some(0.5)).unwrap();
        assert!(pinned.value >= out.value - 1e-12);
        assert!(planar_upper_constant(&a, &triple, Some(1.5)).is_err());
    }

    #[test]
    fn lower_bound_closed_form_for_diagonal() {
        // u along the slow eigendirection gives 1 / (1 + gamma) when p = q
        let a = diag(1.0, 3.0);
        let u = CVector::from_vec(vec![c(1.0), c(0.0)]);
        for &(p, q) in &[(2.0, 2.0), (f64::INFINITY, f64::INFINITY)] {
            let triple = ConjugateTriple::from_f64(p, q).unwrap();
            for &gamma in &[0.1, 1.0, 10.0] {
                let v = planar_lower_bound(&a, &u, gamma, &triple).unwrap();
                assert!((v - 1.0 / (1.0 + gamma)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lower_bound_validates_input() {
        let a = diag(1.0, 3.0);
        let triple = ConjugateTriple::from_f64(2.0, 2.0).unwrap();
        let long = CVector::from_vec(vec![c(2.0), c(0.0)]);
        assert!(planar_lower_bound(&a, &long, 1.0, &triple).is_err());
        let u = CVector::from_vec(vec![c(1.0), c(0.0)]);
        assert!(planar_lower_bound(&a, &u, 0.0, &triple).is_err());
        assert!(matches!(
            planar_lower_bound(&diag(2.0, -1.0), &u, 1.0, &triple),
            Err(Error::NotExpansion(_))
        ));
    }

    #[test]
    fn sweep_approaches_the_upper_constant_for_sup_norms() {
        let a = diag(1.0, 3.0);
        let triple = ConjugateTriple::from_f64(f64::INFINITY, f64::INFINITY).unwrap();
        let config = SweepConfig {
            gamma_min: 1e-3,
            ..SweepConfig::default()
        };
        let report = constant_gap(&a, &triple, None, &config).unwrap();
        assert_eq!(report.upper.value, 1.0);
        assert!(report.lower.value >= 0.999, "lower = {}", report.lower.value);
        assert!(report.ratio <= 1.0 + 1e-12);
        assert!((report.lower.gamma - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn lower_bound_never_exceeds_the_planar_constant() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.5), c(0.7), c(0.2), c(2.5)]);
        for &(p, q) in &[(2.0, 2.0), (4.0, 2.0), (f64::INFINITY, 1.0), (3.0, 1.5)] {
            let triple = ConjugateTriple::from_f64(p, q).unwrap();
            let report = constant_gap(&a, &triple, None, &SweepConfig::default()).unwrap();
            assert!(
                report.lower.value <= report.upper.value * (1.0 + 1e-9),
                "p = {p}, q = {q}: lower {} > upper {}",
                report.lower.value,
                report.upper.value
            );
        }
    }
}
