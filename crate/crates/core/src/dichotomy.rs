//! Exponential dichotomies: splitting data `(D, lambda, P)` for a linear
//! system, empirical fitting of the sharpest rate from sampled evolution
//! operators, and verification of a claimed dichotomy against samples.
//!
//! A dichotomy with constant `D`, rate `lambda` and projection `P` asserts
//! `|T(t,s) P| <= D e^{-lambda (t-s)}` for `t >= s` and
//! `|T(t,s) (I-P)| <= D e^{-lambda (s-t)}` for `t <= s`, in the maximum
//! operator norm. `P = I` is a contraction, `P = 0` an expansion.

use serde::Serialize;

use crate::defaults::{
    DICHOTOMY_RATE_GRID, DICHOTOMY_RATE_MIN, PROJECTION_TOL,
};
use crate::error::{Error, Result};
use crate::linear::{evolution_operator, identity, op_norm_inf, CMatrix, LinearSystem};

/// Classification of the projection in a dichotomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DichotomyKind {
    General,
    Contraction,
    Expansion,
}

/// Dichotomy data `(D, lambda, P)` for a linear system.
#[derive(Debug, Clone)]
pub struct DichotomySpec {
    dim: usize,
    /// The constant `D >= 1`.
    pub constant: f64,
    /// The decay rate `lambda > 0`.
    pub rate: f64,
    projection: CMatrix,
    kind: DichotomyKind,
}

impl DichotomySpec {
    /// Builds dichotomy data, classifying the kind from the projection.
    pub fn new(projection: CMatrix, constant: f64, rate: f64) -> Result<Self> {
        let dim = projection.nrows();
        if dim == 0 || projection.ncols() != dim {
            return Err(Error::invalid("projection must be square and nonempty"));
        }
        if !(constant >= 1.0) {
            return Err(Error::invalid("dichotomy constant must be at least one"));
        }
        if !(rate > 0.0) {
            return Err(Error::invalid("dichotomy rate must be positive"));
        }
        let scale = op_norm_inf(&projection).max(1.0);
        let idem = op_norm_inf(&(&projection * &projection - &projection));
        if idem > PROJECTION_TOL * scale * scale {
            return Err(Error::invalid(format!(
                "projection is not idempotent: |P^2 - P| = {idem:.3e}"
            )));
        }
        let to_identity = op_norm_inf(&(&projection - identity(dim)));
        let to_zero = op_norm_inf(&projection);
        let kind = if to_identity <= PROJECTION_TOL {
            DichotomyKind::Contraction
        } else if to_zero <= PROJECTION_TOL {
            DichotomyKind::Expansion
        } else {
            DichotomyKind::General
        };
        Ok(DichotomySpec {
            dim,
            constant,
            rate,
            projection,
            kind,
        })
    }

    /// Dichotomy with `P = I`: the whole space decays forward in time.
    pub fn contraction(dim: usize, constant: f64, rate: f64) -> Result<Self> {
        DichotomySpec::new(identity(dim), constant, rate)
    }

    /// Dichotomy with `P = 0`: the whole space decays backward in time.
    pub fn expansion(dim: usize, constant: f64, rate: f64) -> Result<Self> {
        DichotomySpec::new(CMatrix::zeros(dim, dim), constant, rate)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> DichotomyKind {
        self.kind
    }

    pub fn projection(&self) -> &CMatrix {
        &self.projection
    }

    /// The complementary projection `I - P`.
    pub fn complement(&self) -> CMatrix {
        identity(self.dim) - &self.projection
    }
}

/// Outcome of checking claimed dichotomy data against sampled operators.
#[derive(Debug, Clone, Serialize)]
pub struct DichotomyCheck {
    pub pairs_checked: usize,
    pub forward_violations: usize,
    pub backward_violations: usize,
    /// Largest `|T P| - D e^{-lambda dt}` over forward pairs, if any apply.
    pub worst_forward_excess: Option<f64>,
    pub worst_backward_excess: Option<f64>,
    /// Largest `|T(t,s) P - P T(t,s)|` over sampled pairs.
    pub commutation_defect: f64,
    pub projection_defect: f64,
}

impl DichotomyCheck {
    pub fn violations(&self) -> usize {
        self.forward_violations + self.backward_violations
    }

    pub fn passes(&self) -> bool {
        self.violations() == 0
    }
}

/// `T(t_j, t_i)` for all `i <= j` (forward table) and `T(t_i, t_j)`
/// (backward table). Time-varying systems chain single-step integrations
/// instead of inverting long-time operators.
fn pair_tables(sys: &LinearSystem, times: &[f64]) -> (Vec<Vec<CMatrix>>, Vec<Vec<CMatrix>>) {
    let m = times.len();
    let dim = sys.dim();
    let mut fwd = vec![vec![identity(dim); m]; m];
    let mut bwd = vec![vec![identity(dim); m]; m];
    if sys.is_autonomous() {
        for i in 0..m {
            for j in i..m {
                fwd[i][j] = evolution_operator(sys, times[j], times[i]);
                bwd[i][j] = evolution_operator(sys, times[i], times[j]);
            }
        }
    } else {
        let mut steps_fwd = Vec::with_capacity(m.saturating_sub(1));
        let mut steps_bwd = Vec::with_capacity(m.saturating_sub(1));
        for k in 0..m.saturating_sub(1) {
            steps_fwd.push(evolution_operator(sys, times[k + 1], times[k]));
            steps_bwd.push(evolution_operator(sys, times[k], times[k + 1]));
        }
        for i in 0..m {
            for j in (i + 1)..m {
                fwd[i][j] = &steps_fwd[j - 1] * &fwd[i][j - 1];
                bwd[i][j] = &bwd[i][j - 1] * &steps_bwd[j - 1];
            }
        }
    }
    (fwd, bwd)
}

fn prepare_times(times: &[f64]) -> Result<Vec<f64>> {
    if times.len() < 2 {
        return Err(Error::invalid("need at least two sample times"));
    }
    let mut ts = times.to_vec();
    if ts.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("sample times must be finite"));
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    if ts.len() < 2 {
        return Err(Error::invalid("need at least two distinct sample times"));
    }
    Ok(ts)
}

/// Default sampling grid for fitting and verification: 33 times on [0, 12].
pub fn default_sample_times() -> Vec<f64> {
    (0..33).map(|i| i as f64 * 0.375).collect()
}

/// Checks claimed dichotomy data against evolution operators sampled on
/// all ordered pairs from `times`.
pub fn verify_dichotomy(
    sys: &LinearSystem,
    spec: &DichotomySpec,
    times: &[f64],
) -> Result<DichotomyCheck> {
    if sys.dim() != spec.dim() {
        return Err(Error::invalid("system and dichotomy dimensions differ"));
    }
    let ts = prepare_times(times)?;
    let m = ts.len();
    let p = spec.projection().clone();
    let q = spec.complement();
    let has_forward = op_norm_inf(&p) > 0.0;
    let has_backward = op_norm_inf(&q) > 0.0;
    let (fwd, bwd) = pair_tables(sys, &ts);

    let count_tol = 1e-12 * spec.constant.max(1.0);
    let mut check = DichotomyCheck {
        pairs_checked: 0,
        forward_violations: 0,
        backward_violations: 0,
        worst_forward_excess: None,
        worst_backward_excess: None,
        commutation_defect: 0.0,
        projection_defect: op_norm_inf(&(&p * &p - &p)),
    };
    for i in 0..m {
        for j in i..m {
            let dt = ts[j] - ts[i];
            let t_op = &fwd[i][j];
            check.pairs_checked += 1;
            let comm = op_norm_inf(&(t_op * &p - &p * t_op));
            check.commutation_defect = check.commutation_defect.max(comm);
            if has_forward {
                let excess = op_norm_inf(&(t_op * &p)) - spec.constant * (-spec.rate * dt).exp();
                if excess > count_tol {
                    check.forward_violations += 1;
                }
                check.worst_forward_excess =
                    Some(check.worst_forward_excess.map_or(excess, |w: f64| w.max(excess)));
            }
            if has_backward {
                let excess =
                    op_norm_inf(&(&bwd[i][j] * &q)) - spec.constant * (-spec.rate * dt).exp();
                if excess > count_tol {
                    check.backward_violations += 1;
                }
                check.worst_backward_excess =
                    Some(check.worst_backward_excess.map_or(excess, |w: f64| w.max(excess)));
            }
        }
    }
    Ok(check)
}

struct Sample {
    dt: f64,
    norm: f64,
}

fn envelope(lambda: f64, samples: &[Sample]) -> f64 {
    samples
        .iter()
        .map(|s| s.norm * (lambda * s.dt).exp())
        .fold(0.0, f64::max)
}

/// A rate is admissible when the envelope constant is set by the near half
/// of the sampled window: then extending the window would not inflate it.
fn admissible(lambda: f64, samples: &[Sample], half_dt: f64) -> bool {
    let full = envelope(lambda, samples);
    let near = samples
        .iter()
        .filter(|s| s.dt <= half_dt)
        .map(|s| s.norm * (lambda * s.dt).exp())
        .fold(0.0, f64::max);
    full <= near * (1.0 + 1e-7)
}

/// Fits the sharpest defensible dichotomy data `(D, lambda)` for a given
/// projection from evolution operators sampled on pairs from `times`.
///
/// The fit certifies the bound on the sampled window and extrapolates the
/// exponential envelope beyond it: the chosen rate is the largest for
/// which the constant is determined by the near half of the window, so
/// that the far half already confirms the extrapolation. Slower-than-
/// exponential decay inside the window is not detectable from finite
/// samples; verify on a longer window when in doubt.
pub fn fit_dichotomy(
    sys: &LinearSystem,
    projection: CMatrix,
    times: &[f64],
) -> Result<DichotomySpec> {
    if sys.dim() != projection.nrows() || projection.nrows() != projection.ncols() {
        return Err(Error::invalid("projection shape does not match the system"));
    }
    let dim = sys.dim();
    let scale = op_norm_inf(&projection).max(1.0);
    let idem = op_norm_inf(&(&projection * &projection - &projection));
    if idem > PROJECTION_TOL * scale * scale {
        return Err(Error::invalid(format!(
            "projection is not idempotent: |P^2 - P| = {idem:.3e}"
        )));
    }
    let ts = prepare_times(times)?;
    let m = ts.len();
    let p = projection.clone();
    let q = identity(dim) - &p;
    let has_forward = op_norm_inf(&p) > 0.0;
    let has_backward = op_norm_inf(&q) > 0.0;
    let (fwd, bwd) = pair_tables(sys, &ts);

    let mut samples = Vec::new();
    for i in 0..m {
        for j in i..m {
            let t_op = &fwd[i][j];
            let comm = op_norm_inf(&(t_op * &p - &p * t_op));
            if comm > 1e-8 * op_norm_inf(t_op).max(1.0) {
                return Err(Error::NoDichotomy(format!(
                    "projection does not commute with the flow: defect {comm:.3e} at (t, s) = ({}, {})",
                    ts[j], ts[i]
                )));
            }
            let dt = ts[j] - ts[i];
            if has_forward {
                let n = op_norm_inf(&(t_op * &p));
                if n > 1e-250 {
                    samples.push(Sample { dt, norm: n });
                }
            }
            if has_backward {
                let n = op_norm_inf(&(&bwd[i][j] * &q));
                if n > 1e-250 {
                    samples.push(Sample { dt, norm: n });
                }
            }
        }
    }
    if samples.iter().all(|s| s.dt == 0.0) {
        return Err(Error::invalid("sample times span no positive interval"));
    }

    // steepest pairwise log-slope bounds the rate from above
    let mut max_slope: f64 = 0.0;
    for a in &samples {
        for b in &samples {
            if b.dt > a.dt + 1e-12 && a.norm > 0.0 && b.norm > 0.0 {
                max_slope = max_slope.max((a.norm.ln() - b.norm.ln()) / (b.dt - a.dt));
            }
        }
    }
    if max_slope <= 0.0 {
        return Err(Error::NoDichotomy(
            "no decay observed in the sampled evolution operators".into(),
        ));
    }
    let dt_max = samples.iter().map(|s| s.dt).fold(0.0, f64::max);
    let half_dt = dt_max / 2.0;
    let lambda_hi = (1.05 * max_slope).min(600.0 / dt_max);
    let lambda_lo = DICHOTOMY_RATE_MIN.min(lambda_hi / 2.0);

    let grid: Vec<f64> = (0..DICHOTOMY_RATE_GRID)
        .map(|k| {
            let t = k as f64 / (DICHOTOMY_RATE_GRID - 1) as f64;
            lambda_lo * (lambda_hi / lambda_lo).powf(t)
        })
        .collect();
    let mut best: Option<usize> = None;
    for (k, &lam) in grid.iter().enumerate() {
        if admissible(lam, &samples, half_dt) {
            best = Some(k);
        } else if best.is_some() {
            break;
        }
    }
    let Some(k) = best else {
        return Err(Error::NoDichotomy(
            "no admissible exponential rate: decay inside the window is slower than exponential"
                .into(),
        ));
    };
    let mut lo = grid[k];
    if k + 1 < grid.len() && !admissible(grid[k + 1], &samples, half_dt) {
        let mut hi = grid[k + 1];
        for _ in 0..80 {
            if hi - lo <= 1e-9 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if admissible(mid, &samples, half_dt) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let rate = lo;
    let constant = envelope(rate, &samples).max(1.0);
    DichotomySpec::new(projection, constant, rate)
}

/// Fits on the default sampling grid.
pub fn fit_dichotomy_default(sys: &LinearSystem, projection: CMatrix) -> Result<DichotomySpec> {
    fit_dichotomy(sys, projection, &default_sample_times())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag_projection(entries: &[f64]) -> CMatrix {
        let d = entries.len();
        let mut p = CMatrix::zeros(d, d);
        for (i, &e) in entries.iter().enumerate() {
            p[(i, i)] = c(e);
        }
        p
    }

    #[test]
    fn spec_validation_and_kind_classification() {
        assert!(DichotomySpec::new(diag_projection(&[0.5, 0.0]), 1.0, 1.0).is_err());
        assert!(DichotomySpec::new(diag_projection(&[1.0, 0.0]), 0.5, 1.0).is_err());
        assert!(DichotomySpec::new(diag_projection(&[1.0, 0.0]), 1.0, -1.0).is_err());
        let g = DichotomySpec::new(diag_projection(&[1.0, 0.0]), 1.0, 1.0).unwrap();
        assert_eq!(g.kind(), DichotomyKind::General);
        assert_eq!(
            DichotomySpec::contraction(2, 1.0, 1.0).unwrap().kind(),
            DichotomyKind::Contraction
        );
        assert_eq!(
            DichotomySpec::expansion(2, 1.0, 1.0).unwrap().kind(),
            DichotomyKind::Expansion
        );
    }

    #[test]
    fn fit_recovers_saddle_rates() {
        let sys = LinearSystem::diagonal_real(&[-2.0, 3.0]).unwrap();
        let spec = fit_dichotomy_default(&sys, diag_projection(&[1.0, 0.0])).unwrap();
        assert!((spec.constant - 1.0).abs() < 1e-6, "D = {}", spec.constant);
        assert!((spec.rate - 2.0).abs() < 1e-3, "lambda = {}", spec.rate);
        let check = verify_dichotomy(&sys, &spec, &default_sample_times()).unwrap();
        assert_eq!(check.violations(), 0);
        assert!(check.commutation_defect < 1e-12);
    }

    #[test]
    fn fit_scalar_contraction() {
        let sys = LinearSystem::scalar(-1.5);
        let spec = fit_dichotomy_default(&sys, identity(1)).unwrap();
        assert_eq!(spec.kind(), DichotomyKind::Contraction);
        assert!((spec.constant - 1.0).abs() < 1e-6);
        assert!((spec.rate - 1.5).abs() < 1e-3);
    }

    #[test]
    fn fit_in_skewed_basis_inflates_the_constant() {
        // A = M diag(-2, 3) M^{-1}, P = M diag(1, 0) M^{-1}, M = [[1,1],[0,1]]
        let a = CMatrix::from_row_slice(2, 2, &[c(-2.0), c(5.0), c(0.0), c(3.0)]);
        let p = CMatrix::from_row_slice(2, 2, &[c(1.0), c(-1.0), c(0.0), c(0.0)]);
        let sys = LinearSystem::constant(a).unwrap();
        let spec = fit_dichotomy_default(&sys, p).unwrap();
        assert_eq!(spec.kind(), DichotomyKind::General);
        assert!((spec.constant - 2.0).abs() < 1e-5, "D = {}", spec.constant);
        assert!((spec.rate - 2.0).abs() < 1e-3, "lambda = {}", spec.rate);
        let check = verify_dichotomy(&sys, &spec, &default_sample_times()).unwrap();
        assert_eq!(check.violations(), 0);
    }

    #[test]
    fn rotation_has_no_dichotomy() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(-1.0), c(0.0)]);
        let sys = LinearSystem::constant(a).unwrap();
        let err = fit_dichotomy_default(&sys, identity(2)).unwrap_err();
        assert!(matches!(err, Error::NoDichotomy(_)));
    }

    #[test]
    fn noncommuting_projection_is_rejected() {
        let a = CMatrix::from_row_slice(2, 2, &[c(-1.0), c(1.0), c(0.0), c(-1.0)]);
        let sys = LinearSystem::constant(a).unwrap();
        let err = fit_dichotomy_default(&sys, diag_projection(&[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NoDichotomy(_)));
    }

    #[test]
    fn verify_counts_violations_of_an_overclaimed_rate() {
        let sys = LinearSystem::scalar(-2.0);
        let spec = DichotomySpec::contraction(1, 1.0, 3.0).unwrap();
        let check = verify_dichotomy(&sys, &spec, &default_sample_times()).unwrap();
        assert!(check.forward_violations > 0);
        assert!(check.worst_forward_excess.unwrap() > 0.0);
    }

    #[test]
    fn fit_time_varying_contraction() {
        let sys = LinearSystem::time_varying(1, |t: f64| {
            CMatrix::from_element(1, 1, Complex64::new(-(2.0 + t.sin()), 0.0))
        })
        .unwrap();
        let spec = fit_dichotomy_default(&sys, identity(1)).unwrap();
        assert!(spec.rate > 1.0 && spec.rate < 3.0, "rate = {}", spec.rate);
        let check = verify_dichotomy(&sys, &spec, &default_sample_times()).unwrap();
        assert_eq!(check.violations(), 0, "excess {:?}", check.worst_forward_excess);
    }
}
