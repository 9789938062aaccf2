//! Shadowing solver: moves an approximate solution onto a true one.
//!
//! Given a pseudosolution `y` whose residual `y' - A y - f(t, y)` is small
//! in `L^q`, the solver iterates the bounded-solution operator of the
//! dichotomy until it reaches the correction `z` with `x = y + z` a true
//! solution, then certifies `|z|_{L^p} <= L eps` against the upper
//! stability constant. For autonomous coefficients whose projection is
//! diagonal in the eigenbasis, the operator is evaluated by exact
//! per-cell convolution of the sampled data; everything else falls back
//! to projected adaptive integration.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::bounds::{upper_hus_constant, UpperConstant};
use crate::defaults::{CERT_SLACK, MAX_PICARD_ITER, ODE_ABS_TOL, ODE_REL_TOL, PICARD_TOL};
use crate::dichotomy::{DichotomyKind, DichotomySpec};
use crate::error::{Error, Result};
use crate::exponent::ConjugateTriple;
use crate::grid::{ExpTail, GridFunction, VectorNorm};
use crate::kernel::{anticausal_moments, causal_moments, ScalarTail};
use crate::linear::{
    canonical_2x2, identity, max_vector_norm, op_norm_inf, rk45, CMatrix, CVector, CanonicalCase,
    LinearSystem,
};
use crate::norms::lp_norm_with;

type Nonlinearity = Arc<dyn Fn(f64, &CVector) -> CVector + Send + Sync>;

/// A semilinear problem `x' = A(t) x + f(t, x)` together with dichotomy
/// data for its linear part and a Lipschitz bound for `f`.
#[derive(Clone)]
pub struct SemilinearProblem {
    linear: LinearSystem,
    nonlinearity: Option<Nonlinearity>,
    lipschitz: f64,
    dichotomy: DichotomySpec,
}

impl std::fmt::Debug for SemilinearProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "SemilinearProblem(dim {}, lipschitz {}, {:?})",
            self.linear.dim(),
            self.lipschitz,
            self.dichotomy.kind()
        )
    }
}

fn smallness_limit(dichotomy: &DichotomySpec) -> f64 {
    let mult = match dichotomy.kind() {
        DichotomyKind::General => 2.0,
        _ => 1.0,
    };
    dichotomy.rate / (mult * dichotomy.constant)
}

/// Spot check `|f(t,u) - f(t,v)| <= c |u - v|` on a deterministic sample
/// of times and point pairs. Catches declared bounds that are plainly
/// wrong; it cannot prove the bound.
fn lipschitz_spot_check(f: &Nonlinearity, dim: usize, c: f64) -> Result<()> {
    let times = [0.0, 0.7, 2.3, 5.0];
    let scales = [1.0, 0.1, 1e-3];
    for &t in &times {
        for trial in 0..6usize {
            let base = DVector::from_fn(dim, |i, _| {
                Complex64::new(
                    (0.9 * i as f64 + 1.7 * trial as f64 + 0.3).sin(),
                    0.4 * (0.7 * i as f64 - 1.1 * trial as f64).cos(),
                )
            });
            let offset = DVector::from_fn(dim, |i, _| {
                Complex64::new(
                    (1.3 * i as f64 + 0.7 * trial as f64).cos(),
                    (0.5 * i as f64 + 1.9 * trial as f64).sin(),
                ) * scales[trial % scales.len()]
            });
            let shifted = &base + &offset;
            let fa = f(t, &base);
            let fb = f(t, &shifted);
            if fa.len() != dim || fb.len() != dim {
                return Err(Error::invalid("nonlinearity changes the dimension"));
            }
            if fa.iter().chain(fb.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::invalid("nonlinearity returned a non-finite value"));
            }
            let num = max_vector_norm(&(&fa - &fb));
            let den = max_vector_norm(&offset);
            if num > c * den + 1e-9 * (1.0 + c) * den {
                return Err(Error::invalid(format!(
                    "declared Lipschitz bound {c} is violated: observed ratio {:.6e} at t = {t}",
                    num / den
                )));
            }
        }
    }
    Ok(())
}

impl SemilinearProblem {
    /// Problem with `f = 0`.
    pub fn linear_only(linear: LinearSystem, dichotomy: DichotomySpec) -> Result<Self> {
        if linear.dim() != dichotomy.dim() {
            return Err(Error::invalid("system and dichotomy dimensions differ"));
        }
        Ok(SemilinearProblem {
            linear,
            nonlinearity: None,
            lipschitz: 0.0,
            dichotomy,
        })
    }

    /// Problem with a nonlinearity of declared Lipschitz bound `c` in the
    /// maximum norm. The bound must satisfy the smallness condition of
    /// the dichotomy and survive a deterministic spot check.
    pub fn new<F>(
        linear: LinearSystem,
        dichotomy: DichotomySpec,
        f: F,
        lipschitz: f64,
    ) -> Result<Self>
    where
        F: Fn(f64, &CVector) -> CVector + Send + Sync + 'static,
    {
        if linear.dim() != dichotomy.dim() {
            return Err(Error::invalid("system and dichotomy dimensions differ"));
        }
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(Error::invalid("Lipschitz bound must be finite and nonnegative"));
        }
        let limit = smallness_limit(&dichotomy);
        if lipschitz >= limit {
            return Err(Error::SmallnessViolation {
                c: lipschitz,
                limit,
                kind: format!("{:?}", dichotomy.kind()).to_lowercase(),
            });
        }
        let f: Nonlinearity = Arc::new(f);
        lipschitz_spot_check(&f, linear.dim(), lipschitz)?;
        Ok(SemilinearProblem {
            linear,
            nonlinearity: Some(f),
            lipschitz,
            dichotomy,
        })
    }

    pub fn linear(&self) -> &LinearSystem {
        &self.linear
    }

    pub fn dichotomy(&self) -> &DichotomySpec {
        &self.dichotomy
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    pub fn has_nonlinearity(&self) -> bool {
        self.nonlinearity.is_some()
    }

    /// `f(t, x)`, zero for linear problems.
    pub fn nonlinear_term(&self, t: f64, x: &CVector) -> CVector {
        match &self.nonlinearity {
            Some(f) => f(t, x),
            None => DVector::zeros(self.dim()),
        }
    }
}

/// An approximate solution: sampled values and their derivative.
#[derive(Debug, Clone)]
pub struct PseudoSolution {
    y: GridFunction,
    dy: GridFunction,
    numerical_derivative: bool,
}

impl PseudoSolution {
    /// Uses finite differences of the samples as the derivative.
    pub fn from_samples(y: GridFunction) -> Self {
        let dy = y.numerical_derivative();
        PseudoSolution {
            y,
            dy,
            numerical_derivative: true,
        }
    }

    /// Uses a caller-supplied derivative on the same grid.
    pub fn with_derivative(y: GridFunction, dy: GridFunction) -> Result<Self> {
        if y.grid() != dy.grid() || y.dim() != dy.dim() {
            return Err(Error::invalid(
                "derivative must live on the same grid with the same dimension",
            ));
        }
        Ok(PseudoSolution {
            y,
            dy,
            numerical_derivative: false,
        })
    }

    pub fn y(&self) -> &GridFunction {
        &self.y
    }

    pub fn dy(&self) -> &GridFunction {
        &self.dy
    }

    pub fn derivative_is_numerical(&self) -> bool {
        self.numerical_derivative
    }
}

/// The residual `y' - A(t) y - f(t, y)` of a pseudosolution, sampled on
/// its grid.
///
/// For a linear autonomous problem whose data carries exponential tails
/// the residual tail is composed exactly; otherwise it is fitted from
/// the trailing samples and omitted when no convincing decay is found.
pub fn residual(problem: &SemilinearProblem, pseudo: &PseudoSolution) -> Result<GridFunction> {
    if pseudo.y.dim() != problem.dim() {
        return Err(Error::invalid("pseudosolution dimension differs from the problem"));
    }
    let grid = pseudo.y.grid().to_vec();
    let values: Vec<CVector> = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let y = &pseudo.y.values()[i];
            let ay = problem.linear.at(t) * y;
            &pseudo.dy.values()[i] - ay - problem.nonlinear_term(t, y)
        })
        .collect();
    let bare = GridFunction::new(grid, values, None)?;
    let tail = if problem.nonlinearity.is_none() && problem.linear.is_autonomous() {
        match (pseudo.y.tail(), pseudo.dy.tail()) {
            (Some(ty), Some(tdy)) => {
                let a = problem.linear.constant_matrix().unwrap();
                let linear_part = ExpTail {
                    coeff: -(a * &ty.coeff),
                    rate: ty.rate,
                };
                Some(ExpTail::combine(tdy, &linear_part))
            }
            _ => bare.infer_exp_tail(VectorNorm::Max),
        }
    } else {
        bare.infer_exp_tail(VectorNorm::Max)
    };
    Ok(bare.with_tail(tail))
}

// --- the bounded-solution operator -----------------------------------------

/// One scalar mode of the componentwise path: node values plus a tail
/// `coeff e^{-rate (t - t_max)}` (tail absent when `rate` is not positive).
struct ScalarResult {
    values: Vec<Complex64>,
    tail: Option<(Complex64, f64)>,
}

/// `integral_0^t e^{mu (t-s)} g(s) ds` with a conservative tail.
fn causal_mode(
    mu: Complex64,
    grid: &[f64],
    g: &[Complex64],
    gtail: Option<ScalarTail>,
) -> ScalarResult {
    let theta = -mu;
    let a = causal_moments(theta, grid, g, 0);
    let horizon_value = *a[0].last().unwrap();
    let own_rate = -mu.re;
    let rate = match gtail {
        Some(t) if t.coeff.norm() > 0.0 => own_rate.min(t.rate),
        _ => own_rate,
    };
    let tail = if rate > 0.0 {
        Some((horizon_value, rate))
    } else {
        None
    };
    ScalarResult {
        values: a.into_iter().next().unwrap(),
        tail,
    }
}

/// `-integral_t^inf e^{mu (t-s)} g(s) ds` with an exact tail.
fn anticausal_mode(
    mu: Complex64,
    grid: &[f64],
    g: &[Complex64],
    gtail: Option<ScalarTail>,
) -> Result<ScalarResult> {
    let theta = mu;
    let w = anticausal_moments(theta, grid, g, gtail, 0)?;
    let values: Vec<Complex64> = w[0].iter().map(|z| -z).collect();
    let tail = match gtail {
        Some(t) if t.coeff.norm() > 0.0 => Some((-t.coeff / (theta + t.rate), t.rate)),
        _ => Some((Complex64::new(0.0, 0.0), 1.0)),
    };
    Ok(ScalarResult { values, tail })
}

/// Componentwise evaluation data: the eigenbasis and which modes the
/// projection keeps.
struct ModalSplit {
    m: CMatrix,
    m_inv: CMatrix,
    /// eigenvalue per basis column
    modes: Vec<Complex64>,
    /// true = stable (projected) mode, handled causally
    stable: Vec<bool>,
    /// column indices `(first, second)` of a defective pair, if any
    block: Option<(usize, usize)>,
}

fn diagonal_entries(a: &CMatrix) -> Option<Vec<Complex64>> {
    let d = a.nrows();
    for i in 0..d {
        for j in 0..d {
            if i != j && a[(i, j)].norm() != 0.0 {
                return None;
            }
        }
    }
    Some((0..d).map(|i| a[(i, i)]).collect())
}

/// Classifies the projection in a given basis as a 0/1 diagonal, if it is
/// one up to `1e-10`.
fn projected_modes(p_hat: &CMatrix) -> Option<Vec<bool>> {
    let d = p_hat.nrows();
    let mut stable = Vec::with_capacity(d);
    for i in 0..d {
        for j in 0..d {
            if i != j && p_hat[(i, j)].norm() > 1e-10 {
                return None;
            }
        }
        let e = p_hat[(i, i)];
        if (e - Complex64::new(1.0, 0.0)).norm() <= 1e-10 {
            stable.push(true);
        } else if e.norm() <= 1e-10 {
            stable.push(false);
        } else {
            return None;
        }
    }
    Some(stable)
}

fn modal_split(problem: &SemilinearProblem) -> Option<ModalSplit> {
    let a = problem.linear.constant_matrix()?;
    let d = a.nrows();
    let p = problem.dichotomy.projection();
    if let Some(diag) = diagonal_entries(a) {
        let stable = projected_modes(p)?;
        return Some(ModalSplit {
            m: identity(d),
            m_inv: identity(d),
            modes: diag,
            stable,
            block: None,
        });
    }
    if d != 2 {
        return None;
    }
    let jf = canonical_2x2(a).ok()?;
    let p_hat = &jf.m_inv * p * &jf.m;
    let stable = projected_modes(&p_hat)?;
    match jf.case {
        CanonicalCase::Diagonal { mu1, mu2 } => Some(ModalSplit {
            m: jf.m,
            m_inv: jf.m_inv,
            modes: vec![mu1, mu2],
            stable,
            block: None,
        }),
        CanonicalCase::JordanBlock { nu } => {
            // a defective block admits only the trivial invariant splits
            if stable[0] != stable[1] {
                return None;
            }
            Some(ModalSplit {
                m: jf.m,
                m_inv: jf.m_inv,
                modes: vec![nu, nu],
                stable,
                block: Some((0, 1)),
            })
        }
    }
}

fn scalar_tail_of(g: &GridFunction, component: usize, m_inv: &CMatrix) -> Option<ScalarTail> {
    g.tail().map(|t| {
        let transformed = m_inv * &t.coeff;
        ScalarTail {
            coeff: transformed[component],
            rate: t.rate,
        }
    })
}

fn assemble(
    grid: Vec<f64>,
    m: &CMatrix,
    comps: Vec<ScalarResult>,
) -> Result<GridFunction> {
    let d = comps.len();
    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let hat = DVector::from_fn(d, |k, _| comps[k].values[i]);
        values.push(m * hat);
    }
    let mut tail_ok = true;
    let mut rate = f64::INFINITY;
    let mut coeff_hat = DVector::zeros(d);
    for (k, comp) in comps.iter().enumerate() {
        match comp.tail {
            Some((c, r)) => {
                coeff_hat[k] = c;
                if c.norm() > 0.0 {
                    rate = rate.min(r);
                }
            }
            None => tail_ok = false,
        }
    }
    let tail = if tail_ok {
        let coeff = m * coeff_hat;
        if rate.is_finite() {
            Some(ExpTail::new(coeff, rate)?)
        } else {
            Some(ExpTail::zero(m.nrows()))
        }
    } else {
        None
    };
    GridFunction::new(grid, values, tail)
}

fn componentwise_response(
    split: &ModalSplit,
    g: &GridFunction,
) -> Result<GridFunction> {
    let grid = g.grid();
    let d = split.modes.len();
    // transform the forcing into the eigenbasis, one array per component
    let mut g_hat: Vec<Vec<Complex64>> = vec![Vec::with_capacity(grid.len()); d];
    for v in g.values() {
        let hat = &split.m_inv * v;
        for k in 0..d {
            g_hat[k].push(hat[k]);
        }
    }
    let mut comps: Vec<Option<ScalarResult>> = (0..d).map(|_| None).collect();
    if let Some((first, second)) = split.block {
        let nu = split.modes[first];
        let t1 = scalar_tail_of(g, first, &split.m_inv);
        let t2 = scalar_tail_of(g, second, &split.m_inv);
        if split.stable[first] {
            // T(t,s) = e^{nu (t-s)} [[1, t-s], [0, 1]] on the block
            let a1 = causal_moments(-nu, grid, &g_hat[first], 0);
            let a2 = causal_moments(-nu, grid, &g_hat[second], 1);
            let values_first: Vec<Complex64> = a1[0]
                .iter()
                .zip(&a2[1])
                .map(|(x, y)| x + y)
                .collect();
            let own = -nu.re;
            let mut rate = own;
            for t in [&t1, &t2].into_iter().flatten() {
                if t.coeff.norm() > 0.0 {
                    rate = rate.min(t.rate);
                }
            }
            let mk_tail = |v: Complex64| if rate > 0.0 { Some((v, rate)) } else { None };
            comps[first] = Some(ScalarResult {
                tail: mk_tail(*values_first.last().unwrap()),
                values: values_first,
            });
            comps[second] = Some(ScalarResult {
                tail: mk_tail(*a2[0].last().unwrap()),
                values: a2.into_iter().next().unwrap(),
            });
        } else {
            let w1 = anticausal_moments(nu, grid, &g_hat[first], t1, 0)?;
            let w2 = anticausal_moments(nu, grid, &g_hat[second], t2, 1)?;
            let values_first: Vec<Complex64> = w1[0]
                .iter()
                .zip(&w2[1])
                .map(|(x, y)| -x + y)
                .collect();
            let values_second: Vec<Complex64> = w2[0].iter().map(|z| -z).collect();
            let tail_first = {
                let ca = t1.map(|t| t.coeff).unwrap_or_default();
                let cb = t2.map(|t| t.coeff).unwrap_or_default();
                let rate = t1
                    .into_iter()
                    .chain(t2)
                    .filter(|t| t.coeff.norm() > 0.0)
                    .map(|t| t.rate)
                    .fold(f64::INFINITY, f64::min);
                if rate.is_finite() {
                    let denom = nu + rate;
                    Some((-ca / denom + cb / (denom * denom), rate))
                } else {
                    Some((Complex64::new(0.0, 0.0), 1.0))
                }
            };
            let tail_second = match t2 {
                Some(t) if t.coeff.norm() > 0.0 => Some((-t.coeff / (nu + t.rate), t.rate)),
                _ => Some((Complex64::new(0.0, 0.0), 1.0)),
            };
            comps[first] = Some(ScalarResult {
                values: values_first,
                tail: tail_first,
            });
            comps[second] = Some(ScalarResult {
                values: values_second,
                tail: tail_second,
            });
        }
    }
    for k in 0..d {
        if comps[k].is_some() {
            continue;
        }
        let t = scalar_tail_of(g, k, &split.m_inv);
        comps[k] = Some(if split.stable[k] {
            causal_mode(split.modes[k], grid, &g_hat[k], t)
        } else {
            anticausal_mode(split.modes[k], grid, &g_hat[k], t)?
        });
    }
    assemble(
        grid.to_vec(),
        &split.m,
        comps.into_iter().map(|c| c.unwrap()).collect(),
    )
}

fn vec_to_col(v: &CVector) -> CMatrix {
    CMatrix::from_fn(v.len(), 1, |i, _| v[i])
}

fn col_to_vec(m: &CMatrix) -> CVector {
    DVector::from_iterator(m.nrows(), m.column(0).iter().cloned())
}

/// Fallback path: integrate `u' = A(t) u + P g` forward from zero and
/// `w' = A(t) w + (I-P) g` backward from a tail-derived seed, projecting
/// each onto its invariant range at every node to suppress the growth of
/// the complementary component from rounding.
fn integrated_response(
    problem: &SemilinearProblem,
    g: &GridFunction,
) -> Result<GridFunction> {
    let grid = g.grid();
    let n = grid.len();
    let dim = problem.dim();
    let p = problem.dichotomy.projection().clone();
    let q = problem.dichotomy.complement();
    let has_stable = op_norm_inf(&p) > 0.0;
    let has_unstable = op_norm_inf(&q) > 0.0;
    let mut z_vals: Vec<CVector> = vec![DVector::zeros(dim); n];

    if has_stable {
        let rhs = |t: f64, u: &CMatrix| {
            let gval = vec_to_col(&(&p * g.value_at(t)));
            problem.linear.at(t) * u + gval
        };
        let mut u = CMatrix::zeros(dim, 1);
        for i in 0..n {
            if i > 0 {
                u = rk45(&rhs, grid[i - 1], grid[i], u, ODE_REL_TOL, ODE_ABS_TOL);
                u = &p * u;
            }
            z_vals[i] += col_to_vec(&u);
        }
    }

    let mut w_horizon = DVector::zeros(dim);
    if has_unstable {
        // seed: for t past the horizon the forcing is its tail and the
        // coefficient is frozen, so w(T) = -(A(T) + rho I)^{-1} (I-P) c
        if let Some(tail) = g.tail() {
            if !tail.is_zero() {
                let a_t = problem.linear.at(*grid.last().unwrap());
                let shifted = &a_t + identity(dim) * Complex64::new(tail.rate, 0.0);
                let inv = shifted.clone().try_inverse().ok_or_else(|| {
                    Error::DivergentNorm(
                        "tail rate resonates with the coefficient at the horizon".into(),
                    )
                })?;
                w_horizon = -(inv * (&q * &tail.coeff));
            }
        }
        let rhs = |t: f64, w: &CMatrix| {
            let gval = vec_to_col(&(&q * g.value_at(t)));
            problem.linear.at(t) * w + gval
        };
        let mut w = vec_to_col(&w_horizon);
        for i in (0..n).rev() {
            if i + 1 < n {
                w = rk45(&rhs, grid[i + 1], grid[i], w, ODE_REL_TOL, ODE_ABS_TOL);
                w = &q * w;
            }
            z_vals[i] += col_to_vec(&w);
        }
    }

    let tail = match g.tail() {
        Some(gt) => {
            let rate = if gt.is_zero() {
                problem.dichotomy.rate
            } else {
                gt.rate.min(problem.dichotomy.rate)
            };
            Some(ExpTail::new(z_vals[n - 1].clone(), rate)?)
        }
        None => None,
    };
    GridFunction::new(grid.to_vec(), z_vals, tail)
}

/// The bounded response to a forcing: the unique solution of
/// `z' = A(t) z + g` that stays bounded on the half line and has no
/// stable component at `t = 0`.
pub fn forced_response(problem: &SemilinearProblem, g: &GridFunction) -> Result<GridFunction> {
    if g.dim() != problem.dim() {
        return Err(Error::invalid("forcing dimension differs from the problem"));
    }
    match modal_split(problem) {
        Some(split) => componentwise_response(&split, g),
        None => integrated_response(problem, g),
    }
}

// --- the fixed-point iteration ----------------------------------------------

/// Iteration controls for the solver.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Absolute size of the final update, scaled by `(1 - kappa) / kappa`.
    pub tolerance: f64,
    pub norm: VectorNorm,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: MAX_PICARD_ITER,
            tolerance: PICARD_TOL,
            norm: VectorNorm::Max,
        }
    }
}

/// Everything the solver certifies about a shadowing solution.
#[derive(Debug, Clone, Serialize)]
pub struct HusCertificate {
    pub p: crate::exponent::Exponent,
    pub q: crate::exponent::Exponent,
    pub r: crate::exponent::Exponent,
    /// Measured residual size `|y' - A y - f(., y)|_{L^q}`.
    pub epsilon: f64,
    /// Upper stability constant for these exponents.
    #[serde(rename = "L")]
    pub constant: f64,
    /// `constant * epsilon`.
    pub bound: f64,
    /// Measured deviation `|x - y|_{L^p}`.
    pub deviation: f64,
    pub kappa: f64,
    pub iterations: usize,
    pub final_update: f64,
    /// Pointwise defect of the returned solution under an independent
    /// finite-difference derivative; a diagnostic, not part of the bound.
    pub residual_check: f64,
    pub derivative_was_numerical: bool,
    /// Always true on a returned certificate; a failed iteration is an
    /// error, never a report.
    pub converged: bool,
}

/// A certified shadowing solution `x = y + z`.
#[derive(Debug, Clone)]
pub struct Shadowing {
    pub solution: GridFunction,
    pub correction: GridFunction,
    pub certificate: HusCertificate,
    /// `L^p` size of each Picard update, in order; exposes the observed
    /// contraction rate.
    pub update_history: Vec<f64>,
}

fn zero_like(g: &GridFunction) -> GridFunction {
    GridFunction::new(
        g.grid().to_vec(),
        vec![DVector::zeros(g.dim()); g.len()],
        Some(ExpTail::zero(g.dim())),
    )
    .expect("zero function on a valid grid")
}

fn pointwise_residual_check(
    problem: &SemilinearProblem,
    x: &GridFunction,
    norm: VectorNorm,
) -> f64 {
    let dx = x.numerical_derivative();
    let n = x.len();
    let lo = 2.min(n - 1);
    let hi = n.saturating_sub(2).max(lo + 1);
    (lo..hi)
        .map(|i| {
            let t = x.grid()[i];
            let v = &x.values()[i];
            let defect = &dx.values()[i] - problem.linear.at(t) * v - problem.nonlinear_term(t, v);
            norm.apply(&defect)
        })
        .fold(0.0, f64::max)
}

/// Forcing term seen by the fixed-point map at a trial correction `z`.
fn correction_forcing(
    problem: &SemilinearProblem,
    pseudo: &PseudoSolution,
    neg_res: &GridFunction,
    z: &GridFunction,
    norm: VectorNorm,
) -> Result<GridFunction> {
    if !problem.has_nonlinearity() {
        return Ok(neg_res.clone());
    }
    // g = -res + f(t, y + z) - f(t, y), refit the tail empirically
    let lifted = pseudo.y().add(z)?;
    let correction_term = lifted.map(|t, v| {
        problem.nonlinear_term(t, v) - problem.nonlinear_term(t, &pseudo.y().value_at(t))
    });
    let g = neg_res.add(&correction_term.with_tail(Some(ExpTail::zero(problem.dim()))))?;
    let tail = g.infer_exp_tail(norm);
    Ok(g.with_tail(tail))
}

/// Applies the integral operator whose fixed point is the true correction.
///
/// The image of `z` is the bounded response to `-r + f(y+z) - f(y)`; the
/// Picard loop iterates exactly this map, so its contraction factor can be
/// probed empirically through this entry point.
pub fn shadowing_operator(
    problem: &SemilinearProblem,
    pseudo: &PseudoSolution,
    z: &GridFunction,
    norm: VectorNorm,
) -> Result<GridFunction> {
    let res = residual(problem, pseudo)?;
    let neg_res = res.scale(Complex64::new(-1.0, 0.0));
    let g = correction_forcing(problem, pseudo, &neg_res, z, norm)?;
    forced_response(problem, &g)
}

/// Runs the fixed-point iteration from the pseudosolution and certifies
/// the outcome.
///
/// The residual is measured (never trusted), the iteration stops once the
/// update is below `tolerance * (1 - kappa) / kappa` in `L^p` (immediately
/// after one step when `kappa = 0`), and the deviation is checked against
/// `L eps`; a violation is an error, not a report entry.
pub fn picard_solve(
    problem: &SemilinearProblem,
    pseudo: &PseudoSolution,
    triple: &ConjugateTriple,
    options: &SolveOptions,
) -> Result<Shadowing> {
    let upper: UpperConstant = upper_hus_constant(problem.dichotomy(), problem.lipschitz, triple)?;
    let res = residual(problem, pseudo)?;
    let epsilon = lp_norm_with(&res, triple.q, options.norm)?;
    let neg_res = res.scale(Complex64::new(-1.0, 0.0));

    let kappa = upper.kappa;
    let threshold = if kappa > 0.0 {
        options.tolerance * (1.0 - kappa) / kappa
    } else {
        f64::INFINITY
    };

    let mut z = zero_like(pseudo.y());
    let mut iterations = 0usize;
    let mut final_update = f64::NAN;
    let mut converged = false;
    let mut update_history = Vec::new();
    while iterations < options.max_iterations {
        iterations += 1;
        let g = correction_forcing(problem, pseudo, &neg_res, &z, options.norm)?;
        let z_next = forced_response(problem, &g)?;
        let update = z_next.sub(&z)?;
        final_update = lp_norm_with(&update, triple.p, options.norm)?;
        update_history.push(final_update);
        z = z_next;
        if kappa == 0.0 || final_update <= threshold {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            last_update: final_update,
            threshold,
        });
    }

    let deviation = lp_norm_with(&z, triple.p, options.norm)?;
    let bound = upper.value * epsilon;
    if deviation > bound + CERT_SLACK {
        return Err(Error::CertificateFailure { deviation, bound });
    }
    let solution = pseudo.y().add(&z)?;
    let residual_check = pointwise_residual_check(problem, &solution, options.norm);
    Ok(Shadowing {
        certificate: HusCertificate {
            p: triple.p,
            q: triple.q,
            r: triple.r,
            epsilon,
            constant: upper.value,
            bound,
            deviation,
            kappa,
            iterations,
            final_update,
            residual_check,
            derivative_was_numerical: pseudo.derivative_is_numerical(),
            converged: true,
        },
        solution,
        correction: z,
        update_history,
    })
}

// --- uniqueness probing -----------------------------------------------------

/// Empirical evidence that no second bounded solution shadows the same
/// pseudosolution.
#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub offsets_tested: usize,
    /// Every perturbed trajectory cleared its growth envelope.
    pub conclusive: bool,
    /// Smallest observed `|difference| / envelope` over offsets and times.
    pub min_envelope_ratio: f64,
    pub horizon: f64,
    /// Guaranteed growth rate `lambda - D c` used for the envelope.
    pub envelope_rate: f64,
}

/// Integrates the problem from perturbed initial values and checks that
/// every difference grows at least like `|o| e^{(lambda - D c) t} / D`,
/// the envelope an expansion forces on any two distinct solutions.
///
/// Only expansions support the probe: with other dichotomies a second
/// bounded solution can genuinely exist.
pub fn uniqueness_probe_with_offsets(
    problem: &SemilinearProblem,
    x: &GridFunction,
    offsets: &[CVector],
    horizon: f64,
) -> Result<UniquenessReport> {
    if problem.dichotomy.kind() != DichotomyKind::Expansion {
        return Err(Error::NotExpansion(
            "uniqueness probing needs an expansion dichotomy".into(),
        ));
    }
    if !(horizon > 0.0) || horizon > x.t_max() {
        return Err(Error::invalid(format!(
            "horizon must lie in (0, {}]",
            x.t_max()
        )));
    }
    if offsets.is_empty() {
        return Err(Error::invalid("need at least one offset"));
    }
    let d = problem.dichotomy.constant;
    let envelope_rate = problem.dichotomy.rate - d * problem.lipschitz;
    let rhs = |t: f64, v: &CMatrix| {
        let vv = col_to_vec(v);
        let f = problem.nonlinear_term(t, &vv);
        problem.linear.at(t) * v + vec_to_col(&f)
    };
    let checkpoints = 20usize;
    let mut min_ratio = f64::INFINITY;
    let mut conclusive = true;
    for o in offsets {
        if o.len() != problem.dim() {
            return Err(Error::invalid("offset dimension differs from the problem"));
        }
        let o_norm = max_vector_norm(o);
        if o_norm == 0.0 {
            return Err(Error::invalid("offsets must be nonzero"));
        }
        let mut v = vec_to_col(&(x.value_at(0.0) + o));
        let mut t_prev = 0.0;
        for k in 1..=checkpoints {
            let t = horizon * k as f64 / checkpoints as f64;
            v = rk45(&rhs, t_prev, t, v, ODE_REL_TOL, ODE_ABS_TOL);
            t_prev = t;
            let diff = col_to_vec(&v) - x.value_at(t);
            let envelope = o_norm * (envelope_rate * t).exp() / d;
            let ratio = max_vector_norm(&diff) / envelope;
            min_ratio = min_ratio.min(ratio);
            if ratio < 1.0 - 1e-6 {
                conclusive = false;
            }
        }
    }
    Ok(UniquenessReport {
        offsets_tested: offsets.len(),
        conclusive,
        min_envelope_ratio: min_ratio,
        horizon,
        envelope_rate,
    })
}

/// Probes with offsets of size `0.1` along each coordinate direction,
/// both signs, up to time `10` (or the grid end if shorter).
pub fn uniqueness_probe(problem: &SemilinearProblem, x: &GridFunction) -> Result<UniquenessReport> {
    let dim = problem.dim();
    let mut offsets = Vec::with_capacity(2 * dim);
    for k in 0..dim {
        for sign in [1.0, -1.0] {
            let mut o: CVector = DVector::zeros(dim);
            o[k] = Complex64::new(0.1 * sign, 0.0);
            offsets.push(o);
        }
    }
    let horizon = x.t_max().min(10.0);
    uniqueness_probe_with_offsets(problem, x, &offsets, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults::{FALLBACK_T_MAX, SOLVER_GRID_NODES};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar_tail(value: f64, rate: f64) -> Option<ExpTail> {
        Some(ExpTail::new(DVector::from_element(1, c(value)), rate).unwrap())
    }

    /// The decaying pseudosolution of the scalar expansion example:
    /// y = -e^{-gamma t} / (a + gamma), whose residual is exactly e^{-gamma t}.
    fn expansion_pseudosolution(a: f64, gamma: f64, t_max: f64, n: usize) -> PseudoSolution {
        let grid = GridFunction::uniform_grid(t_max, n);
        let amp = -1.0 / (a + gamma);
        let y = GridFunction::sample_scalar(
            grid.clone(),
            |t| amp * (-gamma * t).exp(),
            scalar_tail(amp * (-gamma * t_max).exp(), gamma),
        )
        .unwrap();
        let dy = GridFunction::sample_scalar(
            grid,
            |t| -gamma * amp * (-gamma * t).exp(),
            scalar_tail(-gamma * amp * (-gamma * t_max).exp(), gamma),
        )
        .unwrap();
        PseudoSolution::with_derivative(y, dy).unwrap()
    }

    #[test]
    fn residual_of_the_expansion_example_is_exact() {
        let problem = SemilinearProblem::linear_only(
            LinearSystem::scalar(1.0),
            DichotomySpec::expansion(1, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let pseudo = expansion_pseudosolution(1.0, 1.0, FALLBACK_T_MAX, 4097);
        let res = residual(&problem, &pseudo).unwrap();
        for (i, &t) in res.grid().iter().enumerate() {
            let got = res.values()[i][0].re;
            assert!((got - (-t).exp()).abs() < 1e-12, "t = {t}");
        }
        let tail = res.tail().unwrap();
        assert!((tail.rate - 1.0).abs() < 1e-12);
        assert!((tail.coeff[0].re - (-FALLBACK_T_MAX).exp()).abs() < 1e-15);
    }

    #[test]
    fn shadowing_the_expansion_example_lands_on_zero() {
        let problem = SemilinearProblem::linear_only(
            LinearSystem::scalar(1.0),
            DichotomySpec::expansion(1, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let pseudo = expansion_pseudosolution(1.0, 1.0, FALLBACK_T_MAX, SOLVER_GRID_NODES);
        let triple = ConjugateTriple::from_f64(2.0, 2.0).unwrap();
        let out = picard_solve(&problem, &pseudo, &triple, &SolveOptions::default()).unwrap();
        let cert = &out.certificate;
        assert_eq!(cert.iterations, 1);
        assert!((cert.epsilon - 0.5f64.sqrt()).abs() < 1e-6, "eps = {}", cert.epsilon);
        assert!((cert.constant - 1.0).abs() < 1e-12);
        // the exact correction cancels y, so the solution is identically zero
        let sup_x = out
            .solution
            .node_norms(VectorNorm::Max)
            .into_iter()
            .fold(0.0, f64::max);
        assert!(sup_x < 1e-6, "sup |x| = {sup_x}");
        assert!((cert.deviation - 0.125f64.sqrt()).abs() < 1e-6);
        assert!(cert.deviation <= cert.bound + 1e-9);
        assert!(cert.residual_check < 1e-6, "check = {}", cert.residual_check);
    }

    #[test]
    fn causal_response_matches_closed_form_for_diagonal_system() {
        let problem = SemilinearProblem::linear_only(
            LinearSystem::diagonal_real(&[-1.0, -2.0]).unwrap(),
            DichotomySpec::contraction(2, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let t_max = 25.0;
        let grid = GridFunction::uniform_grid(t_max, 4097);
        let rates = [0.3, 0.5];
        let g = GridFunction::sample(
            grid,
            |t| DVector::from_iterator(2, rates.iter().map(|&r| c((-r * t).exp()))),
            Some(
                ExpTail::new(
                    DVector::from_iterator(2, rates.iter().map(|&r| c((-r * t_max).exp()))),
                    0.3,
                )
                .unwrap(),
            ),
        )
        .unwrap();
        let z = forced_response(&problem, &g).unwrap();
        for &i in &[82usize, 328, 1229, 3277] {
            let t = z.grid()[i];
            let v = &z.values()[i];
            // integral_0^t e^{-mu (t-s)} e^{-r s} ds = (e^{-r t} - e^{-mu t}) / (mu - r)
            let want0 = ((-0.3 * t).exp() - (-t).exp()) / 0.7;
            let want1 = ((-0.5 * t).exp() - (-2.0 * t).exp()) / 1.5;
            assert!((v[0].re - want0).abs() < 5e-7, "t={t}: {} vs {want0}", v[0].re);
            assert!((v[1].re - want1).abs() < 5e-7, "t={t}: {} vs {want1}", v[1].re);
        }
    }

    #[test]
    fn stable_jordan_block_couples_the_components() {
        let a = CMatrix::from_row_slice(2, 2, &[c(-1.0), c(1.0), c(0.0), c(-1.0)]);
        let problem = SemilinearProblem::linear_only(
            LinearSystem::constant(a).unwrap(),
            DichotomySpec::contraction(2, 1.0, 0.9).unwrap(),
        )
        .unwrap();
        let t_max = 25.0;
        let grid = GridFunction::uniform_grid(t_max, 4097);
        let g = GridFunction::sample(
            grid,
            |t| DVector::from_iterator(2, [c(0.0), c((-0.2 * t).exp())]),
            Some(
                ExpTail::new(
                    DVector::from_iterator(2, [c(0.0), c((-0.2 * t_max).exp())]),
                    0.2,
                )
                .unwrap(),
            ),
        )
        .unwrap();
        let z = forced_response(&problem, &g).unwrap();
        for &i in &[164usize, 655, 1966] {
            let t = z.grid()[i];
            let v = &z.values()[i];
            // second component: (e^{-0.2 t} - e^{-t}) / 0.8
            let want2 = ((-0.2 * t).exp() - (-t).exp()) / 0.8;
            // first component: e^{-0.2 t} (1 - e^{-0.8 t}(1 + 0.8 t)) / 0.64
            let want1 = (-0.2 * t).exp() * (1.0 - (-0.8 * t).exp() * (1.0 + 0.8 * t)) / 0.64;
            assert!((v[1].re - want2).abs() < 5e-7, "t={t}");
            assert!((v[0].re - want1).abs() < 5e-7, "t={t}: {} vs {want1}", v[0].re);
        }
    }

    #[test]
    fn unstable_jordan_block_couples_the_components() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        let problem = SemilinearProblem::linear_only(
            LinearSystem::constant(a).unwrap(),
            DichotomySpec::expansion(2, 1.0, 0.9).unwrap(),
        )
        .unwrap();
        let t_max = 25.0;
        let grid = GridFunction::uniform_grid(t_max, 8193);
        let g = GridFunction::sample(
            grid,
            |t| DVector::from_element(2, c((-0.5 * t).exp())),
            Some(
                ExpTail::new(DVector::from_element(2, c((-0.5 * t_max).exp())), 0.5).unwrap(),
            ),
        )
        .unwrap();
        let z = forced_response(&problem, &g).unwrap();
        for &i in &[0usize, 328, 1966] {
            let t = z.grid()[i];
            let v = &z.values()[i];
            // -integral_t^inf e^{-(s-t)} e^{-0.5 s} ds = -e^{-0.5 t} / 1.5
            let want2 = -(-0.5 * t).exp() / 1.5;
            // extra coupling term +integral (s-t) e^{-(s-t)} g2 = e^{-0.5t}/2.25
            let want1 = -(-0.5 * t).exp() / 1.5 + (-0.5 * t).exp() / 2.25;
            assert!((v[1].re - want2).abs() < 5e-7, "t={t}");
            assert!((v[0].re - want1).abs() < 5e-7, "t={t}: {} vs {want1}", v[0].re);
        }
    }

    #[test]
    fn integrated_path_matches_componentwise_on_a_shared_case() {
        // time-varying wrapper around a constant matrix hides the fast path
        let a = CMatrix::from_row_slice(2, 2, &[c(-1.0), c(0.0), c(0.0), c(2.0)]);
        let a2 = a.clone();
        let fast = SemilinearProblem::linear_only(
            LinearSystem::constant(a).unwrap(),
            DichotomySpec::new(
                CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]),
                1.0,
                1.0,
            )
            .unwrap(),
        )
        .unwrap();
        let slow = SemilinearProblem::linear_only(
            LinearSystem::time_varying(2, move |_| a2.clone()).unwrap(),
            fast.dichotomy().clone(),
        )
        .unwrap();
        let t_max = 20.0;
        let grid = GridFunction::uniform_grid(t_max, 801);
        let g = GridFunction::sample(
            grid,
            |t| DVector::from_iterator(2, [c((1.0 + t).recip()), c((-0.7 * t).exp() * (2.0 * t).cos())]),
            Some(
                ExpTail::new(
                    DVector::from_iterator(2, [c(0.0), c((-0.7 * t_max).exp() * (2.0 * t_max).cos())]),
                    0.7,
                )
                .unwrap(),
            ),
        )
        .unwrap();
        let z_fast = forced_response(&fast, &g).unwrap();
        let z_slow = forced_response(&slow, &g).unwrap();
        for i in (0..z_fast.len()).step_by(100) {
            let d = max_vector_norm(&(&z_fast.values()[i] - &z_slow.values()[i]));
            assert!(d < 1e-5, "node {i}: {d}");
        }
    }

    #[test]
    fn nonautonomous_expansion_response_matches_quadrature() {
        let problem = SemilinearProblem::linear_only(
            LinearSystem::time_varying(1, |t: f64| {
                CMatrix::from_element(1, 1, c(1.0 + 0.25 * t.cos()))
            })
            .unwrap(),
            DichotomySpec::expansion(1, 1.3, 0.75).unwrap(),
        )
        .unwrap();
        let t_max = 25.0;
        let grid = GridFunction::uniform_grid(t_max, 2001);
        let g = GridFunction::sample_scalar(grid, |t| (-0.5 * t).exp(), scalar_tail((-0.5 * t_max).exp(), 0.5))
            .unwrap();
        let z = forced_response(&problem, &g).unwrap();
        // oracle: -integral_t^inf exp((t-s) + 0.25 (sin t - sin s)) e^{-0.5 s} ds
        let oracle = |t: f64| {
            let mut acc = 0.0;
            let steps = 200_000;
            let upper = 60.0;
            let h = (upper - t) / steps as f64;
            for k in 0..=steps {
                let s = t + k as f64 * h;
                let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
                acc += w * ((t - s) + 0.25 * (t.sin() - s.sin())).exp() * (-0.5 * s).exp();
            }
            -acc * h
        };
        for &t in &[0.0, 3.0, 11.0] {
            let got = z.value_at(t)[0].re;
            let want = oracle(t);
            assert!((got - want).abs() < 1e-5, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn nonlinear_shadowing_converges_and_certifies() {
        let problem = SemilinearProblem::new(
            LinearSystem::scalar(1.0),
            DichotomySpec::expansion(1, 1.0, 1.0).unwrap(),
            |_t: f64, x: &CVector| DVector::from_element(1, Complex64::new(0.25, 0.0) * x[0].sin()),
            0.25,
        )
        .unwrap();
        let pseudo = expansion_pseudosolution(1.0, 1.0, FALLBACK_T_MAX, SOLVER_GRID_NODES);
        let triple = ConjugateTriple::from_f64(2.0, 2.0).unwrap();
        let out = picard_solve(&problem, &pseudo, &triple, &SolveOptions::default()).unwrap();
        let cert = &out.certificate;
        assert!(cert.iterations >= 2 && cert.iterations < 60, "iterations = {}", cert.iterations);
        assert!((cert.kappa - 0.25).abs() < 1e-12);
        assert!(cert.deviation <= cert.bound + 1e-9);
        assert!(cert.residual_check < 1e-5, "check = {}", cert.residual_check);
    }

    #[test]
    fn iteration_budget_is_enforced() {
        let problem = SemilinearProblem::new(
            LinearSystem::scalar(1.0),
            DichotomySpec::expansion(1, 1.0, 1.0).unwrap(),
            |_t: f64, x: &CVector| DVector::from_element(1, Complex64::new(0.25, 0.0) * x[0].sin()),
            0.25,
        )
        .unwrap();
        let pseudo = expansion_pseudosolution(1.0, 1.0, FALLBACK_T_MAX, 2049);
        let triple = ConjugateTriple::from_f64(2.0, 2.0).unwrap();
        let options = SolveOptions {
            max_iterations: 1,
            ..SolveOptions::default()
        };
        let err = picard_solve(&problem, &pseudo, &triple, &options).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn smallness_is_checked_at_construction() {
        let err = SemilinearProblem::new(
            LinearSystem::scalar(1.0),
            DichotomySpec::expansion(1, 1.0, 1.0).unwrap(),
            |_t: f64, x: &CVector| x.clone(),
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SmallnessViolation { .. }));
    }

    #[test]
    fn wrong_lipschitz_declaration_is_caught() {
        let err = SemilinearProblem::new(
            LinearSystem::scalar(1.0),
            DichotomySpec::expansion(1, 1.0, 1.0).unwrap(),
            |_t: f64, x: &CVector| x * Complex64::new(0.9, 0.0),
            0.1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn exact_solution_needs_no_correction() {
        let problem = SemilinearProblem::linear_only(
            LinearSystem::scalar(1.0),
            DichotomySpec::expansion(1, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let grid = GridFunction::uniform_grid(10.0, 257);
        let y = GridFunction::sample_scalar(grid.clone(), |_| 0.0, scalar_tail(0.0, 1.0)).unwrap();
        let dy = GridFunction::sample_scalar(grid, |_| 0.0, scalar_tail(0.0, 1.0)).unwrap();
        let pseudo = PseudoSolution::with_derivative(y, dy).unwrap();
        let triple = ConjugateTriple::from_f64(2.0, 2.0).unwrap();
        let out = picard_solve(&problem, &pseudo, &triple, &SolveOptions::default()).unwrap();
        assert_eq!(out.certificate.epsilon, 0.0);
        assert_eq!(out.certificate.deviation, 0.0);
    }

    #[test]
    fn uniqueness_probe_confirms_expansion_growth() {
        let problem = SemilinearProblem::linear_only(
            LinearSystem::scalar(1.0),
            DichotomySpec::expansion(1, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let grid = GridFunction::uniform_grid(25.0, 501);
        let x = GridFunction::sample_scalar(grid, |_| 0.0, scalar_tail(0.0, 1.0)).unwrap();
        let report = uniqueness_probe(&problem, &x).unwrap();
        assert!(report.conclusive, "min ratio {}", report.min_envelope_ratio);
        assert!(report.min_envelope_ratio >= 1.0 - 1e-6);
        assert_eq!(report.offsets_tested, 2);
    }

    #[test]
    fn uniqueness_probe_rejects_contractions() {
        let problem = SemilinearProblem::linear_only(
            LinearSystem::scalar(-1.0),
            DichotomySpec::contraction(1, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let grid = GridFunction::uniform_grid(25.0, 501);
        let x = GridFunction::sample_scalar(grid, |_| 0.0, scalar_tail(0.0, 1.0)).unwrap();
        assert!(matches!(
            uniqueness_probe(&problem, &x),
            Err(Error::NotExpansion(_))
        ));
    }
}
