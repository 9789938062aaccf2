//! Lebesgue norms on `[0, inf)` and convolution against exponential
//! kernels.
//!
//! Finite-exponent norms integrate the `p`-th power of the interpolated
//! node norms over the grid (Simpson on uniform grids, exact per-cell on
//! nonuniform ones) and add the closed-form contribution of the analytic
//! tail. Data without a tail is integrated on its truncation only when
//! its trailing trend decays; otherwise the norm is reported as
//! untrustworthy rather than guessed.

use num_complex::Complex64;
use serde::Serialize;

use crate::defaults::{YOUNG_ABS_TOL, YOUNG_REL_TOL};
use crate::error::{Error, Result};
use crate::exponent::{ConjugateTriple, Exponent};
use crate::grid::{ExpTail, GridFunction, VectorNorm};
use crate::kernel::{anticausal_moments, causal_moments, ScalarTail};

/// Composite quadrature of sampled scalar data: Simpson on uniform grids
/// (with a 3/8 closing rule when the interval count is odd), trapezoid on
/// nonuniform grids.
pub(crate) fn quadrature(grid: &[f64], values: &[f64]) -> f64 {
    let n = grid.len();
    debug_assert_eq!(n, values.len());
    if n < 2 {
        return 0.0;
    }
    let h0 = grid[1] - grid[0];
    let uniform = grid.windows(2).all(|w| ((w[1] - w[0]) - h0).abs() <= 1e-9 * h0);
    let m = n - 1;
    if !uniform || m == 1 {
        let mut acc = 0.0;
        for i in 0..m {
            acc += 0.5 * (grid[i + 1] - grid[i]) * (values[i] + values[i + 1]);
        }
        return acc;
    }
    let simpson_end = if m.is_multiple_of(2) { m } else { m - 3 };
    let mut acc = 0.0;
    let mut i = 0;
    while i < simpson_end {
        acc += h0 / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
        i += 2;
    }
    if !m.is_multiple_of(2) {
        if m >= 3 {
            let k = m - 3;
            acc += 3.0 * h0 / 8.0
                * (values[k] + 3.0 * values[k + 1] + 3.0 * values[k + 2] + values[k + 3]);
        } else {
            acc += 0.5 * h0 * (values[0] + values[1]);
        }
    }
    acc
}

/// Exact integral of the `p`-th power of a linear segment running from
/// `m0` to `m1` over a cell of width `h`.
fn power_cell(m0: f64, m1: f64, h: f64, p: f64) -> f64 {
    let scale = m0.max(m1);
    if scale <= 0.0 {
        return 0.0;
    }
    if (m1 - m0).abs() <= 1e-9 * scale {
        return h * (0.5 * (m0 + m1)).powf(p);
    }
    h * (m1.powf(p + 1.0) - m0.powf(p + 1.0)) / ((p + 1.0) * (m1 - m0))
}

/// Integral of the `p`-th power of the piecewise-linear interpolant of
/// the node norms. Uniform grids use composite Simpson on the powers
/// (fourth order on smooth data); nonuniform grids integrate each linear
/// cell exactly, which is what kinked data such as spike trains needs.
fn power_quadrature(grid: &[f64], norms: &[f64], p: f64) -> f64 {
    let n = grid.len();
    if n < 2 {
        return 0.0;
    }
    let h0 = grid[1] - grid[0];
    let uniform = grid.windows(2).all(|w| ((w[1] - w[0]) - h0).abs() <= 1e-9 * h0);
    if uniform {
        let powers: Vec<f64> = norms.iter().map(|x| x.powf(p)).collect();
        return quadrature(grid, &powers);
    }
    let mut acc = 0.0;
    for i in 0..n - 1 {
        acc += power_cell(norms[i], norms[i + 1], grid[i + 1] - grid[i], p);
    }
    acc
}

fn check_trend(g: &GridFunction, norm: VectorNorm) -> Result<()> {
    let (early, late) = g.trailing_trend(norm);
    let peak = g
        .values()
        .iter()
        .map(|v| norm.apply(v))
        .fold(0.0, f64::max);
    if late <= 1e-12 * peak.max(1e-300) {
        return Ok(());
    }
    if late >= early * (1.0 - 1e-9) {
        return Err(Error::DivergentNorm(format!(
            "no tail given and trailing trend does not decay ({early:.3e} -> {late:.3e})"
        )));
    }
    Ok(())
}

/// `L^p` norm over `[0, inf)` in the given pointwise norm.
pub fn lp_norm_with(g: &GridFunction, p: Exponent, norm: VectorNorm) -> Result<f64> {
    match p {
        Exponent::Infinity => {
            let grid_max = g
                .node_norms(norm)
                .into_iter()
                .fold(0.0, f64::max);
            let tail_max = g.tail().map(|t| norm.apply(&t.coeff)).unwrap_or(0.0);
            Ok(grid_max.max(tail_max))
        }
        Exponent::Finite(pv) => {
            let tail_part = match g.tail() {
                Some(t) => t.lp_power_integral(pv, norm),
                None => {
                    check_trend(g, norm)?;
                    0.0
                }
            };
            let grid_part = power_quadrature(g.grid(), &g.node_norms(norm), pv);
            Ok((grid_part + tail_part).powf(1.0 / pv))
        }
    }
}

/// `L^p` norm over `[0, inf)` in the maximum pointwise norm.
pub fn lp_norm(g: &GridFunction, p: Exponent) -> Result<f64> {
    lp_norm_with(g, p, VectorNorm::Max)
}

/// `L^p` norm of the restriction to `[0, t_end]`. The tail is excluded by
/// construction, so no decay requirement applies.
pub fn lp_norm_truncated(g: &GridFunction, p: Exponent, t_end: f64, norm: VectorNorm) -> Result<f64> {
    if !(t_end > 0.0) {
        return Err(Error::invalid("truncation endpoint must be positive"));
    }
    let t_end = t_end.min(g.t_max());
    let grid = g.grid();
    let cut = grid.partition_point(|&t| t <= t_end);
    // cut >= 1 because grid[0] = 0 < t_end
    match p {
        Exponent::Infinity => {
            let mut m = g.values()[..cut]
                .iter()
                .map(|v| norm.apply(v))
                .fold(0.0, f64::max);
            if cut < grid.len() && grid[cut - 1] < t_end {
                m = m.max(norm.apply(&g.value_at(t_end)));
            }
            Ok(m)
        }
        Exponent::Finite(pv) => {
            let norms: Vec<f64> = g.values()[..cut].iter().map(|v| norm.apply(v)).collect();
            let mut acc = power_quadrature(&grid[..cut], &norms, pv);
            if cut < grid.len() && grid[cut - 1] < t_end {
                let fb = norm.apply(&g.value_at(t_end));
                acc += power_cell(norms[cut - 1], fb, t_end - grid[cut - 1], pv);
            }
            Ok(acc.powf(1.0 / pv))
        }
    }
}

/// Which side of the present the kernel integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSide {
    /// `(k * c)(t) = integral_0^t e^{-rate (t - s)} c(s) ds`
    Causal,
    /// `(k * c)(t) = integral_t^inf e^{-rate (s - t)} c(s) ds`
    Anticausal,
}

/// One-sided exponential kernel with positive decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpKernel {
    rate: f64,
    side: KernelSide,
}

impl ExpKernel {
    pub fn causal(rate: f64) -> Result<Self> {
        ExpKernel::new(rate, KernelSide::Causal)
    }

    pub fn anticausal(rate: f64) -> Result<Self> {
        ExpKernel::new(rate, KernelSide::Anticausal)
    }

    pub fn new(rate: f64, side: KernelSide) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!("kernel rate must be positive, got {rate}")));
        }
        Ok(ExpKernel { rate, side })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn side(&self) -> KernelSide {
        self.side
    }

    /// `L^r` norm of the kernel profile: `(1/(rate r))^(1/r)` for finite
    /// `r` and `1` for `r = inf` (the degenerate-power convention).
    pub fn lr_norm(&self, r: Exponent) -> f64 {
        young_factor(self.rate, r)
    }
}

/// `(1/(rate r))^(1/r)`, the kernel norm entering every stability
/// constant; equals `1` when `r = inf`.
pub fn young_factor(rate: f64, r: Exponent) -> f64 {
    match r {
        Exponent::Infinity => 1.0,
        Exponent::Finite(rv) => (1.0 / (rate * rv)).powf(1.0 / rv),
    }
}

/// Convolution of sampled data with a one-sided exponential kernel.
///
/// The grid part is exact for the piecewise-linear interpolant of `c`.
/// Tails: anticausal results inherit an exact tail from `c`; causal
/// results get an exact tail when `c` has a zero tail, and otherwise a
/// single-term tail that matches the true value at the horizon and decays
/// at the slower of the two rates.
pub fn convolve(k: &ExpKernel, c: &GridFunction) -> Result<GridFunction> {
    let dim = c.dim();
    let n = c.len();
    let theta = Complex64::new(k.rate, 0.0);
    let mut out = vec![nalgebra::DVector::<Complex64>::zeros(dim); n];
    let grid = c.grid();
    for comp in 0..dim {
        let series: Vec<Complex64> = c.values().iter().map(|v| v[comp]).collect();
        let col = match k.side {
            KernelSide::Causal => causal_moments(theta, grid, &series, 0).remove(0),
            KernelSide::Anticausal => {
                let tail = c.tail().map(|t| ScalarTail {
                    coeff: t.coeff[comp],
                    rate: t.rate,
                });
                anticausal_moments(theta, grid, &series, tail, 0)?.remove(0)
            }
        };
        for (i, z) in col.into_iter().enumerate() {
            out[i][comp] = z;
        }
    }
    let tail = match (k.side, c.tail()) {
        (_, None) => None,
        (KernelSide::Anticausal, Some(t)) => Some(ExpTail::new(
            &t.coeff * Complex64::new(1.0 / (k.rate + t.rate), 0.0),
            t.rate,
        )?),
        (KernelSide::Causal, Some(t)) => {
            let rate = if t.is_zero() { k.rate } else { k.rate.min(t.rate) };
            Some(ExpTail::new(out[n - 1].clone(), rate)?)
        }
    };
    GridFunction::new(grid.to_vec(), out, tail)
}

/// Outcome of one convolution-inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct YoungReport {
    pub lhs: f64,
    pub rhs: f64,
    pub kernel_norm: f64,
    pub data_norm: f64,
    pub holds: bool,
}

/// Checks `|k * c|_p <= |k|_r |c|_q` with the conjugate `r` computed from
/// `(p, q)`. The slack `1e-9 + 1e-7 * rhs` absorbs quadrature error.
pub fn young_check(k: &ExpKernel, c: &GridFunction, p: Exponent, q: Exponent) -> Result<YoungReport> {
    let triple = ConjugateTriple::new(p, q)?;
    let data_norm = lp_norm(c, q)?;
    let kernel_norm = k.lr_norm(triple.r);
    let rhs = kernel_norm * data_norm;
    let lhs = lp_norm(&convolve(k, c)?, p)?;
    Ok(YoungReport {
        lhs,
        rhs,
        kernel_norm,
        data_norm,
        holds: lhs <= rhs + YOUNG_ABS_TOL + YOUNG_REL_TOL * rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn exp_fn(gamma: f64, t_max: f64, n: usize) -> GridFunction {
        let grid = GridFunction::uniform_grid(t_max, n);
        let coeff = DVector::from_element(1, Complex64::new((-gamma * t_max).exp(), 0.0));
        GridFunction::sample_scalar(
            grid,
            |t| (-gamma * t).exp(),
            Some(ExpTail::new(coeff, gamma).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn l2_norm_of_unit_exponential() {
        let g = exp_fn(1.0, 25.0, 4097);
        let got = lp_norm(&g, Exponent::finite(2.0).unwrap()).unwrap();
        assert!((got - 0.5f64.sqrt()).abs() < 1e-7, "got {got}");
    }

    #[test]
    fn sup_norm_of_unit_exponential() {
        let g = exp_fn(1.0, 25.0, 4097);
        let got = lp_norm(&g, Exponent::Infinity).unwrap();
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let grid = GridFunction::uniform_grid(5.0, 64);
        let g = GridFunction::sample_scalar(grid, |_| 0.0, Some(ExpTail::zero(1))).unwrap();
        for p in [Exponent::finite(1.0).unwrap(), Exponent::finite(2.0).unwrap(), Exponent::Infinity] {
            assert_eq!(lp_norm(&g, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn growing_data_without_tail_is_rejected_for_finite_p() {
        let grid = GridFunction::uniform_grid(10.0, 257);
        let g = GridFunction::sample_scalar(grid, |t| (0.1 * t).exp(), None).unwrap();
        let err = lp_norm(&g, Exponent::finite(2.0).unwrap());
        assert!(matches!(err, Err(Error::DivergentNorm(_))));
        // sup norm over the truncation is still reported
        assert!(lp_norm(&g, Exponent::Infinity).is_ok());
    }

    #[test]
    fn constant_data_without_tail_is_rejected_for_finite_p() {
        let grid = GridFunction::uniform_grid(10.0, 257);
        let g = GridFunction::sample_scalar(grid, |_| 1.0, None).unwrap();
        assert!(matches!(
            lp_norm(&g, Exponent::finite(1.0).unwrap()),
            Err(Error::DivergentNorm(_))
        ));
    }

    #[test]
    fn slowly_decaying_data_without_tail_gets_truncated_norm() {
        let grid = GridFunction::uniform_grid(100.0, 4001);
        let g = GridFunction::sample_scalar(grid, |t| (1.0 + t).powf(-0.5), None).unwrap();
        let got = lp_norm(&g, Exponent::finite(1.0).unwrap()).unwrap();
        let exact = 2.0 * (101.0f64.sqrt() - 1.0);
        assert!((got - exact).abs() < 1e-4 * exact);
    }

    #[test]
    fn truncated_norm_matches_antiderivative() {
        let g = exp_fn(1.0, 25.0, 4097);
        let got = lp_norm_truncated(&g, Exponent::finite(1.0).unwrap(), 3.0, VectorNorm::Max).unwrap();
        let exact = 1.0 - (-3.0f64).exp();
        assert!((got - exact).abs() < 1e-8);
        let sup = lp_norm_truncated(&g, Exponent::Infinity, 3.0, VectorNorm::Max).unwrap();
        assert!((sup - 1.0).abs() < 1e-12);
    }

    #[test]
    fn causal_convolution_matches_closed_form() {
        let (a, gamma) = (2.0, 0.5);
        let c = exp_fn(gamma, 25.0, 8193);
        let k = ExpKernel::causal(a).unwrap();
        let out = convolve(&k, &c).unwrap();
        for (i, &t) in out.grid().iter().enumerate().step_by(512) {
            let exact = ((-gamma * t).exp() - (-a * t).exp()) / (a - gamma);
            assert!(
                (out.values()[i][0].re - exact).abs() < 2e-7,
                "t={t}: {} vs {exact}",
                out.values()[i][0].re
            );
        }
    }

    #[test]
    fn anticausal_convolution_matches_closed_form() {
        let (a, gamma) = (1.0, 1.0);
        let c = exp_fn(gamma, 25.0, 8193);
        let k = ExpKernel::anticausal(a).unwrap();
        let out = convolve(&k, &c).unwrap();
        for (i, &t) in out.grid().iter().enumerate().step_by(512) {
            let exact = (-gamma * t).exp() / (a + gamma);
            assert!(
                (out.values()[i][0].re - exact).abs() < 1e-6,
                "t={t}: {} vs {exact}",
                out.values()[i][0].re
            );
        }
        // tail is exact for anticausal results
        let tail = out.tail().unwrap();
        assert!((tail.rate - gamma).abs() < 1e-14);
        let expected = (-gamma * 25.0f64).exp() / (a + gamma);
        assert!((tail.coeff[0].re - expected).abs() < 1e-12);
    }

    #[test]
    fn convolving_zero_gives_zero() {
        let grid = GridFunction::uniform_grid(5.0, 65);
        let z = GridFunction::sample_scalar(grid, |_| 0.0, Some(ExpTail::zero(1))).unwrap();
        for k in [ExpKernel::causal(1.0).unwrap(), ExpKernel::anticausal(1.0).unwrap()] {
            let out = convolve(&k, &z).unwrap();
            assert!(out.values().iter().all(|v| v[0].norm() == 0.0));
            assert!(out.tail().unwrap().is_zero() || out.tail().unwrap().coeff[0].norm() == 0.0);
        }
    }

    #[test]
    fn kernel_norm_matches_direct_quadrature() {
        for rate in [0.5, 1.0, 3.0] {
            for rv in [1.0, 1.5, 2.0, 4.0] {
                let r = Exponent::finite(rv).unwrap();
                let k = ExpKernel::causal(rate).unwrap();
                // oracle: sample the kernel profile itself and take its norm
                let t_max = 60.0 / rate;
                let grid = GridFunction::uniform_grid(t_max, 8193);
                let coeff = DVector::from_element(1, Complex64::new((-rate * t_max).exp(), 0.0));
                let profile = GridFunction::sample_scalar(
                    grid,
                    |t| (-rate * t).exp(),
                    Some(ExpTail::new(coeff, rate).unwrap()),
                )
                .unwrap();
                let direct = lp_norm(&profile, r).unwrap();
                assert!(
                    (k.lr_norm(r) - direct).abs() < 1e-7 * direct.max(1.0),
                    "rate={rate} r={rv}: {} vs {direct}",
                    k.lr_norm(r)
                );
            }
        }
    }

    #[test]
    fn degenerate_kernel_norm_is_one() {
        let k = ExpKernel::causal(123.0).unwrap();
        assert_eq!(k.lr_norm(Exponent::Infinity), 1.0);
    }

    #[test]
    fn young_inequality_on_smooth_example() {
        let c = exp_fn(1.0, 25.0, 4097);
        let k = ExpKernel::causal(2.0).unwrap();
        for (p, q) in [(2.0, 2.0), (4.0, 2.0), (2.0, 1.0)] {
            let rep = young_check(
                &k,
                &c,
                Exponent::finite(p).unwrap(),
                Exponent::finite(q).unwrap(),
            )
            .unwrap();
            assert!(rep.holds, "p={p} q={q}: {} vs {}", rep.lhs, rep.rhs);
        }
        let rep = young_check(&k, &c, Exponent::Infinity, Exponent::finite(1.0).unwrap()).unwrap();
        assert!(rep.holds);
    }
}
