//! Low-level convolution engine against exponential kernels.
//!
//! Everything here integrates a piecewise-linear interpolant of sampled
//! data against `u^k e^{-theta u}` exactly, per grid cell, and chains the
//! cells with one multiplication each. The complex rate `theta` covers
//! both plain decay kernels and evolution factors `e^{mu (t-s)}` of
//! eigencomponents. Accuracy is therefore limited only by the linear
//! interpolation of the data, never by the kernel.

use num_complex::Complex64;

use crate::defaults::MOMENT_SERIES_THRESHOLD;
use crate::error::{Error, Result};

/// `J_k(theta, h) = integral_0^h u^k e^{-theta u} du` for `k = 0, 1, 2`.
/// Switches to a series once `|theta| h` is small enough for the closed
/// form to lose digits to cancellation.
pub(crate) fn exp_moments(theta: Complex64, h: f64) -> [Complex64; 3] {
    let x = theta * h;
    if x.norm() < MOMENT_SERIES_THRESHOLD {
        // J_k = h^{k+1} sum_j (-x)^j / (j! (k+j+1))
        let mut j0 = Complex64::new(0.0, 0.0);
        let mut j1 = j0;
        let mut j2 = j0;
        let mut term = Complex64::new(1.0, 0.0); // (-x)^j / j!
        for j in 0..14 {
            let jf = j as f64;
            j0 += term / (jf + 1.0);
            j1 += term / (jf + 2.0);
            j2 += term / (jf + 3.0);
            term *= -x / (jf + 1.0);
        }
        [j0 * h, j1 * h * h, j2 * h * h * h]
    } else {
        let e = (-x).exp();
        let j0 = (1.0 - e) / theta;
        let j1 = (1.0 - e * (1.0 + x)) / (theta * theta);
        let j2 = (2.0 - e * (x * x + 2.0 * x + 2.0)) / (theta * theta * theta);
        [j0, j1, j2]
    }
}

/// Scalar samples plus an optional exponential tail
/// `g(s) = coeff * e^{-rho (s - t_max)}` past the last node.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScalarTail {
    pub coeff: Complex64,
    pub rate: f64,
}

/// Running moments of the past:
/// `out[k][i] = integral_0^{t_i} (t_i - s)^k e^{-theta (t_i - s)} g(s) ds`.
/// `k` ranges over `0..=max_order`, `max_order <= 1`.
pub(crate) fn causal_moments(
    theta: Complex64,
    grid: &[f64],
    g: &[Complex64],
    max_order: usize,
) -> Vec<Vec<Complex64>> {
    assert!(max_order <= 1);
    let n = grid.len();
    let mut a0 = vec![Complex64::new(0.0, 0.0); n];
    let mut a1 = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n - 1 {
        let h = grid[i + 1] - grid[i];
        let e = (-theta * h).exp();
        let [j0, j1, j2] = exp_moments(theta, h);
        let slope = (g[i] - g[i + 1]) / h;
        let l0 = g[i + 1] * j0 + slope * j1;
        a0[i + 1] = e * a0[i] + l0;
        if max_order >= 1 {
            let l1 = g[i + 1] * j1 + slope * j2;
            a1[i + 1] = e * (a1[i] + h * a0[i]) + l1;
        }
    }
    if max_order >= 1 {
        vec![a0, a1]
    } else {
        vec![a0]
    }
}

/// Running moments of the future:
/// `out[k][i] = integral_{t_i}^inf (s - t_i)^k e^{-theta (s - t_i)} g(s) ds`,
/// seeded past the horizon by the analytic tail (zero when `tail` is
/// `None`, which silently truncates: callers decide whether that is
/// acceptable). Fails when the tail does not decay against the kernel.
pub(crate) fn anticausal_moments(
    theta: Complex64,
    grid: &[f64],
    g: &[Complex64],
    tail: Option<ScalarTail>,
    max_order: usize,
) -> Result<Vec<Vec<Complex64>>> {
    assert!(max_order <= 1);
    let n = grid.len();
    let mut w0 = vec![Complex64::new(0.0, 0.0); n];
    let mut w1 = vec![Complex64::new(0.0, 0.0); n];
    if let Some(t) = tail {
        if t.coeff.norm() > 0.0 {
            let denom = theta + t.rate;
            if denom.re <= 0.0 {
                return Err(Error::DivergentNorm(format!(
                    "tail rate {} does not decay against kernel rate {}",
                    t.rate, theta
                )));
            }
            w0[n - 1] = t.coeff / denom;
            if max_order >= 1 {
                w1[n - 1] = t.coeff / (denom * denom);
            }
        }
    }
    for i in (0..n - 1).rev() {
        let h = grid[i + 1] - grid[i];
        let e = (-theta * h).exp();
        let [j0, j1, j2] = exp_moments(theta, h);
        let slope = (g[i + 1] - g[i]) / h;
        let l0 = g[i] * j0 + slope * j1;
        w0[i] = e * w0[i + 1] + l0;
        if max_order >= 1 {
            let l1 = g[i] * j1 + slope * j2;
            w1[i] = e * (w1[i + 1] + h * w0[i + 1]) + l1;
        }
    }
    if max_order >= 1 {
        Ok(vec![w0, w1])
    } else {
        Ok(vec![w0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn moments_series_matches_closed_form_at_threshold() {
        for &theta in &[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.3, -2.0),
            Complex64::new(-0.5, 0.7),
        ] {
            // pick h so |theta| h straddles the switch point
            for &scale in &[0.9, 1.0, 1.1] {
                let h = MOMENT_SERIES_THRESHOLD * scale / theta.norm();
                let e = (-theta * h).exp();
                let x = theta * h;
                let closed = [
                    (1.0 - e) / theta,
                    (1.0 - e * (1.0 + x)) / (theta * theta),
                    (2.0 - e * (x * x + 2.0 * x + 2.0)) / (theta * theta * theta),
                ];
                let got = exp_moments(theta, h);
                for k in 0..3 {
                    let rel = (got[k] - closed[k]).norm() / closed[k].norm();
                    assert!(rel < 1e-11, "k={k} theta={theta} rel={rel}");
                }
            }
        }
    }

    #[test]
    fn causal_reproduces_two_exponential_formula() {
        // integral_0^t e^{-lam (t-s)} e^{-gam s} ds = (e^{-gam t} - e^{-lam t}) / (lam - gam)
        let (lam, gam) = (2.0, 0.5);
        let n = 4001;
        let grid: Vec<f64> = (0..n).map(|i| 10.0 * i as f64 / (n - 1) as f64).collect();
        let g: Vec<Complex64> = grid.iter().map(|&t| c((-gam * t).exp())).collect();
        let out = causal_moments(c(lam), &grid, &g, 0);
        for (i, &t) in grid.iter().enumerate() {
            let exact = ((-gam * t).exp() - (-lam * t).exp()) / (lam - gam);
            assert!(
                (out[0][i].re - exact).abs() < 1e-7,
                "t={t}: {} vs {exact}",
                out[0][i].re
            );
            assert!(out[0][i].im.abs() < 1e-14);
        }
    }

    #[test]
    fn anticausal_with_tail_reproduces_resolvent_formula() {
        // integral_t^inf e^{-mu (s-t)} e^{-gam s} ds = e^{-gam t} / (mu + gam)
        let (mu, gam) = (1.5, 0.8);
        let n = 4001;
        let t_max = 20.0;
        let grid: Vec<f64> = (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect();
        let g: Vec<Complex64> = grid.iter().map(|&t| c((-gam * t).exp())).collect();
        let tail = ScalarTail {
            coeff: c((-gam * t_max).exp()),
            rate: gam,
        };
        let out = anticausal_moments(c(mu), &grid, &g, Some(tail), 1).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            let exact0 = (-gam * t).exp() / (mu + gam);
            let exact1 = (-gam * t).exp() / ((mu + gam) * (mu + gam));
            assert!((out[0][i].re - exact0).abs() < 2e-6, "w0 at t={t}");
            assert!((out[1][i].re - exact1).abs() < 2e-6, "w1 at t={t}");
        }
    }

    #[test]
    fn first_causal_moment_matches_quadrature() {
        // oracle: dense trapezoid evaluation of the defining integral at one t
        let theta = Complex64::new(0.7, 0.3);
        let n = 2001;
        let grid: Vec<f64> = (0..n).map(|i| 5.0 * i as f64 / (n - 1) as f64).collect();
        let gf = |s: f64| Complex64::new((1.5 * s).sin(), (0.5 * s).cos());
        let g: Vec<Complex64> = grid.iter().map(|&t| gf(t)).collect();
        let out = causal_moments(theta, &grid, &g, 1);
        let t = 5.0;
        let m = 200_000;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..=m {
            let s = t * j as f64 / m as f64;
            let w = if j == 0 || j == m { 0.5 } else { 1.0 };
            acc += w * (t - s) * (-theta * (t - s)).exp() * gf(s);
        }
        acc *= t / m as f64;
        assert!((out[1][n - 1] - acc).norm() < 1e-6, "{} vs {}", out[1][n - 1], acc);
    }

    #[test]
    fn nondecaying_tail_against_kernel_is_rejected() {
        let grid = [0.0, 1.0, 2.0];
        let g = [c(1.0), c(1.0), c(1.0)];
        let tail = ScalarTail { coeff: c(1.0), rate: 0.2 };
        let err = anticausal_moments(Complex64::new(-0.5, 0.0), &grid, &g, Some(tail), 0);
        assert!(err.is_err());
    }
}
