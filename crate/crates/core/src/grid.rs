//! Sampled vector functions on `[0, t_max]` with optional analytic
//! exponential tails.
//!
//! A `GridFunction` is the common currency of the crate: residuals,
//! pseudosolutions, corrections, and convolutions all live here. The tail,
//! when present, states that `g(t) = coeff * exp(-rate * (t - t_max))`
//! for `t > t_max`, which lets improper integrals keep a closed form
//! instead of being silently truncated.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pointwise vector norm. The maximum norm is the default everywhere
/// because the two-dimensional theory is stated in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorNorm {
    #[default]
    Max,
    Euclidean,
}

impl VectorNorm {
    pub fn apply(&self, v: &DVector<Complex64>) -> f64 {
        match self {
            VectorNorm::Max => v.iter().map(|z| z.norm()).fold(0.0, f64::max),
            VectorNorm::Euclidean => v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        }
    }
}

/// Exponential tail `t -> coeff * exp(-rate * (t - t_max))`, valid for
/// `t > t_max`. The rate must be positive; a zero coefficient vector is
/// the exact tail of compactly supported data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTail {
    pub coeff: DVector<Complex64>,
    pub rate: f64,
}

impl ExpTail {
    pub fn new(coeff: DVector<Complex64>, rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!("tail rate must be positive, got {rate}")));
        }
        Ok(ExpTail { coeff, rate })
    }

    pub fn zero(dim: usize) -> Self {
        ExpTail {
            coeff: DVector::zeros(dim),
            rate: 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.iter().all(|z| z.norm() == 0.0)
    }

    pub fn eval(&self, u: f64) -> DVector<Complex64> {
        &self.coeff * Complex64::new((-self.rate * u).exp(), 0.0)
    }

    /// `integral_0^inf (|coeff| e^{-rate u})^p du = |coeff|^p / (p rate)`.
    pub fn lp_power_integral(&self, p: f64, norm: VectorNorm) -> f64 {
        let a = norm.apply(&self.coeff);
        if a == 0.0 {
            return 0.0;
        }
        a.powf(p) / (p * self.rate)
    }

    /// Combines two tails into a single conservative one: coefficients are
    /// added (exact at the junction) and the slower rate is kept.
    pub fn combine(a: &ExpTail, b: &ExpTail) -> ExpTail {
        if a.is_zero() {
            return b.clone();
        }
        if b.is_zero() {
            return a.clone();
        }
        ExpTail {
            coeff: &a.coeff + &b.coeff,
            rate: a.rate.min(b.rate),
        }
    }
}

/// A vector-valued function sampled on a strictly increasing grid starting
/// at zero, with an optional exponential tail past the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Vec<f64>,
    values: Vec<DVector<Complex64>>,
    tail: Option<ExpTail>,
}

impl GridFunction {
    /// Validates the grid shape and builds the function.
    pub fn new(
        grid: Vec<f64>,
        values: Vec<DVector<Complex64>>,
        tail: Option<ExpTail>,
    ) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::invalid("grid needs at least two nodes"));
        }
        if grid[0] != 0.0 {
            return Err(Error::invalid(format!(
                "grid must start at 0, got {}",
                grid[0]
            )));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} grid nodes but {} values",
                grid.len(),
                values.len()
            )));
        }
        let dim = values[0].len();
        if dim == 0 || values.iter().any(|v| v.len() != dim) {
            return Err(Error::invalid("values must share one nonzero dimension"));
        }
        if let Some(t) = &tail {
            if t.coeff.len() != dim {
                return Err(Error::invalid("tail dimension differs from values"));
            }
        }
        Ok(GridFunction { grid, values, tail })
    }

    /// Samples a callable on the given grid.
    pub fn sample<F>(grid: Vec<f64>, f: F, tail: Option<ExpTail>) -> Result<Self>
    where
        F: Fn(f64) -> DVector<Complex64>,
    {
        let values = grid.iter().map(|&t| f(t)).collect();
        GridFunction::new(grid, values, tail)
    }

    /// Samples a scalar real-valued callable.
    pub fn sample_scalar<F>(grid: Vec<f64>, f: F, tail: Option<ExpTail>) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        GridFunction::sample(
            grid,
            |t| DVector::from_element(1, Complex64::new(f(t), 0.0)),
            tail,
        )
    }

    /// `n` nodes placed uniformly on `[0, t_max]`.
    pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
        assert!(n >= 2 && t_max > 0.0);
        let last = (n - 1) as f64;
        (0..n).map(|i| t_max * (i as f64) / last).collect()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[DVector<Complex64>] {
        &self.values
    }

    pub fn tail(&self) -> Option<&ExpTail> {
        self.tail.as_ref()
    }

    pub fn with_tail(mut self, tail: Option<ExpTail>) -> Self {
        self.tail = tail;
        self
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// True when all spacings agree to a relative `1e-9`.
    pub fn is_uniform(&self) -> bool {
        let h0 = self.grid[1] - self.grid[0];
        self.grid
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h0).abs() <= 1e-9 * h0)
    }

    /// Pointwise norms `|g(t_i)|` at every node.
    pub fn node_norms(&self, norm: VectorNorm) -> Vec<f64> {
        self.values.iter().map(|v| norm.apply(v)).collect()
    }

    /// Linear interpolation between nodes; tail evaluation past `t_max`;
    /// constant extension is never used.
    pub fn value_at(&self, t: f64) -> DVector<Complex64> {
        if t >= self.t_max() {
            return match &self.tail {
                Some(tail) => tail.eval(t - self.t_max()),
                None => self.values.last().unwrap().clone(),
            };
        }
        if t <= 0.0 {
            return self.values[0].clone();
        }
        let i = match self.grid.partition_point(|&x| x <= t) {
            0 => 0,
            k => k - 1,
        };
        let (t0, t1) = (self.grid[i], self.grid[i + 1]);
        let w = (t - t0) / (t1 - t0);
        &self.values[i] * Complex64::new(1.0 - w, 0.0) + &self.values[i + 1] * Complex64::new(w, 0.0)
    }

    fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid.len() != other.grid.len()
            || self.grid.iter().zip(&other.grid).any(|(a, b)| a != b)
        {
            return Err(Error::invalid("grid functions live on different grids"));
        }
        if self.dim() != other.dim() {
            return Err(Error::invalid("grid functions have different dimensions"));
        }
        Ok(())
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        let tail = match (&self.tail, &other.tail) {
            (Some(a), Some(b)) => Some(ExpTail::combine(a, b)),
            _ => None,
        };
        GridFunction::new(self.grid.clone(), values, tail)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        let tail = match (&self.tail, &other.tail) {
            (Some(a), Some(b)) => {
                let neg = ExpTail {
                    coeff: -&b.coeff,
                    rate: b.rate,
                };
                Some(ExpTail::combine(a, &neg))
            }
            _ => None,
        };
        GridFunction::new(self.grid.clone(), values, tail)
    }

    pub fn scale(&self, factor: Complex64) -> GridFunction {
        let values = self.values.iter().map(|v| v * factor).collect();
        let tail = self.tail.as_ref().map(|t| ExpTail {
            coeff: &t.coeff * factor,
            rate: t.rate,
        });
        GridFunction {
            grid: self.grid.clone(),
            values,
            tail,
        }
    }

    /// Applies `f(t, g(t))` at every node. The tail is dropped unless the
    /// caller restores one: a general transform has no predictable decay.
    pub fn map<F>(&self, f: F) -> GridFunction
    where
        F: Fn(f64, &DVector<Complex64>) -> DVector<Complex64>,
    {
        let values = self
            .grid
            .iter()
            .zip(&self.values)
            .map(|(&t, v)| f(t, v))
            .collect();
        GridFunction {
            grid: self.grid.clone(),
            values,
            tail: None,
        }
    }

    /// Splits the trailing 20% of the grid in two windows and returns the
    /// larger pointwise norm of each: evidence for or against decay.
    pub fn trailing_trend(&self, norm: VectorNorm) -> (f64, f64) {
        let n = self.grid.len();
        let start = n - (n / 5).max(2);
        let mid = start + (n - start) / 2;
        let max_on = |range: std::ops::Range<usize>| {
            range
                .map(|i| norm.apply(&self.values[i]))
                .fold(0.0, f64::max)
        };
        (max_on(start..mid), max_on(mid..n))
    }

    /// Derivative from sampled values: fourth-order central stencils on
    /// uniform grids, three-point formulas otherwise and at the edges.
    /// The tail of the derivative follows from differentiating the tail.
    pub fn numerical_derivative(&self) -> GridFunction {
        let n = self.grid.len();
        let dim = self.dim();
        let mut dv: Vec<DVector<Complex64>> = Vec::with_capacity(n);
        let uniform = self.is_uniform();
        for i in 0..n {
            let d = if uniform && n >= 5 && i >= 2 && i + 2 < n {
                let h = self.grid[1] - self.grid[0];
                (&self.values[i - 2] - &self.values[i + 2]
                    + (&self.values[i + 1] - &self.values[i - 1]) * Complex64::new(8.0, 0.0))
                    / Complex64::new(12.0 * h, 0.0)
            } else {
                // three-point nonuniform stencil, one-sided at the ends
                let (a, b, c) = if i == 0 {
                    (0usize, 1usize, 2usize)
                } else if i + 1 == n {
                    (n - 3, n - 2, n - 1)
                } else {
                    (i - 1, i, i + 1)
                };
                let (ta, tb, tc) = (self.grid[a], self.grid[b], self.grid[c]);
                let t = self.grid[i];
                let wa = (2.0 * t - tb - tc) / ((ta - tb) * (ta - tc));
                let wb = (2.0 * t - ta - tc) / ((tb - ta) * (tb - tc));
                let wc = (2.0 * t - ta - tb) / ((tc - ta) * (tc - tb));
                &self.values[a] * Complex64::new(wa, 0.0)
                    + &self.values[b] * Complex64::new(wb, 0.0)
                    + &self.values[c] * Complex64::new(wc, 0.0)
            };
            debug_assert_eq!(d.len(), dim);
            dv.push(d);
        }
        let tail = self.tail.as_ref().map(|t| ExpTail {
            coeff: &t.coeff * Complex64::new(-t.rate, 0.0),
            rate: t.rate,
        });
        GridFunction {
            grid: self.grid.clone(),
            values: dv,
            tail,
        }
    }

    /// Fits `c * exp(-rho (t - t_max))` to the trailing window by least
    /// squares on `log |g|`. Returns `None` unless the fit is convincing
    /// (decaying, well correlated) or the trailing data is negligible.
    pub fn infer_exp_tail(&self, norm: VectorNorm) -> Option<ExpTail> {
        let n = self.grid.len();
        let window = (n / 10).max(8).min(n);
        let start = n - window;
        let norms: Vec<f64> = (start..n).map(|i| norm.apply(&self.values[i])).collect();
        let peak = self
            .values
            .iter()
            .map(|v| norm.apply(v))
            .fold(0.0, f64::max);
        let last = *norms.last().unwrap();
        if last <= 1e-14 * peak.max(1.0) {
            return Some(ExpTail::zero(self.dim()));
        }
        if norms.iter().any(|&x| x <= 0.0) {
            return None;
        }
        let ts: Vec<f64> = self.grid[start..].to_vec();
        let logs: Vec<f64> = norms.iter().map(|x| x.ln()).collect();
        let m = ts.len() as f64;
        let tbar = ts.iter().sum::<f64>() / m;
        let lbar = logs.iter().sum::<f64>() / m;
        let sxx: f64 = ts.iter().map(|t| (t - tbar).powi(2)).sum();
        let sxy: f64 = ts
            .iter()
            .zip(&logs)
            .map(|(t, l)| (t - tbar) * (l - lbar))
            .sum();
        let slope = sxy / sxx;
        if !(slope < 0.0) {
            return None;
        }
        // demand a good linear fit of log|g|: residual spread well below |slope| * span
        let resid: f64 = ts
            .iter()
            .zip(&logs)
            .map(|(t, l)| (l - (lbar + slope * (t - tbar))).powi(2))
            .sum::<f64>()
            .sqrt();
        let span = ts.last().unwrap() - ts[0];
        if resid > 1e-3 * slope.abs() * span * m.sqrt() {
            return None;
        }
        let rate = -slope;
        // keep the vector direction of the last sample, scaled to the fitted level
        let level = (lbar + slope * (self.t_max() - tbar)).exp();
        let dir = self.values.last().unwrap();
        let dn = norm.apply(dir);
        if dn == 0.0 {
            return None;
        }
        let coeff = dir * Complex64::new(level / dn, 0.0);
        ExpTail::new(coeff, rate).ok()
    }
}

// --- serialization -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TailRecord {
    coeff: Vec<[f64; 2]>,
    rate: f64,
}

#[derive(Serialize, Deserialize)]
struct GridFunctionRecord {
    dim: usize,
    grid: Vec<f64>,
    /// row-major: one row of `[re, im]` pairs per grid node
    values: Vec<Vec<[f64; 2]>>,
    tail: Option<TailRecord>,
}

impl GridFunction {
    pub fn to_json(&self) -> String {
        let rec = GridFunctionRecord {
            dim: self.dim(),
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            tail: self.tail.as_ref().map(|t| TailRecord {
                coeff: t.coeff.iter().map(|z| [z.re, z.im]).collect(),
                rate: t.rate,
            }),
        };
        serde_json::to_string_pretty(&rec).expect("grid function serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: GridFunctionRecord =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad JSON: {e}")))?;
        let values = rec
            .values
            .iter()
            .map(|row| DVector::from_iterator(row.len(), row.iter().map(|p| Complex64::new(p[0], p[1]))))
            .collect::<Vec<_>>();
        if values.iter().any(|v| v.len() != rec.dim) {
            return Err(Error::invalid("value row width disagrees with dim"));
        }
        let tail = match rec.tail {
            Some(t) => Some(ExpTail::new(
                DVector::from_iterator(t.coeff.len(), t.coeff.iter().map(|p| Complex64::new(p[0], p[1]))),
                t.rate,
            )?),
            None => None,
        };
        GridFunction::new(rec.grid, values, tail)
    }

    /// CSV with header `t, v1_re, v1_im, ..., vd_re, vd_im`. The tail is
    /// not representable in CSV and is dropped; use JSON to keep it.
    pub fn to_csv(&self) -> String {
        let dim = self.dim();
        let mut out = String::from("t");
        for k in 1..=dim {
            out.push_str(&format!(",v{k}_re,v{k}_im"));
        }
        out.push('\n');
        for (t, v) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{t}"));
            for z in v.iter() {
                out.push_str(&format!(",{},{}", z.re, z.im));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::invalid("empty CSV"))?;
        let cols = header.split(',').count();
        if cols < 3 || (cols - 1) % 2 != 0 {
            return Err(Error::invalid(format!(
                "CSV must have columns t,v1_re,v1_im,...; got {cols} columns"
            )));
        }
        let dim = (cols - 1) / 2;
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols {
                return Err(Error::invalid(format!(
                    "CSV row {} has {} fields, expected {cols}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad number {s:?} in CSV row {}", lineno + 2)))
            };
            grid.push(parse(fields[0])?);
            let mut row = DVector::zeros(dim);
            for k in 0..dim {
                row[k] = Complex64::new(parse(fields[1 + 2 * k])?, parse(fields[2 + 2 * k])?);
            }
            values.push(row);
        }
        GridFunction::new(grid, values, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expgrid(gamma: f64) -> GridFunction {
        let grid = GridFunction::uniform_grid(10.0, 201);
        let tail_coeff = DVector::from_element(1, Complex64::new((-gamma * 10.0f64).exp(), 0.0));
        GridFunction::sample_scalar(
            grid,
            |t| (-gamma * t).exp(),
            Some(ExpTail::new(tail_coeff, gamma).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        let v = vec![DVector::from_element(1, Complex64::new(1.0, 0.0)); 3];
        assert!(GridFunction::new(vec![0.0, 1.0, 1.0], v.clone(), None).is_err());
        assert!(GridFunction::new(vec![0.5, 1.0, 2.0], v.clone(), None).is_err());
        assert!(GridFunction::new(vec![0.0, 2.0, 1.0], v, None).is_err());
    }

    #[test]
    fn rejects_nonpositive_tail_rate() {
        assert!(ExpTail::new(DVector::from_element(1, Complex64::new(1.0, 0.0)), 0.0).is_err());
        assert!(ExpTail::new(DVector::from_element(1, Complex64::new(1.0, 0.0)), -1.0).is_err());
    }

    #[test]
    fn interpolation_and_tail_evaluation() {
        let g = expgrid(1.0);
        let mid = g.value_at(0.025)[0].re;
        assert!((mid - 0.5 * (1.0 + (-0.05f64).exp())).abs() < 1e-12);
        let beyond = g.value_at(12.0)[0].re;
        assert!((beyond - (-12.0f64).exp()).abs() < 1e-12 * (-12.0f64).exp());
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let g = expgrid(0.7);
        let back = GridFunction::from_json(&g.to_json()).unwrap();
        assert_eq!(g.grid(), back.grid());
        for (a, b) in g.values().iter().zip(back.values()) {
            assert_eq!(a, b);
        }
        let (ta, tb) = (g.tail().unwrap(), back.tail().unwrap());
        assert_eq!(ta.coeff, tb.coeff);
        assert_eq!(ta.rate, tb.rate);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let grid = GridFunction::uniform_grid(3.0, 7);
        let g = GridFunction::sample(
            grid,
            |t| {
                DVector::from_iterator(
                    2,
                    [Complex64::new(t.sin(), t.cos()), Complex64::new(1.0 / (1.0 + t), -t)],
                )
            },
            None,
        )
        .unwrap();
        let back = GridFunction::from_csv(&g.to_csv()).unwrap();
        assert_eq!(g.grid(), back.grid());
        for (a, b) in g.values().iter().zip(back.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn derivative_of_smooth_sample_is_accurate() {
        let grid = GridFunction::uniform_grid(5.0, 501);
        let g = GridFunction::sample_scalar(grid, |t| (0.5 * t).sin(), None).unwrap();
        let d = g.numerical_derivative();
        for (i, &t) in g.grid().iter().enumerate() {
            let expected = 0.5 * (0.5 * t).cos();
            let got = d.values()[i][0].re;
            let tol = if i < 2 || i + 2 >= g.len() { 1e-4 } else { 1e-8 };
            assert!((got - expected).abs() < tol, "t={t} got={got} want={expected}");
        }
    }

    #[test]
    fn tail_inference_recovers_rate() {
        let grid = GridFunction::uniform_grid(20.0, 2001);
        let g = GridFunction::sample_scalar(grid, |t| 3.0 * (-0.8 * t).exp(), None).unwrap();
        let tail = g.infer_exp_tail(VectorNorm::Max).unwrap();
        assert!((tail.rate - 0.8).abs() < 1e-6);
        let expected = 3.0 * (-0.8f64 * 20.0).exp();
        assert!((tail.coeff[0].norm() - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn tail_inference_declines_growth() {
        let grid = GridFunction::uniform_grid(10.0, 501);
        let g = GridFunction::sample_scalar(grid, |t| (0.2 * t).exp(), None).unwrap();
        assert!(g.infer_exp_tail(VectorNorm::Max).is_none());
    }
}
