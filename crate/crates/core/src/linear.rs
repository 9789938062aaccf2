//! Linear systems `x' = A(t) x`, their evolution operators, and spectral
//! analysis of 2x2 complex matrices.
//!
//! Autonomous evolution operators use Putzer's formula for `d <= 2`,
//! which stays accurate through clustered eigenvalues because the only
//! spectral quantity it needs is a divided difference of exponentials.
//! Time-varying coefficients fall back to an adaptive Dormand-Prince
//! integrator.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::defaults::{EIGEN_CLUSTER_REL_TOL, ODE_ABS_TOL, ODE_REL_TOL};
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Maximum norm of a complex vector: `max_k |v_k|`.
pub fn max_vector_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Operator norm induced by the maximum norm: largest row sum of moduli.
pub fn op_norm_inf(m: &CMatrix) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Coefficient of a linear system: a constant matrix or a callable.
#[derive(Clone)]
pub enum Coefficient {
    Constant(CMatrix),
    TimeVarying(Arc<dyn Fn(f64) -> CMatrix + Send + Sync>),
}

/// The linear part `x' = A(t) x` of a problem.
#[derive(Clone)]
pub struct LinearSystem {
    dim: usize,
    coeff: Coefficient,
}

impl fmt::Debug for LinearSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.coeff {
            Coefficient::Constant(a) => write!(f, "LinearSystem(constant, dim {}, A = {:?})", self.dim, a),
            Coefficient::TimeVarying(_) => write!(f, "LinearSystem(time-varying, dim {})", self.dim),
        }
    }
}

impl LinearSystem {
    pub fn constant(a: CMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::invalid("coefficient matrix must be square and nonempty"));
        }
        Ok(LinearSystem {
            dim: a.nrows(),
            coeff: Coefficient::Constant(a),
        })
    }

    pub fn scalar(a: f64) -> Self {
        LinearSystem::constant(CMatrix::from_element(1, 1, Complex64::new(a, 0.0))).unwrap()
    }

    pub fn diagonal(entries: &[Complex64]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("diagonal needs at least one entry"));
        }
        let d = entries.len();
        let mut a = CMatrix::zeros(d, d);
        for (i, &e) in entries.iter().enumerate() {
            a[(i, i)] = e;
        }
        LinearSystem::constant(a)
    }

    pub fn diagonal_real(entries: &[f64]) -> Result<Self> {
        let v: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        LinearSystem::diagonal(&v)
    }

    pub fn time_varying<F>(dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> CMatrix + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(LinearSystem {
            dim,
            coeff: Coefficient::TimeVarying(Arc::new(f)),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, t: f64) -> CMatrix {
        match &self.coeff {
            Coefficient::Constant(a) => a.clone(),
            Coefficient::TimeVarying(f) => f(t),
        }
    }

    pub fn constant_matrix(&self) -> Option<&CMatrix> {
        match &self.coeff {
            Coefficient::Constant(a) => Some(a),
            Coefficient::TimeVarying(_) => None,
        }
    }

    pub fn is_autonomous(&self) -> bool {
        matches!(self.coeff, Coefficient::Constant(_))
    }
}

// --- 2x2 spectral analysis ------------------------------------------------

/// Canonical form reached by a similarity transform of a 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CanonicalCase {
    /// `M^{-1} A M = diag(mu1, mu2)`
    Diagonal { mu1: Complex64, mu2: Complex64 },
    /// `M^{-1} A M = [[nu, 1], [0, nu]]`
    JordanBlock { nu: Complex64 },
}

/// Similarity data `M^{-1} A M = canonical` for a 2x2 complex matrix.
#[derive(Debug, Clone)]
pub struct JordanForm {
    pub case: CanonicalCase,
    pub m: CMatrix,
    pub m_inv: CMatrix,
    /// `|M| |M^{-1}|` in the maximum operator norm.
    pub conditioning: f64,
}

impl JordanForm {
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        match self.case {
            CanonicalCase::Diagonal { mu1, mu2 } => [mu1, mu2],
            CanonicalCase::JordanBlock { nu } => [nu, nu],
        }
    }

    pub fn canonical_matrix(&self) -> CMatrix {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        match self.case {
            CanonicalCase::Diagonal { mu1, mu2 } => {
                CMatrix::from_row_slice(2, 2, &[mu1, zero, zero, mu2])
            }
            CanonicalCase::JordanBlock { nu } => CMatrix::from_row_slice(2, 2, &[nu, one, zero, nu]),
        }
    }

    /// Conditioning beyond `1e8` makes the derived constants unreliable.
    pub fn is_ill_conditioned(&self) -> bool {
        self.conditioning > 1e8
    }

    /// Defect `|M^{-1} A M - canonical|` for diagnostics.
    pub fn similarity_defect(&self, a: &CMatrix) -> f64 {
        op_norm_inf(&(&self.m_inv * a * &self.m - self.canonical_matrix()))
    }
}

/// Eigenvalues of a 2x2 complex matrix, the larger-magnitude root first.
pub fn eigenvalues_2x2(a: &CMatrix) -> (Complex64, Complex64) {
    let tr = a[(0, 0)] + a[(1, 1)];
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let mut disc = (tr * tr - 4.0 * det).sqrt();
    // choose the sign that avoids cancellation in tr + disc
    if (tr.conj() * disc).re < 0.0 {
        disc = -disc;
    }
    let mu1 = 0.5 * (tr + disc);
    let mu2 = if mu1.norm() > 0.0 { det / mu1 } else { 0.5 * (tr - disc) };
    (mu1, mu2)
}

fn two_by_two_inverse(m: &CMatrix) -> Result<CMatrix> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let scale = op_norm_inf(m).max(1e-300);
    if det.norm() <= 1e-14 * scale * scale {
        return Err(Error::SingularMatrix {
            det: det.norm(),
            tol: 1e-14 * scale * scale,
        });
    }
    let inv_det = Complex64::new(1.0, 0.0) / det;
    Ok(CMatrix::from_row_slice(
        2,
        2,
        &[
            m[(1, 1)] * inv_det,
            -m[(0, 1)] * inv_det,
            -m[(1, 0)] * inv_det,
            m[(0, 0)] * inv_det,
        ],
    ))
}

/// Normalizes so the entry of largest modulus becomes exactly one.
fn normalize_direction(v: CVector) -> CVector {
    let (idx, _) = v
        .iter()
        .enumerate()
        .fold((0usize, -1.0f64), |(bi, bn), (i, z)| {
            if z.norm() > bn {
                (i, z.norm())
            } else {
                (bi, bn)
            }
        });
    let pivot = v[idx];
    v.map(|z| z / pivot)
}

fn eigenvector_for(a: &CMatrix, mu: Complex64) -> CVector {
    // candidates from the two rows of A - mu I
    let v1 = CVector::from_vec(vec![a[(0, 1)], mu - a[(0, 0)]]);
    let v2 = CVector::from_vec(vec![mu - a[(1, 1)], a[(1, 0)]]);
    let pick = if max_vector_norm(&v1) >= max_vector_norm(&v2) {
        v1
    } else {
        v2
    };
    normalize_direction(pick)
}

pub(crate) fn canonical_2x2(a: &CMatrix) -> Result<JordanForm> {
    if a.nrows() != 2 || a.ncols() != 2 {
        return Err(Error::invalid("canonical form analysis is for 2x2 matrices"));
    }
    let norm_a = op_norm_inf(a).max(1e-300);
    let (mu1, mu2) = eigenvalues_2x2(a);
    let cluster = (mu1 - mu2).norm() < EIGEN_CLUSTER_REL_TOL * norm_a;
    if cluster {
        let nu = 0.5 * (a[(0, 0)] + a[(1, 1)]);
        let n = a - identity(2) * nu;
        if op_norm_inf(&n) <= EIGEN_CLUSTER_REL_TOL * norm_a {
            // A is (numerically) nu * Id: already diagonal
            return Ok(JordanForm {
                case: CanonicalCase::Diagonal { mu1: nu, mu2: nu },
                m: identity(2),
                m_inv: identity(2),
                conditioning: 1.0,
            });
        }
        // rank(A - nu I) = 1: genuine Jordan block. Take m2 with the larger
        // image under N, m1 = N m2; then A m1 = nu m1 and A m2 = m1 + nu m2.
        let ne1 = n.column(0).into_owned();
        let ne2 = n.column(1).into_owned();
        let (m2, m1) = if max_vector_norm(&ne1) >= max_vector_norm(&ne2) {
            (CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]), ne1)
        } else {
            (CVector::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]), ne2)
        };
        let m = CMatrix::from_columns(&[m1, m2]);
        let m_inv = two_by_two_inverse(&m)?;
        let conditioning = op_norm_inf(&m) * op_norm_inf(&m_inv);
        return Ok(JordanForm {
            case: CanonicalCase::JordanBlock { nu },
            m,
            m_inv,
            conditioning,
        });
    }
    let c1 = eigenvector_for(a, mu1);
    let c2 = eigenvector_for(a, mu2);
    let m = CMatrix::from_columns(&[c1, c2]);
    let m_inv = two_by_two_inverse(&m)?;
    let conditioning = op_norm_inf(&m) * op_norm_inf(&m_inv);
    Ok(JordanForm {
        case: CanonicalCase::Diagonal { mu1, mu2 },
        m,
        m_inv,
        conditioning,
    })
}

/// Canonical form of an invertible 2x2 complex matrix.
///
/// Rejects singular input because every consumer of this decomposition
/// (expansion classification, inverse-based lower bounds) needs `A^{-1}`.
/// A conditioning above `1e8` is reported on the result, not an error.
pub fn jordan_decompose(a: &CMatrix) -> Result<JordanForm> {
    if a.nrows() != 2 || a.ncols() != 2 {
        return Err(Error::invalid("jordan_decompose expects a 2x2 matrix"));
    }
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let scale = op_norm_inf(a).max(1e-300);
    let tol = 1e-12 * scale * scale;
    if det.norm() <= tol {
        return Err(Error::SingularMatrix {
            det: det.norm(),
            tol,
        });
    }
    canonical_2x2(a)
}

// --- matrix exponentials and evolution operators ---------------------------

/// `(e^x - 1) / x` with a series for small arguments.
fn phi1(x: Complex64) -> Complex64 {
    if x.norm() < 0.1 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for j in 0..14 {
            acc += term;
            term *= x / (j as f64 + 2.0);
        }
        acc
    } else {
        (x.exp() - 1.0) / x
    }
}

/// Putzer's formula `exp(A tau) = e^{mu1 tau} I + dd (A - mu1 I)` with
/// the divided difference `dd = (e^{mu1 tau} - e^{mu2 tau}) / (mu1 - mu2)`.
/// Covers the defective case; stable only while the two modes have
/// comparable magnitude.
fn putzer_2x2(a: &CMatrix, tau: f64, mu1: Complex64, mu2: Complex64) -> CMatrix {
    let e1 = (mu1 * tau).exp();
    // dd = tau * e^{mu1 tau} * phi1((mu2 - mu1) tau)
    let dd = e1 * tau * phi1((mu2 - mu1) * tau);
    identity(2) * e1 + (a - identity(2) * mu1) * dd
}

/// `exp(A tau)` for 2x2 `A`.
///
/// With well-separated mode magnitudes Putzer's formula forms the small
/// entries by cancelling terms of the dominant scale, which loses them
/// entirely once `e^{Re(mu1 - mu2) tau}` passes `1/eps`. Diagonalizing
/// instead builds each entry from products at its own scale.
fn exp_2x2(a: &CMatrix, tau: f64) -> CMatrix {
    let (mu1, mu2) = eigenvalues_2x2(a);
    if (mu1 - mu2).norm() * tau.abs() <= 1.0 {
        return putzer_2x2(a, tau, mu1, mu2);
    }
    match canonical_2x2(a) {
        Ok(jf) => match jf.case {
            CanonicalCase::Diagonal { mu1, mu2 } => {
                let mut d = CMatrix::zeros(2, 2);
                d[(0, 0)] = (mu1 * tau).exp();
                d[(1, 1)] = (mu2 * tau).exp();
                &jf.m * d * &jf.m_inv
            }
            CanonicalCase::JordanBlock { .. } => putzer_2x2(a, tau, mu1, mu2),
        },
        Err(_) => putzer_2x2(a, tau, mu1, mu2),
    }
}

/// Scaling-and-squaring Taylor exponential for small dense matrices.
fn exp_taylor(a: &CMatrix, tau: f64) -> CMatrix {
    let x = a * Complex64::new(tau, 0.0);
    let norm = op_norm_inf(&x);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = &x * Complex64::new(2.0f64.powi(-(s as i32)), 0.0);
    let dim = a.nrows();
    let mut acc = identity(dim);
    let mut term = identity(dim);
    for k in 1..=24 {
        term = &term * &scaled / Complex64::new(k as f64, 0.0);
        acc += &term;
    }
    let mut result = acc;
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Adaptive Dormand-Prince integration of `y' = f(t, y)` from `t0` to
/// `t1` (either direction) for matrix-valued states.
pub(crate) fn rk45<F>(f: &F, t0: f64, t1: f64, y0: CMatrix, rtol: f64, atol: f64) -> CMatrix
where
    F: Fn(f64, &CMatrix) -> CMatrix,
{
    if t0 == t1 {
        return y0;
    }
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const E1: f64 = 71.0 / 57600.0;
    const E3: f64 = -71.0 / 16695.0;
    const E4: f64 = 71.0 / 1920.0;
    const E5: f64 = -17253.0 / 339200.0;
    const E6: f64 = 22.0 / 525.0;
    const E7: f64 = -1.0 / 40.0;

    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut h = (span / 16.0).clamp(1e-8, 0.5) * dir;
    let mut t = t0;
    let mut y = y0;
    let cm = |x: f64| Complex64::new(x, 0.0);
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > 1_000_000 {
            break; // give up on step control; caller tolerances are advisory
        }
        if ((t + h) - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let k1 = f(t, &y);
        let k2 = f(t + 0.2 * h, &(&y + &k1 * cm(h * A21)));
        let k3 = f(t + 0.3 * h, &(&y + &k1 * cm(h * A31) + &k2 * cm(h * A32)));
        let k4 = f(t + 0.8 * h, &(&y + &k1 * cm(h * A41) + &k2 * cm(h * A42) + &k3 * cm(h * A43)));
        let k5 = f(
            t + 8.0 / 9.0 * h,
            &(&y + &k1 * cm(h * A51) + &k2 * cm(h * A52) + &k3 * cm(h * A53) + &k4 * cm(h * A54)),
        );
        let k6 = f(
            t + h,
            &(&y + &k1 * cm(h * A61) + &k2 * cm(h * A62) + &k3 * cm(h * A63) + &k4 * cm(h * A64) + &k5 * cm(h * A65)),
        );
        let y5 = &y + &k1 * cm(h * B1) + &k3 * cm(h * B3) + &k4 * cm(h * B4) + &k5 * cm(h * B5) + &k6 * cm(h * B6);
        let k7 = f(t + h, &y5);
        let err_m = &k1 * cm(h * E1) + &k3 * cm(h * E3) + &k4 * cm(h * E4) + &k5 * cm(h * E5) + &k6 * cm(h * E6) + &k7 * cm(h * E7);
        let scale = atol + rtol * op_norm_inf(&y5).max(op_norm_inf(&y));
        let err = op_norm_inf(&err_m) / scale;
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err > 0.0 {
            0.9 * err.powf(-0.2)
        } else {
            5.0
        };
        h *= factor.clamp(0.2, 5.0);
        if h.abs() < 1e-14 * span.max(1.0) {
            h = 1e-14 * span.max(1.0) * dir;
        }
    }
    y
}

/// The evolution operator `T(t, s)`: the matrix mapping a state at time
/// `s` to the solution of `x' = A(t) x` at time `t`. Both time orders are
/// allowed.
pub fn evolution_operator(sys: &LinearSystem, t: f64, s: f64) -> CMatrix {
    let dim = sys.dim();
    if t == s {
        return identity(dim);
    }
    match sys.constant_matrix() {
        Some(a) => {
            let tau = t - s;
            if dim == 1 {
                CMatrix::from_element(1, 1, (a[(0, 0)] * tau).exp())
            } else if dim == 2 {
                exp_2x2(a, tau)
            } else if a
                .iter()
                .enumerate()
                .all(|(k, z)| (k % dim == k / dim) || z.norm() == 0.0)
            {
                let mut e = CMatrix::zeros(dim, dim);
                for i in 0..dim {
                    e[(i, i)] = (a[(i, i)] * tau).exp();
                }
                e
            } else {
                exp_taylor(a, tau)
            }
        }
        None => {
            let f = |tt: f64, phi: &CMatrix| sys.at(tt) * phi;
            rk45(&f, s, t, identity(dim), ODE_REL_TOL, ODE_ABS_TOL)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn op_norm_examples() {
        assert_eq!(op_norm_inf(&CMatrix::zeros(2, 2)), 0.0);
        assert_eq!(op_norm_inf(&identity(3)), 1.0);
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(-2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]);
        assert_eq!(op_norm_inf(&a), 7.0);
    }

    #[test]
    fn decompose_upper_triangular_distinct() {
        let a = CMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        let jf = jordan_decompose(&a).unwrap();
        match jf.case {
            CanonicalCase::Diagonal { mu1, mu2 } => {
                let mut eig = [mu1.re, mu2.re];
                eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
                assert!((eig[0] - 2.0).abs() < 1e-12 && (eig[1] - 3.0).abs() < 1e-12);
            }
            _ => panic!("expected diagonal case"),
        }
        assert!(jf.similarity_defect(&a) < 1e-10);
        // eigenvector columns (1, 0) and (1, -1) up to the pivot scaling
        let col0 = jf.m.column(0);
        let col1 = jf.m.column(1);
        assert!((col0[0] - c(1.0, 0.0)).norm() < 1e-12 && col0[1].norm() < 1e-12);
        assert!((col1[0] - c(1.0, 0.0)).norm() < 1e-12 && (col1[1] - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn decompose_diagonal_gives_identity_m() {
        let a = CMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        let jf = jordan_decompose(&a).unwrap();
        assert!(op_norm_inf(&(&jf.m - identity(2))) < 1e-12 || jf.conditioning < 1.0 + 1e-12);
        assert!((jf.conditioning - 1.0).abs() < 1e-12);
        assert!(jf.similarity_defect(&a) < 1e-12);
    }

    #[test]
    fn decompose_jordan_block_gives_identity_m() {
        let nu = c(2.0, 0.5);
        let a = CMatrix::from_row_slice(2, 2, &[nu, c(1.0, 0.0), c(0.0, 0.0), nu]);
        let jf = jordan_decompose(&a).unwrap();
        assert!(matches!(jf.case, CanonicalCase::JordanBlock { .. }));
        assert!(jf.similarity_defect(&a) < 1e-10);
        assert!((jf.conditioning - 1.0).abs() < 1e-9);
    }

    #[test]
    fn near_defective_pair_is_treated_as_block() {
        let a = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(2.0 + 1e-12, 0.0)]);
        let jf = jordan_decompose(&a).unwrap();
        assert!(matches!(jf.case, CanonicalCase::JordanBlock { .. }));
        assert!(jf.similarity_defect(&a) < 1e-10);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(matches!(jordan_decompose(&a), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn evolution_at_equal_times_is_identity() {
        let sys = LinearSystem::diagonal_real(&[1.0, -2.0]).unwrap();
        let e = evolution_operator(&sys, 3.0, 3.0);
        assert_eq!(op_norm_inf(&(&e - identity(2))), 0.0);
    }

    #[test]
    fn evolution_of_diagonal_system() {
        let sys = LinearSystem::diagonal_real(&[1.0, 2.0]).unwrap();
        let e = evolution_operator(&sys, 1.0, 0.0);
        assert!((e[(0, 0)].re - 1.0f64.exp()).abs() < 1e-12);
        assert!((e[(1, 1)].re - 2.0f64.exp()).abs() < 1e-10);
        assert!(e[(0, 1)].norm() == 0.0 && e[(1, 0)].norm() == 0.0);
    }

    #[test]
    fn putzer_matches_adaptive_integration() {
        let cases = [
            CMatrix::from_row_slice(2, 2, &[c(0.3, 1.0), c(-0.8, 0.2), c(1.1, 0.0), c(-0.4, -0.6)]),
            CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]),
            CMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(3.0, 0.0), c(0.5, 0.0), c(1.5, 0.0)]),
        ];
        for a in &cases {
            let sys = LinearSystem::constant(a.clone()).unwrap();
            for &(t, s) in &[(1.0, 0.0), (3.5, 1.2), (0.0, 2.0)] {
                let direct = evolution_operator(&sys, t, s);
                let f = |_: f64, phi: &CMatrix| a * phi;
                let integrated = rk45(&f, s, t, identity(2), 1e-12, 1e-14);
                let rel = op_norm_inf(&(&direct - &integrated)) / op_norm_inf(&direct);
                assert!(rel < 1e-8, "rel {rel} for t={t} s={s}");
            }
        }
    }

    #[test]
    fn cocycle_property_for_time_varying_system() {
        let sys = LinearSystem::time_varying(2, |t: f64| {
            CMatrix::from_row_slice(
                2,
                2,
                &[
                    c(0.1 * (1.0 + t.sin()), 0.0),
                    c(0.3, 0.0),
                    c(-0.2, 0.0),
                    c(-0.5, 0.0),
                ],
            )
        })
        .unwrap();
        let (u, s, t) = (0.0, 1.3, 2.7);
        let a = evolution_operator(&sys, t, s) * evolution_operator(&sys, s, u);
        let b = evolution_operator(&sys, t, u);
        assert!(op_norm_inf(&(&a - &b)) < 1e-9 * op_norm_inf(&b).max(1.0));
    }

    #[test]
    fn taylor_exponential_for_3x3() {
        // block diag(0.5, rotation) has a known exponential
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 0)] = c(0.5, 0.0);
        a[(1, 2)] = c(1.0, 0.0);
        a[(2, 1)] = c(-1.0, 0.0);
        let sys = LinearSystem::constant(a).unwrap();
        let e = evolution_operator(&sys, 2.0, 0.0);
        assert!((e[(0, 0)].re - 1.0f64.exp()).abs() < 1e-10);
        assert!((e[(1, 1)].re - 2.0f64.cos()).abs() < 1e-10);
        assert!((e[(1, 2)].re - 2.0f64.sin()).abs() < 1e-10);
    }
}
