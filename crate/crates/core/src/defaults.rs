//! Central numeric defaults.
//!
//! Every tolerance or grid size that more than one module relies on lives
//! here, so a change in policy is a one-line edit.

/// Default number of grid nodes for norms and convolutions.
pub const GRID_NODES: usize = 4096;

/// Denser default used by the shadowing solver, where pointwise accuracy
/// of iterated convolutions matters more than norm accuracy.
pub const SOLVER_GRID_NODES: usize = 8193;

/// Domain truncation horizon as a multiple of the slowest decay rate:
/// `t_max = HORIZON_RATE_MULTIPLE / min(rates)` unless overridden.
pub const HORIZON_RATE_MULTIPLE: f64 = 20.0;

/// Fallback horizon when no decay rate is known.
pub const FALLBACK_T_MAX: f64 = 25.0;

/// Absolute slack allowed when checking the convolution norm inequality.
pub const YOUNG_ABS_TOL: f64 = 1e-9;

/// Relative slack allowed when checking the convolution norm inequality.
pub const YOUNG_REL_TOL: f64 = 1e-7;

/// Two eigenvalues closer than this (relative to the matrix norm) are
/// treated as a single cluster when classifying a 2x2 matrix.
pub const EIGEN_CLUSTER_REL_TOL: f64 = 1e-8;

/// Projection defect tolerance for `P*P = P`.
pub const PROJECTION_TOL: f64 = 1e-12;

/// Relative tolerance of the adaptive integrator behind nonautonomous
/// evolution operators.
pub const ODE_REL_TOL: f64 = 1e-10;

/// Absolute tolerance of the adaptive integrator.
pub const ODE_ABS_TOL: f64 = 1e-12;

/// Number of candidate decay rates scanned when fitting a dichotomy.
pub const DICHOTOMY_RATE_GRID: usize = 200;

/// Smallest decay rate a dichotomy fit may report.
pub const DICHOTOMY_RATE_MIN: f64 = 1e-6;

/// Margin that keeps delta optimization away from the closed end of its
/// admissible interval.
pub const DELTA_MARGIN: f64 = 1e-9;

/// Number of gamma samples per pass in lower-bound sweeps.
pub const GAMMA_GRID: usize = 60;

/// Default gamma range for lower-bound sweeps.
pub const GAMMA_RANGE: (f64, f64) = (1e-4, 1e2);

/// Refinement passes around the incumbent in lower-bound sweeps.
pub const SWEEP_REFINEMENTS: usize = 2;

/// Phase samples on the unit circle for the swept coordinate of `u`.
pub const U_PHASES: usize = 16;

/// Radius samples in the unit disk for the swept coordinate of `u`.
pub const U_RADII: usize = 8;

/// Iteration budget for Picard iteration.
pub const MAX_PICARD_ITER: usize = 200;

/// Default update tolerance for Picard iteration. The stopping rule is
/// `|z_{k+1} - z_k| <= tol * (1 - kappa) / kappa`.
pub const PICARD_TOL: f64 = 1e-10;

/// Slack added to certified bound checks to absorb quadrature error.
pub const CERT_SLACK: f64 = 1e-9;

/// Threshold below which `|theta * h|` switches the exponential moment
/// integrals to their series form.
pub const MOMENT_SERIES_THRESHOLD: f64 = 0.1;
