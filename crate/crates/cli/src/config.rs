//! Run configuration: one flat JSON document that parses into validated
//! library inputs.
//!
//! Exponents are numbers or the string `"inf"`. Matrix entries are real
//! numbers or `[re, im]` pairs. Unknown top-level keys are rejected so a
//! typo surfaces as a parse error instead of a silently ignored setting.

use std::collections::BTreeMap;

use hus::dichotomy::DichotomySpec;
use hus::linear::{CMatrix, CVector, LinearSystem};
use hus::shadowing::{SemilinearProblem, SolveOptions};
use hus::{ConjugateTriple, Error, Exponent, Result, VectorNorm};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Matrix entry token: `3.5` or `[re, im]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> Complex64 {
        match self {
            Entry::Real(x) => Complex64::new(x, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

fn matrix_from(rows: &[Vec<Entry>], what: &str) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::InvalidInput(format!("{what} must not be empty")));
    }
    if rows.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidInput(format!(
            "{what} must be square; got {n} rows"
        )));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j].value()))
}

/// Which projection the dichotomy uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DichotomyChoice {
    /// Projection is the identity: the whole flow decays forward.
    Contraction,
    /// Projection is zero: the whole flow decays backward.
    Expansion,
    /// Explicit projection matrix, given in the `projection` field.
    Projection,
}

/// Dichotomy data `(kind, D, lambda)` for the configured system.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomyConfig {
    pub kind: DichotomyChoice,
    pub constant: f64,
    pub rate: f64,
    #[serde(default)]
    pub projection: Option<Vec<Vec<Entry>>>,
}

/// Nonlinear term of the right-hand side.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    /// Purely linear problem.
    None,
    /// `f(t, x) = amplitude * sin(x)` componentwise; Lipschitz bound
    /// `|amplitude|`.
    Sine { amplitude: f64 },
}

/// The problem `x' = A x + f(t, x)` with its certified dichotomy data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSpec {
    /// Row-major square matrix `A`.
    pub matrix: Vec<Vec<Entry>>,
    pub dichotomy: DichotomyConfig,
    pub nonlinearity: NonlinearitySpec,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            matrix: vec![vec![Entry::Real(1.0)]],
            dichotomy: DichotomyConfig {
                kind: DichotomyChoice::Expansion,
                constant: 1.0,
                rate: 1.0,
                projection: None,
            },
            nonlinearity: NonlinearitySpec::None,
        }
    }
}

impl ProblemSpec {
    pub fn matrix(&self) -> Result<CMatrix> {
        matrix_from(&self.matrix, "matrix")
    }

    pub fn build(&self) -> Result<SemilinearProblem> {
        let a = self.matrix()?;
        let dim = a.nrows();
        let linear = LinearSystem::constant(a)?;
        if self.dichotomy.projection.is_some() && self.dichotomy.kind != DichotomyChoice::Projection
        {
            return Err(Error::InvalidInput(
                "projection matrix is only valid with kind \"projection\"".into(),
            ));
        }
        let dichotomy = match self.dichotomy.kind {
            DichotomyChoice::Contraction => {
                DichotomySpec::contraction(dim, self.dichotomy.constant, self.dichotomy.rate)?
            }
            DichotomyChoice::Expansion => {
                DichotomySpec::expansion(dim, self.dichotomy.constant, self.dichotomy.rate)?
            }
            DichotomyChoice::Projection => {
                let rows = self.dichotomy.projection.as_ref().ok_or_else(|| {
                    Error::InvalidInput(
                        "kind \"projection\" requires a projection matrix".into(),
                    )
                })?;
                let p = matrix_from(rows, "projection")?;
                DichotomySpec::new(p, self.dichotomy.constant, self.dichotomy.rate)?
            }
        };
        match &self.nonlinearity {
            NonlinearitySpec::None => SemilinearProblem::linear_only(linear, dichotomy),
            NonlinearitySpec::Sine { amplitude } => {
                let b = Complex64::new(*amplitude, 0.0);
                SemilinearProblem::new(
                    linear,
                    dichotomy,
                    move |_t, x: &CVector| x.map(|z| z.sin() * b),
                    amplitude.abs(),
                )
            }
        }
    }
}

/// Where the pseudosolution for `solve` comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PseudoSpec {
    /// Solve a companion equation with forcing `exp(-gamma t)` added to
    /// the right-hand side, then read the derivative off the equation, so
    /// the residual equals the forcing exactly at the nodes.
    Generated { gamma: f64 },
    /// Load samples from a CSV file (columns `t,v1_re,v1_im,...`); an
    /// optional second file supplies the derivative, otherwise a finite
    /// difference is used.
    Csv {
        path: String,
        #[serde(default)]
        derivative: Option<String>,
    },
}

/// Which parameter the `sweep` command varies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepSpec {
    /// Residual decay rate for the scalar family `x' = a x`, log-spaced.
    Gamma {
        a: f64,
        gamma_min: f64,
        gamma_max: f64,
        count: usize,
    },
    /// Shift `delta` in `(0, nu)` for the defective planar factor.
    Delta { nu: f64, count: usize },
    /// Probe directions for the planar lower bound at a fixed decay rate.
    Direction { gamma: f64, phases: usize },
    /// Cross product of exponent pairs for the dichotomy upper constant.
    Exponents {
        p_values: Vec<Exponent>,
        q_values: Vec<Exponent>,
    },
}

/// Everything a run needs; any subset of the fields may appear in the
/// JSON file, the rest keep the defaults printed by `--print-defaults`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Reproducibility tag echoed in every report; the toolkit itself is
    /// deterministic.
    pub seed: u64,
    pub p: Exponent,
    pub q: Exponent,
    /// Truncation horizon for grid data.
    pub t_max: f64,
    /// Node count for generated grids.
    pub nodes: usize,
    /// Picard stop tolerance, scaled internally by `(1 - kappa) / kappa`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Pointwise vector norm used for grid data.
    pub norm: VectorNorm,
    pub problem: ProblemSpec,
    pub pseudosolution: PseudoSpec,
    /// Scenario parameter overrides; values are numbers or `"inf"`.
    pub params: BTreeMap<String, serde_json::Value>,
    pub sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            p: Exponent::Finite(2.0),
            q: Exponent::Finite(2.0),
            t_max: hus::defaults::FALLBACK_T_MAX,
            nodes: hus::defaults::SOLVER_GRID_NODES,
            tolerance: hus::defaults::PICARD_TOL,
            max_iterations: hus::defaults::MAX_PICARD_ITER,
            norm: VectorNorm::Max,
            problem: ProblemSpec::default(),
            pseudosolution: PseudoSpec::Generated { gamma: 1.0 },
            params: BTreeMap::new(),
            sweep: SweepSpec::Gamma {
                a: 1.0,
                gamma_min: 1e-3,
                gamma_max: 1.0,
                count: 9,
            },
        }
    }
}

impl RunConfig {
    pub fn triple(&self) -> Result<ConjugateTriple> {
        ConjugateTriple::new(self.p, self.q)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            norm: self.norm,
        }
    }

    /// Scenario overrides as numbers; string values go through the float
    /// parser so `"inf"` works where JSON has no literal for it.
    pub fn param_map(&self) -> Result<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        for (key, value) in &self.params {
            let number = match value {
                serde_json::Value::Number(n) => n.as_f64(),
                serde_json::Value::String(s) => s.trim().parse::<f64>().ok(),
                _ => None,
            };
            match number {
                Some(x) => {
                    out.insert(key.clone(), x);
                }
                None => {
                    return Err(Error::InvalidInput(format!(
                        "parameter {key}: expected a number or \"inf\", got {value}"
                    )));
                }
            }
        }
        Ok(out)
    }
}
