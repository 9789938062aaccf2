//! Subcommand implementations: run the requested computation and render
//! the report as JSON or CSV.
//!
//! Every JSON report is wrapped in an envelope carrying the command name,
//! the configuration hash, and the seed; CSV output carries the same two
//! identifying values as leading `#` comment lines. Identical inputs give
//! byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use hus::bounds::{
    block_delta_factor, constant_gap, optimize_block_delta, planar_lower_bound,
    upper_hus_constant, GapReport, SweepConfig, UpperConstant,
};
use hus::linear::{eigenvalues_2x2, CVector};
use hus::scenarios::{run_scenario, sharpness_point};
use hus::shadowing::{forced_response, picard_solve, PseudoSolution, SemilinearProblem};
use hus::{ConjugateTriple, Error, ExpTail, Exponent, GridFunction, Result};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{PseudoSpec, RunConfig, SweepSpec};
use crate::{Failure, Format};

/// A parsed configuration plus the hash under which it is reported.
pub struct Context {
    pub config: RunConfig,
    pub hash: String,
}

/// A finished report and the exit code it earns.
pub struct Rendered {
    pub text: String,
    pub code: u8,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config_hash: &'a str,
    seed: u64,
    report: T,
}

fn json_text<T: Serialize>(command: &str, ctx: &Context, report: T) -> String {
    let envelope = Envelope {
        command,
        config_hash: &ctx.hash,
        seed: ctx.config.seed,
        report,
    };
    let mut text = serde_json::to_string_pretty(&envelope).expect("reports serialize");
    text.push('\n');
    text
}

fn csv_comments(ctx: &Context) -> String {
    format!("# config_hash={}\n# seed={}\n", ctx.hash, ctx.config.seed)
}

// ---------------------------------------------------------------- constants

#[derive(Serialize)]
struct ConstantsReport {
    p: Exponent,
    q: Exponent,
    r: Exponent,
    lipschitz: f64,
    upper: UpperConstant,
    /// Planar gap report, present when the matrix is a 2x2 expansion.
    planar: Option<GapReport>,
}

pub fn cmd_constants(ctx: &Context, format: Format) -> std::result::Result<Rendered, Failure> {
    let cfg = &ctx.config;
    let triple = cfg.triple()?;
    let problem = cfg.problem.build()?;
    let upper = upper_hus_constant(problem.dichotomy(), problem.lipschitz(), &triple)?;

    let a = cfg.problem.matrix()?;
    let planar = if a.nrows() == 2 {
        let (e1, e2) = eigenvalues_2x2(&a);
        if e1.re > 0.0 && e2.re > 0.0 {
            Some(constant_gap(&a, &triple, None, &SweepConfig::default())?)
        } else {
            None
        }
    } else {
        None
    };

    let report = ConstantsReport {
        p: triple.p,
        q: triple.q,
        r: triple.r,
        lipschitz: problem.lipschitz(),
        upper,
        planar,
    };

    let text = match format {
        Format::Json => json_text("constants", ctx, &report),
        Format::Csv => {
            let mut out = csv_comments(ctx);
            out.push_str("quantity,value\n");
            let _ = writeln!(out, "p,{}", report.p);
            let _ = writeln!(out, "q,{}", report.q);
            let _ = writeln!(out, "r,{}", report.r);
            let _ = writeln!(out, "lipschitz,{}", report.lipschitz);
            let _ = writeln!(out, "upper_constant,{}", report.upper.value);
            let _ = writeln!(out, "upper_kappa,{}", report.upper.kappa);
            let _ = writeln!(out, "smallness_limit,{}", report.upper.smallness_limit);
            if let Some(gap) = &report.planar {
                let _ = writeln!(out, "planar_upper,{}", gap.upper.value);
                let case = match gap.upper.case {
                    hus::bounds::SpectralCase::Diagonal => "diagonal",
                    hus::bounds::SpectralCase::JordanBlock => "jordan_block",
                };
                let _ = writeln!(out, "planar_case,{case}");
                let _ = writeln!(out, "planar_conditioning,{}", gap.upper.conditioning);
                if let Some(delta) = gap.upper.delta {
                    let _ = writeln!(out, "planar_delta,{delta}");
                }
                let _ = writeln!(out, "planar_lower,{}", gap.lower.value);
                let _ = writeln!(out, "planar_gamma,{}", gap.lower.gamma);
                let _ = writeln!(out, "planar_ratio,{}", gap.ratio);
            }
            out
        }
    };
    Ok(Rendered { text, code: 0 })
}

// -------------------------------------------------------------------- solve

/// Builds the pseudosolution the configuration asks for.
///
/// The generated kind solves the companion equation with forcing
/// `exp(-gamma t)` in every component and then evaluates the derivative
/// through the equation itself, so the residual against the original
/// problem equals the forcing exactly at the grid nodes.
fn generated_pseudosolution(
    problem: &SemilinearProblem,
    gamma: f64,
    t_max: f64,
    nodes: usize,
    triple: &ConjugateTriple,
    options: &hus::shadowing::SolveOptions,
) -> Result<PseudoSolution> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(
            "generated pseudosolution needs a finite gamma > 0".into(),
        ));
    }
    if !(t_max > 0.0) || !t_max.is_finite() || nodes < 3 {
        return Err(Error::InvalidInput(
            "grid needs finite t_max > 0 and at least three nodes".into(),
        ));
    }
    let dim = problem.dim();
    let grid = GridFunction::uniform_grid(t_max, nodes);
    let ones = DVector::from_element(dim, Complex64::new(1.0, 0.0));

    let y = if problem.has_nonlinearity() {
        let inner = problem.clone();
        let forcing = ones.clone();
        let companion = SemilinearProblem::new(
            problem.linear().clone(),
            problem.dichotomy().clone(),
            move |t: f64, x: &CVector| {
                inner.nonlinear_term(t, x) + &forcing * Complex64::new((-gamma * t).exp(), 0.0)
            },
            problem.lipschitz(),
        )?;
        let zero = GridFunction::sample(grid, |_| DVector::zeros(dim), Some(ExpTail::zero(dim)))?;
        let rest = PseudoSolution::with_derivative(zero.clone(), zero)?;
        picard_solve(&companion, &rest, triple, options)?.solution
    } else {
        let coeff = &ones * Complex64::new((-gamma * t_max).exp(), 0.0);
        let g = GridFunction::sample(
            grid,
            |t| &ones * Complex64::new((-gamma * t).exp(), 0.0),
            Some(ExpTail::new(coeff, gamma)?),
        )?;
        forced_response(problem, &g)?
    };

    let lifted = problem.clone();
    let dy = y.map(move |t, v| {
        lifted.linear().at(t) * v
            + lifted.nonlinear_term(t, v)
            + &ones * Complex64::new((-gamma * t).exp(), 0.0)
    });
    PseudoSolution::with_derivative(y, dy)
}

fn strip_comments(text: &str) -> String {
    text.lines()
        .filter(|line| !line.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn load_grid_csv(path: &str) -> std::result::Result<GridFunction, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {path}: {e}")))?;
    GridFunction::from_csv(&strip_comments(&text))
        .map_err(|e| Failure::Usage(format!("invalid grid CSV {path}: {e}")))
}

pub fn cmd_solve(ctx: &Context, format: Format) -> std::result::Result<Rendered, Failure> {
    let cfg = &ctx.config;
    let triple = cfg.triple()?;
    let problem = cfg.problem.build()?;
    let options = cfg.solve_options();

    let pseudo = match &cfg.pseudosolution {
        PseudoSpec::Generated { gamma } => {
            generated_pseudosolution(&problem, *gamma, cfg.t_max, cfg.nodes, &triple, &options)?
        }
        PseudoSpec::Csv { path, derivative } => {
            let y = load_grid_csv(path)?;
            match derivative {
                Some(dpath) => PseudoSolution::with_derivative(y, load_grid_csv(dpath)?)?,
                None => PseudoSolution::from_samples(y),
            }
        }
    };

    let run = picard_solve(&problem, &pseudo, &triple, &options)?;
    let text = match format {
        Format::Json => json_text("solve", ctx, &run.certificate),
        Format::Csv => {
            let mut out = csv_comments(ctx);
            out.push_str(&run.solution.to_csv());
            out
        }
    };
    Ok(Rendered { text, code: 0 })
}

// ----------------------------------------------------------------- scenario

pub fn cmd_scenario(
    ctx: &Context,
    name: &str,
    overrides: &BTreeMap<String, f64>,
    format: Format,
) -> std::result::Result<Rendered, Failure> {
    let report = run_scenario(name, overrides)?;
    let code = if report.passed() { 0 } else { 4 };
    let text = match format {
        Format::Json => json_text("scenario", ctx, &report),
        Format::Csv => {
            let mut out = csv_comments(ctx);
            out.push_str(&report.assertions_csv());
            out
        }
    };
    Ok(Rendered { text, code })
}

// -------------------------------------------------------------------- sweep

#[derive(Serialize)]
struct GammaRow {
    gamma: f64,
    epsilon: f64,
    deviation: f64,
    /// `deviation / epsilon`, the empirical stability constant.
    ratio: f64,
    constant: f64,
    sup_solution: f64,
}

#[derive(Serialize)]
struct DeltaRow {
    delta: f64,
    factor: f64,
}

#[derive(Serialize)]
struct DirectionRow {
    theta: f64,
    u1: f64,
    u2: f64,
    lower: f64,
}

#[derive(Serialize)]
struct ExponentRow {
    p: Exponent,
    q: Exponent,
    r: Exponent,
    constant: f64,
    kappa: f64,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SweepReport {
    Gamma {
        a: f64,
        rows: Vec<GammaRow>,
    },
    Delta {
        nu: f64,
        r: Exponent,
        delta_star: f64,
        factor_star: f64,
        rows: Vec<DeltaRow>,
    },
    Direction {
        gamma: f64,
        rows: Vec<DirectionRow>,
    },
    Exponents {
        rows: Vec<ExponentRow>,
    },
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            lo * (hi / lo).powf(t)
        })
        .collect()
}

pub fn cmd_sweep(ctx: &Context, format: Format) -> std::result::Result<Rendered, Failure> {
    let cfg = &ctx.config;
    let triple = cfg.triple()?;

    let report = match &cfg.sweep {
        SweepSpec::Gamma {
            a,
            gamma_min,
            gamma_max,
            count,
        } => {
            if !(*a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidInput("gamma sweep needs a > 0".into()).into());
            }
            if !(*gamma_min > 0.0 && gamma_max >= gamma_min) || *count < 2 {
                return Err(Error::InvalidInput(
                    "gamma sweep needs 0 < gamma_min <= gamma_max and count >= 2".into(),
                )
                .into());
            }
            let mut rows = Vec::with_capacity(*count);
            for gamma in log_spaced(*gamma_min, *gamma_max, *count) {
                let point = sharpness_point(*a, gamma, &triple)?;
                rows.push(GammaRow {
                    gamma,
                    epsilon: point.epsilon,
                    deviation: point.deviation,
                    ratio: point.deviation / point.epsilon,
                    constant: point.constant,
                    sup_solution: point.sup_solution,
                });
            }
            SweepReport::Gamma { a: *a, rows }
        }
        SweepSpec::Delta { nu, count } => {
            if !(*nu > 0.0 && nu.is_finite()) || *count < 1 {
                return Err(Error::InvalidInput(
                    "delta sweep needs nu > 0 and count >= 1".into(),
                )
                .into());
            }
            let rows: Vec<DeltaRow> = (1..=*count)
                .map(|k| {
                    let delta = nu * k as f64 / (*count as f64 + 1.0);
                    DeltaRow {
                        delta,
                        factor: block_delta_factor(delta, *nu, triple.r),
                    }
                })
                .collect();
            let (delta_star, factor_star) = optimize_block_delta(*nu, triple.r);
            SweepReport::Delta {
                nu: *nu,
                r: triple.r,
                delta_star,
                factor_star,
                rows,
            }
        }
        SweepSpec::Direction { gamma, phases } => {
            if !(*gamma > 0.0 && gamma.is_finite()) || *phases < 2 {
                return Err(Error::InvalidInput(
                    "direction sweep needs gamma > 0 and phases >= 2".into(),
                )
                .into());
            }
            let a = cfg.problem.matrix()?;
            if a.nrows() != 2 {
                return Err(Error::InvalidInput(
                    "direction sweep needs a 2x2 matrix".into(),
                )
                .into());
            }
            let mut rows = Vec::with_capacity(*phases);
            for j in 0..*phases {
                let theta = std::f64::consts::PI * j as f64 / *phases as f64;
                let (c, s) = (theta.cos(), theta.sin());
                // scale to unit maximum norm, the normalization the
                // lower bound expects
                let scale = c.abs().max(s.abs());
                let (u1, u2) = (c / scale, s / scale);
                let u = CVector::from_vec(vec![
                    Complex64::new(u1, 0.0),
                    Complex64::new(u2, 0.0),
                ]);
                let lower = planar_lower_bound(&a, &u, *gamma, &triple)?;
                rows.push(DirectionRow {
                    theta,
                    u1,
                    u2,
                    lower,
                });
            }
            SweepReport::Direction {
                gamma: *gamma,
                rows,
            }
        }
        SweepSpec::Exponents { p_values, q_values } => {
            let problem = cfg.problem.build()?;
            let mut rows = Vec::new();
            for &p in p_values {
                for &q in q_values {
                    if !p.ge(&q) {
                        continue;
                    }
                    let pair = ConjugateTriple::new(p, q)?;
                    let upper = upper_hus_constant(problem.dichotomy(), problem.lipschitz(), &pair)?;
                    rows.push(ExponentRow {
                        p,
                        q,
                        r: pair.r,
                        constant: upper.value,
                        kappa: upper.kappa,
                    });
                }
            }
            if rows.is_empty() {
                return Err(Error::InvalidInput(
                    "exponent sweep has no pair with p >= q".into(),
                )
                .into());
            }
            SweepReport::Exponents { rows }
        }
    };

    let text = match format {
        Format::Json => json_text("sweep", ctx, &report),
        Format::Csv => {
            let mut out = csv_comments(ctx);
            match &report {
                SweepReport::Gamma { a, rows } => {
                    let _ = writeln!(out, "# a={a}");
                    out.push_str("gamma,epsilon,deviation,ratio,constant,sup_solution\n");
                    for row in rows {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{}",
                            row.gamma,
                            row.epsilon,
                            row.deviation,
                            row.ratio,
                            row.constant,
                            row.sup_solution
                        );
                    }
                }
                SweepReport::Delta {
                    nu,
                    r,
                    delta_star,
                    factor_star,
                    rows,
                } => {
                    let _ = writeln!(out, "# nu={nu}");
                    let _ = writeln!(out, "# r={r}");
                    let _ = writeln!(out, "# delta_star={delta_star}");
                    let _ = writeln!(out, "# factor_star={factor_star}");
                    out.push_str("delta,factor\n");
                    for row in rows {
                        let _ = writeln!(out, "{},{}", row.delta, row.factor);
                    }
                }
                SweepReport::Direction { gamma, rows } => {
                    let _ = writeln!(out, "# gamma={gamma}");
                    out.push_str("theta,u1,u2,lower\n");
                    for row in rows {
                        let _ = writeln!(out, "{},{},{},{}", row.theta, row.u1, row.u2, row.lower);
                    }
                }
                SweepReport::Exponents { rows } => {
                    out.push_str("p,q,r,constant,kappa\n");
                    for row in rows {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{}",
                            row.p, row.q, row.r, row.constant, row.kappa
                        );
                    }
                }
            }
            out
        }
    };
    Ok(Rendered { text, code: 0 })
}
