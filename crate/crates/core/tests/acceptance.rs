//! Acceptance suite: one test per release criterion, each printing a
//! single PASS line with the measured quantities.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hus::bounds::{block_delta_factor, constant_gap, optimize_block_delta, SweepConfig};
use hus::dichotomy::{default_sample_times, fit_dichotomy, verify_dichotomy, DichotomySpec};
use hus::linear::{CMatrix, CVector, LinearSystem};
use hus::scenarios::{scenario_pq_counterexample, sharpness_point};
use hus::shadowing::{
    picard_solve, shadowing_operator, PseudoSolution, SemilinearProblem, SolveOptions,
};
use hus::{
    lp_norm, young_check, ConjugateTriple, Error, ExpKernel, ExpTail, Exponent, GridFunction,
    VectorNorm,
};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn triple(p: f64, q: f64) -> ConjugateTriple {
    ConjugateTriple::from_f64(p, q).unwrap()
}

/// Zero pseudosolution: starting point for companion solves.
fn at_rest(grid: Vec<f64>, dim: usize) -> PseudoSolution {
    let zero = GridFunction::sample(grid, move |_| DVector::zeros(dim), Some(ExpTail::zero(dim)))
        .unwrap();
    PseudoSolution::with_derivative(zero.clone(), zero).unwrap()
}

/// Manufactures a pseudosolution with residual exactly `e^{-gamma t}`
/// (componentwise) by solving the companion problem with that forcing
/// added, then reading the derivative off the differential equation.
fn generated_pseudo(
    problem: &SemilinearProblem,
    gamma: f64,
    t_max: f64,
    nodes: usize,
    triple: &ConjugateTriple,
    options: &SolveOptions,
) -> PseudoSolution {
    let dim = problem.linear().dim();
    let inner = problem.clone();
    let forced = SemilinearProblem::new(
        problem.linear().clone(),
        problem.dichotomy().clone(),
        move |t: f64, x: &CVector| {
            inner.nonlinear_term(t, x) + DVector::from_element(dim, c((-gamma * t).exp()))
        },
        problem.lipschitz(),
    )
    .unwrap();
    let grid = GridFunction::uniform_grid(t_max, nodes);
    let rest = at_rest(grid, dim);
    let y = picard_solve(&forced, &rest, triple, options).unwrap().solution;

    let linear = problem.linear().clone();
    let outer = problem.clone();
    let dy = y.map(move |t, v| {
        linear.at(t) * v + outer.nonlinear_term(t, v) + DVector::from_element(dim, c((-gamma * t).exp()))
    });
    PseudoSolution::with_derivative(y, dy).unwrap()
}

#[test]
fn criterion_1_sharpness_reproduction() {
    let tr = triple(2.0, 2.0);
    let point = sharpness_point(1.0, 1.0, &tr).unwrap();

    let eps_closed = 0.5f64.sqrt();
    let dev_closed = 0.5 * eps_closed;
    assert!((point.epsilon - eps_closed).abs() <= 1e-4, "epsilon {}", point.epsilon);
    assert!(point.sup_solution <= 1e-6, "sup |x| = {}", point.sup_solution);
    assert!((point.deviation - dev_closed).abs() <= 1e-4, "deviation {}", point.deviation);
    assert_eq!(point.constant, 1.0);
    let ratio = point.deviation / point.epsilon;
    assert!((ratio - 0.5).abs() <= 1e-4, "ratio {ratio}");

    println!(
        "PASS: criterion 1, sharpness point: epsilon={:.6}, deviation={:.6}, \
         sup|x|={:.2e}, L={}, deviation/epsilon={:.6}",
        point.epsilon, point.deviation, point.sup_solution, point.constant, ratio
    );
}

#[test]
fn criterion_2_minimal_constant_gap() {
    let a = CMatrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => c(1.0),
        (1, 1) => c(3.0),
        _ => c(0.0),
    });
    let tr = ConjugateTriple::new(Exponent::Infinity, Exponent::Infinity).unwrap();
    let config = SweepConfig {
        gamma_min: 1e-3,
        ..SweepConfig::default()
    };
    let gap = constant_gap(&a, &tr, None, &config).unwrap();

    assert_eq!(gap.upper.value, 1.0);
    assert!(gap.lower.value >= 0.999, "lower {}", gap.lower.value);
    assert!(gap.ratio >= 0.999, "ratio {}", gap.ratio);

    println!(
        "PASS: criterion 2, constant gap for diag(1,3) at p=q=inf: upper={}, lower={:.6}, ratio={:.6}",
        gap.upper.value, gap.lower.value, gap.ratio
    );
}

#[test]
fn criterion_3_delta_optimization_oracle() {
    let r = Exponent::finite(1.0).unwrap();
    let (delta_star, factor_star) = optimize_block_delta(2.0, r);

    let exact = 2.0 - 2.0f64.sqrt();
    assert!((delta_star - exact).abs() <= 1e-6, "delta* {delta_star}");
    // closed form at the analytic optimum: e^(d-1)/d * 1/(2-d), d = 2-sqrt(2)
    let factor_exact = (exact - 1.0).exp() / exact / (2.0 - exact);
    assert!((factor_star - factor_exact).abs() <= 1e-5, "factor* {factor_star}");

    let n = 100_000;
    let mut best = (f64::INFINITY, 0.0);
    for k in 1..n {
        let delta = 2.0 * k as f64 / n as f64;
        let f = block_delta_factor(delta, 2.0, r);
        if f < best.0 {
            best = (f, delta);
        }
    }
    let spacing = 2.0 / n as f64;
    assert!(factor_star <= best.0 + 1e-9);
    assert!((factor_star - best.0).abs() <= 1e-8);
    assert!((delta_star - best.1).abs() <= spacing + 1e-6);

    println!(
        "PASS: criterion 3, block delta optimum: delta*={delta_star:.8} (2-sqrt2={exact:.8}), \
         factor*={factor_star:.6}, brute-force grid min {:.6} at {:.8}",
        best.0, best.1
    );
}

#[test]
fn criterion_4_young_randomized_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let exponents = [
        Exponent::Finite(1.0),
        Exponent::Finite(2.0),
        Exponent::Finite(3.0),
        Exponent::Infinity,
    ];
    let mut passes = 0usize;
    for _ in 0..100 {
        let amp = rng.gen_range(0.1..3.0);
        let freq = rng.gen_range(0.5..3.0);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let rate = rng.gen_range(0.3..2.0);
        let lambda = rng.gen_range(0.3..3.0);
        let kernel = if rng.gen_bool(0.5) {
            ExpKernel::causal(lambda).unwrap()
        } else {
            ExpKernel::anticausal(lambda).unwrap()
        };
        let i = rng.gen_range(0..4usize);
        let j = rng.gen_range(0..4usize);
        let (q, p) = (exponents[i.min(j)], exponents[i.max(j)]);

        let t_max = 30.0 / rate;
        let grid = GridFunction::uniform_grid(t_max, 2049);
        let tail = ExpTail::new(
            DVector::from_element(1, c(amp * (-rate * t_max).exp())),
            rate,
        )
        .unwrap();
        let data = GridFunction::sample_scalar(
            grid,
            move |t| amp * (freq * t + phase).sin() * (-rate * t).exp(),
            Some(tail),
        )
        .unwrap();

        let report = young_check(&kernel, &data, p, q).unwrap();
        assert!(report.holds, "lhs {} > rhs {}", report.lhs, report.rhs);
        assert!(report.lhs <= report.rhs + 1e-9);
        passes += 1;
    }
    assert_eq!(passes, 100);
    println!("PASS: criterion 4, convolution inequality held in {passes}/100 randomized trials");
}

#[test]
fn criterion_5_contraction_property() {
    let b = 0.25;
    let problem = SemilinearProblem::new(
        LinearSystem::scalar(1.0),
        DichotomySpec::expansion(1, 1.0, 1.0).unwrap(),
        move |_t, x: &CVector| DVector::from_element(1, x[0].sin() * c(b)),
        b,
    )
    .unwrap();
    let tr = triple(2.0, 2.0);
    let grid = GridFunction::uniform_grid(25.0, 4097);
    let rest = at_rest(grid.clone(), 1);

    let make = |amp: f64, rho: f64| {
        let tail = ExpTail::new(
            DVector::from_element(1, c(amp * (-rho * 25.0f64).exp())),
            rho,
        )
        .unwrap();
        GridFunction::sample_scalar(
            grid.clone(),
            move |t| amp * (-rho * t).exp(),
            Some(tail),
        )
        .unwrap()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let rho: f64 = rng.gen_range(0.3..2.0);
        let c1: f64 = rng.gen_range(-2.0..2.0);
        let mut c2: f64 = rng.gen_range(-2.0..2.0);
        while (c1 - c2).abs() < 1e-3 {
            c2 = rng.gen_range(-2.0..2.0);
        }
        let z1 = make(c1, rho);
        let z2 = make(c2, rho);
        let t1 = shadowing_operator(&problem, &rest, &z1, VectorNorm::Max).unwrap();
        let t2 = shadowing_operator(&problem, &rest, &z2, VectorNorm::Max).unwrap();
        let num = lp_norm(&t1.sub(&t2).unwrap(), tr.p).unwrap();
        let den = lp_norm(&z1.sub(&z2).unwrap(), tr.p).unwrap();
        let ratio = num / den;
        assert!(ratio <= b + 1e-6, "pair ratio {ratio}");
        worst = worst.max(ratio);
    }

    // the same contraction drives the solver: consecutive update norms
    // must shrink at least geometrically at the observed rate
    let options = SolveOptions::default();
    let pseudo = generated_pseudo(&problem, 1.0, 25.0, 8193, &tr, &options);
    let run = picard_solve(&problem, &pseudo, &tr, &options).unwrap();
    assert!(run.certificate.converged);
    let updates = &run.update_history;
    let mut worst_decay: f64 = 0.0;
    for pair in updates.windows(2) {
        if pair[0] > 1e-12 {
            worst_decay = worst_decay.max(pair[1] / pair[0]);
        }
    }
    assert!(worst_decay <= 0.26, "update decay ratio {worst_decay}");

    println!(
        "PASS: criterion 5, contraction: worst operator ratio {worst:.6} over 50 pairs \
         (kappa=0.25), picard update decay <= {worst_decay:.6} across {} iterations",
        updates.len()
    );
}

#[test]
fn criterion_6_pq_counterexample() {
    let report = scenario_pq_counterexample(
        Exponent::finite(1.0).unwrap(),
        Exponent::finite(4.0).unwrap(),
        2.0,
    )
    .unwrap();
    assert!(report.passed(), "scenario assertions failed: {report:?}");

    let growth = report
        .assertions
        .iter()
        .find(|a| a.label.contains("divergence"))
        .unwrap()
        .computed;
    assert!(growth >= 5.0);
    let residual = report
        .assertions
        .iter()
        .find(|a| a.label.contains("closed form"))
        .unwrap();
    assert!((residual.computed - residual.expected).abs() <= 1e-6 * residual.expected.max(1.0));

    println!(
        "PASS: criterion 6, slow-decay counterexample: truncated norm ratio {growth:.3} >= 5, \
         residual norm {:.9} vs closed form {:.9}",
        residual.computed, residual.expected
    );
}

#[test]
fn criterion_7_dichotomy_fitting() {
    let sys = LinearSystem::diagonal_real(&[-2.0, 3.0]).unwrap();
    let proj = CMatrix::from_fn(2, 2, |i, j| if i == 0 && j == 0 { c(1.0) } else { c(0.0) });
    let times = default_sample_times();
    let spec = fit_dichotomy(&sys, proj, &times).unwrap();

    assert!((spec.constant - 1.0).abs() <= 1e-6, "D = {}", spec.constant);
    assert!((spec.rate - 2.0).abs() <= 1e-3, "lambda = {}", spec.rate);
    let check = verify_dichotomy(&sys, &spec, &times).unwrap();
    assert_eq!(check.violations(), 0);

    println!(
        "PASS: criterion 7, dichotomy fit for diag(-2,3): D={:.9}, lambda={:.6}, violations=0",
        spec.constant, spec.rate
    );
}

#[test]
fn criterion_8_certificate_soundness_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let exponents = [1.0, 2.0, f64::INFINITY];
    let options = SolveOptions::default();
    let mut worst_slack = f64::NEG_INFINITY;

    for trial in 0..20 {
        let two_dim = trial % 2 == 1;
        let (linear, rate) = if two_dim {
            let a1 = rng.gen_range(0.5..3.0);
            let a2 = rng.gen_range(0.5..3.0);
            (LinearSystem::diagonal_real(&[a1, a2]).unwrap(), a1.min(a2))
        } else {
            let a = rng.gen_range(0.5..3.0);
            (LinearSystem::scalar(a), a)
        };
        let dim = linear.dim();
        let dichotomy = DichotomySpec::expansion(dim, 1.0, rate).unwrap();
        let lip = rng.gen_range(0.0..0.8) * rate;
        let problem = SemilinearProblem::new(
            linear,
            dichotomy,
            move |_t, x: &CVector| x.map(|z| z.sin() * c(lip)),
            lip,
        )
        .unwrap();

        let pv = exponents[trial % 3];
        let tr = triple(pv, pv);
        let gamma = rng.gen_range(0.3..2.0);
        let pseudo = generated_pseudo(&problem, gamma, 25.0, 4097, &tr, &options);

        match picard_solve(&problem, &pseudo, &tr, &options) {
            Ok(run) => {
                let cert = run.certificate;
                assert!(cert.converged, "trial {trial} did not converge");
                let slack = cert.deviation - cert.constant * cert.epsilon;
                assert!(
                    slack <= 1e-6,
                    "trial {trial}: deviation {} > L*epsilon {}",
                    cert.deviation,
                    cert.constant * cert.epsilon
                );
                worst_slack = worst_slack.max(slack);
            }
            Err(Error::CertificateFailure { deviation, bound }) => {
                panic!("trial {trial}: certificate failure, deviation {deviation} vs bound {bound}");
            }
            Err(other) => panic!("trial {trial}: {other}"),
        }
    }

    println!(
        "PASS: criterion 8, certificate soundness: 20/20 randomized expansion problems certified, \
         worst deviation minus bound {worst_slack:.3e}, zero certificate failures"
    );
}
