//! A four-point instance with an exactly known strict saddle: the gradient
//! vanishes at x* = (1, 0) while the Hessian there has one negative and one
//! positive eigenvalue. A gradient-norm test alone declares victory at x*;
//! the curvature-aware run must step off the saddle immediately.

use nalgebra::DVector;
use rand::SeedableRng;
use subcubic::driver::{run, run_so, ArcConfig, HessianVariant, Outcome, RunStatus, StartPoint};
use subcubic::eigen::estimate_min_eig;
use subcubic::objective::SubsampledHessian;
use subcubic::oracle::dense_min_eig;
use subcubic::{CostLedger, FiniteSumProblem, Point, SampleSet};

/// Root of `ψ'(1, 1) + β·ψ'(β, 0) = 0` where `ψ(t, y) = (σ(t) − y)²`; this
/// choice cancels the first gradient coordinate at x* = (1, 0), and the two
/// mirrored rows on the second axis cancel the other coordinate exactly.
const BETA: f64 = 4.3793071805838439418;
const F_AT_SADDLE: f64 = 0.38693124019042111238;
const LAMBDA_NEG: f64 = -0.0799369096848970448;

fn saddle_problem() -> (FiniteSumProblem, Point) {
    let rows = vec![
        DVector::from_vec(vec![1.0, 0.0]),
        DVector::from_vec(vec![BETA, 0.0]),
        DVector::from_vec(vec![0.0, 1.0]),
        DVector::from_vec(vec![0.0, -1.0]),
    ];
    let problem = FiniteSumProblem::new(rows, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
    (problem, DVector::from_vec(vec![1.0, 0.0]))
}

#[test]
fn the_construction_is_a_strict_saddle() {
    let (problem, x_star) = saddle_problem();
    let mut ledger = CostLedger::new();
    let g = problem.eval_grad(&x_star, &mut ledger).unwrap();
    assert!(g.norm() <= 1e-10, "not stationary: {}", g.norm());
    let f = problem.eval_f(&x_star, &mut ledger).unwrap();
    assert!((f - F_AT_SADDLE).abs() < 1e-15);

    let full = SampleSet::full(problem.n_components());
    let h = problem.assemble_hessian(&x_star, &full).unwrap();
    assert_eq!(h[(0, 1)], 0.0); // axis-aligned rows keep it diagonal
    let (lambda, u) = dense_min_eig(&h);
    assert!((lambda - LAMBDA_NEG).abs() < 1e-12);
    assert!((h[(1, 1)] - 0.0625).abs() < 1e-12);
    assert!(((&h * &u) - lambda * &u).norm() <= 1e-10);
}

#[test]
fn lanczos_certifies_the_negative_direction() {
    let (problem, x_star) = saddle_problem();
    let full = SampleSet::full(problem.n_components());
    let op = SubsampledHessian::new(&problem, x_star, full).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut ledger = CostLedger::new();
    let orient = DVector::from_vec(vec![1.0, 0.0]);
    let est = estimate_min_eig(&op, &orient, 100, 1e-12, &mut rng, &mut ledger).unwrap();
    assert!((est.lambda_min - LAMBDA_NEG).abs() <= 1e-10);
    assert!(est.residual <= 1e-10);
}

#[test]
fn gradient_only_run_stalls_at_the_saddle() {
    let (problem, x_star) = saddle_problem();
    let mut cfg = ArcConfig::default();
    cfg.variant = HessianVariant::Full;
    cfg.start = StartPoint::At(x_star.clone());
    let trace = run(&problem, &cfg, 0).unwrap();
    assert_eq!(trace.status, RunStatus::ConvergedFirstOrder);
    assert!(trace.records.is_empty());
    assert_eq!(trace.x_final, x_star);
}

#[test]
fn curvature_aware_run_escapes_immediately() {
    let (problem, x_star) = saddle_problem();
    let mut cfg = ArcConfig::default();
    cfg.variant = HessianVariant::Full;
    cfg.start = StartPoint::At(x_star);
    let trace = run_so(&problem, &cfg, None, 0).unwrap();
    assert!(!trace.records.is_empty(), "no step taken");
    let first = &trace.records[0];
    assert!(
        matches!(first.outcome, Outcome::VerySuccessful | Outcome::Successful),
        "first step not accepted: {:?}",
        first.outcome
    );
    assert!(first.step_norm > 0.1, "degenerate escape step");
    assert!(trace.f_final < F_AT_SADDLE - 1e-6);
    assert_eq!(trace.status, RunStatus::ConvergedFirstOrder);
}
