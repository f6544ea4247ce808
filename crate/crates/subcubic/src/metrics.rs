//! Measurements over finished runs: classification rate, testing loss,
//! cost savings between solvers, and performance profiles.
//!
//! None of these charge a cost ledger — they are evaluations *about* runs,
//! outside the optimization budget.

use thiserror::Error;

use crate::objective::{sigmoid, FiniteSumProblem, ObjectiveError, Point};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("profile needs at least one problem and one solver")]
    EmptyMatrix,
    #[error("cost matrix is ragged: row {row} has {got} entries, expected {want}")]
    RaggedMatrix { row: usize, got: usize, want: usize },
    #[error("costs must be positive (or +inf for unsolved), got {0}")]
    NonPositiveCost(f64),
    #[error("profile threshold tau must be >= 1, got {0}")]
    BadTau(f64),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Fraction of rows whose thresholded prediction matches the label.
/// The predicted class is 1 when `σ(aᵀx) ≥ 0.5` (ties resolve to 1).
pub fn classification_rate(problem: &FiniteSumProblem, x: &Point) -> Result<f64, MetricsError> {
    if x.len() != problem.dim() {
        return Err(ObjectiveError::PointDimension {
            got: x.len(),
            expected: problem.dim(),
        }
        .into());
    }
    let mut hits = 0usize;
    for (row, &y) in problem.rows().iter().zip(problem.labels().iter()) {
        let predicted = if sigmoid(row.dot(x)) >= 0.5 { 1.0 } else { 0.0 };
        if predicted == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / problem.n_components() as f64)
}

/// Mean squared sigmoid residual on a held-out problem; identical to the
/// training objective evaluated there, and charged to no ledger.
pub fn testing_loss(problem: &FiniteSumProblem, x: &Point) -> Result<f64, MetricsError> {
    Ok(problem.loss(x)?)
}

/// Percent cost saving of a reference solver against a comparison solver:
/// `100·(ege_cmp − ege_ref)/ege_cmp`. Positive means the reference was
/// cheaper; both inputs must be positive.
pub fn savings(ege_ref: f64, ege_cmp: f64) -> f64 {
    100.0 * (ege_cmp - ege_ref) / ege_cmp
}

/// One sampled point of a performance profile: the fraction of problems
/// each solver finished within factor `tau` of the per-problem best cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub tau: f64,
    /// One fraction per solver, in the column order of the cost matrix.
    pub rho: Vec<f64>,
}

/// Computes the profile from a problems × solvers cost matrix. `+inf`
/// entries mean the solver did not finish that problem; they never count as
/// within any `tau`, but the problem still counts in the denominator.
pub fn performance_profile(
    costs: &[Vec<f64>],
    taus: &[f64],
) -> Result<Vec<ProfilePoint>, MetricsError> {
    if costs.is_empty() || costs[0].is_empty() {
        return Err(MetricsError::EmptyMatrix);
    }
    let n_solvers = costs[0].len();
    for (row, r) in costs.iter().enumerate() {
        if r.len() != n_solvers {
            return Err(MetricsError::RaggedMatrix {
                row,
                got: r.len(),
                want: n_solvers,
            });
        }
        for &e in r {
            if !(e > 0.0) {
                return Err(MetricsError::NonPositiveCost(e));
            }
        }
    }
    for &tau in taus {
        if !(tau >= 1.0) {
            return Err(MetricsError::BadTau(tau));
        }
    }

    // Performance ratios per problem; +inf propagates for unsolved entries
    // and for problems nobody solved.
    let n_problems = costs.len() as f64;
    let ratios: Vec<Vec<f64>> = costs
        .iter()
        .map(|r| {
            let best = r.iter().cloned().fold(f64::INFINITY, f64::min);
            r.iter()
                .map(|&e| if e.is_finite() { e / best } else { f64::INFINITY })
                .collect()
        })
        .collect();

    Ok(taus
        .iter()
        .map(|&tau| {
            let rho = (0..n_solvers)
                .map(|s| {
                    let within = ratios.iter().filter(|r| r[s] <= tau).count();
                    within as f64 / n_problems
                })
                .collect();
            ProfilePoint { tau, rho }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn problem(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> FiniteSumProblem {
        FiniteSumProblem::new(rows.into_iter().map(DVector::from_vec).collect(), labels).unwrap()
    }

    #[test]
    fn rate_at_zero_predicts_all_ones() {
        let p = problem(
            vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 2.0], vec![1.0, 1.0]],
            vec![1.0, 0.0, 1.0, 0.0],
        );
        let rate = classification_rate(&p, &DVector::zeros(2)).unwrap();
        assert_eq!(rate, 0.5); // ties go to class 1, which is half the labels
    }

    #[test]
    fn rate_on_separated_data_is_one() {
        let p = problem(
            vec![vec![5.0], vec![-5.0], vec![4.5], vec![-6.0]],
            vec![1.0, 0.0, 1.0, 0.0],
        );
        let x = DVector::from_vec(vec![1.0]);
        assert_eq!(classification_rate(&p, &x).unwrap(), 1.0);
        // Single confidently-wrong-side row with the matching label.
        let q = problem(vec![vec![-1.0]], vec![0.0]);
        assert_eq!(classification_rate(&q, &DVector::from_vec(vec![1.0])).unwrap(), 1.0);
    }

    #[test]
    fn rate_is_invariant_under_compatible_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<f64> = (0..30).map(|_| f64::from(rng.gen_range(0..2))).collect();
        let x = DVector::from_iterator(4, (0..4).map(|_| rng.gen_range(-2.0..2.0)));
        let p = problem(rows.clone(), labels.clone());
        let base = classification_rate(&p, &x).unwrap();
        let c = 3.7;
        let scaled = problem(
            rows.iter()
                .map(|r| r.iter().map(|v| c * v).collect())
                .collect(),
            labels,
        );
        let x_scaled = &x / c;
        assert_eq!(classification_rate(&scaled, &x_scaled).unwrap(), base);
    }

    #[test]
    fn testing_loss_matches_objective_evaluation() {
        let p = problem(
            vec![vec![0.3, -0.2], vec![0.1, 0.9]],
            vec![1.0, 0.0],
        );
        let x = DVector::from_vec(vec![0.4, -1.1]);
        let loss = testing_loss(&p, &x).unwrap();
        let mut ledger = crate::objective::CostLedger::new();
        let f = p.eval_f(&x, &mut ledger).unwrap();
        assert_eq!(loss, f);
        // At x = 0 every residual is exactly 1/2.
        assert_eq!(testing_loss(&p, &DVector::zeros(2)).unwrap(), 0.25);
    }

    #[test]
    fn savings_examples() {
        assert!((savings(67.4, 183.0) - 63.16939890710383).abs() < 1e-12);
        assert!((savings(103.7, 185.2) - 44.00647948164147).abs() < 1e-12);
        assert_eq!(savings(50.0, 50.0), 0.0);
        // Reference more expensive → negative.
        assert!(savings(200.0, 100.0) < 0.0);
    }

    #[test]
    fn profile_hand_example() {
        let costs = vec![vec![10.0, 20.0], vec![20.0, 10.0]];
        let pts = performance_profile(&costs, &[1.0, 2.0]).unwrap();
        assert_eq!(pts[0].rho, vec![0.5, 0.5]);
        assert_eq!(pts[1].rho, vec![1.0, 1.0]);

        let single = performance_profile(&[vec![5.0], vec![9.0]], &[1.0]).unwrap();
        assert_eq!(single[0].rho, vec![1.0]);
    }

    #[test]
    fn profile_handles_unsolved_entries() {
        let costs = vec![vec![10.0, f64::INFINITY], vec![20.0, 10.0]];
        let pts = performance_profile(&costs, &[1.0, 2.0, 1e12]).unwrap();
        // Solver 2 never solves problem 1, so it tops out at 1/2.
        assert_eq!(pts[2].rho[1], 0.5);
        assert_eq!(pts[0].rho[0], 0.5);
        assert_eq!(pts[2].rho[0], 1.0);
    }

    #[test]
    fn profile_is_monotone_and_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let costs: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..3).map(|_| rng.gen_range(1.0..100.0)).collect())
            .collect();
        let taus: Vec<f64> = (0..40).map(|i| 1.0 + i as f64 * 0.25).collect();
        let pts = performance_profile(&costs, &taus).unwrap();
        for w in pts.windows(2) {
            for s in 0..3 {
                assert!(w[1].rho[s] >= w[0].rho[s]);
            }
        }
        let mut shuffled = costs.clone();
        shuffled.reverse();
        shuffled.swap(0, 3);
        let pts2 = performance_profile(&shuffled, &taus).unwrap();
        assert_eq!(pts, pts2);
    }

    #[test]
    fn profile_rejects_bad_inputs() {
        assert_eq!(
            performance_profile(&[], &[1.0]),
            Err(MetricsError::EmptyMatrix)
        );
        assert!(matches!(
            performance_profile(&[vec![1.0], vec![1.0, 2.0]], &[1.0]),
            Err(MetricsError::RaggedMatrix { row: 1, .. })
        ));
        assert!(matches!(
            performance_profile(&[vec![1.0]], &[0.5]),
            Err(MetricsError::BadTau(_))
        ));
        assert!(matches!(
            performance_profile(&[vec![0.0]], &[1.0]),
            Err(MetricsError::NonPositiveCost(_))
        ));
    }
}
