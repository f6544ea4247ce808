//! Smallest-eigenvalue estimation for the second-order stopping test.
//!
//! [`estimate_min_eig`] runs the Lanczos iteration with full
//! reorthogonalization from a random start vector, monitoring the standard
//! residual bound `β_j·|z_j|` on the smallest Ritz pair of the tridiagonal
//! matrix. The returned Ritz vector is oriented to be a descent direction
//! against a supplied gradient, and one extra operator application is spent
//! on an exact residual `‖Bu − λu‖` so that callers never rely on the bound
//! alone. Every operator application is charged to the ledger, so the
//! estimate participates in the same gradient-equivalent accounting as the
//! rest of the method.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::objective::{CostLedger, HessianOperator, Point};

/// `β` below this multiple of the operator scale is treated as an invariant
/// subspace (happy breakdown).
const BREAKDOWN: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum EigenError {
    #[error("operator dimension must be positive")]
    ZeroDimension,
    #[error("Lanczos budget must be positive")]
    BadBudget,
    #[error("residual tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("Lanczos recurrence produced non-finite values")]
    NonFinite,
}

/// A smallest-eigenpair estimate.
#[derive(Debug, Clone)]
pub struct EigEstimate {
    /// Smallest Ritz value.
    pub lambda_min: f64,
    /// Unit Ritz vector, oriented so that `orient·u ≤ 0`.
    pub u: Point,
    /// `B·u`, saved so callers can form curvature terms without reapplying
    /// the operator.
    pub bu: Point,
    /// Exact residual `‖B·u − λ·u‖`.
    pub residual: f64,
    /// Operator applications performed (Lanczos steps plus the final
    /// residual check).
    pub products: u64,
}

/// Smallest Ritz pair of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta` (length `alpha.len() − 1`).
fn tridiag_min_pair(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let j = alpha.len();
    let mut t = DMatrix::zeros(j, j);
    for (i, &a) in alpha.iter().enumerate() {
        t[(i, i)] = a;
    }
    for (i, &b) in beta.iter().enumerate() {
        t[(i, i + 1)] = b;
        t[(i + 1, i)] = b;
    }
    let eig = t.symmetric_eigen();
    let mut min_idx = 0;
    for i in 1..j {
        if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
            min_idx = i;
        }
    }
    let z = eig.eigenvectors.column(min_idx).iter().cloned().collect();
    (eig.eigenvalues[min_idx], z)
}

/// Estimates the smallest eigenvalue of `op` by Lanczos iteration.
///
/// Runs at most `budget` operator applications for the recurrence and stops
/// early once the Ritz residual bound falls to `tol·max(1, |λ|)`. The start
/// vector is standard normal from `rng`. `orient` fixes the sign of the
/// returned vector (`orient·u ≤ 0`), making it directly usable as a descent
/// direction when `orient` is a gradient.
pub fn estimate_min_eig(
    op: &dyn HessianOperator,
    orient: &Point,
    budget: u64,
    tol: f64,
    rng: &mut impl Rng,
    ledger: &mut CostLedger,
) -> Result<EigEstimate, EigenError> {
    let dim = op.dim();
    if dim == 0 {
        return Err(EigenError::ZeroDimension);
    }
    if budget == 0 {
        return Err(EigenError::BadBudget);
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(EigenError::BadTolerance(tol));
    }
    let steps = (budget as usize).min(dim);

    let mut v = Point::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let norm = v.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    v /= norm;

    let mut basis: Vec<Point> = vec![v];
    let mut alpha: Vec<f64> = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut products: u64 = 0;
    let mut scale: f64 = 1.0;

    let (lambda, z) = loop {
        let vj = basis.last().expect("basis is never empty");
        let mut w = op.apply(vj, ledger);
        products += 1;
        let a = vj.dot(&w);
        if !a.is_finite() {
            return Err(EigenError::NonFinite);
        }
        w.axpy(-a, vj, 1.0);
        if basis.len() >= 2 {
            let prev = &basis[basis.len() - 2];
            w.axpy(-beta[beta.len() - 1], prev, 1.0);
        }
        // Full reorthogonalization, two passes.
        for _ in 0..2 {
            for vi in &basis {
                let c = vi.dot(&w);
                w.axpy(-c, vi, 1.0);
            }
        }
        alpha.push(a);
        scale = scale.max(a.abs());

        let (lam, z) = tridiag_min_pair(&alpha, &beta);
        let b = w.norm();
        if !b.is_finite() {
            return Err(EigenError::NonFinite);
        }
        let converged = b * z.last().expect("non-empty Ritz vector").abs()
            <= tol * lam.abs().max(1.0);
        let breakdown = b <= BREAKDOWN * scale.max(1.0);
        if converged || breakdown || alpha.len() >= steps {
            break (lam, z);
        }
        beta.push(b);
        scale = scale.max(b);
        basis.push(w / b);
    };

    // Assemble the Ritz vector and measure its exact residual.
    let mut u = Point::zeros(dim);
    for (vi, &zi) in basis.iter().zip(z.iter()) {
        u.axpy(zi, vi, 1.0);
    }
    let un = u.norm();
    if !(un > 0.0 && un.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    u /= un;
    let mut bu = op.apply(&u, ledger);
    products += 1;
    let mut resid_vec = bu.clone();
    resid_vec.axpy(-lambda, &u, 1.0);
    let residual = resid_vec.norm();
    if !residual.is_finite() {
        return Err(EigenError::NonFinite);
    }
    if orient.dot(&u) > 0.0 {
        u.neg_mut();
        bu.neg_mut();
    }
    Ok(EigEstimate {
        lambda_min: lambda,
        u,
        bu,
        residual,
        products,
    })
}

/// The model minimizer along a unit negative-curvature direction.
///
/// For `φ(α) = α·(g·u) + (α²/2)·(u·Bu) + (σ/3)·α³` with `u·Bu < 0` and
/// `g·u ≤ 0`, returns the positive root of `φ'` together with the model
/// decrease `−φ(α)`. Returns `None` when the curvature along `u` is not
/// negative, in which case the direction offers no guaranteed decrease.
pub fn eig_step(g: &Point, u: &Point, bu: &Point, sigma: f64) -> Option<(Point, f64)> {
    let b = u.dot(bu);
    if !(b < 0.0) || !(sigma > 0.0) {
        return None;
    }
    let c = g.dot(u).min(0.0);
    let disc = (b * b - 4.0 * sigma * c).sqrt();
    let alpha = (-b + disc) / (2.0 * sigma);
    if !(alpha > 0.0 && alpha.is_finite()) {
        return None;
    }
    let phi = c * alpha + 0.5 * b * alpha * alpha + sigma / 3.0 * alpha.powi(3);
    if !phi.is_finite() {
        return None;
    }
    Some((alpha * u, -phi))
}

/// Second-order stopping test: gradient small and estimated curvature not
/// more negative than `−eps_h`.
pub fn so_terminate(grad_norm: f64, lambda_min: f64, eps: f64, eps_h: f64) -> bool {
    grad_norm <= eps && lambda_min >= -eps_h
}
