//! The cubic regularization model and its subproblem solver.
//!
//! At an iterate with value `f`, gradient `g`, Hessian approximation `B`, and
//! regularization weight `σ > 0`, the model is
//!
//! ```text
//! m(s) = f + gᵀs + ½ sᵀBs + (σ/3)‖s‖³,
//! ∇m(s) = g + Bs + σ‖s‖ s.
//! ```
//!
//! [`CubicModel::solve_subproblem`] minimizes `m` approximately with a
//! Barzilai–Borwein gradient iteration safeguarded by a nonmonotone
//! watchdog linesearch (Grippo–Lampariello–Lucidi memory, as popularised for
//! spectral gradient methods by Birgin, Martínez and Raydan). The first
//! iterate is the exact Cauchy point, so every later iterate is at least as
//! good as the canonical decrease `m(0) − m(s_C)` that the outer convergence
//! theory relies on.
//!
//! The solver is organised so that each inner iteration costs exactly one
//! Hessian-vector product: along a line `s + t·p` the model value is a cubic
//! polynomial in `t` whose coefficients need only the products `B s` and
//! `B p`, and `B s` is carried forward incrementally as `w ← w + t·(B p)`.
//! Backtracking is therefore free, and the model gradient at the accepted
//! iterate comes from the same carried product.

use thiserror::Error;

use crate::objective::{CostLedger, HessianOperator, Point};

/// Linesearch and steplength constants for the subproblem solver.
const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const NONMONOTONE_MEMORY: usize = 10;
const STEPLEN_MIN: f64 = 1e-10;
const STEPLEN_MAX: f64 = 1e10;
const TRIAL_FLOOR: f64 = 1e-20;

#[derive(Debug, Error, PartialEq)]
pub enum CubicError {
    #[error("model gradient at the origin is zero; no descent direction")]
    ZeroGradient,
    #[error("regularization weight must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("inner tightness parameter must lie in (0, 1), got {0}")]
    BadTheta(f64),
    #[error("operator dimension {op} does not match gradient dimension {grad}")]
    DimensionMismatch { op: usize, grad: usize },
    #[error("model value became non-finite; the instance is numerically degenerate")]
    NonFinite,
}

/// Inner stopping rules: bounds on `‖∇m(s)‖` relative to the outer gradient
/// norm and, for the two step-aware rules, the step length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStop {
    /// `‖∇m(s)‖ ≤ θ·‖g‖`.
    RelativeGrad,
    /// `‖∇m(s)‖ ≤ θ·min(‖s‖², ‖g‖)`.
    StepSquared,
    /// `‖∇m(s)‖ ≤ θ·min(1, ‖s‖)·‖g‖`.
    StepScaled,
}

/// A stopping rule with its tightness parameter `θ ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerCriterion {
    pub kind: InnerStop,
    pub theta: f64,
}

impl InnerCriterion {
    pub fn new(kind: InnerStop, theta: f64) -> Result<Self, CubicError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(CubicError::BadTheta(theta));
        }
        Ok(Self { kind, theta })
    }

    /// Whether the rule accepts a candidate with model-gradient norm
    /// `model_grad_norm` at step length `step_norm`, given the outer gradient
    /// norm `grad_norm`.
    pub fn satisfied(&self, model_grad_norm: f64, step_norm: f64, grad_norm: f64) -> bool {
        let bound = match self.kind {
            InnerStop::RelativeGrad => self.theta * grad_norm,
            InnerStop::StepSquared => self.theta * (step_norm * step_norm).min(grad_norm),
            InnerStop::StepScaled => self.theta * step_norm.min(1.0) * grad_norm,
        };
        model_grad_norm <= bound
    }
}

/// Outcome of one subproblem solve.
#[derive(Debug, Clone)]
pub struct SubsolverReport {
    /// The returned trial step.
    pub step: Point,
    /// `m(0) − m(step)`, strictly positive.
    pub model_decrease: f64,
    /// `‖∇m(step)‖` at the returned step.
    pub model_grad_norm: f64,
    /// Inner iterations performed; equals the Hessian-vector products charged.
    pub iterations: u64,
    /// Whether the stopping rule was met (false on budget exhaustion).
    pub criterion_met: bool,
}

/// A cubic model bound to one Hessian operator.
pub struct CubicModel<'a> {
    pub f: f64,
    pub g: Point,
    pub sigma: f64,
    op: &'a dyn HessianOperator,
}

/// Exact minimizer of `ψ(α) = −α‖g‖² + (α²/2)·gᵀBg + (σ/3)·α³‖g‖³` over
/// `α ≥ 0`, written so that neither sign of `gᵀBg` cancels.
fn cauchy_alpha(g_norm: f64, gbg: f64, sigma: f64) -> f64 {
    let g2 = g_norm * g_norm;
    let disc = (gbg * gbg + 4.0 * sigma * g2 * g2 * g_norm).sqrt();
    if gbg > 0.0 {
        2.0 * g2 / (gbg + disc)
    } else {
        (-gbg + disc) / (2.0 * sigma * g2 * g_norm)
    }
}

impl<'a> CubicModel<'a> {
    pub fn new(
        f: f64,
        g: Point,
        sigma: f64,
        op: &'a dyn HessianOperator,
    ) -> Result<Self, CubicError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CubicError::BadSigma(sigma));
        }
        if op.dim() != g.len() {
            return Err(CubicError::DimensionMismatch {
                op: op.dim(),
                grad: g.len(),
            });
        }
        Ok(Self { f, g, sigma, op })
    }

    /// `m(s)`; one Hessian-vector product.
    pub fn value(&self, s: &Point, ledger: &mut CostLedger) -> f64 {
        let bs = self.op.apply(s, ledger);
        let n = s.norm();
        self.f + self.g.dot(s) + 0.5 * s.dot(&bs) + self.sigma / 3.0 * n * n * n
    }

    /// `∇m(s)`; one Hessian-vector product.
    pub fn grad(&self, s: &Point, ledger: &mut CostLedger) -> Point {
        let mut out = self.op.apply(s, ledger);
        out.axpy(self.sigma * s.norm(), s, 1.0);
        out += &self.g;
        out
    }

    /// The Cauchy point: the exact minimizer of the model along `−g`.
    /// One Hessian-vector product.
    pub fn cauchy_step(&self, ledger: &mut CostLedger) -> Result<Point, CubicError> {
        let g_norm = self.g.norm();
        if g_norm == 0.0 {
            return Err(CubicError::ZeroGradient);
        }
        let bg = self.op.apply(&self.g, ledger);
        let alpha = cauchy_alpha(g_norm, self.g.dot(&bg), self.sigma);
        Ok(-alpha * &self.g)
    }

    /// Approximately minimizes the model; see the module docs for the scheme.
    ///
    /// Charges exactly `iterations` Hessian-vector products. The returned
    /// step always satisfies `m(step) ≤ m(s_C) < m(0)`; `criterion_met`
    /// reports whether the stopping rule was satisfied within `budget`
    /// iterations.
    pub fn solve_subproblem(
        &self,
        criterion: InnerCriterion,
        budget: u64,
        ledger: &mut CostLedger,
    ) -> Result<SubsolverReport, CubicError> {
        let g_norm = self.g.norm();
        if g_norm == 0.0 {
            return Err(CubicError::ZeroGradient);
        }
        if budget == 0 {
            return Err(CubicError::NonFinite);
        }
        let sigma = self.sigma;

        // Iterate state: s, w = B·s, the model value at s, and ∇m(s).
        // First iterate: the exact Cauchy point, along p = −g.
        let mut p = -&self.g;
        let mut q = self.op.apply(&p, ledger); // q = −B·g
        let mut iterations: u64 = 1;
        let gbg = -self.g.dot(&q);
        let alpha = cauchy_alpha(g_norm, gbg, sigma);

        let mut s = alpha * &p;
        let mut w = alpha * &q;
        let mut m_s = cubic_along(self.f, -g_norm * g_norm, gbg, g_norm, sigma, alpha);
        let mut grad_m = self.model_grad_from(&s, &w);
        let mut resid = grad_m.norm();

        if !(m_s.is_finite() && resid.is_finite()) {
            return Err(CubicError::NonFinite);
        }

        // Cauchy safeguard state: best model value seen so far.
        let mut best_m = m_s;
        let mut best_s = s.clone();
        let mut best_resid = resid;

        let mut history = std::collections::VecDeque::with_capacity(NONMONOTONE_MEMORY);
        history.push_back(m_s);

        let mut steplen: f64 = 1.0; // overwritten by the BB rule before first use
        let mut met = criterion.satisfied(resid, s.norm(), g_norm);

        while !met && iterations < budget {
            let grad_norm_sq = resid * resid;
            p = -&grad_m;
            q = self.op.apply(&p, ledger);
            iterations += 1;

            // Scalars that make the whole linesearch product-free.
            let gp = self.g.dot(&p);
            let pw = p.dot(&w);
            let pq = p.dot(&q);
            let sp = s.dot(&p);
            let pp = p.norm_squared();
            let gs = self.g.dot(&s);
            let sw = s.dot(&w);
            let ss = s.norm_squared();

            let m_line = |t: f64| {
                let quad = sw + 2.0 * t * pw + t * t * pq;
                let nn = (ss + 2.0 * t * sp + t * t * pp).max(0.0);
                self.f + gs + t * gp + 0.5 * quad + sigma / 3.0 * nn * nn.sqrt()
            };

            let f_ref = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut t = steplen.clamp(STEPLEN_MIN, STEPLEN_MAX);
            let mut m_new = m_line(t);
            let mut accepted = m_new.is_finite() && m_new <= f_ref - ARMIJO * t * grad_norm_sq;
            while !accepted {
                t *= BACKTRACK;
                if t < TRIAL_FLOOR {
                    break;
                }
                m_new = m_line(t);
                accepted = m_new.is_finite() && m_new <= f_ref - ARMIJO * t * grad_norm_sq;
            }
            if !accepted {
                // The watchdog stalled below the trial floor; keep the best
                // iterate found so far.
                break;
            }

            s.axpy(t, &p, 1.0);
            w.axpy(t, &q, 1.0);
            m_s = m_new;
            let grad_prev = grad_m;
            grad_m = self.model_grad_from(&s, &w);
            resid = grad_m.norm();
            if !(m_s.is_finite() && resid.is_finite()) {
                return Err(CubicError::NonFinite);
            }

            // BB1 steplength from the last accepted move.
            let dy = &grad_m - &grad_prev;
            let sy = t * p.dot(&dy);
            steplen = if sy > 0.0 {
                (t * t * pp / sy).clamp(STEPLEN_MIN, STEPLEN_MAX)
            } else {
                STEPLEN_MAX
            };

            if history.len() == NONMONOTONE_MEMORY {
                history.pop_front();
            }
            history.push_back(m_s);
            if m_s < best_m {
                best_m = m_s;
                best_s.copy_from(&s);
                best_resid = resid;
            }
            met = criterion.satisfied(resid, s.norm(), g_norm);
        }

        // Return the current iterate when the rule is met, otherwise the best
        // model value seen. Both dominate the Cauchy point by construction:
        // the nonmonotone reference never rises above the running window
        // maximum, which starts at m(s_C).
        let (step, m_final, resid_final) = if met {
            (s, m_s, resid)
        } else {
            (best_s, best_m, best_resid)
        };
        let model_decrease = self.f - m_final;
        if !(model_decrease > 0.0 && model_decrease.is_finite()) {
            return Err(CubicError::NonFinite);
        }
        Ok(SubsolverReport {
            step,
            model_decrease,
            model_grad_norm: resid_final,
            iterations,
            criterion_met: met,
        })
    }

    /// `∇m(s)` from a precomputed `w = B·s`: no operator application.
    fn model_grad_from(&self, s: &Point, w: &Point) -> Point {
        let mut out = w.clone();
        out.axpy(self.sigma * s.norm(), s, 1.0);
        out += &self.g;
        out
    }
}

/// `ψ(α) = f + α·gᵀp + (α²/2)·pᵀBp + (σ/3)·α³‖p‖³` for the first move along
/// `p = −g`: `gᵀp = −‖g‖²`, `pᵀBp = gᵀBg`, `‖p‖ = ‖g‖`.
fn cubic_along(f: f64, gp: f64, pbp: f64, p_norm: f64, sigma: f64, alpha: f64) -> f64 {
    f + alpha * gp
        + 0.5 * alpha * alpha * pbp
        + sigma / 3.0 * alpha.powi(3) * p_norm.powi(3)
}
