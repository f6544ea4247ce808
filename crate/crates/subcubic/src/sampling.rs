//! Sample-size selection and index drawing for subsampled Hessians.
//!
//! For components whose Hessians are bounded by `κ` in spectral norm, a
//! uniform without-replacement sample `D` of size
//!
//! ```text
//! |D| ≥ (4κ/C)·(2κ/C + 1/3)·ln(2d/δ̄)
//! ```
//!
//! guarantees `‖∇²f(x) − B‖ ≤ C` with probability at least `1 − δ̄` (matrix
//! Bernstein concentration for sums of independent bounded matrices; sampling
//! without replacement only concentrates better). The bound grows like
//! `(κ/C)²`, so halving the requested accuracy roughly quadruples the sample.
//!
//! [`safeguarded_size`] clamps the same formula, evaluated with a fixed proxy
//! `ρ` in place of the per-point curvature bound, to the band
//! `[0.05·N, 0.1·N]`, which keeps per-iteration cost predictable on problems
//! whose curvature estimate is wildly conservative.
//!
//! [`calibrate_c`] and [`calibrate_rho`] invert the formula — by monotone
//! bisection — so that a target sample fraction is met exactly at a reference
//! accuracy; the drivers use them to pin `C` (and `ρ`) per dataset instead of
//! hand-tuning.

use rand::Rng;
use thiserror::Error;

use crate::objective::SampleSet;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("required accuracy must be positive, got {0}")]
    NonPositiveAccuracy(f64),
    #[error("failure probability must lie in (0, 1), got {0}")]
    BadFailureProbability(f64),
    #[error("curvature bound must be non-negative and finite, got {0}")]
    BadCurvature(f64),
    #[error("target fraction must lie in (0, 1], got {0}")]
    BadTargetFraction(f64),
    #[error("target sample size {target} is unattainable (formula range ends at {max})")]
    UnattainableTarget { target: usize, max: usize },
    #[error("sample size {size} out of range for {n} components")]
    BadSize { size: usize, n: usize },
}

/// Accuracy request for one Hessian approximation: spectral-norm error at
/// most `c` with per-draw failure probability `delta_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracySpec {
    pub c: f64,
    pub delta_bar: f64,
}

impl AccuracySpec {
    fn validate(&self) -> Result<(), SamplingError> {
        if !(self.c > 0.0) {
            return Err(SamplingError::NonPositiveAccuracy(self.c));
        }
        if !(self.delta_bar > 0.0 && self.delta_bar < 1.0) {
            return Err(SamplingError::BadFailureProbability(self.delta_bar));
        }
        Ok(())
    }
}

/// Why a plan ended up at its size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanRationale {
    /// The concentration bound itself (floored at one component).
    ConcentrationBound,
    /// The bound exceeded the component count; the full set is used.
    Full,
    /// Clamped from below at 5% of the components.
    SafeguardFloor,
    /// Clamped from above at 10% of the components.
    SafeguardCap,
}

/// A resolved sample size together with the rule that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplePlan {
    pub size: usize,
    pub rationale: PlanRationale,
}

/// Raw value of the concentration bound, before rounding.
fn bound_value(kappa: f64, c: f64, dim: usize, delta_bar: f64) -> f64 {
    let r = kappa / c;
    (4.0 * r) * (2.0 * r + 1.0 / 3.0) * (2.0 * dim as f64 / delta_bar).ln()
}

/// Sample size from the concentration bound, capped at `n` and floored at 1.
///
/// `kappa` is the spectral-norm bound on the component Hessians at the
/// current point, `dim` the problem dimension, `n` the component count.
pub fn sample_size(
    spec: AccuracySpec,
    kappa: f64,
    dim: usize,
    n: usize,
) -> Result<SamplePlan, SamplingError> {
    spec.validate()?;
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(SamplingError::BadCurvature(kappa));
    }
    let raw = bound_value(kappa, spec.c, dim, spec.delta_bar);
    if raw >= n as f64 {
        return Ok(SamplePlan {
            size: n,
            rationale: PlanRationale::Full,
        });
    }
    let size = (raw.ceil() as usize).max(1);
    Ok(SamplePlan {
        size: size.min(n),
        rationale: PlanRationale::ConcentrationBound,
    })
}

/// Safeguarded sample size: the concentration bound evaluated with the proxy
/// curvature `rho`, clamped to `[⌈0.05·n⌉, ⌊0.1·n⌋]` (band edges floored at
/// one component).
pub fn safeguarded_size(
    spec: AccuracySpec,
    rho: f64,
    dim: usize,
    n: usize,
) -> Result<SamplePlan, SamplingError> {
    spec.validate()?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(SamplingError::BadCurvature(rho));
    }
    let lo = ((0.05 * n as f64).ceil() as usize).clamp(1, n);
    let hi = ((0.10 * n as f64).floor() as usize).clamp(lo, n);
    let raw = bound_value(rho, spec.c, dim, spec.delta_bar);
    let unclamped = if raw >= n as f64 {
        n
    } else {
        (raw.ceil() as usize).max(1)
    };
    let plan = if unclamped < lo {
        SamplePlan {
            size: lo,
            rationale: PlanRationale::SafeguardFloor,
        }
    } else if unclamped > hi {
        SamplePlan {
            size: hi,
            rationale: PlanRationale::SafeguardCap,
        }
    } else {
        SamplePlan {
            size: unclamped,
            rationale: PlanRationale::ConcentrationBound,
        }
    };
    Ok(plan)
}

/// Finds `C` such that the concentration bound at curvature `kappa` yields a
/// sample of `⌈target_frac·n⌉` components (up to the rounding step of the
/// integer-valued size map). The bound is strictly decreasing in `C`, so a
/// bracketed bisection converges; the bracket is grown geometrically first.
pub fn calibrate_c(
    target_frac: f64,
    kappa: f64,
    dim: usize,
    n: usize,
    delta_bar: f64,
) -> Result<f64, SamplingError> {
    if !(target_frac > 0.0 && target_frac <= 1.0) {
        return Err(SamplingError::BadTargetFraction(target_frac));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(SamplingError::BadCurvature(kappa));
    }
    if !(delta_bar > 0.0 && delta_bar < 1.0) {
        return Err(SamplingError::BadFailureProbability(delta_bar));
    }
    let target = ((target_frac * n as f64).ceil() as usize).clamp(1, n);
    if kappa == 0.0 {
        // The bound is identically zero: only a size-one target is reachable.
        if target <= 1 {
            return Ok(1.0);
        }
        return Err(SamplingError::UnattainableTarget { target, max: 1 });
    }
    let value = |c: f64| bound_value(kappa, c, dim, delta_bar);
    // Grow a bracket [lo, hi] with value(lo) ≥ target ≥ value(hi).
    let mut lo = kappa;
    let mut hi = kappa;
    let t = target as f64;
    for _ in 0..1100 {
        if value(lo) >= t {
            break;
        }
        lo /= 2.0;
    }
    for _ in 0..1100 {
        if value(hi) <= t {
            break;
        }
        hi *= 2.0;
    }
    if value(lo) < t || value(hi) > t {
        return Err(SamplingError::UnattainableTarget { target, max: 1 });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value(mid) >= t {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Finds the proxy curvature `rho` such that the concentration bound at
/// accuracy `c_ref` yields `⌈target_frac·n⌉` components. Monotone increasing
/// in `rho`; same bracketed bisection as [`calibrate_c`].
pub fn calibrate_rho(
    target_frac: f64,
    c_ref: f64,
    dim: usize,
    n: usize,
    delta_bar: f64,
) -> Result<f64, SamplingError> {
    if !(target_frac > 0.0 && target_frac <= 1.0) {
        return Err(SamplingError::BadTargetFraction(target_frac));
    }
    if !(c_ref > 0.0) {
        return Err(SamplingError::NonPositiveAccuracy(c_ref));
    }
    if !(delta_bar > 0.0 && delta_bar < 1.0) {
        return Err(SamplingError::BadFailureProbability(delta_bar));
    }
    let target = ((target_frac * n as f64).ceil() as usize).clamp(1, n);
    let value = |rho: f64| bound_value(rho, c_ref, dim, delta_bar);
    let t = target as f64;
    let mut lo = c_ref;
    let mut hi = c_ref;
    for _ in 0..1100 {
        if value(lo) <= t {
            break;
        }
        lo /= 2.0;
    }
    for _ in 0..1100 {
        if value(hi) >= t {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value(mid) <= t {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Per-iteration failure probability `δ̄ = 1 − (1−δ)^(1/k)` that makes `k`
/// independent draws jointly succeed with probability at least `1 − δ`.
pub fn per_draw_failure_probability(delta: f64, draws: usize) -> Result<f64, SamplingError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SamplingError::BadFailureProbability(delta));
    }
    if draws == 0 {
        return Err(SamplingError::BadSize { size: 0, n: 0 });
    }
    Ok(1.0 - (1.0 - delta).powf(1.0 / draws as f64))
}

/// Draws `size` distinct indices uniformly from `{0, …, n−1}` by a partial
/// Fisher–Yates shuffle, returning them sorted. `size == n` returns the full
/// set without consuming randomness.
pub fn draw<R: Rng>(size: usize, n: usize, rng: &mut R) -> Result<SampleSet, SamplingError> {
    if size == 0 || size > n {
        return Err(SamplingError::BadSize { size, n });
    }
    if size == n {
        return Ok(SampleSet::full(n));
    }
    let mut pool: Vec<usize> = (0..n).collect();
    for j in 0..size {
        let pick = j + rng.gen_range(0..n - j);
        pool.swap(j, pick);
    }
    let mut indices: Vec<usize> = pool[..size].to_vec();
    indices.sort_unstable();
    Ok(SampleSet::from_sorted(indices).expect("nonempty by construction"))
}
