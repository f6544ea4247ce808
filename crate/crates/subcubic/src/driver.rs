//! The outer adaptive cubic-regularization loop.
//!
//! Each iteration builds a Hessian approximation `B_k` for the current
//! iterate by uniform subsampling (sized by the concentration bound in
//! [`crate::sampling`]), approximately minimizes the cubic model, and then
//! runs two gates:
//!
//! 1. an *accuracy gate* (only for the dynamic variants): if the step came
//!    out shorter than one while the coarse accuracy `C` is still in force
//!    and `C` exceeds `α(1−θ)·‖∇f(x_k)‖`, the iteration is rejected, the
//!    requested accuracy is tightened to that value, and `B_k` is redrawn —
//!    nothing else moves;
//! 2. an *acceptance gate*: the ratio `ρ` of actual to model-predicted
//!    decrease accepts the step when `ρ ≥ η1`, shrinks the regularization
//!    weight on `ρ ≥ η2`, and inflates it by `γ2` on rejection.
//!
//! After an accepted step the next accuracy request is `C` again if the step
//! was long (`‖s‖ ≥ 1`), and `α(1−θ)·‖∇f(x_{k+1})‖` otherwise; a `flag`
//! records which of the two is in force. Unsuccessful acceptance-gate
//! iterations keep both the accuracy and the drawn sample, so the operator
//! binding is reused verbatim.
//!
//! [`run`] stops on the gradient test `‖∇f‖ ≤ ε`; [`run_so`] instead builds
//! an approximate smallest eigenpair of every `B_k` and stops only when the
//! estimated curvature also clears `−ε_H`, taking negative-curvature steps
//! when they beat the subsolver's candidate. Costs are charged to a
//! [`CostLedger`] in integer component units: full-set function and gradient
//! evaluations cost `N`, a Hessian-vector product costs the sample size.
//! Eigenpair estimation is deliberately left out of the ledger so that
//! first- and second-order runs produce identical traces on instances where
//! negative curvature never shows up.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cubic::{CubicModel, InnerCriterion, InnerStop};
use crate::eigen::{self, EigEstimate};
use crate::objective::{
    CostLedger, FiniteSumProblem, ObjectiveError, Point, SampleSet, SubsampledHessian,
};
use crate::sampling::{self, AccuracySpec, SamplingError};

/// Floor applied to derived accuracy requests. A vanishing gradient would
/// otherwise request accuracy 0, which the sampler rejects; the floor sends
/// the bound to infinity instead, i.e. to the full component set.
const ACCURACY_FLOOR: f64 = f64::MIN_POSITIVE;

/// Acceptance-ratio denominator guard: a model decrease at or below this is
/// treated as numerically degenerate and the step is rejected.
const RHO_GUARD: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("start point has dimension {got}, problem has {want}")]
    StartDimension { got: usize, want: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Where a run starts.
#[derive(Debug, Clone, PartialEq)]
pub enum StartPoint {
    /// The zero vector (the customary choice for these losses).
    Zero,
    /// An explicit point, e.g. to probe the landscape near a known feature.
    At(Point),
}

/// How the coarse accuracy constant `C` is chosen for the dynamic variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoarseAccuracy {
    /// Use this value directly.
    Fixed(f64),
    /// Calibrate `C` at the start point so the initial sample is this
    /// fraction of the components.
    SampleFraction(f64),
}

/// The Hessian-approximation policies being compared.
#[derive(Debug, Clone, PartialEq)]
pub enum HessianVariant {
    /// Accuracy driven by the step-length/gradient rule, with the
    /// accuracy-gate machinery active.
    Dynamic,
    /// Same rule, but the sample size is computed with a tuned proxy
    /// curvature `rho` and clamped to the `[0.05N, 0.1N]` band; the coarse
    /// `C` is calibrated so long steps use `0.05N` samples. `None` tunes
    /// `rho` so that accuracy `α(1−θ)·ε^{2/3}` maps to `0.1N`.
    DynamicSafeguarded { rho: Option<f64> },
    /// Exact Hessian (full sample) every iteration.
    Full,
    /// A constant accuracy request every iteration; `None` uses the
    /// first-order tolerance `ε`.
    ConstantAccuracy { c: Option<f64> },
    /// Accuracy proportional to the last accepted step: `C_k = χ·‖s_last‖`.
    /// The first sample is `0.1N`; `None` calibrates `χ` at the first
    /// post-step draw so that draw is also `0.1N`.
    StepProportional { chi: Option<f64> },
    /// A fixed fraction of the components every iteration, bypassing the
    /// accuracy machinery entirely.
    FixedFraction { p: f64 },
}

/// Full parameter block for a run. `Default` gives the reference settings
/// used throughout the benchmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcConfig {
    pub sigma0: f64,
    pub sigma_min: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub alpha: f64,
    pub theta: f64,
    /// First-order tolerance ε.
    pub eps: f64,
    /// Per-draw failure probability fed to the sample-size bound.
    pub delta_bar: f64,
    pub max_iters: u64,
    /// Relative objective-stagnation tolerance, checked across accepted
    /// steps.
    pub f_rel_stop: f64,
    pub inner_stop: InnerStop,
    /// Inner-iteration cap for the subproblem solver.
    pub inner_budget: u64,
    pub coarse: CoarseAccuracy,
    pub variant: HessianVariant,
    pub start: StartPoint,
    /// Lanczos iteration cap (further capped at the dimension).
    pub eig_budget: u64,
    pub eig_tol: f64,
}

impl Default for ArcConfig {
    fn default() -> Self {
        Self {
            sigma0: 0.1,
            sigma_min: 1e-5,
            eta1: 0.1,
            eta2: 0.8,
            gamma1: 0.5,
            gamma2: 1.5,
            gamma3: 2.0,
            alpha: 0.1,
            theta: 0.5,
            eps: 1e-3,
            delta_bar: 0.2,
            max_iters: 500,
            f_rel_stop: 1e-6,
            inner_stop: InnerStop::RelativeGrad,
            inner_budget: 500,
            coarse: CoarseAccuracy::SampleFraction(0.1),
            variant: HessianVariant::Dynamic,
            start: StartPoint::Zero,
            eig_budget: 100,
            eig_tol: 1e-8,
        }
    }
}

impl ArcConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        let fail = |msg: String| Err(DriverError::Config(msg));
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return fail(format!("theta must lie in (0,1), got {}", self.theta));
        }
        if !(self.alpha >= 0.0 && self.alpha < 2.0 / 3.0) {
            return fail(format!("alpha must lie in [0, 2/3), got {}", self.alpha));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min <= self.sigma0 && self.sigma0.is_finite()) {
            return fail(format!(
                "need 0 < sigma_min <= sigma0, got sigma_min={} sigma0={}",
                self.sigma_min, self.sigma0
            ));
        }
        let eta2_cap = (2.0 - 3.0 * self.alpha) / 2.0;
        if !(self.eta1 > 0.0 && self.eta1 <= self.eta2 && self.eta2 < eta2_cap) {
            return fail(format!(
                "need 0 < eta1 <= eta2 < (2-3*alpha)/2 = {eta2_cap}, got eta1={} eta2={}",
                self.eta1, self.eta2
            ));
        }
        if !(self.gamma1 > 0.0
            && self.gamma1 < 1.0
            && self.gamma2 > 1.0
            && self.gamma2 < self.gamma3)
        {
            return fail(format!(
                "need 0 < gamma1 < 1 < gamma2 < gamma3, got {} {} {}",
                self.gamma1, self.gamma2, self.gamma3
            ));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return fail(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.delta_bar > 0.0 && self.delta_bar < 1.0) {
            return fail(format!("delta_bar must lie in (0,1), got {}", self.delta_bar));
        }
        if self.f_rel_stop < 0.0 {
            return fail(format!("f_rel_stop must be >= 0, got {}", self.f_rel_stop));
        }
        if self.inner_budget == 0 {
            return fail("inner_budget must be at least 1".into());
        }
        if self.eig_budget == 0 || !(self.eig_tol > 0.0) {
            return fail("eig_budget must be >= 1 and eig_tol > 0".into());
        }
        match self.coarse {
            CoarseAccuracy::Fixed(c) if !(c > 0.0 && c.is_finite()) => {
                return fail(format!("coarse accuracy must be positive, got {c}"));
            }
            CoarseAccuracy::SampleFraction(fr) if !(fr > 0.0 && fr <= 1.0) => {
                return fail(format!("coarse sample fraction must lie in (0,1], got {fr}"));
            }
            _ => {}
        }
        match &self.variant {
            HessianVariant::FixedFraction { p } if !(*p > 0.0 && *p < 1.0) => {
                return fail(format!("fixed fraction p must lie in (0,1), got {p}"));
            }
            HessianVariant::StepProportional { chi: Some(chi) } if !(*chi > 0.0) => {
                return fail(format!("chi must be positive, got {chi}"));
            }
            HessianVariant::ConstantAccuracy { c: Some(c) } if !(*c > 0.0) => {
                return fail(format!("constant accuracy must be positive, got {c}"));
            }
            HessianVariant::DynamicSafeguarded { rho: Some(rho) } if !(*rho > 0.0) => {
                return fail(format!("safeguard proxy rho must be positive, got {rho}"));
            }
            _ => {}
        }
        Ok(())
    }
}

/// How an iteration ended.
///
/// The serialized names index the two rejection gates by their position in
/// the update loop: the step-length/accuracy gate runs fourth (after the
/// termination test, the operator build, and the model minimization) and
/// the ρ acceptance test fifth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    VerySuccessful,
    Successful,
    /// Rejected by the acceptance ratio; σ inflated, sample reused.
    UnsuccessfulStep5,
    /// Rejected by the accuracy gate; accuracy tightened, σ and x unchanged.
    UnsuccessfulStep4,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::VerySuccessful => "very_successful",
            Outcome::Successful => "successful",
            Outcome::UnsuccessfulStep5 => "unsuccessful_step5",
            Outcome::UnsuccessfulStep4 => "unsuccessful_step4",
        }
    }

    pub fn is_successful(self) -> bool {
        matches!(self, Outcome::VerySuccessful | Outcome::Successful)
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "very_successful" => Ok(Outcome::VerySuccessful),
            "successful" => Ok(Outcome::Successful),
            "unsuccessful_step5" => Ok(Outcome::UnsuccessfulStep5),
            "unsuccessful_step4" => Ok(Outcome::UnsuccessfulStep4),
            other => Err(format!("unknown outcome {other:?}")),
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    ConvergedFirstOrder,
    ConvergedFStagnation,
    IterBudget,
    InnerFailure,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::ConvergedFirstOrder => "converged_first_order",
            RunStatus::ConvergedFStagnation => "converged_f_stagnation",
            RunStatus::IterBudget => "iter_budget",
            RunStatus::InnerFailure => "inner_failure",
        }
    }
}

impl std::str::FromStr for RunStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "converged_first_order" => Ok(RunStatus::ConvergedFirstOrder),
            "converged_f_stagnation" => Ok(RunStatus::ConvergedFStagnation),
            "iter_budget" => Ok(RunStatus::IterBudget),
            "inner_failure" => Ok(RunStatus::InnerFailure),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

/// One row of a run trace. All quantities describe the iterate the model
/// was built at: `sigma` and `c_k` are the values in force, `cum_ege` the
/// cumulative cost in gradient-equivalents after the iteration's charges.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: u64,
    pub outcome: Outcome,
    pub sigma: f64,
    /// Accuracy request sizing this iteration's sample; absent for the
    /// variants that bypass accuracy (full, fixed-fraction, and the
    /// step-proportional variant's bootstrap iteration).
    pub c_k: Option<f64>,
    pub sample_size: usize,
    pub step_norm: f64,
    pub grad_norm: f64,
    pub f_value: f64,
    /// Acceptance ratio; absent on accuracy-gate rejections and degenerate
    /// denominators.
    pub rho: Option<f64>,
    pub cum_ege: f64,
}

/// Side-channel bookkeeping per record, kept out of the serialized trace:
/// the flag state, the Hessian-vector products charged, the running integer
/// cost, and the iterate itself (for post-hoc evaluations such as test
/// loss).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationAudit {
    /// Accuracy-gate flag in force at entry; `None` for variants without
    /// the gate.
    pub flag_in_force: Option<bool>,
    pub b_products: u64,
    pub cum_units: u64,
    pub x: Point,
}

/// A completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
    pub audit: Vec<IterationAudit>,
    pub status: RunStatus,
    pub x_final: Point,
    pub f_final: f64,
    pub grad_norm_final: f64,
    pub units_total: u64,
    pub ege_total: f64,
    pub n_components: usize,
}

/// Acceptance ratio `(f(x) − f(x+s)) / t2_decrease`; `None` flags a
/// denominator at or below the degeneracy guard.
pub fn compute_rho(f_x: f64, f_trial: f64, t2_decrease: f64) -> Option<f64> {
    if !(t2_decrease > RHO_GUARD) {
        return None;
    }
    Some((f_x - f_trial) / t2_decrease)
}

/// Regularization-weight update from the acceptance ratio.
pub fn update_sigma(sigma: f64, rho: f64, cfg: &ArcConfig) -> f64 {
    if rho >= cfg.eta2 {
        (cfg.gamma1 * sigma).max(cfg.sigma_min)
    } else if rho >= cfg.eta1 {
        sigma
    } else {
        cfg.gamma2 * sigma
    }
}

/// Accuracy request and flag for the iteration after an accepted step of
/// length `step_norm`, for the dynamic variants: long steps restore the
/// coarse constant, short steps request `α(1−θ)·‖∇f(x_{k+1})‖`.
pub fn accuracy_for_next(
    coarse_c: f64,
    alpha: f64,
    theta: f64,
    step_norm: f64,
    grad_norm_next: f64,
) -> (f64, bool) {
    if step_norm >= 1.0 {
        (coarse_c, true)
    } else {
        (
            (alpha * (1.0 - theta) * grad_norm_next).max(ACCURACY_FLOOR),
            false,
        )
    }
}

/// The accuracy gate: reject iff the step is short, the coarse accuracy is
/// still in force, and it exceeds what the short step would have required.
pub fn step4_check(
    flag: bool,
    c_in_force: f64,
    step_norm: f64,
    grad_norm: f64,
    alpha: f64,
    theta: f64,
) -> bool {
    flag && step_norm < 1.0 && c_in_force > alpha * (1.0 - theta) * grad_norm
}

/// First-order run: stops on `‖∇f‖ ≤ ε`, objective stagnation, or the
/// iteration budget.
pub fn run(
    problem: &FiniteSumProblem,
    cfg: &ArcConfig,
    seed: u64,
) -> Result<Trace, DriverError> {
    drive(problem, cfg, seed, None)
}

/// Second-order run: additionally estimates the smallest eigenvalue of each
/// `B_k`, stops only when it clears `−ε_H`, and takes negative-curvature
/// steps when they give the lower model value. `eps_h = None` uses `ε^{2/3}`.
pub fn run_so(
    problem: &FiniteSumProblem,
    cfg: &ArcConfig,
    eps_h: Option<f64>,
    seed: u64,
) -> Result<Trace, DriverError> {
    let eps_h = eps_h.unwrap_or_else(|| cfg.eps.powf(2.0 / 3.0));
    if !(eps_h > 0.0) {
        return Err(DriverError::Config(format!(
            "second-order tolerance must be positive, got {eps_h}"
        )));
    }
    drive(problem, cfg, seed, Some(eps_h))
}

/// The sample binding in force: the drawn index set plus, in second-order
/// mode, the eigenpair estimate for the operator it induces. Reused verbatim
/// across acceptance-gate rejections (nothing it depends on moves).
struct Binding {
    sample: SampleSet,
    eig: Option<EigEstimate>,
}

struct Driver<'a> {
    problem: &'a FiniteSumProblem,
    cfg: &'a ArcConfig,
    eps_h: Option<f64>,
    n: usize,
    d: usize,
    ledger: CostLedger,
    rng_sample: ChaCha8Rng,
    rng_eig: ChaCha8Rng,
    x: Point,
    f: f64,
    g: Point,
    sigma: f64,
    /// Accuracy request in force (dynamic, safeguarded, constant, and
    /// step-proportional variants).
    c_k: Option<f64>,
    /// Accuracy-gate flag; `Some` only for the dynamic variants.
    flag: Option<bool>,
    /// Resolved coarse constant (dynamic variants).
    coarse_c: Option<f64>,
    /// Resolved proxy curvature (safeguarded variant).
    rho_proxy: Option<f64>,
    /// Resolved step-proportional coefficient.
    chi: Option<f64>,
    last_step_norm: Option<f64>,
    binding: Option<Binding>,
    stagnated: bool,
    records: Vec<IterationRecord>,
    audit: Vec<IterationAudit>,
}

impl<'a> Driver<'a> {
    fn new(
        problem: &'a FiniteSumProblem,
        cfg: &'a ArcConfig,
        seed: u64,
        eps_h: Option<f64>,
    ) -> Result<Self, DriverError> {
        cfg.validate()?;
        let n = problem.n_components();
        let d = problem.dim();
        let x = match &cfg.start {
            StartPoint::Zero => Point::zeros(d),
            StartPoint::At(p) => {
                if p.len() != d {
                    return Err(DriverError::StartDimension { got: p.len(), want: d });
                }
                p.clone()
            }
        };
        let mut rng_sample = ChaCha8Rng::seed_from_u64(seed);
        rng_sample.set_stream(0);
        let mut rng_eig = ChaCha8Rng::seed_from_u64(seed);
        rng_eig.set_stream(1);

        let mut ledger = CostLedger::new();
        let f = problem.eval_f(&x, &mut ledger)?;
        let g = problem.eval_grad(&x, &mut ledger)?;

        // Resolve variant parameters at the start point.
        let mut coarse_c = None;
        let mut rho_proxy = None;
        let mut chi = None;
        let mut c_k = None;
        let mut flag = None;
        match &cfg.variant {
            HessianVariant::Dynamic => {
                let c = match cfg.coarse {
                    CoarseAccuracy::Fixed(c) => c,
                    CoarseAccuracy::SampleFraction(frac) => {
                        let kappa = problem.curvature_bound(&x)?;
                        sampling::calibrate_c(frac, kappa, d, n, cfg.delta_bar)?
                    }
                };
                coarse_c = Some(c);
                c_k = Some(c);
                flag = Some(true);
            }
            HessianVariant::DynamicSafeguarded { rho } => {
                let c_star = (cfg.alpha * (1.0 - cfg.theta) * cfg.eps.powf(2.0 / 3.0))
                    .max(ACCURACY_FLOOR);
                let r = match rho {
                    Some(r) => *r,
                    None => sampling::calibrate_rho(0.1, c_star, d, n, cfg.delta_bar)?,
                };
                let c = sampling::calibrate_c(0.05, r, d, n, cfg.delta_bar)?;
                rho_proxy = Some(r);
                coarse_c = Some(c);
                c_k = Some(c);
                flag = Some(true);
            }
            HessianVariant::ConstantAccuracy { c } => {
                c_k = Some(c.unwrap_or(cfg.eps));
            }
            HessianVariant::StepProportional { chi: given } => {
                chi = *given;
            }
            HessianVariant::Full | HessianVariant::FixedFraction { .. } => {}
        }

        Ok(Self {
            problem,
            cfg,
            eps_h,
            n,
            d,
            ledger,
            rng_sample,
            rng_eig,
            x,
            f,
            g,
            sigma: cfg.sigma0,
            c_k,
            flag,
            coarse_c,
            rho_proxy,
            chi,
            last_step_norm: None,
            binding: None,
            stagnated: false,
            records: Vec::new(),
            audit: Vec::new(),
        })
    }

    /// Draws the sample for the current iterate per the variant policy and,
    /// in second-order mode, attaches the eigenpair estimate. Sets `c_k` for
    /// the step-proportional variant (it depends on the last accepted step).
    fn build_binding(&mut self) -> Result<(), DriverError> {
        let cfg = self.cfg;
        let size = match &cfg.variant {
            HessianVariant::Full => self.n,
            HessianVariant::FixedFraction { p } => {
                ((p * self.n as f64).ceil() as usize).clamp(1, self.n)
            }
            HessianVariant::Dynamic | HessianVariant::ConstantAccuracy { .. } => {
                let kappa = self.problem.curvature_bound(&self.x)?;
                let spec = AccuracySpec {
                    c: self.c_k.expect("accuracy state set for this variant"),
                    delta_bar: cfg.delta_bar,
                };
                sampling::sample_size(spec, kappa, self.d, self.n)?.size
            }
            HessianVariant::DynamicSafeguarded { .. } => {
                let spec = AccuracySpec {
                    c: self.c_k.expect("accuracy state set for this variant"),
                    delta_bar: cfg.delta_bar,
                };
                let rho = self.rho_proxy.expect("proxy resolved at start");
                sampling::safeguarded_size(spec, rho, self.d, self.n)?.size
            }
            HessianVariant::StepProportional { .. } => match self.last_step_norm {
                None => {
                    // Bootstrap draw before any step exists.
                    self.c_k = None;
                    ((0.1 * self.n as f64).ceil() as usize).clamp(1, self.n)
                }
                Some(s_norm) => {
                    let chi = match self.chi {
                        Some(v) => v,
                        None => {
                            let kappa = self.problem.curvature_bound(&self.x)?;
                            let c_target =
                                sampling::calibrate_c(0.1, kappa, self.d, self.n, cfg.delta_bar)?;
                            let v = c_target / s_norm;
                            self.chi = Some(v);
                            v
                        }
                    };
                    let c = (chi * s_norm).max(ACCURACY_FLOOR);
                    self.c_k = Some(c);
                    let kappa = self.problem.curvature_bound(&self.x)?;
                    let spec = AccuracySpec { c, delta_bar: cfg.delta_bar };
                    sampling::sample_size(spec, kappa, self.d, self.n)?.size
                }
            },
        };
        let sample = if size == self.n {
            SampleSet::full(self.n)
        } else {
            sampling::draw(size, self.n, &mut self.rng_sample)?
        };

        let eig = if self.eps_h.is_some() {
            let op = SubsampledHessian::new(self.problem, self.x.clone(), sample.clone())?;
            // Certification cost is tracked on the estimate itself, not the
            // run ledger; see the module docs.
            let mut side_ledger = CostLedger::new();
            match eigen::estimate_min_eig(
                &op,
                &self.g,
                cfg.eig_budget,
                cfg.eig_tol,
                &mut self.rng_eig,
                &mut side_ledger,
            ) {
                Ok(est) => Some(est),
                Err(_) => None,
            }
        } else {
            None
        };
        self.binding = Some(Binding { sample, eig });
        Ok(())
    }

    fn push_record(
        &mut self,
        outcome: Outcome,
        sigma: f64,
        c_k: Option<f64>,
        sample_size: usize,
        step_norm: f64,
        grad_norm: f64,
        f_value: f64,
        rho: Option<f64>,
        flag_in_force: Option<bool>,
        b_products: u64,
        x_at: Point,
    ) {
        self.records.push(IterationRecord {
            k: self.records.len() as u64,
            outcome,
            sigma,
            c_k,
            sample_size,
            step_norm,
            grad_norm,
            f_value,
            rho,
            cum_ege: self.ledger.ege(self.n),
        });
        self.audit.push(IterationAudit {
            flag_in_force,
            b_products,
            cum_units: self.ledger.units(),
            x: x_at,
        });
    }

    fn finish(self, status: RunStatus) -> Trace {
        Trace {
            records: self.records,
            audit: self.audit,
            status,
            f_final: self.f,
            grad_norm_final: self.g.norm(),
            ege_total: self.ledger.ege(self.n),
            units_total: self.ledger.units(),
            n_components: self.n,
            x_final: self.x,
        }
    }
}

fn drive(
    problem: &FiniteSumProblem,
    cfg: &ArcConfig,
    seed: u64,
    eps_h: Option<f64>,
) -> Result<Trace, DriverError> {
    let mut dr = Driver::new(problem, cfg, seed, eps_h)?;
    let criterion = InnerCriterion::new(cfg.inner_stop, cfg.theta)
        .map_err(|e| DriverError::Config(e.to_string()))?;

    let status = 'outer: loop {
        let gnorm = dr.g.norm();
        if !(gnorm.is_finite() && dr.f.is_finite()) {
            break RunStatus::InnerFailure;
        }

        // Termination tests. First-order mode checks the gradient before
        // building anything; second-order mode needs the eigenpair of the
        // current operator first.
        match dr.eps_h {
            None => {
                if gnorm <= cfg.eps {
                    break RunStatus::ConvergedFirstOrder;
                }
                if dr.stagnated {
                    break RunStatus::ConvergedFStagnation;
                }
                if dr.records.len() as u64 >= cfg.max_iters {
                    break RunStatus::IterBudget;
                }
                if dr.binding.is_none() {
                    dr.build_binding()?;
                }
            }
            Some(eps_h) => {
                if dr.binding.is_none() {
                    dr.build_binding()?;
                }
                let lambda = dr
                    .binding
                    .as_ref()
                    .and_then(|b| b.eig.as_ref())
                    .map(|e| e.lambda_min);
                match lambda {
                    Some(lam) if eigen::so_terminate(gnorm, lam, cfg.eps, eps_h) => {
                        break RunStatus::ConvergedFirstOrder;
                    }
                    None => break RunStatus::InnerFailure,
                    _ => {}
                }
                if dr.stagnated {
                    break RunStatus::ConvergedFStagnation;
                }
                if dr.records.len() as u64 >= cfg.max_iters {
                    break RunStatus::IterBudget;
                }
            }
        }

        // Model minimization: the subsolver candidate, and in second-order
        // mode also the negative-curvature candidate when one exists. The
        // accepted candidate is whichever gives the lower model value.
        let (sample_size, eig_candidate) = {
            let binding = dr.binding.as_ref().expect("binding built above");
            let cand = binding.eig.as_ref().and_then(|est| {
                if est.lambda_min < 0.0 {
                    eigen::eig_step(&dr.g, &est.u, &est.bu, dr.sigma)
                } else {
                    None
                }
            });
            (binding.sample.len(), cand)
        };
        let mut b_products: u64 = 0;
        let sub_candidate = if gnorm > 0.0 {
            let sample = dr.binding.as_ref().expect("binding built").sample.clone();
            let op = SubsampledHessian::new(dr.problem, dr.x.clone(), sample)?;
            let model = match CubicModel::new(dr.f, dr.g.clone(), dr.sigma, &op) {
                Ok(m) => m,
                Err(_) => break RunStatus::InnerFailure,
            };
            match model.solve_subproblem(criterion, cfg.inner_budget, &mut dr.ledger) {
                Ok(rep) => {
                    b_products = rep.iterations;
                    Some((rep.step, rep.model_decrease))
                }
                Err(_) => break RunStatus::InnerFailure,
            }
        } else {
            None
        };
        let (s, model_decrease) = match (sub_candidate, eig_candidate) {
            (Some((ss, sd)), Some((es, ed))) => {
                if ed > sd {
                    (es, ed)
                } else {
                    (ss, sd)
                }
            }
            (Some(c), None) => c,
            (None, Some(c)) => c,
            (None, None) => break RunStatus::InnerFailure,
        };
        let step_norm = s.norm();
        let sigma_in_force = dr.sigma;
        let c_in_force = dr.c_k;
        let flag_in_force = dr.flag;

        // Accuracy gate (dynamic variants only): reject, tighten, redraw.
        if let (Some(true), Some(c)) = (flag_in_force, c_in_force) {
            if step4_check(true, c, step_norm, gnorm, cfg.alpha, cfg.theta) {
                dr.push_record(
                    Outcome::UnsuccessfulStep4,
                    sigma_in_force,
                    c_in_force,
                    sample_size,
                    step_norm,
                    gnorm,
                    dr.f,
                    None,
                    flag_in_force,
                    b_products,
                    dr.x.clone(),
                );
                dr.c_k =
                    Some((cfg.alpha * (1.0 - cfg.theta) * gnorm).max(ACCURACY_FLOOR));
                dr.flag = Some(false);
                dr.binding = None;
                continue 'outer;
            }
        }

        // Acceptance gate.
        let trial = &dr.x + &s;
        let f_trial = dr.problem.eval_f(&trial, &mut dr.ledger)?;
        let t2_decrease = model_decrease + dr.sigma / 3.0 * step_norm.powi(3);
        let rho = compute_rho(dr.f, f_trial, t2_decrease);
        let accepted = f_trial.is_finite() && rho.map_or(false, |r| r >= cfg.eta1);

        if !accepted {
            dr.push_record(
                Outcome::UnsuccessfulStep5,
                sigma_in_force,
                c_in_force,
                sample_size,
                step_norm,
                gnorm,
                dr.f,
                rho,
                flag_in_force,
                b_products,
                dr.x.clone(),
            );
            // Inflate σ; keep accuracy, flag, and the operator binding.
            dr.sigma *= cfg.gamma2;
            continue 'outer;
        }
        let rho_val = rho.expect("accepted implies a finite ratio");

        let outcome = if rho_val >= cfg.eta2 {
            Outcome::VerySuccessful
        } else {
            Outcome::Successful
        };
        let x_old = std::mem::replace(&mut dr.x, trial);
        let f_old = dr.f;
        dr.f = f_trial;
        dr.g = dr.problem.eval_grad(&dr.x, &mut dr.ledger)?;
        let grad_norm_next = dr.g.norm();
        dr.stagnated = (f_old - dr.f).abs() <= cfg.f_rel_stop * dr.f.abs();
        dr.sigma = update_sigma(dr.sigma, rho_val, cfg);
        dr.last_step_norm = Some(step_norm);
        match &cfg.variant {
            HessianVariant::Dynamic | HessianVariant::DynamicSafeguarded { .. } => {
                let coarse = dr.coarse_c.expect("resolved at start");
                let (c_next, flag_next) = accuracy_for_next(
                    coarse,
                    cfg.alpha,
                    cfg.theta,
                    step_norm,
                    grad_norm_next,
                );
                dr.c_k = Some(c_next);
                dr.flag = Some(flag_next);
            }
            _ => {}
        }
        dr.binding = None;
        dr.push_record(
            outcome,
            sigma_in_force,
            c_in_force,
            sample_size,
            step_norm,
            gnorm,
            f_old,
            Some(rho_val),
            flag_in_force,
            b_products,
            x_old,
        );
    };

    Ok(dr.finish(status))
}
