//! Sigmoid least-squares objective over a finite sum of components.
//!
//! For labelled rows `(a_i, y_i)` with `y_i ∈ {0, 1}` the objective is
//!
//! ```text
//! f(x) = (1/N) Σ_i (y_i − s(aᵢᵀx))²,        s(z) = 1/(1 + e^(−z)),
//! ```
//!
//! a smooth, bounded, generally nonconvex loss for binary classification.
//! Each component contributes a rank-one Hessian `c₂(aᵢᵀx, yᵢ)·aᵢaᵢᵀ`, so
//! Hessian-vector products restricted to an index subset are cheap and the
//! spectral norm of every component Hessian is available in closed form.
//!
//! Evaluation costs are tracked in [`CostLedger`] as integer component-unit
//! counts: a full function or gradient pass costs `N` units, a Hessian-vector
//! product over a subset `D` costs `|D|` units. The derived unit-free measure
//! `EGE = units / N` (effective gradient evaluations) is what benchmark
//! comparisons report. Computing the component curvature bound at a point
//! where the margins `aᵢᵀx` are already known adds nothing.

use std::sync::Mutex;

#[cfg(feature = "test-support")]
use nalgebra::DMatrix;
use nalgebra::DVector;
use thiserror::Error;

/// A point in the optimization domain.
pub type Point = DVector<f64>;

/// Errors raised by objective evaluations and problem construction.
#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("problem must contain at least one component")]
    Empty,
    #[error("row {row} has dimension {got}, expected {expected}")]
    RowDimension {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("label for row {row} is {value}, expected 0 or 1")]
    BadLabel { row: usize, value: f64 },
    #[error("row {row} contains a non-finite feature value")]
    NonFiniteFeature { row: usize },
    #[error("point has dimension {got}, expected {expected}")]
    PointDimension { got: usize, expected: usize },
    #[error("sample set is empty")]
    EmptySample,
    #[error("sample index {index} out of range for {n} components")]
    SampleOutOfRange { index: usize, n: usize },
}

/// Numerically stable logistic function.
///
/// Evaluates through `e^{−|z|}` only, so it never overflows and keeps full
/// relative accuracy on both tails.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// First-derivative coefficient of one component: `φ'(t) = c₁(t, y)` with
/// `φ(t) = (y − s(t))²`, expressed in terms of `s = s(t)` for stability.
fn grad_coeff(s: f64, y: f64) -> f64 {
    -2.0 * s * (1.0 - s) * (y - s)
}

/// Second-derivative coefficient of one component, `φ''(t)`, again in terms
/// of `s = s(t)`. Negative exactly where the component is confidently
/// misclassified, which is what makes the finite sum nonconvex.
fn hess_coeff(s: f64, y: f64) -> f64 {
    -2.0 * s * (1.0 - s) * (y * (1.0 - 2.0 * s) + 3.0 * s * s - 2.0 * s)
}

/// Integer ledger of component evaluations.
///
/// The counter is exact: every charge adds a whole number of component units,
/// and [`CostLedger::ege`] divides by the component count only on read-out.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct CostLedger {
    component_units: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `units` component evaluations.
    pub fn charge(&mut self, units: usize) {
        self.component_units += units as u64;
    }

    /// Total component units charged so far.
    pub fn units(&self) -> u64 {
        self.component_units
    }

    /// Effective gradient evaluations: units divided by the component count.
    pub fn ege(&self, n_components: usize) -> f64 {
        self.component_units as f64 / n_components as f64
    }
}

/// A set of distinct component indices, kept sorted for deterministic
/// iteration and bit-reproducible averages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    indices: Vec<usize>,
}

impl SampleSet {
    /// Builds a sample from indices that must be strictly increasing.
    pub fn from_sorted(indices: Vec<usize>) -> Result<Self, ObjectiveError> {
        if indices.is_empty() {
            return Err(ObjectiveError::EmptySample);
        }
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Ok(Self { indices })
    }

    /// The full index set `{0, …, n−1}`.
    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn is_full(&self, n: usize) -> bool {
        self.indices.len() == n
    }
}

struct MarginCache {
    x: Point,
    margins: Vec<f64>,
}

/// A finite-sum sigmoid least-squares problem: rows, binary labels, and the
/// margin cache that lets gradient and curvature reuse `aᵢᵀx` computed by the
/// latest function evaluation at the same point.
pub struct FiniteSumProblem {
    rows: Vec<DVector<f64>>,
    labels: Vec<f64>,
    dim: usize,
    row_sq_norms: Vec<f64>,
    margin_cache: Mutex<Option<MarginCache>>,
}

impl std::fmt::Debug for FiniteSumProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiniteSumProblem")
            .field("n_components", &self.rows.len())
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl Clone for FiniteSumProblem {
    /// Clones the data; the margin cache starts empty (it is a pure
    /// optimization and refills on first use).
    fn clone(&self) -> Self {
        Self {
            rows: self.rows.clone(),
            labels: self.labels.clone(),
            dim: self.dim,
            row_sq_norms: self.row_sq_norms.clone(),
            margin_cache: Mutex::new(None),
        }
    }
}

impl FiniteSumProblem {
    /// Builds a problem from dense rows and labels in `{0, 1}`.
    pub fn new(rows: Vec<DVector<f64>>, labels: Vec<f64>) -> Result<Self, ObjectiveError> {
        if rows.is_empty() || rows.len() != labels.len() {
            return Err(ObjectiveError::Empty);
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(ObjectiveError::Empty);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(ObjectiveError::RowDimension {
                    row: i,
                    got: row.len(),
                    expected: dim,
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ObjectiveError::NonFiniteFeature { row: i });
            }
        }
        for (i, &y) in labels.iter().enumerate() {
            if y != 0.0 && y != 1.0 {
                return Err(ObjectiveError::BadLabel { row: i, value: y });
            }
        }
        let row_sq_norms = rows.iter().map(|r| r.norm_squared()).collect();
        Ok(Self {
            rows,
            labels,
            dim,
            row_sq_norms,
            margin_cache: Mutex::new(None),
        })
    }

    pub fn n_components(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[DVector<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn check_point(&self, x: &Point) -> Result<(), ObjectiveError> {
        if x.len() != self.dim {
            return Err(ObjectiveError::PointDimension {
                got: x.len(),
                expected: self.dim,
            });
        }
        Ok(())
    }

    fn check_sample(&self, d: &SampleSet) -> Result<(), ObjectiveError> {
        if d.is_empty() {
            return Err(ObjectiveError::EmptySample);
        }
        if let Some(&i) = d.indices().iter().find(|&&i| i >= self.rows.len()) {
            return Err(ObjectiveError::SampleOutOfRange {
                index: i,
                n: self.rows.len(),
            });
        }
        Ok(())
    }

    fn compute_margins(&self, x: &Point) -> Vec<f64> {
        self.rows.iter().map(|row| row.dot(x)).collect()
    }

    /// Runs `body` on the margins `aᵢᵀx`, reusing the cached pass when the
    /// cache holds exactly this point and refreshing it otherwise.
    fn with_margins<R>(&self, x: &Point, body: impl FnOnce(&[f64]) -> R) -> R {
        let mut guard = self.margin_cache.lock().unwrap();
        let hit = matches!(&*guard, Some(c) if c.x == *x);
        if !hit {
            *guard = Some(MarginCache {
                x: x.clone(),
                margins: self.compute_margins(x),
            });
        }
        body(&guard.as_ref().unwrap().margins)
    }

    /// Loss value without touching any ledger; shared by [`Self::eval_f`] and
    /// the test-set metrics.
    pub fn loss(&self, x: &Point) -> Result<f64, ObjectiveError> {
        self.check_point(x)?;
        Ok(self.with_margins(x, |margins| {
            let mut acc = 0.0;
            for (i, &t) in margins.iter().enumerate() {
                let r = self.labels[i] - sigmoid(t);
                acc += r * r;
            }
            acc / self.rows.len() as f64
        }))
    }

    /// Objective value; charges one full pass (`N` units).
    pub fn eval_f(&self, x: &Point, ledger: &mut CostLedger) -> Result<f64, ObjectiveError> {
        let v = self.loss(x)?;
        ledger.charge(self.rows.len());
        Ok(v)
    }

    /// Exact gradient `(1/N) Σ c₁(aᵢᵀx, yᵢ)·aᵢ`; charges one full pass.
    pub fn eval_grad(&self, x: &Point, ledger: &mut CostLedger) -> Result<Point, ObjectiveError> {
        self.check_point(x)?;
        ledger.charge(self.rows.len());
        Ok(self.with_margins(x, |margins| {
            let mut g = DVector::zeros(self.dim);
            for (i, &t) in margins.iter().enumerate() {
                let c = grad_coeff(sigmoid(t), self.labels[i]);
                g.axpy(c, &self.rows[i], 1.0);
            }
            g /= self.rows.len() as f64;
            g
        }))
    }

    /// Subsampled Hessian-vector product
    /// `B v = (1/|D|) Σ_{i∈D} c₂(aᵢᵀx, yᵢ)·(aᵢᵀv)·aᵢ`; charges `|D|` units.
    pub fn hvp(
        &self,
        x: &Point,
        v: &Point,
        d: &SampleSet,
        ledger: &mut CostLedger,
    ) -> Result<Point, ObjectiveError> {
        self.check_point(x)?;
        self.check_point(v)?;
        self.check_sample(d)?;
        ledger.charge(d.len());
        let guard = self.margin_cache.lock().unwrap();
        let cached = guard.as_ref().filter(|c| c.x == *x).map(|c| &c.margins);
        let mut out = DVector::zeros(self.dim);
        for &i in d.indices() {
            let t = match cached {
                Some(m) => m[i],
                None => self.rows[i].dot(x),
            };
            let c = hess_coeff(sigmoid(t), self.labels[i]);
            out.axpy(c * self.rows[i].dot(v), &self.rows[i], 1.0);
        }
        out /= d.len() as f64;
        Ok(out)
    }

    /// Upper bound on the spectral norm of every component Hessian at `x`:
    /// `max_i |c₂(aᵢᵀx, yᵢ)|·‖aᵢ‖²`. Free of charge — the margins are reused
    /// from the cache whenever `x` is the point of the latest full pass, and
    /// `‖aᵢ‖²` is precomputed once per problem.
    pub fn curvature_bound(&self, x: &Point) -> Result<f64, ObjectiveError> {
        self.check_point(x)?;
        Ok(self.with_margins(x, |margins| {
            margins
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    hess_coeff(sigmoid(t), self.labels[i]).abs() * self.row_sq_norms[i]
                })
                .fold(0.0, f64::max)
        }))
    }

    /// Dense subsampled Hessian `(1/|D|) Σ_{i∈D} c₂·aᵢaᵢᵀ`.
    ///
    /// Reference-only: used to validate operators and concentration bounds.
    /// Never charges a ledger and is not part of the solver path.
    #[cfg(feature = "test-support")]
    pub fn assemble_hessian(&self, x: &Point, d: &SampleSet) -> Result<DMatrix<f64>, ObjectiveError> {
        self.check_point(x)?;
        self.check_sample(d)?;
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for &i in d.indices() {
            let t = self.rows[i].dot(x);
            let c = hess_coeff(sigmoid(t), self.labels[i]);
            h.syger(c, &self.rows[i], &self.rows[i], 1.0);
        }
        h /= d.len() as f64;
        // syger fills the lower triangle; mirror it.
        for r in 0..self.dim {
            for c in (r + 1)..self.dim {
                h[(r, c)] = h[(c, r)];
            }
        }
        Ok(h)
    }
}

/// A symmetric linear operator given by Hessian-vector products, charging the
/// caller's ledger on every application.
pub trait HessianOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &Point, ledger: &mut CostLedger) -> Point;
}

/// The subsampled Hessian of a [`FiniteSumProblem`] bound to one point and
/// one index sample.
pub struct SubsampledHessian<'a> {
    problem: &'a FiniteSumProblem,
    x: Point,
    sample: SampleSet,
}

impl<'a> SubsampledHessian<'a> {
    pub fn new(
        problem: &'a FiniteSumProblem,
        x: Point,
        sample: SampleSet,
    ) -> Result<Self, ObjectiveError> {
        problem.check_point(&x)?;
        problem.check_sample(&sample)?;
        Ok(Self { problem, x, sample })
    }

    pub fn sample(&self) -> &SampleSet {
        &self.sample
    }
}

impl HessianOperator for SubsampledHessian<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn apply(&self, v: &Point, ledger: &mut CostLedger) -> Point {
        self.problem
            .hvp(&self.x, v, &self.sample, ledger)
            .expect("operator validated at construction")
    }
}
