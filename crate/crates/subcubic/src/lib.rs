//! Adaptive cubic regularization (ARC) for finite-sum minimization, with the
//! Hessian replaced by a uniformly subsampled approximation whose accuracy is
//! chosen dynamically from the progress of the run.
//!
//! The crate is organised around one driver and a handful of building blocks:
//!
//! * [`objective`] — the sigmoid least-squares finite-sum objective, its
//!   component derivatives, and the evaluation-cost ledger.
//! * [`cubic`] — the cubic model, the Cauchy point, and a Barzilai–Borwein
//!   subproblem solver with a nonmonotone linesearch.
//! * [`sampling`] — sample-size rules derived from matrix concentration, the
//!   safeguarded variant, and without-replacement index draws.
//! * [`driver`] — the outer ARC iteration with adaptive accuracy, acceptance
//!   tests, and per-iteration trace records.
//! * [`eigen`] — Lanczos estimation of the leftmost Hessian eigenvalue and the
//!   negative-curvature step used by the second-order driver.
//! * [`data`] — LIBSVM/CSV readers, min-max scaling, and a synthetic binary
//!   classification generator with a planted feature spectrum.
//! * [`metrics`] — classification rate, testing loss, cost savings, and
//!   performance profiles.
//!
//! Runs are deterministic: the same problem, configuration, and seed produce
//! the same trace, bit for bit, independent of how many runs execute in
//! parallel.
//!
//! # Example
//!
//! ```
//! use subcubic::data::gen_synthetic;
//! use subcubic::driver::{run, ArcConfig};
//!
//! let split = gen_synthetic(200, 50, 5, 1e2, 7).unwrap();
//! let trace = run(&split.train, &ArcConfig::default(), 0).unwrap();
//! assert!(trace.records.len() <= 500);
//! ```

pub mod cubic;
pub mod data;
pub mod driver;
pub mod eigen;
pub mod metrics;
pub mod objective;
pub mod sampling;

#[cfg(feature = "test-support")]
pub mod oracle;

pub use objective::{CostLedger, FiniteSumProblem, Point, SampleSet};
