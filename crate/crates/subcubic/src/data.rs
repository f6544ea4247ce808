//! Dataset ingestion, scaling, and synthetic generation.
//!
//! Two text formats are read: the sparse `label idx:val idx:val …` format
//! (1-based, strictly increasing indices; labels `{0,1}` or `{−1,+1}` with
//! `−1` mapped to `0`) and CSV with a header naming one column `label`.
//!
//! Feature scaling follows the benchmark protocol for these losses: each
//! column is min-max scaled over the *combined* train and test rows, so the
//! test extrema participate. That leakage is part of the protocol being
//! reproduced; [`ScalePolicy::TrainOnly`] is the conservative alternative.
//!
//! [`gen_synthetic`] manufactures binary-classification problems with a
//! controlled feature-covariance spectrum: eigenvalues log-uniform over
//! `[1/cond_target, 1]`, an orthogonal basis from a QR factorization, and a
//! chain of Givens rotations that equalizes the covariance diagonal (the
//! classic trace-preserving construction for correlation matrices with
//! prescribed spectrum). Equal diagonals matter because min-max scaling
//! divides columns by their ranges; with unequal variances that division
//! would destroy the spectrum the dataset was built to have. Labels come
//! from a planted weight vector through the sigmoid with Bernoulli draws.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::objective::{sigmoid, FiniteSumProblem, ObjectiveError, Point};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: label {value:?} is not one of 0, 1, -1, +1")]
    BadLabel { line: usize, value: String },
    #[error("line {line}: malformed feature pair {token:?} (want index:value)")]
    BadPair { line: usize, token: String },
    #[error("line {line}: feature index 0 (indices are 1-based)")]
    ZeroIndex { line: usize },
    #[error("line {line}: feature indices must be strictly increasing")]
    NonMonotonicIndex { line: usize },
    #[error("line {line}: {token:?} is not a number")]
    BadNumber { line: usize, token: String },
    #[error("no data rows found")]
    Empty,
    #[error("csv header has no \"label\" column")]
    MissingLabelColumn,
    #[error("line {line}: expected {want} fields, found {got}")]
    RowWidth { line: usize, want: usize, got: usize },
    #[error("condition target must be >= 1, got {0}")]
    BadCondition(f64),
    #[error("row counts and dimension must be positive")]
    BadShape,
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// One sparse row: a `{0,1}` label and `(index, value)` pairs with 1-based
/// strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub label: f64,
    pub features: Vec<(usize, f64)>,
}

/// A parsed dataset before densification.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub rows: Vec<SparseRow>,
    pub d_declared: Option<usize>,
}

impl RawDataset {
    /// The inferred dimension: the declared one if any, else the largest
    /// index seen (zero if the dataset has no features at all).
    pub fn dim(&self) -> usize {
        let seen = self
            .rows
            .iter()
            .filter_map(|r| r.features.last().map(|&(i, _)| i))
            .max()
            .unwrap_or(0);
        self.d_declared.map_or(seen, |d| d.max(seen))
    }

    /// Densifies into feature vectors of dimension `d` plus labels.
    pub fn to_dense(&self, d: usize) -> (Vec<Point>, Vec<f64>) {
        let mut rows = Vec::with_capacity(self.rows.len());
        let mut labels = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let mut v = Point::zeros(d);
            for &(idx, val) in &r.features {
                v[idx - 1] = val;
            }
            rows.push(v);
            labels.push(r.label);
        }
        (rows, labels)
    }
}

fn parse_label(token: &str, line: usize) -> Result<f64, DataError> {
    match token {
        "0" => Ok(0.0),
        "1" | "+1" => Ok(1.0),
        "-1" => Ok(0.0),
        other => {
            // Accept float spellings of the same values.
            match other.parse::<f64>() {
                Ok(v) if v == 0.0 || v == 1.0 => Ok(v),
                Ok(v) if v == -1.0 => Ok(0.0),
                _ => Err(DataError::BadLabel {
                    line,
                    value: other.to_string(),
                }),
            }
        }
    }
}

/// Parses the sparse `label idx:val …` format. Blank lines are skipped;
/// error messages carry 1-based line numbers.
pub fn parse_libsvm(text: &str) -> Result<RawDataset, DataError> {
    let mut rows = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut tokens = trimmed.split_ascii_whitespace();
        let label = parse_label(tokens.next().expect("non-empty line"), line)?;
        let mut features: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| DataError::BadPair {
                line,
                token: tok.to_string(),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| DataError::BadNumber {
                line,
                token: idx_s.to_string(),
            })?;
            if idx == 0 {
                return Err(DataError::ZeroIndex { line });
            }
            let val: f64 = val_s.parse().map_err(|_| DataError::BadNumber {
                line,
                token: val_s.to_string(),
            })?;
            if let Some(&(prev, _)) = features.last() {
                if idx <= prev {
                    return Err(DataError::NonMonotonicIndex { line });
                }
            }
            features.push((idx, val));
        }
        rows.push(SparseRow { label, features });
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(RawDataset {
        rows,
        d_declared: None,
    })
}

/// Serializes dense rows in the sparse text format, printing values with 17
/// significant digits so that parsing recovers them bit-exactly. Exact
/// zeros are omitted.
pub fn write_libsvm(rows: &[Point], labels: &[f64]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for (row, &label) in rows.iter().zip(labels.iter()) {
        let _ = write!(out, "{}", label as i64);
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                let _ = write!(out, " {}:{:.16e}", j + 1, v);
            }
        }
        out.push('\n');
    }
    out
}

/// Parses CSV with a header; the column named `label` (any case) carries the
/// labels, every other column is a feature in file order.
pub fn parse_csv(text: &str) -> Result<RawDataset, DataError> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l,
            None => return Err(DataError::Empty),
        }
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let label_col = columns
        .iter()
        .position(|c| c.eq_ignore_ascii_case("label"))
        .ok_or(DataError::MissingLabelColumn)?;
    let want = columns.len();

    let mut rows = Vec::new();
    for (i, raw_line) in lines {
        let line = i + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != want {
            return Err(DataError::RowWidth {
                line,
                want,
                got: fields.len(),
            });
        }
        let label = parse_label(fields[label_col], line)?;
        let mut features = Vec::with_capacity(want - 1);
        let mut feat_idx = 0usize;
        for (col, field) in fields.iter().enumerate() {
            if col == label_col {
                continue;
            }
            feat_idx += 1;
            let val: f64 = field.parse().map_err(|_| DataError::BadNumber {
                line,
                token: field.to_string(),
            })?;
            if val != 0.0 {
                features.push((feat_idx, val));
            }
        }
        rows.push(SparseRow { label, features });
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(RawDataset {
        rows,
        d_declared: Some(want - 1),
    })
}

/// In-place per-column min-max scaling: `v ← (v − min)/(max − min)`.
/// Constant columns map to zero.
pub fn minmax_scale(rows: &mut [Point]) {
    if rows.is_empty() {
        return;
    }
    let d = rows[0].len();
    for j in 0..d {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in rows.iter() {
            lo = lo.min(r[j]);
            hi = hi.max(r[j]);
        }
        let range = hi - lo;
        for r in rows.iter_mut() {
            r[j] = if range > 0.0 { (r[j] - lo) / range } else { 0.0 };
        }
    }
}

/// Which rows supply the scaling extrema.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalePolicy {
    /// Combined train+test extrema (the protocol being reproduced).
    Joint,
    /// Train extrema applied to both splits (no test leakage).
    TrainOnly,
    /// No scaling.
    None,
}

/// A train/test pair over the same feature space.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: FiniteSumProblem,
    pub test: FiniteSumProblem,
}

/// Densifies two parsed datasets over their common dimension, applies the
/// scaling policy, and builds the problems.
pub fn assemble_split(
    train: &RawDataset,
    test: &RawDataset,
    policy: ScalePolicy,
) -> Result<SplitDataset, DataError> {
    let d = train.dim().max(test.dim());
    if d == 0 {
        return Err(DataError::BadShape);
    }
    let (mut train_rows, train_labels) = train.to_dense(d);
    let (mut test_rows, test_labels) = test.to_dense(d);
    match policy {
        ScalePolicy::Joint => {
            let n_train = train_rows.len();
            let mut all = train_rows;
            all.append(&mut test_rows);
            minmax_scale(&mut all);
            test_rows = all.split_off(n_train);
            train_rows = all;
        }
        ScalePolicy::TrainOnly => {
            // Compute extrema on train, apply to both: scale train in place,
            // then transform test with the same affine maps.
            let d_len = d;
            let mut lo = vec![f64::INFINITY; d_len];
            let mut hi = vec![f64::NEG_INFINITY; d_len];
            for r in &train_rows {
                for j in 0..d_len {
                    lo[j] = lo[j].min(r[j]);
                    hi[j] = hi[j].max(r[j]);
                }
            }
            for rows in [&mut train_rows, &mut test_rows] {
                for r in rows.iter_mut() {
                    for j in 0..d_len {
                        let range = hi[j] - lo[j];
                        r[j] = if range > 0.0 { (r[j] - lo[j]) / range } else { 0.0 };
                    }
                }
            }
        }
        ScalePolicy::None => {}
    }
    Ok(SplitDataset {
        train: FiniteSumProblem::new(train_rows, train_labels)?,
        test: FiniteSumProblem::new(test_rows, test_labels)?,
    })
}

/// Random orthogonal matrix: QR of a standard-normal matrix with the sign
/// ambiguity fixed by forcing a positive R diagonal.
fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Equalizes the diagonal of `sigma = w^T w` by trace-preserving Givens
/// rotations, mirroring each rotation onto the factor `w` (columns) so that
/// `w^T w` tracks `sigma` exactly. At most `d − 1` rotations are needed.
fn equalize_diagonal(sigma: &mut DMatrix<f64>, w: &mut DMatrix<f64>) {
    let d = sigma.nrows();
    let t = sigma.trace() / d as f64;
    for _ in 0..d.saturating_sub(1) {
        // Pick the most extreme pair; stop when the diagonal is flat.
        let mut i_min = 0;
        let mut i_max = 0;
        for k in 1..d {
            if sigma[(k, k)] < sigma[(i_min, i_min)] {
                i_min = k;
            }
            if sigma[(k, k)] > sigma[(i_max, i_max)] {
                i_max = k;
            }
        }
        let (si, sj) = (sigma[(i_min, i_min)], sigma[(i_max, i_max)]);
        if sj - si <= 1e-12 * t.abs().max(1.0) {
            break;
        }
        let (i, j) = (i_min, i_max);
        let sij = sigma[(i, j)];
        // Rotation angle making the new (i,i) entry equal to t: with
        // r = s/c, r²(sj − t) + 2r·sij + (si − t) = 0.
        let a = sj - t;
        let b = sij;
        let cq = si - t;
        let disc = (b * b - a * cq).sqrt();
        let r = if b >= 0.0 { (-b - disc) / a } else { (-b + disc) / a };
        let c = 1.0 / (1.0 + r * r).sqrt();
        let s = r * c;

        // sigma ← G sigma Gᵀ on the (i,j) plane.
        for k in 0..d {
            let (vi, vj) = (sigma[(i, k)], sigma[(j, k)]);
            sigma[(i, k)] = c * vi + s * vj;
            sigma[(j, k)] = -s * vi + c * vj;
        }
        for k in 0..d {
            let (vi, vj) = (sigma[(k, i)], sigma[(k, j)]);
            sigma[(k, i)] = c * vi + s * vj;
            sigma[(k, j)] = -s * vi + c * vj;
        }
        sigma[(i, i)] = t; // exact by construction; kill rounding drift
        // w ← w Gᵀ (columns i and j).
        for k in 0..w.nrows() {
            let (vi, vj) = (w[(k, i)], w[(k, j)]);
            w[(k, i)] = c * vi + s * vj;
            w[(k, j)] = -s * vi + c * vj;
        }
    }
}

/// Generates a scaled synthetic split with feature covariance spanning
/// `cond_target` (see the module docs). Deterministic in `seed`; the planted
/// weights give margins with standard deviation 2 so both classes occur.
pub fn gen_synthetic(
    n: usize,
    n_test: usize,
    d: usize,
    cond_target: f64,
    seed: u64,
) -> Result<SplitDataset, DataError> {
    if n == 0 || n_test == 0 || d == 0 {
        return Err(DataError::BadShape);
    }
    if !(cond_target >= 1.0 && cond_target.is_finite()) {
        return Err(DataError::BadCondition(cond_target));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Eigenvalues log-uniform on [1/cond, 1]; factor W = Λ^{1/2} Q so that
    // the feature covariance is WᵀW.
    let lambdas: Vec<f64> = (0..d)
        .map(|j| {
            if d == 1 {
                1.0
            } else {
                cond_target.powf(-(j as f64) / (d as f64 - 1.0))
            }
        })
        .collect();
    let q = random_orthogonal(d, &mut rng);
    let mut w = q.clone();
    for (i, &l) in lambdas.iter().enumerate() {
        let scale = l.sqrt();
        for jj in 0..d {
            w[(i, jj)] *= scale;
        }
    }
    let mut sigma = w.transpose() * &w;
    equalize_diagonal(&mut sigma, &mut w);
    let wt = w.transpose();

    // Planted weights, scaled so margins have variance 4.
    let mut planted = Point::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let margin_var = (&w * &planted).norm_squared();
    if margin_var > 0.0 {
        planted *= 2.0 / margin_var.sqrt();
    }

    let draw_rows = |count: usize, rng: &mut ChaCha8Rng| -> (Vec<Point>, Vec<f64>) {
        let mut rows = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            let z = Point::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let a = &wt * z;
            let p = sigmoid(a.dot(&planted));
            let y = if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
            rows.push(a);
            labels.push(y);
        }
        (rows, labels)
    };
    let (mut train_rows, train_labels) = draw_rows(n, &mut rng);
    let (mut test_rows, test_labels) = draw_rows(n_test, &mut rng);

    let mut all = Vec::with_capacity(n + n_test);
    all.append(&mut train_rows);
    all.append(&mut test_rows);
    minmax_scale(&mut all);
    let test_scaled = all.split_off(n);

    Ok(SplitDataset {
        train: FiniteSumProblem::new(all, train_labels)?,
        test: FiniteSumProblem::new(test_scaled, test_labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn parses_basic_sparse_rows() {
        let raw = parse_libsvm("1 1:0.5 3:2.0\n-1 2:1\n0\n").unwrap();
        assert_eq!(raw.rows.len(), 3);
        assert_eq!(raw.dim(), 3);
        let (rows, labels) = raw.to_dense(3);
        assert_eq!(labels, vec![1.0, 0.0, 0.0]);
        assert_eq!(rows[0], DVector::from_vec(vec![0.5, 0.0, 2.0]));
        assert_eq!(rows[1], DVector::from_vec(vec![0.0, 1.0, 0.0]));
        assert_eq!(rows[2], DVector::from_vec(vec![0.0, 0.0, 0.0]));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert!(matches!(
            parse_libsvm("1 1:1\n1 3:1 2:4\n"),
            Err(DataError::NonMonotonicIndex { line: 2 })
        ));
        assert!(matches!(
            parse_libsvm("1 2:1 2:3\n"),
            Err(DataError::NonMonotonicIndex { line: 1 })
        ));
        assert!(matches!(
            parse_libsvm("1 0:2\n"),
            Err(DataError::ZeroIndex { line: 1 })
        ));
        assert!(matches!(
            parse_libsvm("2 1:1\n"),
            Err(DataError::BadLabel { line: 1, .. })
        ));
        assert!(matches!(
            parse_libsvm("1 1:abc\n"),
            Err(DataError::BadNumber { line: 1, .. })
        ));
        assert!(matches!(
            parse_libsvm("1 1\n"),
            Err(DataError::BadPair { line: 1, .. })
        ));
        assert!(matches!(parse_libsvm("\n\n"), Err(DataError::Empty)));
    }

    #[test]
    fn serialization_round_trips_bit_exactly() {
        let rows = vec![
            DVector::from_vec(vec![0.1234567890123456, 0.0, 1.0 / 3.0]),
            DVector::from_vec(vec![-2.5e-17, 7.0, 0.0]),
        ];
        let labels = vec![1.0, 0.0];
        let text = write_libsvm(&rows, &labels);
        let raw = parse_libsvm(&text).unwrap();
        let (parsed_rows, parsed_labels) = raw.to_dense(3);
        assert_eq!(parsed_labels, labels);
        for (a, b) in rows.iter().zip(parsed_rows.iter()) {
            for j in 0..3 {
                assert_eq!(a[j].to_bits(), b[j].to_bits(), "column {j}");
            }
        }
    }

    #[test]
    fn csv_with_label_column_anywhere() {
        let raw = parse_csv("f1,label,f2\n0.5,1,2.0\n0,-1,0\n").unwrap();
        assert_eq!(raw.d_declared, Some(2));
        let (rows, labels) = raw.to_dense(2);
        assert_eq!(labels, vec![1.0, 0.0]);
        assert_eq!(rows[0], DVector::from_vec(vec![0.5, 2.0]));
        assert!(matches!(
            parse_csv("a,b\n1,2\n"),
            Err(DataError::MissingLabelColumn)
        ));
        assert!(matches!(
            parse_csv("label,f1\n1,2,3\n"),
            Err(DataError::RowWidth { line: 2, want: 2, got: 3 })
        ));
    }

    #[test]
    fn minmax_examples() {
        let mut rows = vec![
            DVector::from_vec(vec![0.0, 3.0]),
            DVector::from_vec(vec![2.0, 3.0]),
            DVector::from_vec(vec![4.0, 3.0]),
        ];
        minmax_scale(&mut rows);
        assert_eq!(rows[0][0], 0.0);
        assert_eq!(rows[1][0], 0.5);
        assert_eq!(rows[2][0], 1.0);
        // Constant column maps to zero.
        assert!(rows.iter().all(|r| r[1] == 0.0));
    }

    #[test]
    fn minmax_is_idempotent_and_positive_affine_invariant() {
        let base: Vec<Point> = (0..20)
            .map(|i| {
                DVector::from_vec(vec![
                    (i as f64 * 0.7).sin(),
                    (i as f64) * 0.3 - 2.0,
                    ((i * i) % 7) as f64,
                ])
            })
            .collect();
        let mut once = base.clone();
        minmax_scale(&mut once);
        let mut twice = once.clone();
        minmax_scale(&mut twice);
        assert_eq!(once, twice);

        // Per-column x → α x + β with α > 0 leaves the result unchanged.
        let mut shifted: Vec<Point> = base
            .iter()
            .map(|r| {
                DVector::from_vec(vec![3.0 * r[0] + 1.0, 0.25 * r[1] - 7.0, 10.0 * r[2]])
            })
            .collect();
        minmax_scale(&mut shifted);
        for (a, b) in once.iter().zip(shifted.iter()) {
            for j in 0..3 {
                assert!((a[j] - b[j]).abs() <= 1e-12, "col {j}: {} vs {}", a[j], b[j]);
            }
        }
    }

    #[test]
    fn equalize_diagonal_preserves_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = 8;
        let lambdas: Vec<f64> = (0..d).map(|j| 100f64.powf(-(j as f64) / 7.0)).collect();
        let q = random_orthogonal(d, &mut rng);
        let mut w = q.clone();
        for (i, &l) in lambdas.iter().enumerate() {
            for jj in 0..d {
                w[(i, jj)] *= l.sqrt();
            }
        }
        let mut sigma = w.transpose() * &w;
        let before: Vec<f64> = {
            let mut e = sigma.clone().symmetric_eigen().eigenvalues.as_slice().to_vec();
            e.sort_by(f64::total_cmp);
            e
        };
        equalize_diagonal(&mut sigma, &mut w);
        let t = sigma.trace() / d as f64;
        for k in 0..d {
            assert!(
                (sigma[(k, k)] - t).abs() <= 1e-10 * t,
                "diagonal entry {k} not equalized: {} vs {t}",
                sigma[(k, k)]
            );
        }
        // Orthogonal similarity: eigenvalues unchanged.
        let mut after = sigma.clone().symmetric_eigen().eigenvalues.as_slice().to_vec();
        after.sort_by(f64::total_cmp);
        for (a, b) in before.iter().zip(after.iter()) {
            assert!((a - b).abs() <= 1e-10 * b.max(1e-10));
        }
        // The factor tracks the rotated covariance exactly.
        let check = w.transpose() * &w;
        assert!((&check - &sigma).norm() <= 1e-10);
    }

    #[test]
    fn generator_is_deterministic_and_well_formed() {
        let a = gen_synthetic(200, 50, 5, 1e2, 7).unwrap();
        let b = gen_synthetic(200, 50, 5, 1e2, 7).unwrap();
        assert_eq!(a.train.rows(), b.train.rows());
        assert_eq!(a.test.labels(), b.test.labels());
        assert_eq!(a.train.n_components(), 200);
        assert_eq!(a.test.n_components(), 50);
        assert_eq!(a.train.dim(), 5);

        // Scaled into [0,1] with the extrema attained over the union.
        for j in 0..5 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in a.train.rows().iter().chain(a.test.rows().iter()) {
                lo = lo.min(r[j]);
                hi = hi.max(r[j]);
            }
            assert_eq!(lo, 0.0, "column {j}");
            assert_eq!(hi, 1.0, "column {j}");
        }

        // Both classes occur.
        let ones: f64 = a.train.labels().iter().sum();
        assert!(ones > 0.0 && ones < 200.0);
        assert!(a.train.labels().iter().all(|&y| y == 0.0 || y == 1.0));

        let c = gen_synthetic(200, 50, 5, 1e2, 8).unwrap();
        assert_ne!(a.train.rows()[0], c.train.rows()[0]);
    }

    #[test]
    fn isotropic_target_gives_near_equal_column_variances() {
        let split = gen_synthetic(5000, 100, 10, 1.0, 3).unwrap();
        let n = split.train.n_components() as f64;
        let mut vars = Vec::new();
        for j in 0..10 {
            let mean: f64 = split.train.rows().iter().map(|r| r[j]).sum::<f64>() / n;
            let var: f64 = split
                .train
                .rows()
                .iter()
                .map(|r| (r[j] - mean).powi(2))
                .sum::<f64>()
                / n;
            vars.push(var);
        }
        // Scaling denominators are sample extrema, so some fluctuation is
        // inherent: each column should sit within 20% of the mean variance.
        let vmean = vars.iter().sum::<f64>() / vars.len() as f64;
        for (j, v) in vars.iter().enumerate() {
            assert!(
                (v - vmean).abs() <= 0.2 * vmean,
                "column {j} variance {v} deviates from mean {vmean}"
            );
        }
    }

    #[test]
    fn conditioning_survives_scaling() {
        // Empirical covariance condition number of the scaled features
        // should sit near the target (sampling noise allows a loose band).
        let d = 6;
        let split = gen_synthetic(20000, 100, d, 100.0, 11).unwrap();
        let n = split.train.n_components() as f64;
        let mut mean = Point::zeros(d);
        for r in split.train.rows() {
            mean += r;
        }
        mean /= n;
        let mut cov = DMatrix::zeros(d, d);
        for r in split.train.rows() {
            let c = r - &mean;
            cov.syger(1.0 / n, &c, &c, 1.0);
        }
        for i in 0..d {
            for j in 0..i {
                cov[(j, i)] = cov[(i, j)];
            }
        }
        let eigs = cov.symmetric_eigen().eigenvalues;
        let emax = eigs.iter().cloned().fold(f64::MIN, f64::max);
        let emin = eigs.iter().cloned().fold(f64::MAX, f64::min);
        let cond = emax / emin;
        assert!(
            cond > 30.0 && cond < 300.0,
            "covariance condition {cond} far from target 100"
        );
    }

    #[test]
    fn joint_scaling_uses_test_extrema() {
        let train = parse_libsvm("1 1:0.0\n0 1:1.0\n").unwrap();
        let test = parse_libsvm("1 1:3.0\n").unwrap();
        let joint = assemble_split(&train, &test, ScalePolicy::Joint).unwrap();
        // Combined range is [0,3], so the train maximum lands at 1/3.
        assert!((joint.train.rows()[1][0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(joint.test.rows()[0][0], 1.0);

        let sep = assemble_split(&train, &test, ScalePolicy::TrainOnly).unwrap();
        assert_eq!(sep.train.rows()[1][0], 1.0);
        assert_eq!(sep.test.rows()[0][0], 3.0); // scaled by the train range only

        let none = assemble_split(&train, &test, ScalePolicy::None).unwrap();
        assert_eq!(none.test.rows()[0][0], 3.0);
    }

    #[test]
    fn bad_generator_arguments_are_rejected() {
        assert!(matches!(
            gen_synthetic(10, 10, 3, 0.5, 0),
            Err(DataError::BadCondition(_))
        ));
        assert!(matches!(
            gen_synthetic(0, 10, 3, 2.0, 0),
            Err(DataError::BadShape)
        ));
    }
}
