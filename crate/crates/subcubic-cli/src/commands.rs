//! The four commands: `gen`, `run`, `compare`, `profile`. Each takes a
//! plain spec struct so the logic is callable without the argument parser.

use std::path::{Path, PathBuf};

use subcubic::data::{
    assemble_split, gen_synthetic, parse_csv, parse_libsvm, write_libsvm, RawDataset,
    ScalePolicy, SplitDataset,
};
use subcubic::driver::{ArcConfig, HessianVariant, RunStatus, Trace};
use subcubic::metrics::{classification_rate, performance_profile};

use crate::config::variant_token;
use crate::io::{
    manifest_text, profile_csv, series_text, summary_csv, trace_csv, SummaryRow,
};
use crate::{run_many, CliError};

#[derive(Debug, Clone)]
pub struct GenSpec {
    pub n: usize,
    pub ntest: usize,
    pub d: usize,
    pub cond: f64,
    pub seed: u64,
    pub out: PathBuf,
}

/// Writes `train.libsvm`, `test.libsvm`, and `manifest` into the output
/// directory. Identical flags produce identical bytes.
pub fn cmd_gen(spec: &GenSpec) -> Result<(), CliError> {
    let split = gen_synthetic(spec.n, spec.ntest, spec.d, spec.cond, spec.seed)
        .map_err(|e| CliError::input(e.to_string()))?;
    std::fs::create_dir_all(&spec.out)?;
    std::fs::write(
        spec.out.join("train.libsvm"),
        write_libsvm(split.train.rows(), split.train.labels()),
    )?;
    std::fs::write(
        spec.out.join("test.libsvm"),
        write_libsvm(split.test.rows(), split.test.labels()),
    )?;
    std::fs::write(
        spec.out.join("manifest"),
        manifest_text(spec.n, spec.ntest, spec.d, spec.cond, spec.seed),
    )?;
    println!(
        "wrote {} train rows and {} test rows (d = {}) under {}",
        spec.n,
        spec.ntest,
        spec.d,
        spec.out.display()
    );
    Ok(())
}

/// Where the dataset comes from: a `gen` output directory, or explicit
/// files (CSV by extension, libsvm otherwise). Without a test file the
/// held-out metrics fall back to the training rows.
#[derive(Debug, Clone)]
pub enum DatasetSource {
    Dir(PathBuf),
    Files { train: PathBuf, test: Option<PathBuf> },
}

fn parse_by_extension(path: &Path) -> Result<RawDataset, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        parse_csv(&text)
    } else {
        parse_libsvm(&text)
    };
    parsed.map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn load_dataset(source: &DatasetSource, scale: ScalePolicy) -> Result<SplitDataset, CliError> {
    let (train, test) = match source {
        DatasetSource::Dir(dir) => (
            parse_by_extension(&dir.join("train.libsvm"))?,
            parse_by_extension(&dir.join("test.libsvm"))?,
        ),
        DatasetSource::Files { train, test } => {
            let tr = parse_by_extension(train)?;
            let te = match test {
                Some(path) => parse_by_extension(path)?,
                None => tr.clone(),
            };
            (tr, te)
        }
    };
    assemble_split(&train, &test, scale).map_err(|e| CliError::input(e.to_string()))
}

/// Runs one variant over all seeds (workers fan out per seed) and builds
/// the per-seed summary rows.
pub fn run_variant(
    split: &SplitDataset,
    cfg: &ArcConfig,
    variant: &HessianVariant,
    seeds: &[u64],
) -> Result<(Vec<Trace>, Vec<SummaryRow>), CliError> {
    let mut cfg = cfg.clone();
    cfg.variant = variant.clone();
    let traces = run_many(&split.train, &cfg, seeds)?;
    let rows = seeds
        .iter()
        .zip(&traces)
        .map(|(&seed, trace)| {
            let class_rate = classification_rate(&split.test, &trace.x_final)
                .map_err(|e| CliError::input(e.to_string()))?;
            Ok(SummaryRow {
                seed,
                variant: variant_token(variant).to_string(),
                status: trace.status.as_str().to_string(),
                n_iter: trace.records.len(),
                ege: trace.ege_total,
                class_rate,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((traces, rows))
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

fn summary_line(token: &str, rows: &[SummaryRow]) -> String {
    format!(
        "{token}: seeds {}, mean n-iter {}, mean EGE {}, mean rate {}",
        rows.len(),
        mean(rows.iter().map(|r| r.n_iter as f64)),
        mean(rows.iter().map(|r| r.ege)),
        mean(rows.iter().map(|r| r.class_rate)),
    )
}

fn first_breakdown(token: &str, traces: &[Trace], seeds: &[u64]) -> Option<CliError> {
    seeds
        .iter()
        .zip(traces)
        .find(|(_, t)| t.status == RunStatus::InnerFailure)
        .map(|(seed, _)| {
            CliError::Numerical(format!("{token} run with seed {seed} broke down"))
        })
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub source: DatasetSource,
    pub scale: ScalePolicy,
    pub variant: HessianVariant,
    pub cfg: ArcConfig,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub series: bool,
}

/// One trace CSV per seed plus a per-seed summary CSV; optionally the
/// gnuplot series. Artifacts are written even when a seed breaks down, and
/// the breakdown is then reported through the exit code.
pub fn cmd_run(spec: &RunSpec) -> Result<Vec<SummaryRow>, CliError> {
    if spec.seeds.is_empty() {
        return Err(CliError::input("need at least one seed"));
    }
    let split = load_dataset(&spec.source, spec.scale)?;
    let token = variant_token(&spec.variant);
    let (traces, rows) = run_variant(&split, &spec.cfg, &spec.variant, &spec.seeds)?;
    std::fs::create_dir_all(&spec.out)?;
    for (seed, trace) in spec.seeds.iter().zip(&traces) {
        std::fs::write(
            spec.out.join(format!("trace_{token}_seed{seed}.csv")),
            trace_csv(trace, &split.test)?,
        )?;
        if spec.series {
            std::fs::write(
                spec.out.join(format!("series_{token}_seed{seed}.dat")),
                series_text(trace),
            )?;
        }
    }
    std::fs::write(
        spec.out.join(format!("summary_{token}.csv")),
        summary_csv(&rows),
    )?;
    println!("{}", summary_line(token, &rows));
    if let Some(err) = first_breakdown(token, &traces, &spec.seeds) {
        return Err(err);
    }
    Ok(rows)
}

/// Worst, best, and mean percentage saving of the reference over another
/// variant, pairing runs seed by seed.
pub fn savings_stats(ref_ege: &[f64], other_ege: &[f64]) -> Result<(f64, f64, f64), CliError> {
    if ref_ege.len() != other_ege.len() || ref_ege.is_empty() {
        return Err(CliError::input("seed-count mismatch between variants"));
    }
    let per_seed: Vec<f64> = ref_ege
        .iter()
        .zip(other_ege)
        .map(|(&r, &o)| subcubic::metrics::savings(r, o))
        .collect();
    let worst = per_seed.iter().cloned().fold(f64::INFINITY, f64::min);
    let best = per_seed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((worst, best, mean(per_seed.iter().cloned())))
}

#[derive(Debug, Clone)]
pub struct CompareSpec {
    pub source: DatasetSource,
    pub scale: ScalePolicy,
    pub variants: Vec<HessianVariant>,
    /// Index into `variants`; savings are of this variant over each other.
    pub reference: usize,
    pub cfg: ArcConfig,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

/// Runs every variant over the same seeds, writes per-variant summaries and
/// a comparison table with Save-W / Save-B / Save-M columns.
pub fn cmd_compare(spec: &CompareSpec) -> Result<(), CliError> {
    if spec.variants.len() < 2 {
        return Err(CliError::input("compare needs at least two variants"));
    }
    if spec.reference >= spec.variants.len() {
        return Err(CliError::input("reference variant is not in the list"));
    }
    if spec.seeds.is_empty() {
        return Err(CliError::input("need at least one seed"));
    }
    let split = load_dataset(&spec.source, spec.scale)?;
    std::fs::create_dir_all(&spec.out)?;

    let mut all_rows = Vec::new();
    let mut breakdown = None;
    for variant in &spec.variants {
        let token = variant_token(variant);
        let (traces, rows) = run_variant(&split, &spec.cfg, variant, &spec.seeds)?;
        std::fs::write(
            spec.out.join(format!("summary_{token}.csv")),
            summary_csv(&rows),
        )?;
        println!("{}", summary_line(token, &rows));
        if breakdown.is_none() {
            breakdown = first_breakdown(token, &traces, &spec.seeds);
        }
        all_rows.push(rows);
    }

    let ref_token = variant_token(&spec.variants[spec.reference]);
    let ref_ege: Vec<f64> = all_rows[spec.reference].iter().map(|r| r.ege).collect();
    let mut table = String::from(
        "# compare-v1\nvariant,mean_n_iter,mean_ege,save_w,save_b,save_m\n",
    );
    for (i, rows) in all_rows.iter().enumerate() {
        let token = variant_token(&spec.variants[i]);
        let mean_iter = mean(rows.iter().map(|r| r.n_iter as f64));
        let mean_ege = mean(rows.iter().map(|r| r.ege));
        if i == spec.reference {
            table.push_str(&format!("{token},{mean_iter},{mean_ege},,,\n"));
        } else {
            let other: Vec<f64> = rows.iter().map(|r| r.ege).collect();
            let (w, b, m) = savings_stats(&ref_ege, &other)?;
            table.push_str(&format!("{token},{mean_iter},{mean_ege},{w},{b},{m}\n"));
            println!("{ref_token} over {token}: Save-W {w}%, Save-B {b}%, Save-M {m}%");
        }
    }
    std::fs::write(spec.out.join("compare.csv"), table)?;
    breakdown.map_or(Ok(()), Err)
}

#[derive(Debug, Clone)]
pub struct ProfileSpec {
    pub costs: PathBuf,
    pub tau_max: f64,
    pub points: usize,
    pub out: PathBuf,
}

/// Performance profile over a cost matrix, sampled on an even τ grid.
pub fn cmd_profile(spec: &ProfileSpec) -> Result<(), CliError> {
    if !(spec.tau_max >= 1.0) {
        return Err(CliError::input("tau-max must be at least 1"));
    }
    if spec.points < 2 {
        return Err(CliError::input("need at least two grid points"));
    }
    let text = std::fs::read_to_string(&spec.costs)
        .map_err(|e| CliError::input(format!("{}: {e}", spec.costs.display())))?;
    let (solvers, costs) = crate::io::read_cost_matrix(&text)?;
    let taus: Vec<f64> = (0..spec.points)
        .map(|j| 1.0 + (spec.tau_max - 1.0) * j as f64 / (spec.points - 1) as f64)
        .collect();
    let points = performance_profile(&costs, &taus)
        .map_err(|e| CliError::input(e.to_string()))?;
    if let Some(parent) = spec.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&spec.out, profile_csv(&solvers, &points))?;
    println!(
        "profiled {} solvers on {} problems over {} thresholds",
        solvers.len(),
        costs.len(),
        taus.len()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn savings_stats_examples() {
        // One seed: worst = best = mean.
        let (w, b, m) = savings_stats(&[67.4], &[183.0]).unwrap();
        assert_eq!(w, b);
        assert_eq!(b, m);
        assert!((m - 63.16939890710383).abs() < 1e-12);
        // Against itself: all zero.
        let (w, b, m) = savings_stats(&[10.0, 20.0], &[10.0, 20.0]).unwrap();
        assert_eq!((w, b, m), (0.0, 0.0, 0.0));
        // Mismatched seed counts are an input error.
        let err = savings_stats(&[1.0], &[1.0, 2.0]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
