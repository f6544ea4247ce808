use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subcubic::data::ScalePolicy;
use subcubic_cli::commands::{
    cmd_compare, cmd_gen, cmd_profile, cmd_run, CompareSpec, DatasetSource, GenSpec,
    ProfileSpec, RunSpec,
};
use subcubic_cli::config::{assemble, parse_variant};
use subcubic_cli::CliError;

/// Benchmark harness for cubic-regularized finite-sum solvers with
/// subsampled Hessians.
#[derive(Parser)]
#[command(name = "subcubic-bench", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct DatasetArgs {
    /// Directory produced by `gen` (expects train.libsvm and test.libsvm).
    #[arg(long, conflicts_with_all = ["train", "test"])]
    data: Option<PathBuf>,
    /// Training file; `.csv` parses as CSV with a `label` column, anything
    /// else as libsvm text.
    #[arg(long, required_unless_present = "data")]
    train: Option<PathBuf>,
    /// Held-out file; without it, test metrics reuse the training rows.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Feature scaling: joint (train+test extrema), train-only, or none.
    #[arg(long, default_value = "joint")]
    scale: String,
}

impl DatasetArgs {
    fn source(&self) -> Result<DatasetSource, CliError> {
        match (&self.data, &self.train) {
            (Some(dir), _) => Ok(DatasetSource::Dir(dir.clone())),
            (None, Some(train)) => Ok(DatasetSource::Files {
                train: train.clone(),
                test: self.test.clone(),
            }),
            (None, None) => Err(CliError::input("give --data DIR or --train FILE")),
        }
    }

    fn scale_policy(&self) -> Result<ScalePolicy, CliError> {
        match self.scale.as_str() {
            "joint" => Ok(ScalePolicy::Joint),
            "train-only" => Ok(ScalePolicy::TrainOnly),
            "none" => Ok(ScalePolicy::None),
            other => Err(CliError::input(format!(
                "unknown scale policy `{other}` (expected joint, train-only, or none)"
            ))),
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// First-order tolerance; shorthand for `--set eps=..`.
    #[arg(long)]
    eps: Option<f64>,
    /// Sample fraction for the `fix` variant.
    #[arg(long)]
    p: Option<f64>,
    /// Accuracy constant for the `constant`/`sub` variant (defaults to ε).
    #[arg(long)]
    c: Option<f64>,
    /// Config file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra overrides, repeatable: `--set theta=0.25`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Number of seeds; runs use seeds base..base+count.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// First seed of the range.
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
}

impl SolverArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut pairs = Vec::new();
        for item in &self.set {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                CliError::input(format!("--set expects KEY=VALUE, got `{item}`"))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(eps) = self.eps {
            pairs.push(("eps".to_string(), eps.to_string()));
        }
        Ok(pairs)
    }

    fn seed_list(&self) -> Vec<u64> {
        (self.seed_base..self.seed_base + self.seeds).collect()
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic binary-classification dataset.
    Gen {
        /// Training rows.
        #[arg(long)]
        n: usize,
        /// Held-out rows.
        #[arg(long)]
        ntest: usize,
        /// Feature dimension.
        #[arg(long)]
        d: usize,
        /// Target condition number of the feature covariance.
        #[arg(long, default_value_t = 1.0)]
        cond: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one variant over a seed range; writes per-seed traces.
    Run {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// dynamic, safeguarded, full, constant (alias sub), step-prop, fix.
        #[arg(long)]
        variant: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write gnuplot-ready series files.
        #[arg(long)]
        series: bool,
    },
    /// Run several variants on the same seeds and tabulate savings.
    Compare {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Comma-separated variant list (at least two).
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        /// Savings are of this variant over each other one (default: the
        /// first in the list).
        #[arg(long)]
        reference: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Performance profile from a cost-matrix CSV.
    Profile {
        /// CSV with header `problem,<solver>,...`; `inf` marks unsolved.
        #[arg(long)]
        costs: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        tau_max: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Gen { n, ntest, d, cond, seed, out } => {
            cmd_gen(&GenSpec { n, ntest, d, cond, seed, out })
        }
        Cmd::Run { dataset, solver, variant, out, series } => {
            let cfg = assemble(solver.config.as_deref(), &solver.overrides()?)?;
            let variant = parse_variant(&variant, solver.p, solver.c)?;
            cmd_run(&RunSpec {
                source: dataset.source()?,
                scale: dataset.scale_policy()?,
                variant,
                cfg,
                seeds: solver.seed_list(),
                out,
                series,
            })?;
            Ok(())
        }
        Cmd::Compare { dataset, solver, variants, reference, out } => {
            let cfg = assemble(solver.config.as_deref(), &solver.overrides()?)?;
            let parsed = variants
                .iter()
                .map(|t| parse_variant(t, solver.p, solver.c))
                .collect::<Result<Vec<_>, _>>()?;
            let reference = match reference {
                None => 0,
                Some(token) => variants
                    .iter()
                    .position(|t| *t == token)
                    .ok_or_else(|| {
                        CliError::input(format!("reference `{token}` is not among --variants"))
                    })?,
            };
            cmd_compare(&CompareSpec {
                source: dataset.source()?,
                scale: dataset.scale_policy()?,
                variants: parsed,
                reference,
                cfg,
                seeds: solver.seed_list(),
                out,
            })
        }
        Cmd::Profile { costs, tau_max, points, out } => {
            cmd_profile(&ProfileSpec { costs, tau_max, points, out })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
