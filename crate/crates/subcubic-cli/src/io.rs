//! File formats: versioned trace/summary/profile CSVs, the dataset
//! manifest, gnuplot-ready series, and the cost-matrix reader used by the
//! profile command. All numbers print via `Display`, which round-trips f64
//! exactly and keeps bytes stable across runs.

use subcubic::driver::Trace;
use subcubic::metrics::ProfilePoint;
use subcubic::FiniteSumProblem;

use crate::CliError;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One CSV row per iteration record, schema `trace-v1`. The `test_loss`
/// column evaluates the held-out loss at the iterate each row describes.
pub fn trace_csv(trace: &Trace, test: &FiniteSumProblem) -> Result<String, CliError> {
    let mut out = String::from(
        "# trace-v1\nk,outcome,sigma,C_k,sample_size,step_norm,grad_norm,f,rho,cum_EGE,test_loss\n",
    );
    for (r, a) in trace.records.iter().zip(&trace.audit) {
        let test_loss = test
            .loss(&a.x)
            .map_err(|e| CliError::input(format!("test evaluation: {e}")))?;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.k,
            r.outcome.as_str(),
            r.sigma,
            opt(r.c_k),
            r.sample_size,
            r.step_norm,
            r.grad_norm,
            r.f_value,
            opt(r.rho),
            r.cum_ege,
            test_loss,
        ));
    }
    Ok(out)
}

/// Per-seed summary rows, schema `summary-v1`.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("# summary-v1\nseed,variant,status,n_iter,ege,class_rate\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.seed, r.variant, r.status, r.n_iter, r.ege, r.class_rate
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub seed: u64,
    pub variant: String,
    pub status: String,
    pub n_iter: usize,
    pub ege: f64,
    pub class_rate: f64,
}

/// Dataset manifest written next to generated files.
pub fn manifest_text(n: usize, ntest: usize, d: usize, cond: f64, seed: u64) -> String {
    format!(
        "# gen-manifest-v1\nn = {n}\nntest = {ntest}\nd = {d}\ncond = {cond}\nseed = {seed}\nformat = libsvm\n"
    )
}

/// Gnuplot-ready whitespace-separated series: loss vs cost is `using 1:2`,
/// gradient norm vs cost `using 1:3` (log y), sample size vs iteration
/// `using 4:5`.
pub fn series_text(trace: &Trace) -> String {
    let mut out = String::from("# cum_EGE f grad_norm k sample_size\n");
    for r in &trace.records {
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            r.cum_ege, r.f_value, r.grad_norm, r.k, r.sample_size
        ));
    }
    out
}

/// Reads a cost matrix CSV: header `problem,<solver>,...`, one row per
/// problem, entries positive costs or `inf` for unsolved. Returns solver
/// names and the matrix.
pub fn read_cost_matrix(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::input("cost matrix is empty"))?;
    let mut cols = header.split(',').map(str::trim);
    if cols.next() != Some("problem") {
        return Err(CliError::input("cost matrix header must start with `problem`"));
    }
    let solvers: Vec<String> = cols.map(str::to_string).collect();
    if solvers.len() < 2 {
        return Err(CliError::input("profile needs at least two solvers"));
    }
    let mut costs = Vec::new();
    for (i, line) in lines {
        let mut fields = line.split(',').map(str::trim);
        let name = fields.next().unwrap_or_default();
        let row: Vec<f64> = fields
            .map(|f| {
                if f.eq_ignore_ascii_case("inf") {
                    Ok(f64::INFINITY)
                } else {
                    f.parse::<f64>().map_err(|_| {
                        CliError::input(format!("line {}: bad cost `{f}`", i + 1))
                    })
                }
            })
            .collect::<Result<_, _>>()?;
        if row.len() != solvers.len() {
            return Err(CliError::input(format!(
                "line {}: problem `{name}` has {} costs, expected {} (missing problems?)",
                i + 1,
                row.len(),
                solvers.len()
            )));
        }
        costs.push(row);
    }
    if costs.is_empty() {
        return Err(CliError::input("cost matrix has no problem rows"));
    }
    Ok((solvers, costs))
}

/// Profile output, schema `profile-v1`: one row per τ with each solver's
/// within-factor fraction.
pub fn profile_csv(solvers: &[String], points: &[ProfilePoint]) -> String {
    let mut out = format!("# profile-v1\ntau,{}\n", solvers.join(","));
    for p in points {
        out.push_str(&p.tau.to_string());
        for rho in &p.rho {
            out.push_str(&format!(",{rho}"));
        }
        out.push('\n');
    }
    out
}
