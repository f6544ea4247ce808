//! End-to-end checks of the `subcubic-bench` binary: file contracts,
//! determinism, exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subcubic-bench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("subcubic-bench-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn gen_small(dir: &Path) {
    let out = bench(&[
        "gen", "--n", "80", "--ntest", "20", "--d", "4", "--cond", "1e2", "--seed", "5",
        "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_writes_the_three_files_and_is_deterministic() {
    let dir = scratch("gen-deterministic");
    let (a, b) = (dir.join("a"), dir.join("b"));
    for target in [&a, &b] {
        let out = bench(&[
            "gen", "--n", "60", "--ntest", "12", "--d", "3", "--cond", "10", "--seed", "9",
            "--out", target.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for file in ["train.libsvm", "test.libsvm", "manifest"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file} differs between identical invocations"
        );
    }
    let manifest = read(&a.join("manifest"));
    assert!(manifest.contains("n = 60"));
    assert!(manifest.contains("cond = 10"));
    assert_eq!(read(&a.join("train.libsvm")).lines().count(), 60);
    assert_eq!(read(&a.join("test.libsvm")).lines().count(), 12);
}

/// Extracts one named column from a trace CSV (skipping the version line).
fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn run_writes_traces_and_summary_with_variant_sizing() {
    let dir = scratch("run-sizing");
    let data = dir.join("data");
    gen_small(&data);

    let out_full = dir.join("full");
    let status = bench(&[
        "run", "--data", data.to_str().unwrap(), "--variant", "full", "--seeds", "2",
        "--out", out_full.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for seed in 0..2 {
        let csv = read(&out_full.join(format!("trace_full_seed{seed}.csv")));
        assert!(column(&csv, "sample_size").iter().all(|s| s == "80"));
    }
    let summary = read(&out_full.join("summary_full.csv"));
    assert_eq!(summary.lines().count(), 2 + 2); // version, header, two seeds

    let out_fix = dir.join("fix");
    let status = bench(&[
        "run", "--data", data.to_str().unwrap(), "--variant", "fix", "--p", "0.05",
        "--out", out_fix.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let csv = read(&out_fix.join("trace_fix_seed0.csv"));
    // ⌈0.05 · 80⌉ = 4 on every row.
    assert!(column(&csv, "sample_size").iter().all(|s| s == "4"));
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let dir = scratch("run-deterministic");
    let data = dir.join("data");
    gen_small(&data);
    let (a, b) = (dir.join("a"), dir.join("b"));
    for target in [&a, &b] {
        let out = bench(&[
            "run", "--data", data.to_str().unwrap(), "--variant", "dynamic", "--seeds", "3",
            "--series", "--out", target.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for seed in 0..3 {
        for name in [
            format!("trace_dynamic_seed{seed}.csv"),
            format!("series_dynamic_seed{seed}.dat"),
        ] {
            assert_eq!(
                std::fs::read(a.join(&name)).unwrap(),
                std::fs::read(b.join(&name)).unwrap(),
                "{name} differs"
            );
        }
    }
    assert_eq!(
        std::fs::read(a.join("summary_dynamic.csv")).unwrap(),
        std::fs::read(b.join("summary_dynamic.csv")).unwrap()
    );
}

#[test]
fn config_file_and_flag_overrides_reach_the_solver() {
    let dir = scratch("run-config");
    let data = dir.join("data");
    gen_small(&data);
    let conf = dir.join("solver.conf");
    std::fs::write(&conf, "max_iters = 2\n").unwrap();
    let out_dir = dir.join("out");
    let out = bench(&[
        "run", "--data", data.to_str().unwrap(), "--variant", "full",
        "--config", conf.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = read(&out_dir.join("trace_full_seed0.csv"));
    assert!(column(&csv, "k").len() <= 2, "config file cap ignored");

    // A flag override beats the file.
    let out_dir2 = dir.join("out2");
    let out = bench(&[
        "run", "--data", data.to_str().unwrap(), "--variant", "full",
        "--config", conf.to_str().unwrap(), "--set", "max_iters=1",
        "--out", out_dir2.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = read(&out_dir2.join("trace_full_seed0.csv"));
    assert!(column(&csv, "k").len() <= 1, "flag override ignored");
}

#[test]
fn compare_against_itself_reports_zero_savings() {
    let dir = scratch("compare-self");
    let data = dir.join("data");
    gen_small(&data);
    let out_dir = dir.join("cmp");
    let out = bench(&[
        "compare", "--data", data.to_str().unwrap(), "--variants", "full,full",
        "--seeds", "2", "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read(&out_dir.join("compare.csv"));
    let last = table.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    assert_eq!(&fields[3..6], &["0", "0", "0"], "bad row: {last}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Save-W 0%"), "{stdout}");
}

#[test]
fn compare_needs_two_variants() {
    let dir = scratch("compare-one");
    let data = dir.join("data");
    gen_small(&data);
    let out = bench(&[
        "compare", "--data", data.to_str().unwrap(), "--variants", "dynamic",
        "--out", dir.join("cmp").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn profile_matches_the_hand_matrix() {
    let dir = scratch("profile");
    let costs = dir.join("costs.csv");
    std::fs::write(&costs, "problem,a,b\np1,10,20\np2,20,10\n").unwrap();
    let out_path = dir.join("profile.csv");
    let out = bench(&[
        "profile", "--costs", costs.to_str().unwrap(), "--tau-max", "2", "--points", "2",
        "--out", out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        read(&out_path),
        "# profile-v1\ntau,a,b\n1,0.5,0.5\n2,1,1\n"
    );

    // τ_max below every ratio: some solver stays below 1.
    let low = dir.join("low.csv");
    let out = bench(&[
        "profile", "--costs", costs.to_str().unwrap(), "--tau-max", "1.5", "--points", "2",
        "--out", low.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = read(&low);
    let last = text.lines().last().unwrap();
    assert!(last.split(',').skip(1).any(|f| f != "1"), "{last}");

    // Identical solvers: everything within factor 1.
    let tied = dir.join("tied.csv");
    std::fs::write(&tied, "problem,a,b\np1,10,10\np2,20,20\n").unwrap();
    let tied_out = dir.join("tied_profile.csv");
    let out = bench(&[
        "profile", "--costs", tied.to_str().unwrap(), "--tau-max", "2", "--points", "2",
        "--out", tied_out.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(read(&tied_out).lines().nth(2).unwrap().ends_with(",1,1"));
}

#[test]
fn input_errors_exit_with_code_two() {
    let dir = scratch("exit-codes");
    // Missing dataset.
    let out = bench(&[
        "run", "--train", dir.join("nope.libsvm").to_str().unwrap(), "--variant", "dynamic",
        "--out", dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    // Unknown variant.
    let data = dir.join("data");
    gen_small(&data);
    let out = bench(&[
        "run", "--data", data.to_str().unwrap(), "--variant", "turbo",
        "--out", dir.join("out2").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    // Clap usage error (missing required flag).
    let out = bench(&["run", "--variant", "dynamic"]);
    assert_eq!(out.status.code(), Some(2));
    // Malformed profile matrix (missing problem entry).
    let costs = dir.join("ragged.csv");
    std::fs::write(&costs, "problem,a,b\np1,10\n").unwrap();
    let out = bench(&[
        "profile", "--costs", costs.to_str().unwrap(),
        "--out", dir.join("p.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
