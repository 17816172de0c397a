use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gluedtrees::experiments::{
    exit_code, read_csv_report, read_json_report, BoundsRow, ExactRow, McRow, PairRow, Report,
    SweepRow, WorstTreeRow,
};
use gluedtrees::graph::GraphAudit;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gluedtrees"));
    cmd.env_remove("GLUEDTREES_MAX_MEM_MB");
    cmd
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn sample_configs_validate_clean() {
    let mut seen = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = bin().arg("validate").arg(&path).output().unwrap();
            assert_eq!(code(&out), 0, "{}: {}", path.display(), stdout(&out));
            assert!(stdout(&out).is_empty());
            seen += 1;
        }
    }
    assert_eq!(seen, 7);
}

#[test]
fn validate_reports_each_problem() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write_config(
        dir.path(),
        "a.toml",
        "kind = \"bounds-table\"\nmaster_seed = 1\n",
    );
    let out = bin().arg("validate").arg(&missing).output().unwrap();
    assert_eq!(code(&out), exit_code::CONFIG);
    assert_eq!(stdout(&out).lines().count(), 1);
    assert!(stdout(&out).contains("params.n"));

    let domain = write_config(
        dir.path(),
        "b.toml",
        "kind = \"bounds-table\"\nmaster_seed = 1\n[params]\nn = 4\nt = 16\n",
    );
    let out = bin().arg("validate").arg(&domain).output().unwrap();
    assert_eq!(code(&out), exit_code::CONFIG);
    assert_eq!(
        stdout(&out).trim(),
        "line 5: params.t: t = 16 is not below 2^n for n = 4"
    );

    let run = bin().arg("run").arg(&domain).output().unwrap();
    assert_eq!(code(&run), exit_code::CONFIG);
}

#[test]
fn bounds_subcommand_prints_frozen_columns() {
    let out = bin()
        .args(["bounds", "--n-min", "6", "--n-max", "36", "--step", "6"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,t,exit_bound,improper_bound_paper,improper_bound_terms,total,vacuous")
    );
    let rows: Vec<BoundsRow> = read_csv_report(&text).unwrap();
    assert_eq!(
        rows.iter().map(|r| r.n).collect::<Vec<_>>(),
        vec![6, 12, 18, 24, 30, 36]
    );
    assert_eq!(rows[4].t, 1024);
    let bad = bin()
        .args(["bounds", "--n-min", "4", "--n-max", "4", "--t", "16"])
        .output()
        .unwrap();
    assert_eq!(code(&bad), exit_code::CONFIG);
}

#[test]
fn bounds_table_runs_are_byte_identical_and_reparse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "b.toml",
        "kind = \"bounds-table\"\nmaster_seed = 3\n[params]\nn = { min = 6, max = 36, step = 6 }\n[output]\ndir = \"unused\"\n",
    );
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out_dir = dir.path().join(format!("run{k}"));
        let out = bin()
            .arg("run")
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push((
            fs::read(out_dir.join("bounds-table.json")).unwrap(),
            fs::read(out_dir.join("bounds-table.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let report: Report<BoundsRow> =
        read_json_report(std::str::from_utf8(&outputs[0].0).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 6);
    assert_eq!(report.format_version, 1);
    assert!(report.violations.is_empty());
    let csv_rows: Vec<BoundsRow> =
        read_csv_report(std::str::from_utf8(&outputs[0].1).unwrap()).unwrap();
    assert_eq!(csv_rows, report.rows);
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "g.toml",
        "kind = \"graph-audit\"\nmaster_seed = 3\n[params]\nn = [2, 5]\nseeds = 2\n[output]\nformat = \"json\"\n",
    );
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .args(["--seed", "77", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(!out_dir.join("graph-audit.csv").exists());
    let report: Report<GraphAudit> =
        read_json_report(&fs::read_to_string(out_dir.join("graph-audit.json")).unwrap()).unwrap();
    assert_eq!(report.master_seed, 77);
    assert_eq!(report.rows.len(), 4);
    assert!(report.rows.iter().all(|r| r.ok));
}

#[test]
fn embed_exact_path_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "e.toml",
        "kind = \"embed-exact\"\nmaster_seed = 1\n[params]\nn = 2\nt = { min = 1, max = 6 }\nshapes = [\"path\"]\n",
    );
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let rows: Vec<ExactRow> =
        read_csv_report(&fs::read_to_string(out_dir.join("embed-exact.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0].probability, "0");
    assert_eq!(rows[1].probability, "0");
    // Six nodes reach depth 5, the EXIT level of a height-2 instance.
    assert_ne!(rows[5].probability, "0");
    assert!(rows
        .windows(2)
        .all(|w| w[0].probability_f64 <= w[1].probability_f64));
}

#[test]
fn monte_carlo_kinds_reparse() {
    let dir = tempfile::tempdir().unwrap();
    let body = |kind: &str, extra: &str| {
        format!("kind = \"{kind}\"\nmaster_seed = 9\n[params]\n{extra}graph_trials = 4\nembed_trials = 256\n")
    };
    let cases = [
        (
            "embed-mc",
            "n = [6, 9]\ntrees = 2\nshapes = [\"path\", \"caterpillar\"]\n",
        ),
        ("pair-audit", "n = 4\nt = 5\n"),
        ("worst-tree-search", "n = 9\ncandidates = 5\n"),
    ];
    for (kind, extra) in cases {
        let cfg = write_config(dir.path(), &format!("{kind}.toml"), &body(kind, extra));
        let out_dir = dir.path().join(kind);
        let out = bin()
            .arg("run")
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(
            code(&out),
            0,
            "{kind}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let json = fs::read_to_string(out_dir.join(format!("{kind}.json"))).unwrap();
        let csv = fs::read_to_string(out_dir.join(format!("{kind}.csv"))).unwrap();
        match kind {
            "embed-mc" => {
                let r: Report<McRow> = read_json_report(&json).unwrap();
                assert_eq!(r.rows.len(), 8);
                assert_eq!(read_csv_report::<McRow>(&csv).unwrap(), r.rows);
            }
            "pair-audit" => {
                let r: Report<PairRow> = read_json_report(&json).unwrap();
                assert_eq!(r.rows.len(), 6);
                assert_eq!(read_csv_report::<PairRow>(&csv).unwrap(), r.rows);
            }
            _ => {
                let r: Report<WorstTreeRow> = read_json_report(&json).unwrap();
                assert_eq!(r.rows.len(), 1);
                assert_eq!(read_csv_report::<WorstTreeRow>(&csv).unwrap(), r.rows);
            }
        }
    }
}

#[test]
fn strategy_sweep_is_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.toml",
        "kind = \"strategy-sweep\"\nmaster_seed = 42\n[params]\nn = 12\nbudget = 16\nepisodes = 10000\n",
    );
    let mut files = Vec::new();
    for (k, threads) in ["1", "3"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{k}"));
        let out = bin()
            .arg("run")
            .arg(&cfg)
            .args(["--threads", threads, "--out"])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        files.push((
            fs::read(out_dir.join("strategy-sweep.json")).unwrap(),
            fs::read(out_dir.join("strategy-sweep.csv")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
    let report: Report<SweepRow> =
        read_json_report(std::str::from_utf8(&files[0].0).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 5);
    for row in &report.rows {
        assert_eq!(row.episodes, 10_000);
        assert!(row.ok);
    }
}

#[test]
fn memory_cap_maps_to_resource_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "g.toml",
        "kind = \"graph-audit\"\nmaster_seed = 1\n[params]\nn = 20\nseeds = 1\n",
    );
    let out = bin()
        .env("GLUEDTREES_MAX_MEM_MB", "8")
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&out), exit_code::RESOURCE);
    let out = bin()
        .env("GLUEDTREES_MAX_MEM_MB", "8")
        .args(["oracle-script", "--n", "20", "--queries", "5"])
        .output()
        .unwrap();
    assert_eq!(code(&out), exit_code::RESOURCE);
}

#[test]
fn unreadable_config_is_a_failure() {
    let out = bin()
        .args(["run", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(code(&out), exit_code::FAILURE);
    let out = bin()
        .args(["validate", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(code(&out), exit_code::FAILURE);
}

#[test]
fn graph_file_and_script_agree() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.json");
    let out = bin()
        .args([
            "export-graph",
            "--n",
            "5",
            "--seed",
            "3",
            "--name-seed",
            "4",
            "--out",
        ])
        .arg(&file)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let from_file = bin()
        .args(["oracle-script", "--queries", "300", "--graph"])
        .arg(&file)
        .output()
        .unwrap();
    let direct = bin()
        .args([
            "oracle-script",
            "--n",
            "5",
            "--seed",
            "3",
            "--name-seed",
            "4",
            "--queries",
            "300",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&direct), 0);
    assert_eq!(from_file.stdout, direct.stdout);
}

#[test]
fn estimate_subcommand_emits_a_record() {
    let out = bin()
        .args([
            "estimate",
            "--n",
            "3",
            "--t",
            "6",
            "--shape",
            "path",
            "--graph-trials",
            "4",
            "--embed-trials",
            "64",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let record: gluedtrees::stats::EstimateRecord = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record.trials, 256);
    assert_eq!(record.parameters["shape"], "path");
}
