use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn srcr() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_srcr"));
    c.env_remove("SRCR_FIXTURES").env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    srcr().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/paper_tables")
}

fn write_matrix(dir: &Path, name: &str, rows: usize, cols: usize, seed: u64) -> PathBuf {
    // small deterministic pseudo-random entries
    let mut s = seed;
    let mut text = String::new();
    for _ in 0..rows {
        let cells: Vec<String> = (0..cols)
            .map(|_| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                format!(
                    "{:.4}",
                    ((s >> 33) as f64 / (1u64 << 31) as f64) * 2.0 - 1.0
                )
            })
            .collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn tcr_single_value() {
    let o = run(&["tcr", "--sparsity", "1/4", "--bits", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "81.25%\n");
    let o = run(&["tcr", "--sparsity", "33.333%", "--bits", "3"]);
    assert_eq!(stdout(&o), "87.5%\n");
    let o = run(&["tcr", "--pattern", "2:8", "--bits", "4"]);
    assert_eq!(stdout(&o), "81.25%\n");
}

#[test]
fn tcr_table_has_twenty_cells() {
    let o = run(&["tcr", "--table", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "bits,s=0,s=1/4,s=1/3,s=1/2");
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[3], "4,75%,81.25%,83.3333%,87.5%");
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = run(&["tcr", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Usage"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_bits_is_usage_error() {
    assert_eq!(run(&["tcr", "--sparsity", "1/4"]).status.code(), Some(1));
}

#[test]
fn invalid_values_are_data_errors() {
    assert_eq!(
        run(&["tcr", "--sparsity", "3/2", "--bits", "4"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "tcr",
            "--sparsity",
            "1/3",
            "--pattern",
            "2:8",
            "--bits",
            "4"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&["retention", "--scores", "/nonexistent/dir"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn search_ranks_quarter_four_bit_first() {
    let f = fixtures();
    let o = run(&[
        "search",
        "--scores",
        f.to_str().unwrap(),
        "--model",
        "llama",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["config"], "s=1/4;q=4b");
    assert_eq!(v[0]["rank"], 1);
}

#[test]
fn json_output_has_no_log_text() {
    let o = run(&["report", "--model", "llama", "--format", "json", "-v"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["rows"].as_array().unwrap().len() > 10);
    // mean-column discrepancies are logged, on stderr only
    assert!(String::from_utf8_lossy(&o.stderr).contains("published mean"));
}

#[test]
fn manifest_records_digests_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let w = write_matrix(dir.path(), "w.csv", 8, 16, 1);
    let x = write_matrix(dir.path(), "x.csv", 16, 40, 2);
    let mut manifests = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("q{i}.csv"));
        let man = dir.path().join(format!("m{i}.json"));
        let o = run(&[
            "quantize",
            "--weights",
            w.to_str().unwrap(),
            "--calib",
            x.to_str().unwrap(),
            "--bits",
            "3",
            "--group-size",
            "8",
            "--out",
            out.to_str().unwrap(),
            "--manifest",
            man.to_str().unwrap(),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(Path::new(&format!("{}.json", out.display())).exists());
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&man).unwrap()).unwrap();
        manifests.push(m);
    }
    let (a, b) = (&manifests[0], &manifests[1]);
    assert_eq!(a["subcommand"], "quantize");
    assert_eq!(a["input_digests"], b["input_digests"]);
    assert_eq!(a["stdout_sha256"], b["stdout_sha256"]);
    let digests = |m: &serde_json::Value| -> Vec<String> {
        m["output_paths"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["sha256"].as_str().unwrap().to_string())
            .collect()
    };
    assert_eq!(digests(a), digests(b));
    assert_eq!(a["input_digests"].as_array().unwrap().len(), 2);
}

#[test]
fn output_flag_writes_file_instead_of_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.md");
    let o = run(&["tcr", "--table", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(&out)
        .unwrap()
        .starts_with("| bits |"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("srcr.toml");
    std::fs::write(
        &cfg,
        "# run settings\nsparsity = \"1/2\"\nbits = 8\nformat = json\n",
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "tcr"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tcr"], "3/4");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "tcr",
        "--bits",
        "4",
        "--format",
        "md",
    ]);
    assert_eq!(stdout(&o), "87.5%\n");
    std::fs::write(&cfg, "no_such_flag = 1\n").unwrap();
    assert_eq!(
        run(&["--config", cfg.to_str().unwrap(), "tcr"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn prune_joint_and_mask_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let w = write_matrix(dir.path(), "w.csv", 8, 16, 3);
    let x = write_matrix(dir.path(), "x.csv", 16, 40, 4);
    let mask = dir.path().join("mask.csv");
    let o = run(&[
        "prune",
        "--weights",
        w.to_str().unwrap(),
        "--calib",
        x.to_str().unwrap(),
        "--pattern",
        "2:4",
        "--mask-out",
        mask.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mask_valid"], true);
    assert_eq!(v["achieved_sparsity"], 0.5);
    let zeros = std::fs::read_to_string(&mask)
        .unwrap()
        .split([',', '\n'])
        .filter(|c| *c == "0")
        .count();
    assert_eq!(zeros, 64);

    for (mode, expect_zero) in [("a", false), ("b", true)] {
        let o = run(&[
            "joint",
            "--weights",
            w.to_str().unwrap(),
            "--calib",
            x.to_str().unwrap(),
            "--sparsity",
            "0.5",
            "--bits",
            "4",
            "--mode",
            mode,
            "--format",
            "json",
        ]);
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        if expect_zero {
            assert_eq!(v["pruned_positions_nonzero"], 0);
            assert_eq!(v["final_sparsity"], 0.5);
        }
    }
}

#[test]
fn singular_hessian_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let z = dir.path().join("z.csv");
    std::fs::write(&z, "0,0\n0,0\n").unwrap();
    let o = run(&[
        "quantize",
        "--weights",
        z.to_str().unwrap(),
        "--calib",
        z.to_str().unwrap(),
        "--dampening",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn validate_errors_is_reproducible_across_job_counts() {
    let base = [
        "validate-errors",
        "--seeds",
        "3",
        "--out-dim",
        "8",
        "--in-dim",
        "16",
        "--samples",
        "64",
        "--format",
        "csv",
    ];
    let one = run(&[&base[..], &["--jobs", "1"]].concat());
    let three = run(&[&base[..], &["--jobs", "3"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(stdout(&one), stdout(&three));
    assert_eq!(stdout(&one).lines().count(), 1 + 3 * 2);
}

#[test]
fn fixture_env_overrides_bundled_tables() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("scores.csv"),
        "model,sparsity,bits,pattern,task,score,stderr\n\
         toy,0,16,none,bbh,50,0.5\n\
         toy,1/4,4,unstructured,bbh,40,0.5\n",
    )
    .unwrap();
    let o = srcr()
        .env("SRCR_FIXTURES", dir.path())
        .args(["search", "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["model"], "toy");
    assert!((v[0]["sr"].as_f64().unwrap() - 0.8).abs() < 1e-12);
}

#[test]
fn report_writes_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "report",
        "--model",
        "mistral",
        "--figure",
        "joint-vs-quant",
        "--plot-dir",
        dir.path().to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("joint-vs-quant.csv")).unwrap();
    assert_eq!(csv, stdout(&o));
    assert!(
        std::fs::read_to_string(dir.path().join("joint-vs-quant.svg"))
            .unwrap()
            .starts_with("<svg")
    );
}

#[test]
fn srcr_direct_mode() {
    let o = run(&[
        "srcr",
        "--sparsity",
        "1/4",
        "--bits",
        "4",
        "--sr",
        "0.8",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["srcr"].as_f64().unwrap() - 0.2).abs() < 1e-12);
}
