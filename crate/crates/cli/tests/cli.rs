use std::path::Path;
use std::process::{Command, Output};

use bdr::cost::read_cost_points_csv;
use bdr::io::{load_tensor, save_tensor};
use bdr::{estimate_qsnr, preset, sample_vector, DistributionSpec, Tensor};
use serde_json::Value;

fn bdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdr")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = bdr(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    bdr(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn bound(args: &[&str]) -> f64 {
    let mut full = vec!["bound"];
    full.extend_from_slice(args);
    ok(&full).trim().parse().unwrap()
}

#[test]
fn bound_examples() {
    assert!((bound(&["--preset", "MX9", "--n", "1024"]) - 34.74).abs() < 0.005);
    assert!((bound(&["--m", "2", "--k1", "16", "--k2", "2", "--d2", "1", "--n", "16"]) - 4.64).abs() < 0.005);
    // a single-level block collapses to 6.02m - 10 log10(k1)
    assert!((bound(&["--m", "7", "--k1", "16", "--d2", "0", "--n", "1024"]) - 30.10).abs() < 0.005);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["bound", "--help"]), 0);
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["bound", "--n", "16"]), 1);
    assert_eq!(code(&["bound", "--preset", "MX9", "--m", "3", "--n", "16"]), 1);
    assert_eq!(code(&["bound", "--preset", "NOPE", "--n", "16"]), 2);
    assert_eq!(code(&["bound", "--preset", "FP8-E4M3", "--n", "16"]), 2);
    assert_eq!(code(&["bound", "--m", "2", "--k1", "16", "--k2", "3", "--d2", "1", "--n", "16"]), 2);
    assert_eq!(code(&["qsnr", "--preset", "MX9", "--dist", "cauchy"]), 2);
}

#[test]
fn thread_cap_is_validated() {
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_bdr"))
            .args(["qsnr", "--preset", "MX6", "--n-vectors", "8", "--len", "64"])
            .env("BDR_THREADS", v)
            .output()
            .unwrap()
    };
    assert_eq!(run("zero").status.code(), Some(1));
    assert_eq!(run("0").status.code(), Some(1));
    let one = run("1");
    assert!(one.status.success());
    let env_free = ok(&["qsnr", "--preset", "MX6", "--n-vectors", "8", "--len", "64"]);
    assert_eq!(String::from_utf8(one.stdout).unwrap(), env_free);
}

fn quantize_report(dir: &Path, t: &Tensor, args: &[&str]) -> (Value, Tensor) {
    let (input, output) = (dir.join("in.bdrt"), dir.join("out.bdrt"));
    save_tensor(&input, t).unwrap();
    let mut full = vec!["quantize", "--input", p(&input), "--output", p(&output)];
    full.extend_from_slice(args);
    let report: Value = serde_json::from_str(&ok(&full)).unwrap();
    (report, load_tensor(&output).unwrap())
}

#[test]
fn quantize_on_grid_tensor_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let t = Tensor::new(vec![4, 8], (0..32).map(|i| f64::from(i % 9) - 4.0).collect()).unwrap();
    let (report, out) = quantize_report(dir.path(), &t, &["--preset", "MX9"]);
    assert_eq!(report["qsnr_db"], "inf");
    assert_eq!(report["max_abs_err"], 0.0);
    assert_eq!(report["preset"], "MX9");
    assert_eq!(report["axis"], 1);
    assert_eq!(out, t);
}

#[test]
fn quantize_zero_tensor_reports_null_qsnr() {
    let dir = tempfile::tempdir().unwrap();
    let t = Tensor::new(vec![16], vec![0.0; 16]).unwrap();
    for name in ["MX6", "FP8-E4M3", "INT8", "VSQ(4)"] {
        let (report, out) = quantize_report(dir.path(), &t, &["--preset", name]);
        assert!(report["qsnr_db"].is_null(), "{name}");
        assert_eq!(out, t);
    }
}

#[test]
fn quantize_gaussian_tensor_matches_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let dist = DistributionSpec::parse("gaussian:1", 5).unwrap();
    let t = Tensor::new(vec![1024], sample_vector(&dist, 1024)).unwrap();
    let (report, _) = quantize_report(dir.path(), &t, &["--preset", "MX9", "--report", p(&dir.path().join("r.json"))]);
    let measured = report["qsnr_db"].as_f64().unwrap();
    let expected = estimate_qsnr(&preset("MX9").unwrap(), &DistributionSpec::gaussian_variable_variance(0), 1000, 1024)
        .unwrap()
        .mean_db;
    assert!((measured - expected).abs() <= 3.0, "{measured} vs {expected}");
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn quantize_axis_selects_block_direction() {
    let dir = tempfile::tempdir().unwrap();
    // one huge value per row: blocking along rows crushes its row-mates,
    // blocking along columns leaves them alone
    let mut data = vec![1.0; 16 * 16];
    for r in 0..16 {
        data[r * 16] = 1048576.0;
    }
    let t = Tensor::new(vec![16, 16], data).unwrap();
    let (along_rows, _) = quantize_report(dir.path(), &t, &["--preset", "MX4", "--axis", "-1"]);
    let (along_cols, _) = quantize_report(dir.path(), &t, &["--preset", "MX4", "--axis", "0"]);
    assert_eq!(along_cols["axis"], 0);
    assert_eq!(along_cols["qsnr_db"], "inf");
    assert!(along_rows["max_abs_err"].as_f64().unwrap() >= 1.0);
    assert_eq!(code(&["quantize", "--input", "x", "--output", "y", "--preset", "MX9", "--axis", "2"]), 2);
}

#[test]
fn quantize_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.bdrt");
    std::fs::write(&bad, b"NOPE\x01\x00").unwrap();
    let out = dir.path().join("out.bdrt");
    assert_eq!(code(&["quantize", "--input", p(&bad), "--output", p(&out), "--preset", "MX9"]), 2);
    let t = Tensor::new(vec![4], vec![1.0; 4]).unwrap();
    let good = dir.path().join("good.bdrt");
    save_tensor(&good, &t).unwrap();
    assert_eq!(code(&["quantize", "--input", p(&good), "--output", p(&out), "--preset", "MX10"]), 2);
    assert!(!out.exists());
}

#[test]
fn qsnr_csv_is_deterministic() {
    let args = ["qsnr", "--preset", "MX9", "--preset", "fp8-e5m2", "--n-vectors", "50", "--len", "128", "--seed", "3"];
    let first = ok(&args);
    assert_eq!(first, ok(&args));
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("format,distribution"));
    assert!(lines[1].starts_with("MX9,"));
    assert!(lines[2].starts_with("FP8-E5M2,"));
}

#[test]
fn dot_matches_reference_with_wide_accumulator() {
    let out: Value = serde_json::from_str(&ok(&["dot", "--preset", "MX6", "--len", "512", "--acc-bits", "126"])).unwrap();
    assert_eq!(out["overflow"], false);
    assert_eq!(out["value"], out["reference"]);
    assert_eq!(out["accumulation_error"], 0.0);

    let narrow: Value = serde_json::from_str(&ok(&["dot", "--preset", "MX6", "--len", "512"])).unwrap();
    let (v, r) = (narrow["value"].as_f64().unwrap(), narrow["reference"].as_f64().unwrap());
    // the natural 15-bit register floors every aligned partial
    assert_eq!(narrow["acc_bits"], 15);
    assert!(v <= r, "{v} > {r}");

    assert_eq!(code(&["dot", "--preset", "INT8"]), 2);
    assert_eq!(code(&["dot", "--preset", "MX9", "--len", "100"]), 2);
}

#[test]
fn dot_reads_tensor_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.bdrt"), dir.path().join("b.bdrt"));
    save_tensor(&a, &Tensor::new(vec![16], (1..=16).map(f64::from).collect()).unwrap()).unwrap();
    save_tensor(&b, &Tensor::new(vec![16], vec![0.5; 16]).unwrap()).unwrap();
    let out: Value = serde_json::from_str(&ok(&["dot", "--preset", "MX9", "--a", p(&a), "--b", p(&b)])).unwrap();
    assert_eq!(out["value"], 68.0);
    assert_eq!(out["unquantized"], 68.0);
}

#[test]
fn sweep_resumes_and_feeds_pareto() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let grid = ["--m", "2,4", "--d2", "0,1", "--k1", "8,16", "--k2", "2", "--n-vectors", "20", "--len", "64"];
    let mut args = vec!["sweep", "--out", p(&csv)];
    args.extend_from_slice(&grid);
    ok(&args);
    let first = std::fs::read(&csv).unwrap();
    let rows = read_cost_points_csv(&first[..]).unwrap();
    assert_eq!(rows.len(), 8 + 16);
    assert!(rows.iter().any(|r| r.name == "MX4"));

    // an interrupted run leaves a partial last line; the rerun completes it
    std::fs::write(&csv, &first[..first.len() - 25]).unwrap();
    ok(&args);
    assert_eq!(std::fs::read(&csv).unwrap(), first);

    let mut different = args.clone();
    different.extend_from_slice(&["--seed", "9"]);
    assert_eq!(code(&different), 2);

    let front_csv = dir.path().join("front.csv");
    ok(&["pareto", "--input", p(&csv), "--out", p(&front_csv)]);
    let front = read_cost_points_csv(std::fs::File::open(&front_csv).unwrap()).unwrap();
    assert!(!front.is_empty() && front.len() < rows.len());
    for f in &front {
        assert!(rows.contains(f), "{} did not round-trip", f.name);
    }
    assert_eq!(ok(&["pareto", "--input", p(&csv)]), std::fs::read_to_string(&front_csv).unwrap());
}

#[test]
fn sweep_dry_run_lists_plan() {
    let out = bdr(&["sweep", "--out", "unused.csv", "--dry-run", "--no-baselines", "--m", "3", "--d2", "1", "--k1", "16", "--k2", "2,32"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);
    assert!(String::from_utf8(out.stderr).unwrap().contains("warning: skipping"));
    assert!(!Path::new("unused.csv").exists());
}

#[test]
fn pareto_with_area_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("points.csv");
    std::fs::write(
        &csv,
        "name,qsnr_db,area,mem_cost,combined\nMX9,46.6,0.78,1.11,0.87\nMX6,28.4,0.35,1.0,0.35\nFP8,31.5,1.0,1.0,1.0\n",
    )
    .unwrap();
    let table = dir.path().join("areas.csv");
    std::fs::write(&table, "format,r,area_units\nFP8,256,100\nMX9,256,50\n").unwrap();
    let out = bdr(&["pareto", "--input", p(&csv), "--area-table", p(&table)]);
    assert!(out.status.success());
    let front = read_cost_points_csv(&out.stdout[..]).unwrap();
    let mx9 = front.iter().find(|p| p.name == "MX9").unwrap();
    assert_eq!(mx9.area, 0.5);
    assert!(String::from_utf8(out.stderr).unwrap().contains("keep the proxy"));
}

#[test]
fn verify_passes_small_suite() {
    let out = ok(&["verify", "--configs", "6", "--n-vectors", "10", "--len", "256", "--seed", "4"]);
    assert!(out.contains("0 below the bound"), "{out}");
}
