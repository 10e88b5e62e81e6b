use std::path::Path;
use std::process::{Command, Output};

fn csrange(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csrange")).args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn gen_compress_recover_range_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let info = json(&ok(&csrange(&["gen", "--reference-out", "ref.sxs", "--out", "x.sxs", "--delay", "173"], d)));
    assert_eq!(info["truth_lag"], 173);
    ok(&csrange(&["compress", "--input", "x.sxs", "--reference", "ref.sxs", "--out", "pk.bin", "--alpha", "1.0"], d));
    ok(&csrange(&["recover", "--packets", "pk.bin", "--reference", "ref.sxs", "--out", "rec.json"], d));
    let est = json(&ok(&csrange(&["range", "--coefficients", "rec.json"], d)));
    assert_eq!(est["integer_offset"], 173);
    assert_eq!(est["valid"], true);
    let direct = json(&ok(&csrange(&["range", "--trace", "x.sxs", "--reference", "ref.sxs", "--method", "XCORR"], d)));
    assert_eq!(direct["integer_offset"], 173);
}

#[test]
fn dropped_packets_are_reported_missing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&csrange(&["gen", "--reference-out", "ref.sxs", "--out", "x.sxs", "--delay", "40"], d));
    let info = json(&ok(&csrange(&["compress", "--input", "x.sxs", "--buffers", "4", "--out", "pk.bin", "--drop", "2,3"], d)));
    assert_eq!(info["packets"], 2);
    let rec = json(&ok(&csrange(&["recover", "--packets", "pk.bin", "--reference", "ref.sxs"], d)));
    assert_eq!(rec["missing"], serde_json::json!([2, 3]));
}

#[test]
fn missing_input_exits_with_io_category() {
    let dir = tempfile::tempdir().unwrap();
    let out = csrange(&["compress", "--input", "absent.sxs", "--buffers", "2", "--out", "pk.bin"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[io]:"));
}

#[test]
fn corrupt_packets_exit_with_format_category() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("pk.bin"), b"SXC1 not really a packet").unwrap();
    ok(&csrange(&["gen", "--reference-out", "ref.sxs"], d));
    let out = csrange(&["recover", "--packets", "pk.bin", "--reference", "ref.sxs"], d);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[format]:"));
}

#[test]
fn bad_parameters_exit_with_parameter_category() {
    let dir = tempfile::tempdir().unwrap();
    let out = csrange(&["sweep", "--trials", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[parameter]:"));
}

#[test]
fn sweep_output_is_reproducible_and_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["sweep", "--methods", "SXCORR,STRUCT_SXCORR", "--alphas", "0.3", "--snr", "20:30", "--trials", "2"];
    let a = ok(&csrange(&args, d));
    let b = ok(&csrange(&args, d));
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert!(lines.next().unwrap().starts_with("# csrange sweep config_hash="));
    let header = lines.next().unwrap();
    for col in ["seed", "alpha", "method", "config_hash", "relative_error_m"] {
        assert!(header.split(',').any(|c| c == col), "{col}");
    }
    assert_eq!(lines.count(), 4);
}

#[test]
fn sweep_writes_summary_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["sweep", "--methods", "STRUCT_SXCORR", "--alphas", "0.3,0.5", "--snr", "20:30", "--trials", "1"];
    let mut full = args.to_vec();
    full.extend(["--out", "rows.csv", "--summary", "cells.csv", "--gnuplot", "plot.gp"]);
    ok(&csrange(&full, d));
    let cells = std::fs::read_to_string(d.join("cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 4);
    assert!(std::fs::read_to_string(d.join("plot.gp")).unwrap().contains("cells.csv"));
}

#[test]
fn sweep_reads_toml_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("cfg.toml"),
        "methods = [\"STRUCT_SXCORR\"]\nalphas = [0.3]\ntrials = 1\npresets = [\"CASE_B\"]\n\n[[snr_buckets]]\nlo = 10.0\nhi = 20.0\n",
    )
    .unwrap();
    let out = ok(&csrange(&["sweep", "--config", "cfg.toml"], d));
    let row = out.lines().nth(2).unwrap();
    assert!(row.starts_with("CASE_B,10.0,20.0,0.3,STRUCT_SXCORR"), "{row}");
}

#[test]
fn timing_table_has_cost_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&csrange(&["timing", "--n", "960", "--alphas", "0.3", "--buffers", "1,2", "--repeats", "1"], dir.path()));
    let ops: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ops, ["TD_XCORR", "FD_XCORR", "COMPRESS", "COMPRESS"]);
}

#[test]
fn localize_and_profile_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("sc.toml"),
        "anchors = [[0.0, 3.0], [2.0, 4.0], [-2.0, 4.0], [1.0, 6.0]]\nbeacon = [0.0, 0.0]\npreset = \"CASE_A\"\nloss_rates = [0.0]\nrounds = 2\n",
    )
    .unwrap();
    let out = ok(&csrange(&["localize", "--scenario", "sc.toml"], d));
    assert_eq!(out.lines().count(), 3);
    let out = ok(&csrange(&["profile", "--trials", "2"], d));
    assert_eq!(out.lines().count(), 7);
}

#[test]
fn help_lists_subcommands_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let top = ok(&csrange(&["--help"], dir.path()));
    for sub in ["gen", "compress", "recover", "range", "sweep", "timing", "localize", "profile"] {
        assert!(top.contains(sub), "{sub}");
    }
    let sweep = ok(&csrange(&["sweep", "--help"], dir.path()));
    for flag in ["--config", "--methods", "--alphas", "--snr", "--presets", "--trials", "--seed", "--buffers-compare", "--gnuplot"] {
        assert!(sweep.contains(flag), "{flag}");
    }
}
