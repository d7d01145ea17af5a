use std::fs;
use std::path::Path;
use std::process::Command as Process;

use binq::bench::gen_correlated;
use binq::cli::*;
use binq::codec::{self, CompressedDataset, Standardization};
use binq::codes::CodeMatrix;
use binq::encoder::Dictionary;
use binq::stats;
use binq::BitCode;
use clap::Parser;
use nalgebra::DMatrix;

fn parse(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("binq").chain(args.iter().copied())).unwrap()
}

fn run_args(args: &[&str]) -> (Result<(), CliError>, String) {
    let mut out = Vec::new();
    let r = run(&parse(args), &mut out);
    (r, String::from_utf8(out).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_data(path: &Path, n: usize, d: usize, rho: f64, seed: u64) -> DMatrix<f64> {
    let data = gen_correlated(n, d, rho, seed).unwrap();
    write_table(path, &data, TableFormat::Text).unwrap();
    data
}

const FAST: &[&str] = &["--epochs", "3", "--batch-size", "40"];

fn compress_args<'a>(input: &'a str, output: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["compress", input, "-o", output, "--nq", "6"];
    v.extend_from_slice(FAST);
    v.extend_from_slice(extra);
    v
}

#[test]
fn compress_decompress_reproduces_reported_q2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    let binq = dir.path().join("x.binq");
    let back = dir.path().join("back.txt");
    let json = dir.path().join("r.json");
    let data = write_data(&input, 200, 4, 0.9, 1);
    let (r, text) = run_args(&compress_args(s(&input), s(&binq), &["--nbc", "20", "--nbin", "10", "--json", s(&json)]));
    r.unwrap();
    assert!(text.contains("Q2"));
    run_args(&["decompress", s(&binq), "-o", s(&back)]).0.unwrap();
    let recon = read_table(&back, TableFormat::Text).unwrap();
    let q2 = stats::q_squared(&data, &recon).unwrap();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!((q2 - report["q2"].as_f64().unwrap()).abs() <= 1e-10);
    for key in ["n", "d", "n_q_total", "n_bc", "n_bin", "q2", "per_component_ratio", "payload_bits", "total_bits",
        "bits_per_sample", "predicted_error_increase", "stages", "solver", "seed", "command"] {
        assert!(report.get(key).is_some(), "missing key {key}");
    }
    assert_eq!(report["payload_bits"], 200 * 6);
    assert_eq!(report["total_bits"].as_u64().unwrap(), fs::metadata(&binq).unwrap().len() * 8);
}

#[test]
fn decompressed_text_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    let binq = dir.path().join("x.binq");
    write_data(&input, 100, 3, 0.9, 2);
    run_args(&compress_args(s(&input), s(&binq), &[])).0.unwrap();
    let ds = codec::read_bytes(&fs::read(&binq).unwrap()).unwrap();
    for (fmt, name) in [("text", "a.txt"), ("f64", "a.f64")] {
        let out = dir.path().join(name);
        run_args(&["decompress", s(&binq), "-o", s(&out), "--format", fmt]).0.unwrap();
        let fmt = if fmt == "text" { TableFormat::Text } else { TableFormat::F64 };
        assert_eq!(read_table(&out, fmt).unwrap(), ds.decompress());
    }
}

#[test]
fn fixed_seed_gives_identical_files_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    write_data(&input, 120, 4, 0.95, 3);
    let mut files = Vec::new();
    for (i, threads) in ["1", "2", "4"].iter().enumerate() {
        let out = dir.path().join(format!("{i}.binq"));
        let mut args = compress_args(s(&input), s(&out), &["--solver", "sa", "--num-reads", "8", "--sweeps", "50", "--seed", "5", "--nbc", "12"]);
        let out_s = out.to_str().unwrap().to_string();
        args.extend_from_slice(&["--threads", threads]);
        run_args(&args).0.unwrap();
        files.push(fs::read(&out_s).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn report_with_original_matches_compress_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    let binq = dir.path().join("x.binq");
    write_data(&input, 200, 3, 0.9, 4);
    let cli = parse(&compress_args(s(&input), s(&binq), &["--nbc", "20"]));
    let Command::Compress(args) = &cli.command else { unreachable!() };
    let from_compress = cmd_compress(args, &ConfigFile::default(), &mut Vec::new()).unwrap();
    let cli = parse(&["report", s(&binq), "--original", s(&input)]);
    let Command::Report(args) = &cli.command else { unreachable!() };
    let outcome = cmd_report(args, &ConfigFile::default(), &mut Vec::new()).unwrap();
    assert_eq!(outcome.report.unwrap(), from_compress);
    assert_eq!(outcome.means.len(), 3);
    assert!(outcome.means.iter().all(|m| m.corrected.n_bin == 20));
}

#[test]
fn report_on_perfect_reconstruction_has_zero_corrections() {
    let dir = tempfile::tempdir().unwrap();
    let binq = dir.path().join("p.binq");
    let dict = Dictionary::from_rows(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
    let codes: Vec<BitCode> = (0..8).map(|k| BitCode::from_index(k % 4, 2)).collect();
    let codes = CodeMatrix::from_codes(2, &codes).unwrap();
    let recon = binq::learn::reconstruct_all(&dict, &codes);
    let idx = vec![0, 4];
    let bc = DMatrix::from_fn(2, 2, |r, c| recon[(idx[r], c)]);
    let ds = CompressedDataset::new(Standardization::identity(2), vec![dict], codes, idx, bc).unwrap();
    fs::write(&binq, codec::write_bytes(&ds)).unwrap();
    let cli = parse(&["report", s(&binq)]);
    let Command::Report(args) = &cli.command else { unreachable!() };
    let outcome = cmd_report(args, &ConfigFile::default(), &mut Vec::new()).unwrap();
    assert!(outcome.report.is_none());
    assert_eq!(outcome.means.len(), 2);
    assert!(outcome.means.iter().all(|m| m.correction() == 0.0));
}

#[test]
fn report_without_retained_samples() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    let binq = dir.path().join("x.binq");
    write_data(&input, 80, 2, 0.5, 5);
    run_args(&compress_args(s(&input), s(&binq), &[])).0.unwrap();
    let (r, text) = run_args(&["report", s(&binq)]);
    r.unwrap();
    assert!(text.contains("no retained originals"));
}

#[test]
fn report_rejects_shape_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    let other = dir.path().join("y.txt");
    let binq = dir.path().join("x.binq");
    write_data(&input, 80, 2, 0.5, 6);
    write_data(&other, 80, 3, 0.5, 6);
    run_args(&compress_args(s(&input), s(&binq), &[])).0.unwrap();
    let err = run_args(&["report", s(&binq), "--original", s(&other)]).0.unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn corrupt_binq_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.binq");
    fs::write(&bad, b"BINQ\x01\x00garbage").unwrap();
    let err = run_args(&["decompress", s(&bad), "-o", s(&dir.path().join("o.txt"))]).0.unwrap_err();
    assert_eq!(err.exit_code(), 3);
    fs::write(&bad, b"NOPE").unwrap();
    let err = run_args(&["report", s(&bad)]).0.unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    let binq = dir.path().join("x.binq");
    write_data(&input, 80, 2, 0.5, 7);
    let before = fs::read(&input).unwrap();
    run_args(&compress_args(s(&input), s(&binq), &[])).0.unwrap();
    assert_eq!(fs::read(&input).unwrap(), before);
    let b = fs::read(&binq).unwrap();
    run_args(&["report", s(&binq), "--original", s(&input)]).0.unwrap();
    assert_eq!(fs::read(&binq).unwrap(), b);
}

#[test]
fn gendata_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    run_args(&["bench", "gendata", "-n", "50", "-d", "3", "--rho", "0.7", "--seed", "9", "-o", s(&a)]).0.unwrap();
    run_args(&["bench", "gendata", "-n", "50", "-d", "3", "--rho", "0.7", "--seed", "9", "-o", s(&b)]).0.unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(read_table(&a, TableFormat::Text).unwrap(), gen_correlated(50, 3, 0.7, 9).unwrap());
}

#[test]
fn appendix_bench_follows_the_ideal_line() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("a.jsonl");
    let cli = parse(&["bench", "appendix", "--nq", "6,8,10", "--samples", "4000", "--json", s(&json)]);
    let Command::Bench(BenchCommand::Appendix(args)) = &cli.command else { unreachable!() };
    let outcome = cmd_bench_appendix(args, &ConfigFile::default(), &mut Vec::new()).unwrap();
    for p in &outcome.points {
        let ideal = 2f64.powi(-(p.n_q as i32 + 2));
        assert!((p.mean / ideal - 1.0).abs() < 0.1, "n_q {}: {}", p.n_q, p.mean);
    }
    let fit = outcome.fit.unwrap();
    assert!((fit.a - 0.5).abs() < 0.02);
    let lines = fs::read_to_string(&json).unwrap();
    assert_eq!(lines.lines().count(), 4);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["kind"], "appendix");
}

#[test]
fn compare_q2_falls_with_more_bits() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    write_data(&input, 300, 8, 0.95, 8);
    let cli = parse(&["bench", "compare", s(&input), "--nq", "2,4,8", "--epochs", "6", "--pca-nz", "1"]);
    let Command::Bench(BenchCommand::Compare(args)) = &cli.command else { unreachable!() };
    let points = cmd_bench_compare(args, &ConfigFile::default(), &mut Vec::new()).unwrap();
    let binary: Vec<f64> = points.iter().filter(|p| p.method == "binary").map(|p| p.q2).collect();
    assert_eq!(binary.len(), 3);
    assert!(binary.windows(2).all(|w| w[1] <= w[0]), "{binary:?}");
    assert!(points.iter().any(|p| p.method == "pca" && p.bits_per_sample == 32));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    let cfg = dir.path().join("c.json");
    let a = dir.path().join("a.binq");
    let b = dir.path().join("b.binq");
    write_data(&input, 80, 2, 0.5, 10);
    fs::write(&cfg, r#"{"nq": 5, "epochs": 2, "batch_size": 40, "seed": 3}"#).unwrap();
    run_args(&["--config", s(&cfg), "compress", s(&input), "-o", s(&a)]).0.unwrap();
    run_args(&["compress", s(&input), "-o", s(&b), "--nq", "5", "--epochs", "2", "--batch-size", "40", "--seed", "3"]).0.unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(codec::read_bytes(&fs::read(&a).unwrap()).unwrap().n_q_total(), 5);
    fs::write(&cfg, r#"{"bits": 5}"#).unwrap();
    assert_eq!(run_args(&["--config", s(&cfg), "compress", s(&input), "-o", s(&a)]).0.unwrap_err().exit_code(), 2);
}

fn binary() -> Process {
    Process::new(env!("CARGO_BIN_EXE_binq"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    let out = dir.path().join("x.binq");

    let status = binary().args(["compress", "--bogus"]).output().unwrap().status;
    assert_eq!(status.code(), Some(2));

    fs::write(&input, "1 2\n3 oops\n").unwrap();
    let res = binary().args(["compress", s(&input), "-o", s(&out)]).output().unwrap();
    assert_eq!(res.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("line 2, column 2"), "{stderr}");

    fs::write(&input, "1 5\n1 6\n1 7\n1 8\n").unwrap();
    let res = binary().args(["compress", s(&input), "-o", s(&out), "--nq", "2", "--batch-size", "2"]).output().unwrap();
    assert_eq!(res.status.code(), Some(4), "{}", String::from_utf8_lossy(&res.stderr));

    let res = binary().args(["compress", s(&input), "-o", s(&out), "--nq", "30"]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));

    write_data(&input, 60, 2, 0.5, 11);
    let res = binary().args(["compress", s(&input), "-o", s(&out), "--nq", "3", "--epochs", "2"]).output().unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
}
