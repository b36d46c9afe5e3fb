use std::fs;
use std::path::Path;
use std::process::Command;

use adaspec_cli::{execute, CSV_HEADER};

fn run(args: &[&str]) -> i32 {
    let argv: Vec<String> = std::iter::once("adaspec").chain(args.iter().copied()).map(String::from).collect();
    execute(&argv)
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some(CSV_HEADER));
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

fn write_reads(path: &Path, seqs: &[(&str, &str)]) {
    let text: String = seqs.iter().map(|(id, s)| format!(">{id}\n{s}\n")).collect();
    fs::write(path, text).unwrap();
}

#[test]
fn crowd_topk_writes_one_row_per_budget_and_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let code = run(&[
        "--out", out.to_str().unwrap(), "crowd-topk", "--n", "40", "--k", "2", "--budgets", "4e3,8000", "--trials", "3",
    ]);
    assert_eq!(code, 0);
    let r = rows(&out);
    assert_eq!(r.len(), 4);
    let algos: Vec<&str> = r.iter().map(|x| x[0].as_str()).collect();
    assert_eq!(algos, ["adaptive", "nonadaptive", "adaptive", "nonadaptive"]);
    for row in &r {
        let budget: f64 = row[1].parse().unwrap();
        let pulls: f64 = row[6].parse().unwrap();
        assert!(pulls <= budget);
        assert_eq!(row[2], "3");
        assert_eq!(row[7], "7");
    }
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# crowd defaults\nn = 40\nk = 2\nbudgets = 4000\ntrials = 5\n").unwrap();
    let out = dir.path().join("curve.csv");
    let code = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "crowd-topk", "--trials", "2"]);
    assert_eq!(code, 0);
    let r = rows(&out);
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|row| row[1] == "4000" && row[2] == "2"));
}

#[test]
fn crowd_threshold_reports_both_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("thr.csv");
    let code = run(&["--out", out.to_str().unwrap(), "crowd-threshold", "--n", "100", "--trials", "2", "--constant-scale", "1e5"]);
    assert_eq!(code, 0);
    let r = rows(&out);
    assert_eq!(r.len(), 2);
    for row in &r {
        let err: f64 = row[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&err));
        assert_eq!(row[5], "NaN".to_lowercase());
    }
}

#[test]
fn sketch_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let fa = dir.path().join("reads.fa");
    write_reads(&fa, &[("r0", "ACGTACGTTTGACCATGACCAGTAGGACT"), ("r1", "TTGACCATGACCAGTAGGACTACGATCGA")]);
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    for out in [&a, &b] {
        let code = run(&["--out", out.to_str().unwrap(), "sketch", "--in", fa.to_str().unwrap(), "--kmer", "5", "--hashes", "32"]);
        assert_eq!(code, 0);
    }
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    assert_eq!(&bytes[..8], b"MHSKETCH");
}

#[test]
fn align_topk_stays_within_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("align.csv");
    let code = run(&[
        "--out", out.to_str().unwrap(), "align-topk", "--synthetic", "--reads", "40", "--genome", "4000", "--len", "500",
        "--k-top", "2", "--mid", "4", "--calibration", "5", "--k", "2", "--budgets", "4000,8000", "--trials", "2",
    ]);
    assert_eq!(code, 0);
    let r = rows(&out);
    assert_eq!(r.len(), 4);
    for row in &r {
        let budget: f64 = row[1].parse().unwrap();
        let pulls: f64 = row[6].parse().unwrap();
        assert!(pulls <= budget, "{row:?}");
    }
}

fn pseudo_genome(len: usize) -> String {
    let mut x = 0x2545_f491_4f6c_dd1du64;
    (0..len)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            b"ACGT"[(x >> 33) as usize % 4] as char
        })
        .collect()
}

#[test]
fn estimate_and_hardness_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let g = pseudo_genome(2000);
    let reference = dir.path().join("ref.fa");
    let reads = dir.path().join("reads.fa");
    write_reads(&reference, &[("ref", &g[..300])]);
    let offsets = [30, 90, 150, 210, 600, 1200];
    let names: Vec<String> = offsets.iter().map(|o| format!("at{o}")).collect();
    let seqs: Vec<(&str, &str)> = offsets.iter().zip(&names).map(|(&o, n)| (n.as_str(), &g[o..o + 300])).collect();
    write_reads(&reads, &seqs);
    let out = dir.path().join("est.csv");
    let code = run(&[
        "--out", out.to_str().unwrap(), "estimate", "--reference", reference.to_str().unwrap(), "--reads",
        reads.to_str().unwrap(), "--kmer", "10", "--hashes", "400",
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines[0], "id,u_hat,collision_rate");
    let body: Vec<Vec<&str>> = lines[1..].iter().map(|l| l.split(',').collect()).collect();
    assert_eq!(body.iter().map(|r| r[0]).collect::<Vec<_>>(), names);
    let rate: Vec<f64> = body.iter().map(|r| r[2].parse().unwrap()).collect();
    let u_hat: Vec<f64> = body.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(rate[..4].windows(2).all(|w| w[0] > w[1]), "{rate:?}");
    assert_eq!(&rate[4..], &[0.0, 0.0]);
    // larger overlap, fewer non-collisions
    assert!(u_hat[..3].windows(2).all(|w| w[0] < w[1]), "{u_hat:?}");
    assert!(u_hat.windows(2).all(|w| w[0] <= w[1]), "{u_hat:?}");

    let vals = dir.path().join("u.txt");
    fs::write(&vals, "0.9\n0.8, 0.5\n0.4\n").unwrap();
    let out = dir.path().join("h.csv");
    assert_eq!(run(&["--out", out.to_str().unwrap(), "hardness", "--values", vals.to_str().unwrap(), "--k", "2"]), 0);
    let text = fs::read_to_string(&out).unwrap();
    let last = text.lines().last().unwrap();
    // gaps 0.3 and 0.4 below u_(2) = 0.8: H2 = max(3 / 0.09, 4 / 0.16)
    let f: Vec<f64> = last.split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(&f[..3], &[4.0, 2.0, 0.8]);
    assert!((f[3] - 0.3).abs() < 1e-12);
    assert!((f[4] - 3.0 / 0.09).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    let bin = env!("CARGO_BIN_EXE_adaspec");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code().unwrap();
    assert_eq!(status(&["--help"]), 0);
    assert_eq!(status(&["--version"]), 0);
    assert_eq!(status(&["no-such-command"]), 1);
    assert_eq!(status(&["crowd-topk", "--budgets", "abc"]), 1);
    assert_eq!(status(&["crowd-topk", "--budgets", "1000", "--trials", "0"]), 1);
    assert_eq!(status(&["hardness"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.fa");
    let out = dir.path().join("s.bin");
    assert_eq!(status(&["--out", out.to_str().unwrap(), "sketch", "--in", missing.to_str().unwrap()]), 2);
    let bad = dir.path().join("bad.fa");
    fs::write(&bad, ">r0\nACGTNNXX\n").unwrap();
    assert_eq!(status(&["--out", out.to_str().unwrap(), "sketch", "--in", bad.to_str().unwrap()]), 2);
}
