//! End-to-end tests of the command-line interface: the gen | compress
//! pipeline, determinism of outputs, the lossless tightness check, the
//! verification battery and the error paths.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use cdmine::compress::deserialize;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cdmine")
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cdmine-cli-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .stdin(Stdio::null())
        .output()
        .expect("failed to spawn cdmine")
}

fn run_ok(args: &[&str]) -> Vec<u8> {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

#[test]
fn gen_compress_pipeline_produces_200_records() {
    let dir = workdir("pipeline");
    let data = dir.join("data.csv");
    let db = dir.join("db.cmn");
    run_ok(&[
        "gen",
        "--kind",
        "sparsified",
        "--n",
        "200",
        "--N",
        "1024",
        "--s",
        "16",
        "--seed",
        "7",
        "--output",
        data.to_str().unwrap(),
    ]);
    run_ok(&[
        "compress",
        "--basis",
        "dft",
        "--s",
        "16",
        "--input",
        data.to_str().unwrap(),
        "--output",
        db.to_str().unwrap(),
    ]);
    let records = deserialize(&fs::read(&db).unwrap()).unwrap();
    assert_eq!(records.len(), 200);
    assert_eq!(records[0].n(), 1024);
    assert_eq!(records[0].kept(), 16);
}

#[test]
fn identical_invocations_are_byte_identical() {
    let a = run_ok(&["gen", "--kind", "periodic-mixture", "--n", "10", "--N", "64", "--seed", "3"]);
    let b = run_ok(&["gen", "--kind", "periodic-mixture", "--n", "10", "--N", "64", "--seed", "3"]);
    assert_eq!(a, b);

    let dir = workdir("determinism");
    let data = dir.join("data.csv");
    fs::write(&data, String::from_utf8(a).unwrap()).unwrap();
    let t1 = run_ok(&[
        "tightness",
        "--input",
        data.to_str().unwrap(),
        "--s-list",
        "4,8",
        "--pairs",
        "20",
        "--seed",
        "5",
    ]);
    let t2 = run_ok(&[
        "tightness",
        "--input",
        data.to_str().unwrap(),
        "--s-list",
        "4,8",
        "--pairs",
        "20",
        "--seed",
        "5",
    ]);
    assert_eq!(t1, t2);
}

#[test]
fn tightness_lossless_rows_are_exactly_one() {
    let dir = workdir("lossless");
    let data = dir.join("data.csv");
    run_ok(&[
        "gen",
        "--kind",
        "random-walk",
        "--n",
        "8",
        "--N",
        "16",
        "--seed",
        "2",
        "--output",
        data.to_str().unwrap(),
    ]);
    // 16-point DFT stores 9 half-spectrum bins; s = 9 is lossless.
    let csv = String::from_utf8(run_ok(&[
        "tightness",
        "--input",
        data.to_str().unwrap(),
        "--s-list",
        "9",
        "--pairs",
        "10",
        "--seed",
        "1",
    ]))
    .unwrap();
    let mut bound_rows = 0;
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let (method, metric, value) = (cells[0], cells[3], cells[4].parse::<f64>().unwrap());
        if (method == "optimal" || method == "first") && (metric == "lb_norm" || metric == "ub_norm")
        {
            assert!(
                (value - 1.0).abs() < 1e-9,
                "lossless {method}/{metric} = {value}"
            );
            bound_rows += 1;
        }
    }
    assert!(bound_rows > 0);
}

#[test]
fn verify_passes_and_reports_small_residuals() {
    let csv = String::from_utf8(run_ok(&[
        "verify",
        "--instances",
        "300",
        "--grid-instances",
        "40",
        "--seed",
        "1",
    ]))
    .unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[4], "1", "check {} failed: {line}", cells[0]);
        if cells[0] == "alternating_oracle" {
            let dev: f64 = cells[2].parse().unwrap();
            assert!(dev < 1e-6, "oracle deviation {dev}");
        }
        rows += 1;
    }
    assert_eq!(rows, 4);
}

#[test]
fn signature_sums_columns() {
    let dir = workdir("signature");
    let img = dir.join("img.csv");
    fs::write(&img, "0,1,0,1\n1,1,0,0\n0,1,0,1\n").unwrap();
    let out = String::from_utf8(run_ok(&["signature", "--input", img.to_str().unwrap()])).unwrap();
    assert_eq!(out.trim(), "1,3,0,2");
}

#[test]
fn knn_kmeans_index_smoke() {
    let dir = workdir("mining");
    let data = dir.join("data.csv");
    let queries = dir.join("queries.csv");
    let db = dir.join("db.cmn");
    let qdb = dir.join("q.cmn");
    run_ok(&["gen", "--kind", "periodic-mixture", "--n", "60", "--N", "64", "--seed", "4", "--output", data.to_str().unwrap()]);
    run_ok(&["gen", "--kind", "periodic-mixture", "--n", "5", "--N", "64", "--seed", "9", "--output", queries.to_str().unwrap()]);
    run_ok(&["compress", "--basis", "dft", "--s", "8", "--input", data.to_str().unwrap(), "--output", db.to_str().unwrap()]);
    run_ok(&["compress", "--basis", "dft", "--s", "8", "--input", queries.to_str().unwrap(), "--output", qdb.to_str().unwrap()]);

    let knn = String::from_utf8(run_ok(&[
        "knn", "--db", db.to_str().unwrap(), "--query-db", qdb.to_str().unwrap(), "--k", "3",
    ]))
    .unwrap();
    assert_eq!(knn.lines().count(), 1 + 5 * 3);

    let knn_rp = String::from_utf8(run_ok(&[
        "knn", "--method", "brp", "--data", data.to_str().unwrap(), "--queries",
        queries.to_str().unwrap(), "--budget-s", "8", "--k", "3", "--seed", "2",
    ]))
    .unwrap();
    assert_eq!(knn_rp.lines().count(), 1 + 5 * 3);

    let km = String::from_utf8(run_ok(&[
        "kmeans", "--db", db.to_str().unwrap(), "--k", "3", "--seed", "1", "--data",
        data.to_str().unwrap(),
    ]))
    .unwrap();
    let assignments = km.lines().filter(|l| l.starts_with("assignment,")).count();
    assert_eq!(assignments, 60);
    assert!(km.lines().any(|l| l.starts_with("objective,")));

    let container = dir.join("indexed.cmn");
    let idx = String::from_utf8(run_ok(&[
        "index", "--db", db.to_str().unwrap(), "--query-db", qdb.to_str().unwrap(), "--k", "3",
        "--bucket", "4", "--seed", "1", "--save", container.to_str().unwrap(),
    ]))
    .unwrap();
    assert!(idx.lines().any(|l| l.starts_with("conservative,") && l.contains("pruning_power")));
    assert!(idx.lines().any(|l| l.starts_with("aggressive,") && l.contains("pruning_power")));
    assert!(idx.lines().any(|l| l.starts_with("aggressive,") && l.contains("precision")));

    // Reload the saved container and get identical output.
    let idx2 = String::from_utf8(run_ok(&[
        "index", "--load", container.to_str().unwrap(), "--query-db", qdb.to_str().unwrap(),
        "--k", "3",
    ]))
    .unwrap();
    assert_eq!(idx, idx2);
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = workdir("errors");
    let data = dir.join("data.csv");
    fs::write(&data, "1,2,3,4\n5,6,7,8\n").unwrap();
    // s beyond the storable bins.
    let out = run(&[
        "compress", "--basis", "dft", "--s", "99", "--input", data.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid input"));

    // Corrupt database.
    let db = dir.join("db.cmn");
    run_ok(&[
        "compress", "--basis", "dft", "--s", "2", "--input", data.to_str().unwrap(),
        "--output", db.to_str().unwrap(),
    ]);
    let mut bytes = fs::read(&db).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    fs::write(&db, &bytes).unwrap();
    let out = run(&["bounds", "--db", db.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum mismatch"));
}
