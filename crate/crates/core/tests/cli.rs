use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sparsear::bench::read_bench;
use sparsear::io::{read_json, read_table, RunSummary};

fn sparsear(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsear")).args(args).output().unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn write_period3(dir: &Path) -> String {
    let p = path(dir, "p3.csv");
    let body: String = (0..30).map(|t| format!("{}\n", t % 3 + 1)).collect();
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn fits_periodic_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_period3(dir.path());
    let prefix = path(dir.path(), "out");
    let out = sparsear(&[
        "fit", "--model", "sar", "--input", &input, "--order", "6", "--sparsity", "1", "--solver", "mio",
        "--out-prefix", &prefix,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: RunSummary = read_json(format!("{prefix}.summary.json")).unwrap();
    assert_eq!(summary.omega, vec![3]);
    assert!(summary.objective <= 1e-12);
    assert!(summary.certified);
    let coef = read_table(format!("{prefix}.coef.csv")).unwrap();
    assert_eq!(coef.omega(), vec![3]);
    assert_eq!(coef.column("k").unwrap(), vec![3.0]);
    assert!((coef.column("w").unwrap()[0] - 1.0).abs() < 1e-12);
    assert!(String::from_utf8_lossy(&out.stdout).contains("omega={3}"));
}

#[test]
fn single_cell_grid_matches_univariate_fit() {
    let dir = tempfile::tempdir().unwrap();
    let series = path(dir.path(), "s.csv");
    let out = sparsear(&["gen", "--length", "150", "--lags", "1:0.3,7:0.5", "--noise", "0.1", "--seed", "4", "--out", &series]);
    assert!(out.status.success());

    // same values in long grid format
    let values = sparsear::io::read_univariate(&series, None).unwrap();
    let grid = path(dir.path(), "g.csv");
    let mut g = sparsear::GridSeries::empty(1, 1, vec![values.len()]).unwrap();
    g.set_cell(0, 0, 0, values).unwrap();
    sparsear::io::write_grid(&grid, &g).unwrap();

    let common = ["--order", "10", "--sparsity", "2", "--solver", "mio"];
    let sar = path(dir.path(), "sar");
    let stv = path(dir.path(), "stv");
    let a = sparsear(&[&["fit", "--model", "sar", "--input", &series, "--out-prefix", &sar][..], &common].concat());
    let b = sparsear(&[&["fit", "--model", "stvsar", "--input", &grid, "--out-prefix", &stv][..], &common].concat());
    assert!(a.status.success() && b.status.success());

    let sar_t = read_table(format!("{sar}.coef.csv")).unwrap();
    let stv_t = read_table(format!("{stv}.coef.csv")).unwrap();
    assert_eq!(sar_t.omega(), stv_t.omega());
    assert_eq!(sar_t.column("k").unwrap(), stv_t.column("k").unwrap());
    let (wa, wb) = (sar_t.column("w").unwrap(), stv_t.column("w").unwrap());
    for (x, y) in wa.iter().zip(&wb) {
        assert!((x - y).abs() <= 1e-10);
    }
}

#[test]
fn bench_rows_respect_solver_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    for (i, lags) in ["1:0.4,5:0.5", "2:0.3,12:0.6", "1:0.2,3:0.2,9:0.5"].iter().enumerate() {
        let f = path(&corpus, &format!("s{i}.csv"));
        let seed = i.to_string();
        assert!(sparsear(&["gen", "--length", "200", "--lags", lags, "--noise", "0.2", "--seed", &seed, "--out", &f])
            .status
            .success());
    }
    let out = path(dir.path(), "bench.csv");
    let corpus = corpus.to_string_lossy().into_owned();
    let res = sparsear(&["bench", "--corpus", &corpus, "--orders", "12,16", "--sparsities", "2,3", "--tau0", "6", "--out", &out]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = read_bench(&out).unwrap();
    assert_eq!(rows.len(), 3 * 2 * 2 * 3);
    for group in rows.chunks(3) {
        let get = |name: &str| group.iter().find(|r| r.solver == name).unwrap().objective;
        assert!(group.iter().all(|r| r.dataset == group[0].dataset && r.tau == group[0].tau && r.order == group[0].order));
        assert!(get("mio") <= get("mio-dvp"));
        assert!(get("mio-dvp") <= get("nnsp") + 1e-9);
    }
}

#[test]
fn segmented_fit_writes_one_block_per_segment() {
    let dir = tempfile::tempdir().unwrap();
    let series = path(dir.path(), "s.csv");
    assert!(sparsear(&["gen", "--length", "300", "--lags", "1:0.3,6:0.6", "--noise", "0.1", "--seed", "2", "--out", &series])
        .status
        .success());
    let prefix = path(dir.path(), "tv");
    let out = sparsear(&[
        "fit", "--model", "tvsar", "--input", &series, "--order", "8", "--sparsity", "2", "--segment-length", "100",
        "--solver", "mio-dvp", "--tau0", "4", "--out-prefix", &prefix,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = read_table(format!("{prefix}.coef.csv")).unwrap();
    assert_eq!(t.header, ["gamma", "k", "w"]);
    let gammas: Vec<f64> = t.column("gamma").unwrap();
    assert_eq!(gammas.iter().cloned().fold(0.0, f64::max), 3.0);
    assert_eq!(t.omega(), vec![1, 6]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_period3(dir.path());
    let prefix = path(dir.path(), "x");

    let unknown = sparsear(&["fit", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(!unknown.stderr.is_empty());

    let malformed = sparsear(&["fit", "--model", "sar", "--input", &input, "--order", "six", "--sparsity", "1"]);
    assert_eq!(malformed.status.code(), Some(1));

    let missing = sparsear(&["fit", "--model", "sar", "--input", &path(dir.path(), "nope.csv"), "--order", "3", "--sparsity", "1"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!missing.stderr.is_empty());

    let too_sparse = sparsear(&["fit", "--model", "sar", "--input", &input, "--order", "3", "--sparsity", "4", "--out-prefix", &prefix]);
    assert_eq!(too_sparse.status.code(), Some(1));

    let greedy = sparsear(&[
        "fit", "--model", "sar", "--input", &input, "--order", "6", "--sparsity", "1", "--solver", "nnsp",
        "--require-certified", "--out-prefix", &prefix,
    ]);
    assert_eq!(greedy.status.code(), Some(2));

    let bad_lag = sparsear(&[
        "fit", "--model", "sar", "--input", &input, "--order", "6", "--sparsity", "1", "--seasonality-lag", "2",
        "--out-prefix", &prefix,
    ]);
    assert_eq!(bad_lag.status.code(), Some(1));

    let grid = path(dir.path(), "g.csv");
    assert!(sparsear(&["gen", "--length", "40", "--lags", "3:0.9", "--grid", "2x2x1", "--out", &grid]).status.success());
    let outside = sparsear(&[
        "fit", "--model", "stvsar", "--input", &grid, "--order", "6", "--sparsity", "1", "--seasonality-lag", "5",
        "--out-prefix", &prefix,
    ]);
    assert_eq!(outside.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&outside.stderr).contains("available lags"));

    assert_eq!(sparsear(&["--help"]).status.code(), Some(0));
}
