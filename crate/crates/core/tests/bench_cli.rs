use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use proptest::prelude::*;

use newton_fw::bench::{
    gen_dopt_points, gen_portfolio, parse_libsvm, parse_libsvm_str, read_price_csv, run_experiment, write_libsvm,
    Dataset, ExperimentConfig, Features, TRACE_HEADER,
};
use newton_fw::{CsrMatrix, Error};

const HEADER: &str =
    "problem,solver,iter,time_s,fval,gap_proxy,gamma,eta,lambda,stage,alpha,lmo_calls_cum,grad_evals_cum,hess_ops_cum";

fn bench(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nfw-bench")).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn trace_header_is_exact() {
    assert_eq!(TRACE_HEADER, HEADER);
}

#[test]
fn libsvm_examples() {
    let d = parse_libsvm_str("+1 1:0.5 3:2\n").unwrap();
    assert_eq!(d.to_dense().row(0).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.0, 2.0]);
    assert_eq!(d.labels, Some(vec![1.0]));
    let d = parse_libsvm_str("1 1:1\n2 2:1\n1 1:3\n").unwrap();
    assert_eq!(d.labels, Some(vec![-1.0, 1.0, -1.0]));
    let d = parse_libsvm_str("0 1:1\n1 2:1\n").unwrap();
    assert_eq!(d.labels, Some(vec![-1.0, 1.0]));
    match parse_libsvm_str("1 1:1\n-1 2:x\n") {
        Err(Error::Data { line, .. }) => assert_eq!(line, Some(2)),
        other => panic!("expected a data error, got {other:?}"),
    }
    match parse_libsvm_str("1 1:1\n2 1:1\n3 1:1\n") {
        Err(Error::Data { line, .. }) => assert_eq!(line, Some(3)),
        other => panic!("expected a data error, got {other:?}"),
    }
    assert!(parse_libsvm_str("1 3:1 2:1\n").is_err());
    assert!(parse_libsvm_str("1 0:1\n").is_err());
}

#[test]
fn generators_are_seeded() {
    assert_eq!(gen_portfolio(20, 5, 9).unwrap(), gen_portfolio(20, 5, 9).unwrap());
    assert_eq!(gen_dopt_points(3, 10, 9, None).unwrap(), gen_dopt_points(3, 10, 9, None).unwrap());
    assert!(gen_dopt_points(4, 3, 9, None).is_err());
    let m = gen_portfolio(100, 100, 5).unwrap().to_dense();
    let mean = m.mean();
    assert!((mean - 1.0).abs() <= 5.0 / 100.0, "mean {mean}");
}

#[test]
fn price_loader_returns_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prices.csv");
    fs::write(&path, "date,A,B\n2020-01-01,10,20\n2020-01-02,11,19\n2020-01-03,12.1,19\n").unwrap();
    let r = read_price_csv(&path).unwrap();
    assert_eq!(r.shape(), (2, 2));
    assert!((r[(0, 0)] - 1.1).abs() <= 1e-15 && (r[(1, 0)] - 1.1).abs() <= 1e-15);
    assert!((r[(0, 1)] - 0.95).abs() <= 1e-15 && r[(1, 1)] == 1.0);
    fs::write(&path, "A,B\n1,0\n2,3\n").unwrap();
    assert!(read_price_csv(&path).is_err());
}

fn sparse_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..12, 1usize..10).prop_flat_map(|(n, p)| {
        let entries = prop::collection::vec(prop::option::weighted(0.4, -1e3f64..1e3), n * p);
        let labels = prop::collection::vec(prop::bool::ANY, n);
        (Just((n, p)), entries, labels).prop_map(|((n, p), entries, labels)| {
            let mut indptr = vec![0];
            let mut indices = Vec::new();
            let mut values = Vec::new();
            for r in 0..n {
                for c in 0..p {
                    if let Some(v) = entries[r * p + c].filter(|v| *v != 0.0) {
                        indices.push(c);
                        values.push(v);
                    }
                }
                indptr.push(indices.len());
            }
            // make the last column present so the parsed width matches
            if !indices.contains(&(p - 1)) {
                indices.push(p - 1);
                values.push(1.0);
                *indptr.last_mut().unwrap() += 1;
            }
            let mut y: Vec<f64> = labels.iter().map(|b| if *b { 1.0 } else { -1.0 }).collect();
            y[0] = 1.0;
            if n > 1 {
                y[n - 1] = -1.0;
            }
            let m = CsrMatrix::new(n, p, indptr, indices, values).unwrap();
            Dataset { features: Features::Sparse(m), labels: Some(y) }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn libsvm_round_trip_is_lossless(data in sparse_dataset()) {
        let mut buf = Vec::new();
        write_libsvm(&data, &mut buf).unwrap();
        let parsed = parse_libsvm_str(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(parsed.to_dense(), data.to_dense());
        prop_assert_eq!(parsed.labels, data.labels);
    }
}

#[test]
fn gen_then_run_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.svm");
    let (code, _, err) = bench(&["gen", "--problem", "logistic", "--n", "60", "--p", "12", "--seed", "3", "--out", path_str(&data)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(parse_libsvm(&data).unwrap().nrows(), 60);
    let out = dir.path().join("run");
    let (code, stdout, err) = bench(&[
        "run", "--problem", "logistic", "--data", path_str(&data), "--data-format", "libsvm", "--solvers", "NFW,PG-BB",
        "--max-iters", "2000", "--out", path_str(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("NFW") && stdout.contains("PG-BB"));
    for solver in ["NFW", "PG-BB"] {
        let text = fs::read_to_string(out.join(format!("logistic_{solver}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(HEADER));
        let mut prev_iter = None;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 14);
            assert_eq!(fields[0], "logistic");
            assert_eq!(fields[1], solver);
            let iter: usize = fields[2].parse().unwrap();
            assert!(prev_iter.is_none_or(|p| iter > p));
            prev_iter = Some(iter);
            assert!(fields[4].parse::<f64>().unwrap().is_finite());
        }
    }
    assert!(out.join("metadata.txt").exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!(
            "# portfolio smoke run\nproblem = portfolio\nn = 40\np = 10\nseed = 1\nsolvers = NFW, FW\nmax_iters = 500\nout = \"{}\"\n",
            out.display()
        ),
    )
    .unwrap();
    let (code, _, err) = bench(&["run", "--config", path_str(&cfg), "--seed", "2", "--eps", "1e-8"]);
    assert_eq!(code, 0, "{err}");
    let meta = fs::read_to_string(out.join("metadata.txt")).unwrap();
    assert!(meta.contains("seed=2"), "{meta}");
    assert!(meta.contains("eps = 0.00000001"), "{meta}");
    assert!(out.join("portfolio_NFW.csv").exists() && out.join("portfolio_FW.csv").exists());
    assert!(!out.join("portfolio_PG-BB.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = path_str(&out);
    assert_eq!(bench(&[]).0, 1);
    assert_eq!(bench(&["run", "--bogus"]).0, 1);
    assert_eq!(bench(&["--help"]).0, 0);
    // missing seed for synthetic data
    assert_eq!(bench(&["run", "--problem", "portfolio", "--n", "5", "--p", "3", "--out", o]).0, 1);
    assert_eq!(bench(&["run", "--problem", "portfolio", "--n", "5", "--p", "3", "--seed", "1", "--beta", "0.4", "--out", o]).0, 1);
    assert_eq!(bench(&["run", "--problem", "nope", "--n", "5", "--p", "3", "--seed", "1", "--out", o]).0, 1);
    assert_eq!(bench(&["run", "--problem", "portfolio", "--n", "5", "--p", "3", "--seed", "1", "--solvers", "FW-AWAY-DOPT", "--out", o]).0, 1);
    assert_eq!(bench(&["check", "--beta", "0.2", "--sigma", "0.2"]).0, 1);

    let missing = dir.path().join("missing.csv");
    assert_eq!(bench(&["run", "--problem", "portfolio", "--data", path_str(&missing), "--out", o]).0, 3);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2\n3,oops\n").unwrap();
    assert_eq!(bench(&["run", "--problem", "portfolio", "--data", path_str(&bad), "--out", o]).0, 3);
    let svm = dir.path().join("bad.svm");
    fs::write(&svm, "1 1:1\n-1 2:1 1:2\n").unwrap();
    let (code, _, err) = bench(&["run", "--problem", "logistic", "--data", path_str(&svm), "--data-format", "libsvm", "--out", o]);
    assert_eq!(code, 3);
    assert!(err.contains("line 2"), "{err}");

    // returns this small overflow the Hessian: the Newton run fails, the others finish
    let tiny = dir.path().join("tiny.csv");
    fs::write(&tiny, "1e-200,2e-200\n3e-200,1e-200\n2e-200,2e-200\n").unwrap();
    let (code, stdout, _) = bench(&["run", "--problem", "portfolio", "--data", path_str(&tiny), "--out", o]);
    assert_eq!(code, 2);
    assert!(stdout.contains("error"));
    assert_eq!(fs::read_to_string(out.join("portfolio_NFW.csv")).unwrap().trim(), HEADER);
}

#[test]
fn check_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    let (code, stdout, err) = bench(&["check", "--out", path_str(&grid), "--steps", "50"]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("valid"));
    let text = fs::read_to_string(&grid).unwrap();
    assert_eq!(text.lines().next(), Some("beta,c_big,sigma_min,cond2_lhs,feasible"));
    assert!(text.lines().count() > 50);
}

#[test]
fn gen_writes_dense_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    let (code, _, err) = bench(&["gen", "--problem", "dopt", "--n", "3", "--p", "8", "--seed", "4", "--out", path_str(&path)]);
    assert_eq!(code, 0, "{err}");
    let m = newton_fw::bench::read_dense_csv(&path).unwrap();
    assert_eq!(m, gen_dopt_points(3, 8, 4, None).unwrap().to_dense());
}

#[test]
fn desk_smoke_config_finishes_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_pairs([
        ("problem", "portfolio".to_string()),
        ("n", "200".into()),
        ("p", "50".into()),
        ("seed", "1".into()),
        ("out", dir.path().display().to_string()),
    ])
    .unwrap();
    let start = Instant::now();
    let summary = run_experiment(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert!(summary.all_succeeded());
    assert_eq!(summary.outcomes.len(), 4);
    assert!(secs < 60.0, "smoke run took {secs:.1} s");
}
