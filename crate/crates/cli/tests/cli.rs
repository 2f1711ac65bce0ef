// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use corrshift::simlab::{Regime, SyntheticSpec};
use corrshift::CovMatrix;
use corrshift_cli::csvio::panel_to_csv;
use corrshift_cli::report::JsonReport;

fn corrshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrshift"))
        .args(args)
        .env("CORRSHIFT_THREADS", "2")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn null_csv(dir: &Path, n: usize, len: usize) -> String {
    let spec = SyntheticSpec::new(n, vec![Regime::new(len, CovMatrix::identity(n))], 4).unwrap();
    let path = dir.join("null.csv");
    std::fs::write(&path, panel_to_csv(&spec.generate().unwrap(), "t")).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn null_panel_exits_three_with_empty_report() {
    let tmp = tempfile::tempdir().unwrap();
    let input = null_csv(tmp.path(), 4, 80);
    let out = tmp.path().join("out");
    let o = corrshift(&["detect", &input, "--B", "100", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("report.json")).unwrap();
    let report: JsonReport = serde_json::from_str(&text).unwrap();
    assert!(report.points.is_empty());
    assert_eq!((report.n, report.len), (4, 80));
    assert_eq!(report.manifest.transforms, vec!["standardize"]);
    assert_eq!(report.manifest.config.as_ref(), Some(&report.config));
    assert!(report.manifest.wall_time_secs.is_none());
    assert_eq!(report.to_json(), text);

    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["points", "n", "T", "config", "manifest"] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
    let profile = std::fs::read_to_string(out.join("profile.csv")).unwrap();
    assert!(profile.starts_with("k,d,mu0,sigma0,z,zb_max\n5,"));
    assert_eq!(profile.lines().count(), 1 + 80 - 8);
    let boots = std::fs::read_to_string(out.join("boot_maxima.csv")).unwrap();
    assert_eq!(boots.lines().count(), 101);
}

#[test]
fn change_is_reported_with_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec::new(
        4,
        vec![
            Regime::new(150, CovMatrix::identity(4)),
            Regime::new(150, corrshift::simlab::block_exchangeable_sigma(4, 4, 0.9).unwrap()),
        ],
        2,
    )
    .unwrap();
    let input = tmp.path().join("cp.csv");
    std::fs::write(&input, panel_to_csv(&spec.generate().unwrap(), "t")).unwrap();
    let out = tmp.path().join("out");
    let o = corrshift(&["detect", input.to_str().unwrap(), "--B", "200", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: JsonReport = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let root = report.points.iter().find(|p| p.depth == 0).unwrap();
    assert!(root.k.abs_diff(150) <= 30, "k = {}", root.k);
    assert_eq!(root.segment, [1, 300]);
    assert!(String::from_utf8_lossy(&o.stdout).contains(&format!("change point k={}", root.k)));
}

#[test]
fn lr_with_small_buffer_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let input = null_csv(tmp.path(), 4, 60);
    let o = corrshift(&["detect", &input, "--metric", "lr", "--delta", "4", "--B", "100", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("invertible"), "{}", stderr(&o));
    let o = corrshift(&["detect", &input, "--metric", "lr", "--B", "100", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn bad_cells_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.csv");
    std::fs::write(&path, "a,b,c\n1,2,3\n4,NaN,6\n7,8,9\n1,1,1\n").unwrap();
    let p = path.to_str().unwrap();
    let o = corrshift(&["detect", p, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3, column 2"), "{}", stderr(&o));

    let input = null_csv(tmp.path(), 3, 40);
    assert_eq!(corrshift(&["detect", &input, "--B", "50"]).status.code(), Some(1));
    assert_eq!(corrshift(&["detect", &input, "--metric", "l3"]).status.code(), Some(1));
    assert_eq!(corrshift(&["detect", &input, "--bootstrap", "sieve", "--ar-order", "x"]).status.code(), Some(1));
    assert_eq!(corrshift(&["detect", "/nonexistent/file.csv"]).status.code(), Some(2));
    let o = corrshift(&["experiment", "fig9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("fig1"));
}

#[test]
fn transpose_and_log_returns() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("wide.csv");
    let mut body = String::from("node");
    for t in 0..41 {
        body.push_str(&format!(",t{t}"));
    }
    body.push('\n');
    for (i, growth) in [1.01f64, 0.99, 1.02].iter().enumerate() {
        body.push_str(&format!("S{i}"));
        for t in 0..41 {
            let wobble = 1.0 + 0.01 * (((t * (i + 3)) % 7) as f64 - 3.0);
            body.push_str(&format!(",{}", 100.0 * growth.powi(t as i32) * wobble));
        }
        body.push('\n');
    }
    std::fs::write(&path, body).unwrap();
    let out = tmp.path().join("out");
    let o = corrshift(&[
        "detect",
        path.to_str().unwrap(),
        "--transpose",
        "--time-col",
        "node",
        "--log-returns",
        "--B",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(3)), "{}", stderr(&o));
    let report: JsonReport = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!((report.n, report.len), (3, 40));
    assert_eq!(report.manifest.transforms, vec!["log-returns", "standardize"]);
}

#[test]
fn fig1_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = corrshift(&["experiment", "fig1", "--n", "20", "--T", "200", "--reps", "200", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("fig1.csv")).unwrap();
    assert!(csv.starts_with("k,analytic,mc_mean,mc_se\n"));
    let row = csv.lines().find(|l| l.starts_with("100,")).unwrap();
    let analytic: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((analytic - 8.4).abs() < 1e-12);
    assert!(tmp.path().join("fig1.manifest.json").exists());
}

#[test]
fn fig2_table_lengths() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = corrshift(&["experiment", "fig2", "--C", "30", "--reps", "10", "--B", "100", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("fig2.csv")).unwrap();
    let mut lengths: Vec<(String, String)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_owned(), f.next().unwrap().to_owned())
        })
        .collect();
    lengths.dedup();
    assert_eq!(
        lengths,
        vec![("4".into(), "42".into()), ("8".into(), "86".into()), ("12".into(), "162".into())]
    );
}

#[test]
fn simulate_writes_prices() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.csv");
    let o = corrshift(&["simulate", "--n", "5", "--T", "100", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("date,STK01,"));
    assert_eq!(text.lines().count(), 102);
}
