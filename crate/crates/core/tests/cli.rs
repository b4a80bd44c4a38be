use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use hb_polyak::harness::{write_csv, ExperimentConfig, MethodRun, CSV_HEADER};
use hb_polyak::solvers::run_partial;
use hb_polyak::{Method, RunSettings};

fn hb_polyak(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hb-polyak"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn run_is_byte_identical_and_row_counts_match() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run",
        "--dim",
        "20",
        "--cond",
        "30",
        "--seed",
        "3",
        "--iters",
        "40",
        "--methods",
        "all",
    ];
    let a = hb_polyak(&args, dir.path());
    let b = hb_polyak(&args, dir.path());
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(a.stdout, b.stdout);

    let text = String::from_utf8(a.stdout).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        header,
        "method,t,dist_sq,excess,grad_norm_sq,h_t,m_t,gamma_t,error"
    );
    assert_eq!(header, CSV_HEADER.join(","));

    let rows = data_rows(&text);
    let mut last_t: BTreeMap<String, usize> = BTreeMap::new();
    let mut order = Vec::new();
    for row in &rows {
        assert_eq!(row.len(), 9);
        if !order.contains(&row[0]) {
            order.push(row[0].clone());
        }
        last_t.insert(row[0].clone(), row[1].parse().unwrap());
    }
    let expected: usize = last_t.values().map(|t| t + 1).sum();
    assert_eq!(rows.len(), expected);
    let registered: Vec<String> = Method::registered().iter().map(Method::name).collect();
    assert_eq!(order, registered);
    for row in rows.iter().filter(|r| r[1] == "0") {
        assert_eq!(row[6], "", "m_t is undefined at t = 0");
    }
}

#[test]
fn one_dimensional_run_converges_after_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = hb_polyak(
        &[
            "run",
            "--dim",
            "1",
            "--cond",
            "1",
            "--iters",
            "1",
            "--methods",
            "hb-polyak",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = data_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][1], "1");
    assert_eq!(rows[1][2].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "--methods", "gd-nonsense"][..],
        &["run", "--spectrum", "triangular"],
        &["run", "--cond", "0.5"],
        &["verify", "--dim", "60"],
        &["run", "--methods", "qmin:X^2,not-a-method"],
    ] {
        let out = hb_polyak(args, dir.path());
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn out_and_plot_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = hb_polyak(
        &[
            "run",
            "--iters",
            "30",
            "--methods",
            "hb-polyak,cg,qmin:X",
            "--out",
            "fig1.csv",
            "--plot",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(dir.path().join("fig1.csv")).unwrap();
    assert!(csv.starts_with("# dim=25 "));
    for plot in ["fig1_dist_sq.svg", "fig1_excess.svg"] {
        let svg = std::fs::read_to_string(dir.path().join(plot)).unwrap();
        assert!(svg.contains("<svg"));
    }
}

#[test]
fn verify_passes_on_small_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = hb_polyak(
        &[
            "verify",
            "--dim",
            "10",
            "--cond",
            "10",
            "--seed",
            "0",
            "--out",
            "report.json",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], true);
    let deviation = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| {
            c["method"] == "hb-polyak"
                && c["name"].as_str().unwrap().starts_with("oracle-deviation")
        })
        .unwrap();
    assert!(deviation["value"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn verify_two_point_spectrum_from_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.txt"), "# diag(1, 3)\n1\n\n3\n").unwrap();
    let out = hb_polyak(
        &[
            "verify",
            "--dim",
            "2",
            "--spectrum",
            "file:spec.txt",
            "--iters",
            "5",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mismatch = hb_polyak(
        &["run", "--dim", "3", "--spectrum", "file:spec.txt"],
        dir.path(),
    );
    assert_eq!(mismatch.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let adaptive = report["methods"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["method"] == "hb-polyak")
        .unwrap();
    assert!(adaptive["rel_dist_at_d"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn verify_reports_violations_with_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = hb_polyak(
        &["verify", "--dim", "10", "--cond", "100", "--seed", "0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("violation: finite-termination"), "{stderr}");
}

#[test]
fn degenerate_run_is_tagged_on_the_last_row() {
    let cfg = ExperimentConfig {
        dim: 12,
        iters: 300,
        ..Default::default()
    };
    let (p, x0) = cfg.build_problem().unwrap();
    let settings = RunSettings {
        f_star: Some(p.f_star() + 1e-3),
        ..Default::default()
    };
    let runs: Vec<MethodRun> = [Method::HbPolyak, Method::Cg]
        .into_iter()
        .map(|method| {
            let (trajectory, error) = run_partial(&method, &p, &x0, cfg.iters, &settings);
            MethodRun {
                method,
                trajectory,
                error,
            }
        })
        .collect();
    assert!(runs[0].error.is_some() && runs[1].error.is_none());

    let mut buf = Vec::new();
    write_csv(&mut buf, &cfg, &p, &runs).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let adaptive: Vec<_> = rows.iter().filter(|r| &r[0] == "hb-polyak").collect();
    let (last, body) = adaptive.split_last().unwrap();
    assert!(last[8].contains("invalid f*"), "{:?}", &last[8]);
    assert!(body.iter().all(|r| r[8].is_empty()));
    assert!(rows
        .iter()
        .filter(|r| &r[0] == "cg")
        .all(|r| r[8].is_empty()));
}
