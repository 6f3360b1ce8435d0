use std::path::Path;
use std::process::Command;

use dqho::cli::{run_scenario, sweep, RunConfig};

const BASELINE: &str = r#"
[model]
lambda = 0.05
mu = 0.0
coth_eps = 5.0

[initial]
delta = 3.0
r = 0.5

[time]
t_end = 100.0
n_samples = 201

[engines]
closed_form = true
ode = true
"#;

fn config(text: &str, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml_str(text).unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

/// Data rows of a CSV written by the tool, after checking its header line.
fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# dqho "), "{header}");
    assert!(header.contains("sigma_pq_sign=negated"), "{header}");
    assert!(header.contains("empty field = inf"), "{header}");
    let columns = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (columns, rows)
}

fn column(columns: &[String], name: &str) -> usize {
    columns
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn baseline_engines_agree() {
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&config(BASELINE, dir.path())).unwrap();
    let (columns, rows) = read_rows(&dir.path().join("compare.csv"));
    let dev = column(&columns, "rel_dev_sigma");
    assert_eq!(rows.len(), 201);
    let worst = rows
        .iter()
        .map(|r| r[dev].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");

    let (columns, rows) = read_rows(&dir.path().join("timeseries.csv"));
    assert_eq!(
        columns,
        [
            "t", "sigma_q", "sigma_p", "sigma_qq", "sigma_pp", "sigma_pq", "sigma", "delta_qd",
            "delta_cc", "engine"
        ]
    );
    assert_eq!(rows.len(), 2 * 201);
    assert!(rows[..201]
        .iter()
        .all(|r| r[9] == "closed_form" && r[3].is_empty()));
    assert!(rows[201..]
        .iter()
        .all(|r| r[9] == "ode" && !r[3].is_empty()));
}

#[test]
fn zero_temperature_glauber_never_decoheres() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[model]\nlambda = 0.1\nkT = 0.0\n[initial]\ndelta = 1.0\nr = 0.0\n[time]\nt_end = 30.0\nn_samples = 31\n";
    run_scenario(&config(text, dir.path())).unwrap();
    let scales: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scales.json")).unwrap())
            .unwrap();
    assert_eq!(scales["t_deco"], "inf");
    assert_eq!(scales["t_deco_branch"], "decoherence_zero_temperature");
    assert_eq!(scales["decoherence_rate"], 0.0);
    assert_eq!(scales["sigma_pq_sign_convention"], "negated");
    assert_eq!(scales["delta_qd_inf"], 1.0);
}

#[test]
fn temperature_sweep_reports_thermal_purity() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        format!("{BASELINE}\n[sweep]\naxis1 = \"coth_eps\"\nvalues1 = [1.5, 2.0, 5.0, 10.0]\n")
            .replace("t_end = 100.0", "t_end = 40.0")
            .replace("n_samples = 201", "n_samples = 21");
    let (cells, failed) = sweep(&config(&text, dir.path())).unwrap();
    assert_eq!((cells, failed), (4, 0));
    let (columns, rows) = read_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 4 * 21 * 2);
    let (c, inf) = (
        column(&columns, "coth_eps"),
        column(&columns, "delta_qd_inf"),
    );
    for r in &rows {
        let coth: f64 = r[c].parse().unwrap();
        let qd: f64 = r[inf].parse().unwrap();
        assert!((qd - 1.0 / coth).abs() <= 1e-15, "{r:?}");
        assert_eq!(r.last().unwrap(), "ok");
    }

    // at a fixed late time δ_QD drops as the bath warms up
    let (t, qd, engine) = (
        column(&columns, "t"),
        column(&columns, "delta_qd"),
        column(&columns, "engine"),
    );
    let late: Vec<f64> = rows
        .iter()
        .filter(|r| r[engine] == "ode" && r[t].parse::<f64>().unwrap() == 40.0)
        .map(|r| r[qd].parse().unwrap())
        .collect();
    assert_eq!(late.len(), 4);
    assert!(late.windows(2).all(|w| w[1] <= w[0]), "{late:?}");
}

#[test]
fn two_axis_sweep_is_cartesian_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[sweep]\naxis1 = \"delta\"\nvalues1 = [0.5, 1.0, 2.0, 4.0]\naxis2 = \"coth_eps\"\nvalues2 = [1.0, 2.0, 5.0, 10.0]\n",
        BASELINE.replace("closed_form = true", "closed_form = false")
    )
    .replace("n_samples = 201", "n_samples = 11");
    sweep(&config(&text, dir.path())).unwrap();
    let (columns, rows) = read_rows(&dir.path().join("sweep.csv"));
    assert_eq!(&columns[..3], ["delta", "coth_eps", "t"]);
    assert_eq!(rows.len(), 16 * 11);
    let keys: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| {
            (
                r[0].parse().unwrap(),
                r[1].parse().unwrap(),
                r[2].parse().unwrap(),
            )
        })
        .collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn failing_cells_are_flagged_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASELINE}\n[sweep]\naxis1 = \"r\"\nvalues1 = [0.0, 1.5, 0.2]\n")
        .replace("n_samples = 201", "n_samples = 5");
    let (cells, failed) = sweep(&config(&text, dir.path())).unwrap();
    assert_eq!((cells, failed), (3, 1));
    let (_, rows) = read_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 5 * 2 + 1 + 5 * 2);
    let bad = &rows[10];
    assert!(bad.last().unwrap().starts_with("error:"), "{bad:?}");
    assert!(bad[1..bad.len() - 1].iter().all(String::is_empty));
}

#[test]
fn empty_sweep_is_a_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    let (cells, failed) = sweep(&config(BASELINE, dir.path())).unwrap();
    assert_eq!((cells, failed), (1, 0));
    assert!(dir.path().join("timeseries.csv").exists());
    assert!(dir.path().join("scales.json").exists());
    assert!(!dir.path().join("sweep.csv").exists());
}

fn dqho(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dqho"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_arg = out.to_str().unwrap();

    let good = dir.path().join("good.toml");
    std::fs::write(&good, BASELINE).unwrap();
    let res = dqho(&[
        "run",
        good.to_str().unwrap(),
        "--out",
        out_arg,
        "--quiet",
        "--tol-override",
        "1e-11",
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(res.stdout.is_empty());
    assert!(out.join("timeseries.csv").exists());

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, BASELINE.replace("delta = 3.0", "delta = -1.0")).unwrap();
    let res = dqho(&["run", bad.to_str().unwrap(), "--out", out_arg]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("initial.delta"));

    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, BASELINE.replace("[time]", "[time]\nt_ned = 3.0")).unwrap();
    let res = dqho(&["run", typo.to_str().unwrap(), "--out", out_arg]);
    assert_eq!(res.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(
        stderr.contains("t_ned") && stderr.contains("line"),
        "{stderr}"
    );

    // a strongly squeezed state leaks out of a coarse 6σ box immediately
    let leaky = dir.path().join("leaky.toml");
    let text = "[model]\nlambda = 0.1\ncoth_eps = 2.0\n[initial]\ndelta = 0.01\n[time]\nt_end = 1.0\nn_samples = 3\n\
                [engines]\nfp = true\n[fp]\nbox_sigmas = 6.0\nnq = 64\nnp = 64\n";
    std::fs::write(&leaky, text).unwrap();
    let res = dqho(&["run", leaky.to_str().unwrap(), "--out", out_arg]);
    assert_eq!(
        res.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}
