//! End-to-end tests of the command-line contract: exit statuses, file
//! shapes, and the documented reduction/equality properties.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dekreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dekreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

fn tumor_csv(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("tumor.csv");
    write(
        &path,
        "time,volume\n21,0.05\n25,0.09\n28,0.22\n42,1.77\n45,3.32\n",
    );
    path
}

#[test]
fn fit_happy_path_writes_curve_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let input = tumor_csv(&dir);
    let out = dir.path().join("curve.csv");
    let side = dir.path().join("curve.json");
    let res = dekreg(&[
        "fit",
        "--input",
        p(&input),
        "--output",
        p(&out),
        "--sidecar",
        p(&side),
        "--method",
        "de1",
        "--k",
        "1",
        "--lambda",
        "0.17",
        "--h",
        "3.5",
    ]);
    assert_eq!(
        code(&res),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );

    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("grid,fitted,defined\n"));
    assert_eq!(text.lines().count(), 102);

    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&side).unwrap()).unwrap();
    assert_eq!(side["method"], "DE1-1");
    assert_eq!(side["h"], 3.5);
    assert_eq!(side["lambda"], 0.17);
}

#[test]
fn fit_selects_bandwidth_when_not_given() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("data.csv");
    dekreg::cli::write_scenario_csv(&input, 1, "uniform", 25, 0.1, 9).unwrap();
    let out = dir.path().join("curve.csv");
    let side = dir.path().join("curve.json");
    let res = dekreg(&[
        "fit",
        "--input",
        p(&input),
        "--output",
        p(&out),
        "--sidecar",
        p(&side),
        "--method",
        "ll",
    ]);
    assert_eq!(code(&res), 0);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&side).unwrap()).unwrap();
    assert!(side["selection"]["selected_h"].as_f64().unwrap() > 0.0);
    assert_eq!(side["selection"]["grid"].as_array().unwrap().len(), 25);
}

#[test]
fn missing_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let res = dekreg(&[
        "fit",
        "--input",
        "/definitely/not/here.csv",
        "--output",
        p(&dir.path().join("x.csv")),
        "--method",
        "nw",
        "--h",
        "1",
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn malformed_csv_exits_2_and_names_the_line() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.csv");
    write(&input, "x,y\n1.0,2.0\nnope,4.0\n");
    let res = dekreg(&[
        "fit",
        "--input",
        p(&input),
        "--output",
        p(&dir.path().join("o.csv")),
        "--method",
        "nw",
        "--h",
        "1",
    ]);
    assert_eq!(code(&res), 2);
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains(":3:"), "stderr should name line 3: {err}");
}

#[test]
fn numeric_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("gap.csv");
    // epanechnikov kernel + far grid: every point undefined
    write(&input, "x,y\n0.0,1.0\n0.1,2.0\n0.2,3.0\n");
    let res = dekreg(&[
        "fit",
        "--input",
        p(&input),
        "--output",
        p(&dir.path().join("o.csv")),
        "--method",
        "ll",
        "--h",
        "0.05",
        "--kernel",
        "epanechnikov",
        "--grid-min",
        "50",
        "--grid-max",
        "60",
        "--grid-points",
        "5",
    ]);
    assert_eq!(
        code(&res),
        3,
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
}

#[test]
fn bad_flags_exit_2() {
    let res = dekreg(&["fit", "--nonsense"]);
    assert_eq!(code(&res), 2);
    let res = dekreg(&[
        "simulate",
        "--scenario",
        "9",
        "--n",
        "25",
        "--seed",
        "1",
        "--replicates",
        "1",
        "--output-prefix",
        "/tmp/x",
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn simulate_single_cell_table_shape() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("run");
    let res = dekreg(&[
        "simulate",
        "--scenario",
        "1",
        "--n",
        "10",
        "--design",
        "uniform",
        "--replicates",
        "3",
        "--seed",
        "7",
        "--output-prefix",
        p(&prefix),
        "--dump-mads",
        p(&dir.path().join("mads.csv")),
    ]);
    assert_eq!(
        code(&res),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let mean = std::fs::read_to_string(format!("{}_mean.csv", prefix.display())).unwrap();
    let lines: Vec<&str> = mean.lines().collect();
    assert_eq!(lines[0], "method,Scen. 1 (10)");
    assert_eq!(lines.len(), 11, "10 method rows: {mean}");
    assert!(lines[1].starts_with("NW,"));
    assert!(lines[10].starts_with("NLS,"));

    let mads = std::fs::read_to_string(dir.path().join("mads.csv")).unwrap();
    assert!(mads.starts_with("scenario,n,design,method,replicate,mad\n"));
    assert!(mads.lines().count() > 10);
}

#[test]
fn simulate_full_grid_headers_match_published_order() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("grid");
    let res = dekreg(&[
        "simulate",
        "--scenario",
        "all",
        "--design",
        "uniform",
        "--replicates",
        "2",
        "--seed",
        "3",
        "--methods",
        "NW,NLS",
        "--output-prefix",
        p(&prefix),
    ]);
    assert_eq!(
        code(&res),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let mean = std::fs::read_to_string(format!("{}_mean.csv", prefix.display())).unwrap();
    assert!(mean.starts_with(
        "method,Scen. 1 (25),Scen. 2 (25),Scen. 3 (25),Scen. 1 (10),Scen. 2 (10),Scen. 3 (10)\n"
    ));
}

#[test]
fn simulate_noiseless_nls_is_exact() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("clean");
    let res = dekreg(&[
        "simulate",
        "--scenario",
        "1",
        "--n",
        "25",
        "--design",
        "uniform",
        "--replicates",
        "1",
        "--noise",
        "0",
        "--seed",
        "5",
        "--methods",
        "NLS",
        "--output-prefix",
        p(&prefix),
    ]);
    assert_eq!(code(&res), 0);
    let mean = std::fs::read_to_string(format!("{}_mean.csv", prefix.display())).unwrap();
    let value: f64 = mean
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    // table values are x1000
    assert!(value.abs() <= 1e-3, "noiseless NLS MAD x1000 = {value}");
}

#[test]
fn asymptotics_uniform_density_nw_equals_ll_bias() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("table.csv");
    let res = dekreg(&[
        "asymptotics",
        "--lambda",
        "1",
        "--x",
        "0.5",
        "--h",
        "0.1",
        "--n",
        "100",
        "--sigma",
        "0.1",
        "--density",
        "uniform",
        "--output",
        p(&out),
    ]);
    assert_eq!(code(&res), 0);
    let table = std::fs::read_to_string(&out).unwrap();
    let row = |m: &str| -> (f64, f64) {
        let line = table
            .lines()
            .find(|l| l.starts_with(&format!("{m},")))
            .unwrap_or_else(|| panic!("row {m} in {table}"));
        let mut it = line.split(',').skip(1);
        (
            it.next().unwrap().parse().unwrap(),
            it.next().unwrap().parse().unwrap(),
        )
    };
    let (nw_b, nw_v) = row("NW");
    let (ll_b, ll_v) = row("LL");
    let (de_b, de_v) = row("DE1-1");
    assert_eq!(nw_b, ll_b, "uniform density: NW and LL bias must agree");
    assert_eq!(ll_b, de_b, "LL and DE1-1 rows identical");
    assert_eq!(nw_v, ll_v);
    assert_eq!(ll_v, de_v);
    assert_eq!(table.lines().count(), 9, "8 method rows: {table}");
}

#[test]
fn asymptotics_misspecified_reduces_at_lambda2_zero() {
    let dir = TempDir::new().unwrap();
    let mis = dir.path().join("mis.csv");
    let cor = dir.path().join("cor.csv");
    let res = dekreg(&[
        "asymptotics",
        "--misspecified",
        "--lambda1",
        "1.3",
        "--lambda2",
        "0",
        "--x",
        "0.4",
        "--h",
        "0.2",
        "--n",
        "50",
        "--sigma",
        "0.1",
        "--density",
        "beta",
        "--output",
        p(&mis),
    ]);
    assert_eq!(code(&res), 0);
    let res = dekreg(&[
        "asymptotics",
        "--lambda",
        "1.3",
        "--x",
        "0.4",
        "--h",
        "0.2",
        "--n",
        "50",
        "--sigma",
        "0.1",
        "--density",
        "beta",
        "--output",
        p(&cor),
    ]);
    assert_eq!(code(&res), 0);

    let mis = std::fs::read_to_string(&mis).unwrap();
    let cor = std::fs::read_to_string(&cor).unwrap();
    let values = |table: &str, m: &str| -> Vec<f64> {
        table
            .lines()
            .find(|l| l.starts_with(&format!("{m},")))
            .unwrap()
            .split(',')
            .skip(1)
            .map(|v| v.parse().unwrap())
            .collect()
    };
    for m in ["NW", "LL", "DE1-1"] {
        for (a, b) in values(&mis, m).iter().zip(values(&cor, m)) {
            // the two rows associate the shared factors differently, so
            // agreement is to rounding, not bit-exact
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{m}: {a} vs {b}");
        }
    }
}

#[test]
fn tumor_demo_and_pipeline_outputs() {
    let dir = TempDir::new().unwrap();
    let curves = dir.path().join("curves.csv");
    let side = dir.path().join("demo.json");
    let res = dekreg(&[
        "tumor-demo",
        "--output",
        p(&curves),
        "--sidecar",
        p(&side),
        "--grid-points",
        "41",
    ]);
    assert_eq!(code(&res), 0);
    let text = std::fs::read_to_string(&curves).unwrap();
    assert!(text.starts_with("method,grid,fitted,defined\n"));
    // four curves, 41 points each
    assert_eq!(text.lines().count(), 1 + 4 * 41);

    let table = dir.path().join("pipeline.csv");
    let res = dekreg(&[
        "tumor-pipeline",
        "--replicates",
        "5",
        "--seed",
        "11",
        "--output",
        p(&table),
        "--sidecar",
        p(&dir.path().join("t7.json")),
    ]);
    assert_eq!(code(&res), 0);
    let table = std::fs::read_to_string(&table).unwrap();
    assert!(table.starts_with("method,log_scale,original_scale\n"));
    let methods: Vec<&str> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(methods, ["NW", "LL", "LQ", "DE1-1", "DE1-2", "NLS"]);
}

#[test]
fn tumor_demo_exports_bit_exact_datasets() {
    let dir = TempDir::new().unwrap();
    let res = dekreg(&[
        "tumor-demo",
        "--output",
        p(&dir.path().join("c.csv")),
        "--export-data",
        p(&dir.path().join("data")),
    ]);
    assert_eq!(code(&res), 0);
    let sparse = dekreg::io::read_xy_csv(&dir.path().join("data/sparse.csv")).unwrap();
    assert_eq!(sparse.x(), &[21.0, 25.0, 28.0, 42.0, 45.0]);
    let full = dekreg::io::read_xy_csv(&dir.path().join("data/full.csv")).unwrap();
    assert_eq!(full.y()[5], 0.70);
}

#[test]
fn variance_ratio_reports_summary() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("vr.csv");
    let side = dir.path().join("vr.json");
    let res = dekreg(&[
        "variance-ratio",
        "--n",
        "10",
        "--lambda",
        "0",
        "--k",
        "1",
        "--seed",
        "4",
        "--repeat",
        "3",
        "--output",
        p(&out),
        "--sidecar",
        p(&side),
    ]);
    assert_eq!(code(&res), 0);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("pooled mean 1.0000"), "stdout: {stdout}");
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&side).unwrap()).unwrap();
    assert_eq!(side["pooled_mean"], 1.0);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 31);
}
