use std::io::Read;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use hgvm_cli::output::TRACE_COLUMNS;
use hgvm_core::{gain_ccm, size_components, DesignSpec};

fn hgvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgvm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn field(text: &str, name: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.split_whitespace().next() == Some(name))
        .unwrap_or_else(|| panic!("no `{name}` line in\n{text}"));
    // First number on the line; some labels carry a qualifier such as `mean`.
    line.split_whitespace()
        .skip(1)
        .find_map(|w| w.parse().ok())
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr_error(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

#[test]
fn steady_prints_gain_and_switch_stress() {
    let out = hgvm(&["steady", "--vin", "12", "--duty", "0.55", "--io", "1.32"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let gain = field(&text, "gain");
    let v_q = field(&text, "V_Q");
    // Oracle: M = (2 + D) / (1 - D)^2 and V_Q = Vo / (2 + D).
    let m = 2.55 / (0.45f64 * 0.45);
    assert!((gain - m).abs() < 1e-4, "{gain}");
    assert!((gain - 12.59).abs() < 0.005);
    assert!((v_q - 12.0 * m / 2.55).abs() < 1e-4, "{v_q}");
    assert!((v_q - 59.26).abs() < 0.005);
}

#[test]
fn steady_json_report() {
    let out = hgvm(&[
        "steady", "--vin", "12", "--duty", "0.55", "--io", "1.32", "--json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["command"], "steady");
    assert_eq!(v["status"], "ok");
    assert_eq!(v["exit_code"], 0);
    assert_eq!(
        v["results"]["gain"].as_f64().unwrap(),
        gain_ccm(0.55).unwrap()
    );
}

#[test]
fn design_prints_inductor_minima() {
    let out = hgvm(&[
        "design", "--vin", "12", "--vo", "151", "--po", "200", "--fs", "50e3",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let line = text.lines().find(|l| l.starts_with("L minima")).unwrap();
    let values: Vec<f64> = line
        .split_whitespace()
        .nth(2)
        .unwrap()
        .split('/')
        .map(|v| v.parse().unwrap())
        .collect();
    for (got, want) in values.iter().zip([3.96, 19.55, 17.16]) {
        assert!((got - want).abs() / want < 0.01, "{line}");
    }
    let lib = size_components(&DesignSpec::new(12.0, 151.0, 200.0, 50e3)).unwrap();
    for (got, l) in values.iter().zip(lib.l_min) {
        assert!((got - l * 1e6).abs() < 0.005);
    }
}

#[test]
fn design_margin_scales_recommended_inductors() {
    let out = hgvm(&[
        "design", "--vin", "12", "--vo", "151", "--po", "200", "--fs", "50e3", "--margin", "2",
        "--json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = &v["results"];
    for k in 0..3 {
        let min = r["l_min"][k].as_f64().unwrap();
        let rec = r["l_recommended"][k].as_f64().unwrap();
        assert!((rec - 2.0 * min).abs() <= 1e-12 * rec);
    }
}

#[test]
fn compare_table_shape() {
    let out = hgvm(&[
        "compare", "--dmin", "0.1", "--dmax", "0.8", "--step", "0.05",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(!text.contains('\r'));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    assert_eq!(header.len(), 1 + 7 * 3);
    assert_eq!(&header[0], "d");
    for group in ["gain", "switch_stress", "diode_stress"] {
        assert_eq!(
            header
                .iter()
                .filter(|h| h.starts_with(&format!("{group}.")))
                .count(),
            7
        );
    }
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 15);
    let gain_col = header.iter().position(|h| h == "gain.hgvm-qbc").unwrap();
    for row in &rows {
        let d: f64 = row[0].parse().unwrap();
        let g: f64 = row[gain_col].parse().unwrap();
        assert!((g - (2.0 + d) / ((1.0 - d) * (1.0 - d))).abs() < 1e-9 * g);
    }
}

#[test]
fn compare_to_file_reports_crossovers() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("curves.csv");
    let svg_path = dir.path().join("curves.svg");
    let out = hgvm(&[
        "compare",
        "--dmin",
        "0.1",
        "--dmax",
        "0.8",
        "--step",
        "0.05",
        "--out",
        csv_path.to_str().unwrap(),
        "--plot",
        svg_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("gain crossover with rajabi2022"));
    assert!(std::fs::read_to_string(&csv_path)
        .unwrap()
        .starts_with("d,gain.hgvm-qbc,"));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 7);
}

#[test]
fn simulate_trace_csv_header_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.toml",
        "preset = nominal\n[sim]\nperiods = 4\nrecord_stride = 50\n",
    );
    let trace = dir.path().join("trace.csv");
    let out = hgvm(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(!text.contains('\r'));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, TRACE_COLUMNS);
    let mut last_t = f64::NEG_INFINITY;
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert_eq!(rec.len(), TRACE_COLUMNS.len());
        for (k, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().unwrap();
            assert!(v.is_finite());
            if k != 1 {
                // Full precision: re-printing the parsed value reproduces the cell.
                assert_eq!(format!("{v:?}"), cell);
            }
        }
        let mode: u8 = rec[1].parse().unwrap();
        assert!((1..=4).contains(&mode));
        let t: f64 = rec[0].parse().unwrap();
        assert!(t >= last_t);
        last_t = t;
        n += 1;
    }
    assert!(n > 4 * 2000 / 50);
    assert!((last_t - 4.0 / 50e3).abs() < 1e-12);
}

#[test]
fn simulate_summary_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.toml",
        "preset = nominal\n[sim]\nperiods = 20\n",
    );
    let svg = dir.path().join("vo.svg");
    let out = hgvm(&[
        "simulate",
        "--config",
        &cfg,
        "--plot",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v_o = field(&stdout(&out), "v_o");
    assert!((v_o - 151.11).abs() / 151.11 < 0.05, "{v_o}");
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn exit_code_2_on_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "preset = nominal\n[components]\nl1 = -1\n",
    );
    let out = hgvm(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert_eq!(err["category"], "config");
    assert!(err["message"].as_str().unwrap().starts_with("line 3:"));

    let out = hgvm(&[
        "simulate",
        "--config",
        dir.path().join("missing.toml").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = hgvm(&["steady", "--vin", "12", "--duty", "1.5", "--io", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_code_3_on_simulation_error() {
    let dir = tempfile::tempdir().unwrap();
    // A very light load drives the inductor currents into discontinuous conduction.
    let cfg = write_config(
        dir.path(),
        "light.toml",
        "preset = nominal\n[components]\nr_load = 20000\n[sim]\nperiods = 20\nshooting = false\n",
    );
    let report = dir.path().join("report.json");
    let out = hgvm(&[
        "simulate",
        "--config",
        &cfg,
        "--json",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_error(&out)["category"], "simulation");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["status"], "error");
    assert_eq!(v["exit_code"], 3);
    assert!(v["results"].is_null());
}

#[test]
fn exit_code_4_on_infeasible_design() {
    // 20 V is below the converter's minimum gain from 12 V.
    let out = hgvm(&[
        "design", "--vin", "12", "--vo", "20", "--po", "200", "--fs", "50e3",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_error(&out)["category"], "design");

    let out = hgvm(&[
        "design", "--vin", "12", "--vo", "20", "--po", "200", "--fs", "50e3", "--json",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["category"], "design");
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.toml",
        "preset = nominal\n[sim]\nperiods = 6\nrecord_stride = 20\n",
    );
    let run = |k: usize| {
        let csv = dir.path().join(format!("trace{k}.csv"));
        let json = dir.path().join(format!("report{k}.json"));
        let out = hgvm(&[
            "simulate",
            "--config",
            &cfg,
            "--out",
            csv.to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        (
            std::fs::read(csv).unwrap(),
            std::fs::read(json).unwrap(),
            out.stdout,
        )
    };
    assert_eq!(run(0), run(1));

    let ctl = write_config(
        dir.path(),
        "ctl.toml",
        "preset = prototype\n[components]\nr_load = 114.1\n",
    );
    let run_ctl = |k: usize| {
        let csv = dir.path().join(format!("ctl{k}.csv"));
        let json = dir.path().join(format!("ctl{k}.json"));
        let out = hgvm(&[
            "control",
            "--config",
            &ctl,
            "--refs",
            "0:60,0.004:70",
            "--end",
            "0.008",
            "--out",
            csv.to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        (std::fs::read(csv).unwrap(), std::fs::read(json).unwrap())
    };
    assert_eq!(run_ctl(0), run_ctl(1));

    let cmp = || {
        hgvm(&[
            "compare", "--dmin", "0.2", "--dmax", "0.7", "--step", "0.01",
        ])
        .stdout
    };
    assert_eq!(cmp(), cmp());
}

#[test]
fn control_runs_several_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let ctl = write_config(
        dir.path(),
        "ctl.toml",
        "preset = prototype\n[components]\nr_load = 114.1\n",
    );
    let csv = dir.path().join("ctl.csv");
    let json = dir.path().join("ctl.json");
    let out = hgvm(&[
        "control",
        "--config",
        &ctl,
        "--refs",
        "0:60,0.004:70",
        "--refs",
        "0:100",
        "--end",
        "0.008",
        "--out",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("ctl-1.csv").exists());
    assert!(dir.path().join("ctl-2.csv").exists());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let scenarios = v["results"]["scenarios"].as_array().unwrap();
    assert_eq!(scenarios.len(), 2);
    assert_eq!(scenarios[0]["metrics"].as_array().unwrap().len(), 2);
    assert_eq!(scenarios[1]["metrics"].as_array().unwrap().len(), 1);
}

#[test]
fn control_rejects_malformed_references() {
    let dir = tempfile::tempdir().unwrap();
    let ctl = write_config(dir.path(), "ctl.toml", "preset = prototype\n");
    for refs in ["0:60,abc", "0.01:60", "0:60,0:70", "0:-5"] {
        let out = hgvm(&["control", "--config", &ctl, "--refs", refs]);
        assert_eq!(out.status.code(), Some(2), "{refs}");
    }
    // Above Vin * gain_ccm(duty_max) the reference cannot be reached.
    let out = hgvm(&["control", "--config", &ctl, "--refs", "0:60,0.01:5000"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_error(&out)["category"], "design");
}

#[test]
fn closed_stdout_is_not_an_error() {
    // Several MB of CSV: far more than a pipe buffer, so the writer is
    // still running when the reader goes away.
    let mut child = Command::new(env!("CARGO_BIN_EXE_hgvm"))
        .args([
            "compare", "--dmin", "0.01", "--dmax", "0.99", "--step", "0.00005",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut head = [0u8; 16];
    child.stdout.take().unwrap().read_exact(&mut head).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(head.starts_with(b"d,gain.hgvm-qbc"));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stderr.is_empty());
}
