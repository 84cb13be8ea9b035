use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_labelsift");

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let line = text.lines().last().expect("error line");
    serde_json::from_str(line).expect("stderr is JSON")
}

/// Writes a CSV log with one minute between consecutive events.
fn write_log(dir: &Path, name: &str, traces: &[(Vec<&str>, usize)], value: impl Fn(&str, usize) -> Option<f64>) -> PathBuf {
    let mut text = String::from("case_id,activity,timestamp,lab\n");
    let mut minute = 0;
    let mut case = 0;
    for (trace, copies) in traces {
        for _ in 0..*copies {
            for a in trace {
                let v = value(a, case).map(|v| v.to_string()).unwrap_or_default();
                text.push_str(&format!(
                    "c{case},{a},2020-01-0{}T{:02}:{:02}:00Z,{v}\n",
                    1 + minute / 1440,
                    (minute / 60) % 24,
                    minute % 60
                ));
                minute += 1;
            }
            case += 1;
        }
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn running_example(dir: &Path) -> PathBuf {
    write_log(
        dir,
        "running.csv",
        &[
            (vec!["A", "H", "C", "E"], 23),
            (vec!["A", "H", "D", "E", "G"], 24),
            (vec!["A", "H", "F", "E"], 1),
            (vec!["A", "H"], 2),
            (vec!["A", "B", "C", "E"], 25),
            (vec!["A", "B", "D", "E", "G"], 25),
        ],
        |a, case| matches!(a, "C" | "D").then(|| 10.0 + (case % 7) as f64),
    )
}

#[test]
fn detect_output_is_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    running_example(dir.path());
    let max = std::thread::available_parallelism().map_or(1, |n| n.get()).to_string();
    for format in ["json", "csv", "table"] {
        let outputs: Vec<Output> = ["1", "4", max.as_str()]
            .iter()
            .map(|t| run_in(dir.path(), &["--threads", t, "--format", format, "detect", "running.csv", "--group"]))
            .collect();
        for out in &outputs {
            assert_eq!(code(out), 0, "{}", String::from_utf8_lossy(&out.stderr));
            assert_eq!(out.stdout, outputs[0].stdout, "format {format}");
        }
    }
}

#[test]
fn detect_reports_known_pair_and_writes_files() {
    let dir = TempDir::new().unwrap();
    running_example(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "detect",
            "running.csv",
            "--theta-c",
            "0.25",
            "--theta-d",
            "0.1",
            "--out",
            "out/report.json",
            "--csv",
            "out/pairs.csv",
            "--dump-matrices",
            "out/m",
        ],
    );
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["pairs"].as_array().unwrap().len(), 28);
    assert!(report["redundant_pairs"]
        .as_array()
        .unwrap()
        .contains(&serde_json::json!(["B", "H"])));
    assert_eq!(report["config"]["theta_c"], 0.25);
    let pairs = fs::read_to_string(dir.path().join("out/pairs.csv")).unwrap();
    assert!(pairs.starts_with("# labelsift "));
    assert!(pairs.contains("\na,b,control_flow,data_value,semantic,satisfied,redundant,rule\n"));
    for name in ["control_flow.csv", "data_value.csv"] {
        let m = fs::read_to_string(dir.path().join("out/m").join(name)).unwrap();
        assert!(m.contains("label_a,label_b,score\n"));
        assert_eq!(m.lines().filter(|l| !l.starts_with('#')).count(), 29);
    }
    assert!(!dir.path().join("out/m/semantic.csv").exists());
    assert!(stdout(&out).contains("B        H"));
}

#[test]
fn nothing_found_is_not_an_error() {
    let dir = TempDir::new().unwrap();
    write_log(dir.path(), "plain.csv", &[(vec!["a", "b", "c"], 5), (vec!["a", "c"], 3)], |_, _| None);
    let out = run_in(dir.path(), &["--format", "json", "detect", "plain.csv", "--theta-c", "0.0"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["redundant_pairs"], serde_json::json!([]));
    let table = run_in(dir.path(), &["detect", "plain.csv", "--theta-c", "0.0"]);
    assert!(stdout(&table).contains("no redundant label pairs found"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    running_example(dir.path());
    fs::write(
        dir.path().join("run.cfg"),
        "# detector settings\ninput = running.csv\nformat = json\ntheta-c = 0.3\ntheta_d = off\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["--config", "run.cfg", "detect", "--theta-c", "0.2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["config"]["theta_c"], 0.2);
    assert_eq!(report["config"]["theta_d"], serde_json::Value::Null);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    running_example(dir.path());
    let p = dir.path();

    fs::write(p.join("bad.cfg"), "theta-c 0.2\n").unwrap();
    let out = run_in(p, &["--config", "bad.cfg", "detect", "running.csv", "--out", "r.json"]);
    assert_eq!(code(&out), 1);
    assert_eq!(error_json(&out)["error"]["kind"], "config");
    assert!(!p.join("r.json").exists());

    fs::write(p.join("unknown.cfg"), "colour = blue\n").unwrap();
    assert_eq!(code(&run_in(p, &["--config", "unknown.cfg", "detect", "running.csv"])), 1);
    assert_eq!(code(&run_in(p, &["detect", "running.csv", "--theta-c", "1.5"])), 1);
    assert_eq!(code(&run_in(p, &["detect", "running.csv", "--theta-c", "off", "--theta-d", "off"])), 1);
    assert_eq!(code(&run_in(p, &["detect", "running.csv", "--map", "case=nope"])), 1);
    assert_eq!(code(&run_in(p, &["detect", "--bogus"])), 1);
    assert_eq!(code(&run_in(p, &["--threads", "0", "detect", "running.csv"])), 1);

    let out = run_in(p, &["detect", "missing.csv"]);
    assert_eq!(code(&out), 2);
    assert_eq!(error_json(&out)["error"]["kind"], "io");

    fs::write(p.join("broken.csv"), "case_id,activity,timestamp\nc1,a,yesterday\n").unwrap();
    let out = run_in(p, &["detect", "broken.csv"]);
    assert_eq!(code(&out), 2);
    assert_eq!(error_json(&out)["error"]["kind"], "input");

    fs::write(p.join("broken.xes"), "<log><trace><event>").unwrap();
    assert_eq!(code(&run_in(p, &["detect", "broken.xes"])), 2);

    assert_eq!(code(&run_in(p, &["--help"])), 0);
    assert_eq!(code(&run_in(p, &["--version"])), 0);
}

#[test]
fn export_dfg_golden() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    write_log(p, "one.csv", &[(vec!["a", "b"], 1)], |_, _| None);
    let out = run_in(p, &["export-dfg", "one.csv"]);
    assert_eq!(code(&out), 0);
    let expected = format!(
        "// labelsift {}\n// input: one.csv\n// kind: direct\ndigraph dfg {{\n  \"a\";\n  \"b\";\n  \"a\" -> \"b\" [label=\"1\"];\n}}\n",
        env!("CARGO_PKG_VERSION")
    );
    assert_eq!(stdout(&out), expected);

    fs::write(p.join("empty.csv"), "case_id,activity,timestamp\n").unwrap();
    let out = run_in(p, &["export-dfg", "empty.csv"]);
    assert_eq!(code(&out), 2);
    assert_eq!(error_json(&out)["error"]["kind"], "input");
}

#[test]
fn export_indirect_honours_threshold() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    // a ≫ b in 3 of the 4 traces with a, so the significance is 2·3/(4+3+1) = 0.75.
    write_log(p, "ld.csv", &[(vec!["a", "b"], 3), (vec!["a"], 1)], |_, _| None);
    let low = run_in(p, &["--format", "csv", "export-dfg", "ld.csv", "--kind", "indirect", "--theta-ld", "0.7"]);
    assert_eq!(code(&low), 0);
    let rows: Vec<String> = stdout(&low).lines().filter(|l| !l.starts_with('#')).map(String::from).collect();
    assert_eq!(rows, vec!["from,to,count", "a,b,3"]);

    let high = run_in(p, &["--format", "json", "export-dfg", "ld.csv", "--kind", "indirect", "--theta-ld", "0.8"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&high)).unwrap();
    assert_eq!(v["edges"], serde_json::json!([]));
    assert_eq!(v["theta_ld"], 0.8);
    assert_eq!(v["nodes"], serde_json::json!(["a", "b"]));
}

#[test]
fn perturb_writes_log_and_truth() {
    let dir = TempDir::new().unwrap();
    running_example(dir.path());
    let p = dir.path();
    let out = run_in(
        p,
        &["--seed", "7", "perturb", "running.csv", "--select-pct", "20", "--rename-pct", "1", "--out-dir", "h"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let log = p.join("h/running_x20_y1_seed7.csv");
    let truth = fs::read_to_string(p.join("h/running_x20_y1_seed7_truth.csv")).unwrap();
    assert!(truth.contains("# seed: 7\n"));
    let planted: Vec<&str> = truth.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(planted.len(), 2);
    for row in &planted {
        let (a, b) = row.split_once(',').unwrap();
        assert_eq!(format!("{a}_syn"), b);
    }

    // the perturbed log reads back and carries the variants
    let report = run_in(p, &["--format", "json", "detect", log.to_str().unwrap()]);
    assert_eq!(code(&report), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&report)).unwrap();
    assert_eq!(v["log_fingerprint"]["activities"], 10);

    let again = run_in(
        p,
        &["--seed", "7", "perturb", "running.csv", "--select-pct", "20", "--rename-pct", "1", "--out-dir", "h2"],
    );
    assert_eq!(code(&again), 0);
    assert_eq!(fs::read(&log).unwrap(), fs::read(p.join("h2/running_x20_y1_seed7.csv")).unwrap());

    assert_eq!(code(&run_in(p, &["perturb", "running.csv", "--select-pct", "0", "--rename-pct", "1"])), 1);
    assert_eq!(code(&run_in(p, &["perturb", "running.csv", "--rename-pct", "1"])), 1);
}

#[test]
fn perturb_generates_and_reports_seed() {
    let dir = TempDir::new().unwrap();
    running_example(dir.path());
    let out = run_in(
        dir.path(),
        &["--format", "json", "perturb", "running.csv", "--select-pct", "40", "--rename-pct", "10"],
    );
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let seed = v["seed"].as_u64().unwrap();
    let log = v["log"].as_str().unwrap();
    assert!(log.ends_with(&format!("_seed{seed}.csv")));
    assert!(dir.path().join(log).exists());
    assert_eq!(v["planted"].as_array().unwrap().len(), 4);
}

#[test]
fn perturb_keeps_xes_format() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    running_example(p);
    let text = fs::read_to_string(p.join("running.csv")).unwrap();
    let xes = p.join("log.xes");
    fs::write(&xes, to_xes(&text)).unwrap();
    let out = run_in(p, &["--seed", "3", "perturb", "log.xes", "--select-pct", "20", "--rename-pct", "50"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let written = fs::read_to_string(p.join("log_x20_y50_seed3.xes")).unwrap();
    assert!(written.starts_with("<?xml"));
    assert!(written.contains("<!-- labelsift "));
    let report = run_in(p, &["--format", "json", "detect", "log_x20_y50_seed3.xes"]);
    assert_eq!(code(&report), 0, "{}", String::from_utf8_lossy(&report.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&report)).unwrap();
    assert_eq!(v["log_fingerprint"]["activities"], 10);
}

/// Minimal XES rendering of a `case_id,activity,timestamp,lab` CSV.
fn to_xes(csv: &str) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<log xes.version=\"1.0\">\n");
    let mut current = None;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if current != Some(f[0]) {
            if current.is_some() {
                out.push_str("</trace>\n");
            }
            out.push_str(&format!("<trace><string key=\"concept:name\" value=\"{}\"/>\n", f[0]));
            current = Some(f[0]);
        }
        out.push_str(&format!(
            "<event><string key=\"concept:name\" value=\"{}\"/><date key=\"time:timestamp\" value=\"{}\"/>",
            f[1], f[2]
        ));
        if !f[3].is_empty() {
            out.push_str(&format!("<float key=\"lab\" value=\"{}\"/>", f[3]));
        }
        out.push_str("</event>\n");
    }
    out.push_str("</trace>\n</log>\n");
    out
}

#[test]
fn evaluate_single_cell_and_repeatable() {
    let dir = TempDir::new().unwrap();
    running_example(dir.path());
    let p = dir.path();
    let args = |out: &str, threads: &str| {
        vec![
            "--seed".to_string(),
            "11".into(),
            "--threads".into(),
            threads.into(),
            "evaluate".into(),
            "running.csv".into(),
            "--x".into(),
            "50".into(),
            "--y".into(),
            "10".into(),
            "--replicates".into(),
            "5".into(),
            "--out-dir".into(),
            out.into(),
        ]
    };
    let first = Command::new(BIN).args(args("e1", "1")).current_dir(p).output().unwrap();
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let second = Command::new(BIN).args(args("e2", "4")).current_dir(p).output().unwrap();
    assert_eq!(code(&second), 0);
    for name in ["grid_raw.csv", "grid_summary.csv"] {
        let a = fs::read(p.join("e1").join(name)).unwrap();
        let b = fs::read(p.join("e2").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let raw = fs::read_to_string(p.join("e1/grid_raw.csv")).unwrap();
    assert!(raw.contains("# seed: 11\n"));
    let rows: Vec<&str> = raw.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.starts_with("50,10,")));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn evaluate_with_known_pairs() {
    let dir = TempDir::new().unwrap();
    running_example(dir.path());
    let p = dir.path();
    fs::write(p.join("known.csv"), "# declared\nlabel_a,label_b\nB,H\n").unwrap();
    let out = run_in(
        p,
        &[
            "--seed", "5", "--format", "json", "evaluate", "running.csv", "--x", "20,40", "--y", "30", "--replicates", "2",
            "--known", "known.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["runs"], 4);
    assert_eq!(v["summary"].as_array().unwrap().len(), 2);
    assert_eq!(code(&run_in(p, &["evaluate", "running.csv", "--known", "nope.csv"])), 2);
    assert_eq!(code(&run_in(p, &["evaluate", "running.csv", "--x", "abc"])), 1);
}
