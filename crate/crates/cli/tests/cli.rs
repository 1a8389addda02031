use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_carbontrace");

const TWO_BUS: &str = r#"{
    "base_mva": 100,
    "buses": [{"id": 1, "kind": "slack"}, {"id": 2, "kind": "transmission"}],
    "branches": [{"id": 1, "from_bus": 1, "to_bus": 2, "susceptance": 10, "resistance": 0.01}],
    "generators": [{"id": "G1", "bus": 1, "kind": "conventional", "rated_output": 80, "max_output": 200,
                    "cei": {"a_down": 0.9, "b_down": 0, "a_over": 0.9, "b_over": 0, "p_rate": 80, "p_lim": 200},
                    "participation_factor": 1}],
    "loads": [{"bus": 2, "normal": {"mu": 50, "sigma": 5}}]
}"#;

const SINGLE_BUS: &str = r#"{
    "base_mva": 100,
    "buses": [{"id": 7, "kind": "slack"}],
    "branches": [],
    "generators": [{"id": "G1", "bus": 7, "kind": "conventional", "rated_output": 80, "max_output": 200,
                    "cei": {"a_down": 0.9, "b_down": 0, "a_over": 0.9, "b_over": 0, "p_rate": 80, "p_lim": 200},
                    "participation_factor": 1}],
    "loads": [{"bus": 7, "normal": {"mu": 50, "sigma": 5}}]
}"#;

fn carbontrace(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("CARBONTRACE_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn nine_node(dir: &Path) -> PathBuf {
    let p = dir.join("nine.json");
    let o = carbontrace(&["synth", "--nine-node", "--out", s(&p)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    p
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn run_writes_reproducible_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let net = nine_node(tmp.path());
    let run = |out: &str, workers: &str| {
        let out = tmp.path().join(out);
        let o = carbontrace(&[
            "run", "--network", s(&net), "--samples", "400", "--seed", "42", "--mode", "virtual",
            "--penetration", "0", "--workers", workers, "--out", s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        out
    };
    let a = run("a", "1");
    let b = run("b", "3");
    for name in ["summary.csv", "histograms.csv", "totals.csv", "run_meta.json", "timing.json"] {
        assert!(a.join(name).exists(), "{name} missing");
    }
    assert_eq!(data_files(&a), data_files(&b));

    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert!(summary.starts_with("penetration,component,count,mean,variance,std_dev,min,max,p5,p50,p95\n"));
    assert!(summary.lines().any(|l| l.starts_with("0,system,400,")));

    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("run_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 42);
    assert_eq!(meta["samples"], 400);
    assert_eq!(meta["mode"], "virtual");
    assert!(meta["git_describe"].is_string());
    let timing: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("timing.json")).unwrap()).unwrap();
    assert!(timing["total_seconds"].as_f64().unwrap() > 0.0);
}

#[test]
fn worker_count_falls_back_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let net = nine_node(tmp.path());
    let out = |name: &str| tmp.path().join(name);
    let o = carbontrace(&["run", "--network", s(&net), "--samples", "200", "--workers", "1", "--out", s(&out("flag"))]);
    assert_eq!(code(&o), 0);
    let o = Command::new(BIN)
        .args(["run", "--network", s(&net), "--samples", "200", "--out", s(&out("env"))])
        .env("CARBONTRACE_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let timing: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out("env").join("timing.json")).unwrap()).unwrap();
    assert_eq!(timing["workers"], 2);
    assert_eq!(data_files(&out("flag")), data_files(&out("env")));
}

#[test]
fn scenario_dump_lists_every_bus_and_branch() {
    let tmp = tempfile::tempdir().unwrap();
    let net = nine_node(tmp.path());
    let out = tmp.path().join("r");
    let o = carbontrace(&[
        "run", "--network", s(&net), "--samples", "50", "--dump-scenario", "7", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let buses = fs::read_to_string(out.join("scenario_7_buses.csv")).unwrap();
    let branches = fs::read_to_string(out.join("scenario_7_branches.csv")).unwrap();
    assert_eq!(buses.lines().count(), 1 + 9);
    assert_eq!(branches.lines().count(), 1 + 8);
}

#[test]
fn missing_network_exits_one_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere.json");
    let o = carbontrace(&["run", "--network", s(&missing), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nowhere.json"), "{}", stderr(&o));
}

#[test]
fn bad_flags_exit_one() {
    let o = carbontrace(&["run", "--network", "x.json", "--mode", "sideways", "--out", "o"]);
    assert_eq!(code(&o), 1);
    let o = carbontrace(&["frobnicate"]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&carbontrace(&["--help"])), 0);
}

#[test]
fn invalid_network_exits_one_with_the_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.json", &TWO_BUS.replace(r#""to_bus": 2"#, r#""to_bus": 5"#));
    let o = carbontrace(&["validate", "--network", s(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains('5'), "{}", stderr(&o));
    let good = write(tmp.path(), "good.json", TWO_BUS);
    let o = carbontrace(&["validate", "--network", s(&good)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn infeasible_scenarios_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let heavy = write(tmp.path(), "heavy.json", &TWO_BUS.replace(r#""mu": 50"#, r#""mu": 500"#));
    let o = carbontrace(&["run", "--network", s(&heavy), "--samples", "20", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("scenario 0"), "{}", stderr(&o));
}

#[test]
fn decompose_lists_every_bus() {
    let tmp = tempfile::tempdir().unwrap();
    let net = nine_node(tmp.path());
    let o = carbontrace(&["decompose", "--network", s(&net)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(text.lines().next(), Some("bus_id,virtual_bus_id,is_start"));
    assert_eq!(rows.len(), 9);
    let mut blocks: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    blocks.sort();
    blocks.dedup();
    assert_eq!(blocks.len(), 4);

    let single = write(tmp.path(), "single.json", SINGLE_BUS);
    let out = tmp.path().join("d");
    let o = carbontrace(&["decompose", "--network", s(&single), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(out.join("partition.csv")).unwrap(),
        "bus_id,virtual_bus_id,is_start\n7,0,true\n"
    );
    assert!(out.join("run_meta.json").exists());
}

#[test]
fn responsibility_of_the_only_unit() {
    let tmp = tempfile::tempdir().unwrap();
    let net = write(tmp.path(), "two.json", TWO_BUS);
    let out = tmp.path().join("resp");
    let o = carbontrace(&[
        "responsibility", "--network", s(&net), "--generator", "G1", "--samples", "100", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("responsibility.csv")).unwrap();
    let mut total = None;
    let mut generator = None;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let rate: f64 = f[4].parse().unwrap();
        match f[2] {
            "total" => total = Some(rate),
            "generator" => generator = Some(rate),
            c if c.starts_with("load:") => assert_eq!(f[5], "1.0"),
            _ => {}
        }
    }
    let (t, g) = (total.unwrap(), generator.unwrap());
    assert!((t - g).abs() <= 1e-9 * g, "{t} vs {g}");

    let o = carbontrace(&[
        "responsibility", "--network", s(&net), "--generator", "G7", "--out", s(&tmp.path().join("x")),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("G7"));
}

#[test]
fn cef_reads_a_flow_file() {
    let tmp = tempfile::tempdir().unwrap();
    let net = write(tmp.path(), "two.json", TWO_BUS);
    let flows = write(tmp.path(), "flows.csv", "branch_id,p_send_mw,p_recv_mw\n1,50.25,50.0\n");
    let out = tmp.path().join("cef");
    let o = carbontrace(&["cef", "--network", s(&net), "--flows", s(&flows), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let branches = fs::read_to_string(out.join("expected_branches.csv")).unwrap();
    let row: Vec<&str> = branches.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    assert_eq!(row[1], "50.25");
    assert_eq!(row[2], "50.0");
    // One flat-rate unit: every bus and branch sits at 0.9 t/MWh.
    let buses = fs::read_to_string(out.join("expected_buses.csv")).unwrap();
    for line in buses.lines().skip(1) {
        let e: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((e - 0.9).abs() < 1e-12);
    }

    let broken = write(tmp.path(), "broken.csv", "branch_id,p_send_mw,p_recv_mw\n3,1,1\n");
    let o = carbontrace(&["cef", "--network", s(&net), "--flows", s(&broken), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("broken.csv"), "{}", stderr(&o));
}

#[test]
fn bench_prints_a_table_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let net = nine_node(tmp.path());
    let out = tmp.path().join("b");
    let o = carbontrace(&[
        "bench", "--network", s(&net), "--samples", "100", "--samples", "300", "--warmup", "5", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("speedup"));
    let csv = fs::read_to_string(out.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().ends_with(",9,4"));
}

#[test]
fn synth_builds_the_standard_system() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("std.json");
    let o = carbontrace(&["synth", "--out", s(&p)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("1006 buses"));
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/standard.json");
    assert_eq!(fs::read(&p).unwrap(), fs::read(fixture).unwrap());
}
