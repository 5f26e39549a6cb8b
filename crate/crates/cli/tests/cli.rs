use std::path::Path;
use std::process::{Command, Output};

fn qanneal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qanneal")).args(args).output().expect("binary runs")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn no_arguments_prints_usage_and_fails() {
    let out = qanneal(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = qanneal(&["trotter", "--norm", "1", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_lists_every_subcommand() {
    let out = qanneal(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["gen-instance", "show-instance", "spectrum", "evolve", "qaoa", "optimal", "near-adiabatic", "trotter", "bab", "table1"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
    assert!(!text.contains("xcheck"));
}

#[test]
fn validation_errors_exit_one() {
    let out = qanneal(&["trotter", "--norm", "1", "--p-min", "5", "--p-max", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let out = qanneal(&["spectrum", "--instance", "builtin:nonexistent"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn trotter_scan_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scan.csv");
    let args = ["trotter", "--norm", "1", "--tf", "2", "--tau", "0.2", "--c0", "0.3", "--p-min", "4", "--p-max", "40", "--out"];
    let mut full: Vec<&str> = args.to_vec();
    full.push(csv.to_str().unwrap());
    assert!(qanneal(&full).status.success());
    let text = read(&csv);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,delta_t,bound_osc,bound_no_osc,relative_enhancement"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 37);
    let best = rows.iter().max_by(|a, b| a[4].parse::<f64>().unwrap().total_cmp(&b[4].parse().unwrap())).unwrap();
    assert_eq!(best[0], "10");
    // 17 significant digits
    assert_eq!(rows[0][1].split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
    let first = read(&csv);
    assert!(qanneal(&full).status.success());
    assert_eq!(first, read(&csv), "reruns must be byte-identical");
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("scan.csv.manifest.json"))).unwrap();
    assert_eq!(manifest["command_line"][1], "trotter");
    assert!(manifest["timing"]["wall_clock_seconds"].is_number());
}

#[test]
fn instance_round_trip_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.json");
    assert!(qanneal(&["gen-instance", "--n", "4", "--seed", "11", "--out", inst.to_str().unwrap()]).status.success());
    let shown = qanneal(&["show-instance", "--instance", inst.to_str().unwrap()]);
    assert!(shown.status.success());
    let a: serde_json::Value = serde_json::from_str(&read(&inst)).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&shown.stdout).unwrap();
    assert_eq!(a, b);
    let spec = qanneal(&["spectrum", "--instance", inst.to_str().unwrap(), "--grid", "5", "--levels", "3"]);
    let text = String::from_utf8(spec.stdout).unwrap();
    assert!(text.starts_with("u,lambda0,lambda1,lambda2,gap,gamma_me,kappa0,kappa1\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn evolve_reads_csv_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.json");
    qanneal(&["gen-instance", "--n", "3", "--seed", "2", "--out", inst.to_str().unwrap()]);
    let sched = dir.path().join("s.csv");
    std::fs::write(&sched, "t,u\n0,1\n0.5,0.5\n1.0,0.0\n").unwrap();
    let trace = dir.path().join("trace.csv");
    let out = qanneal(&[
        "evolve", "--instance", inst.to_str().unwrap(), "--schedule", sched.to_str().unwrap(), "--dt", "0.1",
        "--trace-out", trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((summary["final_norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(read(&trace).lines().count(), 12);
    std::fs::write(&sched, "t,u\n0,1\n0.3,0.5\n1.0,0.0\n").unwrap();
    let bad = qanneal(&["evolve", "--instance", inst.to_str().unwrap(), "--schedule", sched.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn qaoa_bab_optimal_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    qanneal(&["gen-instance", "--n", "4", "--seed", "5", "--out", &p("i.json")]);
    let q = qanneal(&["qaoa", "--instance", &p("i.json"), "--p", "2", "--p-max", "3", "--restarts", "2", "--out", &p("q.json")]);
    assert!(matches!(q.status.code(), Some(0 | 2)));
    let qj: serde_json::Value = serde_json::from_str(&read(Path::new(&p("q.json")))).unwrap();
    assert_eq!(qj["p"], 3);
    assert_eq!(qj["sweep"].as_array().unwrap().len(), 2);
    let b = qanneal(&["bab", "--instance", &p("i.json"), "--qaoa", &p("q.json"), "--variant", "fixed", "--restarts", "1", "--out", &p("b.json")]);
    assert!(matches!(b.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&b.stderr));
    let bj: serde_json::Value = serde_json::from_str(&read(Path::new(&p("b.json")))).unwrap();
    assert!(bj["energy"].as_f64().unwrap() <= bj["qaoa_energy"].as_f64().unwrap() + 0.05);
    let init = format!("bab:{}", p("b.json"));
    let o = qanneal(&["optimal", "--instance", &p("i.json"), "--grid", "100", "--init", &init, "--iters", "20", "--out", &p("o.json")]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&o.stderr));
    let oj: serde_json::Value = serde_json::from_str(&read(Path::new(&p("o.json")))).unwrap();
    assert!(oj["energy"].as_f64().unwrap() <= bj["energy"].as_f64().unwrap() + 0.02);
    assert_eq!(oj["schedule"]["values"].as_array().unwrap().len(), 100);
}

#[test]
fn optimal_requires_a_time() {
    let out = qanneal(&["optimal", "--grid", "10"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn hidden_xcheck_agrees_with_oracles() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.json");
    qanneal(&["gen-instance", "--n", "3", "--seed", "8", "--out", inst.to_str().unwrap()]);
    let out = qanneal(&["xcheck", "--instance", inst.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let close = |a: &str, b: &str| (v[a].as_f64().unwrap() - v[b].as_f64().unwrap()).abs() < 1e-10;
    assert!(close("ground_energy", "oracle_ground_energy"));
    assert!(close("linear_ramp_energy", "oracle_linear_ramp_energy"));
}
