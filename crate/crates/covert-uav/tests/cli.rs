use std::path::Path;
use std::process::{Command, Output};

const SHORT: &str = r#"
[scenario]
flight_period = "20 s"
q_init = ["-140 m", "290 m"]
q_final = ["-60 m", "290 m"]
"#;

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covert-uav"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_config_exits_1_naming_the_path() {
    let d = tempfile::tempdir().unwrap();
    let o = bin(&["run", "--config", "nope.toml", "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.toml"), "{}", stderr(&o));
}

#[test]
fn bad_key_exits_1_naming_the_key() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.toml"), "[scenario]\nv_max = \"5 parsec\"\n").unwrap();
    let o = bin(&["run", "--config", "c.toml"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scenario.v_max"), "{}", stderr(&o));
}

#[test]
fn unreachable_endpoints_exit_2_naming_mobility() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.toml"), "[scenario]\nflight_period = \"100 s\"\n").unwrap();
    let o = bin(&["run", "--config", "c.toml", "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mobility"), "{}", stderr(&o));
}

#[test]
fn reference_run_writes_plan_and_trace() {
    let d = tempfile::tempdir().unwrap();
    let o = bin(&["run", "--out", "o", "--dump-subproblem"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let plan = json(&d.path().join("o/plan.json"));
    assert_eq!(plan["num_slots"], 300);
    assert_eq!(plan["slots"].as_array().unwrap().len(), 300);
    assert!(plan["actr_bps_hz"].as_f64().unwrap() > 0.0);
    assert_eq!(plan["scheme"], "jtp");
    for key in ["x_m", "y_m", "power_w", "rate_bps_hz", "lambda", "xi_lower", "outage_margin"] {
        assert!(plan["slots"][0][key].is_number(), "{key}");
    }
    let trace = std::fs::read_to_string(d.path().join("o/trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,actr_bps_hz,"));
    let dump = std::fs::read_to_string(d.path().join("o/subproblem.txt")).unwrap();
    assert!(dump.contains("300 slots"));
}

#[test]
fn validate_round_trip_and_power_perturbation() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.toml"), SHORT).unwrap();
    let o = bin(&["run", "--config", "c.toml", "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mc = ["--mc-samples", "20000", "--seed", "7"];

    let v = |plan: &str, out: &str| {
        let mut args = vec!["validate", "--plan", plan, "--config", "c.toml", "--out", out];
        args.extend(mc);
        bin(&args, d.path())
    };
    let o = v("o/plan.json", "v1");
    assert_eq!(o.status.code(), Some(0), "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    let o = v("o/plan.json", "v2");
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read(d.path().join("v1/validation.json")).unwrap();
    let b = std::fs::read(d.path().join("v2/validation.json")).unwrap();
    assert_eq!(a, b, "same seed, same report");

    let mut plan = json(&d.path().join("o/plan.json"));
    let p = plan["slots"][7]["power_w"].as_f64().unwrap();
    plan["slots"][7]["power_w"] = serde_json::json!(10.0 * p);
    std::fs::write(d.path().join("loud.json"), serde_json::to_string(&plan).unwrap()).unwrap();
    let o = v("loud.json", "v3");
    assert_eq!(o.status.code(), Some(2));
    let rep = json(&d.path().join("v3/validation.json"));
    assert_eq!(rep["failing_covertness_slots"], serde_json::json!([7]));
    assert_eq!(rep["pass"], false);
}

#[test]
fn validate_with_mismatched_slot_count_exits_1() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.toml"), SHORT).unwrap();
    let o = bin(&["run", "--config", "c.toml", "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(0));
    std::fs::write(d.path().join("other.toml"), SHORT.replace("20 s", "21 s")).unwrap();
    let o = bin(
        &["validate", "--plan", "o/plan.json", "--config", "other.toml", "--mc-samples", "1000"],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("N = 21"), "{}", stderr(&o));
}

#[test]
fn sweep_rows_are_ordered_and_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let spec = format!(
        "param = \"rho_w\"\nvalues = [0.05, 0.1]\nschemes = [\"jtp\", \"stp\"]\nmc_validate = true\n{SHORT}"
    );
    std::fs::write(d.path().join("s.toml"), spec).unwrap();
    let args = ["sweep", "--sweep", "s.toml", "--mc-samples", "2000", "--grid-fraction", "0"];
    let o = bin(&[&args[..], &["--out", "a"]].concat(), d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    bin(&[&args[..], &["--out", "b"]].concat(), d.path());
    let a = std::fs::read_to_string(d.path().join("a/sweep.csv")).unwrap();
    let b = std::fs::read_to_string(d.path().join("b/sweep.csv")).unwrap();
    assert_eq!(a, b);
    let rows = covert_uav::report::parse_sweep_csv(&a).unwrap();
    let cells: Vec<(f64, &str)> = rows.iter().map(|r| (r.value, r.scheme.as_str())).collect();
    assert_eq!(cells, vec![(0.05, "JTP"), (0.05, "STP"), (0.1, "JTP"), (0.1, "STP")]);
    assert!(rows.iter().all(|r| r.feasible && r.max_outage_mc.is_some()));
    assert!(rows[0].actr_bps_hz >= rows[1].actr_bps_hz);
}

#[test]
fn sweep_with_unknown_parameter_exits_1() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("s.toml"), "param = \"altitude\"\nvalues = [1]\n").unwrap();
    let o = bin(&["sweep", "--sweep", "s.toml"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("param"));
}
