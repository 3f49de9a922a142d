use std::path::PathBuf;
use std::process::{Command, Output};

fn ncflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncflab")).args(args).env_remove("NCFLAB_OUT").output().expect("spawn")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("ncflab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn lists_every_experiment() {
    let o = ncflab(&["list"]);
    assert!(o.status.success());
    let s = String::from_utf8(o.stdout).unwrap();
    for id in ["qt-riesz", "transference", "kakeya-scaling", "overlap", "fuzz", "riesz-grid"] {
        assert!(s.lines().any(|l| l == id), "{id} missing");
    }
}

#[test]
fn run_writes_csv_and_json() {
    let dir = scratch("run");
    let cfg = dir.join("c.cfg");
    std::fs::write(&cfg, "seed = 2\n[[experiment]]\nid = \"plancherel\"\n[experiment.params]\ngrids = [8]\n[[experiment]]\nid = \"riesz-exponents\"\n").unwrap();
    let out = dir.join("out");
    let o = ncflab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("experiment,label,seed,metric,value,passed"));
    assert!(csv.contains("plancherel,,2,pairing,"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
}

#[test]
fn output_root_from_environment() {
    let dir = scratch("env");
    let cfg = dir.join("c.cfg");
    std::fs::write(&cfg, "out_dir = \"ignored\"\n[[experiment]]\nid = \"riesz-exponents\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ncflab")).args(["run", cfg.to_str().unwrap()]).env("NCFLAB_OUT", dir.join("env-out")).output().unwrap();
    assert!(o.status.success());
    assert!(dir.join("env-out/results.json").exists());
}

#[test]
fn empty_config_exits_zero() {
    let dir = scratch("empty");
    let cfg = dir.join("c.cfg");
    std::fs::write(&cfg, "seed = 1\n").unwrap();
    let o = ncflab(&["run", cfg.to_str().unwrap(), "--out", dir.join("o").to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout_json(&o), serde_json::json!([]));
}

#[test]
fn failing_check_exits_one() {
    let dir = scratch("fail");
    let cfg = dir.join("c.cfg");
    // a negative tolerance cannot be met
    std::fs::write(&cfg, "[tolerances]\n\"plancherel.tol\" = -1.0\n[[experiment]]\nid = \"plancherel\"\n[experiment.params]\ngrids = [8]\n").unwrap();
    let o = ncflab(&["run", cfg.to_str().unwrap(), "--out", dir.join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}

#[test]
fn bad_input_is_a_usage_error() {
    let dir = scratch("bad");
    let cfg = dir.join("c.cfg");
    std::fs::write(&cfg, "[[experiment]]\nid = \"no-such-thing\"\n").unwrap();
    assert_eq!(ncflab(&["run", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(ncflab(&["interp", "--m0", "bogus", "--m1", "const:1"]).status.code(), Some(2));
    assert_eq!(ncflab(&["riesz-exponents", "--eps", "0.7"]).status.code(), Some(2));
    assert!(!ncflab(&["no-such-command"]).status.success());
}

#[test]
fn interp_reproduces_exponential() {
    let o = ncflab(&["interp", "--m0", "const:1", "--m1", &format!("const:{}", std::f64::consts::E), "--t-grid", "3"]);
    assert!(o.status.success());
    for row in stdout_json(&o).as_array().unwrap() {
        let t = row["t"].as_f64().unwrap();
        assert!((row["value"].as_f64().unwrap() - t.exp()).abs() < 1e-6);
    }
}

#[test]
fn maxnorm_of_commuting_family() {
    let dir = scratch("maxnorm");
    let input = dir.join("m.json");
    std::fs::write(&input, "[[[[2,0],[0,0]],[[0,0],[1,0]]],[[[1,0],[0,0]],[[0,0],[3,0]]]]").unwrap();
    let o = ncflab(&["maxnorm", "--input", input.to_str().unwrap(), "--p", "2"]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    // the supremum is diag(2, 3) with normalized 2-norm sqrt(13/2)
    let want = 6.5f64.sqrt();
    assert!(v["lower"].as_f64().unwrap() <= want + 1e-9);
    assert!((v["upper"].as_f64().unwrap() - want).abs() < 1e-9);
    assert!((v["lower"].as_f64().unwrap() - want).abs() < 1e-6);
}

#[test]
fn experiment_subcommands_emit_records() {
    let o = ncflab(&["--seed", "4", "audit", "partition", "--points", "100", "--k-list", "1,2,3"]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v[0]["experiment"], "partition");
    assert_eq!(v[0]["seed"], 4);
    assert_eq!(v[0]["passed"], true);
    let o = ncflab(&["fuzz", "--kinds", "convexity,trace-cs", "--trials", "100", "--dims", "2,3", "--format", "csv"]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("violations[trace-cs]"));
}
