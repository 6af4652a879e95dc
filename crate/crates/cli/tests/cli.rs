use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn prinn(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prinn")).args(args).env("PRINN_OUTPUT_ROOT", root).output().expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

const FAST_CONTROLLER: &str = "experiment = finn-controller\n[controller]\nsteps = 400\n";

#[test]
fn list_shows_every_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out = prinn(dir.path(), &["list"]);
    assert!(out.status.success());
    let s = text(&out);
    for name in ["pinn-decay", "fcinn-decay", "sinnet-oscillator", "finn-case1", "finn-derivative-case2", "finn-controller"] {
        assert!(s.contains(name), "{name} missing from:\n{s}");
    }
    let out = prinn(dir.path(), &["list", "finn-controler"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("did you mean `finn-controller`"));
}

#[test]
fn run_writes_artifacts_and_verify_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.conf");
    fs::write(&cfg, FAST_CONTROLLER).unwrap();
    let out = prinn(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out));
    let run = dir.path().join("finn-controller");
    for f in ["telemetry.csv", "snapshot.csv", "trajectory.csv", "baseline.csv", "report.txt"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    assert!(!fs::read_dir(&run).unwrap().any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
    assert!(prinn(dir.path(), &["verify", run.to_str().unwrap()]).status.success());

    // a report edited to claim a pass it did not earn is caught
    let report = fs::read_to_string(run.join("report.txt")).unwrap();
    let forged = report.replacen("threshold=<=2e-1", "threshold=<=1e-9", 1);
    assert_ne!(forged, report);
    fs::write(run.join("report.txt"), forged).unwrap();
    let out = prinn(dir.path(), &["verify", run.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(text(&out).contains("contradicts"));
}

#[test]
fn failing_checks_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("weak.conf");
    // too little authority to track the step
    fs::write(&cfg, format!("{FAST_CONTROLLER}control_gain = 0.01\n")).unwrap();
    let out = prinn(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", text(&out));
    assert!(text(&out).contains("overall=fail"));
    assert_eq!(prinn(dir.path(), &["verify", dir.path().join("finn-controller").to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn bad_configs_exit_two_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "experiment = pinn-decy\n").unwrap();
    let out = prinn(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("did you mean `pinn-decay`"));

    fs::write(&cfg, "experiment = pinn-decay\n[train]\nepochs = -3\n").unwrap();
    let out = prinn(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("line 3"), "{}", text(&out));
    assert!(!dir.path().join("pinn-decay").exists());
}

#[test]
fn sweep_runs_each_value_into_its_own_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.conf");
    fs::write(&cfg, FAST_CONTROLLER).unwrap();
    let out = prinn(dir.path(), &["sweep", cfg.to_str().unwrap(), "--param", "controller.seed", "--values", "1,2"]);
    assert!(out.status.success(), "{}", text(&out));
    for v in ["1", "2"] {
        let run = dir.path().join("finn-controller").join(format!("controller.seed={v}"));
        assert!(run.join("report.txt").is_file());
    }
    let out = prinn(dir.path(), &["sweep", cfg.to_str().unwrap(), "--param", "controller.seed", "--values", "1,x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_rejects_incomplete_directories() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!prinn(dir.path(), &["verify", dir.path().to_str().unwrap()]).status.success());
    fs::write(dir.path().join("report.txt"), "check=a measured=0e0 threshold=<1e0 status=pass\noverall=pass\n").unwrap();
    let out = prinn(dir.path(), &["verify", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(text(&out).contains("telemetry.csv"));
}
