use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsepdo"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn region_vertices_csv() {
    let (code, csv, err) = run(&["region", "--m=-1/4", "--rho", "0"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(csv, "vertex,x,y\n1,3/4,1/4\n2,3/4,1/2\n3,1/2,3/4\n4,1/4,3/4\n");
    assert!(err.contains("s_e = 4"));
}

#[test]
fn region_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# order and gain\nm = -1/2\nrho = 0\n").unwrap();
    let (code, csv, err) = run(&["region", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(csv.contains("2,1,1/2\n"));
    assert!(err.contains("r_e = 2"));
    let (_, csv, _) = run(&["region", "--config", cfg.to_str().unwrap(), "--m=-1/4"]);
    assert!(csv.contains("1,3/4,1/4"));
}

#[test]
fn empty_trials_is_config_error() {
    let (code, _, _) = run(&["dominate", "--trials", "0"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["region", "--m", "1/2"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["dominate", "--N", "500"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["kernel", "--a", "1"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["accept", "--only", "18"]);
    assert_eq!(code, 2);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let (code, _, err) = run(&["dominate", "--N", "256", "--trials", "3", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    assert!(String::from_utf8(x).unwrap().starts_with("trial,pairing,form,ratio,carleson,cubes\n"));
}

#[test]
fn plot_script_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("region.csv");
    let (code, _, _) = run(&["region", "--out", out.to_str().unwrap(), "--plot"]);
    assert_eq!(code, 0);
    let gp = std::fs::read_to_string(dir.path().join("region.gp")).unwrap();
    assert!(gp.contains("plot DATA"));
}

#[test]
fn multiplier_verdicts() {
    let (code, csv, _) = run(&["multiplier", "--alpha", "0.5", "--beta", "0.25"]);
    assert_eq!(code, 0);
    assert!(csv.starts_with("check,order,constant,slope,pass\n"));
    let (code, _, _) = run(&["multiplier", "--alpha", "0.5", "--beta", "0.25", "--set", "declared_beta=0.5"]);
    assert_eq!(code, 1);
}

#[test]
fn accept_subset_and_forced_failure() {
    let (code, csv, _) = run(&["accept", "--only", "1,10"]);
    assert_eq!(code, 0);
    assert_eq!(csv.lines().count(), 3);
    let (code, csv, _) = run(&["accept", "--only", "2,3,4", "--mislabel"]);
    assert_eq!(code, 1);
    let pass: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(4).unwrap()).collect();
    assert_eq!(pass, ["false", "true", "true"]);
}

#[test]
fn kernel_and_propagator_rows() {
    let (code, csv, _) = run(&["kernel", "--a", "2", "--b", "0.5", "--N", "65536"]);
    assert_eq!(code, 0);
    assert!(csv.lines().nth(1).unwrap().starts_with("2,0.5,2,0.5,"));
    let (code, csv, _) = run(&["propagator", "--alpha", "2", "--t", "1"]);
    assert_eq!(code, 0);
    let mass: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(mass < 1e-10);
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    for s in ["region", "decay", "dominate", "sharpness", "weights", "pointwise", "multiplier", "propagator", "kernel", "accept"] {
        assert!(out.contains(s));
    }
}
