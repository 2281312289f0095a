use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn heatlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatlab")).args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Every file in `dir`, with the timestamp line of the manifest dropped.
fn snapshot(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let text = fs::read_to_string(e.path()).unwrap();
            let text: String = text.lines().filter(|l| !l.contains("\"created_unix\"")).collect::<Vec<_>>().join("\n");
            (e.file_name().to_string_lossy().into_owned(), text)
        })
        .collect();
    files.sort();
    files
}

#[test]
fn schedule_before_burn_in_exits_3() {
    let t = tempfile::tempdir().unwrap();
    let o = heatlab(&["kernel", "--p", "p1:1", "--L", "2", "--n", "33", "--dt", "1e-3", "--schedule", "0.005"], t.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("burn-in"));
}

#[test]
fn config_errors_exit_2() {
    let t = tempfile::tempdir().unwrap();
    let o = heatlab(&["geom", "--p", "p1:1", "--tau", "-1"], t.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau < 0"));

    fs::write(t.path().join("bad.cfg"), "[polynomial]\n1 1 1 0\n2 2 one 0\n").unwrap();
    let o = heatlab(&["geom", "--config", "bad.cfg"], t.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let o = heatlab(&["kernel", "--p", "p1:1", "--tau", "0"], t.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn kernel_artifacts_carry_the_config_hash() {
    let t = tempfile::tempdir().unwrap();
    let o = heatlab(
        &["kernel", "--oracle-mode", "--p", "p1:1", "--tau", "0", "--L", "2", "--n", "33", "--dt", "1e-3", "--schedule", "0.05, 0.1"],
        t.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = t.path().join("out");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    for name in ["kernel_000.csv", "kernel_001.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("# config_hash={hash}"));
        assert_eq!(lines.next().unwrap(), "x1,x2,re,im,abs");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 5);
        // 17 significant digits
        assert_eq!(row[0], "-2.0000000000000000e0");
        assert_eq!(text.lines().count(), 2 + 33 * 33);
        assert!(manifest[format!("sha256:{name}")].is_string());
    }
    let k: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("kernel.json")).unwrap()).unwrap();
    assert_eq!(k["config_hash"], hash);
    assert!(k.as_object().unwrap().values().all(|v| !v.is_object() && !v.is_array()));
}

#[test]
fn repeated_runs_are_identical() {
    let t = tempfile::tempdir().unwrap();
    let args = |dir: &'static str| {
        vec!["mc", "--p", "p1:2", "--n-paths", "2000", "--x=0.5,0.25", "--y=1,0", "--s", "0.25", "--seed", "9", "--out", dir]
    };
    assert_eq!(code(&heatlab(&args("a"), t.path())), 0);
    assert_eq!(code(&heatlab(&args("b"), t.path())), 0);
    assert_eq!(snapshot(&t.path().join("a")), snapshot(&t.path().join("b")));
    for cmd in ["geom", "rho"] {
        for d in ["c", "d"] {
            assert_eq!(code(&heatlab(&[cmd, "--p", "p2:2", "--set", "rho.h=0.03125", "--out", d], t.path())), 0);
        }
        assert_eq!(snapshot(&t.path().join("c")), snapshot(&t.path().join("d")));
    }
}

#[test]
fn verify_all_writes_eight_reports() {
    let t = tempfile::tempdir().unwrap();
    let o = heatlab(&["verify", "all", "--p", "p1:1", "--tau", "1"], t.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    let out = t.path().join("out");
    let mut any_fail = false;
    for s in ["gaussian", "longtime", "energy", "derivs", "subsolution", "scaling", "gbounds", "appendix"] {
        let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(format!("report_{s}.json"))).unwrap()).unwrap();
        let v = r["verdict"].as_str().unwrap();
        any_fail |= v == "fail";
        assert!(stdout.lines().any(|l| l.starts_with(s) && l.contains(v)), "{stdout}");
    }
    assert_eq!(code(&o), if any_fail { 1 } else { 0 }, "{stdout}");
}
