use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn magflow(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_magflow"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("MAGFLOW_THREADS", t),
        None => cmd.env_remove("MAGFLOW_THREADS"),
    };
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn constants_scenario_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("torus2_constants.toml");
    let out = tmp.path().join("out");
    let o = magflow(&["constants", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["constants"]["isoperimetric"]["C0"], 2.7071067811865475);
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS constants.delta0"));
}

#[test]
fn failed_assertion_exits_one_with_list() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[manifold]\ndim = 2\n[sigma]\nname = \"area\"\ndelta = 1.0\n[expect]\nC1 = 4.0\n");
    let out = tmp.path().join("out");
    let o = magflow(&["constants", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("failed assertions: constants.C1"));
    assert!(out.join("report.json").exists());
}

#[test]
fn schema_violation_exits_two_with_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[manifold]\ndim = 2\n[flow]\ndtt = 0.1\n");
    let o = magflow(&["validate", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`flow.dtt`"));

    let cfg = write(tmp.path(), "d.toml", "[manifold]\ndim = 2\n[class]\nwinding = [1, 2, 3]\n");
    let o = magflow(&["report", "--config", &cfg, "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`class.winding`"));

    let cfg = write(tmp.path(), "e.toml", "[manifold]\ndim = 2\nmetric = flat\n");
    let o = magflow(&["validate", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn validate_reports_warnings_without_failing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "[manifold]\ndim = 3\n[sigma]\ndelta = 1.0\n[[sigma.terms]]\ni = 1\nj = 2\nstrength = 1.0\n[class]\nwinding = [1, 0, 0]\n",
    );
    let o = magflow(&["validate", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("class not σ-atoroidal; action_sigma unavailable"));
    let cfg = write(tmp.path(), "d.toml", "[manifold]\ndim = 2\n[sigma]\nname = \"area\"\ndelta = 1.0\n[system]\ntau = 0.5\n");
    let o = magflow(&["validate", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(err.contains("δ₀") && err.contains("notice: class.winding is empty"), "{err}");
}

#[test]
fn outputs_are_bit_stable_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("conformal_full_report.toml");
    let mut snaps = Vec::new();
    for (k, threads) in [Some("1"), Some("4"), None].into_iter().enumerate() {
        let out = tmp.path().join(format!("run{k}"));
        let o = magflow(&["report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "3"], threads);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        snaps.push(snapshot(&out));
    }
    assert!(snaps[0].keys().any(|p| p.extension().is_some_and(|e| e == "poly")));
    assert!(snaps[0].contains_key(Path::new("orbits/orbit_000.json")));
    assert_eq!(snaps[0], snaps[1]);
    assert_eq!(snaps[0], snaps[2]);
}

#[test]
fn flow_and_index_sweep_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("flow");
    let cfg = configs().join("torus2_circles.toml");
    let o = magflow(&["flow", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,q1,q2,p1,p2\n"));

    let out = tmp.path().join("sweep");
    let cfg = configs().join("torus2_index_sweep.toml");
    let o = magflow(
        &["index-sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--resolution", "64"],
        Some("2"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["index_sweep"]["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn bad_thread_count_is_rejected() {
    let cfg = configs().join("torus2_constants.toml");
    let o = magflow(&["validate", "--config", cfg.to_str().unwrap()], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
}
