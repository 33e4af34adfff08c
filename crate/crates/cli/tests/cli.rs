use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("wavetank-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn wavetank(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wavetank")).args(args).output().unwrap()
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = scratch("simulate");
    let cfg = dir.join("still.toml");
    fs::write(
        &cfg,
        r#"
bathymetry = { kind = "linear", h0 = 0.5, slope = -0.02 }
gauges = [1.0, 3.0]
[mesh]
nx = 4
nz = 1
x0 = 0.0
x1 = 5.0
px = 4
[time]
end_time = 0.2
dt = 0.05
"#,
    )
    .unwrap();
    let out_dir = dir.join("out");
    let o = wavetank(&["simulate", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["gauges.csv", "solver_stats.csv", "state_final.csv", "summary.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let state = fs::read_to_string(out_dir.join("state_final.csv")).unwrap();
    assert_eq!(state.lines().next().unwrap(), "x_star,sigma,u,w,p_d");
    assert_eq!(state.lines().count(), 1 + 17 * 5);
    let gauges = fs::read_to_string(out_dir.join("gauges.csv")).unwrap();
    assert_eq!(gauges.lines().count(), 1 + 5);
    let stats = fs::read_to_string(out_dir.join("solver_stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 1 + 4 * 5);
}

#[test]
fn streamfn_accepts_json() {
    let dir = scratch("streamfn");
    let spec = dir.join("wave.json");
    fs::write(&spec, r#"{"height": 0.05, "depth": 1.0, "length": 4.0, "n_sf": 16, "samples": 8}"#).unwrap();
    let o = wavetank(&["streamfn", spec.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: String = fs::read_to_string(dir.join("streamfn.json")).unwrap();
    assert!(json.contains("\"celerity\""));
    assert_eq!(fs::read_to_string(dir.join("streamfn_profile.csv")).unwrap().lines().count(), 1 + 8);
}

#[test]
fn bad_configs_fail_with_diagnostics() {
    let dir = scratch("bad");
    let cfg = dir.join("bad.toml");
    fs::write(&cfg, "bathymetry = { kind = \"flat\", h = 1.0 }\nunknown_key = 1\n").unwrap();
    let o = wavetank(&["simulate", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let o = wavetank(&["converge", dir.join("missing.toml").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!o.stderr.is_empty());

    let neg = dir.join("neg.toml");
    fs::write(
        &neg,
        "bathymetry = { kind = \"flat\", h = -1.0 }\n[mesh]\nnx = 2\nnz = 1\nx0 = 0.0\nx1 = 1.0\npx = 2\n[time]\nend_time = 1.0\n",
    )
    .unwrap();
    let o = wavetank(&["simulate", neg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(!o.status.success());
}
