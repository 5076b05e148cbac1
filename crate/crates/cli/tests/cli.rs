use std::path::Path;
use std::process::{Command, Stdio};

fn fgts() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fgts"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(
        &path,
        r#"
[run]
horizon = 300
seeds = [0, 1]

[env]
preset = "linear-20d"

[policy]
preset = "FGLMCTS-L2B1"

[sampler]
inner_steps = 10
"#,
    )
    .unwrap();
    path
}

fn files_ending(dir: &Path, suffix: &str) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(suffix))
        .collect();
    names.sort();
    names
}

#[test]
fn run_writes_traces_summary_and_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("out");
    let status = fgts()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--seeds", "3,4,5", "--out"])
        .arg(&out)
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    let traces = files_ending(&out, ".csv");
    assert_eq!(files_ending(&out, "__summary.csv").len(), 1);
    assert_eq!(files_ending(&out, "__curve.csv").len(), 1);
    for seed in [3, 4, 5] {
        assert!(traces
            .iter()
            .any(|n| n.ends_with(&format!("__seed{seed}.csv"))));
    }
}

#[test]
fn sweep_produces_one_summary_per_value_and_report_lists_them() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("out");
    let status = fgts()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--seeds", "0", "--out"])
        .arg(&out)
        .args(["--param", "lambda_fg", "--values", "0,0.1,1"])
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(files_ending(&out, "__summary.csv").len(), 3);

    let output = fgts().args(["report", "--dir"]).arg(&out).output().unwrap();
    assert!(output.status.success());
    let table = String::from_utf8(output.stdout).unwrap();
    for v in ["lambda_fg=0 ", "lambda_fg=0.1 ", "lambda_fg=1 "] {
        assert!(table.contains(v), "missing {v} in\n{table}");
    }
}

#[test]
fn policy_override_replaces_the_file_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("exp.toml");
    std::fs::write(
        &path,
        "[run]\nhorizon = 100\nseeds = [0]\n[env]\npreset = \"wheel\"\n[policy]\npreset = \"MALATS\"\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let status = fgts()
        .args(["run", "--config"])
        .arg(&path)
        .args(["--policy", "LinUCB", "--out"])
        .arg(&out)
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    let summaries = files_ending(&out, "__summary.csv");
    assert_eq!(summaries.len(), 1);
    assert!(summaries[0].contains("__LinUCB__"), "{summaries:?}");
}

#[test]
fn bad_config_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(
        &path,
        "[run]\nhorizon = 10\n[env]\npreset = \"linear-20d\"\n[bogus]\nx = 1\n",
    )
    .unwrap();
    let output = fgts()
        .args(["run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("bogus"));
}
