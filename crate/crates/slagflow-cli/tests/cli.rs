use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn slagflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slagflow")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("slagflow-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn model_report_writes_a_passing_record() {
    let out = scratch("report");
    let cfg = configs().join("model_report.toml");
    let o = slagflow(&["model-report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let record = std::fs::read_to_string(out.join("record.json")).unwrap();
    assert!(record.contains("\"config_hash\""));
    for f in ["config.toml", "initial.mesh", "report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn same_config_and_seed_give_identical_outputs() {
    let cfg = configs().join("flow_graph.toml");
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    for d in [&a, &b] {
        let o =
            slagflow(&["flow", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap(), "--max-time", "0.2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["flow_trace.csv", "flowed.mesh", "decay_fit.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    std::fs::remove_dir_all(&a).unwrap();
    std::fs::remove_dir_all(&b).unwrap();
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let dir = scratch("bad");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("c.toml");
    std::fs::write(&cfg, "scenario = \"sideways\"\nseed = 0\noutput_dir = \"o\"\n").unwrap();
    let o = slagflow(&["model-report", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sideways") && err.contains("model-report"), "{err}");

    let o = slagflow(&["acceptance", "A2,A99"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("A99"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn acceptance_subset_and_fibration_tools() {
    let o = slagflow(&["acceptance", "A2,A13"]);
    assert!(o.status.success());
    let lines: Vec<String> = String::from_utf8_lossy(&o.stdout).lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("A2") && lines[0].contains("PASS"));

    let o = slagflow(&["fibration", "sl2z", "--d", "9", "--types", "I1,I1,I1"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("Feasible"));
    let o = slagflow(&["fibration", "sl2z", "--d", "9", "--types", "I1,II"]);
    assert_eq!(o.status.code(), Some(1));

    let fam = scratch("family");
    assert!(slagflow(&["fibration", "model", "--d", "3", fam.to_str().unwrap()]).status.success());
    let o = slagflow(&["fibration", "monodromy", fam.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["monodromy"], serde_json::json!([[1, 3], [0, 1]]));
    std::fs::remove_dir_all(&fam).unwrap();
}

#[test]
fn classify_reads_an_incidence_file() {
    use slagflow::fibration::{fixture, KodairaType};
    let dir = scratch("classify");
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("fiber.txt");
    std::fs::write(&f, fixture(KodairaType::IStar(0)).to_text()).unwrap();
    let o = slagflow(&["fibration", "classify", f.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "I0* (euler 6)");
    std::fs::remove_dir_all(&dir).unwrap();
}
