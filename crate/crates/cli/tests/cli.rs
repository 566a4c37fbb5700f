use std::process::{Command, Output};

use holonomy_lab::config::RunConfig;
use holonomy_lab::mcf::MONITOR_HEADER;
use holonomy_lab::suite::{sweep_columns, Quantity};

fn lab(args: &[&str]) -> Output {
    lab_env(args, &[])
}

fn lab_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_holonomy-lab"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let i = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

#[test]
fn flat_stenzel_is_rejected() {
    let o = lab(&["verify", "stenzel", "--n", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n > 1 required"));
}

#[test]
fn verify_passes_for_spec_examples() {
    let o = lab(&["verify", "stenzel", "--n", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = lab(&["verify", "bs", "--space", "asd_s4", "--kappa", "2", "--samples", "2000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("structure.nabla_A_F"));
}

#[test]
fn failing_checks_exit_one_with_detail() {
    let o = lab(&["verify", "--family", "calabi", "--n", "1", "--tol", "1e-20", "--samples", "200"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL identities.closed_form"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["sweep", "stenzel", "--quantity", "torsion"][..],
        &["sweep", "calabi", "--quantity", "abc"],
        &["verify", "torus"],
        &["verify", "bs", "--space", "S7"],
        &["verify", "stenzel", "--grid", "1:0:5"],
        &["flow", "--mode", "spiral"],
        &["verify", "stenzel", "--family", "calabi"],
    ] {
        assert_eq!(lab(args).status.code(), Some(2), "{args:?}");
    }
    // clap rejects unknown flags with its own usage error
    assert_eq!(lab(&["verify", "stenzel", "--colour", "red"]).status.code(), Some(2));
    let o = lab_env(&["verify", "stenzel"], &[("HOLONOMY_LAB_THREADS", "0")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_graphical_start_exits_three() {
    let o = lab(&["flow", "--mesh-level", "1", "--eps", "5"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn abc_sweep_has_200_rows() {
    let o = lab(&["sweep", "stenzel", "--n", "2", "--quantity", "abc"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert_eq!(csv.lines().next().unwrap(), sweep_columns(Quantity::Abc));
    assert_eq!(csv.lines().count(), 201);
}

#[test]
fn calabi_hessian_rows_are_positive() {
    let o = lab(&["sweep", "calabi", "--n", "2", "--quantity", "hessian"]);
    let csv = stdout(&o);
    assert!(column(&csv, "min").iter().all(|v| *v > 0.0));
    for name in ["h_0", "h_7"] {
        assert!(column(&csv, name).iter().all(|v| *v > 0.0));
    }
}

#[test]
fn bs_relation_residuals_are_tiny() {
    for space in ["spinor_S3", "asd_S4", "asd_CP2", "neg_spinor_S4"] {
        let o = lab(&["sweep", "bs", "--space", space, "--quantity", "relation", "--grid", "0:5:100"]);
        let r = column(&stdout(&o), "ratio_residual");
        assert_eq!(r.len(), 100);
        assert!(r.iter().all(|v| v.abs() < 1e-12), "{space}");
    }
}

#[test]
fn help_documents_csv_columns() {
    let help = stdout(&lab(&["sweep", "--help"]));
    for q in Quantity::ALL {
        for part in sweep_columns(q).split(" (stenzel, calabi); ") {
            assert!(help.contains(part.trim_end_matches(" (bs)")), "{part}");
        }
    }
    assert!(stdout(&lab(&["flow", "--help"])).contains(MONITOR_HEADER));
}

#[test]
fn flow_output_is_reproducible_from_its_json() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run").to_string_lossy().into_owned();
    let args = ["flow", "--mesh-level", "1", "--eps", "0.05", "--mode", "random_seeded", "--seed", "4", "--t-end", "0.1", "--out", &prefix];
    let o = lab(&args);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    let csv = std::fs::read_to_string(format!("{prefix}.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), MONITOR_HEADER);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(format!("{prefix}.json")).unwrap()).unwrap();
    let mut echoed: RunConfig = serde_json::from_value(json["config"].clone()).unwrap();
    assert_eq!(echoed.seed, Some(4));

    let prefix2 = dir.path().join("again").to_string_lossy().into_owned();
    echoed.out = Some(prefix2.clone());
    let cfg_path = dir.path().join("again.cfg");
    std::fs::write(&cfg_path, echoed.to_key_values()).unwrap();
    let o = lab(&["flow", "--config", cfg_path.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    assert_eq!(std::fs::read_to_string(format!("{prefix2}.csv")).unwrap(), csv);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(&cfg, "# abc sweep\ncommand = sweep\nfamily = stenzel\nquantity = abc\ngrid = 0:0.5:10\n").unwrap();
    let o = lab(&["sweep", "--config", cfg.to_str().unwrap(), "--grid", "0:0.5:7"]);
    assert_eq!(stdout(&o).lines().count(), 8);
    assert_eq!(lab(&["verify", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&cfg, "family = stenzel\nwhatever = 1\n").unwrap();
    assert_eq!(lab(&["sweep", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn thread_cap_does_not_change_results() {
    let args = ["sweep", "bs", "--space", "spinor_S3", "--quantity", "hessian", "--grid", "0:5:20"];
    let one = lab_env(&args, &[("HOLONOMY_LAB_THREADS", "1")]);
    let three = lab_env(&args, &[("HOLONOMY_LAB_THREADS", "3")]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn report_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = lab(&["report", "calabi", "--n", "1", "--samples", "300", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(json["reports"][0]["family"], "calabi n=1");
    assert_eq!(json["config"]["samples"], 300);
}
