use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn workbench(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_workbench"));
    cmd.args(args).env_remove("WORKBENCH_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn small_config(dir: &Path, extra: &str) -> String {
    let p = dir.join("small.toml");
    std::fs::write(
        &p,
        format!("[grid]\nn_points = 2048\n\n[ensemble]\nn_samples = 400\n{extra}"),
    )
    .unwrap();
    p.display().to_string()
}

#[test]
fn bound_is_exactly_two() {
    let v = json(&workbench(&["bell", "bound"], &[]));
    assert_eq!(v["result"]["maximum"].as_f64(), Some(2.0));
    assert_eq!(v["result"]["strategies"].as_array().unwrap().len(), 16);
    assert!(v.get("runtime_seconds").is_none());
}

#[test]
fn singlet_chsh_and_fine_certificate() {
    let v = json(&workbench(&["bell", "chsh", "--model", "singlet", "--angles", "0", "90", "45", "135"], &[]));
    let s = v["result"]["max_abs_s"].as_f64().unwrap();
    assert!((s - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    let v = json(&workbench(&["bell", "fine", "--singlet", "--angles", "0", "90", "45", "135"], &[]));
    assert_eq!(v["result"]["outcome"]["status"], "infeasible");
    assert!(v["result"]["outcome"]["certificate"]["value"].as_f64().unwrap() > 2.0);
}

#[test]
fn behavior_files_round_trip_and_malformed_ones_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fine.json");
    let v = json(&workbench(&["bell", "fine", "--singlet", "--angles", "0", "45", "0", "45"], &[]));
    std::fs::write(&out, serde_json::to_string(&v["result"]["behavior"]).unwrap()).unwrap();
    let again = json(&workbench(&["bell", "fine", "--behavior", out.to_str().unwrap()], &[]));
    assert_eq!(again["result"]["outcome"]["status"], v["result"]["outcome"]["status"]);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"settings\": [0, 90]}").unwrap();
    let r = workbench(&["bell", "fine", "--behavior", bad.to_str().unwrap()], &[]);
    assert_eq!(r.status.code(), Some(2));
    let r = workbench(&["bell", "fine", "--behavior", "/nonexistent/behavior.json"], &[]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn invalid_arguments_exit_two() {
    assert_eq!(workbench(&["bell", "toy", "--samples", "0"], &[]).status.code(), Some(2));
    assert_eq!(workbench(&["bell", "chsh", "--model", "nope"], &[]).status.code(), Some(2));
    assert_eq!(workbench(&["bell", "bound"], &[("WORKBENCH_THREADS", "zero")]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "[field]\nmu = -1.0\n");
    assert_eq!(workbench(&["sg", "run", "--config", &cfg], &[]).status.code(), Some(2));
}

#[test]
fn halted_mid_interaction_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "\n[run]\nt_final = 0.3\n");
    let r = workbench(&["sg", "run", "--config", &cfg, "--theta", "90"], &[]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn sg_run_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let args = ["sg", "run", "--config", &cfg, "--theta", "60"];
    let one = workbench(&args, &[("WORKBENCH_THREADS", "1")]);
    let two = workbench(&args, &[("WORKBENCH_THREADS", "3")]);
    assert_eq!(one.stdout, two.stdout);
    let v = json(&one);
    assert_eq!(v["config"]["ensemble"]["n_samples"], 400);
    assert_eq!(v["config"]["grid"]["x_min"].as_f64(), Some(-40.0));
    assert_eq!(v["seed"], 42);
    assert_eq!(v["result"]["order_inversions"], 0);
    let p = v["result"]["p_plus"]["value"].as_f64().unwrap();
    assert!((p - 0.75).abs() < 3.0 * (0.75f64 * 0.25 / 400.0).sqrt());
}

#[test]
fn timing_and_plots_are_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let plots = dir.path().join("plots");
    let out = dir.path().join("report.json");
    let r = workbench(
        &[
            "sg",
            "run",
            "--config",
            &cfg,
            "--timing",
            "--emit-plots",
            plots.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(r.status.success());
    assert!(r.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["runtime_seconds"].as_f64().unwrap() > 0.0);
    for f in ["snapshot_initial.csv", "snapshot_final.csv", "trajectories.csv", "trajectories.json"] {
        assert!(plots.join(f).exists(), "{f}");
    }
    let header = std::fs::read_to_string(plots.join("snapshot_final.csv")).unwrap();
    assert!(header.starts_with("x,re_up,im_up,re_down,im_down,rho,j,v\n"));
}

#[test]
fn partitions_report_marks_the_hidden_table_unobservable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "\n[spin]\ntheta_deg = 30.0\n");
    let v = json(&workbench(&["sg", "partitions", "--config", &cfg, "--theta-a", "0", "--theta-b", "90"], &[]));
    let r = &v["result"];
    assert_eq!(r["tables"]["hidden_joint"]["observable"], false);
    assert_eq!(r["frechet"]["holds"], true);
    assert_eq!(r["frechet"]["marginals_exact"], true);
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let out = workbench(&["bell", "chsh"], &[]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"max_abs_s\": 2.8284271247461898e0"), "{text}");
}
