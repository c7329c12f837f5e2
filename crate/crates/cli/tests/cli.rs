use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use offload_cli::output::{allocation_from_rows, read_csv, AllocationRow, SummaryRow};
use offload_cli::scenario::{default_vehicle, ScenarioFile, SweepParameter, SweepSection};
use offload_cli::sweep::sweep;
use offload_core::model::build_timeline;
use offload_core::oracle::check_problem1;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn offload(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_offload")).args(args).output().expect("binary runs")
}

fn run_on(sub: &str, scenario: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    offload(&args)
}

fn write_scenario(dir: &Path, s: &ScenarioFile) -> PathBuf {
    let path = dir.join("scenario.json");
    std::fs::write(&path, s.to_json()).unwrap();
    path
}

#[test]
fn solve_single_on_the_default_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_on("solve-single", &scenarios().join("single_tier.json"), dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Vec<SummaryRow> = read_csv(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.len(), 1);
    assert_eq!(summary[0].status, "Optimal");
    assert_eq!(summary[0].solver, "proposed_single");
    let rows: Vec<AllocationRow> = read_csv(&dir.path().join("allocations.csv")).unwrap();
    assert_eq!(rows.len(), 20);
    let sum: f64 = rows.iter().map(|r| r.x).sum();
    assert!((sum - 1.0).abs() < 1e-12, "{sum}");
    let total: f64 = rows.iter().map(|r| r.e_cp_j + r.e_cm_j).sum();
    assert!((total - summary[0].total_j.unwrap()).abs() <= 1e-12 * total);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
    assert!(meta["assumptions"].as_array().unwrap().iter().any(|a| a.as_str().unwrap().starts_with("beta defaults")));
}

#[test]
fn emitted_rows_pass_the_checker_when_re_read() {
    for (name, sub) in [("single_tier.json", "solve-single"), ("two_vehicles.json", "solve-multi")] {
        let dir = tempfile::tempdir().unwrap();
        let path = scenarios().join(name);
        assert!(run_on(sub, &path, dir.path(), &[]).status.success());
        let model = ScenarioFile::load(&path).unwrap().to_model().unwrap();
        let rows: Vec<AllocationRow> = read_csv(&dir.path().join("allocations.csv")).unwrap();
        let alloc = allocation_from_rows(&rows, model.net.num_rsus(), model.vehicles.len());
        let tl = build_timeline(&model.net, &model.vehicles).unwrap();
        let rep = check_problem1(&model.net, &model.vehicles, &tl, &alloc);
        assert!(rep.max_violation <= 1e-7, "{name}: {} {}", rep.worst, rep.max_violation);
    }
}

#[test]
fn output_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let path = scenarios().join("sweep_result_size.json");
    assert!(run_on("sweep", &path, a.path(), &["--workers", "1"]).status.success());
    assert!(run_on("sweep", &path, b.path(), &["--workers", "3"]).status.success());
    for f in ["allocations.csv", "summary.csv", "sweep.dat", "sweep_wide.dat"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn result_size_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_on("sweep", &scenarios().join("sweep_result_size.json"), dir.path(), &[]);
    assert!(out.status.success());
    let table = std::fs::read_to_string(dir.path().join("sweep.dat")).unwrap();
    let proposed: Vec<(f64, f64)> = table
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|f| f[1] == "proposed")
        .map(|f| (f[0].parse().unwrap(), f[2].parse().unwrap()))
        .collect();
    assert_eq!(proposed.iter().map(|p| p.0).collect::<Vec<_>>(), vec![100.0, 200.0, 300.0, 400.0, 500.0, 600.0]);
    assert!(proposed.windows(2).all(|w| w[1].1 >= w[0].1), "{proposed:?}");
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 18);
}

#[test]
fn flags_override_the_sweep_section() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenarios().join("sweep_result_size.json");
    let out =
        run_on("sweep", &path, dir.path(), &["--param", "velocity", "--from", "60", "--to", "200", "--steps", "8"]);
    assert!(out.status.success());
    let summary: Vec<SummaryRow> = read_csv(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.len(), 24);
    // infeasible points stay in the table
    assert_eq!(summary.iter().filter(|r| r.solver == "proposed_single" && r.status == "Infeasible").count(), 2);
}

#[test]
fn malformed_velocity_unit_exits_2_with_the_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        std::fs::read_to_string(scenarios().join("single_tier.json")).unwrap().replace("velocity_kmh", "velocity_mph");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text).unwrap();
    let out = run_on("solve-single", &path, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("vehicles[0]") && err.contains("velocity_mph"), "{err}");
}

#[test]
fn invalid_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = ScenarioFile::single_tier(3, vec![default_vehicle(75.0, 300.0, 10.0)]);
    s.network.rsus[0].coverage_m = 0.0;
    let out = run_on("solve-multi", &write_scenario(dir.path(), &s), &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("network.rsus[0].coverage_m"));
    let two = scenarios().join("two_vehicles.json");
    assert_eq!(run_on("solve-single", &two, &dir.path().join("o2"), &[]).status.code(), Some(2));
    assert_eq!(run_on("solve-online", &two, &dir.path().join("o3"), &[]).status.code(), Some(2));
}

#[test]
fn infeasible_scenario_exits_3_naming_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let s = ScenarioFile::single_tier(20, vec![default_vehicle(75.0, 300.0, 700.0)]);
    let out = run_on("solve-single", &write_scenario(dir.path(), &s), &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frequency cap"));
    let summary: Vec<SummaryRow> = read_csv(&dir.path().join("out/summary.csv")).unwrap();
    assert_eq!(summary[0].status, "Infeasible");
}

#[test]
fn verify_passes_on_the_fixtures() {
    for name in ["single_tier.json", "two_tier.json", "two_vehicles.json", "online.json"] {
        let dir = tempfile::tempdir().unwrap();
        let out = run_on("verify", &scenarios().join(name), dir.path(), &[]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stdout));
        assert!(dir.path().join("verify.csv").exists());
    }
}

#[test]
fn online_writes_leftover_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_on("solve-online", &scenarios().join("online.json"), dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<AllocationRow> = read_csv(&dir.path().join("allocations.csv")).unwrap();
    let left: Vec<_> = rows.iter().filter(|r| r.group == "leftover").collect();
    assert_eq!(left.len(), 20);
    assert!(left.iter().all(|r| r.s_cm_s.is_none()));
    assert!(left.iter().filter(|r| r.x > 0.0).all(|r| r.s_cp_s >= 30.0 - 1e-9));
}

#[test]
fn baseline_kind_selects_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_on("baseline", &scenarios().join("single_tier.json"), dir.path(), &["--kind", "bel"]);
    assert!(out.status.success());
    let summary: Vec<SummaryRow> = read_csv(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.iter().map(|r| r.solver.as_str()).collect::<Vec<_>>(), vec!["bel"]);
    assert_eq!(summary[0].status, "Evaluated");
}

#[test]
fn shipped_fixtures_match_the_builtin_defaults() {
    let load = |n: &str| ScenarioFile::load(&scenarios().join(n)).unwrap();
    let v = || vec![default_vehicle(75.0, 300.0, 300.0)];
    let mut single = ScenarioFile::single_tier(20, v());
    single.id = "single-tier".into();
    assert_eq!(load("single_tier.json").to_model().unwrap(), single.to_model().unwrap());
    assert_eq!(load("two_tier.json").to_model().unwrap(), ScenarioFile::two_tier(10, v()).to_model().unwrap());
    for n in ["single_tier.json", "two_tier.json", "two_vehicles.json", "online.json", "sweep_velocity.json"] {
        let s = load(n);
        assert_eq!(ScenarioFile::parse(&s.to_json()).unwrap().to_model().unwrap(), s.to_model().unwrap(), "{n}");
    }
}

#[test]
fn velocity_difference_is_symmetric_with_equal_start() {
    let s = ScenarioFile::single_tier(20, vec![default_vehicle(75.0, 300.0, 50.0), default_vehicle(85.0, 300.0, 50.0)]);
    let spec = SweepSection { parameter: SweepParameter::VelocityDiff, from: -20.0, to: 20.0, steps: 5 };
    let pts = sweep(&s, &spec, 4).unwrap();
    let e: Vec<f64> = pts.iter().map(|p| p.proposed().total_j().unwrap()).collect();
    for i in 0..2 {
        let rel = (e[i] - e[4 - i]).abs() / e[i];
        assert!(rel <= 1e-6, "{e:?}");
    }
}

#[test]
fn proposed_depends_less_on_result_difference() {
    let s = ScenarioFile::single_tier(20, vec![default_vehicle(75.0, 300.0, 50.0), default_vehicle(85.0, 400.0, 50.0)]);
    let spec = SweepSection { parameter: SweepParameter::ResultDiff, from: 0.0, to: 40.0, steps: 5 };
    let pts = sweep(&s, &spec, 4).unwrap();
    let range = |i: usize| {
        let v: Vec<f64> = pts.iter().map(|p| p.runs[i].total_j().unwrap()).collect();
        v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
    };
    assert!(range(0) < range(1) && range(0) < range(2), "{} {} {}", range(0), range(1), range(2));
}
