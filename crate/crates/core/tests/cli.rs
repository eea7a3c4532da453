use std::path::Path;
use std::process::{Command, Output};

use fcopf::study::StudyResult;

fn engine(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcopf-engine"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn no_dg_power_flow_reports_the_source_bus_at_nominal() {
    let dir = tempfile::tempdir().unwrap();
    let o = engine(&["pf", "--fixture", "cigre-lv", "--no-dg", "--csv", "tables"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let r = StudyResult::read(&dir.path().join("result.json")).unwrap();
    let src = r.voltages.iter().find(|v| v.bus == "11").unwrap();
    assert!((src.magnitude_pu[0] - 1.0).abs() < 5e-4 && src.angle_deg[0].abs() < 5e-3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("11       1.0000"));
    for f in ["dispatch.csv", "voltages.csv", "faults.csv"] {
        assert!(dir.path().join("tables").join(f).exists(), "{f}");
    }
}

#[test]
fn cost_only_fcopf_and_opf_write_the_same_objective() {
    let dir = tempfile::tempdir().unwrap();
    let o = engine(
        &["fcopf", "--fixture", "cigre-lv", "--w-cost", "1", "--w-fault", "0", "--out", "fc.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let o = engine(&["opf", "--fixture", "cigre-lv", "--out", "opf.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let fc = StudyResult::read(&dir.path().join("fc.json")).unwrap();
    let opf = StudyResult::read(&dir.path().join("opf.json")).unwrap();
    let scaled = opf.objective.cost / fc.objective.scaling.unwrap().cost_max;
    assert!((fc.objective.total - scaled).abs() < 1e-6);
    assert!((fc.objective.cost - opf.objective.cost).abs() < 1e-5 * opf.objective.cost.max(1.0));
}

#[test]
fn missing_network_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = engine(&["sc", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("missing.json"), "{}", text(&o));
}

#[test]
fn malformed_network_and_bad_flags_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"base": 3}"#).unwrap();
    let o = engine(&["pf", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains("bad.json"));
    let o = engine(&["pf", "--fixture", "cigre-lv", "--w-cost", "abc"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = engine(&["pf"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn infeasible_cap_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = engine(&["fcopf", "--fixture", "cigre-lv", "--hard-cap", "1000", "--max-iter", "60"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn compare_annotates_and_checks_arity() {
    let dir = tempfile::tempdir().unwrap();
    for (args, out) in [
        (vec!["sc", "--fixture", "cigre-lv", "--no-dg"], "lo.json"),
        (vec!["sc", "--fixture", "cigre-lv"], "hi.json"),
        (vec!["fcopf", "--fixture", "cigre-lv"], "fc.json"),
    ] {
        let mut a = args.clone();
        a.extend(["--out", out]);
        let o = engine(&a, dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    }
    let o = engine(&["compare", "lo.json", "hi.json", "fc.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.matches("within bounds").count(), 8, "{out}");

    let o = engine(&["compare", "lo.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("at least 2"));

    let o = engine(&["pf", "--fixture", "random", "--seed", "4", "--out", "rand.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let o = engine(&["compare", "lo.json", "rand.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("bus sets differ"), "{}", text(&o));
}
