use std::path::Path;
use std::process::{Command, Output};

use tldram::config::RunConfig;
use tldram::engine::{parse_command_trace, validate_command_trace};
use tldram::sim::build_geometry;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tldram-sim"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &RunConfig) -> String {
    let p = dir.join(name);
    std::fs::write(&p, cfg.to_text()).unwrap();
    p.to_str().unwrap().to_string()
}

fn small() -> RunConfig {
    let mut c = RunConfig::default();
    c.workload.requests = 5_000;
    c.workload.rows = 1024;
    c
}

#[test]
fn tradeoff_table_to_stdout() {
    let out = sim(&["tradeoff", "--cells", "32,512"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("32,23.10,"));
    assert!(lines[3].starts_with("512,52.50,"));
}

#[test]
fn empty_tradeoff() {
    let out = sim(&["tradeoff", "--cells"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    std::fs::write(&p, "geometry.banks = many\n").unwrap();
    let out = sim(&["run", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometry.banks"));
}

#[test]
fn usage_error_exits_with_one() {
    assert_eq!(sim(&["run"]).status.code(), Some(1));
}

#[test]
fn out_of_range_trace_address_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", &small());
    let trace = dir.path().join("t.trace");
    std::fs::write(&trace, "1 R 0x40\n2 W 0xffffffffff\n").unwrap();
    let out = sim(&["run", "--config", &cfg, "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn dumped_commands_validate() {
    let dir = tempfile::tempdir().unwrap();
    let c = small();
    let cfg = write_config(dir.path(), "c.cfg", &c);
    let cmds = dir.path().join("cmds.txt");
    let report = dir.path().join("r.csv");
    let out = sim(&[
        "run",
        "--config",
        &cfg,
        "--out",
        report.to_str().unwrap(),
        "--commands",
        cmds.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trace =
        parse_command_trace(std::io::BufReader::new(std::fs::File::open(&cmds).unwrap())).unwrap();
    assert!(trace.len() > 5_000);
    let g = build_geometry(&c).unwrap();
    let timings = tldram::geometry::tier_cycle_timings(
        &g,
        &tldram::geometry::CalibrationAnchors::default(),
        &c.timing,
        c.cycle_ns,
    )
    .unwrap();
    assert!(validate_command_trace(&trace, &g, &timings).is_empty());
    let text = std::fs::read_to_string(report).unwrap();
    assert!(text.starts_with("# tldram-sim schema v1\nkey,value\n"));
}

#[test]
fn self_compare_reports_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", &small());
    let out = sim(&["compare", "--a", &cfg, "--b", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let ws = text
        .lines()
        .find(|l| l.starts_with("weighted_speedup,"))
        .unwrap();
    assert!(ws.ends_with(",0"), "{ws}");
    let lat = text
        .lines()
        .find(|l| l.starts_with("latency_mean,"))
        .unwrap();
    assert!(lat.ends_with(",0"), "{lat}");
}

#[test]
fn compare_rejects_different_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a.cfg", &small());
    let mut other = small();
    other.seed = 77;
    let b = write_config(dir.path(), "b.cfg", &other);
    assert_eq!(
        sim(&["compare", "--a", &a, "--b", &b]).status.code(),
        Some(1)
    );
}

#[test]
fn sweep_and_profile_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", &small());
    let out = sim(&["sweep", "--config", &cfg, "--near-sizes", "16,32"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(2).unwrap().starts_with("16,"));

    let profile = dir.path().join("p.txt");
    let out = sim(&[
        "profile",
        "--config",
        &cfg,
        "--out",
        profile.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let mut mapped = small();
    mapped.policy = tldram::config::NearPolicy::Profile;
    mapped.profile = Some(profile);
    let mcfg = write_config(dir.path(), "m.cfg", &mapped);
    assert!(sim(&["run", "--config", &mcfg]).status.success());
}
