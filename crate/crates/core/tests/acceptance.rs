//! End-to-end acceptance checks. Each test prints one
//! `criterion N: PASS|FAIL (...)` line before asserting.

mod common;

use std::path::Path;
use std::process::Command as Process;
use std::time::Instant;

use common::{check_against_flat_memory, verdict};
use tldram::config::{NearPolicy, RunConfig, WorkloadKind};
use tldram::engine::{validate_command_trace, Command, TimingEngine};
use tldram::geometry::{
    die_size, power_of_tier, tier_cycle_timings, trc_of_tier, CalibrationAnchors,
    DecompositionRatios, DeviceGeometry,
};
use tldram::harness;
use tldram::policy::PolicyKind;
use tldram::sim::{build_geometry, SimOptions};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn baseline_of(cfg: &RunConfig) -> RunConfig {
    RunConfig {
        tiers: vec![cfg.tiers.iter().sum()],
        near_slots: 0,
        policy: NearPolicy::Cache(PolicyKind::None),
        ..cfg.clone()
    }
}

fn hot_cold_config(requests: usize) -> RunConfig {
    let mut c = RunConfig {
        seed: 2024,
        policy: NearPolicy::Cache(PolicyKind::BenefitBased),
        near_slots: 32,
        ..RunConfig::default()
    };
    c.workload.kind = WorkloadKind::HotCold;
    c.workload.requests = requests;
    c.workload.rows = 4096;
    c.workload.hot_rows = 32;
    c.workload.hot_fraction = 0.9;
    c
}

#[test]
fn criterion_1_calibration_anchors() {
    let a = CalibrationAnchors::default();
    let short = DeviceGeometry::with_segments(&[32]).unwrap();
    let long = DeviceGeometry::with_segments(&[512]).unwrap();
    let seg = DeviceGeometry::with_segments(&[32, 480]).unwrap();

    let trc = [
        trc_of_tier(&short, 0, &a).unwrap(),
        trc_of_tier(&long, 0, &a).unwrap(),
        trc_of_tier(&seg, 0, &a).unwrap(),
        trc_of_tier(&seg, 1, &a).unwrap(),
    ];
    let power = [
        power_of_tier(&short, 0, &a).unwrap(),
        power_of_tier(&long, 0, &a).unwrap(),
        power_of_tier(&seg, 0, &a).unwrap(),
        power_of_tier(&seg, 1, &a).unwrap(),
    ];
    let die = [
        die_size(&short, &a).unwrap(),
        die_size(&long, &a).unwrap(),
        die_size(&seg, &a).unwrap(),
    ];
    let ok = trc
        .iter()
        .zip([23.1, 52.5, 23.1, 65.8])
        .all(|(x, e)| close(*x, e, 0.05))
        && power
            .iter()
            .zip([0.51, 1.00, 0.51, 1.49])
            .all(|(x, e)| close(*x, e, 0.01))
        && die
            .iter()
            .zip([3.76, 1.00, 1.03])
            .all(|(x, e)| close(*x, e, 0.01));
    verdict(
        1,
        ok,
        &format!("tRC {trc:.2?} power {power:.3?} die {die:.3?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_2_migration_occupancy() {
    let geometry = DeviceGeometry::with_segments(&[32, 480]).unwrap();
    let timings = tier_cycle_timings(
        &geometry,
        &CalibrationAnchors::default(),
        &DecompositionRatios::default(),
        1.25,
    )
    .unwrap();
    let mut engine = TimingEngine::new(geometry, timings, 0).unwrap();
    let out = engine.issue(Command::mig(0, 0, 100, 3), 10, None).unwrap();
    let occupied = engine.bank(0).busy_until() - 10;
    let expected = ((65.8f64 + 4.0) / 1.25).ceil() as u64;
    let next_act = engine.earliest_issue(&Command::act(0, 0, 5), 11).unwrap();
    let ok = occupied == expected && out.completion == 10 + expected && next_act == 10 + expected;
    verdict(
        2,
        ok,
        &format!("occupied {occupied} cycles, expected {expected}"),
    );
    assert!(ok);
}

/// Issue `seq` on bank 1 at its earliest legal cycles, optionally with a MIG
/// on bank 0 at `mig_at`. Returns `(issue, completion)` per command.
fn bank1_schedule(seq: &[Command], mig_at: Option<u64>) -> Vec<(u64, u64)> {
    let geometry = DeviceGeometry::with_segments(&[32, 480]).unwrap();
    let timings = tier_cycle_timings(
        &geometry,
        &CalibrationAnchors::default(),
        &DecompositionRatios::default(),
        1.25,
    )
    .unwrap();
    let mut engine = TimingEngine::new(geometry, timings, 5).unwrap();
    let mut now = 0;
    let mut out = Vec::new();
    let mut mig_pending = mig_at;
    for cmd in seq {
        let mut t = engine.earliest_issue(cmd, now).unwrap();
        if let Some(m) = mig_pending {
            if m < t {
                engine.issue(Command::mig(0, 2, 200, 7), m, None).unwrap();
                mig_pending = None;
                t = engine.earliest_issue(cmd, t.max(m + 1)).unwrap();
            }
        }
        let o = engine.issue(*cmd, t, Some(t)).unwrap();
        out.push((t, o.completion));
        now = t + 1;
    }
    out
}

#[test]
fn criterion_3_migration_leaves_other_banks_alone() {
    let seq = vec![
        Command::act(1, 0, 40),
        Command::rd(1, 0, 40, 3),
        Command::wr(1, 0, 40, 4),
        Command::rd(1, 0, 40, 5),
        Command::pre(1, 0, 40),
        Command::act(1, 0, 2),
        Command::rd(1, 0, 2, 1),
        Command::pre(1, 0, 2),
        Command::act(1, 3, 300),
        Command::wr(1, 3, 300, 9),
        Command::pre(1, 3, 300),
    ];
    let base = bank1_schedule(&seq, None);
    // MIG on bank 0 in a cycle where bank 1 is idle.
    let used: Vec<u64> = base.iter().map(|x| x.0).collect();
    let slots: Vec<u64> = (1..base.last().unwrap().0)
        .filter(|c| !used.contains(c))
        .collect();
    let mut all_equal = true;
    for &m in &slots {
        all_equal &= bank1_schedule(&seq, Some(m)) == base;
    }
    let ok = all_equal && !slots.is_empty();
    verdict(
        3,
        ok,
        &format!(
            "{} MIG placements, bank 1 trace unchanged: {all_equal}",
            slots.len()
        ),
    );
    assert!(ok);
}

fn oracle_config(seed: u64) -> RunConfig {
    let mut c = hot_cold_config(45_000);
    c.seed = seed;
    c.policy = NearPolicy::Cache(PolicyKind::ALL[seed as usize % 4]);
    c.max_outstanding = 1 + (seed as usize % 4);
    c.cores = 1 + (seed as usize % 2);
    c.workload.bubble_mean = 2.0;
    c.workload.hot_fraction = 0.6;
    c.workload.write_fraction = 0.3;
    c
}

#[test]
fn criterion_4_timing_oracle_agreement() {
    let mut total_commands = 0;
    let mut total_violations = 0;
    let mut min_commands = usize::MAX;
    for seed in 0..10u64 {
        let cfg = oracle_config(seed);
        let opts = SimOptions {
            record_commands: true,
            ..SimOptions::default()
        };
        let out = harness::run_with(&cfg, opts).unwrap();
        let geometry = build_geometry(&cfg).unwrap();
        let v = validate_command_trace(&out.result.commands, &geometry, &out.result.timings);
        min_commands = min_commands.min(out.result.commands.len());
        total_commands += out.result.commands.len();
        total_violations += v.len();
    }

    // Mutation: the engine runs with tRCD one cycle short; the validator
    // keeps the true value.
    let cfg = oracle_config(3);
    let geometry = build_geometry(&cfg).unwrap();
    let truth = tier_cycle_timings(
        &geometry,
        &CalibrationAnchors::default(),
        &cfg.timing,
        cfg.cycle_ns,
    )
    .unwrap();
    let mut mutated = truth.clone();
    mutated[1].trcd -= 1;
    let opts = SimOptions {
        record_commands: true,
        timing_override: Some(mutated),
        ..SimOptions::default()
    };
    let out = harness::run_with(&cfg, opts).unwrap();
    let caught = validate_command_trace(&out.result.commands, &geometry, &truth);

    let ok = total_violations == 0 && min_commands >= 100_000 && !caught.is_empty();
    verdict(
        4,
        ok,
        &format!(
            "{total_commands} commands in 10 runs (min {min_commands}), {total_violations} violations; \
             mutated tRCD caught {} violations",
            caught.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_5_data_integrity_all_policies() {
    let mut summary = Vec::new();
    let mut ok = true;
    for (i, kind) in PolicyKind::ALL.into_iter().enumerate() {
        let mut cfg = hot_cold_config(100_000);
        cfg.seed = 77 + i as u64;
        cfg.policy = NearPolicy::Cache(kind);
        cfg.max_outstanding = 4;
        // More rows per subarray than slots, so evictions and write-backs occur.
        cfg.workload.rows = 8192;
        cfg.workload.hot_rows = 512;
        cfg.workload.hot_fraction = 0.7;
        cfg.workload.write_fraction = 0.5;
        cfg.workload.bubble_mean = 4.0;
        let opts = SimOptions {
            record_service: true,
            ..SimOptions::default()
        };
        let out = harness::run_with(&cfg, opts).unwrap();
        let log = &out.result.service_log;
        let (reads, bad) = check_against_flat_memory(&cfg, log);
        let write_backs = out.result.cache.map_or(0, |c| c.dirty_evictions);
        let exercised = kind == PolicyKind::None || write_backs > 0;
        ok &= bad == 0 && log.len() == 100_000 && reads > 0 && exercised;
        summary.push(format!(
            "{kind}: {reads} reads, {bad} mismatches, {} migrations, {write_backs} write-backs",
            out.result.migrations
        ));
    }
    verdict(5, ok, &summary.join("; "));
    assert!(ok);
}

#[test]
fn criterion_6_hot_set_mostly_served_near() {
    let cfg = hot_cold_config(1_000_000);
    let base = baseline_of(&cfg);
    let cmp = harness::compare(&cfg, &base).unwrap();
    let savings = cmp.energy_savings.unwrap_or(0.0);
    let ok = cmp.near_fraction_a >= 0.90 && cmp.ipc_delta_pct > 0.0 && savings > 0.0;
    verdict(
        6,
        ok,
        &format!(
            "near fraction {:.4}, IPC delta {:+.2}%, energy savings {:.2}%",
            cmp.near_fraction_a,
            cmp.ipc_delta_pct,
            savings * 100.0
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_7_far_segment_penalty() {
    let mut cfg = RunConfig {
        seed: 99,
        policy: NearPolicy::Cache(PolicyKind::None),
        near_slots: 32,
        ..RunConfig::default()
    };
    cfg.workload.kind = WorkloadKind::Uniform;
    cfg.workload.requests = 100_000;
    // Every addressable row of the segmented device; all of them are far.
    cfg.workload.rows = (cfg.banks * cfg.subarrays * 480) as u64;
    let base = baseline_of(&cfg);
    let cmp = harness::compare(&cfg, &base).unwrap();
    let ok = cmp.latency_a > cmp.latency_b && cmp.near_fraction_a == 0.0 && cmp.ipc_delta_pct < 0.0;
    verdict(
        7,
        ok,
        &format!(
            "mean latency {:.2} vs baseline {:.2} cycles, IPC delta {:+.2}%",
            cmp.latency_a, cmp.latency_b, cmp.ipc_delta_pct
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_8_interior_near_size_optimum() {
    let mut cfg = hot_cold_config(200_000);
    cfg.seed = 8;
    // Keep the hot set in one subarray so its slots are the contended resource.
    cfg.address_order = "column,row,subarray,bank".parse().unwrap();
    cfg.max_outstanding = 4;
    // Cold rows see little reuse, so extra slots buy almost nothing.
    cfg.workload.rows = 16_384;
    cfg.workload.bubble_mean = 2.0;
    let sizes = [16, 32, 64, 128, 256];
    let rows = harness::sweep_near_size(&cfg, &sizes).unwrap();
    let ipc: Vec<f64> = rows.iter().map(|r| r.ipc).collect();
    let best = (0..ipc.len())
        .max_by(|&a, &b| ipc[a].total_cmp(&ipc[b]))
        .unwrap();
    let rises = ipc[..=best].windows(2).all(|w| w[1] > w[0]);
    let falls = ipc[best..].windows(2).all(|w| w[1] < w[0]);
    let ok = best > 0 && best < ipc.len() - 1 && rises && falls;
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("{}: ipc {:.5} near {:.3}", r.size, r.ipc, r.near_fraction))
        .collect();
    verdict(
        8,
        ok,
        &format!("peak at {} [{}]", sizes[best], table.join(", ")),
    );
    assert!(ok);
}

#[test]
fn criterion_9_reports_are_reproducible() {
    let cfg = hot_cold_config(50_000);
    let a = harness::run(&cfg).unwrap().report.to_csv_string().unwrap();
    let b = harness::run(&cfg).unwrap().report.to_csv_string().unwrap();

    // Same check through the command-line tool.
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(&config, cfg.to_text()).unwrap();
    let run_cli = |out: &Path| {
        let status = Process::new(env!("CARGO_BIN_EXE_tldram-sim"))
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let c = run_cli(&dir.path().join("a.csv"));
    let d = run_cli(&dir.path().join("b.csv"));

    let ok = a == b && c == d && c == a.as_bytes();
    verdict(
        9,
        ok,
        &format!(
            "{} report bytes, library and CLI runs identical: {ok}",
            c.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_runtime_budget() {
    let cfg = hot_cold_config(1_000_000);
    let start = Instant::now();
    let out = harness::run(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = secs <= 10.0 && out.result.stats.requests() == 1_000_000;
    verdict(10, ok, &format!("10^6 requests in {secs:.2} s"));
    assert!(ok);
}
