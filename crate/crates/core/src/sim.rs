//! Whole-system simulation: cores, controller, timing engine, near-segment
//! management and energy accounting.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;

use crate::config::{streams, NearPolicy, RunConfig, WorkloadKind};
use crate::controller::{
    AddressMap, Controller, ControllerParams, NearMapping, ServiceRecord, ServiceStats,
};
use crate::energy::{EnergyLedger, EnergyModel};
use crate::engine::{Command, TimingEngine};
use crate::error::{Result, SimError};
use crate::geometry::{tier_cycle_timings, CalibrationAnchors, CycleTimings, DeviceGeometry};
use crate::policy::{
    build_profile_map, parse_profile, CacheCounters, MappingMode, NearCacheState, PolicyKind,
};
use crate::workload::{
    gen_hotcold, gen_zipf, parse_trace, CoreModel, GenParams, RowSpace, TraceRecord,
};

/// Optional recordings; all off by default.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub record_commands: bool,
    pub record_service: bool,
    pub record_row_counts: bool,
    /// Drive the engine with these timings instead of the calibrated ones.
    pub timing_override: Option<Vec<CycleTimings>>,
}

#[derive(Debug, Clone)]
pub struct CoreResult {
    pub retired: u64,
    pub elapsed: u64,
    pub ipc: f64,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub cycles: u64,
    pub cores: Vec<CoreResult>,
    pub stats: ServiceStats,
    pub ledger: EnergyLedger,
    pub migrations: u64,
    pub cache: Option<CacheCounters>,
    pub timings: Vec<CycleTimings>,
    pub commands: Vec<Command>,
    pub service_log: Vec<ServiceRecord>,
    /// Accesses per global physical home row.
    pub row_counts: HashMap<usize, u64>,
}

impl SimResult {
    pub fn mean_ipc(&self) -> f64 {
        if self.cores.is_empty() {
            return 0.0;
        }
        self.cores.iter().map(|c| c.ipc).sum::<f64>() / self.cores.len() as f64
    }
}

pub fn build_geometry(cfg: &RunConfig) -> Result<DeviceGeometry> {
    DeviceGeometry::new(
        &cfg.tiers,
        cfg.banks,
        cfg.subarrays,
        cfg.columns,
        cfg.column_bytes,
    )
}

pub fn build_address_map(cfg: &RunConfig, geometry: &DeviceGeometry) -> Result<AddressMap> {
    let rows = geometry
        .rows_per_subarray()
        .checked_sub(cfg.near_slots)
        .filter(|r| *r > 0)
        .ok_or_else(|| SimError::config("no addressable rows remain after reservation"))?;
    AddressMap::new(
        cfg.address_order,
        cfg.columns,
        cfg.banks,
        cfg.subarrays,
        rows,
        cfg.column_bytes,
    )
}

/// Row blocks available to generators: every addressable row of every subarray.
fn row_space(cfg: &RunConfig) -> Result<RowSpace> {
    let geometry = build_geometry(cfg)?;
    let map = build_address_map(cfg, &geometry)?;
    let block = (cfg.columns * cfg.column_bytes) as u64;
    let total = map.capacity().unwrap_or(u64::MAX) / block;
    let rows = match cfg.workload.rows {
        0 => total,
        r if r <= total => r,
        r => {
            return Err(SimError::config(format!(
                "workload.rows = {r} exceeds the {total} addressable rows"
            )))
        }
    };
    Ok(RowSpace {
        rows,
        columns: cfg.columns as u64,
        column_bytes: cfg.column_bytes as u64,
    })
}

/// One trace per core.
pub fn build_traces(cfg: &RunConfig) -> Result<Vec<Arc<[TraceRecord]>>> {
    let w = &cfg.workload;
    if w.kind == WorkloadKind::File {
        let path = w
            .file
            .as_ref()
            .ok_or_else(|| SimError::config("no trace file"))?;
        let f = File::open(path)
            .map_err(|e| SimError::config(format!("cannot open trace {}: {e}", path.display())))?;
        let trace: Arc<[TraceRecord]> = parse_trace(BufReader::new(f))?.into();
        return Ok(vec![trace; cfg.cores]);
    }
    let space = row_space(cfg)?;
    (0..cfg.cores)
        .map(|i| {
            let params = GenParams {
                seed: cfg.stream_seed(streams::CORE_BASE + i as u64),
                requests: w.requests,
                write_fraction: w.write_fraction,
                bubble_mean: w.bubble_mean,
            };
            let trace = match w.kind {
                WorkloadKind::HotCold => gen_hotcold(&params, w.hot_rows, w.hot_fraction, space)?,
                WorkloadKind::Zipf => gen_zipf(&params, w.zipf_exponent, space.rows, space)?,
                WorkloadKind::Uniform => gen_zipf(&params, 0.0, space.rows, space)?,
                WorkloadKind::File => unreachable!("handled above"),
            };
            Ok(trace.into())
        })
        .collect()
}

fn build_mapping(cfg: &RunConfig, geometry: &DeviceGeometry) -> Result<NearMapping> {
    match cfg.policy {
        NearPolicy::Cache(kind) => {
            if cfg.near_slots == 0 && kind == PolicyKind::None {
                return Ok(NearMapping::Direct);
            }
            Ok(NearMapping::Cache(NearCacheState::new(
                kind,
                cfg.policy_params,
                geometry.total_subarrays(),
                cfg.near_slots,
            )))
        }
        NearPolicy::Profile => {
            let path = cfg
                .profile
                .as_ref()
                .ok_or_else(|| SimError::config("profile placement needs a profile file"))?;
            let f = File::open(path).map_err(|e| {
                SimError::config(format!("cannot open profile {}: {e}", path.display()))
            })?;
            let profile = parse_profile(BufReader::new(f))?;
            let table = build_profile_map(
                &profile,
                cfg.near_slots,
                geometry,
                MappingMode::OsStaticProfile,
            )?;
            Ok(NearMapping::Profile(table))
        }
    }
}

/// Assemble a controller for `cfg`.
pub fn build_controller(cfg: &RunConfig) -> Result<Controller> {
    build_controller_with(cfg, None)
}

pub fn build_controller_with(
    cfg: &RunConfig,
    timings: Option<Vec<CycleTimings>>,
) -> Result<Controller> {
    cfg.validate()?;
    let geometry = build_geometry(cfg)?;
    let anchors = CalibrationAnchors::default();
    let timings = match timings {
        Some(t) => t,
        None => tier_cycle_timings(&geometry, &anchors, &cfg.timing, cfg.cycle_ns)?,
    };
    let map = build_address_map(cfg, &geometry)?;
    let mapping = build_mapping(cfg, &geometry)?;
    let ledger = EnergyLedger::new(EnergyModel::new(&geometry, &anchors, cfg.column_cost)?);
    let engine = TimingEngine::new(geometry, timings, cfg.stream_seed(streams::DATA))?;
    let params = ControllerParams {
        queue_capacity: cfg.queue_capacity,
        aging_cap: cfg.aging_cap,
        reserved_rows: cfg.near_slots,
        write_seed: cfg.stream_seed(streams::WRITES),
    };
    Controller::new(engine, map, mapping, params, ledger, cfg.cores)
}

/// Run `traces` (one per core) on the system described by `cfg`.
pub fn simulate(
    cfg: &RunConfig,
    traces: &[Arc<[TraceRecord]>],
    opts: SimOptions,
) -> Result<SimResult> {
    if traces.len() != cfg.cores {
        return Err(SimError::config(format!(
            "{} traces for {} cores",
            traces.len(),
            cfg.cores
        )));
    }
    let mut ctrl = build_controller_with(cfg, opts.timing_override)?;
    if opts.record_commands {
        ctrl.engine_mut().record_commands();
    }
    if opts.record_service {
        ctrl.record_service();
    }
    if opts.record_row_counts {
        ctrl.record_row_counts();
    }
    let mut cores: Vec<CoreModel> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| CoreModel::new(i, Arc::clone(t), cfg.max_outstanding))
        .collect();

    let mut now = 0u64;
    loop {
        ctrl.retire(now, &mut cores)?;
        for core in cores.iter_mut() {
            core.tick(now, &mut ctrl)?;
        }
        let step = ctrl.step(now)?;
        if ctrl.is_idle() && cores.iter().all(CoreModel::is_done) {
            break;
        }
        let next = if step.issued.is_some() {
            now + 1
        } else {
            // Nothing can issue now: jump to the next cycle where something changes.
            [step.next_ready, ctrl.next_completion()]
                .into_iter()
                .flatten()
                .chain(cores.iter().filter_map(CoreModel::next_event))
                .filter(|&t| t > now)
                .min()
                .ok_or_else(|| SimError::internal(format!("simulation stalled at cycle {now}")))?
        };
        now = next;
    }
    ctrl.engine_mut().settle(u64::MAX);

    let core_results: Vec<CoreResult> = cores
        .iter()
        .map(|c| CoreResult {
            retired: c.retired_instructions(),
            elapsed: c.finished_at(),
            ipc: c.ipc(),
        })
        .collect();
    let cycles = cores
        .iter()
        .map(CoreModel::finished_at)
        .max()
        .unwrap_or(0)
        .max(ctrl.last_busy());
    let cache = match ctrl.mapping() {
        NearMapping::Cache(c) => {
            c.check_consistency()?;
            Some(c.counters())
        }
        _ => None,
    };
    Ok(SimResult {
        cycles,
        cores: core_results,
        stats: ctrl.stats().clone(),
        ledger: ctrl.ledger().clone(),
        migrations: ctrl.migrations_issued(),
        cache,
        timings: ctrl.engine().timings().to_vec(),
        commands: ctrl.engine_mut().take_log(),
        service_log: ctrl.take_service_log(),
        row_counts: ctrl.take_row_counts(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(policy: NearPolicy, slots: usize, tiers: Vec<usize>) -> RunConfig {
        let mut c = RunConfig {
            policy,
            near_slots: slots,
            tiers,
            ..RunConfig::default()
        };
        c.workload.requests = 2000;
        c.workload.rows = 256;
        c
    }

    fn run(cfg: &RunConfig) -> SimResult {
        let traces = build_traces(cfg).unwrap();
        simulate(cfg, &traces, SimOptions::default()).unwrap()
    }

    #[test]
    fn single_request_latency() {
        let cfg = tiny(NearPolicy::Cache(PolicyKind::None), 0, vec![512]);
        let trace: Arc<[TraceRecord]> = vec![TraceRecord::read(0, 0)].into();
        let r = simulate(&cfg, &[trace], SimOptions::default()).unwrap();
        // ACT at 0, RD after tRCD, data after tCL.
        let t = r.timings[0];
        assert_eq!(r.stats.global.sum, t.trcd + t.tcl);
        assert_eq!(r.cores[0].elapsed, t.trcd + t.tcl);
        assert_eq!(r.stats.requests(), 1);
    }

    #[test]
    fn baseline_has_no_near_service() {
        let r = run(&tiny(NearPolicy::Cache(PolicyKind::None), 0, vec![512]));
        assert_eq!(r.stats.near_served, 0);
        assert_eq!(r.migrations, 0);
        assert_eq!(r.stats.requests(), 2000);
    }

    #[test]
    fn every_policy_finishes() {
        for k in PolicyKind::ALL {
            let r = run(&tiny(NearPolicy::Cache(k), 32, vec![32, 480]));
            assert_eq!(r.stats.requests(), 2000, "{k}");
            let frac = r.stats.near_fraction();
            assert!((0.0..=1.0).contains(&frac));
            if k == PolicyKind::None {
                assert_eq!(r.migrations, 0);
            }
        }
    }

    #[test]
    fn migrations_match_cache_copies() {
        let r = run(&tiny(
            NearPolicy::Cache(PolicyKind::BenefitBased),
            32,
            vec![32, 480],
        ));
        let c = r.cache.unwrap();
        assert_eq!(r.migrations, c.fills + c.dirty_evictions);
        assert_eq!(r.ledger.total_migrations(), r.migrations);
    }

    #[test]
    fn out_of_range_address_names_line() {
        let cfg = tiny(NearPolicy::Cache(PolicyKind::None), 0, vec![512]);
        let trace: Arc<[TraceRecord]> = vec![TraceRecord {
            line: 7,
            ..TraceRecord::read(0, u64::MAX / 2)
        }]
        .into();
        match simulate(&cfg, &[trace], SimOptions::default()) {
            Err(SimError::Workload { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }
}
