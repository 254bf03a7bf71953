//! Experiment orchestration: single runs, near-segment size sweeps,
//! paired comparisons and access profiling.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::config::{NearPolicy, RunConfig};
use crate::error::{Result, SimError};
use crate::policy::PolicyKind;
use crate::report::{Comparison, StatsReport, SweepRow};
use crate::sim::{build_traces, simulate, SimOptions, SimResult};
use crate::workload::TraceRecord;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: SimResult,
    pub report: StatsReport,
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    run_with(cfg, SimOptions::default())
}

pub fn run_with(cfg: &RunConfig, opts: SimOptions) -> Result<RunOutput> {
    let traces = build_traces(cfg)?;
    run_traces(cfg, &traces, opts)
}

pub fn run_traces(
    cfg: &RunConfig,
    traces: &[Arc<[TraceRecord]>],
    opts: SimOptions,
) -> Result<RunOutput> {
    let result = simulate(cfg, traces, opts)?;
    let report = StatsReport::from_run(cfg, &result);
    Ok(RunOutput { result, report })
}

/// `cfg` with a near segment of `size` rows, all of them cache slots. The
/// total bitline length is kept, so a larger near segment is also slower.
pub fn sweep_config(cfg: &RunConfig, size: usize) -> Result<RunConfig> {
    let total: usize = cfg.tiers.iter().sum();
    if size == 0 || size >= total {
        return Err(SimError::config(format!(
            "near size {size} does not fit a {total}-cell bitline"
        )));
    }
    let mut c = cfg.clone();
    c.tiers = vec![size, total - size];
    c.near_slots = size;
    c.validate()?;
    Ok(c)
}

/// One run per near-segment size, in input order.
pub fn sweep_near_size(cfg: &RunConfig, sizes: &[usize]) -> Result<Vec<SweepRow>> {
    let configs = sizes
        .iter()
        .map(|&s| sweep_config(cfg, s))
        .collect::<Result<Vec<_>>>()?;
    configs
        .par_iter()
        .zip(sizes.par_iter())
        .map(|(c, &size)| {
            let out = run(c)?;
            Ok(SweepRow {
                size,
                ipc: out.result.mean_ipc(),
                mean_latency: out.result.stats.global.mean(),
                near_fraction: out.result.stats.near_fraction(),
            })
        })
        .collect()
}

/// Compare `a` against the baseline `b` on the same trace.
pub fn compare(a: &RunConfig, b: &RunConfig) -> Result<Comparison> {
    if a.seed != b.seed || a.cores != b.cores || a.workload != b.workload {
        return Err(SimError::config(
            "compared configs must share the seed, core count and workload",
        ));
    }
    let traces = build_traces(a)?;
    if build_traces(b)? != traces {
        return Err(SimError::config(
            "compared configs generate different traces",
        ));
    }
    let (ra, rb) = rayon::join(
        || simulate(a, &traces, SimOptions::default()),
        || simulate(b, &traces, SimOptions::default()),
    );
    let (ra, rb) = (ra?, rb?);

    // Each core's trace alone on the baseline normalizes weighted speedup.
    let alone: Vec<f64> = if b.cores == 1 {
        vec![rb.cores[0].ipc]
    } else {
        let solo = RunConfig {
            cores: 1,
            ..b.clone()
        };
        traces
            .par_iter()
            .map(|t| {
                Ok(simulate(&solo, std::slice::from_ref(t), SimOptions::default())?.cores[0].ipc)
            })
            .collect::<Result<_>>()?
    };
    let ws = |r: &SimResult| -> f64 {
        r.cores
            .iter()
            .zip(&alone)
            .map(|(c, &a)| if a > 0.0 { c.ipc / a } else { 0.0 })
            .sum()
    };
    let (ws_a, ws_b) = (ws(&ra), ws(&rb));
    let ipc_a: Vec<f64> = ra.cores.iter().map(|c| c.ipc).collect();
    let ipc_b: Vec<f64> = rb.cores.iter().map(|c| c.ipc).collect();
    let core_ratios = ipc_a
        .iter()
        .zip(&ipc_b)
        .map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 })
        .collect();
    let latency_a = ra.stats.global.mean();
    let latency_b = rb.stats.global.mean();
    Ok(Comparison {
        ipc_a,
        ipc_b,
        core_ratios,
        weighted_speedup_a: ws_a,
        weighted_speedup_b: ws_b,
        ipc_delta_pct: if ws_b > 0.0 {
            (ws_a / ws_b - 1.0) * 100.0
        } else {
            0.0
        },
        latency_a,
        latency_b,
        latency_delta: latency_a - latency_b,
        energy_a: ra.ledger.total(),
        energy_b: rb.ledger.total(),
        energy_savings: ra.ledger.savings_vs(&rb.ledger),
        near_fraction_a: ra.stats.near_fraction(),
        near_fraction_b: rb.stats.near_fraction(),
    })
}

/// Per-row access counts of `cfg` run without any near placement, keyed by
/// global physical row.
pub fn profile(cfg: &RunConfig) -> Result<BTreeMap<usize, u64>> {
    let mut c = cfg.clone();
    c.policy = NearPolicy::Cache(PolicyKind::None);
    c.profile = None;
    let opts = SimOptions {
        record_row_counts: true,
        ..SimOptions::default()
    };
    let out = run_with(&c, opts)?;
    Ok(out.result.row_counts.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut c = RunConfig::default();
        c.workload.requests = 3000;
        c.workload.rows = 512;
        c
    }

    #[test]
    fn self_comparison_has_zero_deltas() {
        let c = small();
        let cmp = compare(&c, &c).unwrap();
        assert_eq!(cmp.ipc_delta_pct, 0.0);
        assert_eq!(cmp.latency_delta, 0.0);
        assert_eq!(cmp.energy_savings, Some(0.0));
        assert!(cmp.core_ratios.iter().all(|r| *r == 1.0));
    }

    #[test]
    fn multicore_self_comparison() {
        let mut c = small();
        c.cores = 2;
        let cmp = compare(&c, &c).unwrap();
        assert_eq!(cmp.core_ratios, vec![1.0, 1.0]);
        assert_eq!(cmp.weighted_speedup_a, cmp.weighted_speedup_b);
    }

    #[test]
    fn mismatched_traces_are_rejected() {
        let a = small();
        let mut b = small();
        b.seed += 1;
        assert!(matches!(compare(&a, &b), Err(SimError::Config(_))));
    }

    #[test]
    fn empty_sweep() {
        assert!(sweep_near_size(&small(), &[]).unwrap().is_empty());
    }

    #[test]
    fn sweep_of_one_slot_on_wide_hot_set() {
        let mut c = small();
        c.workload.hot_rows = 64;
        c.address_order = "column,row,subarray,bank".parse().unwrap();
        let rows = sweep_near_size(&c, &[1]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].near_fraction < 0.5, "{rows:?}");
    }

    #[test]
    fn sweep_rescales_near_tier() {
        let c = sweep_config(&small(), 64).unwrap();
        assert_eq!(c.tiers, vec![64, 448]);
        assert_eq!(c.near_slots, 64);
        assert!(sweep_config(&small(), 512).is_err());
    }

    #[test]
    fn profile_counts_every_request() {
        let c = small();
        let p = profile(&c).unwrap();
        assert_eq!(p.values().sum::<u64>(), 3000);
    }
}
