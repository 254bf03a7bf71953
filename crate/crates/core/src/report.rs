//! CSV reports. Every file starts with a schema comment line followed by a
//! CSV header row.

use std::io::Write;

use crate::config::RunConfig;
use crate::error::{Result, SimError};
use crate::geometry::TradeoffRow;
use crate::sim::SimResult;

pub const SCHEMA_LINE: &str = "# tldram-sim schema v1";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const CONFIG_PREFIX: &str = "config.";

fn csv_writer<W: Write>(mut out: W) -> Result<csv::Writer<W>> {
    writeln!(out, "{SCHEMA_LINE}")?;
    Ok(csv::Writer::from_writer(out))
}

/// Flat key/value statistics of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatsReport {
    entries: Vec<(String, String)>,
}

impl StatsReport {
    pub fn from_run(cfg: &RunConfig, r: &SimResult) -> Self {
        let mut e: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| e.push((k.to_string(), v));
        put("version", VERSION.to_string());
        put("seed", cfg.seed.to_string());
        for (k, v) in cfg.entries() {
            put(&format!("{CONFIG_PREFIX}{k}"), v);
        }
        put("cycles", r.cycles.to_string());
        put("requests", r.stats.requests().to_string());
        for (i, c) in r.cores.iter().enumerate() {
            put(&format!("core{i}.retired"), c.retired.to_string());
            put(&format!("core{i}.cycles"), c.elapsed.to_string());
            put(&format!("core{i}.ipc"), c.ipc.to_string());
            put(
                &format!("core{i}.latency_mean"),
                r.stats
                    .per_core
                    .get(i)
                    .map_or(0.0, |s| s.mean())
                    .to_string(),
            );
        }
        put("ipc_mean", r.mean_ipc().to_string());
        put("latency_mean", r.stats.global.mean().to_string());
        put("latency_p95", r.stats.percentile(95.0).to_string());
        put("latency_max", r.stats.global.max.to_string());
        put("near_fraction", r.stats.near_fraction().to_string());
        put("row_hit_rate", r.stats.row_hit_rate().to_string());
        put("migrations", r.migrations.to_string());
        if let Some(c) = r.cache {
            put("cache.near_hits", c.near_hits.to_string());
            put("cache.fills", c.fills.to_string());
            put("cache.dirty_evictions", c.dirty_evictions.to_string());
            put("cache.clean_evictions", c.clean_evictions.to_string());
        }
        for (t, n) in r.ledger.activations.iter().enumerate() {
            put(&format!("activations.tier{t}"), n.to_string());
        }
        put("column_ops", r.ledger.column_ops.to_string());
        put(
            "energy.activation",
            r.ledger.activation_energy().to_string(),
        );
        put("energy.migration", r.ledger.migration_energy().to_string());
        put("energy.rdwr", r.ledger.rdwr_energy().to_string());
        put("energy.total", r.ledger.total().to_string());
        Self { entries: e }
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    /// Rebuild the configuration echoed in the report.
    pub fn config_echo(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (k, v) in &self.entries {
            if let Some(key) = k.strip_prefix(CONFIG_PREFIX) {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out)?;
        w.write_record(["key", "value"])?;
        for (k, v) in &self.entries {
            w.write_record([k, v])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| SimError::internal(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub size: usize,
    pub ipc: f64,
    pub mean_latency: f64,
    pub near_fraction: f64,
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(out)?;
    w.write_record(["size", "ipc", "mean_latency", "near_fraction"])?;
    for r in rows {
        w.write_record([
            r.size.to_string(),
            r.ipc.to_string(),
            r.mean_latency.to_string(),
            r.near_fraction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tradeoff<W: Write>(out: W, rows: &[TradeoffRow]) -> Result<()> {
    let mut w = csv_writer(out)?;
    w.write_record(["cells", "trc_ns", "trcd_ns", "die_norm", "power_norm"])?;
    for r in rows {
        w.write_record([
            r.cells.to_string(),
            format!("{:.2}", r.trc_ns),
            format!("{:.2}", r.trcd_ns),
            format!("{:.3}", r.die_norm),
            format!("{:.3}", r.power_norm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Side-by-side comparison; `b` is the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub ipc_a: Vec<f64>,
    pub ipc_b: Vec<f64>,
    /// Per-core IPC of `a` over `b`.
    pub core_ratios: Vec<f64>,
    pub weighted_speedup_a: f64,
    pub weighted_speedup_b: f64,
    pub ipc_delta_pct: f64,
    pub latency_a: f64,
    pub latency_b: f64,
    pub latency_delta: f64,
    pub energy_a: f64,
    pub energy_b: f64,
    pub energy_savings: Option<f64>,
    pub near_fraction_a: f64,
    pub near_fraction_b: f64,
}

impl Comparison {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out)?;
        w.write_record(["metric", "a", "b", "delta"])?;
        let mut row = |m: &str, a: String, b: String, d: String| w.write_record([m, &a, &b, &d]);
        row("role", "candidate".into(), "baseline".into(), String::new())?;
        for (i, ((a, b), r)) in self
            .ipc_a
            .iter()
            .zip(&self.ipc_b)
            .zip(&self.core_ratios)
            .enumerate()
        {
            row(
                &format!("core{i}.ipc"),
                a.to_string(),
                b.to_string(),
                r.to_string(),
            )?;
        }
        row(
            "weighted_speedup",
            self.weighted_speedup_a.to_string(),
            self.weighted_speedup_b.to_string(),
            self.ipc_delta_pct.to_string(),
        )?;
        row(
            "latency_mean",
            self.latency_a.to_string(),
            self.latency_b.to_string(),
            self.latency_delta.to_string(),
        )?;
        row(
            "energy_total",
            self.energy_a.to_string(),
            self.energy_b.to_string(),
            self.energy_savings
                .map(|s| s.to_string())
                .unwrap_or_default(),
        )?;
        row(
            "near_fraction",
            self.near_fraction_a.to_string(),
            self.near_fraction_b.to_string(),
            (self.near_fraction_a - self.near_fraction_b).to_string(),
        )?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{tradeoff_table, CalibrationAnchors, DecompositionRatios};

    fn tradeoff_text(cells: &[usize]) -> String {
        let rows = tradeoff_table(
            cells,
            &CalibrationAnchors::default(),
            &DecompositionRatios::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_tradeoff(&mut buf, &rows).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn tradeoff_csv() {
        let text = tradeoff_text(&[32, 512]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SCHEMA_LINE);
        assert_eq!(lines[1], "cells,trc_ns,trcd_ns,die_norm,power_norm");
        assert!(lines[2].starts_with("32,23.10,"));
        assert!(lines[2].contains(",3.760,"));
        assert!(lines[3].starts_with("512,52.50,"));
        assert!(lines[3].contains(",1.000,"));
    }

    #[test]
    fn empty_tradeoff_is_header_only() {
        assert_eq!(tradeoff_text(&[]).lines().count(), 2);
    }

    #[test]
    fn tradeoff_keeps_input_order() {
        let text = tradeoff_text(&[512, 128, 32]);
        let cells: Vec<&str> = text
            .lines()
            .skip(2)
            .map(|l| l.split(',').next().unwrap())
            .collect();
        assert_eq!(cells, ["512", "128", "32"]);
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let mut buf = Vec::new();
        write_sweep(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
