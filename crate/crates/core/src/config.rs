//! Run configuration: flat `key = value` text with dotted section prefixes.
//!
//! Unknown keys are rejected, missing keys take their defaults, and
//! `to_text` emits every key so that parsing it back yields an equal config.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::controller::FieldOrder;
use crate::energy::EnergyModel;
use crate::engine::splitmix;
use crate::error::{Result, SimError};
use crate::geometry::DecompositionRatios;
use crate::policy::{PolicyKind, PolicyParams};

/// How the reserved near rows are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NearPolicy {
    Cache(PolicyKind),
    /// Static placement from an access profile.
    Profile,
}

impl fmt::Display for NearPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NearPolicy::Cache(k) => f.write_str(k.name()),
            NearPolicy::Profile => f.write_str("profile"),
        }
    }
}

impl FromStr for NearPolicy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "profile" {
            Ok(NearPolicy::Profile)
        } else {
            s.parse().map(NearPolicy::Cache)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadKind {
    HotCold,
    Zipf,
    Uniform,
    File,
}

impl WorkloadKind {
    pub fn name(self) -> &'static str {
        match self {
            WorkloadKind::HotCold => "hotcold",
            WorkloadKind::Zipf => "zipf",
            WorkloadKind::Uniform => "uniform",
            WorkloadKind::File => "file",
        }
    }
}

impl FromStr for WorkloadKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hotcold" => Ok(WorkloadKind::HotCold),
            "zipf" => Ok(WorkloadKind::Zipf),
            "uniform" => Ok(WorkloadKind::Uniform),
            "file" => Ok(WorkloadKind::File),
            other => Err(SimError::config(format!("unknown workload kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub kind: WorkloadKind,
    /// Trace file; used by `file` workloads.
    pub file: Option<PathBuf>,
    /// Requests per core for generated workloads.
    pub requests: usize,
    /// Rows the generator spreads accesses over; 0 means the whole address space.
    pub rows: u64,
    pub hot_rows: u64,
    pub hot_fraction: f64,
    pub write_fraction: f64,
    pub bubble_mean: f64,
    pub zipf_exponent: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            kind: WorkloadKind::HotCold,
            file: None,
            requests: 100_000,
            rows: 4096,
            hot_rows: 32,
            hot_fraction: 0.9,
            write_fraction: 0.2,
            bubble_mean: 20.0,
            zipf_exponent: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub cycle_ns: f64,
    /// Cells per tier, near segment first.
    pub tiers: Vec<usize>,
    pub banks: usize,
    pub subarrays: usize,
    pub columns: usize,
    pub column_bytes: usize,
    pub address_order: FieldOrder,
    pub timing: DecompositionRatios,
    pub column_cost: f64,
    pub policy: NearPolicy,
    /// Near rows per subarray withheld from the address space.
    pub near_slots: usize,
    pub policy_params: PolicyParams,
    /// Profile file for `profile` placement.
    pub profile: Option<PathBuf>,
    pub aging_cap: u64,
    pub queue_capacity: usize,
    pub cores: usize,
    pub max_outstanding: usize,
    pub workload: WorkloadConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            cycle_ns: 1.25,
            tiers: vec![32, 480],
            banks: 8,
            subarrays: 8,
            columns: 128,
            column_bytes: 64,
            address_order: FieldOrder::default(),
            timing: DecompositionRatios::default(),
            column_cost: EnergyModel::DEFAULT_COLUMN_COST,
            policy: NearPolicy::Cache(PolicyKind::BenefitBased),
            near_slots: 32,
            policy_params: PolicyParams::default(),
            profile: None,
            aging_cap: 10_000,
            queue_capacity: 64,
            cores: 1,
            max_outstanding: 1,
            workload: WorkloadConfig::default(),
        }
    }
}

/// Sub-seeds derived from the run seed.
pub mod streams {
    pub const DATA: u64 = 1;
    pub const WRITES: u64 = 2;
    pub const CORE_BASE: u64 = 0x100;
}

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix(splitmix(seed) ^ stream)
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse()
        .map_err(|e| SimError::config(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|p| parse_num(key, p.trim())).collect()
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                SimError::config(format!("line {}: expected `key = value`", i + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(SimError::config(format!(
                    "line {}: duplicate key {k}",
                    i + 1
                )));
            }
            cfg.set(k, v)
                .map_err(|e| SimError::config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_text(&text)?;
        // Relative paths inside a config resolve against its directory.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.workload.file, &mut cfg.profile]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Assign one key.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let w = &mut self.workload;
        let t = &mut self.timing;
        let p = &mut self.policy_params;
        match key {
            "seed" => self.seed = parse_num(key, v)?,
            "cycle_ns" => self.cycle_ns = parse_num(key, v)?,
            "geometry.tiers" => self.tiers = parse_list(key, v)?,
            "geometry.banks" => self.banks = parse_num(key, v)?,
            "geometry.subarrays" => self.subarrays = parse_num(key, v)?,
            "geometry.columns" => self.columns = parse_num(key, v)?,
            "geometry.column_bytes" => self.column_bytes = parse_num(key, v)?,
            "address.order" => self.address_order = v.parse()?,
            "timing.tras_frac" => t.tras_frac = parse_num(key, v)?,
            "timing.trp_frac" => t.trp_frac = parse_num(key, v)?,
            "timing.trcd_frac" => t.trcd_frac = parse_num(key, v)?,
            "timing.tcl_ns" => t.tcl_ns = parse_num(key, v)?,
            "timing.twr_ns" => t.twr_ns = parse_num(key, v)?,
            "timing.tccd_ns" => t.tccd_ns = parse_num(key, v)?,
            "timing.mig_extra_ns" => t.mig_extra_ns = parse_num(key, v)?,
            "energy.column_cost" => self.column_cost = parse_num(key, v)?,
            "policy.kind" => self.policy = v.parse()?,
            "policy.near_slots" => self.near_slots = parse_num(key, v)?,
            "policy.wait_threshold" => p.wait_threshold = parse_num(key, v)?,
            "policy.decay_epoch" => p.decay_epoch = parse_num(key, v)?,
            "policy.benefit_cap" => p.benefit_cap = parse_num(key, v)?,
            "policy.profile" => self.profile = opt_path(v),
            "controller.aging_cap" => self.aging_cap = parse_num(key, v)?,
            "controller.queue_capacity" => self.queue_capacity = parse_num(key, v)?,
            "cores.count" => self.cores = parse_num(key, v)?,
            "cores.max_outstanding" => self.max_outstanding = parse_num(key, v)?,
            "workload.kind" => w.kind = v.parse()?,
            "workload.file" => w.file = opt_path(v),
            "workload.requests" => w.requests = parse_num(key, v)?,
            "workload.rows" => w.rows = parse_num(key, v)?,
            "workload.hot_rows" => w.hot_rows = parse_num(key, v)?,
            "workload.hot_fraction" => w.hot_fraction = parse_num(key, v)?,
            "workload.write_fraction" => w.write_fraction = parse_num(key, v)?,
            "workload.bubble_mean" => w.bubble_mean = parse_num(key, v)?,
            "workload.zipf_exponent" => w.zipf_exponent = parse_num(key, v)?,
            other => return Err(SimError::config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Every key with its value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.timing;
        let p = &self.policy_params;
        let w = &self.workload;
        let tiers: Vec<String> = self.tiers.iter().map(usize::to_string).collect();
        vec![
            ("seed", self.seed.to_string()),
            ("cycle_ns", self.cycle_ns.to_string()),
            ("geometry.tiers", tiers.join(",")),
            ("geometry.banks", self.banks.to_string()),
            ("geometry.subarrays", self.subarrays.to_string()),
            ("geometry.columns", self.columns.to_string()),
            ("geometry.column_bytes", self.column_bytes.to_string()),
            ("address.order", self.address_order.to_string()),
            ("timing.tras_frac", t.tras_frac.to_string()),
            ("timing.trp_frac", t.trp_frac.to_string()),
            ("timing.trcd_frac", t.trcd_frac.to_string()),
            ("timing.tcl_ns", t.tcl_ns.to_string()),
            ("timing.twr_ns", t.twr_ns.to_string()),
            ("timing.tccd_ns", t.tccd_ns.to_string()),
            ("timing.mig_extra_ns", t.mig_extra_ns.to_string()),
            ("energy.column_cost", self.column_cost.to_string()),
            ("policy.kind", self.policy.to_string()),
            ("policy.near_slots", self.near_slots.to_string()),
            ("policy.wait_threshold", p.wait_threshold.to_string()),
            ("policy.decay_epoch", p.decay_epoch.to_string()),
            ("policy.benefit_cap", p.benefit_cap.to_string()),
            ("policy.profile", path_text(&self.profile)),
            ("controller.aging_cap", self.aging_cap.to_string()),
            ("controller.queue_capacity", self.queue_capacity.to_string()),
            ("cores.count", self.cores.to_string()),
            ("cores.max_outstanding", self.max_outstanding.to_string()),
            ("workload.kind", w.kind.name().to_string()),
            ("workload.file", path_text(&w.file)),
            ("workload.requests", w.requests.to_string()),
            ("workload.rows", w.rows.to_string()),
            ("workload.hot_rows", w.hot_rows.to_string()),
            ("workload.hot_fraction", w.hot_fraction.to_string()),
            ("workload.write_fraction", w.write_fraction.to_string()),
            ("workload.bubble_mean", w.bubble_mean.to_string()),
            ("workload.zipf_exponent", w.zipf_exponent.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(SimError::config(m));
        if !(self.cycle_ns.is_finite() && self.cycle_ns > 0.0) {
            return err(format!("cycle_ns must be positive, got {}", self.cycle_ns));
        }
        if self.tiers.is_empty() || self.tiers.contains(&0) {
            return err("geometry.tiers needs at least one non-empty tier".into());
        }
        for (name, v) in [
            ("geometry.banks", self.banks),
            ("geometry.subarrays", self.subarrays),
            ("geometry.columns", self.columns),
            ("geometry.column_bytes", self.column_bytes),
            ("controller.queue_capacity", self.queue_capacity),
            ("cores.count", self.cores),
        ] {
            if v == 0 {
                return err(format!("{name} must be positive"));
            }
        }
        if !(1..=8).contains(&self.max_outstanding) {
            return err("cores.max_outstanding must lie in 1..=8".into());
        }
        self.timing.validate()?;
        if !(self.column_cost.is_finite() && self.column_cost >= 0.0) {
            return err("energy.column_cost must be non-negative".into());
        }
        if self.tiers.len() == 1 && self.near_slots > 0 {
            return err("policy.near_slots must be 0 without a near segment".into());
        }
        if self.tiers.len() > 1 && self.near_slots > self.tiers[0] {
            return err(format!(
                "policy.near_slots = {} exceeds the {}-row near segment",
                self.near_slots, self.tiers[0]
            ));
        }
        if self.policy_params.decay_epoch == 0 {
            return err("policy.decay_epoch must be positive".into());
        }
        if self.policy == NearPolicy::Profile && self.profile.is_none() {
            return err("policy.kind = profile needs policy.profile".into());
        }
        let w = &self.workload;
        for (name, v) in [
            ("workload.hot_fraction", w.hot_fraction),
            ("workload.write_fraction", w.write_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return err(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(w.bubble_mean.is_finite() && w.bubble_mean >= 0.0) {
            return err("workload.bubble_mean must be non-negative".into());
        }
        if !(w.zipf_exponent.is_finite() && w.zipf_exponent >= 0.0) {
            return err("workload.zipf_exponent must be non-negative".into());
        }
        if w.kind == WorkloadKind::File && w.file.is_none() {
            return err("workload.kind = file needs workload.file".into());
        }
        Ok(())
    }

    /// Seed of a derived random stream.
    pub fn stream_seed(&self, stream: u64) -> u64 {
        derive_seed(self.seed, stream)
    }
}
