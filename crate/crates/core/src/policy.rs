//! Near-segment management.
//!
//! Two ways of exploiting the fast near segment:
//!
//! * as a hardware-managed, inclusive cache of far rows in the same
//!   subarray, filled and drained with inter-segment copies (MIG), under one
//!   of three caching policies;
//! * as a fixed remapping target for the hottest far rows, chosen from an
//!   access profile before the run.
//!
//! Cached rows keep their far copy. Writes dirty the near copy, and only
//! dirty evictions pay a write-back MIG.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Result, SimError};
use crate::geometry::DeviceGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    None,
    /// Cache every far row on access; evict the least recently used slot.
    Simple,
    /// Cache a far row only if its request waited longer than a threshold.
    WaitMinimized,
    /// Cache a far row once its access count beats the weakest cached row.
    BenefitBased,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::None,
        PolicyKind::Simple,
        PolicyKind::WaitMinimized,
        PolicyKind::BenefitBased,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::None => "none",
            PolicyKind::Simple => "simple",
            PolicyKind::WaitMinimized => "wait-minimized",
            PolicyKind::BenefitBased => "benefit-based",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PolicyKind::None),
            "simple" | "sc" => Ok(PolicyKind::Simple),
            "wait-minimized" | "wmc" => Ok(PolicyKind::WaitMinimized),
            "benefit-based" | "bbc" => Ok(PolicyKind::BenefitBased),
            other => Err(SimError::config(format!("unknown policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyParams {
    pub wait_threshold: u64,
    pub decay_epoch: u64,
    pub benefit_cap: u8,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            wait_threshold: 8,
            decay_epoch: 100_000,
            benefit_cap: 255,
        }
    }
}

/// One near-segment row used as a cache slot. Slot `i` is physical row `i`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Slot {
    pub far_row: Option<usize>,
    pub dirty: bool,
    pub last_use: u64,
    pub benefit: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessDecision {
    ServeNear(usize),
    ServeFar,
    ServeFarThenMigrate(usize),
}

/// A row copy inside one subarray.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Migration {
    pub src_row: usize,
    pub dst_row: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheCounters {
    pub near_hits: u64,
    pub fills: u64,
    pub dirty_evictions: u64,
    pub clean_evictions: u64,
}

#[derive(Debug, Clone, Default)]
struct SubarrayCache {
    slots: Vec<Slot>,
    reverse: HashMap<usize, usize>,
    /// Benefit of rows that are not currently cached.
    shadow: HashMap<usize, u8>,
}

/// Near-segment cache contents for every subarray of the device.
#[derive(Debug, Clone)]
pub struct NearCacheState {
    policy: PolicyKind,
    params: PolicyParams,
    subarrays: Vec<SubarrayCache>,
    counters: CacheCounters,
}

impl NearCacheState {
    pub fn new(policy: PolicyKind, params: PolicyParams, subarrays: usize, slots: usize) -> Self {
        let sa = SubarrayCache {
            slots: vec![Slot::default(); slots],
            ..Default::default()
        };
        Self {
            policy,
            params,
            subarrays: vec![sa; subarrays],
            counters: CacheCounters::default(),
        }
    }

    pub fn policy(&self) -> PolicyKind {
        self.policy
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn counters(&self) -> CacheCounters {
        self.counters
    }

    pub fn slot_count(&self) -> usize {
        self.subarrays.first().map_or(0, |s| s.slots.len())
    }

    pub fn slots(&self, subarray: usize) -> &[Slot] {
        &self.subarrays[subarray].slots
    }

    pub fn lookup(&self, subarray: usize, far_row: usize) -> Option<usize> {
        self.subarrays[subarray].reverse.get(&far_row).copied()
    }

    /// Current benefit of `far_row`, cached or not.
    pub fn benefit(&self, subarray: usize, far_row: usize) -> u8 {
        let sa = &self.subarrays[subarray];
        match sa.reverse.get(&far_row) {
            Some(&s) => sa.slots[s].benefit,
            None => sa.shadow.get(&far_row).copied().unwrap_or(0),
        }
    }

    fn lru_victim(slots: &[Slot]) -> usize {
        slots
            .iter()
            .enumerate()
            .min_by_key(|(i, s)| (s.far_row.is_some(), s.last_use, *i))
            .map(|(i, _)| i)
            .expect("slot list is non-empty")
    }

    fn min_benefit_victim(slots: &[Slot]) -> (usize, u8) {
        slots
            .iter()
            .enumerate()
            .min_by_key(|(i, s)| (s.far_row.is_some(), s.benefit, *i))
            .map(|(i, s)| (i, if s.far_row.is_some() { s.benefit } else { 0 }))
            .expect("slot list is non-empty")
    }

    /// Decide how to serve an access to `far_row` and update recency/benefit.
    ///
    /// Does not change slot occupancy; see [`commit_fill`](Self::commit_fill).
    pub fn on_access(
        &mut self,
        subarray: usize,
        far_row: usize,
        is_write: bool,
        queue_wait: u64,
        now: u64,
    ) -> Result<AccessDecision> {
        let cap = self.params.benefit_cap;
        let policy = self.policy;
        let threshold = self.params.wait_threshold;
        let sa = &mut self.subarrays[subarray];

        if let Some(&s) = sa.reverse.get(&far_row) {
            let slot = &mut sa.slots[s];
            if slot.far_row != Some(far_row) {
                return Err(SimError::internal(format!(
                    "reverse map points row {far_row} at slot {s} holding {:?}",
                    slot.far_row
                )));
            }
            slot.last_use = now;
            slot.benefit = slot.benefit.saturating_add(1).min(cap);
            slot.dirty |= is_write;
            self.counters.near_hits += 1;
            return Ok(AccessDecision::ServeNear(s));
        }

        if sa.slots.is_empty() {
            return Ok(AccessDecision::ServeFar);
        }
        let decision = match policy {
            PolicyKind::None => AccessDecision::ServeFar,
            PolicyKind::Simple => AccessDecision::ServeFarThenMigrate(Self::lru_victim(&sa.slots)),
            PolicyKind::WaitMinimized => {
                if queue_wait > threshold {
                    AccessDecision::ServeFarThenMigrate(Self::lru_victim(&sa.slots))
                } else {
                    AccessDecision::ServeFar
                }
            }
            PolicyKind::BenefitBased => {
                let b = sa.shadow.entry(far_row).or_insert(0);
                *b = b.saturating_add(1).min(cap);
                let benefit = *b;
                let (victim, weakest) = Self::min_benefit_victim(&sa.slots);
                if benefit > weakest {
                    AccessDecision::ServeFarThenMigrate(victim)
                } else {
                    AccessDecision::ServeFar
                }
            }
        };
        Ok(decision)
    }

    /// Invalidate `slot`; returns the write-back copy when it was dirty.
    pub fn evict(&mut self, subarray: usize, slot: usize, _now: u64) -> Result<Option<Migration>> {
        let sa = &mut self.subarrays[subarray];
        let s = sa
            .slots
            .get_mut(slot)
            .ok_or_else(|| SimError::internal(format!("slot {slot} out of range")))?;
        let far_row = s
            .far_row
            .take()
            .ok_or_else(|| SimError::internal(format!("evicting empty slot {slot}")))?;
        let dirty = std::mem::take(&mut s.dirty);
        let benefit = std::mem::take(&mut s.benefit);
        if sa.reverse.remove(&far_row) != Some(slot) {
            return Err(SimError::internal(format!(
                "slot {slot} held row {far_row} missing from reverse map"
            )));
        }
        if benefit > 0 {
            sa.shadow.insert(far_row, benefit);
        }
        if dirty {
            self.counters.dirty_evictions += 1;
            Ok(Some(Migration {
                src_row: slot,
                dst_row: far_row,
            }))
        } else {
            self.counters.clean_evictions += 1;
            Ok(None)
        }
    }

    /// Carry out a `ServeFarThenMigrate(slot)` decision: evict the victim and
    /// cache `far_row` there. Returns the copies to perform, in order.
    pub fn commit_fill(
        &mut self,
        subarray: usize,
        far_row: usize,
        slot: usize,
        now: u64,
    ) -> Result<Vec<Migration>> {
        let mut copies = Vec::with_capacity(2);
        if self.subarrays[subarray].slots[slot].far_row.is_some() {
            copies.extend(self.evict(subarray, slot, now)?);
        }
        let cap = self.params.benefit_cap;
        let sa = &mut self.subarrays[subarray];
        if sa.reverse.contains_key(&far_row) {
            return Err(SimError::internal(format!("row {far_row} cached twice")));
        }
        let benefit = sa.shadow.remove(&far_row).unwrap_or(0).max(1).min(cap);
        sa.slots[slot] = Slot {
            far_row: Some(far_row),
            dirty: false,
            last_use: now,
            benefit,
        };
        sa.reverse.insert(far_row, slot);
        self.counters.fills += 1;
        copies.push(Migration {
            src_row: far_row,
            dst_row: slot,
        });
        Ok(copies)
    }

    /// Full access path: decide, then commit any fill. Returns the decision
    /// and the copies it requires.
    pub fn access(
        &mut self,
        subarray: usize,
        far_row: usize,
        is_write: bool,
        queue_wait: u64,
        now: u64,
    ) -> Result<(AccessDecision, Vec<Migration>)> {
        let decision = self.on_access(subarray, far_row, is_write, queue_wait, now)?;
        let copies = match decision {
            AccessDecision::ServeFarThenMigrate(slot) => {
                self.commit_fill(subarray, far_row, slot, now)?
            }
            _ => Vec::new(),
        };
        Ok((decision, copies))
    }

    /// Halve every benefit counter.
    pub fn decay(&mut self) {
        for sa in &mut self.subarrays {
            for s in &mut sa.slots {
                s.benefit /= 2;
            }
            sa.shadow.retain(|_, b| {
                *b /= 2;
                *b > 0
            });
        }
    }

    /// Check that every reverse map is the exact inverse of slot occupancy.
    pub fn check_consistency(&self) -> Result<()> {
        for (i, sa) in self.subarrays.iter().enumerate() {
            let occupied = sa.slots.iter().filter(|s| s.far_row.is_some()).count();
            if occupied != sa.reverse.len() {
                return Err(SimError::internal(format!(
                    "subarray {i}: {occupied} occupied slots but {} reverse entries",
                    sa.reverse.len()
                )));
            }
            for (&row, &slot) in &sa.reverse {
                if sa.slots.get(slot).and_then(|s| s.far_row) != Some(row) {
                    return Err(SimError::internal(format!(
                        "subarray {i}: reverse entry {row} -> {slot} is stale"
                    )));
                }
            }
            if sa.slots.iter().any(|s| s.benefit > self.params.benefit_cap)
                || sa.shadow.values().any(|&b| b > self.params.benefit_cap)
            {
                return Err(SimError::internal(format!(
                    "subarray {i}: benefit above cap"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingMode {
    ControllerIndirection,
    OsStaticProfile,
}

/// Fixed remapping of hot far rows onto near rows of the same subarray.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageMapTable {
    pub mode: MappingMode,
    /// `(bank, subarray, far_row) -> near_row`.
    map: HashMap<(usize, usize, usize), usize>,
}

impl PageMapTable {
    pub fn empty(mode: MappingMode) -> Self {
        Self {
            mode,
            map: HashMap::new(),
        }
    }

    pub fn lookup(&self, bank: usize, subarray: usize, far_row: usize) -> Option<usize> {
        self.map.get(&(bank, subarray, far_row)).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Entries sorted by `(bank, subarray, far_row)`.
    pub fn entries(&self) -> Vec<((usize, usize, usize), usize)> {
        let mut v: Vec<_> = self.map.iter().map(|(k, v)| (*k, *v)).collect();
        v.sort_unstable();
        v
    }
}

/// Map the `k` most-accessed far rows of each subarray onto its near rows
/// `0..k`, hottest first. Ties go to the lower row index. Rows already in
/// the near segment need no mapping and are skipped.
pub fn build_profile_map(
    profile: &BTreeMap<usize, u64>,
    k: usize,
    geometry: &DeviceGeometry,
    mode: MappingMode,
) -> Result<PageMapTable> {
    if k > geometry.near_rows() || (k > 0 && !geometry.is_segmented()) {
        return Err(SimError::config(format!(
            "profile map wants {k} near rows but the near segment has {}",
            if geometry.is_segmented() {
                geometry.near_rows()
            } else {
                0
            }
        )));
    }
    let mut per_subarray: BTreeMap<(usize, usize), Vec<(u64, usize)>> = BTreeMap::new();
    for (&global, &count) in profile {
        let (bank, sa, row) = geometry.split_global_row(global).ok_or_else(|| {
            SimError::config(format!("profile row {global} is outside the device"))
        })?;
        if geometry.tier_of_row(row) == 0 || count == 0 {
            continue;
        }
        per_subarray
            .entry((bank, sa))
            .or_default()
            .push((count, row));
    }

    let mut table = PageMapTable::empty(mode);
    for ((bank, sa), mut rows) in per_subarray {
        rows.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (near, &(_, row)) in rows.iter().take(k).enumerate() {
            table.map.insert((bank, sa, row), near);
        }
    }
    Ok(table)
}

/// Profile text: one `row_index count` line per row, ascending row index.
pub fn parse_profile<R: BufRead>(input: R) -> Result<BTreeMap<usize, u64>> {
    let mut out = BTreeMap::new();
    let mut last: Option<usize> = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let mut fields = line.split_whitespace();
        let Some(first) = fields.next() else { continue };
        let parse = |s: Option<&str>| s.and_then(|s| s.parse::<u64>().ok());
        let (Some(row), Some(count), None) =
            (parse(Some(first)), parse(fields.next()), fields.next())
        else {
            return Err(SimError::workload(
                line_no,
                format!("malformed profile line {line:?}"),
            ));
        };
        let row = row as usize;
        if last.is_some_and(|l| row <= l) {
            return Err(SimError::workload(
                line_no,
                "profile rows must be strictly ascending",
            ));
        }
        last = Some(row);
        out.insert(row, count);
    }
    Ok(out)
}

pub fn write_profile<W: Write>(mut out: W, profile: &BTreeMap<usize, u64>) -> Result<()> {
    for (row, count) in profile {
        writeln!(out, "{row} {count}")?;
    }
    Ok(())
}
