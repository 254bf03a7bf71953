//! Memory controller: request queues, FR-FCFS scheduling and near-segment
//! indirection.

mod address;
mod stats;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

pub use address::{AddressMap, Field, FieldOrder, Location};
pub use stats::{LatencyStats, ServiceStats};

use crate::energy::EnergyLedger;
use crate::engine::{splitmix, Command, CommandKind, RowKey, TimingEngine};
use crate::error::{Result, SimError};
use crate::policy::{AccessDecision, NearCacheState, PageMapTable};
use crate::workload::{Access, CoreModel, RequestSink};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemRequest {
    pub id: u64,
    pub core: usize,
    pub address: u64,
    pub is_write: bool,
    pub arrival: u64,
    pub loc: Location,
    /// Trace line that produced the request.
    pub line: usize,
    /// Token stored by a write.
    pub data: u64,
    pub first_issue: Option<u64>,
    pub did_act: bool,
    pub completion: Option<u64>,
    pub served_near: bool,
    pub row_hit: bool,
    pub recorded: bool,
}

impl MemRequest {
    pub fn new(
        id: u64,
        core: usize,
        address: u64,
        is_write: bool,
        arrival: u64,
        loc: Location,
        line: usize,
    ) -> Self {
        Self {
            id,
            core,
            address,
            is_write,
            arrival,
            loc,
            line,
            data: 0,
            first_issue: None,
            did_act: false,
            completion: None,
            served_near: false,
            row_hit: false,
            recorded: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControllerParams {
    /// Total queue entries across all banks.
    pub queue_capacity: usize,
    /// Requests older than this many cycles are scheduled before row hits.
    pub aging_cap: u64,
    /// Near rows per subarray withheld from the address space.
    pub reserved_rows: usize,
    pub write_seed: u64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            queue_capacity: 64,
            aging_cap: 10_000,
            reserved_rows: 0,
            write_seed: 0,
        }
    }
}

/// How logical rows reach physical rows.
#[derive(Debug, Clone)]
pub enum NearMapping {
    /// Every logical row lives at its home row.
    Direct,
    /// Far rows are cached in reserved near rows by a caching policy.
    Cache(NearCacheState),
    /// A fixed table places profiled hot rows in reserved near rows.
    Profile(PageMapTable),
}

/// One request as seen at its column command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceRecord {
    pub id: u64,
    pub core: usize,
    pub address: u64,
    pub is_write: bool,
    /// Token written, or token returned by the read.
    pub value: u64,
    pub cycle: u64,
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Request { bank: usize, index: usize },
    Migration { bank: usize },
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cmd: Command,
    source: Source,
    key: (u8, u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct InFlight {
    completion: u64,
    request: MemRequest,
}

impl Ord for InFlight {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.completion, self.request.id).cmp(&(other.completion, other.request.id))
    }
}

impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepOutcome {
    pub issued: Option<Command>,
    /// Earliest future cycle at which a currently blocked command becomes legal.
    pub next_ready: Option<u64>,
}

const RANK_AGED: u8 = 0;
const RANK_MIGRATION: u8 = 1;
const RANK_HIT: u8 = 2;
const RANK_OTHER: u8 = 3;

#[derive(Debug, Clone)]
pub struct Controller {
    engine: TimingEngine,
    map: AddressMap,
    params: ControllerParams,
    mapping: NearMapping,
    queues: Vec<Vec<MemRequest>>,
    occupancy: usize,
    pending: Vec<VecDeque<Command>>,
    inflight: BinaryHeap<Reverse<InFlight>>,
    next_id: u64,
    stats: ServiceStats,
    ledger: EnergyLedger,
    service_log: Option<Vec<ServiceRecord>>,
    row_counts: Option<HashMap<usize, u64>>,
    next_decay: u64,
    migrations_issued: u64,
    last_busy: u64,
}

impl Controller {
    pub fn new(
        mut engine: TimingEngine,
        map: AddressMap,
        mapping: NearMapping,
        params: ControllerParams,
        ledger: EnergyLedger,
        cores: usize,
    ) -> Result<Self> {
        let geometry = engine.geometry().clone();
        if params.queue_capacity == 0 {
            return Err(SimError::config("queue capacity must be positive"));
        }
        if map.addressable_rows() + params.reserved_rows != geometry.rows_per_subarray() {
            return Err(SimError::config(format!(
                "address map covers {} rows plus {} reserved, subarray has {}",
                map.addressable_rows(),
                params.reserved_rows,
                geometry.rows_per_subarray()
            )));
        }
        let reserved_fits = params.reserved_rows == 0
            || (geometry.is_segmented() && params.reserved_rows <= geometry.near_rows());
        if !reserved_fits {
            return Err(SimError::config(format!(
                "{} reserved rows do not fit the near segment",
                params.reserved_rows
            )));
        }
        let next_decay = match &mapping {
            NearMapping::Cache(c) => {
                if c.slot_count() != params.reserved_rows {
                    return Err(SimError::config("cache slots must equal the reserved rows"));
                }
                if c.params().decay_epoch == 0 {
                    return Err(SimError::config("decay epoch must be positive"));
                }
                c.params().decay_epoch
            }
            NearMapping::Profile(table) => {
                // Mapped rows start out holding their home row's content.
                for ((bank, sa, far), near) in table.entries() {
                    if near >= params.reserved_rows {
                        return Err(SimError::config(format!(
                            "profile maps row {far} onto unreserved near row {near}"
                        )));
                    }
                    engine
                        .store_mut()
                        .copy_row(RowKey::new(bank, sa, far), RowKey::new(bank, sa, near));
                }
                u64::MAX
            }
            NearMapping::Direct => u64::MAX,
        };
        Ok(Self {
            queues: vec![Vec::new(); geometry.banks],
            pending: vec![VecDeque::new(); geometry.banks],
            engine,
            map,
            params,
            mapping,
            occupancy: 0,
            inflight: BinaryHeap::new(),
            next_id: 0,
            stats: ServiceStats::new(cores),
            ledger,
            service_log: None,
            row_counts: None,
            next_decay,
            migrations_issued: 0,
            last_busy: 0,
        })
    }

    /// Keep a record of every served request.
    pub fn record_service(&mut self) {
        self.service_log.get_or_insert_with(Vec::new);
    }

    pub fn take_service_log(&mut self) -> Vec<ServiceRecord> {
        self.service_log.take().unwrap_or_default()
    }

    /// Count accesses per physical home row.
    pub fn record_row_counts(&mut self) {
        self.row_counts.get_or_insert_with(HashMap::new);
    }

    pub fn take_row_counts(&mut self) -> HashMap<usize, u64> {
        self.row_counts.take().unwrap_or_default()
    }

    pub fn engine(&self) -> &TimingEngine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut TimingEngine {
        &mut self.engine
    }

    pub fn address_map(&self) -> &AddressMap {
        &self.map
    }

    pub fn mapping(&self) -> &NearMapping {
        &self.mapping
    }

    pub fn stats(&self) -> &ServiceStats {
        &self.stats
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn migrations_issued(&self) -> u64 {
        self.migrations_issued
    }

    pub fn occupancy(&self) -> usize {
        self.occupancy
    }

    /// Last cycle at which any issued command or completion was outstanding.
    pub fn last_busy(&self) -> u64 {
        self.last_busy
    }

    pub fn is_idle(&self) -> bool {
        self.occupancy == 0
            && self.inflight.is_empty()
            && self.pending.iter().all(VecDeque::is_empty)
    }

    pub fn next_completion(&self) -> Option<u64> {
        self.inflight.peek().map(|r| r.0.completion)
    }

    fn home_row(&self, loc: &Location) -> usize {
        loc.row + self.params.reserved_rows
    }

    fn subarray_index(&self, loc: &Location) -> usize {
        loc.bank * self.engine.geometry().subarrays_per_bank + loc.subarray
    }

    /// Physical row currently holding the data of `loc`.
    pub fn target_row(&self, loc: &Location) -> usize {
        let home = self.home_row(loc);
        match &self.mapping {
            NearMapping::Direct => home,
            NearMapping::Cache(c) => c.lookup(self.subarray_index(loc), home).unwrap_or(home),
            NearMapping::Profile(t) => t.lookup(loc.bank, loc.subarray, home).unwrap_or(home),
        }
    }

    fn next_command(&self, r: &MemRequest, bank: usize) -> (Command, bool) {
        let target = self.target_row(&r.loc);
        let sa = r.loc.subarray;
        match self.engine.bank(bank).latched_row() {
            Some((s, row)) if s == sa && row == target => {
                let cmd = if r.is_write {
                    Command::wr(bank, sa, target, r.loc.column)
                } else {
                    Command::rd(bank, sa, target, r.loc.column)
                };
                (cmd, true)
            }
            Some((s, row)) => (Command::pre(bank, s, row), false),
            None => (Command::act(bank, sa, target), false),
        }
    }

    /// Pick the command to issue at `now`, if any is legal.
    ///
    /// Order: aged requests, pending migrations, row hits, everything else;
    /// oldest request first within a class.
    fn schedule(&self, now: u64) -> Result<(Option<Candidate>, Option<u64>)> {
        let mut best: Option<Candidate> = None;
        let mut next: Option<u64> = None;
        let mut consider = |cand: Candidate| -> Result<()> {
            let t = self.engine.earliest_issue(&cand.cmd, now)?;
            if t <= now {
                if best.is_none_or(|b| cand.key < b.key) {
                    best = Some(cand);
                }
            } else {
                next = Some(next.map_or(t, |n: u64| n.min(t)));
            }
            Ok(())
        };
        for bank in 0..self.queues.len() {
            if let Some(&mig) = self.pending[bank].front() {
                // Migrations need a precharged bank; requests wait behind them.
                let cmd = match self.engine.bank(bank).latched_row() {
                    Some((sa, row)) => Command::pre(bank, sa, row),
                    None => mig,
                };
                consider(Candidate {
                    cmd,
                    source: Source::Migration { bank },
                    key: (RANK_MIGRATION, bank as u64),
                })?;
                continue;
            }
            for (index, r) in self.queues[bank].iter().enumerate() {
                let (cmd, hit) = self.next_command(r, bank);
                let rank = if now.saturating_sub(r.arrival) > self.params.aging_cap {
                    RANK_AGED
                } else if hit {
                    RANK_HIT
                } else {
                    RANK_OTHER
                };
                consider(Candidate {
                    cmd,
                    source: Source::Request { bank, index },
                    key: (rank, r.id),
                })?;
            }
        }
        Ok((best, next))
    }

    /// Schedule and issue at most one command at `now`.
    pub fn step(&mut self, now: u64) -> Result<StepOutcome> {
        if let NearMapping::Cache(c) = &mut self.mapping {
            while now >= self.next_decay {
                c.decay();
                self.next_decay += c.params().decay_epoch;
            }
        }
        let (best, next_ready) = self.schedule(now)?;
        let Some(cand) = best else {
            return Ok(StepOutcome {
                issued: None,
                next_ready,
            });
        };
        let cmd = cand.cmd;
        match cand.source {
            Source::Migration { bank } => {
                let out = self.engine.issue(cmd, now, None)?;
                if cmd.kind == CommandKind::Mig {
                    self.pending[bank].pop_front();
                    self.migrations_issued += 1;
                }
                self.last_busy = self.last_busy.max(out.completion);
            }
            Source::Request { bank, index } => {
                let data = self.queues[bank][index].data;
                let write_data = (cmd.kind == CommandKind::Wr).then_some(data);
                let out = self.engine.issue(cmd, now, write_data)?;
                self.last_busy = self.last_busy.max(out.completion);
                let r = &mut self.queues[bank][index];
                r.first_issue.get_or_insert(now);
                match cmd.kind {
                    CommandKind::Act => r.did_act = true,
                    CommandKind::Rd | CommandKind::Wr => {
                        self.serve(bank, index, cmd, out.completion, out.read, now)?
                    }
                    _ => {}
                }
            }
        }
        self.ledger.charge(&cmd, self.engine.geometry());
        Ok(StepOutcome {
            issued: Some(cmd.at(now)),
            next_ready,
        })
    }

    fn serve(
        &mut self,
        bank: usize,
        index: usize,
        cmd: Command,
        completion: u64,
        read: Option<u64>,
        now: u64,
    ) -> Result<()> {
        let mut r = self.queues[bank].remove(index);
        self.occupancy -= 1;
        let geometry = self.engine.geometry();
        let home = self.home_row(&r.loc);
        let tier = geometry.tier_of_row(cmd.row);
        r.served_near = geometry.is_segmented() && tier == 0;
        r.row_hit = !r.did_act;
        r.completion = Some(completion);
        let home_is_far = geometry.tier_of_row(home) != 0;
        let global_home = geometry.global_row(bank, r.loc.subarray, home);

        if let Some(counts) = self.row_counts.as_mut() {
            *counts.entry(global_home).or_insert(0) += 1;
        }
        if let Some(log) = self.service_log.as_mut() {
            log.push(ServiceRecord {
                id: r.id,
                core: r.core,
                address: r.address,
                is_write: r.is_write,
                value: if r.is_write {
                    r.data
                } else {
                    read.unwrap_or_default()
                },
                cycle: now,
            });
        }

        let sa_index = self.subarray_index(&r.loc);
        if let NearMapping::Cache(cache) = &mut self.mapping {
            if home_is_far {
                let wait = r.first_issue.unwrap_or(now) - r.arrival;
                let (decision, copies) = cache.access(sa_index, home, r.is_write, wait, now)?;
                let expected = match decision {
                    AccessDecision::ServeNear(slot) => slot,
                    _ => home,
                };
                if expected != cmd.row {
                    return Err(SimError::internal(format!(
                        "request {} served from row {} but the cache expects {expected}",
                        r.id, cmd.row
                    )));
                }
                for m in copies {
                    self.pending[bank].push_back(Command::mig(
                        bank,
                        r.loc.subarray,
                        m.src_row,
                        m.dst_row,
                    ));
                }
            }
        }
        self.inflight.push(Reverse(InFlight {
            completion,
            request: r,
        }));
        Ok(())
    }

    /// Retire requests whose data transfer finished by `now`.
    pub fn retire(&mut self, now: u64, cores: &mut [CoreModel]) -> Result<()> {
        self.engine.settle(now);
        while self.inflight.peek().is_some_and(|r| r.0.completion <= now) {
            let Reverse(InFlight {
                completion,
                mut request,
            }) = self.inflight.pop().expect("peeked");
            self.stats.on_complete(&mut request)?;
            let core = cores.get_mut(request.core).ok_or_else(|| {
                SimError::internal(format!("request {} from unknown core", request.id))
            })?;
            core.complete(completion)?;
        }
        Ok(())
    }
}

impl RequestSink for Controller {
    fn try_enqueue(&mut self, core: usize, access: Access, now: u64, line: usize) -> Result<bool> {
        let loc = self.map.decode(access.address).ok_or_else(|| {
            SimError::workload(
                line,
                format!(
                    "address {:#x} is outside the {}-byte address space",
                    access.address,
                    self.map.capacity().unwrap_or(u64::MAX)
                ),
            )
        })?;
        if self.occupancy >= self.params.queue_capacity {
            return Ok(false);
        }
        let id = self.next_id;
        self.next_id += 1;
        let mut r = MemRequest::new(id, core, access.address, access.is_write, now, loc, line);
        if r.is_write {
            r.data = splitmix(self.params.write_seed ^ splitmix(id));
        }
        self.queues[loc.bank].push(r);
        self.occupancy += 1;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{NearPolicy, RunConfig};
    use crate::policy::PolicyKind;
    use crate::sim::build_controller;

    fn baseline() -> (Controller, RunConfig) {
        let cfg = RunConfig {
            tiers: vec![512],
            near_slots: 0,
            policy: NearPolicy::Cache(PolicyKind::None),
            ..RunConfig::default()
        };
        (build_controller(&cfg).unwrap(), cfg)
    }

    fn addr(c: &Controller, bank: usize, row: usize, column: usize) -> u64 {
        c.address_map().encode(&Location {
            bank,
            subarray: 0,
            row,
            column,
            offset: 0,
        })
    }

    fn enqueue(c: &mut Controller, address: u64, now: u64) {
        let access = Access {
            is_write: false,
            address,
        };
        assert!(c.try_enqueue(0, access, now, 1).unwrap());
    }

    /// Open row 5 of bank 0 through a first request and return the cycle
    /// after its read.
    fn open_row_five(c: &mut Controller) -> u64 {
        let a = addr(c, 0, 5, 0);
        enqueue(c, a, 0);
        let act = c.step(0).unwrap().issued.unwrap();
        assert_eq!(act.kind, CommandKind::Act);
        let trcd = c.engine().timings()[0].trcd;
        let rd = c.step(trcd).unwrap().issued.unwrap();
        assert_eq!(rd.kind, CommandKind::Rd);
        trcd + 1
    }

    #[test]
    fn row_hit_beats_older_miss() {
        let (mut c, _) = baseline();
        let t = open_row_five(&mut c);
        let miss = addr(&c, 0, 9, 0);
        let hit = addr(&c, 0, 5, 3);
        enqueue(&mut c, miss, t);
        enqueue(&mut c, hit, t + 1);
        let now = t + 100;
        let cmd = c.step(now).unwrap().issued.unwrap();
        assert_eq!((cmd.kind, cmd.row, cmd.arg), (CommandKind::Rd, 5, 3));
    }

    #[test]
    fn aged_miss_preempts_row_hit() {
        let (mut c, cfg) = baseline();
        let t = open_row_five(&mut c);
        let miss = addr(&c, 0, 9, 0);
        let hit = addr(&c, 0, 5, 3);
        enqueue(&mut c, miss, t);
        enqueue(&mut c, hit, t + 1);
        let now = t + cfg.aging_cap + 1;
        let cmd = c.step(now).unwrap().issued.unwrap();
        assert_eq!((cmd.kind, cmd.row), (CommandKind::Pre, 5));
    }

    #[test]
    fn blocked_banks_issue_nothing() {
        let (mut c, _) = baseline();
        let a = addr(&c, 0, 5, 0);
        enqueue(&mut c, a, 0);
        c.step(0).unwrap();
        let out = c.step(1).unwrap();
        assert!(out.issued.is_none());
        assert_eq!(out.next_ready, Some(c.engine().timings()[0].trcd));
    }

    #[test]
    fn full_queue_refuses() {
        let (mut c, cfg) = baseline();
        for i in 0..cfg.queue_capacity {
            let a = addr(&c, i % 8, i, 0);
            enqueue(&mut c, a, 0);
        }
        let access = Access {
            is_write: false,
            address: 0,
        };
        assert!(!c.try_enqueue(0, access, 0, 1).unwrap());
        assert_eq!(c.occupancy(), cfg.queue_capacity);
    }
}
