//! Command-level DRAM protocol model.
//!
//! Each bank tracks the earliest cycle at which every command kind may issue.
//! Constraints are per bank; the only coupling between banks is the shared
//! command bus, which accepts one command per cycle. Row contents are kept in
//! a [`DataStore`] so that reads, writes and inter-segment copies can be
//! checked against a reference model.

mod store;
mod validate;

use std::fmt;

pub use store::{initial_token, splitmix, DataStore, RowKey};
pub use validate::{parse_command_trace, validate_command_trace, write_command_trace, Violation};

use crate::error::{Result, SimError};
use crate::geometry::{CycleTimings, DeviceGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommandKind {
    Act,
    Rd,
    Wr,
    Pre,
    Mig,
}

impl CommandKind {
    pub const ALL: [CommandKind; 5] = [
        CommandKind::Act,
        CommandKind::Rd,
        CommandKind::Wr,
        CommandKind::Pre,
        CommandKind::Mig,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            CommandKind::Act => "ACT",
            CommandKind::Rd => "RD",
            CommandKind::Wr => "WR",
            CommandKind::Pre => "PRE",
            CommandKind::Mig => "MIG",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.mnemonic() == s)
    }

    pub fn is_column(self) -> bool {
        matches!(self, CommandKind::Rd | CommandKind::Wr)
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// A DRAM command addressed to one bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Command {
    pub kind: CommandKind,
    pub bank: usize,
    pub subarray: usize,
    /// Row being activated, accessed or closed; source row of a MIG.
    pub row: usize,
    /// Column of a RD/WR, destination row of a MIG, zero otherwise.
    pub arg: usize,
    pub issue_cycle: u64,
}

impl Command {
    fn new(kind: CommandKind, bank: usize, subarray: usize, row: usize, arg: usize) -> Self {
        Self {
            kind,
            bank,
            subarray,
            row,
            arg,
            issue_cycle: 0,
        }
    }

    pub fn act(bank: usize, subarray: usize, row: usize) -> Self {
        Self::new(CommandKind::Act, bank, subarray, row, 0)
    }

    pub fn rd(bank: usize, subarray: usize, row: usize, column: usize) -> Self {
        Self::new(CommandKind::Rd, bank, subarray, row, column)
    }

    pub fn wr(bank: usize, subarray: usize, row: usize, column: usize) -> Self {
        Self::new(CommandKind::Wr, bank, subarray, row, column)
    }

    pub fn pre(bank: usize, subarray: usize, row: usize) -> Self {
        Self::new(CommandKind::Pre, bank, subarray, row, 0)
    }

    pub fn mig(bank: usize, subarray: usize, src_row: usize, dst_row: usize) -> Self {
        Self::new(CommandKind::Mig, bank, subarray, src_row, dst_row)
    }

    pub fn at(mut self, cycle: u64) -> Self {
        self.issue_cycle = cycle;
        self
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {}",
            self.issue_cycle, self.kind, self.bank, self.subarray, self.row
        )?;
        match self.kind {
            CommandKind::Rd | CommandKind::Wr | CommandKind::Mig => write!(f, " {}", self.arg),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Precharged,
    Activating,
    Active,
    Precharging,
    Migrating,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Precharged => "PRECHARGED",
            Phase::Activating => "ACTIVATING",
            Phase::Active => "ACTIVE",
            Phase::Precharging => "PRECHARGING",
            Phase::Migrating => "MIGRATING",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LatchedRow {
    subarray: usize,
    row: usize,
    tier: usize,
    ready_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PendingCopy {
    subarray: usize,
    src: usize,
    dst: usize,
    done_at: u64,
}

/// Per-bank protocol state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BankState {
    latched: Option<LatchedRow>,
    precharged_at: u64,
    earliest: [u64; 5],
    busy_until: u64,
    pending_copy: Option<PendingCopy>,
}

impl BankState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn phase(&self, now: u64) -> Phase {
        if self.pending_copy.is_some() && now < self.busy_until {
            return Phase::Migrating;
        }
        match self.latched {
            Some(l) if now < l.ready_at => Phase::Activating,
            Some(_) => Phase::Active,
            None if now < self.precharged_at => Phase::Precharging,
            None => Phase::Precharged,
        }
    }

    /// Open row, present only once the activation has completed.
    pub fn open_row(&self, now: u64) -> Option<usize> {
        match self.phase(now) {
            Phase::Active => self.latched.map(|l| l.row),
            _ => None,
        }
    }

    /// Tier of the row latched by the last ACT, if it is still open.
    pub fn open_tier(&self) -> Option<usize> {
        self.latched.map(|l| l.tier)
    }

    /// `(subarray, row)` latched by the last ACT, even while still activating.
    pub fn latched_row(&self) -> Option<(usize, usize)> {
        self.latched.map(|l| (l.subarray, l.row))
    }

    pub fn earliest(&self, kind: CommandKind) -> u64 {
        self.earliest[kind.index()]
    }

    pub fn busy_until(&self) -> u64 {
        self.busy_until
    }

    fn bump(&mut self, kind: CommandKind, cycle: u64) {
        let e = &mut self.earliest[kind.index()];
        *e = (*e).max(cycle);
    }

    fn protocol_error(&self, cmd: &Command, now: u64) -> SimError {
        SimError::Protocol {
            command: cmd.kind.to_string(),
            bank: cmd.bank,
            phase: self.phase(now).to_string(),
        }
    }

    fn check_structure(&self, cmd: &Command, geometry: &DeviceGeometry, now: u64) -> Result<()> {
        let rows = geometry.rows_per_subarray();
        if cmd.subarray >= geometry.subarrays_per_bank || cmd.row >= rows {
            return Err(SimError::internal(format!(
                "command {cmd} is outside the geometry"
            )));
        }
        let ok = match cmd.kind {
            CommandKind::Act | CommandKind::Mig => self.latched.is_none(),
            CommandKind::Rd | CommandKind::Wr => {
                cmd.arg < geometry.columns_per_row
                    && self.latched_row() == Some((cmd.subarray, cmd.row))
            }
            CommandKind::Pre => self.latched_row() == Some((cmd.subarray, cmd.row)),
        };
        if !ok {
            return Err(self.protocol_error(cmd, now));
        }
        if cmd.kind == CommandKind::Mig {
            if cmd.arg >= rows {
                return Err(SimError::internal(format!(
                    "MIG destination outside geometry: {cmd}"
                )));
            }
            if geometry.tier_of_row(cmd.row) == geometry.tier_of_row(cmd.arg) {
                return Err(SimError::internal(format!(
                    "MIG rows {} and {} lie in the same tier",
                    cmd.row, cmd.arg
                )));
            }
        }
        Ok(())
    }

    /// Smallest cycle `>= now` at which `cmd` violates no timing constraint.
    pub fn earliest_issue(
        &self,
        cmd: &Command,
        geometry: &DeviceGeometry,
        now: u64,
    ) -> Result<u64> {
        self.check_structure(cmd, geometry, now)?;
        Ok(now.max(self.earliest[cmd.kind.index()]))
    }

    fn settle(&mut self, store: &mut DataStore, bank: usize, now: u64) {
        if let Some(c) = self.pending_copy {
            if now >= c.done_at {
                store.copy_row(
                    RowKey::new(bank, c.subarray, c.src),
                    RowKey::new(bank, c.subarray, c.dst),
                );
                self.pending_copy = None;
            }
        }
    }

    /// Execute `cmd` at `now`. Returns the completion cycle and, for RD, the token read.
    pub fn apply(
        &mut self,
        store: &mut DataStore,
        cmd: &Command,
        now: u64,
        write_data: Option<u64>,
        geometry: &DeviceGeometry,
        timings: &[CycleTimings],
    ) -> Result<Outcome> {
        self.settle(store, cmd.bank, now);
        let earliest = self.earliest_issue(cmd, geometry, now)?;
        if earliest > now {
            return Err(SimError::Protocol {
                command: format!("{} at cycle {now}", cmd.kind),
                bank: cmd.bank,
                phase: format!("{} (blocked until {earliest})", self.phase(now)),
            });
        }
        let tier = geometry.tier_of_row(cmd.row);
        let t = &timings[tier];
        let key = RowKey::new(cmd.bank, cmd.subarray, cmd.row);

        let outcome = match cmd.kind {
            CommandKind::Act => {
                self.latched = Some(LatchedRow {
                    subarray: cmd.subarray,
                    row: cmd.row,
                    tier,
                    ready_at: now + t.trcd,
                });
                self.bump(CommandKind::Act, now + t.trc);
                self.bump(CommandKind::Mig, now + t.trc);
                self.bump(CommandKind::Rd, now + t.trcd);
                self.bump(CommandKind::Wr, now + t.trcd);
                self.bump(CommandKind::Pre, now + t.tras);
                Outcome::done(now + t.trcd)
            }
            CommandKind::Rd => {
                self.bump(CommandKind::Rd, now + t.tccd);
                self.bump(CommandKind::Wr, now + t.tccd);
                Outcome {
                    completion: now + t.tcl,
                    read: Some(store.read(key, cmd.arg)),
                }
            }
            CommandKind::Wr => {
                let data = write_data
                    .ok_or_else(|| SimError::internal(format!("WR without data: {cmd}")))?;
                store.write(key, cmd.arg, data);
                self.bump(CommandKind::Rd, now + t.tccd);
                self.bump(CommandKind::Wr, now + t.tccd);
                self.bump(CommandKind::Pre, now + t.tcl + t.twr);
                Outcome::done(now + t.tcl + t.twr)
            }
            CommandKind::Pre => {
                // tRP follows the tier of the row being closed.
                let closing = self.latched.take().map_or(tier, |l| l.tier);
                let trp = timings[closing].trp;
                self.precharged_at = now + trp;
                self.bump(CommandKind::Act, now + trp);
                self.bump(CommandKind::Mig, now + trp);
                Outcome::done(now + trp)
            }
            CommandKind::Mig => {
                let dur = mig_duration(cmd, geometry, timings);
                let done = now + dur;
                self.busy_until = done;
                self.pending_copy = Some(PendingCopy {
                    subarray: cmd.subarray,
                    src: cmd.row,
                    dst: cmd.arg,
                    done_at: done,
                });
                self.precharged_at = done;
                for k in CommandKind::ALL {
                    self.bump(k, done);
                }
                Outcome::done(done)
            }
        };
        Ok(outcome)
    }
}

/// A MIG runs at the pace of its slower participant.
pub fn mig_duration(cmd: &Command, geometry: &DeviceGeometry, timings: &[CycleTimings]) -> u64 {
    let src = geometry.tier_of_row(cmd.row);
    let dst = geometry.tier_of_row(cmd.arg);
    timings[src].tmig.max(timings[dst].tmig)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub completion: u64,
    pub read: Option<u64>,
}

impl Outcome {
    fn done(completion: u64) -> Self {
        Self {
            completion,
            read: None,
        }
    }
}

/// All banks of one channel plus the shared command bus.
#[derive(Debug, Clone)]
pub struct TimingEngine {
    geometry: DeviceGeometry,
    timings: Vec<CycleTimings>,
    banks: Vec<BankState>,
    store: DataStore,
    last_issue: Option<u64>,
    log: Option<Vec<Command>>,
}

impl TimingEngine {
    pub fn new(
        geometry: DeviceGeometry,
        timings: Vec<CycleTimings>,
        data_seed: u64,
    ) -> Result<Self> {
        if timings.len() != geometry.tier_count() {
            return Err(SimError::config(format!(
                "{} timing sets for {} tiers",
                timings.len(),
                geometry.tier_count()
            )));
        }
        let store = DataStore::new(data_seed, geometry.columns_per_row);
        Ok(Self {
            banks: vec![BankState::new(); geometry.banks],
            geometry,
            timings,
            store,
            last_issue: None,
            log: None,
        })
    }

    pub fn geometry(&self) -> &DeviceGeometry {
        &self.geometry
    }

    pub fn timings(&self) -> &[CycleTimings] {
        &self.timings
    }

    pub fn bank(&self, bank: usize) -> &BankState {
        &self.banks[bank]
    }

    pub fn store(&self) -> &DataStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut DataStore {
        &mut self.store
    }

    /// Start recording every issued command.
    pub fn record_commands(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn take_log(&mut self) -> Vec<Command> {
        self.log.take().unwrap_or_default()
    }

    pub fn commands_logged(&self) -> usize {
        self.log.as_ref().map_or(0, Vec::len)
    }

    /// Earliest legal issue cycle, including the one-command-per-cycle bus rule.
    pub fn earliest_issue(&self, cmd: &Command, now: u64) -> Result<u64> {
        let bank = self
            .banks
            .get(cmd.bank)
            .ok_or_else(|| SimError::internal(format!("bank {} out of range", cmd.bank)))?;
        let t = bank.earliest_issue(cmd, &self.geometry, now)?;
        Ok(match self.last_issue {
            Some(last) if t <= last => last + 1,
            _ => t,
        })
    }

    pub fn issue(&mut self, cmd: Command, now: u64, write_data: Option<u64>) -> Result<Outcome> {
        if matches!(self.last_issue, Some(last) if now <= last) {
            return Err(SimError::internal(format!(
                "command bus already used at cycle {now}"
            )));
        }
        let bank = self
            .banks
            .get_mut(cmd.bank)
            .ok_or_else(|| SimError::internal(format!("bank {} out of range", cmd.bank)))?;
        let out = bank.apply(
            &mut self.store,
            &cmd,
            now,
            write_data,
            &self.geometry,
            &self.timings,
        )?;
        self.last_issue = Some(now);
        if let Some(log) = self.log.as_mut() {
            log.push(cmd.at(now));
        }
        Ok(out)
    }

    /// Commit copies whose MIG has completed by `now`.
    pub fn settle(&mut self, now: u64) {
        for (b, bank) in self.banks.iter_mut().enumerate() {
            bank.settle(&mut self.store, b, now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{tier_cycle_timings, CalibrationAnchors, DecompositionRatios};

    fn engine() -> TimingEngine {
        let g = DeviceGeometry::with_segments(&[32, 480]).unwrap();
        let t = tier_cycle_timings(
            &g,
            &CalibrationAnchors::default(),
            &DecompositionRatios::default(),
            1.25,
        )
        .unwrap();
        TimingEngine::new(g, t, 7).unwrap()
    }

    #[test]
    fn far_act_to_act_is_trc() {
        let mut e = engine();
        e.issue(Command::act(0, 0, 40), 0, None).unwrap();
        e.issue(Command::pre(0, 0, 40), 37, None).unwrap();
        assert_eq!(e.earliest_issue(&Command::act(0, 0, 41), 38).unwrap(), 53);
    }

    #[test]
    fn other_bank_is_free_next_cycle() {
        let mut e = engine();
        e.issue(Command::act(0, 0, 40), 0, None).unwrap();
        assert_eq!(e.earliest_issue(&Command::act(1, 0, 40), 0).unwrap(), 1);
    }

    #[test]
    fn illegal_phase_commands() {
        let e = engine();
        let err = e.earliest_issue(&Command::pre(0, 0, 3), 0).unwrap_err();
        assert!(matches!(err, SimError::Protocol { ref phase, .. } if phase == "PRECHARGED"));
        assert!(e.earliest_issue(&Command::rd(0, 0, 3, 0), 0).is_err());

        let mut e = engine();
        e.issue(Command::act(0, 0, 3), 0, None).unwrap();
        assert!(e.earliest_issue(&Command::act(0, 0, 4), 100).is_err());
        assert!(e.earliest_issue(&Command::rd(0, 0, 4, 0), 100).is_err());
        assert!(e.earliest_issue(&Command::mig(0, 0, 40, 2), 100).is_err());
    }

    #[test]
    fn mig_rows_must_span_tiers() {
        let e = engine();
        assert!(e.earliest_issue(&Command::mig(0, 0, 40, 41), 0).is_err());
        assert!(e.earliest_issue(&Command::mig(0, 0, 1, 2), 0).is_err());
        assert!(e.earliest_issue(&Command::mig(0, 0, 40, 2), 0).is_ok());
    }

    #[test]
    fn early_issue_is_rejected() {
        let mut e = engine();
        e.issue(Command::act(0, 0, 3), 0, None).unwrap();
        assert!(e.issue(Command::rd(0, 0, 3, 0), 2, None).is_err());
    }

    #[test]
    fn mig_occupies_bank_and_copies() {
        let mut e = engine();
        let before = e.store().row_image(RowKey::new(0, 0, 40));
        let out = e.issue(Command::mig(0, 0, 40, 2), 100, None).unwrap();
        assert_eq!(out.completion, 156);
        assert_eq!(e.bank(0).busy_until(), 156);
        assert_eq!(e.bank(0).phase(120), Phase::Migrating);
        assert_eq!(e.bank(0).phase(156), Phase::Precharged);
        assert_eq!(e.earliest_issue(&Command::act(0, 0, 2), 101).unwrap(), 156);

        e.issue(Command::act(0, 0, 2), 156, None).unwrap();
        let ready = 156 + e.timings()[0].trcd;
        let got: Vec<u64> = (0..4)
            .map(|c| {
                e.issue(Command::rd(0, 0, 2, c), ready + 4 * c as u64, None)
                    .unwrap()
                    .read
                    .unwrap()
            })
            .collect();
        assert_eq!(got, before[..4].to_vec());
    }

    #[test]
    fn read_your_write() {
        let mut e = engine();
        e.issue(Command::act(0, 1, 7), 0, None).unwrap();
        let t = e.bank(0).earliest(CommandKind::Wr);
        e.issue(Command::wr(0, 1, 7, 5), t, Some(0xfeed)).unwrap();
        let t = e.bank(0).earliest(CommandKind::Rd);
        let out = e.issue(Command::rd(0, 1, 7, 5), t, None).unwrap();
        assert_eq!(out.read, Some(0xfeed));
    }

    #[test]
    fn near_rd_follows_trcd() {
        let mut e = engine();
        e.issue(Command::act(2, 0, 5), 10, None).unwrap();
        assert_eq!(e.earliest_issue(&Command::rd(2, 0, 5, 0), 11).unwrap(), 16);
        assert_eq!(e.bank(2).phase(15), Phase::Activating);
        assert_eq!(e.bank(2).open_row(15), None);
        assert_eq!(e.bank(2).open_row(16), Some(5));
    }

    #[test]
    fn bus_allows_one_command_per_cycle() {
        let mut e = engine();
        e.issue(Command::act(0, 0, 1), 5, None).unwrap();
        assert!(e.issue(Command::act(1, 0, 1), 5, None).is_err());
        assert_eq!(e.earliest_issue(&Command::act(1, 0, 1), 5).unwrap(), 6);
    }

    #[test]
    fn near_sequence_beats_far() {
        fn run(row: usize) -> u64 {
            let mut e = engine();
            let mut now = 0;
            for cmd in [
                Command::act(0, 0, row),
                Command::rd(0, 0, row, 0),
                Command::pre(0, 0, row),
                Command::act(0, 0, row),
            ] {
                now = e.earliest_issue(&cmd, now).unwrap();
                e.issue(cmd, now, None).unwrap();
            }
            now
        }
        assert!(run(3) < run(300));
    }
}
