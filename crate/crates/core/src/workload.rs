//! Memory traces and the in-order core front end.
//!
//! A trace is a list of last-level-cache misses, each preceded by a number
//! of non-memory instructions ("bubbles"). Text traces hold one record per
//! line, `bubble R|W hex_address`; a line holding only a bubble count
//! describes trailing compute with no memory access.

use std::io::BufRead;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Zipf};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Access {
    pub is_write: bool,
    pub address: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceRecord {
    pub bubble: u64,
    pub access: Option<Access>,
    /// 1-based source line, for error reporting.
    pub line: usize,
}

impl TraceRecord {
    pub fn read(bubble: u64, address: u64) -> Self {
        Self::mem(bubble, false, address)
    }

    pub fn write(bubble: u64, address: u64) -> Self {
        Self::mem(bubble, true, address)
    }

    fn mem(bubble: u64, is_write: bool, address: u64) -> Self {
        Self {
            bubble,
            access: Some(Access { is_write, address }),
            line: 0,
        }
    }

    pub fn compute(bubble: u64) -> Self {
        Self {
            bubble,
            access: None,
            line: 0,
        }
    }
}

/// Parse a text trace. Blank lines and `#` comments are skipped.
pub fn parse_trace<R: BufRead>(input: R) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        let bubble = fields[0].parse::<u64>().map_err(|_| {
            SimError::workload(line_no, format!("bad bubble count {:?}", fields[0]))
        })?;
        let access = match fields.as_slice() {
            [_] => None,
            [_, kind, addr] => {
                let is_write = match *kind {
                    "R" | "r" => false,
                    "W" | "w" => true,
                    other => {
                        return Err(SimError::workload(
                            line_no,
                            format!("bad access kind {other:?}"),
                        ))
                    }
                };
                let hex = addr
                    .strip_prefix("0x")
                    .or_else(|| addr.strip_prefix("0X"))
                    .unwrap_or(addr);
                let address = u64::from_str_radix(hex, 16).map_err(|e| {
                    SimError::workload(line_no, format!("bad address {addr:?}: {e}"))
                })?;
                Some(Access { is_write, address })
            }
            _ => {
                return Err(SimError::workload(
                    line_no,
                    format!("malformed record {body:?}"),
                ))
            }
        };
        out.push(TraceRecord {
            bubble,
            access,
            line: line_no,
        });
    }
    Ok(out)
}

/// Shape of the address range a generator draws from: `rows` blocks of
/// `columns * column_bytes` bytes each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowSpace {
    pub rows: u64,
    pub columns: u64,
    pub column_bytes: u64,
}

impl RowSpace {
    fn address(&self, row: u64, column: u64) -> u64 {
        (row * self.columns + column) * self.column_bytes
    }

    pub fn row_of(&self, address: u64) -> u64 {
        address / (self.columns * self.column_bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    pub seed: u64,
    pub requests: usize,
    pub write_fraction: f64,
    pub bubble_mean: f64,
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(SimError::config(format!(
            "{name} must lie in [0, 1], got {v}"
        )));
    }
    Ok(())
}

struct Emitter {
    rng: ChaCha8Rng,
    bubbles: Option<Geometric>,
    write_fraction: f64,
    space: RowSpace,
}

impl Emitter {
    fn new(p: &GenParams, space: RowSpace) -> Result<Self> {
        check_fraction("write fraction", p.write_fraction)?;
        if !(p.bubble_mean.is_finite() && p.bubble_mean >= 0.0) {
            return Err(SimError::config("bubble mean must be non-negative"));
        }
        if space.rows == 0 || space.columns == 0 || space.column_bytes == 0 {
            return Err(SimError::config("generator row space is empty"));
        }
        // Failures before the first success: mean (1 - p) / p.
        let bubbles = (p.bubble_mean > 0.0)
            .then(|| Geometric::new(1.0 / (p.bubble_mean + 1.0)))
            .transpose()
            .map_err(|e| SimError::config(format!("bubble distribution: {e}")))?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(p.seed),
            bubbles,
            write_fraction: p.write_fraction,
            space,
        })
    }

    fn record(&mut self, row: u64, line: usize) -> TraceRecord {
        let bubble = self.bubbles.map_or(0, |g| g.sample(&mut self.rng));
        let is_write = self.rng.random::<f64>() < self.write_fraction;
        let column = self.rng.random_range(0..self.space.columns);
        TraceRecord {
            bubble,
            access: Some(Access {
                is_write,
                address: self.space.address(row, column),
            }),
            line,
        }
    }
}

/// Hot/cold trace: rows `0..hot_rows` form the hot set and receive
/// `hot_fraction` of the accesses; the remaining rows share the rest.
pub fn gen_hotcold(
    params: &GenParams,
    hot_rows: u64,
    hot_fraction: f64,
    space: RowSpace,
) -> Result<Vec<TraceRecord>> {
    check_fraction("hot fraction", hot_fraction)?;
    if hot_rows == 0 || hot_rows > space.rows {
        return Err(SimError::config(format!(
            "hot set of {hot_rows} rows does not fit {} addressable rows",
            space.rows
        )));
    }
    let cold_rows = space.rows - hot_rows;
    let mut e = Emitter::new(params, space)?;
    Ok((0..params.requests)
        .map(|i| {
            let hot = cold_rows == 0 || e.rng.random::<f64>() < hot_fraction;
            let row = if hot {
                e.rng.random_range(0..hot_rows)
            } else {
                hot_rows + e.rng.random_range(0..cold_rows)
            };
            e.record(row, i + 1)
        })
        .collect())
}

/// Zipf trace over rows `0..row_count`: row `r` has popularity `(r + 1)^-exponent`.
pub fn gen_zipf(
    params: &GenParams,
    exponent: f64,
    row_count: u64,
    space: RowSpace,
) -> Result<Vec<TraceRecord>> {
    if !(exponent.is_finite() && exponent >= 0.0) {
        return Err(SimError::config("zipf exponent must be non-negative"));
    }
    if row_count == 0 || row_count > space.rows {
        return Err(SimError::config(format!(
            "zipf over {row_count} rows does not fit {} addressable rows",
            space.rows
        )));
    }
    let zipf = Zipf::new(row_count as f64, exponent)
        .map_err(|e| SimError::config(format!("zipf distribution: {e}")))?;
    let mut e = Emitter::new(params, space)?;
    Ok((0..params.requests)
        .map(|i| {
            let rank: f64 = zipf.sample(&mut e.rng);
            let row = (rank as u64).clamp(1, row_count) - 1;
            e.record(row, i + 1)
        })
        .collect())
}

/// Where a core's request went; returned by the controller on enqueue.
pub trait RequestSink {
    /// Try to enqueue an access. `Ok(false)` means the queue is full.
    fn try_enqueue(&mut self, core: usize, access: Access, now: u64, line: usize) -> Result<bool>;
}

/// In-order core retiring one non-memory instruction per cycle.
#[derive(Debug, Clone)]
pub struct CoreModel {
    pub id: usize,
    trace: Arc<[TraceRecord]>,
    cursor: usize,
    retired: u64,
    /// Cycle at which the current record's bubbles are exhausted.
    ready_at: u64,
    /// Current record cannot start until an outstanding request completes.
    waiting_for_slot: bool,
    outstanding: usize,
    max_outstanding: usize,
    finished_at: u64,
}

impl CoreModel {
    pub fn new(id: usize, trace: Arc<[TraceRecord]>, max_outstanding: usize) -> Self {
        let mut core = Self {
            id,
            trace,
            cursor: 0,
            retired: 0,
            ready_at: 0,
            waiting_for_slot: false,
            outstanding: 0,
            max_outstanding: max_outstanding.max(1),
            finished_at: 0,
        };
        core.start_record(0);
        core
    }

    fn start_record(&mut self, now: u64) {
        if let Some(r) = self.trace.get(self.cursor) {
            self.ready_at = now + r.bubble;
            self.retired += r.bubble;
        }
        self.finished_at = self.finished_at.max(now);
    }

    pub fn retired_instructions(&self) -> u64 {
        self.retired
    }

    pub fn outstanding(&self) -> usize {
        self.outstanding
    }

    pub fn is_done(&self) -> bool {
        self.cursor >= self.trace.len() && self.outstanding == 0
    }

    /// Cycle at which this core last made progress; its elapsed time once done.
    pub fn finished_at(&self) -> u64 {
        self.finished_at
    }

    pub fn ipc(&self) -> f64 {
        if self.finished_at == 0 {
            0.0
        } else {
            self.retired as f64 / self.finished_at as f64
        }
    }

    /// Next cycle at which [`tick`](Self::tick) can do something, if any.
    pub fn next_event(&self) -> Option<u64> {
        (self.cursor < self.trace.len() && !self.waiting_for_slot).then_some(self.ready_at)
    }

    /// Retire bubbles and issue ready accesses at `now`. Returns the number of
    /// requests issued.
    pub fn tick<S: RequestSink>(&mut self, now: u64, sink: &mut S) -> Result<usize> {
        let mut issued = 0;
        while !self.waiting_for_slot && now >= self.ready_at {
            let Some(record) = self.trace.get(self.cursor).copied() else {
                break;
            };
            match record.access {
                None => {
                    self.cursor += 1;
                    let t = self.ready_at;
                    self.start_record(t);
                }
                Some(access) => {
                    if issued > 0 || !sink.try_enqueue(self.id, access, now, record.line)? {
                        // One issue per cycle; a full queue retries later.
                        break;
                    }
                    issued += 1;
                    self.outstanding += 1;
                    self.cursor += 1;
                    if self.outstanding < self.max_outstanding {
                        self.start_record(now + 1);
                    } else {
                        self.waiting_for_slot = true;
                    }
                }
            }
        }
        Ok(issued)
    }

    /// A request issued by this core completed at `now`.
    pub fn complete(&mut self, now: u64) -> Result<()> {
        if self.outstanding == 0 {
            return Err(SimError::internal(format!(
                "core {} completed a request it never issued",
                self.id
            )));
        }
        self.outstanding -= 1;
        self.retired += 1;
        self.finished_at = self.finished_at.max(now);
        if self.waiting_for_slot {
            self.waiting_for_slot = false;
            self.start_record(now);
        }
        Ok(())
    }
}
