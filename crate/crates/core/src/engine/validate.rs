//! Stateless re-check of a command trace.
//!
//! Every pair of commands on the same bank is checked directly against the
//! constraint that relates their kinds; no bank state is reconstructed.
//! Pairs further apart than the longest constraint cannot violate anything,
//! so the scan for each command stops once it passes that horizon.

use std::io::{BufRead, Write};

use super::{mig_duration, Command, CommandKind};
use crate::error::{Result, SimError};
use crate::geometry::{CycleTimings, DeviceGeometry};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub first: Command,
    pub second: Command,
    pub constraint: &'static str,
    pub required: u64,
    pub actual: u64,
}

fn required_gap(
    first: &Command,
    second: &Command,
    geometry: &DeviceGeometry,
    timings: &[CycleTimings],
) -> Option<(&'static str, u64)> {
    use CommandKind::*;
    let t = &timings[geometry.tier_of_row(first.row)];
    match (first.kind, second.kind) {
        (Mig, _) => Some(("tMIG", mig_duration(first, geometry, timings))),
        (Act, Act) | (Act, Mig) => Some(("tRC", t.trc)),
        (Act, Rd) | (Act, Wr) => Some(("tRCD", t.trcd)),
        (Act, Pre) => Some(("tRAS", t.tras)),
        (Pre, Act) | (Pre, Mig) => Some(("tRP", t.trp)),
        (Wr, Pre) => Some(("tCL+tWR", t.tcl + t.twr)),
        (Rd, Rd) | (Rd, Wr) | (Wr, Rd) | (Wr, Wr) => Some(("tCCD", t.tccd)),
        _ => None,
    }
}

/// Returns every timing violation in `trace`; empty iff the trace is legal.
pub fn validate_command_trace(
    trace: &[Command],
    geometry: &DeviceGeometry,
    timings: &[CycleTimings],
) -> Vec<Violation> {
    let mut sorted = trace.to_vec();
    sorted.sort_by_key(|c| c.issue_cycle);

    let mut violations = Vec::new();
    for w in sorted.windows(2) {
        if w[0].issue_cycle == w[1].issue_cycle {
            violations.push(Violation {
                first: w[0],
                second: w[1],
                constraint: "bus",
                required: 1,
                actual: 0,
            });
        }
    }

    let horizon = timings
        .iter()
        .map(CycleTimings::max_span)
        .max()
        .unwrap_or(0)
        + 1;
    let mut per_bank: Vec<Vec<Command>> = vec![Vec::new(); geometry.banks];
    for c in &sorted {
        if let Some(list) = per_bank.get_mut(c.bank) {
            list.push(*c);
        }
    }

    for cmds in &per_bank {
        for (j, second) in cmds.iter().enumerate() {
            for first in cmds[..j].iter().rev() {
                let gap = second.issue_cycle - first.issue_cycle;
                if gap >= horizon {
                    break;
                }
                if let Some((name, need)) = required_gap(first, second, geometry, timings) {
                    if gap < need {
                        violations.push(Violation {
                            first: *first,
                            second: *second,
                            constraint: name,
                            required: need,
                            actual: gap,
                        });
                    }
                }
            }
        }
    }
    violations
}

/// One line per command: `cycle kind bank subarray row [row2|col]`.
pub fn write_command_trace<W: Write>(mut out: W, trace: &[Command]) -> Result<()> {
    for c in trace {
        writeln!(out, "{c}")?;
    }
    Ok(())
}

pub fn parse_command_trace<R: BufRead>(input: R) -> Result<Vec<Command>> {
    let mut trace = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let bad = |msg: &str| SimError::workload(line_no, format!("{msg}: {line:?}"));
        let kind = fields
            .get(1)
            .and_then(|k| CommandKind::from_mnemonic(k))
            .ok_or_else(|| bad("unknown command kind"))?;
        let want = match kind {
            CommandKind::Act | CommandKind::Pre => 5,
            _ => 6,
        };
        if fields.len() != want {
            return Err(bad("wrong field count"));
        }
        let num = |idx: usize| -> Result<u64> {
            fields[idx].parse::<u64>().map_err(|_| bad("bad number"))
        };
        trace.push(Command {
            kind,
            issue_cycle: num(0)?,
            bank: num(2)? as usize,
            subarray: num(3)? as usize,
            row: num(4)? as usize,
            arg: if want == 6 { num(5)? as usize } else { 0 },
        });
    }
    Ok(trace)
}
