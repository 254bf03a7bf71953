#![allow(dead_code)]

use std::collections::HashMap;

use tldram::config::{streams, RunConfig};
use tldram::controller::ServiceRecord;
use tldram::engine::{initial_token, RowKey};
use tldram::sim::{build_address_map, build_geometry};

/// Result line printed by every acceptance check.
pub fn verdict(id: u32, ok: bool, detail: &str) {
    println!(
        "criterion {id}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
}

/// Replay a service log against a flat memory image. Returns
/// `(reads checked, mismatches)`.
pub fn check_against_flat_memory(cfg: &RunConfig, log: &[ServiceRecord]) -> (u64, u64) {
    let geometry = build_geometry(cfg).unwrap();
    let map = build_address_map(cfg, &geometry).unwrap();
    let seed = cfg.stream_seed(streams::DATA);
    let block = cfg.column_bytes as u64;
    let mut memory: HashMap<u64, u64> = HashMap::new();
    let (mut reads, mut bad) = (0, 0);
    for r in log {
        let word = r.address / block;
        if r.is_write {
            memory.insert(word, r.value);
            continue;
        }
        reads += 1;
        let expected = *memory.entry(word).or_insert_with(|| {
            let loc = map.decode(r.address).unwrap();
            let home = RowKey::new(loc.bank, loc.subarray, loc.row + cfg.near_slots);
            initial_token(seed, home, loc.column)
        });
        if expected != r.value {
            bad += 1;
        }
    }
    (reads, bad)
}
