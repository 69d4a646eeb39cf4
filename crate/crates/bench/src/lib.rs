//! Inputs shared by the criterion benchmarks.

use std::collections::BTreeMap;

use ratebench_core::ingest::{FlagOverrides, Roster};
use ratebench_core::SgoRecord;

/// Records for every roster event, rebuilt from the flags, with the roster's
/// flags as overrides.
pub fn roster_fixture() -> (Vec<SgoRecord>, BTreeMap<String, FlagOverrides>) {
    let roster = Roster::embedded();
    (roster.synthetic_records(), roster.overrides())
}

/// `copies` renamed copies of `records`, for scaling runs.
pub fn replicate(records: &[SgoRecord], copies: usize) -> Vec<SgoRecord> {
    (0..copies)
        .flat_map(|i| {
            records.iter().map(move |r| {
                let mut r = r.clone();
                r.report_id = format!("{}#{i}", r.report_id);
                r
            })
        })
        .collect()
}
