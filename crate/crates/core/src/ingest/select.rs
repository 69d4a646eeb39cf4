use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use super::SgoRecord;
use crate::error::{Error, Result};

pub const WAYMO_ENTITY: &str = "Waymo LLC";

/// Operator type recorded for rides with no human behind the wheel.
pub const RO_OPERATOR_TYPE: &str = "None";

/// Report IDs known to appear twice because an updated report was filed
/// under the same ID. Only the first row of each is kept.
pub const DEFAULT_DUPLICATE_REPORT_IDS: [&str; 11] = [
    "30270-2248",
    "30270-2198",
    "30270-2168",
    "30270-2160",
    "30270-1949",
    "30270-1815",
    "30270-1160",
    "30270-1613",
    "30270-1748",
    "30270-1778",
    "30270-1535",
];

/// Keeps rows with no driver or operator on board, from any entity.
pub fn filter_rider_only(records: Vec<SgoRecord>) -> Vec<SgoRecord> {
    records
        .into_iter()
        .filter(|r| r.operator_type.trim().eq_ignore_ascii_case(RO_OPERATOR_TYPE))
        .collect()
}

/// Keeps rider-only rows reported by Waymo.
pub fn filter_waymo_ro(records: Vec<SgoRecord>) -> Vec<SgoRecord> {
    filter_rider_only(records)
        .into_iter()
        .filter(|r| r.reporting_entity.trim().eq_ignore_ascii_case(WAYMO_ENTITY))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DedupOutcome {
    pub records: Vec<SgoRecord>,
    /// IDs of the dropped rows, in input order.
    pub removed: Vec<String>,
    /// Repeated IDs that are not on the list. Every copy is kept.
    pub unlisted_duplicates: Vec<String>,
}

/// Drops every row whose ID is on `listed`. Repeats of other IDs are
/// reported but left alone.
pub fn dedup_updated_reports<S: AsRef<str>>(records: Vec<SgoRecord>, listed: &[S]) -> DedupOutcome {
    let listed: HashSet<&str> = listed.iter().map(AsRef::as_ref).collect();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &records {
        *counts.entry(r.report_id.clone()).or_default() += 1;
    }
    let unlisted_duplicates = counts
        .iter()
        .filter(|(id, &n)| n > 1 && !listed.contains(id.as_str()))
        .map(|(id, _)| id.clone())
        .collect();

    let (removed, kept): (Vec<_>, Vec<_>) = records.into_iter().partition(|r| listed.contains(r.report_id.as_str()));
    let removed = removed.into_iter().map(|r| r.report_id).collect();
    DedupOutcome {
        records: kept,
        removed,
        unlisted_duplicates,
    }
}

/// Appends supplemental records. Their IDs must not collide with any in
/// `records` or with each other.
pub fn merge_pre_sgo(mut records: Vec<SgoRecord>, supplement: Vec<SgoRecord>) -> Result<Vec<SgoRecord>> {
    let mut ids: BTreeSet<String> = records.iter().map(|r| r.report_id.clone()).collect();
    for r in &supplement {
        if !ids.insert(r.report_id.clone()) {
            return Err(Error::DuplicateId(r.report_id.clone()));
        }
    }
    records.extend(supplement);
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{InjurySeverity, LawEnforcement, Location, RecordOrigin};

    fn rec(id: &str, entity: &str, operator: &str) -> SgoRecord {
        SgoRecord {
            report_id: id.into(),
            reporting_entity: entity.into(),
            operator_type: operator.into(),
            location: Some(Location::Phoenix),
            law_enforcement_investigating: LawEnforcement::No,
            highest_injury_severity: InjurySeverity::None,
            gear_state: None,
            narrative: String::new(),
            ads_vehicle_impacted: None,
            extra: Default::default(),
            origin: RecordOrigin::SgoExport,
        }
    }

    #[test]
    fn waymo_rider_only_filter() {
        let recs = vec![
            rec("1", "Waymo LLC", "None"),
            rec("2", "waymo llc", " none "),
            rec("3", "Waymo LLC", "In-Vehicle (Commercial / Test)"),
            rec("4", "Other AV Operator Inc.", "None"),
        ];
        let ids: Vec<_> = filter_waymo_ro(recs.clone()).into_iter().map(|r| r.report_id).collect();
        assert_eq!(ids, ["1", "2"]);
        assert_eq!(filter_rider_only(recs).len(), 3);
    }

    #[test]
    fn dedup_drops_listed_ids() {
        let recs = vec![
            rec("30270-2248", "Waymo LLC", "None"),
            rec("x", "Waymo LLC", "None"),
            rec("30270-1535", "Waymo LLC", "None"),
            rec("dup", "W", "None"),
            rec("dup", "W", "None"),
        ];
        let out = dedup_updated_reports(recs, &DEFAULT_DUPLICATE_REPORT_IDS);
        let ids: Vec<_> = out.records.iter().map(|r| r.report_id.as_str()).collect();
        assert_eq!(ids, ["x", "dup", "dup"]);
        assert_eq!(out.removed, ["30270-2248", "30270-1535"]);
        assert_eq!(out.unlisted_duplicates, ["dup"]);
    }

    #[test]
    fn dedup_without_listed_ids_is_identity() {
        let recs = vec![rec("a", "W", "None"), rec("b", "W", "None")];
        let out = dedup_updated_reports(recs.clone(), &DEFAULT_DUPLICATE_REPORT_IDS);
        assert_eq!(out.records, recs);
        assert!(out.removed.is_empty());
    }

    #[test]
    fn merge_rejects_collisions() {
        let base = vec![rec("a", "W", "None")];
        let merged = merge_pre_sgo(base.clone(), vec![rec("b", "W", "None")]).unwrap();
        assert_eq!(merged.len(), 2);
        assert!(matches!(
            merge_pre_sgo(base, vec![rec("a", "W", "None")]),
            Err(Error::DuplicateId(id)) if id == "a"
        ));
    }
}
