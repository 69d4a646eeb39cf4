use std::collections::BTreeMap;
use std::path::PathBuf;

use ratebench_core::analysis::{
    rate_table_markdown, render_report, CompareOptions, ReportFormat, Study, DEFAULT_RATE_ALPHA,
};
use ratebench_core::ingest::{
    classify, dedup_updated_reports, events_from_roster, filter_waymo_ro, merge_pre_sgo, parse_sgo_csv,
    read_classified_csv, write_classified_csv, ClassificationRules, ColumnMap, Roster, DEFAULT_DUPLICATE_REPORT_IDS,
};
use ratebench_core::{Category, ClassifiedEvent, ExposureLedger, Location, Probability};

fn sample_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/sgo_sample.csv")
}

fn pipeline(use_overrides: bool) -> Vec<ClassifiedEvent> {
    let roster = Roster::embedded();
    let records = parse_sgo_csv(&sample_path(), &ColumnMap::default()).unwrap();
    let records = filter_waymo_ro(records);
    let dedup = dedup_updated_reports(records, &DEFAULT_DUPLICATE_REPORT_IDS);
    let records = merge_pre_sgo(dedup.records, roster.supplemental()).unwrap();
    let overrides = if use_overrides {
        roster.overrides()
    } else {
        BTreeMap::new()
    };
    classify(&records, &ClassificationRules::default(), &overrides)
        .unwrap()
        .events
}

fn flags(events: &[ClassifiedEvent]) -> Vec<(String, Location, [bool; 5])> {
    let mut out: Vec<_> = events
        .iter()
        .map(|e| {
            (
                e.report_id().to_string(),
                e.location,
                Category::ALL.map(|c| e.is_member(c)),
            )
        })
        .collect();
    out.sort();
    out
}

fn counts(events: &[ClassifiedEvent], location: Location) -> [usize; 5] {
    Category::ALL.map(|c| {
        events
            .iter()
            .filter(|e| e.location == location && e.is_member(c))
            .count()
    })
}

#[test]
fn sample_reproduces_roster_from_raw_fields() {
    let derived = pipeline(false);
    let roster = events_from_roster(&Roster::embedded()).unwrap();
    assert_eq!(derived.len(), 73);
    assert_eq!(flags(&derived), flags(&roster));
}

#[test]
fn sample_reproduces_roster_with_overrides() {
    let events = pipeline(true);
    assert_eq!(events.len(), 73);
    assert_eq!(counts(&events, Location::Phoenix), [38, 33, 17, 12, 3]);
    assert_eq!(counts(&events, Location::SanFrancisco), [34, 29, 14, 3, 1]);
    assert_eq!(counts(&events, Location::LosAngeles), [1, 1, 1, 0, 0]);
}

#[test]
fn dedup_drops_listed_updates() {
    let records = filter_waymo_ro(parse_sgo_csv(&sample_path(), &ColumnMap::default()).unwrap());
    let before = records.len();
    let dedup = dedup_updated_reports(records, &DEFAULT_DUPLICATE_REPORT_IDS);
    assert_eq!(before - dedup.records.len(), dedup.removed.len());
    assert!(dedup.unlisted_duplicates.is_empty());
}

#[test]
fn classified_csv_round_trip_on_sample() {
    let events = pipeline(true);
    let mut buf = Vec::new();
    write_classified_csv(&events, &mut buf).unwrap();
    let back = read_classified_csv(buf.as_slice()).unwrap();
    assert_eq!(flags(&back), flags(&events));
}

#[test]
fn rate_table_markdown_matches_golden() {
    let study = Study::published().unwrap();
    let table = study.rate_table(Probability::new(DEFAULT_RATE_ALPHA).unwrap()).unwrap();
    assert_eq!(rate_table_markdown(&table), include_str!("golden/rate_table.md"));
}

#[test]
fn json_report_round_trips() {
    let study = Study::published().unwrap();
    let report = study
        .report(
            Probability::new(DEFAULT_RATE_ALPHA).unwrap(),
            &CompareOptions::default(),
        )
        .unwrap();
    let files = render_report(&report, ReportFormat::Json).unwrap();
    let back: ratebench_core::analysis::Report = serde_json::from_str(&files[0].contents).unwrap();
    assert_eq!(back, report);
}

#[test]
fn ledger_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.toml");
    let ledger = ExposureLedger::embedded();
    std::fs::write(&path, ledger.to_toml_string()).unwrap();
    assert_eq!(ExposureLedger::load(&path).unwrap(), ledger);
}

#[test]
fn missing_file_is_io_error() {
    let err = parse_sgo_csv(std::path::Path::new("/nonexistent/x.csv"), &ColumnMap::default()).unwrap_err();
    assert!(matches!(err, ratebench_core::Error::Io { .. }), "{err:?}");
}
