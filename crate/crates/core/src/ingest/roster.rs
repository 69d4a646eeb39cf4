use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Category, ClassifiedEvent, GearState, InjurySeverity, LawEnforcement, Location, Provenance, RecordOrigin, SgoRecord,
};
use crate::error::{Error, Result};

const EMBEDDED_ROSTER: &str = include_str!("../../data/roster.csv");

const FLAG_COLUMNS: [&str; 5] = [
    "sgo_reported",
    "in_transport",
    "exclude_low_dv_member",
    "police_reported",
    "any_injury",
];

/// Prefix for IDs given to pre-reporting-period events, which carry no
/// report ID of their own.
pub const PRE_SGO_PREFIX: &str = "PRE-SGO-";

/// Per-category flags. `None` means the value is not fixed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagOverrides {
    pub sgo_reported: Option<bool>,
    pub in_transport: Option<bool>,
    pub exclude_low_dv_member: Option<bool>,
    pub police_reported: Option<bool>,
    pub any_injury: Option<bool>,
}

impl FlagOverrides {
    pub fn get(&self, category: Category) -> Option<bool> {
        match category {
            Category::SgoReported => self.sgo_reported,
            Category::InTransport => self.in_transport,
            Category::ExcludeLowDeltaV => self.exclude_low_dv_member,
            Category::PoliceReported => self.police_reported,
            Category::AnyInjury => self.any_injury,
        }
    }

    fn slot(&mut self, category: Category) -> &mut Option<bool> {
        match category {
            Category::SgoReported => &mut self.sgo_reported,
            Category::InTransport => &mut self.in_transport,
            Category::ExcludeLowDeltaV => &mut self.exclude_low_dv_member,
            Category::PoliceReported => &mut self.police_reported,
            Category::AnyInjury => &mut self.any_injury,
        }
    }

    pub fn is_complete(&self) -> bool {
        Category::ALL.iter().all(|&c| self.get(c).is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub report_id: String,
    /// Sequence number of events before the reporting period.
    pub ro_event: Option<u32>,
    pub location: Location,
    pub flags: FlagOverrides,
}

impl RosterEntry {
    pub fn is_pre_sgo(&self) -> bool {
        self.report_id.starts_with(PRE_SGO_PREFIX)
    }

    /// A record whose fields reproduce the entry's flags under the default
    /// classification rules.
    fn synthetic_record(&self, origin: RecordOrigin) -> SgoRecord {
        let flag = |c| self.flags.get(c).unwrap_or(false);
        let mut extra = BTreeMap::new();
        if let Some(n) = self.ro_event {
            extra.insert("ro_event".to_string(), n.to_string());
        }
        if !flag(Category::ExcludeLowDeltaV) {
            extra.insert("ADS Delta-V (mph)".to_string(), "0.5".to_string());
            extra.insert("Partner Delta-V (mph)".to_string(), "0.5".to_string());
        }
        SgoRecord {
            report_id: self.report_id.clone(),
            reporting_entity: super::WAYMO_ENTITY.to_string(),
            operator_type: super::RO_OPERATOR_TYPE.to_string(),
            location: Some(self.location),
            law_enforcement_investigating: if flag(Category::PoliceReported) {
                LawEnforcement::Yes
            } else {
                LawEnforcement::No
            },
            highest_injury_severity: if flag(Category::AnyInjury) {
                InjurySeverity::Minor
            } else {
                InjurySeverity::None
            },
            gear_state: Some(GearState::NotPark),
            narrative: String::new(),
            ads_vehicle_impacted: Some(flag(Category::InTransport)),
            extra,
            origin,
        }
    }
}

/// Event list with per-category flags, keyed by report ID.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Roster {
    entries: Vec<RosterEntry>,
}

fn parse_flag(value: &str) -> Option<Option<bool>> {
    match value.trim().to_ascii_lowercase().as_str() {
        "" => Some(None),
        "true" | "yes" | "1" => Some(Some(true)),
        "false" | "no" | "0" => Some(Some(false)),
        _ => None,
    }
}

impl Roster {
    /// The event list shipped with the crate.
    pub fn embedded() -> Self {
        Self::from_reader(EMBEDDED_ROSTER.as_bytes()).expect("embedded roster is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    /// Reads a roster CSV. Empty flag cells mean "no override"; an ID of `NA`
    /// becomes `PRE-SGO-<ro_event>`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn {
                    column: name.to_string(),
                })
        };
        let id_i = col("report_id")?;
        let loc_i = col("location")?;
        let ro_i = headers.iter().position(|h| h == "ro_event");
        let flag_i: Vec<Option<usize>> = FLAG_COLUMNS
            .iter()
            .map(|c| headers.iter().position(|h| h == *c))
            .collect();

        let mut entries = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let bad = |message: String| Error::MalformedRow { row: line, message };
            let get = |i: usize| row.get(i).unwrap_or("");

            let ro_event = match ro_i.map(get).filter(|v| !v.is_empty()) {
                Some(v) => Some(v.parse::<u32>().map_err(|_| bad(format!("bad ro_event \"{v}\"")))?),
                None => None,
            };
            let raw_id = get(id_i);
            let report_id = if raw_id.eq_ignore_ascii_case("NA") || raw_id.is_empty() {
                let n = ro_event.ok_or_else(|| bad("missing report id without ro_event".into()))?;
                format!("{PRE_SGO_PREFIX}{n}")
            } else {
                raw_id.to_string()
            };
            let location: Location = get(loc_i).parse().map_err(|e: Error| bad(e.to_string()))?;
            let mut flags = FlagOverrides::default();
            for (&c, i) in Category::ALL.iter().zip(&flag_i) {
                if let Some(i) = *i {
                    *flags.slot(c) = parse_flag(get(i)).ok_or_else(|| bad(format!("bad flag \"{}\"", get(i))))?;
                }
            }
            if !seen.insert(report_id.clone()) {
                return Err(Error::DuplicateId(report_id));
            }
            entries.push(RosterEntry {
                report_id,
                ro_event,
                location,
                flags,
            });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[RosterEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, report_id: &str) -> Option<&RosterEntry> {
        self.entries.iter().find(|e| e.report_id == report_id)
    }

    /// Flags keyed by report ID.
    pub fn overrides(&self) -> BTreeMap<String, FlagOverrides> {
        self.entries.iter().map(|e| (e.report_id.clone(), e.flags)).collect()
    }

    /// One record per entry whose fields reproduce its flags under the
    /// default rules.
    pub fn synthetic_records(&self) -> Vec<SgoRecord> {
        self.entries
            .iter()
            .map(|e| {
                let origin = if e.is_pre_sgo() {
                    RecordOrigin::Supplemental
                } else {
                    RecordOrigin::SgoExport
                };
                e.synthetic_record(origin)
            })
            .collect()
    }

    /// Records for the pre-reporting-period entries, to merge with an export.
    pub fn supplemental(&self) -> Vec<SgoRecord> {
        self.entries
            .iter()
            .filter(|e| e.is_pre_sgo())
            .map(|e| e.synthetic_record(RecordOrigin::Supplemental))
            .collect()
    }
}

/// Classified events taken directly from a roster whose flags are all set.
pub fn events_from_roster(roster: &Roster) -> Result<Vec<ClassifiedEvent>> {
    let mut events: Vec<ClassifiedEvent> = roster
        .entries()
        .iter()
        .map(|e| {
            if !e.flags.is_complete() {
                return Err(Error::Classification {
                    report_id: e.report_id.clone(),
                    message: "roster entry has unset flags".into(),
                });
            }
            let origin = if e.is_pre_sgo() {
                RecordOrigin::Supplemental
            } else {
                RecordOrigin::SgoExport
            };
            let f = e.flags;
            let event = ClassifiedEvent {
                record: e.synthetic_record(origin),
                location: e.location,
                sgo_reported: f.sgo_reported.unwrap_or(false),
                in_transport: f.in_transport.unwrap_or(false),
                exclude_low_dv_member: f.exclude_low_dv_member.unwrap_or(false),
                police_reported: f.police_reported.unwrap_or(false),
                any_injury: f.any_injury.unwrap_or(false),
                provenance: Provenance::RosterOverride,
            };
            event.check_nesting()?;
            Ok(event)
        })
        .collect::<Result<_>>()?;
    events.sort_by(|a, b| a.report_id().cmp(b.report_id()));
    Ok(events)
}

fn provenance_key(p: Provenance) -> &'static str {
    match p {
        Provenance::CsvDerived => "csv-derived",
        Provenance::RosterOverride => "roster-override",
    }
}

/// Writes events in roster layout plus a `provenance` column.
pub fn write_classified_csv<W: Write>(events: &[ClassifiedEvent], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["report_id", "ro_event", "location"];
    header.extend(FLAG_COLUMNS);
    header.push("provenance");
    wtr.write_record(&header)?;
    for e in events {
        let ro_event = e.record.extra.get("ro_event").cloned().unwrap_or_default();
        let mut row = vec![e.report_id().to_string(), ro_event, e.location.code().to_string()];
        row.extend(Category::ALL.iter().map(|&c| e.is_member(c).to_string()));
        row.push(provenance_key(e.provenance).to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io(Path::new("<output>"), e))?;
    Ok(())
}

/// Reads the output of [`write_classified_csv`] back into events.
pub fn read_classified_csv<R: Read>(reader: R) -> Result<Vec<ClassifiedEvent>> {
    let mut text = String::new();
    let mut reader = reader;
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::io(Path::new("<input>"), e))?;
    let roster = Roster::from_reader(text.as_bytes())?;

    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let prov_i = rdr.headers()?.iter().position(|h| h == "provenance");
    let mut provenance = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let p = match prov_i.and_then(|i| row.get(i)) {
            Some("csv-derived") => Provenance::CsvDerived,
            _ => Provenance::RosterOverride,
        };
        provenance.push(p);
    }

    let mut by_id: BTreeMap<String, Provenance> = BTreeMap::new();
    for (entry, p) in roster.entries().iter().zip(provenance) {
        by_id.insert(entry.report_id.clone(), p);
    }
    let mut events = events_from_roster(&roster)?;
    for e in &mut events {
        e.provenance = by_id[e.report_id()];
    }
    Ok(events)
}
