use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GearState, InjurySeverity, LawEnforcement, Location, RecordOrigin, SgoRecord};
use crate::error::{Error, Result};

/// Header names for each field. Defaults follow the public export; override
/// them with a TOML file when a release renames columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub report_id: String,
    pub reporting_entity: String,
    pub operator_type: String,
    pub city: String,
    pub state: String,
    pub law_enforcement: String,
    pub injury_severity: String,
    pub narrative: String,
    /// Optional: pre-crash movement, read as gear state.
    pub gear: String,
    /// Optional: whether the ADS vehicle itself was contacted.
    pub ads_vehicle_impacted: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            report_id: "Report ID".into(),
            reporting_entity: "Reporting Entity".into(),
            operator_type: "Driver / Operator Type".into(),
            city: "City".into(),
            state: "State".into(),
            law_enforcement: "Law Enforcement Investigating?".into(),
            injury_severity: "Highest Injury Severity Alleged".into(),
            narrative: "Narrative".into(),
            gear: "SV Pre-Crash Movement".into(),
            ads_vehicle_impacted: "ADS Vehicle Impacted".into(),
        }
    }
}

impl ColumnMap {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("column map: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    fn required(&self) -> [&str; 8] {
        [
            &self.report_id,
            &self.reporting_entity,
            &self.operator_type,
            &self.city,
            &self.state,
            &self.law_enforcement,
            &self.injury_severity,
            &self.narrative,
        ]
    }
}

fn parse_law_enforcement(v: &str) -> Option<LawEnforcement> {
    match v.to_ascii_lowercase().as_str() {
        "yes" => Some(LawEnforcement::Yes),
        "no" => Some(LawEnforcement::No),
        "" | "unknown" => Some(LawEnforcement::Unknown),
        _ => None,
    }
}

fn parse_severity(v: &str) -> Option<InjurySeverity> {
    let v = v.to_ascii_lowercase();
    let sev = if v.is_empty() || v.starts_with("unknown") {
        InjurySeverity::Unknown
    } else if v == "none" || v.starts_with("no injur") {
        InjurySeverity::None
    } else if v.starts_with("minor") {
        InjurySeverity::Minor
    } else if v.starts_with("moderate") {
        InjurySeverity::Moderate
    } else if v.starts_with("serious") {
        InjurySeverity::Serious
    } else if v.starts_with("fatal") {
        InjurySeverity::Fatality
    } else {
        return None;
    };
    Some(sev)
}

fn parse_gear(v: &str) -> GearState {
    let v = v.to_ascii_lowercase();
    if v.is_empty() || v == "unknown" {
        GearState::Unknown
    } else if v.starts_with("park") {
        GearState::Park
    } else {
        GearState::NotPark
    }
}

fn parse_yes_no(v: &str) -> Option<Option<bool>> {
    match v.to_ascii_lowercase().as_str() {
        "yes" | "true" => Some(Some(true)),
        "no" | "false" => Some(Some(false)),
        "" | "unknown" => Some(None),
        _ => None,
    }
}

pub fn parse_sgo_csv(path: &Path, columns: &ColumnMap) -> Result<Vec<SgoRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_sgo_reader(file, columns)
}

/// Parses a crash export. Values are trimmed and enum fields are matched
/// case-insensitively; `row` in errors is the 1-based line number.
pub fn parse_sgo_reader<R: Read>(reader: R, columns: &ColumnMap) -> Result<Vec<SgoRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index_of = |name: &str| headers.iter().position(|h| h == name);

    let mut required = [0usize; 8];
    for (slot, name) in required.iter_mut().zip(columns.required()) {
        *slot = index_of(name).ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
        })?;
    }
    let [id_i, entity_i, operator_i, city_i, state_i, le_i, sev_i, narrative_i] = required;
    let gear_i = index_of(&columns.gear);
    let impacted_i = index_of(&columns.ads_vehicle_impacted);
    let mapped: Vec<usize> = required.iter().copied().chain(gear_i).chain(impacted_i).collect();

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| match e.position() {
            Some(pos) => Error::MalformedRow {
                row: pos.line() as usize,
                message: e.to_string(),
            },
            None => Error::Csv(e),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::MalformedRow { row: line, message };
        let get = |i: usize| row.get(i).unwrap_or("");

        let report_id = get(id_i).to_string();
        if report_id.is_empty() {
            return Err(bad("empty report id".into()));
        }
        let law_enforcement_investigating = parse_law_enforcement(get(le_i))
            .ok_or_else(|| bad(format!("unrecognized law-enforcement value \"{}\"", get(le_i))))?;
        let highest_injury_severity = parse_severity(get(sev_i))
            .ok_or_else(|| bad(format!("unrecognized injury severity \"{}\"", get(sev_i))))?;
        let ads_vehicle_impacted = match impacted_i {
            Some(i) => {
                parse_yes_no(get(i)).ok_or_else(|| bad(format!("unrecognized impacted value \"{}\"", get(i))))?
            }
            None => None,
        };
        let extra: BTreeMap<String, String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| !mapped.contains(i))
            .map(|(i, h)| (h.to_string(), get(i).to_string()))
            .collect();

        records.push(SgoRecord {
            report_id,
            reporting_entity: get(entity_i).to_string(),
            operator_type: get(operator_i).to_string(),
            location: Location::from_city_state(get(city_i), get(state_i)),
            law_enforcement_investigating,
            highest_injury_severity,
            gear_state: gear_i.map(|i| parse_gear(get(i))),
            narrative: get(narrative_i).to_string(),
            ads_vehicle_impacted,
            extra,
            origin: RecordOrigin::SgoExport,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "Report ID,Reporting Entity,Driver / Operator Type,City,State,Law Enforcement Investigating?,Highest Injury Severity Alleged,Narrative,Weather";

    fn parse(text: &str) -> Result<Vec<SgoRecord>> {
        parse_sgo_reader(text.as_bytes(), &ColumnMap::default())
    }

    #[test]
    fn three_rows_happy_path() {
        let text = format!(
            "{HEADER}\n\
             30270-1, Waymo LLC ,None,Chandler,AZ,Yes,Minor,\"Rear-ended, at light\",Clear\n\
             30270-2,Waymo LLC,None,San Francisco,CA,No,No Injuries Reported,text,Rain\n\
             30270-3,Waymo LLC,None,Los Angeles,CA,Unknown,Unknown,,Clear\n"
        );
        let recs = parse(&text).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].reporting_entity, "Waymo LLC");
        assert_eq!(recs[0].narrative, "Rear-ended, at light");
        assert_eq!(recs[0].location, Some(Location::Phoenix));
        assert_eq!(recs[1].highest_injury_severity, InjurySeverity::None);
        assert_eq!(recs[2].law_enforcement_investigating, LawEnforcement::Unknown);
        assert_eq!(recs[2].extra.get("Weather").map(String::as_str), Some("Clear"));
        assert_eq!(recs[0].gear_state, None);
        assert_eq!(recs[0].ads_vehicle_impacted, None);
    }

    #[test]
    fn missing_column_is_named() {
        let text = "Reporting Entity,Driver / Operator Type,City,State,Law Enforcement Investigating?,Highest Injury Severity Alleged,Narrative\n";
        match parse(text) {
            Err(Error::MissingColumn { column }) => assert_eq!(column, "Report ID"),
            other => panic!("expected missing column, got {other:?}"),
        }
    }

    #[test]
    fn enums_fold_case() {
        let text = format!(
            "{HEADER}\n\
             a,Waymo LLC,None,Chandler,AZ,YES,minor,,\n\
             b,Waymo LLC,None,Chandler,AZ,no,MODERATE W/ Hospitalization,,\n\
             c,Waymo LLC,None,Chandler,AZ,unknown,fatality,,\n"
        );
        let recs = parse(&text).unwrap();
        assert_eq!(recs[0].highest_injury_severity, InjurySeverity::Minor);
        assert_eq!(recs[0].law_enforcement_investigating, LawEnforcement::Yes);
        assert_eq!(recs[1].highest_injury_severity, InjurySeverity::Moderate);
        assert_eq!(recs[2].highest_injury_severity, InjurySeverity::Fatality);
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = format!(
            "{HEADER}\na,Waymo LLC,None,Chandler,AZ,Yes,Minor,,\nb,Waymo LLC,None,Chandler,AZ,Perhaps,Minor,,\n"
        );
        match parse(&text) {
            Err(Error::MalformedRow { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        let ragged = format!("{HEADER}\na,Waymo LLC,None\n");
        assert!(matches!(parse(&ragged), Err(Error::MalformedRow { row: 2, .. })));
        let empty_id = format!("{HEADER}\n ,Waymo LLC,None,Chandler,AZ,Yes,Minor,,\n");
        assert!(matches!(parse(&empty_id), Err(Error::MalformedRow { .. })));
    }

    #[test]
    fn custom_column_names() {
        let map = ColumnMap::from_toml_str("report_id = \"ID\"\nnarrative = \"Story\"").unwrap();
        let text = "ID,Reporting Entity,Driver / Operator Type,City,State,Law Enforcement Investigating?,Highest Injury Severity Alleged,Story,SV Pre-Crash Movement\n\
                    x1,Waymo LLC,None,Tempe,AZ,No,None,parked,Parked\n";
        let recs = parse_sgo_reader(text.as_bytes(), &map).unwrap();
        assert_eq!(recs[0].report_id, "x1");
        assert_eq!(recs[0].gear_state, Some(GearState::Park));
        assert!(ColumnMap::from_toml_str("bogus = \"x\"").is_err());
    }
}
