//! Crash-report ingestion: CSV parsing, rider-only filtering, removal of
//! duplicate update reports, pre-reporting-period supplements, and
//! classification into the five nested analysis categories.

mod classify;
mod parse;
mod roster;
mod select;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use classify::{classify, Classification, ClassificationRules, OverrideUse};
pub use parse::{parse_sgo_csv, parse_sgo_reader, ColumnMap};
pub use roster::{
    events_from_roster, read_classified_csv, write_classified_csv, FlagOverrides, Roster, RosterEntry, PRE_SGO_PREFIX,
};
pub use select::{
    dedup_updated_reports, filter_rider_only, filter_waymo_ro, merge_pre_sgo, DedupOutcome,
    DEFAULT_DUPLICATE_REPORT_IDS, RO_OPERATOR_TYPE, WAYMO_ENTITY,
};

/// Deployment market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Location {
    #[serde(rename = "PHX")]
    Phoenix,
    #[serde(rename = "SFO")]
    SanFrancisco,
    #[serde(rename = "LA")]
    LosAngeles,
}

impl Location {
    pub const ALL: [Location; 3] = [Location::Phoenix, Location::SanFrancisco, Location::LosAngeles];

    pub fn code(self) -> &'static str {
        match self {
            Location::Phoenix => "PHX",
            Location::SanFrancisco => "SFO",
            Location::LosAngeles => "LA",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Location::Phoenix => "Phoenix",
            Location::SanFrancisco => "San Francisco",
            Location::LosAngeles => "Los Angeles",
        }
    }

    /// Market for a city/state pair as written in the crash export.
    pub fn from_city_state(city: &str, state: &str) -> Option<Location> {
        if let Ok(loc) = city.parse() {
            return Some(loc);
        }
        let city = city.trim().to_ascii_lowercase();
        match state.trim().to_ascii_uppercase().as_str() {
            "AZ" => Some(Location::Phoenix),
            "CA" if city == "san francisco" => Some(Location::SanFrancisco),
            "CA" if LA_AREA_CITIES.contains(&city.as_str()) => Some(Location::LosAngeles),
            _ => None,
        }
    }
}

const LA_AREA_CITIES: [&str; 6] = [
    "los angeles",
    "santa monica",
    "west hollywood",
    "beverly hills",
    "culver city",
    "inglewood",
];

impl FromStr for Location {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PHX" | "PHOENIX" => Ok(Location::Phoenix),
            "SFO" | "SF" | "SAN FRANCISCO" => Ok(Location::SanFrancisco),
            "LA" | "LOS ANGELES" => Ok(Location::LosAngeles),
            other => Err(Error::Config(format!("unknown location \"{other}\""))),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LawEnforcement {
    Yes,
    No,
    Unknown,
}

/// Highest alleged injury severity. The known levels are ordered
/// `None < Minor < Moderate < Serious < Fatality`; `Unknown` is unordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InjurySeverity {
    None,
    Minor,
    Moderate,
    Serious,
    Fatality,
    Unknown,
}

impl InjurySeverity {
    pub fn rank(self) -> Option<u8> {
        match self {
            InjurySeverity::None => Some(0),
            InjurySeverity::Minor => Some(1),
            InjurySeverity::Moderate => Some(2),
            InjurySeverity::Serious => Some(3),
            InjurySeverity::Fatality => Some(4),
            InjurySeverity::Unknown => None,
        }
    }

    pub fn is_injury(self) -> bool {
        self.rank().is_some_and(|r| r >= 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GearState {
    Park,
    NotPark,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordOrigin {
    SgoExport,
    Supplemental,
}

/// One crash report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgoRecord {
    pub report_id: String,
    pub reporting_entity: String,
    pub operator_type: String,
    pub location: Option<Location>,
    pub law_enforcement_investigating: LawEnforcement,
    pub highest_injury_severity: InjurySeverity,
    pub gear_state: Option<GearState>,
    pub narrative: String,
    pub ads_vehicle_impacted: Option<bool>,
    /// Columns not covered by the column map, keyed by header.
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
    pub origin: RecordOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    CsvDerived,
    RosterOverride,
}

/// Analysis categories, each nested inside `InTransport` (which is nested
/// inside `SgoReported`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    SgoReported,
    InTransport,
    ExcludeLowDeltaV,
    PoliceReported,
    AnyInjury,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::SgoReported,
        Category::InTransport,
        Category::ExcludeLowDeltaV,
        Category::PoliceReported,
        Category::AnyInjury,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::SgoReported => "SGO-Reported",
            Category::InTransport => "SGO-Reported in Transport",
            Category::ExcludeLowDeltaV => "SGO-Reported Exclude Low Delta-V",
            Category::PoliceReported => "SGO Police-Reported",
            Category::AnyInjury => "SGO Any-Injury-Reported",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Category::SgoReported => "sgo-reported",
            Category::InTransport => "in-transport",
            Category::ExcludeLowDeltaV => "exclude-low-delta-v",
            Category::PoliceReported => "police-reported",
            Category::AnyInjury => "any-injury",
        }
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.key().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown category \"{s}\"")))
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// A record with its category memberships.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedEvent {
    pub record: SgoRecord,
    pub location: Location,
    pub sgo_reported: bool,
    pub in_transport: bool,
    /// True when the event is kept after the low delta-V exclusion.
    pub exclude_low_dv_member: bool,
    pub police_reported: bool,
    pub any_injury: bool,
    pub provenance: Provenance,
}

impl ClassifiedEvent {
    pub fn report_id(&self) -> &str {
        &self.record.report_id
    }

    pub fn is_member(&self, category: Category) -> bool {
        match category {
            Category::SgoReported => self.sgo_reported,
            Category::InTransport => self.in_transport,
            Category::ExcludeLowDeltaV => self.exclude_low_dv_member,
            Category::PoliceReported => self.police_reported,
            Category::AnyInjury => self.any_injury,
        }
    }

    /// Checks the category nesting.
    pub fn check_nesting(&self) -> Result<()> {
        let broken = if self.in_transport && !self.sgo_reported {
            Some("in-transport without sgo-reported")
        } else if !self.in_transport && (self.exclude_low_dv_member || self.police_reported || self.any_injury) {
            Some("sub-category membership without in-transport")
        } else {
            None
        };
        match broken {
            Some(message) => Err(Error::Classification {
                report_id: self.record.report_id.clone(),
                message: message.to_string(),
            }),
            None => Ok(()),
        }
    }
}
