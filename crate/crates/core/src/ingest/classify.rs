use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Category, ClassifiedEvent, FlagOverrides, GearState, InjurySeverity, LawEnforcement, Provenance, SgoRecord,
};
use crate::collision::{classify_low_delta_v, delta_v_two_body, BodyState, DeltaVPair, LOW_DELTA_V_THRESHOLD_MPH};
use crate::error::{Error, Result};

/// Inputs of the category cascade. Every field has a default, so a TOML file
/// only needs the values it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassificationRules {
    /// Reports where the ADS vehicle was not itself struck.
    pub not_impacted_ids: Vec<String>,
    /// Reports counted as police-reported despite the investigating column.
    pub police_extra_ids: Vec<String>,
    /// Reports counted as injury crashes despite the severity column.
    pub injury_extra_ids: Vec<String>,
    /// Narrative phrases that, with a parked gear state, mark a vehicle
    /// parked out of traffic.
    pub curb_phrases: Vec<String>,
    /// An unknown-severity report is an injury crash when its narrative has
    /// one of these words and one of `transport_terms`.
    pub hospital_terms: Vec<String>,
    pub transport_terms: Vec<String>,
    pub ads_delta_v_column: String,
    pub partner_delta_v_column: String,
    /// Optional columns for the impulse-momentum estimate, used when the
    /// delta-V columns are empty.
    pub ads_mass_column: Option<String>,
    pub partner_mass_column: Option<String>,
    pub closing_speed_column: Option<String>,
    pub restitution: f64,
    pub low_delta_v_threshold_mph: f64,
}

impl Default for ClassificationRules {
    fn default() -> Self {
        let strings = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self {
            not_impacted_ids: strings(&["30270-6542", "30270-6341"]),
            police_extra_ids: strings(&["30270-6548", "30270-1583"]),
            injury_extra_ids: strings(&["30270-6149"]),
            curb_phrases: strings(&["near the curb", "adjacent to the curb", "next to the curb"]),
            hospital_terms: strings(&["hospital"]),
            transport_terms: strings(&["transported", "taken"]),
            ads_delta_v_column: "ADS Delta-V (mph)".into(),
            partner_delta_v_column: "Partner Delta-V (mph)".into(),
            ads_mass_column: None,
            partner_mass_column: None,
            closing_speed_column: None,
            restitution: 0.0,
            low_delta_v_threshold_mph: LOW_DELTA_V_THRESHOLD_MPH,
        }
    }
}

impl ClassificationRules {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let rules: Self = toml::from_str(text).map_err(|e| Error::Config(format!("classification rules: {e}")))?;
        rules.validate()?;
        Ok(rules)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.restitution) {
            return Err(Error::Config(format!(
                "restitution {} outside [0, 1]",
                self.restitution
            )));
        }
        if !(self.low_delta_v_threshold_mph > 0.0 && self.low_delta_v_threshold_mph.is_finite()) {
            return Err(Error::Config("low delta-V threshold must be positive".into()));
        }
        Ok(())
    }

    fn number(&self, record: &SgoRecord, column: &str) -> Result<Option<f64>> {
        match record.extra.get(column).map(|v| v.trim()).filter(|v| !v.is_empty()) {
            None => Ok(None),
            Some(v) => v.parse::<f64>().map(Some).map_err(|_| Error::Classification {
                report_id: record.report_id.clone(),
                message: format!("column \"{column}\" is not a number: \"{v}\""),
            }),
        }
    }

    /// Delta-V of both parties, from the reported columns or, failing that,
    /// from masses and closing speed. A crash with only the ADS value (an
    /// object strike) reports zero for the partner.
    fn delta_v(&self, record: &SgoRecord) -> Result<Option<DeltaVPair>> {
        let ads = self.number(record, &self.ads_delta_v_column)?;
        let partner = self.number(record, &self.partner_delta_v_column)?;
        if let Some(dv1) = ads {
            return Ok(Some(DeltaVPair {
                dv1,
                dv2: partner.unwrap_or(0.0),
            }));
        }
        let lookup = |c: &Option<String>| c.as_deref().map(|c| self.number(record, c)).transpose();
        let (m1, m2, v) = (
            lookup(&self.ads_mass_column)?.flatten(),
            lookup(&self.partner_mass_column)?.flatten(),
            lookup(&self.closing_speed_column)?.flatten(),
        );
        match (m1, m2, v) {
            (Some(m1), Some(m2), Some(v)) => {
                let ads = BodyState::new(m1, [0.0, 0.0])?;
                let other = BodyState::new(m2, [v, 0.0])?;
                delta_v_two_body(&ads, &other, self.restitution).map(Some)
            }
            _ => Ok(None),
        }
    }

    fn has_hospital_narrative(&self, narrative: &str) -> bool {
        let text = narrative.to_lowercase();
        self.hospital_terms.iter().any(|t| text.contains(&t.to_lowercase()))
            && self.transport_terms.iter().any(|t| text.contains(&t.to_lowercase()))
    }

    fn parked_at_curb(&self, record: &SgoRecord) -> bool {
        let text = record.narrative.to_lowercase();
        record.gear_state == Some(GearState::Park) && self.curb_phrases.iter().any(|p| text.contains(&p.to_lowercase()))
    }

    fn derive(&self, record: &SgoRecord) -> Result<ClassifiedEvent> {
        let location = record.location.ok_or_else(|| Error::Classification {
            report_id: record.report_id.clone(),
            message: "record is outside the analysed markets".into(),
        })?;
        let id = record.report_id.as_str();
        let listed = |ids: &[String]| ids.iter().any(|x| x == id);

        let impacted = record.ads_vehicle_impacted != Some(false) && !listed(&self.not_impacted_ids);
        let in_transport = impacted && !self.parked_at_curb(record);
        let low_delta_v = match self.delta_v(record)? {
            Some(dv) => classify_low_delta_v(&dv, self.low_delta_v_threshold_mph),
            None => false,
        };
        let police = matches!(
            record.law_enforcement_investigating,
            LawEnforcement::Yes | LawEnforcement::Unknown
        ) || listed(&self.police_extra_ids);
        let injury = record.highest_injury_severity.is_injury()
            || (record.highest_injury_severity == InjurySeverity::Unknown
                && self.has_hospital_narrative(&record.narrative))
            || listed(&self.injury_extra_ids);

        Ok(ClassifiedEvent {
            record: record.clone(),
            location,
            sgo_reported: true,
            in_transport,
            exclude_low_dv_member: in_transport && !low_delta_v,
            police_reported: in_transport && police,
            any_injury: in_transport && injury,
            provenance: Provenance::CsvDerived,
        })
    }
}

/// One override applied to one field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverrideUse {
    pub report_id: String,
    pub field: Category,
    /// False when the override agreed with the derived value.
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Events sorted by report ID.
    pub events: Vec<ClassifiedEvent>,
    pub overrides_used: Vec<OverrideUse>,
    pub warnings: Vec<String>,
}

impl Classification {
    pub fn count(&self, category: Category) -> usize {
        self.events.iter().filter(|e| e.is_member(category)).count()
    }
}

fn set_flag(event: &mut ClassifiedEvent, category: Category, value: bool) {
    let slot = match category {
        Category::SgoReported => &mut event.sgo_reported,
        Category::InTransport => &mut event.in_transport,
        Category::ExcludeLowDeltaV => &mut event.exclude_low_dv_member,
        Category::PoliceReported => &mut event.police_reported,
        Category::AnyInjury => &mut event.any_injury,
    };
    *slot = value;
}

/// Classifies every record, then applies `overrides` field by field. An
/// event whose value changed under an override is marked
/// [`Provenance::RosterOverride`]. The result must respect the category
/// nesting.
pub fn classify(
    records: &[SgoRecord],
    rules: &ClassificationRules,
    overrides: &BTreeMap<String, FlagOverrides>,
) -> Result<Classification> {
    rules.validate()?;
    let mut events = records.iter().map(|r| rules.derive(r)).collect::<Result<Vec<_>>>()?;

    let mut overrides_used = Vec::new();
    for event in &mut events {
        let Some(flags) = overrides.get(event.report_id()) else {
            continue;
        };
        for category in Category::ALL {
            if let Some(value) = flags.get(category) {
                let changed = event.is_member(category) != value;
                set_flag(event, category, value);
                if changed {
                    event.provenance = Provenance::RosterOverride;
                }
                overrides_used.push(OverrideUse {
                    report_id: event.report_id().to_string(),
                    field: category,
                    changed,
                });
            }
        }
    }
    for event in &events {
        event.check_nesting()?;
    }

    let present: BTreeSet<&str> = records.iter().map(|r| r.report_id.as_str()).collect();
    let warnings = overrides
        .keys()
        .filter(|id| !present.contains(id.as_str()))
        .map(|id| format!("override for {id} matches no record"))
        .collect();

    events.sort_by(|a, b| a.report_id().cmp(b.report_id()));
    Ok(Classification {
        events,
        overrides_used,
        warnings,
    })
}
