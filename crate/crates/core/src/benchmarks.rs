//! Human benchmark registry, exposure ledger and mileage blending.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Location;
use crate::intervals::{EventCount, ExposureMiles};

const EMBEDDED_BENCHMARKS: &str = include_str!("../data/benchmarks.toml");
const EMBEDDED_LEDGER: &str = include_str!("../data/ledger.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeGroup {
    AnyPropertyDamageOrInjury,
    PoliceReported,
    AnyInjuryReported,
}

impl OutcomeGroup {
    pub const ALL: [OutcomeGroup; 3] = [
        OutcomeGroup::AnyPropertyDamageOrInjury,
        OutcomeGroup::PoliceReported,
        OutcomeGroup::AnyInjuryReported,
    ];

    pub fn key(self) -> &'static str {
        match self {
            OutcomeGroup::AnyPropertyDamageOrInjury => "any-property-damage-or-injury",
            OutcomeGroup::PoliceReported => "police-reported",
            OutcomeGroup::AnyInjuryReported => "any-injury-reported",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OutcomeGroup::AnyPropertyDamageOrInjury => "Any Property Damage or Injury",
            OutcomeGroup::PoliceReported => "Police-Reported",
            OutcomeGroup::AnyInjuryReported => "Any-Injury-Reported",
        }
    }
}

impl FromStr for OutcomeGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OutcomeGroup::ALL
            .into_iter()
            .find(|g| g.key().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown outcome group \"{s}\"")))
    }
}

impl fmt::Display for OutcomeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Where a benchmark applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Region {
    National,
    Market(Location),
    /// Per-market benchmarks combined in proportion to ADS miles.
    MileageBlend,
}

impl Region {
    pub fn key(self) -> &'static str {
        match self {
            Region::National => "national",
            Region::Market(loc) => loc.code(),
            Region::MileageBlend => "blend",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Region::National => "National",
            Region::Market(loc) => loc.name(),
            Region::MileageBlend => "Mileage Blend",
        }
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "national" => Ok(Region::National),
            "blend" | "mileage-blend" => Ok(Region::MileageBlend),
            other => other.parse().map(Region::Market),
        }
    }
}

impl TryFrom<String> for Region {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Region> for String {
    fn from(r: Region) -> String {
        r.key().to_string()
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Lookup key of a benchmark, written `source:outcome-group:region`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BenchmarkKey {
    pub source: String,
    pub outcome_group: OutcomeGroup,
    pub region: Region,
}

impl BenchmarkKey {
    pub fn new(source: &str, outcome_group: OutcomeGroup, region: Region) -> Self {
        Self {
            source: source.to_string(),
            outcome_group,
            region,
        }
    }
}

impl fmt::Display for BenchmarkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.source, self.outcome_group, self.region)
    }
}

impl FromStr for BenchmarkKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [source, group, region] if !source.trim().is_empty() => Ok(Self {
                source: source.trim().to_string(),
                outcome_group: group.parse()?,
                region: region.parse()?,
            }),
            _ => Err(Error::Config(format!(
                "benchmark key \"{s}\" is not of the form source:outcome-group:region"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Benchmark {
    pub source: String,
    #[serde(default)]
    pub label: String,
    pub outcome_group: OutcomeGroup,
    pub region: Region,
    pub ipmm: f64,
    pub vmt_millions: f64,
    #[serde(default = "default_true")]
    pub comparable: bool,
}

fn default_true() -> bool {
    true
}

impl Benchmark {
    pub fn key(&self) -> BenchmarkKey {
        BenchmarkKey::new(&self.source, self.outcome_group, self.region)
    }

    pub fn validate(&self) -> Result<()> {
        let key = self.key();
        if self.source.trim().is_empty() {
            return Err(Error::Config("benchmark source must not be empty".into()));
        }
        if !(self.ipmm > 0.0 && self.ipmm.is_finite()) {
            return Err(Error::Config(format!(
                "{key}: ipmm must be positive, got {}",
                self.ipmm
            )));
        }
        if !(self.vmt_millions > 0.0 && self.vmt_millions.is_finite()) {
            return Err(Error::Config(format!(
                "{key}: vmt_millions must be positive, got {}",
                self.vmt_millions
            )));
        }
        if self.reconstructed_count().0 == 0 {
            return Err(Error::Config(format!("{key}: rate times VMT rounds to zero events")));
        }
        Ok(())
    }

    /// Benchmark event count `round(ipmm · vmt_millions)`.
    pub fn reconstructed_count(&self) -> EventCount {
        EventCount((self.ipmm * self.vmt_millions).round() as u64)
    }

    pub fn exposure(&self) -> Result<ExposureMiles> {
        ExposureMiles::millions(self.vmt_millions)
    }

    pub fn display_label(&self) -> String {
        let name = if self.label.is_empty() {
            &self.source
        } else {
            &self.label
        };
        format!("{name} ({})", self.region.label())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    #[serde(default)]
    benchmark: Vec<Benchmark>,
}

/// Benchmarks keyed by source, outcome group and region. Cells with no
/// published value are absent rather than zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkRegistry {
    entries: BTreeMap<BenchmarkKey, Benchmark>,
}

impl BenchmarkRegistry {
    pub fn embedded() -> Self {
        Self::from_toml_str(EMBEDDED_BENCHMARKS).expect("embedded benchmarks are valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: RegistryFile = toml::from_str(text).map_err(|e| Error::Config(format!("benchmark config: {e}")))?;
        Self::from_benchmarks(file.benchmark)
    }

    pub fn from_benchmarks(benchmarks: impl IntoIterator<Item = Benchmark>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for b in benchmarks {
            b.validate()?;
            if let Some(old) = entries.insert(b.key(), b) {
                return Err(Error::DuplicateKey(old.key().to_string()));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &BenchmarkKey) -> Result<&Benchmark> {
        self.entries
            .get(key)
            .ok_or_else(|| Error::MissingBenchmark(key.to_string()))
    }

    pub fn lookup(&self, source: &str, group: OutcomeGroup, region: Region) -> Result<&Benchmark> {
        self.get(&BenchmarkKey::new(source, group, region))
    }

    /// All entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = &Benchmark> {
        self.entries.values()
    }

    pub fn comparable(&self) -> impl Iterator<Item = &Benchmark> {
        self.iter().filter(|b| b.comparable)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Market-level entries of one source and outcome group.
    pub fn per_location(&self, source: &str, group: OutcomeGroup) -> Vec<&Benchmark> {
        self.iter()
            .filter(|b| b.source == source && b.outcome_group == group)
            .filter(|b| matches!(b.region, Region::Market(_)))
            .collect()
    }

    /// The named benchmark, computing the mileage blend when `region` is
    /// [`Region::MileageBlend`].
    pub fn resolve(&self, key: &BenchmarkKey, ledger: &ExposureLedger) -> Result<Benchmark> {
        match key.region {
            Region::MileageBlend => {
                let parts: Vec<Benchmark> = self
                    .per_location(&key.source, key.outcome_group)
                    .into_iter()
                    .cloned()
                    .collect();
                if parts.is_empty() {
                    return Err(Error::MissingBenchmark(key.to_string()));
                }
                mileage_blend(&parts, ledger)
            }
            _ => self.get(key).cloned(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LedgerFile {
    miles_millions: BTreeMap<String, f64>,
}

/// ADS miles driven per market, in millions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureLedger {
    miles_by_location: BTreeMap<Location, f64>,
}

impl ExposureLedger {
    pub fn new(miles_by_location: BTreeMap<Location, f64>) -> Result<Self> {
        if miles_by_location.is_empty() {
            return Err(Error::Config("exposure ledger is empty".into()));
        }
        for (loc, &m) in &miles_by_location {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config(format!(
                    "ledger miles for {loc} must be positive, got {m}"
                )));
            }
        }
        Ok(Self { miles_by_location })
    }

    pub fn embedded() -> Self {
        Self::from_toml_str(EMBEDDED_LEDGER).expect("embedded ledger is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: LedgerFile = toml::from_str(text).map_err(|e| Error::Config(format!("exposure ledger: {e}")))?;
        let mut map = BTreeMap::new();
        for (k, v) in file.miles_millions {
            if map.insert(k.parse::<Location>()?, v).is_some() {
                return Err(Error::DuplicateKey(k));
            }
        }
        Self::new(map)
    }

    pub fn to_toml_string(&self) -> String {
        let file = LedgerFile {
            miles_millions: self
                .miles_by_location
                .iter()
                .map(|(l, m)| (l.code().to_string(), *m))
                .collect(),
        };
        toml::to_string(&file).expect("ledger serializes")
    }

    pub fn miles_millions(&self, location: Location) -> Option<f64> {
        self.miles_by_location.get(&location).copied()
    }

    pub fn miles(&self, location: Location) -> Result<ExposureMiles> {
        let m = self
            .miles_millions(location)
            .ok_or_else(|| Error::Config(format!("exposure ledger has no miles for {location}")))?;
        ExposureMiles::millions(m)
    }

    pub fn total_millions(&self) -> f64 {
        self.miles_by_location.values().sum()
    }

    pub fn total(&self) -> Result<ExposureMiles> {
        ExposureMiles::millions(self.total_millions())
    }

    pub fn locations(&self) -> impl Iterator<Item = Location> + '_ {
        self.miles_by_location.keys().copied()
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.miles_by_location.iter().map(|(l, m)| (*l, m * factor)).collect())
    }
}

fn blend_weights<'a>(per_location: &'a [Benchmark], ledger: &ExposureLedger) -> Result<Vec<(&'a Benchmark, f64)>> {
    let first = per_location
        .first()
        .ok_or_else(|| Error::domain("mileage blend needs at least one benchmark"))?;
    if per_location
        .iter()
        .any(|b| b.source != first.source || b.outcome_group != first.outcome_group)
    {
        return Err(Error::domain("mileage blend mixes benchmark sources or outcome groups"));
    }
    ledger
        .locations()
        .map(|loc| {
            let b = per_location
                .iter()
                .find(|b| b.region == Region::Market(loc))
                .ok_or_else(|| {
                    Error::MissingBenchmark(
                        BenchmarkKey::new(&first.source, first.outcome_group, Region::Market(loc)).to_string(),
                    )
                })?;
            Ok((b, ledger.miles_millions(loc).unwrap_or(0.0)))
        })
        .collect()
}

fn weighted_mean(pairs: &[(&Benchmark, f64)], value: impl Fn(&Benchmark) -> f64) -> f64 {
    let total: f64 = pairs.iter().map(|(_, w)| w).sum();
    pairs.iter().map(|(b, w)| value(b) * w).sum::<f64>() / total
}

/// Mileage-weighted combination of per-market benchmarks: both the rate and
/// the VMT are weighted by the ledger's miles in each market.
pub fn mileage_blend(per_location: &[Benchmark], ledger: &ExposureLedger) -> Result<Benchmark> {
    let pairs = blend_weights(per_location, ledger)?;
    let first = pairs[0].0;
    let blended = Benchmark {
        source: first.source.clone(),
        label: first.label.clone(),
        outcome_group: first.outcome_group,
        region: Region::MileageBlend,
        ipmm: weighted_mean(&pairs, |b| b.ipmm),
        vmt_millions: weighted_mean(&pairs, |b| b.vmt_millions),
        comparable: pairs.iter().all(|(b, _)| b.comparable),
    };
    blended.validate()?;
    Ok(blended)
}

/// VMT the blended benchmark stands for.
pub fn effective_blend_vmt(per_location: &[Benchmark], ledger: &ExposureLedger) -> Result<f64> {
    Ok(weighted_mean(&blend_weights(per_location, ledger)?, |b| b.vmt_millions))
}
