//! Rate tables, benchmark comparisons and percent-reduction series.

mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::benchmarks::{Benchmark, BenchmarkKey, BenchmarkRegistry, ExposureLedger, OutcomeGroup, Region};
use crate::error::{Error, Result};
use crate::ingest::{events_from_roster, Category, ClassifiedEvent, Location, Roster};
use crate::intervals::{
    bootstrap_ratio_ci, poisson_exact_ci, rate_ratio_ci, EventCount, ExposureMiles, RateEstimate, RateRatioResult,
};
use crate::specfun::Probability;

pub use report::{
    comparison_markdown, comparisons_csv, rate_table_csv, rate_table_markdown, reductions_csv, reductions_markdown,
    render_report, RenderedFile, ReportFormat,
};

/// Significance level for rate intervals.
pub const DEFAULT_RATE_ALPHA: f64 = 0.05;

/// Significance level for ratio intervals in the default comparison tables.
pub const DEFAULT_RATIO_ALPHA: f64 = 0.025;

/// ADS side of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scope {
    Location(Location),
    /// All markets against the mileage-blended benchmark.
    MileageBlend,
    /// All markets against a national benchmark.
    National,
}

impl Scope {
    pub fn region(self) -> Region {
        match self {
            Scope::Location(loc) => Region::Market(loc),
            Scope::MileageBlend => Region::MileageBlend,
            Scope::National => Region::National,
        }
    }

    pub fn key(self) -> &'static str {
        self.region().key()
    }

    pub fn label(self) -> &'static str {
        match self {
            Scope::Location(loc) => loc.name(),
            Scope::MileageBlend => "All Locations (Mileage Blend)",
            Scope::National => "All Locations (National)",
        }
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<Region>()? {
            Region::Market(loc) => Ok(Scope::Location(loc)),
            Region::MileageBlend => Ok(Scope::MileageBlend),
            Region::National => Ok(Scope::National),
        }
    }
}

impl TryFrom<String> for Scope {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scope> for String {
    fn from(s: Scope) -> String {
        s.key().to_string()
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Benchmark outcome group an ADS category may be compared against.
pub fn outcome_group_for(category: Category) -> OutcomeGroup {
    match category {
        Category::SgoReported | Category::InTransport | Category::ExcludeLowDeltaV => {
            OutcomeGroup::AnyPropertyDamageOrInjury
        }
        Category::PoliceReported => OutcomeGroup::PoliceReported,
        Category::AnyInjury => OutcomeGroup::AnyInjuryReported,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationMiles {
    pub location: Location,
    pub miles_millions: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub location: Location,
    pub category: Category,
    pub estimate: RateEstimate,
}

/// Count, rate and exact interval per market and category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub alpha: Probability,
    pub exposure: Vec<LocationMiles>,
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn get(&self, location: Location, category: Category) -> Option<&RateEstimate> {
        self.rows
            .iter()
            .find(|r| r.location == location && r.category == category)
            .map(|r| &r.estimate)
    }

    pub fn locations(&self) -> impl Iterator<Item = Location> + '_ {
        self.exposure.iter().map(|e| e.location)
    }
}

fn count_events(events: &[ClassifiedEvent], category: Category, location: Option<Location>) -> EventCount {
    let n = events
        .iter()
        .filter(|e| e.is_member(category) && location.is_none_or(|l| e.location == l))
        .count();
    EventCount(n as u64)
}

fn check_locations(events: &[ClassifiedEvent], ledger: &ExposureLedger) -> Result<()> {
    match events.iter().find(|e| ledger.miles_millions(e.location).is_none()) {
        Some(e) => Err(Error::Config(format!(
            "event {} is in {} but the exposure ledger has no miles there",
            e.report_id(),
            e.location
        ))),
        None => Ok(()),
    }
}

pub fn compute_rate_table(
    events: &[ClassifiedEvent],
    ledger: &ExposureLedger,
    alpha: Probability,
) -> Result<RateTable> {
    check_locations(events, ledger)?;
    let mut exposure = Vec::new();
    let mut rows = Vec::new();
    for location in ledger.locations() {
        let miles = ledger.miles(location)?;
        exposure.push(LocationMiles {
            location,
            miles_millions: miles.value(),
        });
        for category in Category::ALL {
            let n = count_events(events, category, Some(location));
            rows.push(RateRow {
                location,
                category,
                estimate: poisson_exact_ci(n, miles, alpha)?,
            });
        }
    }
    Ok(RateTable { alpha, exposure, rows })
}

/// One requested comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonSpec {
    pub category: Category,
    pub source: String,
    pub scope: Scope,
}

impl ComparisonSpec {
    pub fn new(category: Category, source: &str, scope: Scope) -> Self {
        Self {
            category,
            source: source.to_string(),
            scope,
        }
    }

    pub fn benchmark_key(&self) -> BenchmarkKey {
        BenchmarkKey::new(&self.source, outcome_group_for(self.category), self.scope.region())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub alpha: Probability,
    /// Adds a parametric-bootstrap interval next to each ratio interval.
    pub bootstrap: Option<BootstrapOptions>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            alpha: Probability::new(DEFAULT_RATIO_ALPHA).expect("valid alpha"),
            bootstrap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub benchmark: Benchmark,
    pub scope: Scope,
    pub location_label: String,
    pub ads_selection: Category,
    pub ads_count: EventCount,
    pub ads_miles_millions: f64,
    pub ads_ipmm: f64,
    pub benchmark_count: EventCount,
    pub ratio: RateRatioResult,
    pub significant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<RateRatioResult>,
}

/// Compares the ADS rate for `spec.category` in `spec.scope` with the named
/// benchmark. The category must map to the benchmark's outcome group.
pub fn compare(
    events: &[ClassifiedEvent],
    ledger: &ExposureLedger,
    registry: &BenchmarkRegistry,
    spec: &ComparisonSpec,
    options: &CompareOptions,
) -> Result<ComparisonRow> {
    check_locations(events, ledger)?;
    let key = spec.benchmark_key();
    let benchmark = registry.resolve(&key, ledger)?;
    compare_against(events, ledger, &benchmark, spec.category, spec.scope, options)
}

/// Rate ratio of `y` events over `t` against `benchmark`, with the optional
/// bootstrap interval. The point is the ratio of rates; the interval uses the
/// reconstructed benchmark count.
pub fn ratio_against(
    y: EventCount,
    t: ExposureMiles,
    benchmark: &Benchmark,
    options: &CompareOptions,
) -> Result<(RateRatioResult, Option<RateRatioResult>)> {
    let x = benchmark.reconstructed_count();
    let s = benchmark.exposure()?.to_unit(t.unit());
    let mut ratio = rate_ratio_ci(y, t, x, s, options.alpha)?;
    ratio.point = (y.get() as f64 / t.in_millions()) / benchmark.ipmm;
    ratio.reduction = ratio.point - 1.0;
    let bootstrap = options
        .bootstrap
        .map(|b| {
            let xf = x.get() as f64;
            bootstrap_ratio_ci(y, t, xf, xf.sqrt(), s, options.alpha, b.trials, b.seed)
        })
        .transpose()?;
    Ok((ratio, bootstrap))
}

/// Same as [`compare`] for an explicit benchmark.
pub fn compare_against(
    events: &[ClassifiedEvent],
    ledger: &ExposureLedger,
    benchmark: &Benchmark,
    category: Category,
    scope: Scope,
    options: &CompareOptions,
) -> Result<ComparisonRow> {
    let wanted = outcome_group_for(category);
    if benchmark.outcome_group != wanted {
        return Err(Error::Config(format!(
            "category {category} is compared against {wanted} benchmarks, not {}",
            benchmark.outcome_group
        )));
    }
    if benchmark.region != scope.region() {
        return Err(Error::Config(format!(
            "benchmark {} does not apply to scope {scope}",
            benchmark.key()
        )));
    }
    let (y, t) = match scope {
        Scope::Location(loc) => (count_events(events, category, Some(loc)), ledger.miles(loc)?),
        Scope::MileageBlend | Scope::National => (count_events(events, category, None), ledger.total()?),
    };
    let (ratio, bootstrap) = ratio_against(y, t, benchmark, options)?;
    Ok(ComparisonRow {
        benchmark: benchmark.clone(),
        scope,
        location_label: scope.label().to_string(),
        ads_selection: category,
        ads_count: y,
        ads_miles_millions: t.value(),
        ads_ipmm: y.get() as f64 / t.value(),
        benchmark_count: benchmark.reconstructed_count(),
        significant: ratio.is_significant(),
        ratio,
        bootstrap,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonTableSpec {
    pub id: String,
    pub title: String,
    pub rows: Vec<ComparisonSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub id: String,
    pub title: String,
    pub alpha: Probability,
    pub rows: Vec<ComparisonRow>,
}

fn four_scopes(category: Category, source: &str) -> Vec<ComparisonSpec> {
    [
        Scope::Location(Location::Phoenix),
        Scope::Location(Location::SanFrancisco),
        Scope::MileageBlend,
        Scope::National,
    ]
    .into_iter()
    .map(|scope| ComparisonSpec::new(category, source, scope))
    .collect()
}

/// The standard comparison tables: any property damage (all crashes and
/// excluding low delta-V), police-reported and any-injury, and the Los
/// Angeles rows.
pub fn published_comparisons() -> Vec<ComparisonTableSpec> {
    let sf = Scope::Location(Location::SanFrancisco);
    let la = Scope::Location(Location::LosAngeles);
    let pdo = |selection: Category, nds: Category| {
        let mut rows = four_scopes(selection, "blincoe-adjusted");
        rows.push(ComparisonSpec::new(nds, "ridehail-nds", sf));
        rows.push(ComparisonSpec::new(nds, "shrp2-nds", Scope::National));
        rows
    };
    let mut injury = four_scopes(Category::PoliceReported, "observed");
    injury.extend(four_scopes(Category::AnyInjury, "observed"));
    injury.extend(four_scopes(Category::AnyInjury, "blincoe-adjusted"));

    vec![
        ComparisonTableSpec {
            id: "any-property-damage".into(),
            title: "Any Property Damage or Injury: All SGO-Reported Crashes".into(),
            rows: pdo(Category::InTransport, Category::SgoReported),
        },
        ComparisonTableSpec {
            id: "any-property-damage-exclude-low-delta-v".into(),
            title: "Any Property Damage or Injury: Excluding Low Delta-V".into(),
            rows: pdo(Category::ExcludeLowDeltaV, Category::ExcludeLowDeltaV),
        },
        ComparisonTableSpec {
            id: "police-and-injury".into(),
            title: "Police-Reported and Any-Injury-Reported Crashes".into(),
            rows: injury,
        },
        ComparisonTableSpec {
            id: "los-angeles".into(),
            title: "Los Angeles".into(),
            rows: vec![
                ComparisonSpec::new(Category::InTransport, "blincoe-adjusted", la),
                ComparisonSpec::new(Category::PoliceReported, "observed", la),
                ComparisonSpec::new(Category::AnyInjury, "observed", la),
                ComparisonSpec::new(Category::AnyInjury, "blincoe-adjusted", la),
            ],
        },
    ]
}

/// Percent reduction of the ADS rate, `100 · (1 - ratio)`, with its interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionPoint {
    pub location: String,
    pub outcome_group: OutcomeGroup,
    pub benchmark: String,
    pub reduction_pct: f64,
    pub lower_pct: f64,
    pub upper_pct: f64,
    pub significant: bool,
}

pub fn percent_reduction(ratio: &RateRatioResult) -> (f64, f64, f64) {
    let pct = |r: f64| 100.0 * (1.0 - r);
    (pct(ratio.point), pct(ratio.upper), pct(ratio.lower))
}

/// Plot series for the police-reported and any-injury rows. Los Angeles is
/// left out.
pub fn percent_reduction_series(rows: &[ComparisonRow]) -> Vec<ReductionPoint> {
    rows.iter()
        .filter(|r| r.benchmark.outcome_group != OutcomeGroup::AnyPropertyDamageOrInjury)
        .filter(|r| r.scope != Scope::Location(Location::LosAngeles))
        .map(|r| {
            let (reduction_pct, lower_pct, upper_pct) = percent_reduction(&r.ratio);
            ReductionPoint {
                location: r.location_label.clone(),
                outcome_group: r.benchmark.outcome_group,
                benchmark: r.benchmark.label.clone(),
                reduction_pct,
                lower_pct,
                upper_pct,
                significant: r.significant,
            }
        })
        .collect()
}

/// Everything needed for the standard tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub events: Vec<ClassifiedEvent>,
    pub ledger: ExposureLedger,
    pub registry: BenchmarkRegistry,
}

impl Study {
    pub fn new(events: Vec<ClassifiedEvent>, ledger: ExposureLedger, registry: BenchmarkRegistry) -> Result<Self> {
        check_locations(&events, &ledger)?;
        Ok(Self {
            events,
            ledger,
            registry,
        })
    }

    /// The shipped roster, ledger and benchmarks.
    pub fn published() -> Result<Self> {
        Self::new(
            events_from_roster(&Roster::embedded())?,
            ExposureLedger::embedded(),
            BenchmarkRegistry::embedded(),
        )
    }

    pub fn rate_table(&self, alpha: Probability) -> Result<RateTable> {
        compute_rate_table(&self.events, &self.ledger, alpha)
    }

    pub fn compare(&self, spec: &ComparisonSpec, options: &CompareOptions) -> Result<ComparisonRow> {
        compare(&self.events, &self.ledger, &self.registry, spec, options)
    }

    pub fn comparison_tables(
        &self,
        specs: &[ComparisonTableSpec],
        options: &CompareOptions,
    ) -> Result<Vec<ComparisonTable>> {
        specs
            .iter()
            .map(|t| {
                Ok(ComparisonTable {
                    id: t.id.clone(),
                    title: t.title.clone(),
                    alpha: options.alpha,
                    rows: t.rows.iter().map(|s| self.compare(s, options)).collect::<Result<_>>()?,
                })
            })
            .collect()
    }

    pub fn report(&self, rate_alpha: Probability, options: &CompareOptions) -> Result<Report> {
        let comparisons = self.comparison_tables(&published_comparisons(), options)?;
        let rows: Vec<ComparisonRow> = comparisons.iter().flat_map(|t| t.rows.iter().cloned()).collect();
        Ok(Report {
            rate_table: self.rate_table(rate_alpha)?,
            reductions: percent_reduction_series(&rows),
            comparisons,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rate_table: RateTable,
    pub comparisons: Vec<ComparisonTable>,
    pub reductions: Vec<ReductionPoint>,
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    fn study() -> Study {
        Study::published().unwrap()
    }

    #[test]
    fn rate_table_counts() {
        let t = study().rate_table(p(0.05)).unwrap();
        let n = |loc, c| t.get(loc, c).unwrap().count.get();
        let phx = [38, 33, 17, 12, 3];
        let sfo = [34, 29, 14, 3, 1];
        for (i, c) in Category::ALL.into_iter().enumerate() {
            assert_eq!(n(Location::Phoenix, c), phx[i]);
            assert_eq!(n(Location::SanFrancisco, c), sfo[i]);
        }
        assert_eq!(n(Location::LosAngeles, Category::ExcludeLowDeltaV), 1);
        let la0 = t.get(Location::LosAngeles, Category::PoliceReported).unwrap();
        assert_eq!((la0.point, la0.lower), (0.0, 0.0));
        assert!(la0.upper.is_finite());
    }

    #[test]
    fn point_ratio_is_rate_over_rate() {
        let s = study();
        for table in s
            .comparison_tables(&published_comparisons(), &CompareOptions::default())
            .unwrap()
        {
            for row in table.rows {
                let expected = row.ads_ipmm / row.benchmark.ipmm;
                assert_relative_eq!(row.ratio.point, expected, max_relative = 1e-12);
                assert_eq!(row.significant, row.ratio.lower > 1.0 || row.ratio.upper < 1.0);
            }
        }
    }

    #[test]
    fn blended_count_is_sum_of_markets() {
        let s = study();
        let row = s
            .compare(
                &ComparisonSpec::new(Category::PoliceReported, "observed", Scope::MileageBlend),
                &CompareOptions::default(),
            )
            .unwrap();
        assert_eq!(row.ads_count, EventCount(15));
        assert_relative_eq!(row.ads_ipmm, 15.0 / 7.1467, max_relative = 1e-12);
    }

    #[test]
    fn pairing_is_enforced() {
        let s = study();
        let b = s
            .registry
            .lookup(
                "observed",
                OutcomeGroup::PoliceReported,
                Region::Market(Location::Phoenix),
            )
            .unwrap()
            .clone();
        let opts = CompareOptions::default();
        let phx = Scope::Location(Location::Phoenix);
        assert!(compare_against(&s.events, &s.ledger, &b, Category::AnyInjury, phx, &opts).is_err());
        assert!(compare_against(
            &s.events,
            &s.ledger,
            &b,
            Category::PoliceReported,
            Scope::National,
            &opts
        )
        .is_err());
        assert!(compare_against(&s.events, &s.ledger, &b, Category::PoliceReported, phx, &opts).is_ok());
    }

    #[test]
    fn missing_benchmark_is_named() {
        let err = study()
            .compare(
                &ComparisonSpec::new(
                    Category::SgoReported,
                    "ridehail-nds",
                    Scope::Location(Location::Phoenix),
                ),
                &CompareOptions::default(),
            )
            .unwrap_err();
        assert!(matches!(err, Error::MissingBenchmark(ref k) if k.contains("ridehail-nds")));
    }

    #[test]
    fn ratio_alpha_changes_only_bounds() {
        let s = study();
        let spec = ComparisonSpec::new(Category::PoliceReported, "observed", Scope::Location(Location::Phoenix));
        let wide = s.compare(&spec, &CompareOptions::default()).unwrap();
        let narrow = s
            .compare(
                &spec,
                &CompareOptions {
                    alpha: p(0.05),
                    bootstrap: None,
                },
            )
            .unwrap();
        assert_eq!(wide.ratio.point, narrow.ratio.point);
        assert!(wide.ratio.lower < narrow.ratio.lower && wide.ratio.upper > narrow.ratio.upper);
        assert_relative_eq!(narrow.ratio.lower, 0.2694, epsilon = 5e-4);
        assert_relative_eq!(narrow.ratio.upper, 0.9108, epsilon = 5e-4);
    }

    #[test]
    fn reduction_series_skips_la_and_pdo() {
        let s = study();
        let report = s.report(p(0.05), &CompareOptions::default()).unwrap();
        assert_eq!(report.reductions.len(), 12);
        assert!(report.reductions.iter().all(|r| !r.location.contains("Los Angeles")));
        let one = RateRatioResult {
            point: 1.0,
            lower: 0.5,
            upper: 1.5,
            alpha: p(0.05),
            reduction: 0.0,
        };
        let (pt, lo, hi) = percent_reduction(&one);
        assert_eq!(pt, 0.0);
        assert!(lo < 0.0 && hi > 0.0);
    }

    #[test]
    fn events_outside_ledger_are_rejected() {
        let mut s = study();
        let ledger = ExposureLedger::new([(Location::Phoenix, 5.34)].into()).unwrap();
        s.ledger = ledger.clone();
        assert!(Study::new(s.events.clone(), ledger, s.registry.clone()).is_err());
    }

    #[test]
    fn scope_parsing() {
        assert_eq!("SFO".parse::<Scope>().unwrap(), Scope::Location(Location::SanFrancisco));
        assert_eq!("blend".parse::<Scope>().unwrap(), Scope::MileageBlend);
        assert_eq!("national".parse::<Scope>().unwrap(), Scope::National);
        assert!("moon".parse::<Scope>().is_err());
    }
}
