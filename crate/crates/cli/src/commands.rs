use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use ratebench_core::analysis::{
    compare_against, compute_rate_table, rate_table_markdown, ratio_against, render_report, BootstrapOptions,
    CompareOptions, Study,
};
use ratebench_core::benchmarks::{effective_blend_vmt, mileage_blend};
use ratebench_core::ingest::{
    classify as classify_records, dedup_updated_reports, events_from_roster, filter_waymo_ro, merge_pre_sgo,
    parse_sgo_csv, read_classified_csv, write_classified_csv, ClassificationRules, ColumnMap, Roster,
    DEFAULT_DUPLICATE_REPORT_IDS,
};
use ratebench_core::intervals::poisson_exact_ci;
use ratebench_core::validation::{run_validation, ValidationReport};
use ratebench_core::{
    BenchmarkKey, BenchmarkRegistry, Category, ClassifiedEvent, Error, EventCount, ExposureLedger, ExposureMiles,
    Location, OutcomeGroup, Probability, RateRatioResult, Region, Scope, SgoRecord,
};

use crate::config::RunConfig;
use crate::{
    BlendArgs, ClassifyArgs, CompareArgs, EventsInput, IngestArgs, MilesArgs, RatesArgs, ReportArgs, SgoInput,
    ValidateArgs,
};

/// Returned when `validate` ran but at least one check failed.
#[derive(Debug)]
pub struct ValidationFailed {
    pub failed: usize,
    pub total: usize,
}

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} of {} validation checks failed", self.failed, self.total)
    }
}

impl std::error::Error for ValidationFailed {}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| io_error(path, e))?))
}

fn write_output(path: Option<&Path>, contents: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(path) => std::fs::write(path, contents).map_err(|e| io_error(path, e))?,
        None => std::io::stdout().lock().write_all(contents)?,
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    write_output(None, text.as_bytes())
}

fn pick(flag: Option<&Path>, configured: Option<&PathBuf>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf).or_else(|| configured.cloned())
}

fn probability(value: f64) -> anyhow::Result<Probability> {
    Ok(Probability::new(value)?)
}

fn registry(config: &RunConfig, flag: Option<&Path>) -> anyhow::Result<BenchmarkRegistry> {
    match pick(flag, config.paths.benchmarks.as_ref()) {
        Some(path) => Ok(BenchmarkRegistry::load(&path)?),
        None => Ok(BenchmarkRegistry::embedded()),
    }
}

fn ledger(config: &RunConfig, flag: Option<&Path>) -> anyhow::Result<ExposureLedger> {
    match pick(flag, config.paths.ledger.as_ref()) {
        Some(path) => Ok(ExposureLedger::load(&path)?),
        None => Ok(ExposureLedger::embedded()),
    }
}

fn roster(config: &RunConfig, flag: Option<&Path>) -> anyhow::Result<Roster> {
    match pick(flag, config.paths.roster.as_ref()) {
        Some(path) => Ok(Roster::load(&path)?),
        None => Ok(Roster::embedded()),
    }
}

fn miles(args: &MilesArgs) -> anyhow::Result<Option<ExposureMiles>> {
    Ok(match (args.miles_millions, args.miles_billions) {
        (Some(m), _) => Some(ExposureMiles::millions(m)?),
        (None, Some(b)) => Some(ExposureMiles::billions(b)?),
        (None, None) => None,
    })
}

struct Selection {
    records: Vec<SgoRecord>,
    read: usize,
    rider_only: usize,
    removed: Vec<String>,
    unlisted_duplicates: Vec<String>,
    pre_sgo: usize,
}

fn select_records(config: &RunConfig, input: &SgoInput, sgo: &Path) -> anyhow::Result<Selection> {
    let columns = match pick(input.columns.as_deref(), config.paths.columns.as_ref()) {
        Some(path) => ColumnMap::load(&path)?,
        None => ColumnMap::default(),
    };
    let records = parse_sgo_csv(sgo, &columns)?;
    let read = records.len();
    let records = filter_waymo_ro(records);
    let rider_only = records.len();
    let dedup = match &config.duplicate_ids {
        Some(ids) => dedup_updated_reports(records, ids),
        None => dedup_updated_reports(records, &DEFAULT_DUPLICATE_REPORT_IDS),
    };
    let supplement = if input.no_pre_sgo {
        Vec::new()
    } else {
        roster(config, input.roster.as_deref())?.supplemental()
    };
    let pre_sgo = supplement.len();
    let records = merge_pre_sgo(dedup.records, supplement)?;
    Ok(Selection {
        records,
        read,
        rider_only,
        removed: dedup.removed,
        unlisted_duplicates: dedup.unlisted_duplicates,
        pre_sgo,
    })
}

fn sgo_path(config: &RunConfig, input: &SgoInput) -> Option<PathBuf> {
    pick(input.sgo.as_deref(), config.paths.sgo_csv.as_ref())
}

fn report_selection(s: &Selection) {
    eprintln!(
        "read {} rows; {} rider-only; removed {} superseded; added {} pre-reporting; {} records",
        s.read,
        s.rider_only,
        s.removed.len(),
        s.pre_sgo,
        s.records.len()
    );
    for id in &s.unlisted_duplicates {
        eprintln!("warning: report id {id} appears more than once; all copies kept");
    }
}

pub fn ingest(config: &RunConfig, args: &IngestArgs) -> anyhow::Result<()> {
    let sgo = sgo_path(config, &args.input)
        .ok_or_else(|| Error::Config("no SGO export given; pass --sgo or set paths.sgo_csv".into()))?;
    let selection = select_records(config, &args.input, &sgo)?;
    report_selection(&selection);
    let mut text = serde_json::to_string_pretty(&selection.records).map_err(Error::from)?;
    text.push('\n');
    write_output(args.output.as_deref(), text.as_bytes())
}

fn classify_from(
    config: &RunConfig,
    records: &[SgoRecord],
    args: &ClassifyArgs,
) -> anyhow::Result<Vec<ClassifiedEvent>> {
    let rules = match pick(args.rules.as_deref(), config.paths.rules.as_ref()) {
        Some(path) => ClassificationRules::load(&path)?,
        None => ClassificationRules::default(),
    };
    let overrides = if args.no_overrides {
        Default::default()
    } else {
        roster(config, args.input.roster.as_deref())?.overrides()
    };
    let result = classify_records(records, &rules, &overrides)?;
    let changed = result.overrides_used.iter().filter(|o| o.changed).count();
    eprintln!(
        "classified {} events; {} override values applied, {changed} changed a derived flag",
        result.events.len(),
        result.overrides_used.len()
    );
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    Ok(result.events)
}

pub fn classify(config: &RunConfig, args: &ClassifyArgs) -> anyhow::Result<()> {
    let records: Vec<SgoRecord> = if let Some(path) =
        pick(args.records.as_deref(), config.paths.records.as_ref()).filter(|_| args.input.sgo.is_none())
    {
        serde_json::from_reader(open(&path)?)
            .map_err(Error::from)
            .with_context(|| format!("reading records from {}", path.display()))?
    } else {
        let sgo = sgo_path(config, &args.input)
            .ok_or_else(|| Error::Config("no input given; pass --sgo or --records, or set paths.sgo_csv".into()))?;
        let selection = select_records(config, &args.input, &sgo)?;
        report_selection(&selection);
        selection.records
    };
    let events = classify_from(config, &records, args)?;
    for loc in locations(&events) {
        let counts: Vec<String> = Category::ALL
            .iter()
            .map(|&c| {
                events
                    .iter()
                    .filter(|e| e.location == loc && e.is_member(c))
                    .count()
                    .to_string()
            })
            .collect();
        eprintln!("{}: {}", loc.code(), counts.join(" / "));
    }
    let mut buf = Vec::new();
    write_classified_csv(&events, &mut buf)?;
    write_output(args.output.as_deref(), &buf)
}

fn locations(events: &[ClassifiedEvent]) -> BTreeSet<Location> {
    events.iter().map(|e| e.location).collect()
}

/// Events from `--events`, the configured event file, the configured SGO
/// export, or the built-in roster, in that order.
fn load_events(config: &RunConfig, input: &EventsInput) -> anyhow::Result<Vec<ClassifiedEvent>> {
    if let Some(path) = pick(input.events.as_deref(), config.paths.events.as_ref()) {
        return read_classified_csv(open(&path)?).with_context(|| format!("reading events from {}", path.display()));
    }
    if let Some(sgo) = config.paths.sgo_csv.clone() {
        let input = SgoInput {
            sgo: Some(sgo.clone()),
            columns: None,
            roster: None,
            no_pre_sgo: false,
        };
        let selection = select_records(config, &input, &sgo)?;
        let args = ClassifyArgs {
            input,
            records: None,
            rules: None,
            no_overrides: false,
            output: None,
        };
        return classify_from(config, &selection.records, &args);
    }
    Ok(events_from_roster(&roster(config, None)?)?)
}

pub fn rates(config: &RunConfig, args: &RatesArgs) -> anyhow::Result<()> {
    let alpha = probability(args.alpha.unwrap_or(config.alpha))?;
    if let Some(n) = args.count {
        let exposure = miles(&args.miles)?.expect("clap requires miles with --count");
        let r = poisson_exact_ci(EventCount(n), exposure, alpha)?;
        if args.json {
            return print_json(&r);
        }
        let unit = if exposure.unit() == ratebench_core::MileUnit::Billions {
            "B"
        } else {
            "M"
        };
        println!(
            "{n} {} over {}{unit} miles: {} {} ({}, {}) at {}% confidence",
            if n == 1 { "event" } else { "events" },
            exposure.value(),
            sig(r.point),
            r.rate_label(),
            sig(r.lower),
            sig(r.upper),
            100.0 * (1.0 - alpha.value())
        );
        return Ok(());
    }
    let events = load_events(config, &args.events)?;
    let ledger = ledger(config, args.events.ledger.as_deref())?;
    let table = compute_rate_table(&events, &ledger, alpha)?;
    if args.json {
        print_json(&table)
    } else {
        print!("{}", rate_table_markdown(&table));
        Ok(())
    }
}

/// Four significant figures, without trailing zeros.
fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = (3 - x.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.digits$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn default_category(group: OutcomeGroup) -> Category {
    match group {
        OutcomeGroup::AnyPropertyDamageOrInjury => Category::InTransport,
        OutcomeGroup::PoliceReported => Category::PoliceReported,
        OutcomeGroup::AnyInjuryReported => Category::AnyInjury,
    }
}

fn scope_for(region: Region) -> Scope {
    match region {
        Region::National => Scope::National,
        Region::Market(loc) => Scope::Location(loc),
        Region::MileageBlend => Scope::MileageBlend,
    }
}

#[derive(Serialize)]
struct CountComparison {
    benchmark: ratebench_core::Benchmark,
    ads_count: EventCount,
    ads_miles: ExposureMiles,
    ads_ipmm: f64,
    ratio: RateRatioResult,
    significant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap: Option<RateRatioResult>,
}

pub fn compare(config: &RunConfig, args: &CompareArgs) -> anyhow::Result<()> {
    let key: BenchmarkKey = args.benchmark.parse()?;
    let registry = registry(config, args.benchmarks.as_deref())?;
    let ledger = ledger(config, args.events.ledger.as_deref())?;
    let benchmark = registry.resolve(&key, &ledger)?;
    let options = CompareOptions {
        alpha: probability(args.ratio_alpha.unwrap_or(config.ratio_alpha))?,
        bootstrap: args.bootstrap_trials.map(|trials| BootstrapOptions {
            trials,
            seed: args.seed.unwrap_or(config.seed),
        }),
    };
    let confidence = 100.0 * (1.0 - options.alpha.value());

    if let Some(n) = args.count {
        let t = miles(&args.miles)?.expect("clap requires miles with --count");
        let (ratio, bootstrap) = ratio_against(EventCount(n), t, &benchmark, &options)?;
        let out = CountComparison {
            ads_ipmm: n as f64 / t.in_millions(),
            benchmark,
            ads_count: EventCount(n),
            ads_miles: t,
            significant: ratio.is_significant(),
            ratio,
            bootstrap,
        };
        if args.json {
            return print_json(&out);
        }
        println!(
            "benchmark  {} ({}, {:.2} IPMM)",
            key,
            out.benchmark.display_label(),
            out.benchmark.ipmm
        );
        println!("ads        {n} events, {:.2} IPMM", out.ads_ipmm);
        print_ratio(&out.ratio, out.bootstrap.as_ref(), confidence);
        return Ok(());
    }

    let category = args.category.unwrap_or_else(|| default_category(key.outcome_group));
    let events = load_events(config, &args.events)?;
    let row = compare_against(&events, &ledger, &benchmark, category, scope_for(key.region), &options)?;
    if args.json {
        return print_json(&row);
    }
    println!(
        "benchmark  {} ({}, {:.2} IPMM)",
        key,
        row.benchmark.display_label(),
        row.benchmark.ipmm
    );
    println!(
        "ads        {} {} events over {}M miles ({}), {:.2} IPMM",
        row.ads_count.get(),
        category.key(),
        row.ads_miles_millions,
        row.location_label,
        row.ads_ipmm
    );
    print_ratio(&row.ratio, row.bootstrap.as_ref(), confidence);
    Ok(())
}

fn print_ratio(ratio: &RateRatioResult, bootstrap: Option<&RateRatioResult>, confidence: f64) {
    let star = if ratio.is_significant() { ", significant" } else { "" };
    println!(
        "ratio      {:.3} ({:.3}, {:.3}) at {confidence}%{star}",
        ratio.point, ratio.lower, ratio.upper
    );
    if let Some(b) = bootstrap {
        println!("bootstrap  ({:.3}, {:.3})", b.lower, b.upper);
    }
}

#[derive(Serialize)]
struct BlendRow {
    source: String,
    outcome_group: OutcomeGroup,
    ipmm: f64,
    effective_vmt_millions: f64,
}

pub fn blend(config: &RunConfig, args: &BlendArgs) -> anyhow::Result<()> {
    let registry = registry(config, args.benchmarks.as_deref())?;
    let ledger = ledger(config, args.ledger.as_deref())?;
    let pairs: Vec<(String, OutcomeGroup)> = match (&args.source, args.group) {
        (Some(source), Some(group)) => vec![(source.clone(), group)],
        _ => {
            let mut seen = BTreeSet::new();
            for b in registry.comparable() {
                if matches!(b.region, Region::Market(_)) {
                    seen.insert((b.source.clone(), b.outcome_group.key()));
                }
            }
            seen.into_iter()
                .map(|(s, g)| (s, g.parse().expect("known group")))
                .collect()
        }
    };
    let explicit = args.source.is_some();
    let mut rows = Vec::new();
    for (source, group) in pairs {
        let parts: Vec<_> = registry.per_location(&source, group).into_iter().cloned().collect();
        match (mileage_blend(&parts, &ledger), effective_blend_vmt(&parts, &ledger)) {
            (Ok(b), Ok(vmt)) => rows.push(BlendRow {
                source,
                outcome_group: group,
                ipmm: b.ipmm,
                effective_vmt_millions: vmt,
            }),
            (Err(e), _) | (_, Err(e)) => {
                if explicit {
                    return Err(e.into());
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::MissingBenchmark("any blendable source".into()).into());
    }
    if args.json {
        return print_json(&rows);
    }
    println!("| Source | Outcome | Blended IPMM | Effective VMT (M) |");
    println!("| --- | --- | ---: | ---: |");
    for r in &rows {
        println!(
            "| {} | {} | {:.2} | {:.0} |",
            r.source,
            r.outcome_group.label(),
            r.ipmm,
            r.effective_vmt_millions
        );
    }
    Ok(())
}

pub fn report(config: &RunConfig, args: &ReportArgs) -> anyhow::Result<()> {
    let events = load_events(config, &args.events)?;
    let study = Study::new(
        events,
        ledger(config, args.events.ledger.as_deref())?,
        registry(config, args.benchmarks.as_deref())?,
    )?;
    let rate_alpha = probability(args.alpha.unwrap_or(config.alpha))?;
    let options = CompareOptions {
        alpha: probability(args.ratio_alpha.unwrap_or(config.ratio_alpha))?,
        bootstrap: None,
    };
    let report = study.report(rate_alpha, &options)?;
    let formats = if args.formats.is_empty() {
        config.formats.clone()
    } else {
        args.formats.clone()
    };
    let dir = pick(args.output_dir.as_deref(), config.paths.output_dir.as_ref()).unwrap_or_else(|| "report".into());
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    for format in formats {
        for file in render_report(&report, format)? {
            let path = dir.join(&file.name);
            std::fs::write(&path, &file.contents).map_err(|e| io_error(&path, e))?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

pub fn validate(config: &RunConfig, args: &ValidateArgs) -> anyhow::Result<()> {
    let registry = registry(config, args.benchmarks.as_deref())?;
    let mut v = config.validation.clone();
    if let Some(a) = args.alpha {
        v.alpha = a;
    }
    if let Some(t) = args.trials {
        v.coverage_trials = t;
        v.bootstrap_trials = t;
    }
    let first = args.seed.unwrap_or(config.seed);
    let mut reports: Vec<ValidationReport> = Vec::new();
    for i in 0..args.sweep.max(1) {
        v.seed = first.wrapping_add(i);
        reports.push(run_validation(&v, &registry)?);
    }
    let total: usize = reports.iter().map(|r| r.checks.len()).sum();
    let failed: usize = reports.iter().flat_map(|r| &r.checks).filter(|c| !c.passed).count();
    if args.json {
        print_json(&reports)?;
    } else {
        for r in &reports {
            println!("seed {}", r.seed);
            for c in &r.checks {
                println!("  {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
        }
    }
    if failed > 0 {
        return Err(ValidationFailed { failed, total }.into());
    }
    Ok(())
}
