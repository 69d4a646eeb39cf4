//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ratebench_core::analysis::{
    published_comparisons, CompareOptions, ComparisonRow, ComparisonSpec, Study, DEFAULT_RATE_ALPHA,
};
use ratebench_core::benchmarks::{effective_blend_vmt, BenchmarkKey};
use ratebench_core::collision::{delta_v_two_body, BodyState};
use ratebench_core::ingest::{events_from_roster, Roster};
use ratebench_core::intervals::{poisson_exact_ci, rate_ratio_ci};
use ratebench_core::specfun::{
    beta_quantile, betaprime_cdf, betaprime_quantile, gamma_quantile, reg_beta_i, reg_gamma_p,
};
use ratebench_core::validation::{bootstrap_check, coverage_checks, ValidationConfig};
use ratebench_core::{Category, EventCount, ExposureMiles, Location, OutcomeGroup, Probability, Region, Scope};

struct Outcome {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn near(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, || {
            format!("{label}: got {got:.4}, want {want} ± {tol}")
        });
    }
}

fn alpha(v: f64) -> Probability {
    Probability::new(v).unwrap()
}

fn study() -> Study {
    Study::published().expect("shipped data loads")
}

const PHX: Location = Location::Phoenix;
const SFO: Location = Location::SanFrancisco;
const LA: Location = Location::LosAngeles;

/// Count, IPMM, lower, upper.
type PrintedCell = (u64, f64, f64, f64);

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let table = study().rate_table(alpha(DEFAULT_RATE_ALPHA)).unwrap();
    let elapsed = start.elapsed();

    let printed: [(Location, [PrintedCell; 5]); 2] = [
        (
            PHX,
            [
                (38, 7.1, 5.0, 9.8),
                (33, 6.2, 4.3, 8.7),
                (17, 3.2, 1.9, 5.1),
                (12, 2.2, 1.2, 3.9),
                (3, 0.6, 0.1, 3.2),
            ],
        ),
        (
            SFO,
            [
                (34, 19.4, 13.4, 27.1),
                (29, 16.5, 11.1, 23.7),
                (14, 8.0, 4.4, 13.4),
                (3, 1.7, 0.4, 5.0),
                (1, 0.6, 0.0, 3.2),
            ],
        ),
    ];
    for (loc, rows) in printed {
        for (category, (n, ipmm, lo, hi)) in Category::ALL.into_iter().zip(rows) {
            let r = table.get(loc, category).unwrap();
            let label = format!("{loc} {}", category.key());
            o.check(r.count.get() == n, || {
                format!("{label}: count {} != {n}", r.count.get())
            });
            o.near(&format!("{label} IPMM"), r.point, ipmm, 0.1);
            if lo == 0.0 {
                // printed as "<0.1"
                o.check(r.lower < 0.1, || format!("{label} lower: {:.4} is not < 0.1", r.lower));
            } else {
                o.near(&format!("{label} lower"), r.lower, lo, 0.2);
            }
            o.near(&format!("{label} upper"), r.upper, hi, 0.2);
        }
    }
    for (category, (n, ipmm)) in Category::ALL
        .into_iter()
        .zip([(1, 21.4), (1, 21.4), (1, 21.4), (0, 0.0), (0, 0.0)])
    {
        let r = table.get(LA, category).unwrap();
        let label = format!("{LA} {}", category.key());
        o.check(r.count.get() == n, || {
            format!("{label}: count {} != {n}", r.count.get())
        });
        o.near(&format!("{label} IPMM"), r.point, ipmm, 0.1);
    }
    o.check(elapsed < Duration::from_secs(1), || {
        format!("runtime {elapsed:?} >= 1 s")
    });
    o.notes.push(format!("{elapsed:.1?}"));
    o
}

/// Printed row: ADS IPMM, ratio point, lower, upper, starred.
type PrintedRow = (f64, f64, f64, f64, bool);

fn printed_comparisons() -> Vec<PrintedRow> {
    vec![
        (6.2, 0.65, 0.43, 0.96, true),
        (16.5, 1.57, 0.99, 2.37, false),
        (8.8, 0.91, 0.67, 1.20, false),
        (8.8, 0.99, 0.72, 1.30, false),
        (19.4, 0.30, 0.19, 0.44, true),
        (10.2, 0.51, 0.38, 0.67, true),
        (3.2, 0.34, 0.18, 0.57, true),
        (8.0, 0.76, 0.38, 1.36, false),
        (4.5, 0.46, 0.30, 0.68, true),
        (4.5, 0.50, 0.32, 0.74, true),
        (8.0, 0.12, 0.06, 0.22, true),
        (4.5, 0.22, 0.14, 0.33, true),
        (2.2, 0.52, 0.24, 0.97, true),
        (1.7, 0.29, 0.05, 0.95, true),
        (2.1, 0.45, 0.23, 0.78, true),
        (2.1, 0.51, 0.26, 0.90, true),
        (0.6, 0.45, 0.07, 1.47, false),
        (0.6, 0.14, 0.002, 0.91, true),
        (0.6, 0.29, 0.06, 0.82, true),
        (0.6, 0.46, 0.10, 1.30, false),
        (0.6, 0.31, 0.05, 1.01, false),
        (0.6, 0.10, 0.001, 0.62, true),
        (0.6, 0.20, 0.04, 0.56, true),
        (0.6, 0.32, 0.07, 0.90, true),
    ]
}

fn computed_comparisons() -> Vec<ComparisonRow> {
    let s = study();
    let specs: Vec<_> = published_comparisons()
        .into_iter()
        .filter(|t| t.id != "los-angeles")
        .collect();
    s.comparison_tables(&specs, &CompareOptions::default())
        .unwrap()
        .into_iter()
        .flat_map(|t| t.rows)
        .collect()
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let rows = computed_comparisons();
    let printed = printed_comparisons();
    o.check(rows.len() == printed.len(), || {
        format!("{} rows, want {}", rows.len(), printed.len())
    });
    for (row, (ipmm, point, lo, hi, star)) in rows.iter().zip(printed) {
        let label = format!("{} {} {}", row.benchmark.key(), row.ads_selection.key(), row.scope);
        // ADS IPMM is printed to one decimal over rounded mileage.
        o.near(&format!("{label} ADS IPMM"), row.ads_ipmm, ipmm, 0.1);
        o.near(&format!("{label} ratio"), row.ratio.point, point, 0.01);
        o.near(&format!("{label} lower"), row.ratio.lower, lo, 0.05);
        o.near(&format!("{label} upper"), row.ratio.upper, hi, 0.05);
        o.check(row.significant == star, || {
            format!("{label}: significant = {}", row.significant)
        });
    }
    o.notes.push(format!(
        "{} rows, ratio alpha {}",
        rows.len(),
        CompareOptions::default().alpha.value()
    ));
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let s = study();
    let opts = CompareOptions::default();
    let police = s
        .compare(
            &ComparisonSpec::new(Category::PoliceReported, "observed", Scope::MileageBlend),
            &opts,
        )
        .unwrap();
    let injury = s
        .compare(
            &ComparisonSpec::new(Category::AnyInjury, "blincoe-adjusted", Scope::MileageBlend),
            &opts,
        )
        .unwrap();
    for (row, pct, ads, human) in [(&police, 55.0, 2.1, 4.68), (&injury, 80.0, 0.6, 2.80)] {
        let label = row.benchmark.key().to_string();
        let reduction = 100.0 * (1.0 - row.ratio.point);
        o.check(reduction.round() == pct, || {
            format!("{label}: reduction {reduction:.2}% != {pct}%")
        });
        o.near(&format!("{label} ADS IPMM"), row.ads_ipmm, ads, 0.05);
        o.near(&format!("{label} human IPMM"), row.benchmark.ipmm, human, 0.01);
        o.check(row.significant, || format!("{label}: not significant"));
        o.notes.push(format!("{reduction:.1}%"));
    }
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let s = study();
    let wanted = [
        ("blincoe-adjusted", OutcomeGroup::AnyPropertyDamageOrInjury, 9.67),
        ("observed", OutcomeGroup::PoliceReported, 4.68),
        ("observed", OutcomeGroup::AnyInjuryReported, 1.92),
        ("blincoe-adjusted", OutcomeGroup::AnyInjuryReported, 2.80),
    ];
    for (source, group, ipmm) in wanted {
        let key = BenchmarkKey::new(source, group, Region::MileageBlend);
        let b = s.registry.resolve(&key, &s.ledger).unwrap();
        o.near(&key.to_string(), b.ipmm, ipmm, 0.01);
    }
    let parts: Vec<_> = s
        .registry
        .per_location("observed", OutcomeGroup::PoliceReported)
        .into_iter()
        .cloned()
        .collect();
    let vmt = effective_blend_vmt(&parts, &s.ledger).unwrap();
    let rel = (vmt - 19_002.0).abs() / 19_002.0;
    o.check(rel <= 0.005, || {
        format!("effective VMT {vmt:.0} is {:.2}% from 19002", rel * 100.0)
    });
    o.notes.push(format!("effective VMT {vmt:.0}M"));
    o
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    let a = alpha(0.05);
    let r1 = poisson_exact_ci(EventCount(1), ExposureMiles::billions(0.01).unwrap(), a).unwrap();
    o.near("0.01B point", r1.point, 100.0, 1e-9);
    o.near("0.01B lower", r1.lower, 3.0, 0.5);
    o.near("0.01B upper", r1.upper, 557.0, 0.5);
    o.check(r1.rate_label() == "IPBM", || "rate not labelled IPBM".into());
    let r2 = poisson_exact_ci(EventCount(1), ExposureMiles::billions(0.1).unwrap(), a).unwrap();
    o.near("0.1B lower", r2.lower, 0.3, 0.05);
    o.near("0.1B upper", r2.upper, 56.0, 0.5);
    o.notes.push(format!(
        "({:.2}, {:.1}) and ({:.3}, {:.2}) IPBM",
        r1.lower, r1.upper, r2.lower, r2.upper
    ));
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let s = study();
    let table = s.rate_table(alpha(DEFAULT_RATE_ALPHA)).unwrap();
    let la = table.get(LA, Category::SgoReported).unwrap();
    o.near("LA IPMM", la.point, 21.4, 0.05);
    o.near("LA lower", la.lower, 0.5, 0.05);
    o.near("LA upper", la.upper, 119.0, 0.5);
    let opts = CompareOptions::default();
    for (category, source) in [
        (Category::PoliceReported, "observed"),
        (Category::AnyInjury, "observed"),
        (Category::AnyInjury, "blincoe-adjusted"),
    ] {
        let row = s
            .compare(&ComparisonSpec::new(category, source, Scope::Location(LA)), &opts)
            .unwrap();
        let label = format!("LA {} vs {source}", category.key());
        o.check(row.ratio.point == 0.0, || format!("{label}: point {}", row.ratio.point));
        o.check(row.ratio.lower == 0.0, || format!("{label}: lower {}", row.ratio.lower));
        o.check(row.ratio.upper.is_finite() && row.ratio.upper > 0.0, || {
            format!("{label}: upper {}", row.ratio.upper)
        });
    }
    o.notes
        .push(format!("{:.2} ({:.3}, {:.1})", la.point, la.lower, la.upper));
    o
}

fn round_trips(cdf: impl Fn(f64) -> f64, x: f64, p: f64, worst: &mut f64) -> bool {
    let err = (cdf(x) - p).abs();
    if err <= 1e-8 {
        *worst = worst.max(err);
        return true;
    }
    let below = f64::from_bits(x.to_bits() - 1);
    let above = f64::from_bits(x.to_bits() + 1);
    let ok = cdf(below) <= p && p <= cdf(above);
    if !ok {
        *worst = worst.max(err);
    }
    ok
}

fn property_suite(o: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let probs = [1e-6, 0.001, 0.025, 0.1, 0.5, 0.9, 0.975, 0.999];

    // Round trips. Where the cdf is so steep that one ulp of x moves it by
    // more than the tolerance, the neighbouring doubles must bracket p.
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for _ in 0..200 {
        let a = 10f64.powf(rng.random_range(-1.0..6.0));
        let b = 10f64.powf(rng.random_range(-1.0..6.0));
        let p = probs[rng.random_range(0..probs.len())];
        let x = gamma_quantile(p, a, 1.0).unwrap();
        if !round_trips(|x| reg_gamma_p(a, x).unwrap(), x, p, &mut worst) {
            bad += 1;
        }
        let x = beta_quantile(p, a, b).unwrap();
        if !round_trips(|x| reg_beta_i(x.min(1.0), a, b).unwrap(), x, p, &mut worst) {
            bad += 1;
        }
        let q = betaprime_quantile(p, a, b).unwrap();
        if !round_trips(|q| betaprime_cdf(q, a, b).unwrap(), q, p, &mut worst) {
            bad += 1;
        }
    }
    o.check(bad == 0, || {
        format!("{bad} round trips off by more than 1e-8 (worst {worst:e})")
    });

    // Symmetry.
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let a = 10f64.powf(rng.random_range(-1.0..4.0));
        let b = 10f64.powf(rng.random_range(-1.0..4.0));
        let x: f64 = rng.random_range(0.0..1.0);
        let s = reg_beta_i(x, a, b).unwrap() + reg_beta_i(1.0 - x, b, a).unwrap();
        worst = worst.max((s - 1.0).abs());
    }
    o.check(worst <= 1e-10, || format!("beta symmetry error {worst:e}"));

    // Monotonicity.
    for a in [0.3, 1.0, 12.0, 107_168.0] {
        let qs: Vec<f64> = probs.iter().map(|&p| gamma_quantile(p, a, 1.0).unwrap()).collect();
        o.check(qs.windows(2).all(|w| w[0] < w[1]), || {
            format!("gamma quantile not increasing at a = {a}")
        });
        let qs: Vec<f64> = probs
            .iter()
            .map(|&p| betaprime_quantile(p, a, 5051.0).unwrap())
            .collect();
        o.check(qs.windows(2).all(|w| w[0] < w[1]), || {
            format!("beta-prime quantile not increasing at a = {a}")
        });
    }

    // b · BetaPrime(a, b) tends to Gamma(a, 1) as b grows.
    for a in [1.0, 3.0, 13.0, 39.0] {
        for p in [0.025, 0.5, 0.975] {
            let b = 1e7;
            let lim = gamma_quantile(p, a, 1.0).unwrap();
            let got = b * betaprime_quantile(p, a, b).unwrap();
            let rel = (got - lim).abs() / lim;
            o.check(rel < 1e-3, || format!("beta-prime limit a={a} p={p}: rel {rel:e}"));
        }
    }

    // With a huge reference count the ratio interval reduces to the exact
    // Poisson interval scaled by the reference rate.
    let t = ExposureMiles::millions(5.34).unwrap();
    let s = ExposureMiles::millions(1e7 / 4.31).unwrap();
    for y in [0u64, 1, 3, 12, 38] {
        let r = rate_ratio_ci(EventCount(y), t, EventCount(10_000_000), s, alpha(0.05)).unwrap();
        let p = poisson_exact_ci(EventCount(y), t, alpha(0.05)).unwrap();
        let ref_rate = 1e7 / s.value();
        let (lo, hi) = (p.lower / ref_rate, p.upper / ref_rate);
        o.check(y == 0 || (r.lower - lo).abs() / lo < 0.02, || {
            format!("Nelson lower at Y={y}: {} vs {lo}", r.lower)
        });
        o.check((r.upper - hi).abs() / hi < 0.02, || {
            format!("Nelson upper at Y={y}: {} vs {hi}", r.upper)
        });
    }

    // Momentum exchange.
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let b1 = BodyState::new(
            rng.random_range(50.0..40_000.0),
            [rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0)],
        )
        .unwrap();
        let b2 = BodyState::new(
            rng.random_range(50.0..40_000.0),
            [rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0)],
        )
        .unwrap();
        let dv = delta_v_two_body(&b1, &b2, rng.random_range(0.0..1.0)).unwrap();
        let (p1, p2) = (b1.mass * dv.dv1, b2.mass * dv.dv2);
        if p1 > 0.0 {
            worst = worst.max((p1 - p2).abs() / p1);
        }
    }
    o.check(worst <= 1e-9, || format!("momentum exchange rel error {worst:e}"));

    // Nesting.
    let events = events_from_roster(&Roster::embedded()).unwrap();
    o.check(events.len() == 73, || format!("{} roster events", events.len()));
    for e in &events {
        o.check(e.check_nesting().is_ok(), || {
            format!("nesting broken for {}", e.report_id())
        });
    }
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    property_suite(&mut o);
    let config = ValidationConfig::default();
    let coverage = coverage_checks(&config).unwrap();
    for c in &coverage {
        o.check(c.coverage >= 0.943, || {
            format!("coverage {:.4} at {} IPMM", c.coverage, c.rate_ipmm)
        });
    }
    let elapsed = start.elapsed();
    o.check(elapsed < Duration::from_secs(60), || {
        format!("runtime {elapsed:?} >= 60 s")
    });
    let covs: Vec<String> = coverage.iter().map(|c| format!("{:.4}", c.coverage)).collect();
    o.notes.push(format!(
        "coverage [{}] over {} trials, {elapsed:.1?}",
        covs.join(", "),
        config.coverage_trials
    ));
    o
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let s = study();
    let b = bootstrap_check(&ValidationConfig::default(), &s.registry).unwrap();
    o.check(b.lower_ok(), || {
        format!(
            "bootstrap lower {:.4} < {:.4} (rate-ratio lower {:.4} less {}%)",
            b.bootstrap_lower,
            b.nelson_lower * (1.0 - b.slack),
            b.nelson_lower,
            b.slack * 100.0
        )
    });
    o.check(b.upper_ok(), || {
        format!(
            "bootstrap upper {:.4} > {:.4} (rate-ratio upper {:.4} plus {}%)",
            b.bootstrap_upper,
            b.nelson_upper * (1.0 + b.slack),
            b.nelson_upper,
            b.slack * 100.0
        )
    });
    o.notes.push(format!(
        "bootstrap ({:.4}, {:.4}) vs rate-ratio ({:.4}, {:.4})",
        b.bootstrap_lower, b.bootstrap_upper, b.nelson_lower, b.nelson_upper
    ));
    o
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("rate table counts, rates and intervals", criterion_1),
        ("comparison table points and intervals", criterion_2),
        ("headline blended reductions", criterion_3),
        ("mileage blends and effective VMT", criterion_4),
        ("per-billion-mile examples", criterion_5),
        ("Los Angeles rate and zero-count ratios", criterion_6),
        ("property suite and coverage", criterion_7),
        ("bootstrap no wider than rate-ratio interval", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        let status = if outcome.failures.is_empty() { "PASS" } else { "FAIL" };
        let notes = if outcome.notes.is_empty() {
            String::new()
        } else {
            format!(" [{}]", outcome.notes.join("; "))
        };
        println!("criterion {}: {status} {name}{notes}", i + 1);
        for f in &outcome.failures {
            println!("    {f}");
        }
        if !outcome.failures.is_empty() {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
