//! Coverage and bootstrap checks for the interval procedures.

use serde::{Deserialize, Serialize};

use crate::benchmarks::{BenchmarkRegistry, OutcomeGroup, Region};
use crate::error::{Error, Result};
use crate::ingest::Location;
use crate::intervals::{bootstrap_ratio_ci, rate_ratio_ci, simulate_coverage, EventCount, ExposureMiles};
use crate::specfun::Probability;

/// Coverage may fall this far below the nominal level before a check fails.
pub const COVERAGE_TOLERANCE: f64 = 0.007;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub seed: u64,
    pub alpha: f64,
    pub coverage_trials: usize,
    pub rates_ipmm: Vec<f64>,
    pub miles_millions: f64,
    /// Defaults to `1 - alpha - COVERAGE_TOLERANCE`.
    pub coverage_threshold: Option<f64>,
    pub bootstrap_trials: usize,
    /// Relative slack allowed on each bootstrap bound.
    pub bootstrap_slack: f64,
    /// Observed count and miles for the bootstrap check.
    pub bootstrap_count: u64,
    pub bootstrap_miles_millions: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            seed: 20_231_031,
            alpha: 0.05,
            coverage_trials: 20_000,
            rates_ipmm: vec![0.2, 1.0, 5.0, 20.0],
            miles_millions: 5.34,
            coverage_threshold: None,
            bootstrap_trials: 20_000,
            bootstrap_slack: 0.02,
            bootstrap_count: 12,
            bootstrap_miles_millions: 5.34,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageEstimate {
    pub rate_ipmm: f64,
    pub coverage: f64,
    pub threshold: f64,
}

pub fn coverage_checks(config: &ValidationConfig) -> Result<Vec<CoverageEstimate>> {
    let alpha = Probability::new(config.alpha)?;
    let miles = ExposureMiles::millions(config.miles_millions)?;
    let threshold = config
        .coverage_threshold
        .unwrap_or(1.0 - config.alpha - COVERAGE_TOLERANCE);
    config
        .rates_ipmm
        .iter()
        .enumerate()
        .map(|(i, &rate)| {
            let seed = config.seed.wrapping_add(i as u64);
            let coverage = simulate_coverage(rate, miles, alpha, config.coverage_trials, seed)?;
            Ok(CoverageEstimate {
                rate_ipmm: rate,
                coverage,
                threshold,
            })
        })
        .collect()
}

/// Bootstrap and rate-ratio intervals at the same configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapComparison {
    pub nelson_lower: f64,
    pub nelson_upper: f64,
    pub bootstrap_lower: f64,
    pub bootstrap_upper: f64,
    pub slack: f64,
}

impl BootstrapComparison {
    pub fn lower_ok(&self) -> bool {
        self.bootstrap_lower >= self.nelson_lower * (1.0 - self.slack)
    }

    pub fn upper_ok(&self) -> bool {
        self.bootstrap_upper <= self.nelson_upper * (1.0 + self.slack)
    }
}

/// Compares the bootstrap interval with the rate-ratio interval against the
/// Phoenix observed police-reported benchmark. The benchmark count's standard
/// error is taken as its square root.
pub fn bootstrap_check(config: &ValidationConfig, registry: &BenchmarkRegistry) -> Result<BootstrapComparison> {
    let alpha = Probability::new(config.alpha)?;
    let b = registry.lookup(
        "observed",
        OutcomeGroup::PoliceReported,
        Region::Market(Location::Phoenix),
    )?;
    let y = EventCount(config.bootstrap_count);
    let t = ExposureMiles::millions(config.bootstrap_miles_millions)?;
    let x = b.reconstructed_count();
    let s = b.exposure()?;
    let nelson = rate_ratio_ci(y, t, x, s, alpha)?;
    let xf = x.get() as f64;
    let boot = bootstrap_ratio_ci(y, t, xf, xf.sqrt(), s, alpha, config.bootstrap_trials, config.seed)?;
    Ok(BootstrapComparison {
        nelson_lower: nelson.lower,
        nelson_upper: nelson.upper,
        bootstrap_lower: boot.lower,
        bootstrap_upper: boot.upper,
        slack: config.bootstrap_slack,
    })
}

pub fn run_validation(config: &ValidationConfig, registry: &BenchmarkRegistry) -> Result<ValidationReport> {
    if config.rates_ipmm.is_empty() {
        return Err(Error::Config("validation needs at least one rate level".into()));
    }
    let mut checks = Vec::new();
    for c in coverage_checks(config)? {
        checks.push(CheckResult {
            name: format!("coverage at {} IPMM", c.rate_ipmm),
            passed: c.coverage >= c.threshold,
            detail: format!("{:.4} (threshold {:.4})", c.coverage, c.threshold),
        });
    }
    let b = bootstrap_check(config, registry)?;
    checks.push(CheckResult {
        name: "bootstrap lower bound within rate-ratio lower bound".into(),
        passed: b.lower_ok(),
        detail: format!(
            "bootstrap {:.4} vs rate-ratio {:.4} ({}% slack)",
            b.bootstrap_lower,
            b.nelson_lower,
            b.slack * 100.0
        ),
    });
    checks.push(CheckResult {
        name: "bootstrap upper bound within rate-ratio upper bound".into(),
        passed: b.upper_ok(),
        detail: format!(
            "bootstrap {:.4} vs rate-ratio {:.4} ({}% slack)",
            b.bootstrap_upper,
            b.nelson_upper,
            b.slack * 100.0
        ),
    });
    Ok(ValidationReport {
        seed: config.seed,
        checks,
    })
}
