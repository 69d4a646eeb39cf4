//! Rate and rate-ratio inference.
//!
//! * [`poisson_exact_ci`]: exact (Garwood) interval for an incident rate,
//!   `[qgamma(α/2, n) / m, qgamma(1 - α/2, n + 1) / m]`.
//! * [`rate_ratio_ci`]: interval for the ratio of two Poisson rates
//!   `(Y/t) / (X/s)` from beta-prime quantiles,
//!   `[s/t · qβ'(α/2; Y, X+1), s/t · qβ'(1 - α/2; Y+1, X)]`. It stays defined
//!   when `Y = 0`.
//! * [`bootstrap_ratio_ci`] and [`simulate_coverage`]: seeded Monte-Carlo
//!   procedures whose output does not depend on the number of worker threads.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{betaprime_quantile, gamma_quantile, Probability};

/// Minimum number of Monte-Carlo trials accepted by the seeded procedures.
pub const MIN_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MileUnit {
    Millions,
    Billions,
}

impl MileUnit {
    /// Millions of miles in one unit.
    fn in_millions(self) -> f64 {
        match self {
            MileUnit::Millions => 1.0,
            MileUnit::Billions => 1000.0,
        }
    }

    /// Label for a rate expressed per one unit of exposure.
    pub fn rate_label(self) -> &'static str {
        match self {
            MileUnit::Millions => "IPMM",
            MileUnit::Billions => "IPBM",
        }
    }

    fn name(self) -> &'static str {
        match self {
            MileUnit::Millions => "million miles",
            MileUnit::Billions => "billion miles",
        }
    }
}

/// Miles driven, carried together with the unit they are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureMiles {
    miles: f64,
    unit: MileUnit,
}

impl ExposureMiles {
    pub fn new(miles: f64, unit: MileUnit) -> Result<Self> {
        if miles > 0.0 && miles.is_finite() {
            Ok(Self { miles, unit })
        } else {
            Err(Error::domain(format!(
                "exposure must be positive, got {miles} {}",
                unit.name()
            )))
        }
    }

    pub fn millions(miles: f64) -> Result<Self> {
        Self::new(miles, MileUnit::Millions)
    }

    pub fn billions(miles: f64) -> Result<Self> {
        Self::new(miles, MileUnit::Billions)
    }

    pub fn value(&self) -> f64 {
        self.miles
    }

    pub fn unit(&self) -> MileUnit {
        self.unit
    }

    pub fn in_millions(&self) -> f64 {
        self.miles * self.unit.in_millions()
    }

    pub fn to_unit(&self, unit: MileUnit) -> Self {
        if unit == self.unit {
            return *self;
        }
        let miles = match (self.unit, unit) {
            (MileUnit::Millions, MileUnit::Billions) => self.miles / 1000.0,
            _ => self.miles * 1000.0,
        };
        Self { miles, unit }
    }
}

impl fmt::Display for ExposureMiles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.miles, self.unit.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventCount(pub u64);

impl EventCount {
    pub fn get(self) -> u64 {
        self.0
    }

    fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl From<u64> for EventCount {
    fn from(n: u64) -> Self {
        EventCount(n)
    }
}

/// An incident rate with its two-sided interval. Rates are per one unit of
/// `exposure` (per million miles for IPMM, per billion for IPBM).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: Probability,
    pub count: EventCount,
    pub exposure: ExposureMiles,
}

impl RateEstimate {
    /// The same estimate re-expressed per `unit` of exposure.
    pub fn in_unit(&self, unit: MileUnit) -> RateEstimate {
        let exposure = self.exposure.to_unit(unit);
        let factor = unit.in_millions() / self.exposure.unit().in_millions();
        RateEstimate {
            point: self.point * factor,
            lower: self.lower * factor,
            upper: self.upper * factor,
            exposure,
            ..*self
        }
    }

    pub fn rate_label(&self) -> &'static str {
        self.exposure.unit().rate_label()
    }

    pub fn contains(&self, rate: f64) -> bool {
        self.lower <= rate && rate <= self.upper
    }
}

/// Ratio of an observed rate to a reference rate, with interval and the
/// relative difference `reduction = point - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRatioResult {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: Probability,
    pub reduction: f64,
}

impl RateRatioResult {
    /// True when the interval excludes a ratio of one.
    pub fn is_significant(&self) -> bool {
        self.lower > 1.0 || self.upper < 1.0
    }
}

/// Relative difference in percent: `100 · (ratio - 1)` for the point and both
/// bounds. Negative values are reductions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeDifference {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

fn two_sided_alpha(alpha: Probability) -> Result<f64> {
    let a = alpha.value();
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(Error::domain(format!("alpha {a} must lie strictly between 0 and 1")))
    }
}

/// Exact Poisson interval for `n` events over exposure `m`.
pub fn poisson_exact_ci(n: EventCount, m: ExposureMiles, alpha: Probability) -> Result<RateEstimate> {
    let a = two_sided_alpha(alpha)?;
    let miles = m.value();
    let count = n.as_f64();
    let lower = gamma_quantile(a / 2.0, count, 1.0)? / miles;
    let upper = gamma_quantile(1.0 - a / 2.0, count + 1.0, 1.0)? / miles;
    Ok(RateEstimate {
        point: count / miles,
        lower,
        upper,
        alpha,
        count: n,
        exposure: m,
    })
}

/// Interval for the ratio of `y` events over `t` to `x` events over `s`.
///
/// `t` and `s` must share a unit. `x = 0` is rejected: the reference rate
/// would be zero.
pub fn rate_ratio_ci(
    y: EventCount,
    t: ExposureMiles,
    x: EventCount,
    s: ExposureMiles,
    alpha: Probability,
) -> Result<RateRatioResult> {
    let a = two_sided_alpha(alpha)?;
    if t.unit() != s.unit() {
        return Err(Error::UnitMismatch(t.unit().name(), s.unit().name()));
    }
    if x.0 == 0 {
        return Err(Error::domain("reference event count must be positive"));
    }
    let (yf, xf) = (y.as_f64(), x.as_f64());
    let scale = s.value() / t.value();
    let point = (yf / t.value()) / (xf / s.value());
    let lower = scale * betaprime_quantile(a / 2.0, yf, xf + 1.0)?;
    let upper = scale * betaprime_quantile(1.0 - a / 2.0, yf + 1.0, xf)?;
    Ok(RateRatioResult {
        point,
        lower,
        upper,
        alpha,
        reduction: point - 1.0,
    })
}

pub fn relative_difference(ratio: &RateRatioResult) -> RelativeDifference {
    let pct = |r: f64| 100.0 * (r - 1.0);
    RelativeDifference {
        point: pct(ratio.point),
        lower: pct(ratio.lower),
        upper: pct(ratio.upper),
    }
}

/// Independent generator for trial `trial` under `seed`: same key, one
/// ChaCha stream per trial.
pub(crate) fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        Err(Error::domain(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )))
    } else {
        Ok(())
    }
}

/// Linear-interpolation percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Parametric bootstrap for the rate ratio.
///
/// Each trial draws the observed count from `Poisson(y)` and the reference
/// count from a normal with mean `x_mean` and standard error `x_se`,
/// truncated to positive values. The interval is the empirical
/// `(α/2, 1 - α/2)` percentile pair of the simulated ratios.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_ratio_ci(
    y: EventCount,
    t: ExposureMiles,
    x_mean: f64,
    x_se: f64,
    s: ExposureMiles,
    alpha: Probability,
    trials: usize,
    seed: u64,
) -> Result<RateRatioResult> {
    let a = two_sided_alpha(alpha)?;
    check_trials(trials)?;
    if t.unit() != s.unit() {
        return Err(Error::UnitMismatch(t.unit().name(), s.unit().name()));
    }
    if !(x_mean > 0.0 && x_mean.is_finite()) {
        return Err(Error::domain(format!("reference mean count {x_mean} must be positive")));
    }
    if !(x_se > 0.0 && x_se.is_finite()) {
        return Err(Error::domain(format!(
            "reference standard error {x_se} must be positive"
        )));
    }
    let reference = Normal::new(x_mean, x_se).map_err(|e| Error::domain(e.to_string()))?;
    let observed = (y.0 > 0)
        .then(|| Poisson::new(y.as_f64()))
        .transpose()
        .map_err(|e| Error::domain(e.to_string()))?;
    let (tm, sm) = (t.value(), s.value());

    let mut ratios: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let ads = observed.map_or(0.0, |d| d.sample(&mut rng));
            let bench = loop {
                let v = reference.sample(&mut rng);
                if v > 0.0 {
                    break v;
                }
            };
            (ads / tm) / (bench / sm)
        })
        .collect();
    ratios.sort_by(f64::total_cmp);

    let point = (y.as_f64() / tm) / (x_mean / sm);
    Ok(RateRatioResult {
        point,
        lower: percentile(&ratios, a / 2.0),
        upper: percentile(&ratios, 1.0 - a / 2.0),
        alpha,
        reduction: point - 1.0,
    })
}

/// Fraction of simulated studies whose exact Poisson interval covers
/// `true_rate`. Each trial draws `n ~ Poisson(true_rate · miles)`; the rate is
/// per unit of `miles`.
pub fn simulate_coverage(
    true_rate: f64,
    miles: ExposureMiles,
    alpha: Probability,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    two_sided_alpha(alpha)?;
    check_trials(trials)?;
    if !(true_rate > 0.0 && true_rate.is_finite()) {
        return Err(Error::domain(format!("true rate {true_rate} must be positive")));
    }
    let mean = true_rate * miles.value();
    let draws = Poisson::new(mean).map_err(|e| Error::domain(e.to_string()))?;

    // Intervals for every plausible count, computed once.
    let n_max = (mean + 12.0 * mean.sqrt() + 20.0).ceil() as u64;
    let table: Vec<(f64, f64)> = (0..=n_max)
        .into_par_iter()
        .map(|n| poisson_exact_ci(EventCount(n), miles, alpha).map(|r| (r.lower, r.upper)))
        .collect::<Result<_>>()?;

    let covered = (0..trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<u64> {
            let mut rng = trial_rng(seed, trial);
            let n = draws.sample(&mut rng) as u64;
            let (lo, hi) = match table.get(n as usize) {
                Some(&bounds) => bounds,
                None => {
                    let r = poisson_exact_ci(EventCount(n), miles, alpha)?;
                    (r.lower, r.upper)
                }
            };
            Ok(u64::from(lo <= true_rate && true_rate <= hi))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(covered as f64 / trials as f64)
}
