//! Exposure-based crash-rate benchmarking.
//!
//! The crate takes crash reports filed under a standing reporting order,
//! classifies them into nested outcome categories, and compares the resulting
//! per-mile rates against human-driver benchmarks:
//!
//! * [`specfun`]: incomplete gamma/beta functions and their quantiles.
//! * [`intervals`]: exact Poisson rate intervals, rate-ratio intervals from
//!   beta-prime quantiles, a parametric bootstrap and a coverage harness.
//! * [`collision`]: impulse-momentum delta-V estimate used for the low-severity
//!   exclusion.
//! * [`ingest`]: CSV parsing, filtering, deduplication and classification.
//! * [`benchmarks`]: benchmark registry, exposure ledger and mileage blending.
//! * [`analysis`]: rate and comparison tables and report rendering.
//! * [`validation`]: the coverage and bootstrap checks behind `ratebench validate`.

pub mod analysis;
pub mod benchmarks;
pub mod collision;
pub mod error;
pub mod ingest;
pub mod intervals;
pub mod specfun;
pub mod validation;

pub use analysis::{ComparisonRow, RateTable, Scope};
pub use benchmarks::{Benchmark, BenchmarkKey, BenchmarkRegistry, ExposureLedger, OutcomeGroup, Region};
pub use error::{Error, Result};
pub use ingest::{Category, ClassifiedEvent, Location, SgoRecord};
pub use intervals::{EventCount, ExposureMiles, MileUnit, RateEstimate, RateRatioResult};
pub use specfun::{Probability, ShapeParam};
