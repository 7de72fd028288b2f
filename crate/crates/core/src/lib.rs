//! Monte Carlo modelling of low-voltage feeder loads from quarter-hour
//! smart-meter profiles.
//!
//! Feeders are built by drawing connections at random from a labelled
//! population of year-long profiles. For every draw the summed feeder load
//! gives a peak, the quarter-hour at which it occurs and a simultaneity
//! factor; repeating this thousands of times yields the distributions that
//! the rest of the crate aggregates, differences and maps onto the calendar.
//!
//! Modules:
//! - [`profile_store`]: ingestion, DST normalization, export and per-profile panels.
//! - [`weather`]: hourly temperature and irradiation series.
//! - [`subsets`]: the labelled populations and their summary statistics.
//! - [`sampler`]: feeder sampling, the feeder kernel and report aggregation.
//! - [`timing`]: when peaks happen, feeder envelopes and figure export.
//! - [`synth`]: a deterministic synthetic population generator.

pub mod calendar;
pub mod error;
pub mod profile_store;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod subsets;
mod svg;
pub mod synth;
pub mod timing;
pub mod weather;

pub use calendar::{DayRange, QUARTERS_PER_DAY};
pub use error::{Error, Result};
pub use profile_store::{Profile, ProfileLabels, ProfileSet};
pub use sampler::{Direction, DirectionSelection, FeederMetrics, SamplingConfig, SamplingReport};
pub use subsets::{SubsetSpec, SubsetSummary};
pub use timing::{FeederEnvelope, PeakTimeDistribution};
pub use weather::WeatherSeries;
