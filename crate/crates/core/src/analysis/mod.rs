//! Descriptive and inferential statistics over rating records.

mod cmos;
mod correlation;
mod demographics;
mod distributions;
mod faults;
mod sensitivity;
mod summary;
mod timing;

pub use cmos::{cmos_preferences, PreferenceReport, PreferenceRow};
pub use correlation::{average_ranks, pearson, spearman, CorrelationMethod, CorrelationResult};
pub use demographics::{demographics_summary, AgeBand, DemographicsRow, DemographicsTable, RaterProfile, UNDISCLOSED};
pub use distributions::{distributions, quantile, DistributionKey, FiveNumber, KeyDistribution, SystemDistribution};
pub use faults::{fault_rates, revision_rate, FaultReport, RevisionStats, SystemFaults};
pub use sensitivity::{
    default_axis, sensitivity, sensitivity_grid, RatingCube, SensitivityCell, SensitivityConfig,
    SensitivityGrid,
};
pub use summary::{ci95_half_width, summarize, summarize_by, summarize_values, SummaryStat, Z_95};
pub use timing::{timing, timings_from_events, PageTiming, PageTimingStat, TimingReport, VariantTiming};

/// A report that can be flattened to a CSV table.
pub trait Tabular {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

pub(crate) fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
