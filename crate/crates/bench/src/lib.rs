//! Monte Carlo experiments over the test densities and their CSV reports.

pub mod experiments;
pub mod presets;
pub mod report;

pub use experiments::{
    run_coverage, run_figure2, run_rates, run_sharpening, CoverageConfig, CoverageReport, Figure2Config,
    RateBasis, RateStudy, RatesConfig, SharpeningReport,
};
pub use presets::BasisPreset;
pub use report::{ExperimentReport, ReportRow};

/// Written into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
