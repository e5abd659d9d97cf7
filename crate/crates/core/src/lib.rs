//! Radio-network planning and interference digital twin.
//!
//! The crate covers the whole loop: TR 38.901 pathloss and link budgets,
//! coverage grids, a synthetic KPI feed, K-means interference detection,
//! interferer localization and frequency-reassignment mitigation.

pub mod antenna;
pub mod coverage;
pub mod detect;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod kmeans;
pub mod localize;
pub mod mitigate;
pub mod pipeline;
pub mod planning;
pub mod power;
pub mod propagation;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod twin;
mod validate;

pub use antenna::AntennaPattern;
pub use coverage::{compute_grid, grid_summary, throughput_mbps, CoverageGrid, GridSummary};
pub use detect::{correlation_matrix, detect_affected, normalize_features, DetectConfig, DetectionResult, FeatureVector};
pub use error::{Error, Result};
pub use geometry::{Area, Point};
pub use kmeans::{kmeans, ClusterResult};
pub use localize::{pathloss_lsq, validate_localization, weighted_centroid, LocalizationEstimate, LocalizationMethod};
pub use mitigate::{apply, recommend, verify, Recommendation, VerificationVerdict};
pub use pipeline::{run_detection, DetectionReport};
pub use planning::{
    cell_radius_m, max_allowed_pathloss_db, receiver_sensitivity_dbm, required_site_count, BudgetTemplate,
    LinkBudget, PlanResult,
};
pub use propagation::{pathloss_db, Condition, PathlossQuery};
pub use report::{compare, DtComparison, DtComparisonRow, MetricsSummary, ReportMetric};
pub use scenario::{
    load_scenario, save_scenario, Band, Environment, Interferer, Scenario, Sector, Site, Violation, ViolationCode,
};
pub use twin::{excess_over_baseline_db, synthesize_kpi, GroundTruth, KpiBatch, KpiSeries, Metric};
