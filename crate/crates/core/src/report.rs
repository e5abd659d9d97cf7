//! Simulated-versus-twin metric comparison.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coverage::GridSummary;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReportMetric {
    RSSI,
    RTWP,
    SINR,
    ThroughputDL,
    ThroughputUL,
}

impl ReportMetric {
    pub const ALL: [ReportMetric; 5] = [
        ReportMetric::RSSI,
        ReportMetric::RTWP,
        ReportMetric::SINR,
        ReportMetric::ThroughputDL,
        ReportMetric::ThroughputUL,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ReportMetric::RSSI => "RSSI (dBm)",
            ReportMetric::RTWP => "RTWP (dBm)",
            ReportMetric::SINR => "SINR (dB)",
            ReportMetric::ThroughputDL => "DL throughput (Mbit/s)",
            ReportMetric::ThroughputUL => "UL throughput (Mbit/s)",
        }
    }
}

/// Headline metrics of one band. Missing values are `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BandMetrics {
    pub band: String,
    pub rssi_dbm: Option<f64>,
    pub rtwp_dbm: Option<f64>,
    pub sinr_db: Option<f64>,
    /// 95th percentile, which shows the configured cap once SINR saturates.
    pub throughput_dl_mbps: Option<f64>,
    pub throughput_ul_mbps: Option<f64>,
}

impl BandMetrics {
    pub fn get(&self, m: ReportMetric) -> Option<f64> {
        match m {
            ReportMetric::RSSI => self.rssi_dbm,
            ReportMetric::RTWP => self.rtwp_dbm,
            ReportMetric::SINR => self.sinr_db,
            ReportMetric::ThroughputDL => self.throughput_dl_mbps,
            ReportMetric::ThroughputUL => self.throughput_ul_mbps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// "simulated" or "twin".
    pub source: String,
    pub scenario_ref: String,
    pub bands: Vec<BandMetrics>,
}

impl MetricsSummary {
    pub fn band(&self, id: &str) -> Option<&BandMetrics> {
        self.bands.iter().find(|b| b.band == id)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn from_grid(source: &str, scenario: &Scenario, grid: &GridSummary, rtwp: impl Fn(&str) -> Option<f64>) -> MetricsSummary {
    MetricsSummary {
        source: source.into(),
        scenario_ref: scenario.name.clone(),
        bands: grid
            .bands
            .iter()
            .map(|b| BandMetrics {
                band: b.band.clone(),
                rssi_dbm: Some(b.metrics.rssi_dbm.mean),
                rtwp_dbm: rtwp(&b.band),
                sinr_db: Some(b.metrics.sinr_db.mean),
                throughput_dl_mbps: Some(b.metrics.throughput_mbps.p95),
                throughput_ul_mbps: None,
            })
            .collect(),
    }
}

/// Planner view: the coverage grid plus the configured RTWP baseline.
pub fn simulated_summary(scenario: &Scenario, grid: &GridSummary) -> MetricsSummary {
    from_grid("simulated", scenario, grid, |band| {
        scenario.band(band).map(|b| scenario.rtwp_baseline_dbm(b))
    })
}

/// Twin view: the coverage grid with interference plus observed RTWP.
pub fn twin_summary(scenario: &Scenario, grid: &GridSummary, observed_rtwp: &[(String, f64)]) -> MetricsSummary {
    from_grid("twin", scenario, grid, |band| {
        observed_rtwp.iter().find(|(b, _)| b == band).map(|(_, v)| *v)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtComparisonRow {
    pub metric: ReportMetric,
    pub band: String,
    pub simulated: f64,
    pub twin_observed: f64,
    pub abs_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtComparison {
    pub rows: Vec<DtComparisonRow>,
    pub warnings: Vec<String>,
}

/// One row per metric and band present in both summaries.
pub fn compare(simulated: &MetricsSummary, twin: &MetricsSummary) -> Result<DtComparison> {
    fn ids(s: &MetricsSummary) -> Vec<&str> {
        let mut v: Vec<&str> = s.bands.iter().map(|b| b.band.as_str()).collect();
        v.sort_unstable();
        v
    }
    if ids(simulated) != ids(twin) {
        return Err(Error::Inconsistent(format!(
            "band mismatch: simulated has [{}], twin has [{}]",
            ids(simulated).join(", "),
            ids(twin).join(", ")
        )));
    }
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for m in ReportMetric::ALL {
        for sb in &simulated.bands {
            let tb = twin.band(&sb.band).expect("band sets match");
            match (sb.get(m), tb.get(m)) {
                (Some(a), Some(b)) => rows.push(DtComparisonRow {
                    metric: m,
                    band: sb.band.clone(),
                    simulated: a,
                    twin_observed: b,
                    abs_delta: (a - b).abs(),
                }),
                (a, b) => {
                    let missing = match (a, b) {
                        (None, None) => "both summaries",
                        (None, _) => "the simulated summary",
                        _ => "the twin summary",
                    };
                    warnings.push(format!("{m:?} for band {} missing from {missing}; row omitted", sb.band));
                }
            }
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(DtComparison { rows, warnings })
}

impl DtComparison {
    /// Aligned text table: metric, band, simulated, observed, delta.
    pub fn to_text(&self) -> String {
        let header = ["Metric", "Band", "Simulated", "DT observed", "|Delta|"];
        let cells: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.metric.label().to_string(),
                    r.band.clone(),
                    format!("{:.2}", r.simulated),
                    format!("{:.2}", r.twin_observed),
                    format!("{:.2}", r.abs_delta),
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for row in &cells {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, row: [&str; 5]| {
            let _ = write!(out, "{:<w0$}  {:<w1$}", row[0], row[1], w0 = width[0], w1 = width[1]);
            for (c, w) in row[2..].iter().zip(&width[2..]) {
                let _ = write!(out, "  {c:>w$}");
            }
            out.push('\n');
        };
        line(&mut out, header);
        let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut out, [&rule[0], &rule[1], &rule[2], &rule[3], &rule[4]]);
        for row in &cells {
            line(&mut out, [&row[0], &row[1], &row[2], &row[3], &row[4]]);
        }
        out
    }
}
