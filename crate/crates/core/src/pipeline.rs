//! Detection pipeline: KPI batch in, affected cells and position estimates out.

use serde::{Deserialize, Serialize};

use crate::detect::{self, DetectConfig, DetectionResult, FeatureVector};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kmeans::ClusterResult;
use crate::localize::{
    estimate_tx_power_dbm, pathloss_lsq, validate_localization, weighted_centroid, LocalizationCheck,
    LocalizationEstimate, LsqModel, Observation,
};
use crate::power::{db_to_linear, linear_to_db};
use crate::stats;
use crate::scenario::Scenario;
use crate::twin::{GroundTruth, KpiBatch, KpiSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub interferer_id: String,
    pub truth: Point,
    pub weighted_centroid: Option<LocalizationCheck>,
    pub pathloss_lsq: Option<LocalizationCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub scenario_ref: String,
    pub baseline_window: usize,
    pub detection: DetectionResult,
    pub features: Vec<FeatureVector>,
    pub clusters: ClusterResult,
    pub weighted_centroid: Option<LocalizationEstimate>,
    pub pathloss_lsq: Option<LocalizationEstimate>,
    /// Why LSQ was skipped or failed, if it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lsq_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
}

impl DetectionReport {
    /// The estimate handed to mitigation.
    pub fn estimate(&self) -> Option<&LocalizationEstimate> {
        self.weighted_centroid.as_ref()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Mean interference power (dBm) over the samples flagged active, after
/// removing the baseline median in the linear domain.
fn interference_level_dbm(series: &KpiSeries, window: usize, active: &[bool]) -> f64 {
    let base = db_to_linear(stats::median(&series.samples[..window]));
    let picked: Vec<f64> = series
        .samples
        .iter()
        .zip(active)
        .filter(|(_, a)| **a)
        .map(|(v, _)| (db_to_linear(*v) - base).max(0.0))
        .collect();
    if picked.is_empty() {
        return f64::NEG_INFINITY;
    }
    linear_to_db(stats::mean(&picked))
}

pub fn run_detection(scenario: &Scenario, batch: &KpiBatch, cfg: &DetectConfig) -> Result<DetectionReport> {
    for id in batch.cell_ids() {
        if scenario.sector(id).is_none() {
            return Err(Error::Inconsistent(format!(
                "KPI cell \"{id}\" is not a sector of scenario \"{}\"",
                scenario.name
            )));
        }
    }
    let n = batch.samples_per_series();
    let window = cfg
        .baseline_window
        .unwrap_or_else(|| scenario.twin.default_baseline_window(n));
    let (features, clusters, detection) = detect::detect(batch, window, cfg)?;

    let mut report = DetectionReport {
        scenario_ref: scenario.name.clone(),
        baseline_window: window,
        detection,
        features: features.raw.clone(),
        clusters,
        weighted_centroid: None,
        pathloss_lsq: None,
        lsq_note: None,
        validation: None,
    };
    if !report.detection.anomaly_flag {
        return Ok(report);
    }

    let affected: Vec<_> = report
        .detection
        .affected_cells
        .iter()
        .map(|id| scenario.sector(id).expect("checked above"))
        .collect();
    let excess_obs: Vec<Observation> = affected
        .iter()
        .map(|s| Observation {
            cell_id: s.sector.id.clone(),
            position: s.site.position,
            value_db: features
                .raw
                .iter()
                .find(|f| f.cell_id == s.sector.id)
                .expect("affected cells come from features")
                .mean_excess_db,
        })
        .collect();
    let mut wc = weighted_centroid(&excess_obs)?;

    // samples where the strongest cell shows the interferer
    let seed_series = batch
        .get(&features.seed_cell, cfg.metric)
        .expect("seed cell has a series");
    let seed_excess = crate::twin::excess_over_baseline_db(&seed_series.samples, window)?;
    let mut active: Vec<bool> = seed_excess
        .iter()
        .enumerate()
        .map(|(k, e)| k >= window && *e > cfg.threshold_db)
        .collect();
    if !active.iter().any(|a| *a) {
        active = (0..n).map(|k| k >= window).collect();
    }
    let level_obs: Vec<Observation> = affected
        .iter()
        .filter_map(|s| {
            let series = batch.get(&s.sector.id, cfg.metric)?;
            let level = interference_level_dbm(series, window, &active) - s.sector.antenna_gain_dbi;
            level.is_finite().then(|| Observation {
                cell_id: s.sector.id.clone(),
                position: s.site.position,
                value_db: level,
            })
        })
        .collect();

    let band = scenario
        .band(&affected[0].sector.band_ref)
        .ok_or_else(|| Error::Inconsistent("affected sector has an unknown band".into()))?;
    let model = LsqModel {
        environment: scenario.environment,
        fc_ghz: band.center_freq_ghz,
        h_bs_m: affected.iter().map(|s| s.site.height_m).sum::<f64>() / affected.len() as f64,
        h_src_m: scenario.ut.height_m,
    };
    if !level_obs.is_empty() {
        wc.tx_power_dbm = Some(estimate_tx_power_dbm(&level_obs, wc.position, &model));
    }
    if level_obs.len() >= 3 {
        match pathloss_lsq(&level_obs, wc.tx_power_dbm.unwrap_or(0.0), &model) {
            Ok(est) => {
                if let Some(w) = &est.warning {
                    log::warn!("{w}");
                }
                report.pathloss_lsq = Some(est);
            }
            Err(e) => report.lsq_note = Some(e.to_string()),
        }
    } else {
        report.lsq_note = Some(format!(
            "pathloss LSQ needs at least 3 cells with measurable interference, got {}",
            level_obs.len()
        ));
    }
    report.weighted_centroid = Some(wc);
    Ok(report)
}

/// Compare the estimates with the nearest ground-truth interferer on the
/// affected band.
pub fn validate_report(report: &DetectionReport, scenario: &Scenario, truth: &GroundTruth, radius_m: f64) -> Option<ValidationReport> {
    let wc = report.weighted_centroid.as_ref()?;
    let band = scenario
        .sector(report.detection.affected_cells.first()?)?
        .sector
        .band_ref
        .clone();
    let target = truth
        .interferers
        .iter()
        .filter(|i| i.band_ref == band)
        .min_by(|a, b| {
            a.position
                .distance(&wc.position)
                .total_cmp(&b.position.distance(&wc.position))
        })?;
    Some(ValidationReport {
        interferer_id: target.id.clone(),
        truth: target.position,
        weighted_centroid: Some(validate_localization(wc, target.position, radius_m)),
        pathloss_lsq: report
            .pathloss_lsq
            .as_ref()
            .map(|e| validate_localization(e, target.position, radius_m)),
    })
}

/// Default acceptance radius: half the mean inter-site distance.
pub fn default_localization_radius_m(scenario: &Scenario) -> f64 {
    0.5 * scenario.mean_inter_site_distance()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::twin::synthesize_kpi;

    #[test]
    fn demo_flags_cells_near_the_interferer() {
        let s = fixtures::demo();
        let out = synthesize_kpi(&s, s.twin.duration_s, s.twin.dt_s, 4).unwrap();
        let report = run_detection(&s, &out.batch, &DetectConfig::default()).unwrap();
        assert!(report.detection.anomaly_flag);
        let v = validate_report(&report, &s, &out.ground_truth, default_localization_radius_m(&s)).unwrap();
        assert!(v.weighted_centroid.unwrap().within_radius);
    }

    #[test]
    fn unknown_cell_is_rejected() {
        let s = fixtures::demo();
        let mut out = synthesize_kpi(&s, 3600.0, 60.0, 1).unwrap();
        out.batch.series[0].cell_id = "nope".into();
        assert!(matches!(
            run_detection(&s, &out.batch, &DetectConfig::default()),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn clean_run_has_no_estimate() {
        let mut s = fixtures::demo();
        s.interferers.clear();
        let out = synthesize_kpi(&s, 21600.0, 60.0, 2).unwrap();
        let report = run_detection(&s, &out.batch, &DetectConfig::default()).unwrap();
        assert!(!report.detection.anomaly_flag);
        assert!(report.estimate().is_none());
    }
}
