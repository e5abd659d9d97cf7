//! Interference detection: excess features, K-means, affected-cell selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::{self, ClusterResult};
use crate::stats;
use crate::twin::{excess_over_baseline_db, KpiBatch, Metric};

pub const DEFAULT_THRESHOLD_DB: f64 = 3.0;
pub const DEFAULT_K: usize = 2;
pub const FEATURE_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub cell_id: String,
    pub mean_excess_db: f64,
    pub std_excess_db: f64,
    pub max_excess_db: f64,
    /// Pearson r against the seed cell.
    pub corr_with_seed: f64,
}

impl FeatureVector {
    fn as_array(&self) -> [f64; FEATURE_DIM] {
        [
            self.mean_excess_db,
            self.std_excess_db,
            self.max_excess_db,
            self.corr_with_seed,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub metric: Metric,
    pub baseline_window: usize,
    /// Cell with the highest mean excess.
    pub seed_cell: String,
    pub raw: Vec<FeatureVector>,
    /// Per-dimension z-scores, aligned with `raw`.
    pub normalized: Vec<Vec<f64>>,
}

fn excess_series(batch: &KpiBatch, metric: Metric, baseline_window: usize) -> Result<Vec<(String, Vec<f64>)>> {
    batch.check_aligned()?;
    batch
        .metric(metric)
        .into_iter()
        .map(|s| Ok((s.cell_id.clone(), excess_over_baseline_db(&s.samples, baseline_window)?)))
        .collect()
}

/// Summary features of each cell's excess series, z-scored per dimension.
/// A dimension with zero variance maps to zeros.
pub fn normalize_features(batch: &KpiBatch, metric: Metric, baseline_window: usize) -> Result<Features> {
    let excess = excess_series(batch, metric, baseline_window)?;
    if excess.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "detection needs at least 2 cells with {metric} series, got {}",
            excess.len()
        )));
    }
    let means: Vec<f64> = excess.iter().map(|(_, e)| stats::mean(e)).collect();
    let seed = (0..means.len())
        .reduce(|a, b| if means[b] > means[a] { b } else { a })
        .expect("non-empty");
    let raw: Vec<FeatureVector> = excess
        .iter()
        .zip(&means)
        .map(|((id, e), m)| FeatureVector {
            cell_id: id.clone(),
            mean_excess_db: *m,
            std_excess_db: stats::std_dev(e),
            max_excess_db: e.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            corr_with_seed: stats::pearson(&excess[seed].1, e),
        })
        .collect();

    let mut normalized = vec![vec![0.0; FEATURE_DIM]; raw.len()];
    for d in 0..FEATURE_DIM {
        let col: Vec<f64> = raw.iter().map(|f| f.as_array()[d]).collect();
        let (mu, sd) = (stats::mean(&col), stats::std_dev(&col));
        if sd > 1e-12 * mu.abs().max(1.0) {
            for (row, v) in normalized.iter_mut().zip(&col) {
                row[d] = (v - mu) / sd;
            }
        }
    }
    Ok(Features {
        metric,
        baseline_window,
        seed_cell: excess[seed].0.clone(),
        raw,
        normalized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEvidence {
    pub cell_id: String,
    pub mean_excess_db: f64,
    pub corr_with_seed: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub metric: Metric,
    pub threshold_db: f64,
    pub k: usize,
    pub seed_cell: String,
    /// Cluster whose centroid has the highest mean-excess coordinate.
    pub candidate_cluster: usize,
    pub anomaly_flag: bool,
    /// Ordered by decreasing mean excess.
    pub affected_cells: Vec<String>,
    pub evidence: Vec<CellEvidence>,
}

/// Members of the highest-excess cluster whose raw mean excess exceeds
/// `threshold_db`.
pub fn detect_affected(features: &Features, clusters: &ClusterResult, threshold_db: f64) -> DetectionResult {
    let candidate = (0..clusters.k)
        .reduce(|a, b| {
            if clusters.centroids[b][0] > clusters.centroids[a][0] {
                b
            } else {
                a
            }
        })
        .unwrap_or(0);
    let mut affected: Vec<&FeatureVector> = features
        .raw
        .iter()
        .zip(&clusters.assignments)
        .filter(|(f, &c)| c == candidate && f.mean_excess_db > threshold_db)
        .map(|(f, _)| f)
        .collect();
    affected.sort_by(|a, b| b.mean_excess_db.total_cmp(&a.mean_excess_db));
    let affected_cells: Vec<String> = affected.iter().map(|f| f.cell_id.clone()).collect();
    DetectionResult {
        metric: features.metric,
        threshold_db,
        k: clusters.k,
        seed_cell: features.seed_cell.clone(),
        candidate_cluster: candidate,
        anomaly_flag: !affected_cells.is_empty(),
        affected_cells,
        evidence: features
            .raw
            .iter()
            .zip(&clusters.assignments)
            .map(|(f, &c)| CellEvidence {
                cell_id: f.cell_id.clone(),
                mean_excess_db: f.mean_excess_db,
                corr_with_seed: f.corr_with_seed,
                cluster: c,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub metric: Metric,
    pub k: usize,
    /// Pick k in {2, 3, 4} by silhouette instead of using `k`.
    pub auto_k: bool,
    pub threshold_db: f64,
    /// Default: the scenario twin setting, else one sixth of the series.
    pub baseline_window: Option<usize>,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            metric: Metric::RTWP,
            k: DEFAULT_K,
            auto_k: false,
            threshold_db: DEFAULT_THRESHOLD_DB,
            baseline_window: None,
            seed: 0,
            max_iter: kmeans::DEFAULT_MAX_ITER,
            tol: kmeans::DEFAULT_TOL,
        }
    }
}

/// Features, clustering and affected-cell selection in one call.
pub fn detect(batch: &KpiBatch, baseline_window: usize, cfg: &DetectConfig) -> Result<(Features, ClusterResult, DetectionResult)> {
    let features = normalize_features(batch, cfg.metric, baseline_window)?;
    let clusters = if cfg.auto_k {
        kmeans::select_k(&features.normalized, &[2, 3, 4], cfg.seed)?
    } else {
        kmeans::kmeans(&features.normalized, cfg.k, cfg.seed, cfg.max_iter, cfg.tol)?
    };
    let result = detect_affected(&features, &clusters, cfg.threshold_db);
    Ok((features, clusters, result))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub cell_ids: Vec<String>,
    pub r: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.cell_ids.iter().position(|c| c == a)?;
        let j = self.cell_ids.iter().position(|c| c == b)?;
        Some(self.r[i][j])
    }
}

/// Pearson correlation of excess series between every pair of cells.
pub fn correlation_matrix(batch: &KpiBatch, metric: Metric, baseline_window: usize) -> Result<CorrelationMatrix> {
    let excess = excess_series(batch, metric, baseline_window)?;
    if excess.len() < 2 {
        return Err(Error::InvalidArgument("correlation needs at least 2 cells".into()));
    }
    let n = excess.len();
    let mut r = vec![vec![0.0; n]; n];
    for i in 0..n {
        r[i][i] = 1.0;
        for j in i + 1..n {
            let v = stats::pearson(&excess[i].1, &excess[j].1);
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok(CorrelationMatrix {
        cell_ids: excess.into_iter().map(|(id, _)| id).collect(),
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twin::KpiSeries;

    fn batch(series: Vec<Vec<f64>>) -> KpiBatch {
        KpiBatch {
            scenario_ref: None,
            series: series
                .into_iter()
                .enumerate()
                .map(|(i, samples)| KpiSeries {
                    cell_id: format!("C{i}"),
                    metric: Metric::RTWP,
                    t0_s: 0.0,
                    dt_s: 60.0,
                    samples,
                })
                .collect(),
        }
    }

    fn wiggle(n: usize, phase: f64) -> Vec<f64> {
        (0..n).map(|k| -102.0 + 0.3 * ((k as f64) * 0.7 + phase).sin()).collect()
    }

    #[test]
    fn identical_series_normalize_to_zero() {
        let b = batch(vec![wiggle(40, 0.0); 5]);
        let f = normalize_features(&b, Metric::RTWP, 10).unwrap();
        assert!(f.normalized.iter().flatten().all(|v| *v == 0.0));
        assert!(f.raw.windows(2).all(|w| w[0].as_array() == w[1].as_array()));
    }

    #[test]
    fn step_cell_has_largest_mean_z() {
        let mut s: Vec<Vec<f64>> = (0..6).map(|i| wiggle(40, i as f64)).collect();
        for v in &mut s[3][10..] {
            *v += 10.0;
        }
        let f = normalize_features(&batch(s), Metric::RTWP, 10).unwrap();
        assert_eq!(f.seed_cell, "C3");
        let z: Vec<f64> = f.normalized.iter().map(|r| r[0]).collect();
        assert!(z.iter().enumerate().all(|(i, v)| i == 3 || *v < z[3]));
    }

    #[test]
    fn flat_batch_is_clean() {
        let b = batch((0..6).map(|i| wiggle(40, i as f64)).collect());
        let (_, _, d) = detect(&b, 10, &DetectConfig::default()).unwrap();
        assert!(!d.anomaly_flag);
        assert!(d.affected_cells.is_empty());
    }

    #[test]
    fn infinite_threshold_is_always_empty() {
        let mut s: Vec<Vec<f64>> = (0..6).map(|i| wiggle(40, i as f64)).collect();
        for v in &mut s[0][10..] {
            *v += 20.0;
        }
        let b = batch(s);
        let cfg = DetectConfig {
            threshold_db: f64::INFINITY,
            ..DetectConfig::default()
        };
        assert!(!detect(&b, 10, &cfg).unwrap().2.anomaly_flag);
        let (_, _, d) = detect(&b, 10, &DetectConfig::default()).unwrap();
        assert_eq!(d.affected_cells, vec!["C0".to_string()]);
    }

    #[test]
    fn constant_offset_does_not_change_detection() {
        let mut s: Vec<Vec<f64>> = (0..6).map(|i| wiggle(40, i as f64)).collect();
        for v in &mut s[2][15..] {
            *v += 8.0;
        }
        let shifted: Vec<Vec<f64>> = s.iter().map(|x| x.iter().map(|v| v + 7.25).collect()).collect();
        let a = detect(&batch(s), 10, &DetectConfig::default()).unwrap().2;
        let b = detect(&batch(shifted), 10, &DetectConfig::default()).unwrap().2;
        assert_eq!(a.affected_cells, b.affected_cells);
    }

    #[test]
    fn correlation_examples() {
        let a = wiggle(30, 0.0);
        let neg: Vec<f64> = a.iter().map(|v| -204.0 - v).collect();
        let flat = vec![-102.0; 30];
        let m = correlation_matrix(&batch(vec![a.clone(), neg, flat, a]), Metric::RTWP, 5).unwrap();
        assert!((m.r[0][0] - 1.0).abs() < 1e-12);
        assert!((m.r[0][3] - 1.0).abs() < 1e-9);
        assert!((m.r[0][1] + 1.0).abs() < 1e-9);
        assert_eq!(m.r[0][2], 0.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.r[i][j], m.r[j][i]);
                assert!((-1.0..=1.0).contains(&m.r[i][j]));
            }
        }
    }

    #[test]
    fn errors() {
        assert!(normalize_features(&batch(vec![wiggle(10, 0.0)]), Metric::RTWP, 3).is_err());
        let ragged = batch(vec![wiggle(10, 0.0), wiggle(12, 0.0)]);
        assert!(correlation_matrix(&ragged, Metric::RTWP, 3).is_err());
    }
}
