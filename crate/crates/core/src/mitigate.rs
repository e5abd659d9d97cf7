//! Frequency reassignment for interfered sectors and its verification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coverage::{compute_grid, CoverageGrid};
use crate::detect::DetectionResult;
use crate::error::{Error, Result};
use crate::localize::LocalizationEstimate;
use crate::planning::{cell_radius, max_allowed_pathloss_db, RadiusQuery};
use crate::scenario::{Interferer, Scenario};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandChange {
    pub sector_id: String,
    pub old_band: String,
    pub new_band: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub changes: Vec<BandChange>,
    pub rationale: String,
    /// Predicted mean SINR change (dB) on the affected pixels, from a what-if
    /// run with a source at the estimated position and power.
    pub expected_effect_db: Option<f64>,
}

impl Recommendation {
    pub fn no_op(rationale: impl Into<String>) -> Self {
        Recommendation {
            changes: Vec::new(),
            rationale: rationale.into(),
            expected_effect_db: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    /// The recommendation that undoes this one.
    pub fn inverse(&self) -> Recommendation {
        Recommendation {
            changes: self
                .changes
                .iter()
                .rev()
                .map(|c| BandChange {
                    sector_id: c.sector_id.clone(),
                    old_band: c.new_band.clone(),
                    new_band: c.old_band.clone(),
                })
                .collect(),
            rationale: format!("revert: {}", self.rationale),
            expected_effect_db: self.expected_effect_db.map(|e| -e),
        }
    }

    /// Configuration change set: sector id to new band id.
    pub fn change_set(&self) -> BTreeMap<String, String> {
        self.changes
            .iter()
            .map(|c| (c.sector_id.clone(), c.new_band.clone()))
            .collect()
    }
}

/// Radius used to count co-channel neighbours: the planned cell radius of the
/// band, or the mean inter-site distance when the budget cannot close.
fn neighbour_radius_m(scenario: &Scenario, band_id: &str) -> f64 {
    let Some(band) = scenario.band(band_id) else {
        return 0.0;
    };
    let mapl = max_allowed_pathloss_db(&scenario.planning.budget.with_bandwidth(band.bandwidth_mhz));
    let q = RadiusQuery {
        environment: scenario.environment,
        condition: scenario.planning.condition,
        fc_ghz: band.center_freq_ghz,
        h_bs_m: scenario.planning_h_bs(),
        h_ut_m: scenario.ut.height_m,
    };
    cell_radius(mapl, &q)
        .map(|r| r.radius_m)
        .unwrap_or_else(|_| scenario.mean_inter_site_distance())
}

/// Move each affected sector to the clean band with the fewest co-channel
/// sectors within twice the cell radius. Ties go to declaration order.
/// Neighbour counts use the assignment before any change.
pub fn recommend(
    scenario: &Scenario,
    detection: &DetectionResult,
    estimate: Option<&LocalizationEstimate>,
) -> Result<Recommendation> {
    if !detection.anomaly_flag || detection.affected_cells.is_empty() {
        return Ok(Recommendation::no_op("no anomaly detected; configuration unchanged"));
    }
    let mut affected = Vec::new();
    for id in &detection.affected_cells {
        affected.push(scenario.sector(id).ok_or_else(|| {
            Error::Inconsistent(format!("affected cell \"{id}\" is not in scenario \"{}\"", scenario.name))
        })?);
    }
    let interfered: Vec<&str> = affected.iter().map(|s| s.sector.band_ref.as_str()).collect();
    let candidates: Vec<&str> = scenario
        .bands
        .iter()
        .map(|b| b.id.as_str())
        .filter(|b| !interfered.contains(b))
        .collect();
    if candidates.is_empty() {
        return Ok(Recommendation::no_op(
            "no clean spectrum: every declared band carries the interference",
        ));
    }
    let radii: Vec<f64> = candidates.iter().map(|b| neighbour_radius_m(scenario, b)).collect();

    let mut changes = Vec::new();
    let mut notes = Vec::new();
    for s in &affected {
        let counts: Vec<usize> = candidates
            .iter()
            .zip(&radii)
            .map(|(band, r)| {
                scenario
                    .sectors()
                    .filter(|o| o.sector.id != s.sector.id && o.sector.band_ref == *band)
                    .filter(|o| o.site.position.distance(&s.site.position) <= 2.0 * r)
                    .count()
            })
            .collect();
        let pick = (0..candidates.len())
            .reduce(|a, b| if counts[b] < counts[a] { b } else { a })
            .expect("non-empty candidates");
        notes.push(format!("{} -> {} ({} co-channel neighbours)", s.sector.id, candidates[pick], counts[pick]));
        changes.push(BandChange {
            sector_id: s.sector.id.clone(),
            old_band: s.sector.band_ref.clone(),
            new_band: candidates[pick].to_string(),
        });
    }
    let mut rec = Recommendation {
        changes,
        rationale: format!(
            "external interference on {}; moving affected sectors to the least-loaded clean band: {}",
            dedup(&interfered).join(", "),
            notes.join("; ")
        ),
        expected_effect_db: None,
    };
    if let Some(est) = estimate {
        rec.expected_effect_db = predicted_effect(scenario, &rec, &detection.affected_cells, est, interfered[0])?;
    }
    Ok(rec)
}

fn dedup<'a>(v: &[&'a str]) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for x in v {
        if !out.contains(x) {
            out.push(x);
        }
    }
    out
}

/// What-if on a copy of the scenario whose only interferer is the estimate.
fn predicted_effect(
    scenario: &Scenario,
    rec: &Recommendation,
    affected: &[String],
    estimate: &LocalizationEstimate,
    band: &str,
) -> Result<Option<f64>> {
    let Some(power) = estimate.tx_power_dbm else {
        return Ok(None);
    };
    let mut hypo = scenario.clone();
    hypo.interferers = vec![Interferer {
        id: "estimated".into(),
        position: estimate.position,
        height_m: scenario.ut.height_m.max(1.0 + f64::EPSILON),
        tx_power_dbm: power,
        band_ref: band.to_string(),
        active_intervals: Vec::new(),
    }];
    let post = apply(&hypo, rec)?;
    Ok(verify(&hypo, &post, affected, 0.0)?.delta_db)
}

/// A copy of `scenario` with the recommended band changes applied.
pub fn apply(scenario: &Scenario, rec: &Recommendation) -> Result<Scenario> {
    let mut out = scenario.clone();
    for c in &rec.changes {
        if out.band(&c.new_band).is_none() {
            return Err(Error::Inconsistent(format!("unknown band \"{}\"", c.new_band)));
        }
        let sector = out
            .sites
            .iter_mut()
            .flat_map(|s| s.sectors.iter_mut())
            .find(|s| s.id == c.sector_id)
            .ok_or_else(|| Error::Inconsistent(format!("unknown sector \"{}\"", c.sector_id)))?;
        if sector.band_ref != c.old_band {
            return Err(Error::Inconsistent(format!(
                "sector \"{}\" is on \"{}\", recommendation expects \"{}\"",
                c.sector_id, sector.band_ref, c.old_band
            )));
        }
        sector.band_ref = c.new_band.clone();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorVerdict {
    pub sector_id: String,
    pub pixels: usize,
    pub pre_mean_sinr_db: Option<f64>,
    pub post_mean_sinr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    pub affected_pixels: usize,
    pub pre_mean_sinr_db: Option<f64>,
    pub post_mean_sinr_db: Option<f64>,
    pub delta_db: Option<f64>,
    /// Gain the delta must exceed to count as an improvement.
    pub min_gain_db: f64,
    pub improved: bool,
    /// Affected sectors whose own pixels did not improve.
    pub residual_affected: Vec<String>,
    pub per_sector: Vec<SectorVerdict>,
}

fn mean_over(grid: &CoverageGrid, pixels: &[usize]) -> Option<f64> {
    if pixels.is_empty() {
        return None;
    }
    let v: Vec<f64> = pixels.iter().map(|&i| grid.pixels[i].sinr_db).collect();
    Some(stats::mean(&v))
}

/// Compare mean SINR, interferers active in both runs, over the pixels whose
/// best server before the change is an affected sector.
pub fn verify(pre: &Scenario, post: &Scenario, affected: &[String], min_gain_db: f64) -> Result<VerificationVerdict> {
    let pre_grid = compute_grid(pre, true)?;
    let post_grid = compute_grid(post, true)?;
    verify_grids(&pre_grid, &post_grid, affected, min_gain_db)
}

pub fn verify_grids(
    pre_grid: &CoverageGrid,
    post_grid: &CoverageGrid,
    affected: &[String],
    min_gain_db: f64,
) -> Result<VerificationVerdict> {
    if pre_grid.len() != post_grid.len() {
        return Err(Error::Inconsistent("pre and post grids differ in size".into()));
    }
    let pixels = pre_grid.pixels_served_by(affected);
    let pre_mean = mean_over(pre_grid, &pixels);
    let post_mean = mean_over(post_grid, &pixels);
    let delta = pre_mean.zip(post_mean).map(|(a, b)| b - a);
    let per_sector: Vec<SectorVerdict> = affected
        .iter()
        .map(|id| {
            let px = pre_grid.pixels_served_by(std::slice::from_ref(id));
            SectorVerdict {
                sector_id: id.clone(),
                pixels: px.len(),
                pre_mean_sinr_db: mean_over(pre_grid, &px),
                post_mean_sinr_db: mean_over(post_grid, &px),
            }
        })
        .collect();
    let residual_affected = per_sector
        .iter()
        .filter(|s| match (s.pre_mean_sinr_db, s.post_mean_sinr_db) {
            (Some(a), Some(b)) => b - a <= min_gain_db,
            _ => true,
        })
        .map(|s| s.sector_id.clone())
        .collect();
    Ok(VerificationVerdict {
        affected_pixels: pixels.len(),
        pre_mean_sinr_db: pre_mean,
        post_mean_sinr_db: post_mean,
        delta_db: delta,
        min_gain_db,
        improved: delta.is_some_and(|d| d > min_gain_db),
        residual_affected,
        per_sector,
    })
}
