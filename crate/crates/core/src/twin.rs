//! Synthetic OSS feed: per-cell RTWP and RSSI time series.
//!
//! The generator returns the observable [`KpiBatch`] and the [`GroundTruth`]
//! as separate values. Detection code only ever receives the batch.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::AntennaPattern;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::power::{db_to_linear, linear_to_db};
use crate::propagation::{pathloss_db, Condition, PathlossQuery, MIN_D2D_M};
use crate::rng::stream_rng;
use crate::scenario::{Interferer, Interval, Scenario, SectorRef};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    RTWP,
    RSSI,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::RTWP => "RTWP",
            Metric::RSSI => "RSSI",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "RTWP" => Ok(Metric::RTWP),
            "RSSI" => Ok(Metric::RSSI),
            other => Err(Error::Parse(format!("unknown metric \"{other}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSeries {
    pub cell_id: String,
    pub metric: Metric,
    pub t0_s: f64,
    pub dt_s: f64,
    pub samples: Vec<f64>,
}

impl KpiSeries {
    pub fn timestamp(&self, k: usize) -> f64 {
        self.t0_s + k as f64 * self.dt_s
    }
}

/// Aligned KPI series for a set of cells. Contains no ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiBatch {
    pub scenario_ref: Option<String>,
    /// Ordered by cell, then metric.
    pub series: Vec<KpiSeries>,
}

impl KpiBatch {
    /// Series of one metric in batch order.
    pub fn metric(&self, metric: Metric) -> Vec<&KpiSeries> {
        self.series.iter().filter(|s| s.metric == metric).collect()
    }

    pub fn get(&self, cell_id: &str, metric: Metric) -> Option<&KpiSeries> {
        self.series
            .iter()
            .find(|s| s.metric == metric && s.cell_id == cell_id)
    }

    pub fn cell_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for s in &self.series {
            if !ids.contains(&s.cell_id.as_str()) {
                ids.push(&s.cell_id);
            }
        }
        ids
    }

    pub fn samples_per_series(&self) -> usize {
        self.series.first().map_or(0, |s| s.samples.len())
    }

    /// Every series shares t0, dt and length.
    pub fn check_aligned(&self) -> Result<()> {
        let Some(first) = self.series.first() else {
            return Ok(());
        };
        for s in &self.series {
            if s.samples.len() != first.samples.len()
                || (s.dt_s - first.dt_s).abs() > 1e-9
                || (s.t0_s - first.t0_s).abs() > 1e-9
            {
                return Err(Error::Inconsistent(format!(
                    "series {}/{} is not aligned with {}/{}",
                    s.cell_id, s.metric, first.cell_id, first.metric
                )));
            }
            if s.samples.iter().any(|v| !v.is_finite()) {
                return Err(Error::Inconsistent(format!(
                    "series {}/{} has non-finite samples",
                    s.cell_id, s.metric
                )));
            }
        }
        Ok(())
    }

    /// CSV `timestamp_s,cell_id,metric,value_dbm`, time-major.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.check_aligned()?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp_s", "cell_id", "metric", "value_dbm"])?;
        for k in 0..self.samples_per_series() {
            for s in &self.series {
                w.write_record([
                    format!("{}", s.timestamp(k)),
                    s.cell_id.clone(),
                    s.metric.to_string(),
                    format!("{:.4}", s.samples[k]),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv is utf-8"))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<KpiBatch> {
        #[derive(Deserialize)]
        struct Row {
            timestamp_s: f64,
            cell_id: String,
            metric: String,
            value_dbm: f64,
        }
        let mut order: Vec<(String, Metric)> = Vec::new();
        let mut rows: HashMap<(String, Metric), Vec<(f64, f64)>> = HashMap::new();
        for (line, rec) in csv::Reader::from_reader(input).deserialize::<Row>().enumerate() {
            let row = rec.map_err(|e| Error::Parse(format!("KPI CSV row {}: {e}", line + 2)))?;
            let key = (row.cell_id, row.metric.parse::<Metric>()?);
            if !row.value_dbm.is_finite() || !row.timestamp_s.is_finite() {
                return Err(Error::Parse(format!("KPI CSV row {}: non-finite value", line + 2)));
            }
            rows.entry(key.clone())
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push((row.timestamp_s, row.value_dbm));
        }
        let mut series = Vec::with_capacity(order.len());
        for key in order {
            let mut pts = rows.remove(&key).expect("key recorded");
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let t0 = pts[0].0;
            let dt = if pts.len() > 1 { pts[1].0 - pts[0].0 } else { 1.0 };
            for (k, (t, _)) in pts.iter().enumerate() {
                if dt <= 0.0 || (t - (t0 + k as f64 * dt)).abs() > 1e-6 * dt.max(1.0) {
                    return Err(Error::Inconsistent(format!(
                        "series {}/{} has non-uniform timestamps",
                        key.0, key.1
                    )));
                }
            }
            series.push(KpiSeries {
                cell_id: key.0,
                metric: key.1,
                t0_s: t0,
                dt_s: dt,
                samples: pts.into_iter().map(|(_, v)| v).collect(),
            });
        }
        let batch = KpiBatch {
            scenario_ref: None,
            series,
        };
        batch.check_aligned()?;
        Ok(batch)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<KpiBatch> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthInterferer {
    pub id: String,
    pub position: Point,
    pub tx_power_dbm: f64,
    pub band_ref: String,
    /// Empty means active for the whole run.
    pub active_intervals: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTruth {
    pub cell_id: String,
    pub band_ref: String,
    pub rtwp_baseline_dbm: f64,
    /// Combined level of all co-band interferers when active; `None` when no
    /// interferer shares the band.
    pub interference_dbm: Option<f64>,
}

/// What the generator knows and detection must not see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario_ref: String,
    pub seed: u64,
    pub interferers: Vec<TruthInterferer>,
    pub cells: Vec<CellTruth>,
}

impl GroundTruth {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<GroundTruth> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Whether any interferer on `band_ref` transmits at `t`.
    pub fn band_active(&self, band_ref: &str, t: f64) -> bool {
        self.interferers.iter().any(|i| {
            i.band_ref == band_ref
                && (i.active_intervals.is_empty() || i.active_intervals.iter().any(|iv| iv.contains(t)))
        })
    }
}

/// Level at which an interferer reaches a sector's receiver, NLOS, through
/// the sector pattern. Negative infinity when the bands differ.
pub fn interference_at_cell_dbm(scenario: &Scenario, interferer: &Interferer, sector: SectorRef<'_>) -> Result<f64> {
    if interferer.band_ref != sector.sector.band_ref {
        return Ok(f64::NEG_INFINITY);
    }
    let band = scenario
        .band(&interferer.band_ref)
        .ok_or_else(|| Error::Inconsistent(format!("unknown band \"{}\"", interferer.band_ref)))?;
    let site = sector.site.position;
    let d = site.distance(&interferer.position);
    let pl = pathloss_db(&PathlossQuery {
        d2d_m: d.max(MIN_D2D_M),
        fc_ghz: band.center_freq_ghz,
        h_bs_m: sector.site.height_m,
        h_ut_m: interferer.height_m,
        environment: scenario.environment,
        condition: Condition::Nlos,
    })?;
    let att = if d > 0.0 {
        AntennaPattern::for_sector(sector.sector)
            .attenuation_toward(sector.sector.azimuth_deg, site.bearing_to(&interferer.position))
    } else {
        0.0
    };
    Ok(interferer.tx_power_dbm - pl + sector.sector.antenna_gain_dbi - att)
}

/// Number of samples for a run; the last sample starts before `duration_s`.
pub fn sample_count(duration_s: f64, dt_s: f64) -> usize {
    ((duration_s / dt_s) + 1e-9).floor() as usize
}

pub struct SynthesizedKpi {
    pub batch: KpiBatch,
    pub ground_truth: GroundTruth,
}

/// Generate RTWP and RSSI series for every sector.
///
/// RTWP = 10·log10(N + L(t) + Σ active interference) + measurement noise, with
/// N the thermal part of the baseline and L(t) a diurnal load term with
/// Gaussian jitter whose median brings N + L up to the baseline. RSSI adds a
/// serving-traffic term that follows the same load profile.
pub fn synthesize_kpi(scenario: &Scenario, duration_s: f64, dt_s: f64, seed: u64) -> Result<SynthesizedKpi> {
    if !(dt_s > 0.0 && dt_s.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt_s}")));
    }
    if !(duration_s >= dt_s && duration_s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "duration must be >= dt, got duration {duration_s} s and dt {dt_s} s"
        )));
    }
    if scenario.sector_count() == 0 {
        return Err(Error::InvalidArgument("scenario has no sectors".into()));
    }
    let cfg = &scenario.twin;
    let n = sample_count(duration_s, dt_s);
    let times: Vec<f64> = (0..n).map(|k| k as f64 * dt_s).collect();

    let mut cells = Vec::with_capacity(scenario.sector_count());
    let mut plans = Vec::with_capacity(scenario.sector_count());
    for sector in scenario.sectors() {
        let band = scenario
            .band(&sector.sector.band_ref)
            .ok_or_else(|| Error::Inconsistent(format!("unknown band \"{}\"", sector.sector.band_ref)))?;
        let baseline = scenario.rtwp_baseline_dbm(band);
        let mut sources = Vec::new();
        for i in &scenario.interferers {
            let level = interference_at_cell_dbm(scenario, i, sector)?;
            if level.is_finite() {
                sources.push((i, db_to_linear(level)));
            }
        }
        let combined = sources.iter().map(|(_, mw)| mw).sum::<f64>();
        cells.push(CellTruth {
            cell_id: sector.sector.id.clone(),
            band_ref: band.id.clone(),
            rtwp_baseline_dbm: baseline,
            interference_dbm: (!sources.is_empty()).then(|| linear_to_db(combined)),
        });
        plans.push((sector.sector.id.as_str(), baseline, sources));
    }

    let noise_normal = |sigma: f64| Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()));
    let jitter = noise_normal(cfg.load_jitter_db)?;
    let meas = noise_normal(cfg.measurement_noise_db)?;

    let series: Vec<[KpiSeries; 2]> = plans
        .par_iter()
        .map(|(cell_id, baseline, sources)| {
            let thermal = db_to_linear(baseline - cfg.load_rise_db);
            let load_median = db_to_linear(*baseline) - thermal;
            let traffic_median = db_to_linear(baseline + cfg.rssi_traffic_rise_db);
            let mut load_rng = stream_rng(seed, "twin-load", cell_id);
            let mut rtwp_rng = stream_rng(seed, "twin-rtwp", cell_id);
            let mut rssi_rng = stream_rng(seed, "twin-rssi", cell_id);
            let mut rtwp = Vec::with_capacity(n);
            let mut rssi = Vec::with_capacity(n);
            for &t in &times {
                let phase = 2.0 * std::f64::consts::PI * t / cfg.diurnal_period_s;
                let swing = db_to_linear(cfg.load_amplitude_db * phase.sin() + jitter.sample(&mut load_rng));
                let external: f64 = sources
                    .iter()
                    .filter(|(i, _)| i.is_active(t))
                    .map(|(_, mw)| mw)
                    .sum();
                let uplink = thermal + load_median * swing + external;
                rtwp.push(linear_to_db(uplink) + meas.sample(&mut rtwp_rng));
                rssi.push(linear_to_db(uplink + traffic_median * swing) + meas.sample(&mut rssi_rng));
            }
            let mk = |metric, samples| KpiSeries {
                cell_id: cell_id.to_string(),
                metric,
                t0_s: 0.0,
                dt_s,
                samples,
            };
            [mk(Metric::RTWP, rtwp), mk(Metric::RSSI, rssi)]
        })
        .collect();

    Ok(SynthesizedKpi {
        batch: KpiBatch {
            scenario_ref: Some(scenario.name.clone()),
            series: series.into_iter().flatten().collect(),
        },
        ground_truth: GroundTruth {
            scenario_ref: scenario.name.clone(),
            seed,
            interferers: scenario
                .interferers
                .iter()
                .map(|i| TruthInterferer {
                    id: i.id.clone(),
                    position: i.position,
                    tx_power_dbm: i.tx_power_dbm,
                    band_ref: i.band_ref.clone(),
                    active_intervals: i.active_intervals.clone(),
                })
                .collect(),
            cells,
        },
    })
}

/// Twin run with the duration and step configured in the scenario.
pub fn synthesize_default(scenario: &Scenario, seed: u64) -> Result<SynthesizedKpi> {
    synthesize_kpi(scenario, scenario.twin.duration_s, scenario.twin.dt_s, seed)
}

/// Samples minus the median of the first `baseline_window` samples.
pub fn excess_over_baseline_db(samples: &[f64], baseline_window: usize) -> Result<Vec<f64>> {
    if baseline_window == 0 || baseline_window >= samples.len() {
        return Err(Error::InvalidArgument(format!(
            "baseline window {baseline_window} must be in [1, {})",
            samples.len()
        )));
    }
    let base = stats::median(&samples[..baseline_window]);
    Ok(samples.iter().map(|v| v - base).collect())
}

/// Per-band mean RTWP over samples where no co-band interferer transmits.
pub fn quiet_mean_rtwp(batch: &KpiBatch, truth: &GroundTruth) -> Vec<(String, f64)> {
    let mut acc: Vec<(String, f64, usize)> = Vec::new();
    for s in batch.metric(Metric::RTWP) {
        let Some(cell) = truth.cells.iter().find(|c| c.cell_id == s.cell_id) else {
            continue;
        };
        let idx = match acc.iter().position(|(b, _, _)| *b == cell.band_ref) {
            Some(i) => i,
            None => {
                acc.push((cell.band_ref.clone(), 0.0, 0));
                acc.len() - 1
            }
        };
        for (k, v) in s.samples.iter().enumerate() {
            if !truth.band_active(&cell.band_ref, s.timestamp(k)) {
                acc[idx].1 += v;
                acc[idx].2 += 1;
            }
        }
    }
    acc.into_iter()
        .filter(|(_, _, n)| *n > 0)
        .map(|(b, sum, n)| (b, sum / n as f64))
        .collect()
}
