//! Coverage grid: best server, RSSI, SINR and throughput per pixel.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::AntennaPattern;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::power::{db_to_linear, linear_to_db, noise_floor_dbm};
use crate::propagation::{
    los_probability, pathloss_db, Condition, PathlossQuery, ShadowFadingField, MIN_D2D_M,
};
use crate::rng::keyed_rng;
use crate::scenario::{Band, Environment, LosMode, Scenario};
use crate::stats;

/// Per-sector powers below this are dropped from the pixel lists.
pub const RSRP_PRUNE_FLOOR_DBM: f64 = -130.0;

/// SINR at or below which throughput is zero.
pub const DEFAULT_SINR_FLOOR_DB: f64 = -10.0;

pub const DEFAULT_SPECTRAL_EFFICIENCY: f64 = 1.0;

/// Received power at a pixel: EIRP minus pattern attenuation, pathloss and
/// shadow fading.
pub fn received_power_dbm(
    tx_power_dbm: f64,
    antenna_gain_dbi: f64,
    pattern_attenuation_db: f64,
    pathloss_db: f64,
    shadow_fading_db: f64,
) -> f64 {
    tx_power_dbm + antenna_gain_dbi - pattern_attenuation_db - pathloss_db - shadow_fading_db
}

/// Shannon throughput scaled by `efficiency`, capped, zero at or below the floor.
pub fn throughput_mbps_with(
    sinr_db: f64,
    bandwidth_mhz: f64,
    cap_mbps: f64,
    efficiency: f64,
    floor_db: f64,
) -> f64 {
    if sinr_db.is_nan() || sinr_db <= floor_db {
        return 0.0;
    }
    (efficiency * bandwidth_mhz * (1.0 + db_to_linear(sinr_db)).log2()).min(cap_mbps)
}

pub fn throughput_mbps(sinr_db: f64, bandwidth_mhz: f64, cap_mbps: f64) -> f64 {
    throughput_mbps_with(
        sinr_db,
        bandwidth_mhz,
        cap_mbps,
        DEFAULT_SPECTRAL_EFFICIENCY,
        DEFAULT_SINR_FLOOR_DB,
    )
}

/// Received power of one sector at one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorPower {
    /// Index into [`CoverageGrid::sector_ids`].
    pub sector: u32,
    pub rsrp_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    /// Index into [`CoverageGrid::sector_ids`].
    pub best_server: Option<u32>,
    /// Sectors above [`RSRP_PRUNE_FLOOR_DBM`], strongest first.
    pub rsrp: Vec<SectorPower>,
    /// Total co-band power per resource block of the serving band.
    pub rssi_dbm: f64,
    pub sinr_db: f64,
    pub throughput_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageGrid {
    /// Lower-left corner of the area.
    pub origin: Point,
    pub resolution_m: f64,
    pub width: usize,
    pub height: usize,
    pub interferers_active: bool,
    pub sector_ids: Vec<String>,
    /// Band id of each sector, aligned with `sector_ids`.
    pub sector_bands: Vec<String>,
    /// Row-major, starting at the lower-left pixel.
    pub pixels: Vec<Pixel>,
}

impl CoverageGrid {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixel_center(&self, index: usize) -> Point {
        pixel_center(self.origin, self.resolution_m, self.width, index)
    }

    pub fn best_server_id(&self, index: usize) -> Option<&str> {
        self.pixels[index]
            .best_server
            .map(|s| self.sector_ids[s as usize].as_str())
    }

    pub fn pixel_area_m2(&self) -> f64 {
        self.resolution_m * self.resolution_m
    }

    /// Area where RSSI is at least `threshold_dbm`.
    pub fn rssi_footprint_m2(&self, threshold_dbm: f64) -> f64 {
        self.pixels
            .iter()
            .filter(|p| p.best_server.is_some() && p.rssi_dbm >= threshold_dbm)
            .count() as f64
            * self.pixel_area_m2()
    }

    /// Pixel indices whose best server is one of `sector_ids`.
    pub fn pixels_served_by(&self, sector_ids: &[String]) -> Vec<usize> {
        let wanted: Vec<u32> = self
            .sector_ids
            .iter()
            .enumerate()
            .filter(|(_, id)| sector_ids.contains(id))
            .map(|(i, _)| i as u32)
            .collect();
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.best_server.is_some_and(|b| wanted.contains(&b)))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_m", "y_m", "best_server", "rssi_dbm", "sinr_db", "throughput_mbps"])?;
        for (i, p) in self.pixels.iter().enumerate() {
            let c = self.pixel_center(i);
            w.write_record([
                format!("{:.2}", c.x),
                format!("{:.2}", c.y),
                self.best_server_id(i).unwrap_or("").to_string(),
                format!("{:.2}", p.rssi_dbm),
                format!("{:.2}", p.sinr_db),
                format!("{:.2}", p.throughput_mbps),
            ])?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn pixel_center(origin: Point, res: f64, width: usize, index: usize) -> Point {
    let (row, col) = (index / width, index % width);
    Point::new(
        origin.x + (col as f64 + 0.5) * res,
        origin.y + (row as f64 + 0.5) * res,
    )
}

/// Pixel counts along x and y. Partial trailing pixels count as whole.
pub fn grid_dimensions(scenario: &Scenario) -> (usize, usize) {
    let n = |extent: f64| {
        let raw = extent / scenario.grid_resolution_m;
        // tolerate floating noise when the extent is an exact multiple
        ((raw - 1e-9).ceil() as usize).max(1)
    };
    (n(scenario.area.width()), n(scenario.area.height()))
}

/// How link conditions and fading are drawn for a scenario.
#[derive(Debug, Clone)]
pub struct LinkModel {
    pub seed: u64,
    pub environment: Environment,
    pub los_mode: LosMode,
    pub fading: ShadowFadingField,
    pub h_ut_m: f64,
}

impl LinkModel {
    pub fn for_scenario(s: &Scenario) -> Self {
        let fading = if !s.propagation.shadow_fading {
            ShadowFadingField::disabled()
        } else if let Some(sigma) = s.propagation.shadow_sigma_db {
            ShadowFadingField::uniform(s.seed, sigma)
        } else {
            ShadowFadingField::for_environment(s.seed, s.environment)
        };
        LinkModel {
            seed: s.seed,
            environment: s.environment,
            los_mode: s.propagation.los_mode,
            fading: ShadowFadingField {
                decorrelation_m: s.propagation.decorrelation_m,
                ..fading
            },
            h_ut_m: s.ut.height_m,
        }
    }

    /// LOS state of the link from `tx_id` to pixel `pixel`, frozen by seed.
    pub fn condition(&self, tx_id: &str, pixel: u64, d2d_m: f64) -> Condition {
        match self.los_mode {
            LosMode::AlwaysLos => Condition::Los,
            LosMode::AlwaysNlos => Condition::Nlos,
            LosMode::Probabilistic => {
                let p = los_probability(d2d_m, self.h_ut_m, self.environment);
                let u: f64 = keyed_rng(self.seed, "los", tx_id, pixel).random();
                if u < p {
                    Condition::Los
                } else {
                    Condition::Nlos
                }
            }
        }
    }

    /// Pathloss plus shadow fading from a transmitter to a pixel.
    pub fn loss_db(&self, tx_id: &str, pixel: u64, d2d_m: f64, fc_ghz: f64, h_tx_m: f64) -> Result<f64> {
        let condition = self.condition(tx_id, pixel, d2d_m);
        let pl = pathloss_db(&PathlossQuery {
            d2d_m: d2d_m.max(MIN_D2D_M),
            fc_ghz,
            h_bs_m: h_tx_m,
            h_ut_m: self.h_ut_m,
            environment: self.environment,
            condition,
        })?;
        Ok(pl + self.fading.shadow_fading_db(tx_id, pixel, condition))
    }
}

struct Tx<'a> {
    id: &'a str,
    position: Point,
    height_m: f64,
    band: usize,
    fc_ghz: f64,
    eirp_dbm: f64,
    /// Boresight and pattern; `None` for omnidirectional emitters.
    pattern: Option<(f64, AntennaPattern)>,
}

impl Tx<'_> {
    fn power_at(&self, model: &LinkModel, pixel: u64, at: Point) -> Result<f64> {
        let d = self.position.distance(&at);
        let loss = model.loss_db(self.id, pixel, d, self.fc_ghz, self.height_m)?;
        let att = match &self.pattern {
            Some((az, p)) if d > 0.0 => p.attenuation_toward(*az, self.position.bearing_to(&at)),
            _ => 0.0,
        };
        Ok(self.eirp_dbm - att - loss)
    }
}

/// Evaluate the coverage grid. With `interferers_active` every scenario
/// interferer transmits for the whole evaluation.
pub fn compute_grid(scenario: &Scenario, interferers_active: bool) -> Result<CoverageGrid> {
    if scenario.sector_count() == 0 {
        return Err(Error::InvalidArgument("scenario has no sectors".into()));
    }
    let band_idx = |id: &str| {
        scenario
            .band_index(id)
            .ok_or_else(|| Error::Inconsistent(format!("unknown band \"{id}\"")))
    };
    let mut sectors = Vec::with_capacity(scenario.sector_count());
    for s in scenario.sectors() {
        let b = band_idx(&s.sector.band_ref)?;
        sectors.push(Tx {
            id: &s.sector.id,
            position: s.site.position,
            height_m: s.site.height_m,
            band: b,
            fc_ghz: scenario.bands[b].center_freq_ghz,
            eirp_dbm: s.sector.tx_power_dbm + s.sector.antenna_gain_dbi - scenario.ut.body_loss_db,
            pattern: Some((s.sector.azimuth_deg, AntennaPattern::for_sector(s.sector))),
        });
    }
    let mut interferers = Vec::new();
    if interferers_active {
        for i in &scenario.interferers {
            let b = band_idx(&i.band_ref)?;
            interferers.push(Tx {
                id: &i.id,
                position: i.position,
                height_m: i.height_m,
                band: b,
                fc_ghz: scenario.bands[b].center_freq_ghz,
                eirp_dbm: i.tx_power_dbm - scenario.ut.body_loss_db,
                pattern: None,
            });
        }
    }

    let noise_mw: Vec<f64> = scenario
        .bands
        .iter()
        .map(|b| db_to_linear(noise_floor_dbm(b.bandwidth_mhz, scenario.ut.noise_figure_db)))
        .collect();
    let (width, height) = grid_dimensions(scenario);
    let origin = Point::new(scenario.area.min_x, scenario.area.min_y);
    let res = scenario.grid_resolution_m;
    let model = LinkModel::for_scenario(scenario);
    // lexicographic rank for best-server ties
    let mut order: Vec<usize> = (0..sectors.len()).collect();
    order.sort_by(|&a, &b| sectors[a].id.cmp(sectors[b].id));
    let mut lex_rank = vec![0usize; sectors.len()];
    for (rank, &i) in order.iter().enumerate() {
        lex_rank[i] = rank;
    }

    let ctx = PixelContext {
        bands: &scenario.bands,
        sectors: &sectors,
        interferers: &interferers,
        noise_mw: &noise_mw,
        lex_rank: &lex_rank,
        model: &model,
    };
    let pixels = (0..width * height)
        .into_par_iter()
        .map(|i| {
            let at = pixel_center(origin, res, width, i);
            ctx.evaluate(i as u64, at).map_err(|e| {
                Error::Domain(format!(
                    "pixel {i} (x = {:.2} m, y = {:.2} m): {e}",
                    at.x, at.y
                ))
            })
        })
        .collect::<Vec<Result<Pixel>>>()
        .into_iter()
        // sequential so the reported error is always the lowest failing pixel
        .collect::<Result<Vec<_>>>()?;

    Ok(CoverageGrid {
        origin,
        resolution_m: res,
        width,
        height,
        interferers_active,
        sector_ids: sectors.iter().map(|s| s.id.to_string()).collect(),
        sector_bands: sectors.iter().map(|s| scenario.bands[s.band].id.clone()).collect(),
        pixels,
    })
}

struct PixelContext<'a> {
    bands: &'a [Band],
    sectors: &'a [Tx<'a>],
    interferers: &'a [Tx<'a>],
    noise_mw: &'a [f64],
    lex_rank: &'a [usize],
    model: &'a LinkModel,
}

impl PixelContext<'_> {
    fn evaluate(&self, pixel: u64, at: Point) -> Result<Pixel> {
        let powers = self
            .sectors
            .iter()
            .map(|s| s.power_at(self.model, pixel, at))
            .collect::<Result<Vec<f64>>>()?;
        let best = (0..powers.len())
            .reduce(|a, b| {
                let stronger = powers[b] > powers[a]
                    || (powers[b] == powers[a] && self.lex_rank[b] < self.lex_rank[a]);
                if stronger {
                    b
                } else {
                    a
                }
            })
            .expect("at least one sector");
        let band = self.sectors[best].band;

        let mut co_band_mw = 0.0;
        for (s, p) in self.sectors.iter().zip(&powers) {
            if s.band == band {
                co_band_mw += db_to_linear(*p);
            }
        }
        let mut external_mw = 0.0;
        for i in self.interferers.iter().filter(|i| i.band == band) {
            external_mw += db_to_linear(i.power_at(self.model, pixel, at)?);
        }
        let noise = self.noise_mw[band];
        let signal_mw = db_to_linear(powers[best]);
        let sinr_db = powers[best] - linear_to_db(co_band_mw - signal_mw + external_mw + noise);
        let b = &self.bands[band];
        let per_rb_db = 10.0 * (b.bandwidth_mhz / b.rssi_measurement_bw_mhz()).log10();
        let rssi_dbm = linear_to_db(co_band_mw + external_mw + noise) - per_rb_db;

        let mut rsrp: Vec<SectorPower> = powers
            .iter()
            .enumerate()
            .filter(|(_, p)| **p >= RSRP_PRUNE_FLOOR_DBM)
            .map(|(i, p)| SectorPower {
                sector: i as u32,
                rsrp_dbm: *p,
            })
            .collect();
        rsrp.sort_by(|a, b| b.rsrp_dbm.total_cmp(&a.rsrp_dbm).then(a.sector.cmp(&b.sector)));

        Ok(Pixel {
            best_server: Some(best as u32),
            rsrp,
            rssi_dbm,
            sinr_db,
            throughput_mbps: throughput_mbps(sinr_db, b.bandwidth_mhz, b.throughput_cap_mbps),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub mean: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Distribution {
            mean: stats::mean(values),
            p5: stats::percentile_sorted(&sorted, 5.0),
            p50: stats::percentile_sorted(&sorted, 50.0),
            p95: stats::percentile_sorted(&sorted, 95.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub pixels: usize,
    pub rssi_dbm: Distribution,
    pub sinr_db: Distribution,
    pub throughput_mbps: Distribution,
}

impl MetricSummary {
    fn of<'a>(pixels: impl Iterator<Item = &'a Pixel>) -> Option<Self> {
        let (mut rssi, mut sinr, mut tput) = (Vec::new(), Vec::new(), Vec::new());
        for p in pixels {
            rssi.push(p.rssi_dbm);
            sinr.push(p.sinr_db);
            tput.push(p.throughput_mbps);
        }
        if rssi.is_empty() {
            return None;
        }
        Some(MetricSummary {
            pixels: rssi.len(),
            rssi_dbm: Distribution::of(&rssi),
            sinr_db: Distribution::of(&sinr),
            throughput_mbps: Distribution::of(&tput),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub band: String,
    #[serde(flatten)]
    pub metrics: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub interferers_active: bool,
    pub overall: MetricSummary,
    /// Pixels grouped by the band of their best server, in first-seen sector order.
    pub bands: Vec<BandSummary>,
}

/// Statistics over pixels that have a best server.
pub fn grid_summary(grid: &CoverageGrid) -> Result<GridSummary> {
    let covered = || grid.pixels.iter().filter(|p| p.best_server.is_some());
    let overall = MetricSummary::of(covered())
        .ok_or_else(|| Error::InvalidArgument("coverage grid has no covered pixels".into()))?;
    let mut band_ids: Vec<&str> = Vec::new();
    for b in &grid.sector_bands {
        if !band_ids.contains(&b.as_str()) {
            band_ids.push(b);
        }
    }
    let bands = band_ids
        .into_iter()
        .filter_map(|band| {
            MetricSummary::of(
                covered().filter(|p| grid.sector_bands[p.best_server.unwrap() as usize] == band),
            )
            .map(|metrics| BandSummary {
                band: band.to_string(),
                metrics,
            })
        })
        .collect();
    Ok(GridSummary {
        interferers_active: grid.interferers_active,
        overall,
        bands,
    })
}
