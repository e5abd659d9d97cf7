//! Network data model and scenario files.
//!
//! A scenario is the single description of the network used by both the
//! planning/simulation side and the twin side. Files are JSON with a
//! `schema_version` field; omitted optional fields take the defaults listed
//! on each field below.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Area, Point};
use crate::planning::BudgetTemplate;
use crate::propagation::Condition;

pub const SCHEMA_VERSION: u32 = 1;

/// Positions may sit outside the area by this fraction of the area diagonal.
pub const OUT_OF_AREA_MARGIN_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Environment {
    UMa,
    UMi,
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Environment::UMa => f.write_str("UMa"),
            Environment::UMi => f.write_str("UMi"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Duplex {
    #[default]
    TDD,
    FDD,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub area: Area,
    pub environment: Environment,
    pub grid_resolution_m: f64,
    /// Default 0.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ut: UserTerminalProfile,
    pub bands: Vec<Band>,
    pub sites: Vec<Site>,
    /// Default: none.
    #[serde(default)]
    pub interferers: Vec<Interferer>,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub planning: PlanningConfig,
    #[serde(default)]
    pub twin: TwinConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub id: String,
    pub center_freq_ghz: f64,
    pub bandwidth_mhz: f64,
    /// Default TDD.
    #[serde(default)]
    pub duplex: Duplex,
    /// Peak DL throughput cap. Default 1000 Mbps.
    #[serde(default = "default_throughput_cap")]
    pub throughput_cap_mbps: f64,
    /// Subcarrier spacing. Default 30 kHz below 7.125 GHz, 120 kHz above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scs_khz: Option<f64>,
}

fn default_throughput_cap() -> f64 {
    1000.0
}

impl Band {
    pub fn subcarrier_spacing_khz(&self) -> f64 {
        self.scs_khz
            .unwrap_or(if self.center_freq_ghz < 7.125 { 30.0 } else { 120.0 })
    }

    /// RSSI is reported per resource block (12 subcarriers).
    pub fn rssi_measurement_bw_mhz(&self) -> f64 {
        12.0 * self.subcarrier_spacing_khz() / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub position: Point,
    /// Antenna height above ground. Default 25 m.
    #[serde(default = "default_site_height")]
    pub height_m: f64,
    pub sectors: Vec<Sector>,
}

fn default_site_height() -> f64 {
    25.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub id: String,
    pub azimuth_deg: f64,
    pub band_ref: String,
    /// Default 43 dBm.
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
    /// Default 17 dBi.
    #[serde(default = "default_antenna_gain")]
    pub antenna_gain_dbi: f64,
    /// Default 65°.
    #[serde(default = "default_beamwidth")]
    pub beamwidth_3db_deg: f64,
    /// Default 20 dB.
    #[serde(default = "default_front_to_back")]
    pub front_to_back_db: f64,
}

fn default_tx_power() -> f64 {
    43.0
}
fn default_antenna_gain() -> f64 {
    17.0
}
fn default_beamwidth() -> f64 {
    65.0
}
fn default_front_to_back() -> f64 {
    20.0
}

/// Half-open activity interval `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval(pub f64, pub f64);

impl Interval {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.0 && t < self.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interferer {
    pub id: String,
    pub position: Point,
    /// Default 1.5 m.
    #[serde(default = "default_ut_height")]
    pub height_m: f64,
    pub tx_power_dbm: f64,
    pub band_ref: String,
    /// Empty means active for the whole run. Default empty.
    #[serde(default)]
    pub active_intervals: Vec<Interval>,
}

impl Interferer {
    pub fn is_active(&self, t: f64) -> bool {
        self.active_intervals.is_empty() || self.active_intervals.iter().any(|i| i.contains(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserTerminalProfile {
    /// Default 1.5 m.
    #[serde(default = "default_ut_height")]
    pub height_m: f64,
    /// Default 7 dB.
    #[serde(default = "default_noise_figure")]
    pub noise_figure_db: f64,
    /// Default 0 dB.
    #[serde(default)]
    pub body_loss_db: f64,
}

fn default_ut_height() -> f64 {
    1.5
}
fn default_noise_figure() -> f64 {
    7.0
}

impl Default for UserTerminalProfile {
    fn default() -> Self {
        UserTerminalProfile {
            height_m: default_ut_height(),
            noise_figure_db: default_noise_figure(),
            body_loss_db: 0.0,
        }
    }
}

/// How the LOS/NLOS state of each link is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LosMode {
    /// Drawn once per (transmitter, pixel) from the LOS probability.
    #[default]
    Probabilistic,
    AlwaysLos,
    AlwaysNlos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    #[serde(default)]
    pub los_mode: LosMode,
    /// Default true.
    #[serde(default = "default_true")]
    pub shadow_fading: bool,
    /// Overrides the per-condition sigma when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow_sigma_db: Option<f64>,
    /// Reserved for spatially correlated fading. Default 50 m.
    #[serde(default = "default_decorrelation")]
    pub decorrelation_m: f64,
}

fn default_true() -> bool {
    true
}
fn default_decorrelation() -> f64 {
    50.0
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            los_mode: LosMode::default(),
            shadow_fading: true,
            shadow_sigma_db: None,
            decorrelation_m: default_decorrelation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningConfig {
    #[serde(default)]
    pub budget: BudgetTemplate,
    /// Default NLOS.
    #[serde(default = "default_planning_condition")]
    pub condition: Condition,
    /// Base station height for radius inversion. Default: mean site height.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_bs_m: Option<f64>,
}

fn default_planning_condition() -> Condition {
    Condition::Nlos
}

impl Default for PlanningConfig {
    fn default() -> Self {
        PlanningConfig {
            budget: BudgetTemplate::default(),
            condition: default_planning_condition(),
            h_bs_m: None,
        }
    }
}

/// Parameters of the synthetic OSS feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinConfig {
    /// Interferer-free RTWP level. Default: -104.5 dBm per 5 MHz scaled to the
    /// band bandwidth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtwp_baseline_dbm: Option<f64>,
    /// Mean rise of the baseline above the thermal floor caused by traffic.
    /// Default 3 dB.
    #[serde(default = "default_load_rise")]
    pub load_rise_db: f64,
    /// Diurnal amplitude of the load term. Default 1 dB.
    #[serde(default = "default_one")]
    pub load_amplitude_db: f64,
    /// Default 86400 s.
    #[serde(default = "default_day")]
    pub diurnal_period_s: f64,
    /// Per-sample Gaussian jitter of the load term. Default 1 dB.
    #[serde(default = "default_one")]
    pub load_jitter_db: f64,
    /// Per-sample Gaussian measurement noise. Default 0.5 dB.
    #[serde(default = "default_measurement_noise")]
    pub measurement_noise_db: f64,
    /// Serving-traffic power in RSSI above the RTWP baseline. Default 6 dB.
    #[serde(default = "default_traffic_rise")]
    pub rssi_traffic_rise_db: f64,
    /// Default 86400 s.
    #[serde(default = "default_day")]
    pub duration_s: f64,
    /// Default 60 s.
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    /// Leading interferer-free samples used as baseline. Default, and whenever
    /// the configured window does not fit the series: one sixth of the series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_window: Option<usize>,
}

fn default_load_rise() -> f64 {
    3.0
}
fn default_one() -> f64 {
    1.0
}
fn default_day() -> f64 {
    86_400.0
}
fn default_measurement_noise() -> f64 {
    0.5
}
fn default_traffic_rise() -> f64 {
    6.0
}
fn default_dt() -> f64 {
    60.0
}

impl Default for TwinConfig {
    fn default() -> Self {
        TwinConfig {
            rtwp_baseline_dbm: None,
            load_rise_db: default_load_rise(),
            load_amplitude_db: 1.0,
            diurnal_period_s: default_day(),
            load_jitter_db: 1.0,
            measurement_noise_db: default_measurement_noise(),
            rssi_traffic_rise_db: default_traffic_rise(),
            duration_s: default_day(),
            dt_s: default_dt(),
            baseline_window: None,
        }
    }
}

impl TwinConfig {
    /// All stochastic terms off.
    pub fn noiseless(mut self) -> Self {
        self.load_amplitude_db = 0.0;
        self.load_jitter_db = 0.0;
        self.measurement_noise_db = 0.0;
        self
    }

    pub fn default_baseline_window(&self, samples: usize) -> usize {
        self.baseline_window
            .filter(|w| *w < samples)
            .unwrap_or((samples / 6).max(1))
    }
}

/// A sector together with the site it belongs to.
#[derive(Debug, Clone, Copy)]
pub struct SectorRef<'a> {
    pub site: &'a Site,
    pub sector: &'a Sector,
}

impl SectorRef<'_> {
    pub fn id(&self) -> &str {
        &self.sector.id
    }

    pub fn position(&self) -> Point {
        self.site.position
    }
}

impl Scenario {
    pub fn from_json_str(s: &str) -> Result<Scenario> {
        let scenario: Scenario = serde_json::from_str(s)?;
        let violations = scenario.validate();
        if violations.is_empty() {
            Ok(scenario)
        } else {
            Err(Error::Validation(violations))
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Sectors in declaration order (site order, then sector order).
    pub fn sectors(&self) -> impl Iterator<Item = SectorRef<'_>> {
        self.sites
            .iter()
            .flat_map(|site| site.sectors.iter().map(move |sector| SectorRef { site, sector }))
    }

    pub fn sector(&self, id: &str) -> Option<SectorRef<'_>> {
        self.sectors().find(|s| s.sector.id == id)
    }

    pub fn band(&self, id: &str) -> Option<&Band> {
        self.bands.iter().find(|b| b.id == id)
    }

    pub fn band_index(&self, id: &str) -> Option<usize> {
        self.bands.iter().position(|b| b.id == id)
    }

    pub fn sector_count(&self) -> usize {
        self.sites.iter().map(|s| s.sectors.len()).sum()
    }

    /// Mean distance from each site to its nearest neighbour. Zero for a
    /// single site.
    pub fn mean_inter_site_distance(&self) -> f64 {
        if self.sites.len() < 2 {
            return 0.0;
        }
        let total: f64 = self
            .sites
            .iter()
            .enumerate()
            .map(|(i, a)| {
                self.sites
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, b)| a.position.distance(&b.position))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        total / self.sites.len() as f64
    }

    /// Nominal centre of the area served by a sector: one third of the
    /// inter-site distance along boresight, as in a hexagonal 3-sector layout.
    pub fn cell_reference_point(&self, s: SectorRef<'_>) -> Point {
        s.site
            .position
            .offset(s.sector.azimuth_deg, self.mean_inter_site_distance() / 3.0)
    }

    pub fn planning_h_bs(&self) -> f64 {
        self.planning.h_bs_m.unwrap_or_else(|| {
            self.sites.iter().map(|s| s.height_m).sum::<f64>() / self.sites.len().max(1) as f64
        })
    }

    /// RTWP baseline for a band: the configured value, or -104.5 dBm per
    /// 5 MHz scaled to the band bandwidth.
    pub fn rtwp_baseline_dbm(&self, band: &Band) -> f64 {
        self.twin
            .rtwp_baseline_dbm
            .unwrap_or_else(|| -104.5 + 10.0 * (band.bandwidth_mhz / 5.0).log10())
    }

    pub fn validate(&self) -> Vec<Violation> {
        crate::validate::validate(self)
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_json_str(&text)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scenario.to_json_string()).map_err(|e| Error::io(path, e))
}

/// Machine-readable violation codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    SchemaVersion,
    AreaExtent,
    NoSites,
    GridResolution,
    DuplicateId,
    SiteHeight,
    Azimuth,
    TxPower,
    Beamwidth,
    FrontToBack,
    BandRef,
    BandFrequency,
    BandBandwidth,
    ThroughputCap,
    Intervals,
    OutOfArea,
    InterfererHeight,
    UtHeight,
    BodyLoss,
    LinkBudget,
    TwinConfig,
    NonFinite,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("code serializes");
        f.write_str(s.as_str().unwrap_or("UNKNOWN"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Path of the offending field, e.g. `sites[0].sectors[1].band_ref`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} [{}]", self.path, self.message, self.code)
    }
}

pub(crate) fn duplicate_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    ids.filter(|id| !seen.insert(*id)).collect()
}
