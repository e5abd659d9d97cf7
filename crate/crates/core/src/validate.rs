use std::collections::HashSet;

use crate::scenario::{
    duplicate_ids, Scenario, Violation, ViolationCode, OUT_OF_AREA_MARGIN_FRACTION, SCHEMA_VERSION,
};

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, code: ViolationCode, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            code,
            path: path.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, code: ViolationCode, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.push(code, path, message);
        }
    }
}

pub(crate) fn validate(s: &Scenario) -> Vec<Violation> {
    use ViolationCode::*;
    let mut v = Collector(Vec::new());

    v.check(
        s.schema_version == SCHEMA_VERSION,
        SchemaVersion,
        "schema_version",
        format!("unsupported schema version {} (expected {SCHEMA_VERSION})", s.schema_version),
    );

    let area = &s.area;
    let area_finite = [area.min_x, area.min_y, area.max_x, area.max_y]
        .iter()
        .all(|x| x.is_finite());
    v.check(area_finite, NonFinite, "area", "area bounds must be finite");
    v.check(
        area.width() > 0.0 && area.height() > 0.0,
        AreaExtent,
        "area",
        format!("area must have positive width and height, got {} x {}", area.width(), area.height()),
    );
    v.check(
        s.grid_resolution_m.is_finite() && s.grid_resolution_m > 0.0,
        GridResolution,
        "grid_resolution_m",
        format!("grid resolution must be > 0, got {}", s.grid_resolution_m),
    );
    v.check(!s.sites.is_empty(), NoSites, "sites", "at least one site is required");

    let ut = &s.ut;
    v.check(
        (1.0..=22.5).contains(&ut.height_m),
        UtHeight,
        "ut.height_m",
        format!("UT height must be in [1, 22.5] m, got {}", ut.height_m),
    );
    v.check(ut.noise_figure_db.is_finite(), NonFinite, "ut.noise_figure_db", "noise figure must be finite");
    v.check(
        ut.body_loss_db >= 0.0 && ut.body_loss_db.is_finite(),
        BodyLoss,
        "ut.body_loss_db",
        format!("body loss must be >= 0, got {}", ut.body_loss_db),
    );

    for dup in duplicate_ids(s.bands.iter().map(|b| b.id.as_str())) {
        v.push(DuplicateId, "bands", format!("duplicate band id \"{dup}\""));
    }
    for (i, b) in s.bands.iter().enumerate() {
        let p = format!("bands[{i}]");
        v.check(
            (0.5..=100.0).contains(&b.center_freq_ghz),
            BandFrequency,
            format!("{p}.center_freq_ghz"),
            format!("center frequency must be in [0.5, 100] GHz, got {}", b.center_freq_ghz),
        );
        v.check(
            b.bandwidth_mhz.is_finite() && b.bandwidth_mhz > 0.0,
            BandBandwidth,
            format!("{p}.bandwidth_mhz"),
            format!("bandwidth must be > 0, got {}", b.bandwidth_mhz),
        );
        v.check(
            b.throughput_cap_mbps.is_finite() && b.throughput_cap_mbps > 0.0,
            ThroughputCap,
            format!("{p}.throughput_cap_mbps"),
            "throughput cap must be > 0",
        );
        if let Some(scs) = b.scs_khz {
            v.check(
                scs.is_finite() && scs > 0.0,
                BandBandwidth,
                format!("{p}.scs_khz"),
                "subcarrier spacing must be > 0",
            );
        }
    }
    let band_ids: HashSet<&str> = s.bands.iter().map(|b| b.id.as_str()).collect();

    let margin = OUT_OF_AREA_MARGIN_FRACTION * s.area.diagonal();
    for dup in duplicate_ids(s.sites.iter().map(|x| x.id.as_str())) {
        v.push(DuplicateId, "sites", format!("duplicate site id \"{dup}\""));
    }
    for dup in duplicate_ids(s.sectors().map(|x| x.sector.id.as_str())) {
        v.push(DuplicateId, "sites", format!("duplicate sector id \"{dup}\""));
    }
    for (i, site) in s.sites.iter().enumerate() {
        let p = format!("sites[{i}]");
        if !site.position.is_finite() {
            v.push(NonFinite, format!("{p}.position"), "position must be finite");
        } else {
            v.check(
                s.area.contains_with_margin(&site.position, margin),
                OutOfArea,
                format!("{p}.position"),
                format!("site \"{}\" lies outside the area by more than {margin:.1} m", site.id),
            );
        }
        v.check(
            site.height_m > 1.0 && site.height_m <= 150.0,
            SiteHeight,
            format!("{p}.height_m"),
            format!("site height must be in (1, 150] m, got {}", site.height_m),
        );
        for (j, sec) in site.sectors.iter().enumerate() {
            let p = format!("{p}.sectors[{j}]");
            v.check(
                (0.0..360.0).contains(&sec.azimuth_deg),
                Azimuth,
                format!("{p}.azimuth_deg"),
                format!("azimuth must be in [0, 360), got {}", sec.azimuth_deg),
            );
            v.check(
                band_ids.contains(sec.band_ref.as_str()),
                BandRef,
                format!("{p}.band_ref"),
                format!("unknown band \"{}\"", sec.band_ref),
            );
            v.check(
                (-30.0..=60.0).contains(&sec.tx_power_dbm),
                TxPower,
                format!("{p}.tx_power_dbm"),
                format!("tx power must be in [-30, 60] dBm, got {}", sec.tx_power_dbm),
            );
            v.check(
                sec.antenna_gain_dbi.is_finite(),
                NonFinite,
                format!("{p}.antenna_gain_dbi"),
                "antenna gain must be finite",
            );
            v.check(
                sec.beamwidth_3db_deg > 0.0 && sec.beamwidth_3db_deg <= 360.0,
                Beamwidth,
                format!("{p}.beamwidth_3db_deg"),
                format!("beamwidth must be in (0, 360], got {}", sec.beamwidth_3db_deg),
            );
            v.check(
                sec.front_to_back_db > 0.0 && sec.front_to_back_db.is_finite(),
                FrontToBack,
                format!("{p}.front_to_back_db"),
                format!("front-to-back ratio must be > 0, got {}", sec.front_to_back_db),
            );
        }
    }

    for dup in duplicate_ids(s.interferers.iter().map(|x| x.id.as_str())) {
        v.push(DuplicateId, "interferers", format!("duplicate interferer id \"{dup}\""));
    }
    for (i, itf) in s.interferers.iter().enumerate() {
        let p = format!("interferers[{i}]");
        if !itf.position.is_finite() {
            v.push(NonFinite, format!("{p}.position"), "position must be finite");
        } else {
            v.check(
                s.area.contains_with_margin(&itf.position, margin),
                OutOfArea,
                format!("{p}.position"),
                format!("interferer \"{}\" lies outside the area by more than {margin:.1} m", itf.id),
            );
        }
        v.check(
            itf.height_m > 1.0 && itf.height_m <= 150.0,
            InterfererHeight,
            format!("{p}.height_m"),
            format!("interferer height must be in (1, 150] m, got {}", itf.height_m),
        );
        v.check(
            (-30.0..=60.0).contains(&itf.tx_power_dbm),
            TxPower,
            format!("{p}.tx_power_dbm"),
            format!("tx power must be in [-30, 60] dBm, got {}", itf.tx_power_dbm),
        );
        v.check(
            band_ids.contains(itf.band_ref.as_str()),
            BandRef,
            format!("{p}.band_ref"),
            format!("unknown band \"{}\"", itf.band_ref),
        );
        let mut prev_end = f64::NEG_INFINITY;
        for (k, iv) in itf.active_intervals.iter().enumerate() {
            let ok = iv.0.is_finite() && iv.1.is_finite() && iv.0 < iv.1 && iv.0 >= prev_end;
            v.check(
                ok,
                Intervals,
                format!("{p}.active_intervals[{k}]"),
                "intervals must be non-empty, sorted and non-overlapping",
            );
            prev_end = iv.1;
        }
    }

    for problem in s.planning.budget.problems() {
        v.push(LinkBudget, "planning.budget", problem);
    }
    if let Some(h) = s.planning.h_bs_m {
        v.check(h > 0.0 && h.is_finite(), SiteHeight, "planning.h_bs_m", "planning BS height must be > 0");
    }

    let t = &s.twin;
    let twin_ok = t.dt_s > 0.0
        && t.duration_s >= t.dt_s
        && t.diurnal_period_s > 0.0
        && t.load_rise_db > 0.0
        && [t.load_amplitude_db, t.load_jitter_db, t.measurement_noise_db]
            .iter()
            .all(|x| *x >= 0.0 && x.is_finite())
        && t.rtwp_baseline_dbm.is_none_or(f64::is_finite);
    v.check(
        twin_ok,
        TwinConfig,
        "twin",
        "twin parameters must be positive (dt, duration >= dt, period, load rise) and noise terms >= 0",
    );

    v.0
}
