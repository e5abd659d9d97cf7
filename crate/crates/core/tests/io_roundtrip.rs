use proptest::prelude::*;

use rftwin_core::geometry::Point;
use rftwin_core::scenario::{Interferer, Interval, Scenario};
use rftwin_core::twin::{synthesize_kpi, GroundTruth, KpiBatch};
use rftwin_core::{fixtures, load_scenario, save_scenario};

fn perturbed(seed: u64, dx: f64, dy: f64, power: f64, azimuth: f64, height: f64) -> Scenario {
    let mut s = fixtures::demo();
    s.seed = seed;
    s.sites[3].position = Point::new(s.sites[3].position.x + dx, s.sites[3].position.y + dy);
    s.sites[3].height_m = height;
    s.sites[3].sectors[1].azimuth_deg = azimuth;
    s.sites[3].sectors[1].tx_power_dbm = power;
    s.interferers.push(Interferer {
        id: "J2".into(),
        position: Point::new(dy, dx),
        height_m: 1.5,
        tx_power_dbm: power - 20.0,
        band_ref: "n77".into(),
        active_intervals: vec![Interval(0.0, 3600.0 + dx.abs())],
    });
    s
}

proptest! {
    #[test]
    fn scenario_json_round_trips_exactly(
        seed in any::<u64>(),
        dx in -100.0f64..100.0,
        dy in -100.0f64..100.0,
        power in 20.0f64..46.0,
        azimuth in 0.0f64..360.0,
        height in 2.0f64..100.0,
    ) {
        let s = perturbed(seed, dx, dy, power, azimuth, height);
        let back = Scenario::from_json_str(&s.to_json_string()).unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn scenario_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let s = fixtures::demo_28ghz();
    save_scenario(&s, &path).unwrap();
    assert_eq!(load_scenario(&path).unwrap(), s);
}

#[test]
fn missing_scenario_file_is_an_error() {
    assert!(load_scenario("/nonexistent/scenario.json").is_err());
}

#[test]
fn kpi_csv_round_trip_keeps_four_decimals() {
    let s = fixtures::demo();
    let out = synthesize_kpi(&s, 7200.0, 60.0, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kpi.csv");
    out.batch.save_csv(&path).unwrap();
    let back = KpiBatch::load_csv(&path).unwrap();
    assert_eq!(back.series.len(), out.batch.series.len());
    for (a, b) in out.batch.series.iter().zip(&back.series) {
        assert_eq!(a.cell_id, b.cell_id);
        assert_eq!(a.metric, b.metric);
        assert_eq!(a.t0_s, b.t0_s);
        assert_eq!(a.dt_s, b.dt_s);
        assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| (x - y).abs() <= 5.0001e-5));
    }
    // rewriting the parsed batch reproduces the file byte for byte
    assert_eq!(back.to_csv_string().unwrap(), std::fs::read_to_string(&path).unwrap());
}

#[test]
fn ground_truth_file_round_trip() {
    let s = fixtures::demo();
    let out = synthesize_kpi(&s, 3600.0, 60.0, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kpi.truth.json");
    out.ground_truth.save_json(&path).unwrap();
    assert_eq!(GroundTruth::load_json(&path).unwrap(), out.ground_truth);
}

#[test]
fn malformed_kpi_csv_is_rejected() {
    let bad = "timestamp_s,cell_id,metric,value_dbm\n0,S0-A,RTWP,abc\n";
    assert!(KpiBatch::read_csv(bad.as_bytes()).is_err());
    let gap = "timestamp_s,cell_id,metric,value_dbm\n0,S0-A,RTWP,-100\n60,S0-A,RTWP,-100\n180,S0-A,RTWP,-100\n";
    assert!(KpiBatch::read_csv(gap.as_bytes()).is_err());
}
