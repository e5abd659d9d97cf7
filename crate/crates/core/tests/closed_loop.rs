use rftwin_core::detect::DetectConfig;
use rftwin_core::mitigate::{apply, recommend, verify};
use rftwin_core::pipeline::{default_localization_radius_m, run_detection, validate_report};
use rftwin_core::report::{compare, simulated_summary, twin_summary};
use rftwin_core::twin::{quiet_mean_rtwp, synthesize_default};
use rftwin_core::{compute_grid, fixtures, grid_summary};

#[test]
fn demo_loop_detects_localizes_and_mitigates() {
    let s = fixtures::demo();
    let kpi = synthesize_default(&s, 11).unwrap();
    let report = run_detection(&s, &kpi.batch, &DetectConfig::default()).unwrap();
    assert!(report.detection.anomaly_flag);
    assert!(report.detection.affected_cells.iter().all(|c| c.starts_with("S0-") || c.starts_with("S1-")
        || c.starts_with("S2-") || c.starts_with("S6-")));

    let v = validate_report(&report, &s, &kpi.ground_truth, default_localization_radius_m(&s)).unwrap();
    assert_eq!(v.interferer_id, "J1");
    assert!(v.weighted_centroid.unwrap().within_radius);

    let rec = recommend(&s, &report.detection, report.estimate()).unwrap();
    assert!(!rec.is_empty());
    assert!(rec.changes.iter().all(|c| c.old_band == "n78" && c.new_band == "n77"));
    let post = apply(&s, &rec).unwrap();
    let verdict = verify(&s, &post, &report.detection.affected_cells, 3.0).unwrap();
    assert!(verdict.improved, "{verdict:?}");

    // undoing the change restores the original scenario
    assert_eq!(apply(&post, &rec.inverse()).unwrap(), s);
}

#[test]
fn report_round_trips_through_json() {
    let s = fixtures::demo();
    let kpi = synthesize_default(&s, 5).unwrap();
    let report = run_detection(&s, &kpi.batch, &DetectConfig::default()).unwrap();
    let back = rftwin_core::DetectionReport::from_json_str(&report.to_json_string()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn simulated_and_twin_summaries_compare_per_band() {
    let s = fixtures::demo();
    let kpi = synthesize_default(&s, 0).unwrap();
    let sim = simulated_summary(&s, &grid_summary(&compute_grid(&s, false).unwrap()).unwrap());
    let tw = twin_summary(
        &s,
        &grid_summary(&compute_grid(&s, true).unwrap()).unwrap(),
        &quiet_mean_rtwp(&kpi.batch, &kpi.ground_truth),
    );
    let cmp = compare(&sim, &tw).unwrap();
    let rtwp = cmp
        .rows
        .iter()
        .find(|r| r.metric == rftwin_core::ReportMetric::RTWP)
        .unwrap();
    assert!(rtwp.abs_delta < 2.0);
    assert!(cmp.to_text().contains("RTWP (dBm)"));
}
