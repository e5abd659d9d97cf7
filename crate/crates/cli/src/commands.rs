use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use rftwin_core::detect::DetectConfig;
use rftwin_core::mitigate::{apply, recommend, verify, verify_grids, Recommendation, VerificationVerdict};
use rftwin_core::pipeline::{default_localization_radius_m, run_detection, validate_report, DetectionReport};
use rftwin_core::report::{compare, simulated_summary, twin_summary, MetricsSummary};
use rftwin_core::twin::{quiet_mean_rtwp, synthesize_kpi, GroundTruth, KpiBatch, Metric};
use rftwin_core::{compute_grid, fixtures, grid_summary, load_scenario, save_scenario, Scenario};
use rftwin_core::planning::plan;

use crate::{Cli, Command, DetectArgs, OnOff, PlanArgs, RecommendArgs, ReportArgs, SimulateArgs, TwinArgs};

/// A problem with user input detected by the CLI itself.
#[derive(Debug)]
struct InputError(String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// 1 for bad input, 2 for anything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    let input = e.chain().any(|c| {
        c.is::<rftwin_core::Error>() || c.is::<InputError>() || c.is::<std::io::Error>() || c.is::<serde_json::Error>()
    });
    if input {
        1
    } else {
        2
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
    };
    match &cli.command {
        Command::Plan(a) => ctx.plan(a),
        Command::Simulate(a) => ctx.simulate(a).map(|_| ()),
        Command::Twin(a) => ctx.twin(a).map(|_| ()),
        Command::Detect(a) => ctx.detect(a).map(|_| ()),
        Command::Recommend(a) => ctx.recommend(a).map(|_| ()),
        Command::Report(a) => ctx.report(a),
        Command::Demo => ctx.demo(),
    }
}

struct Ctx {
    seed: Option<u64>,
    out_dir: PathBuf,
}

/// `dir/kpi.csv` with suffix `.truth.json` gives `dir/kpi.truth.json`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

#[derive(Serialize)]
struct RecommendOutput {
    verdict: String,
    recommendation: Recommendation,
    verification: VerificationVerdict,
    change_set: std::collections::BTreeMap<String, String>,
}

impl Ctx {
    fn output(&self, explicit: &Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
        let path = explicit.clone().unwrap_or_else(|| self.out_dir.join(default_name));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(path)
    }

    fn scenario(&self, path: &Path) -> Result<Scenario> {
        let mut s = load_scenario(path).with_context(|| format!("loading scenario {}", path.display()))?;
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        Ok(s)
    }

    fn plan(&self, a: &PlanArgs) -> Result<()> {
        let s = self.scenario(&a.scenario)?;
        let filter = a.band.as_deref();
        let ghz = filter.and_then(|f| f.parse::<f64>().ok());
        let result = plan(&s, |b| match filter {
            None => true,
            Some(f) => b.id == f || ghz.is_some_and(|g| (b.center_freq_ghz - g).abs() < 0.05),
        })?;
        if result.bands.is_empty() {
            return Err(input_error(format!(
                "--band {} matches no band of scenario \"{}\"",
                filter.unwrap_or_default(),
                s.name
            )));
        }
        let out = self.output(&a.out, "plan.json")?;
        write_json(&out, &result)?;
        for b in &result.bands {
            println!(
                "{}: MAPL {:.2} dB, radius {:.1} m{}, {} sites",
                b.band_id,
                b.mapl_db,
                b.cell_radius_m,
                if b.radius_capped { " (capped)" } else { "" },
                b.site_count
            );
        }
        if result.budget_is_default {
            println!("note: built-in default link budget; set planning.budget in the scenario to override");
        }
        println!("plan written to {}", out.display());
        Ok(())
    }

    /// Returns the path of the metrics summary.
    fn simulate(&self, a: &SimulateArgs) -> Result<PathBuf> {
        let s = self.scenario(&a.scenario)?;
        let on = a.interference == OnOff::On;
        let grid = compute_grid(&s, on)?;
        let summary = grid_summary(&grid)?;
        let out = self.output(&a.out, if on { "grid_on.csv" } else { "grid_off.csv" })?;
        grid.save_csv(&out)?;
        let summary_path = sibling(&out, ".summary.json");
        write_json(&summary_path, &summary)?;
        let metrics_path = sibling(&out, ".metrics.json");
        write_json(&metrics_path, &simulated_summary(&s, &summary))?;
        println!(
            "{} x {} pixels, interference {}: mean RSSI {:.2} dBm, mean SINR {:.2} dB",
            grid.width,
            grid.height,
            if on { "on" } else { "off" },
            summary.overall.rssi_dbm.mean,
            summary.overall.sinr_db.mean
        );
        println!("grid written to {}", out.display());
        Ok(metrics_path)
    }

    /// Returns the KPI CSV path and the twin metrics summary path.
    fn twin(&self, a: &TwinArgs) -> Result<(PathBuf, PathBuf)> {
        let s = self.scenario(&a.scenario)?;
        let duration = a.duration.unwrap_or(s.twin.duration_s);
        let dt = a.dt.unwrap_or(s.twin.dt_s);
        let out = synthesize_kpi(&s, duration, dt, s.seed)?;
        let csv = self.output(&a.out, "kpi.csv")?;
        out.batch.save_csv(&csv)?;
        out.ground_truth.save_json(sibling(&csv, ".truth.json"))?;
        let observed = quiet_mean_rtwp(&out.batch, &out.ground_truth);
        let grid = compute_grid(&s, true)?;
        let metrics = twin_summary(&s, &grid_summary(&grid)?, &observed);
        let metrics_path = sibling(&csv, ".metrics.json");
        write_json(&metrics_path, &metrics)?;
        println!(
            "{} series x {} samples written to {}",
            out.batch.series.len(),
            out.batch.samples_per_series(),
            csv.display()
        );
        Ok((csv, metrics_path))
    }

    fn detect(&self, a: &DetectArgs) -> Result<(PathBuf, DetectionReport)> {
        let s = self.scenario(&a.scenario)?;
        let batch = KpiBatch::load_csv(&a.kpi).with_context(|| format!("loading KPI batch {}", a.kpi.display()))?;
        let metric: Metric = a.metric.to_uppercase().parse()?;
        let cfg = DetectConfig {
            metric,
            k: a.k,
            auto_k: a.auto_k,
            threshold_db: a.threshold,
            baseline_window: a.baseline_window,
            seed: s.seed,
            ..DetectConfig::default()
        };
        let mut report = run_detection(&s, &batch, &cfg)?;
        if a.validate {
            let truth_path = a.truth.clone().unwrap_or_else(|| sibling(&a.kpi, ".truth.json"));
            let truth = GroundTruth::load_json(&truth_path)?;
            let radius = a.radius.unwrap_or_else(|| default_localization_radius_m(&s));
            report.validation = validate_report(&report, &s, &truth, radius);
            if report.validation.is_none() {
                log::warn!("nothing to validate: no localization estimate");
            }
        }
        let out = self.output(&a.out, "detection.json")?;
        write_json(&out, &report)?;

        let d = &report.detection;
        println!("anomaly: {} (k = {}, seed cell {})", d.anomaly_flag, d.k, d.seed_cell);
        if d.anomaly_flag {
            println!("affected cells: {}", d.affected_cells.join(", "));
        }
        for (name, est) in [("weighted centroid", &report.weighted_centroid), ("pathloss LSQ", &report.pathloss_lsq)] {
            if let Some(e) = est {
                println!("{name}: ({:.1}, {:.1}) m", e.position.x, e.position.y);
            }
        }
        if let Some(v) = &report.validation {
            for (name, c) in [("weighted centroid", &v.weighted_centroid), ("pathloss LSQ", &v.pathloss_lsq)] {
                if let Some(c) = c {
                    println!(
                        "{name} error vs {}: {:.1} m ({})",
                        v.interferer_id,
                        c.error_m,
                        if c.within_radius { "pass" } else { "fail" }
                    );
                }
            }
        }
        println!("report written to {}", out.display());
        Ok((out, report))
    }

    fn recommend(&self, a: &RecommendArgs) -> Result<RecommendOutput> {
        let s = self.scenario(&a.scenario)?;
        let report = DetectionReport::from_json_str(&read_text(&a.detection)?)?;
        if report.scenario_ref != s.name {
            return Err(input_error(format!(
                "detection report is for scenario \"{}\", not \"{}\"",
                report.scenario_ref, s.name
            )));
        }
        let rec = recommend(&s, &report.detection, report.estimate())?;
        let (verification, verdict) = if rec.is_empty() {
            let grid = compute_grid(&s, true)?;
            (verify_grids(&grid, &grid, &[], a.min_gain)?, format!("no-op: {}", rec.rationale))
        } else {
            let post = apply(&s, &rec)?;
            let v = verify(&s, &post, &report.detection.affected_cells, a.min_gain)?;
            let verdict = if v.improved { "improved" } else { "not improved" };
            (v, verdict.to_string())
        };
        let output = RecommendOutput {
            verdict,
            change_set: rec.change_set(),
            recommendation: rec,
            verification,
        };
        let out = self.output(&a.out, "recommendation.json")?;
        write_json(&out, &output)?;
        for c in &output.recommendation.changes {
            println!("{}: {} -> {}", c.sector_id, c.old_band, c.new_band);
        }
        let v = &output.verification;
        match (v.pre_mean_sinr_db, v.post_mean_sinr_db) {
            (Some(pre), Some(post)) => println!(
                "mean SINR over {} affected pixels: {pre:.2} -> {post:.2} dB; {}",
                v.affected_pixels, output.verdict
            ),
            _ => println!("{}", output.verdict),
        }
        println!("recommendation written to {}", out.display());
        Ok(output)
    }

    fn report(&self, a: &ReportArgs) -> Result<()> {
        let sim = MetricsSummary::from_json_str(&read_text(&a.simulated)?)?;
        let tw = MetricsSummary::from_json_str(&read_text(&a.twin)?)?;
        let cmp = compare(&sim, &tw)?;
        let out = self.output(&a.out, "report.json")?;
        write_json(&out, &cmp)?;
        let text = cmp.to_text();
        std::fs::write(sibling(&out, ".txt"), &text).with_context(|| format!("writing {}", out.display()))?;
        print!("{text}");
        for w in &cmp.warnings {
            println!("note: {w}");
        }
        Ok(())
    }

    fn demo(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        let mut s = fixtures::demo();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        let scenario = self.out_dir.join("scenario.json");
        save_scenario(&s, &scenario)?;
        let at = |name: &str| Some(self.out_dir.join(name));

        println!("== plan");
        self.plan(&PlanArgs {
            scenario: scenario.clone(),
            band: None,
            out: at("plan.json"),
        })?;
        println!("== simulate");
        let sim_metrics = self.simulate(&SimulateArgs {
            scenario: scenario.clone(),
            interference: OnOff::Off,
            out: at("grid_off.csv"),
        })?;
        self.simulate(&SimulateArgs {
            scenario: scenario.clone(),
            interference: OnOff::On,
            out: at("grid_on.csv"),
        })?;
        println!("== twin");
        let (kpi, twin_metrics) = self.twin(&TwinArgs {
            scenario: scenario.clone(),
            duration: None,
            dt: None,
            out: at("kpi.csv"),
        })?;
        println!("== detect");
        let (detection, _) = self.detect(&DetectArgs {
            kpi,
            scenario: scenario.clone(),
            metric: "RTWP".into(),
            k: rftwin_core::detect::DEFAULT_K,
            auto_k: false,
            threshold: rftwin_core::detect::DEFAULT_THRESHOLD_DB,
            baseline_window: None,
            validate: true,
            truth: None,
            radius: None,
            out: at("detection.json"),
        })?;
        println!("== recommend");
        self.recommend(&RecommendArgs {
            detection,
            scenario,
            min_gain: 3.0,
            out: at("recommendation.json"),
        })?;
        println!("== report");
        self.report(&ReportArgs {
            simulated: sim_metrics,
            twin: twin_metrics,
            out: at("report.json"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_replaces_extension() {
        assert_eq!(sibling(Path::new("a/kpi.csv"), ".truth.json"), PathBuf::from("a/kpi.truth.json"));
        assert_eq!(sibling(Path::new("report.json"), ".txt"), PathBuf::from("report.txt"));
    }

    #[test]
    fn core_errors_are_input_errors() {
        let e: anyhow::Error = rftwin_core::Error::Parse("x".into()).into();
        assert_eq!(exit_code(&e.context("loading")), 1);
        assert_eq!(exit_code(&input_error("bad")), 1);
        assert_eq!(exit_code(&anyhow::anyhow!("bug")), 2);
    }
}
