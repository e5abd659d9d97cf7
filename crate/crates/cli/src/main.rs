use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "rftwin", version, about = "Radio-network planning and interference digital twin")]
pub struct Cli {
    /// Seed for every random draw. Defaults to the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// More log output; repeat for debug level.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Directory for outputs written under default names.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Link budget, cell radius and site count per band.
    Plan(PlanArgs),
    /// Coverage grid CSV plus a summary JSON.
    Simulate(SimulateArgs),
    /// Synthetic RTWP/RSSI KPI series plus a sealed ground-truth file.
    Twin(TwinArgs),
    /// Cluster KPI features, flag affected cells and localize the source.
    Detect(DetectArgs),
    /// Frequency reassignment for affected cells, verified by re-simulation.
    Recommend(RecommendArgs),
    /// Compare a simulated summary with a twin summary.
    Report(ReportArgs),
    /// Run the whole loop on the bundled demo scenario.
    Demo,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    pub scenario: PathBuf,
    /// Band id or centre frequency in GHz.
    #[arg(long)]
    pub band: Option<String>,
    /// Output JSON. Default: <out-dir>/plan.json.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value = "off")]
    pub interference: OnOff,
    /// Output CSV. Default: <out-dir>/grid.csv. The summary goes next to it.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TwinArgs {
    pub scenario: PathBuf,
    /// Seconds. Default: the scenario twin setting.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Sample period in seconds. Default: the scenario twin setting.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output CSV. Default: <out-dir>/kpi.csv.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    pub kpi: PathBuf,
    pub scenario: PathBuf,
    #[arg(long, default_value = "RTWP")]
    pub metric: String,
    #[arg(long, default_value_t = rftwin_core::detect::DEFAULT_K)]
    pub k: usize,
    /// Choose k in {2, 3, 4} by silhouette.
    #[arg(long)]
    pub auto_k: bool,
    #[arg(long, default_value_t = rftwin_core::detect::DEFAULT_THRESHOLD_DB)]
    pub threshold: f64,
    /// Leading samples used as the baseline.
    #[arg(long)]
    pub baseline_window: Option<usize>,
    /// Score the estimates against the ground-truth file.
    #[arg(long)]
    pub validate: bool,
    /// Ground-truth file. Default: <kpi stem>.truth.json next to the KPI file.
    #[arg(long, requires = "validate")]
    pub truth: Option<PathBuf>,
    /// Acceptance radius in metres. Default: half the mean inter-site distance.
    #[arg(long, requires = "validate")]
    pub radius: Option<f64>,
    /// Output JSON. Default: <out-dir>/detection.json.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RecommendArgs {
    pub detection: PathBuf,
    pub scenario: PathBuf,
    /// SINR gain in dB the change must exceed to count as improved.
    #[arg(long, default_value_t = 3.0)]
    pub min_gain: f64,
    /// Output JSON. Default: <out-dir>/recommendation.json.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    pub simulated: PathBuf,
    pub twin: PathBuf,
    /// Output JSON; the text table goes next to it. Default: <out-dir>/report.json.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    match std::panic::catch_unwind(|| commands::run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
        Err(_) => ExitCode::from(2),
    }
}
