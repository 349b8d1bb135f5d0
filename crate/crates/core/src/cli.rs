//! Command-line front end.
//!
//! ```text
//! lobflow simulate  [--config F] [--set K=V].. [--seed N] [--out DIR] [--events]
//! lobflow calibrate [EVENTS.csv] [--tick T] [--depth-floor N] [--estimator joint|factorized]
//! lobflow sweep     stability|tails [--jobs N]
//! lobflow analyze   SERIES.csv
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 bad input data,
//! 4 divergent simulation, 1 anything else (I/O, internal errors).
//!
//! Without `--out`, results go to `$LOBFLOW_OUT/<command>` (default root
//! `runs`). Every output directory gets a `manifest.json`; passing it back as
//! `--config` reruns the command with the same configuration and input.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::calib::{calibrate, load_events, CalibError, CalibrationReport, CurvePoint};
use crate::config::{Config, ConfigError};
use crate::events::{Clock, EventWriter};
use crate::report::{
    analyze_series, read_series, write_json, write_series, write_stability, write_tails, RunManifest, SeriesError,
    SimSummary, MANIFEST_FILE, SCHEMA_VERSION,
};
use crate::sim::{run, run_with_events, sweep_stability, sweep_tails, SimError, TailCell};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGENT: i32 = 4;

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "LOBFLOW_OUT";

#[derive(Parser, Debug)]
#[command(name = "lobflow", version, about = "Order-flow limit order book simulator and calibrator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// `key=value` config file, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable. Applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write its series and summary.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write every book mutation to events.csv.
        #[arg(long)]
        events: bool,
    },
    /// Fit the model parameters to an event log.
    Calibrate {
        /// Event CSV; taken from the manifest when --config is one.
        events: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tick: Option<f64>,
        /// Minimum depth the logging simulator kept per side.
        #[arg(long)]
        depth_floor: Option<usize>,
        #[arg(long)]
        estimator: Option<String>,
    },
    /// Run a parameter grid.
    Sweep {
        mode: SweepMode,
        #[command(flatten)]
        common: Common,
    },
    /// Summary statistics, tails and long memory of an `r`, `s` series.
    Analyze {
        series: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SweepMode {
    Stability,
    Tails,
}

impl SweepMode {
    fn name(self) -> &'static str {
        match self {
            Self::Stability => "stability",
            Self::Tails => "tails",
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("input: {0}")]
    Data(String),
    #[error("{0}")]
    Divergent(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Data(_) => EXIT_DATA,
            Self::Divergent(_) => EXIT_DIVERGENT,
            Self::Other(_) => EXIT_FAILURE,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Other(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::Flow(_) => Self::Config(e.to_string()),
            SimError::Book(_) | SimError::Io(_) => Self::Other(e.to_string()),
        }
    }
}

impl From<CalibError> for CliError {
    fn from(e: CalibError) -> Self {
        match e {
            CalibError::Config(_) => Self::Config(e.to_string()),
            CalibError::Io(_) => Self::Other(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<SeriesError> for CliError {
    fn from(e: SeriesError) -> Self {
        match e {
            SeriesError::Malformed { .. } => Self::Data(e.to_string()),
            SeriesError::Io(_) => Self::Other(e.to_string()),
        }
    }
}

/// Parse `args` (program name first), run the command, return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("lobflow: {e}");
            e.code()
        }
    }
}

struct Loaded {
    config: Config,
    manifest: Option<RunManifest>,
}

fn load_config(common: &Common, extra: &[String]) -> Result<Loaded, CliError> {
    let mut config = Config::default();
    let mut manifest = None;
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            let m: RunManifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: not a run manifest: {e}", path.display())))?;
            config.apply_text(&m.config)?;
            manifest = Some(m);
        } else {
            config.apply_text(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        }
    }
    for kv in common.set.iter().chain(extra) {
        config.apply_override(kv)?;
    }
    if let Some(seed) = common.seed {
        config.sim.flow.seed = seed;
    }
    config.validate()?;
    Ok(Loaded { config, manifest })
}

fn out_dir(common: &Common, command: &str) -> Result<PathBuf, CliError> {
    let dir = match &common.out {
        Some(d) => d.clone(),
        None => PathBuf::from(std::env::var_os(OUT_ROOT_ENV).unwrap_or_else(|| "runs".into())).join(command),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

struct Run<'a> {
    command: String,
    input: Option<String>,
    config: &'a Config,
    dir: PathBuf,
    outputs: Vec<String>,
    started: Instant,
}

impl<'a> Run<'a> {
    fn new(command: &str, config: &'a Config, dir: PathBuf) -> Self {
        Self { command: command.into(), input: None, config, dir, outputs: Vec::new(), started: Instant::now() }
    }

    fn file(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.outputs.push(name.into());
        create(&self.dir, name)
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.outputs.push(name.into());
        Ok(write_json(&self.dir.join(name), value)?)
    }

    fn finish(self) -> Result<(), CliError> {
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: self.command,
            input: self.input,
            config: self.config.render(),
            seed: self.config.sim.flow.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            outputs: self.outputs,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        Ok(write_json(&self.dir.join(MANIFEST_FILE), &manifest)?)
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { common, events } => simulate(&common, events),
        Command::Calibrate { events, common, tick, depth_floor, estimator } => {
            let mut extra = Vec::new();
            if let Some(t) = tick {
                extra.push(format!("calib.tick={t}"));
            }
            if let Some(f) = depth_floor {
                extra.push(format!("calib.depth_floor={f}"));
            }
            if let Some(e) = estimator {
                extra.push(format!("calib.cancel_estimator={e}"));
            }
            cmd_calibrate(events, &common, &extra)
        }
        Command::Sweep { mode, common } => sweep(mode, &common),
        Command::Analyze { series, common } => analyze(&series, &common),
    }
}

fn simulate(common: &Common, events: bool) -> Result<(), CliError> {
    let Loaded { config, .. } = load_config(common, &[])?;
    let dir = out_dir(common, "simulate")?;
    let mut run_log = Run::new("simulate", &config, dir);
    let sim = &config.sim;
    let output = if events || sim.record_events {
        let mut writer = EventWriter::new(run_log.file("events.csv")?, Clock::EventTime)?;
        let out = run_with_events(sim, &mut writer)?;
        writer.flush()?;
        out
    } else {
        run(sim)?
    };
    write_series(run_log.file("series.csv")?, &output)?;
    let summary = SimSummary::new(&output, sim.flow.p0, config.tail_fraction);
    run_log.json("summary.json", &summary)?;
    run_log.finish()?;
    if output.verdict.is_divergent() {
        return Err(CliError::Divergent(format!(
            "simulation diverged: {}",
            serde_json::to_string(&output.verdict).unwrap_or_default()
        )));
    }
    Ok(())
}

/// Calibration report with the schema version on top.
#[derive(serde::Serialize)]
struct VersionedReport<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a CalibrationReport,
}

fn write_curves<W: Write>(mut out: W, report: &CalibrationReport) -> io::Result<()> {
    let c = &report.diagnostics.cancellation;
    writeln!(out, "curve,lo,hi,mean,observations,cancels,p")?;
    let curves: [(&str, &[CurvePoint]); 3] = [("y", &c.curve_y), ("n_imb", &c.curve_imb), ("n_tot", &c.curve_ntot)];
    for (name, points) in curves {
        for p in points {
            writeln!(out, "{name},{:.6e},{:.6e},{:.6e},{},{},{:.6e}", p.lo, p.hi, p.mean, p.observations, p.cancels, p.p)?;
        }
    }
    out.flush()
}

fn write_transaction<W: Write>(mut out: W, report: &CalibrationReport) -> io::Result<()> {
    writeln!(out, "min_ticks,max_ticks,placements,markets,empirical,std_err,predicted")?;
    for b in &report.diagnostics.transaction_curve {
        writeln!(
            out,
            "{},{},{},{},{:.6e},{:.6e},{:.6e}",
            b.min_ticks, b.max_ticks, b.placements, b.markets, b.empirical, b.std_err, b.predicted
        )?;
    }
    out.flush()
}

fn write_pstar<W: Write>(mut out: W, report: &CalibrationReport) -> io::Result<()> {
    writeln!(out, "lo,hi,count,weight,density")?;
    for b in &report.diagnostics.pstar_bins {
        writeln!(out, "{:.6e},{:.6e},{},{:.6e},{:.6e}", b.lo, b.hi, b.count, b.weight, b.density)?;
    }
    out.flush()
}

fn cmd_calibrate(events: Option<PathBuf>, common: &Common, extra: &[String]) -> Result<(), CliError> {
    let Loaded { config, manifest } = load_config(common, extra)?;
    let path = match (events, manifest.and_then(|m| m.input)) {
        (Some(p), _) => p,
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => return Err(CliError::Config("no event log given".into())),
    };
    let file = File::open(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let log = load_events(io::BufReader::new(file)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let report = calibrate(&log, &config.calib)?;
    let dir = out_dir(common, "calibrate")?;
    let mut run_log = Run::new("calibrate", &config, dir);
    run_log.input = Some(path.to_string_lossy().into_owned());
    run_log.json("calibration.json", &VersionedReport { schema_version: SCHEMA_VERSION, report: &report })?;
    write_curves(run_log.file("cancel_curves.csv")?, &report)?;
    write_transaction(run_log.file("transaction_curve.csv")?, &report)?;
    write_pstar(run_log.file("placement_density.csv")?, &report)?;
    run_log.finish()
}

#[derive(serde::Serialize)]
struct StabilitySummary {
    schema_version: u32,
    tick_sizes: Vec<f64>,
    divergent_cells: Vec<usize>,
    lower_left: Vec<bool>,
    grows_with_tick: bool,
}

/// Mean and spread of the tail exponent over seeds, per grid point.
#[derive(serde::Serialize)]
struct TailPoint {
    #[serde(rename = "H_s")]
    hurst: f64,
    alpha_x: f64,
    alpha_r_mean: Option<f64>,
    alpha_r_values: Vec<Option<f64>>,
}

fn tail_points(cells: &[TailCell]) -> Vec<TailPoint> {
    let mut points: Vec<TailPoint> = Vec::new();
    for c in cells {
        match points.iter_mut().find(|p| p.hurst == c.hurst && p.alpha_x == c.alpha_x) {
            Some(p) => p.alpha_r_values.push(c.alpha_r),
            None => points.push(TailPoint {
                hurst: c.hurst,
                alpha_x: c.alpha_x,
                alpha_r_mean: None,
                alpha_r_values: vec![c.alpha_r],
            }),
        }
    }
    for p in &mut points {
        let vals: Option<Vec<f64>> = p.alpha_r_values.iter().copied().collect();
        p.alpha_r_mean = vals.map(|v| v.iter().sum::<f64>() / v.len() as f64);
    }
    points
}

fn sweep(mode: SweepMode, common: &Common) -> Result<(), CliError> {
    let Loaded { config, .. } = load_config(common, &[])?;
    let dir = out_dir(common, &format!("sweep-{}", mode.name()))?;
    let mut run_log = Run::new(&format!("sweep {}", mode.name()), &config, dir);
    match mode {
        SweepMode::Stability => {
            let g = &config.stability;
            let map = sweep_stability(&config.sim, &g.a_grid, &g.p0_grid, &g.tick_sizes, g.steps, common.jobs)?;
            write_stability(run_log.file("stability.csv")?, &map)?;
            let n = map.tick_sizes.len();
            run_log.json(
                "stability_summary.json",
                &StabilitySummary {
                    schema_version: SCHEMA_VERSION,
                    tick_sizes: map.tick_sizes.clone(),
                    divergent_cells: (0..n).map(|t| map.divergent_count(t)).collect(),
                    lower_left: (0..n).map(|t| map.is_lower_left(t)).collect(),
                    grows_with_tick: map.grows_with_tick(),
                },
            )?;
        }
        SweepMode::Tails => {
            let g = &config.tails;
            let mut base = config.sim.clone();
            base.n_steps = g.steps;
            base.warmup = base.warmup.min(g.steps / 10);
            let cells = sweep_tails(&base, &g.alpha_grid, &g.hurst_grid, &g.seeds, config.tail_fraction, common.jobs)?;
            write_tails(run_log.file("tails.csv")?, &cells)?;
            run_log.json("tails_summary.json", &tail_points(&cells))?;
        }
    }
    run_log.finish()
}

fn analyze(path: &Path, common: &Common) -> Result<(), CliError> {
    let Loaded { config, .. } = load_config(common, &[])?;
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let series = read_series(io::BufReader::new(file)).map_err(|e| match e {
        SeriesError::Malformed { .. } => CliError::Data(format!("{}: {e}", path.display())),
        SeriesError::Io(_) => CliError::from(e),
    })?;
    let analysis = analyze_series(&series).map_err(|e| CliError::Data(e.to_string()))?;
    let dir = out_dir(common, "analyze")?;
    let mut run_log = Run::new("analyze", &config, dir);
    run_log.input = Some(path.to_string_lossy().into_owned());
    run_log.json("analysis.json", &analysis)?;
    run_log.finish()
}
