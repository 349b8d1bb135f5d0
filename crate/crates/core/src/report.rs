//! Output files: series CSVs, JSON summaries and run manifests.
//!
//! Every JSON document carries `schema_version`. Floating-point columns in
//! CSVs use a fixed `{:.9e}` layout so files compare byte for byte.

use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sim::{Diagnostics, SimOutput, StabilityMap, TailCell, Verdict};
use crate::stats::{
    dfa_hurst_default, hill_estimator, hill_window, summarize, tail_report, variance_plot_se, HurstEstimate, StatsError,
    Summary, TailReport, VariancePlot, REPORT_FRACTIONS,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Header of the per-step series CSV.
pub const SERIES_HEADER: &str = "t,r,s,transacted,n_tot";

/// Cancelled-order lifetimes are fitted over this window.
pub const LIFETIME_WINDOW: (f64, f64) = (10.0, 1000.0);

pub fn write_series<W: Write>(out: W, sim: &SimOutput) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{SERIES_HEADER}")?;
    for (t, (((r, s), m), n)) in sim.returns.iter().zip(&sim.spreads).zip(&sim.transacted).zip(&sim.n_tot).enumerate() {
        writeln!(out, "{t},{r:.9e},{s:.9e},{},{n}", *m as u8)?;
    }
    out.flush()
}

/// Return and spread columns of a series CSV. Other columns are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub r: Vec<f64>,
    pub s: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum SeriesError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn read_series<R: Read>(input: R) -> Result<Series, SeriesError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let bad = |line: usize, message: String| SeriesError::Malformed { line, message };
    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| bad(1, format!("no `{name}` column")));
    let (ri, si) = (col("r")?, col("s")?);
    let mut series = Series { r: Vec::new(), s: Vec::new() };
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| bad(line, e.to_string()))?;
        let num = |k: usize| {
            row.get(k)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(line, format!("`{}` is not a number", row.get(k).unwrap_or(""))))
        };
        series.r.push(num(ri)?);
        series.s.push(num(si)?);
    }
    if series.r.is_empty() {
        return Err(bad(2, "no rows".into()));
    }
    Ok(series)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimeSummary {
    pub cancelled: usize,
    pub executed: usize,
    /// Tail exponent of cancelled lifetimes over [`LIFETIME_WINDOW`].
    pub gamma_c: Option<f64>,
    pub gamma_c_std_err: Option<f64>,
}

/// JSON summary of one simulation run.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub schema_version: u32,
    pub n: usize,
    pub E_abs_r: f64,
    pub E_s: f64,
    pub sigma_abs_r: f64,
    pub sigma_s: f64,
    /// Hill exponents at `tail_fraction`; absent when the tail is degenerate.
    pub alpha_r: Option<f64>,
    pub alpha_s: Option<f64>,
    pub tail_fraction: f64,
    pub abs_r: Summary,
    pub s: Summary,
    pub tails_abs_r: Option<TailReport>,
    pub tails_s: Option<TailReport>,
    pub transaction_rate: f64,
    pub mean_n_tot: f64,
    /// The price level is a model input; it is not estimated from data.
    pub p0: f64,
    pub lifetimes: LifetimeSummary,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub diagnostics: Diagnostics,
}

fn empty_summary() -> Summary {
    Summary { n: 0, mean: f64::NAN, std_dev: f64::NAN, mean_se: None, std_dev_se: None }
}

impl SimSummary {
    pub fn new(sim: &SimOutput, p0: f64, tail_fraction: f64) -> Self {
        let abs_r = sim.abs_returns();
        let sr = summarize(&abs_r).unwrap_or_else(|_| empty_summary());
        let ss = summarize(&sim.spreads).unwrap_or_else(|_| empty_summary());
        let alpha = |v: &[f64]| hill_estimator(v, tail_fraction).ok().map(|e| e.alpha);
        let taus: Vec<f64> = sim.cancelled_lifetimes().into_iter().map(|t| t as f64).collect();
        let gamma = hill_window(&taus, LIFETIME_WINDOW.0, LIFETIME_WINDOW.1).ok();
        Self {
            schema_version: SCHEMA_VERSION,
            n: sim.returns.len(),
            E_abs_r: sr.mean,
            E_s: ss.mean,
            sigma_abs_r: sr.std_dev,
            sigma_s: ss.std_dev,
            alpha_r: alpha(&abs_r),
            alpha_s: alpha(&sim.spreads),
            tail_fraction,
            abs_r: sr,
            s: ss,
            tails_abs_r: tail_report(&abs_r, &REPORT_FRACTIONS).ok(),
            tails_s: tail_report(&sim.spreads, &REPORT_FRACTIONS).ok(),
            transaction_rate: sim.transaction_rate,
            mean_n_tot: sim.mean_n_tot,
            p0,
            lifetimes: LifetimeSummary {
                cancelled: taus.len(),
                executed: sim.lifetimes.len() - taus.len(),
                gamma_c: gamma.map(|g| g.alpha),
                gamma_c_std_err: gamma.map(|g| g.std_err),
            },
            verdict: sim.verdict,
            diagnostics: sim.diagnostics.clone(),
        }
    }
}

/// Statistics of an `r`, `s` series.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesAnalysis {
    pub schema_version: u32,
    pub n: usize,
    pub r: Summary,
    pub abs_r: Summary,
    pub s: Summary,
    /// Long-memory exponent of volatility, DFA on `|r|`.
    pub H_v: Option<HurstEstimate>,
    pub tails_abs_r: Option<TailReport>,
    pub tails_s: Option<TailReport>,
    pub variance_plot_abs_r: Option<VariancePlot>,
    pub variance_plot_s: Option<VariancePlot>,
}

pub fn analyze_series(series: &Series) -> Result<SeriesAnalysis, StatsError> {
    let abs_r: Vec<f64> = series.r.iter().map(|v| v.abs()).collect();
    Ok(SeriesAnalysis {
        schema_version: SCHEMA_VERSION,
        n: series.r.len(),
        r: summarize(&series.r)?,
        abs_r: summarize(&abs_r)?,
        s: summarize(&series.s)?,
        H_v: dfa_hurst_default(&abs_r).ok(),
        tails_abs_r: tail_report(&abs_r, &REPORT_FRACTIONS).ok(),
        tails_s: tail_report(&series.s, &REPORT_FRACTIONS).ok(),
        variance_plot_abs_r: variance_plot_se(&abs_r).ok(),
        variance_plot_s: variance_plot_se(&series.s).ok(),
    })
}

fn verdict_columns(v: &Verdict) -> (&'static str, String) {
    match v {
        Verdict::Bounded => ("bounded", String::new()),
        Verdict::Divergent { step, .. } => ("divergent", step.to_string()),
    }
}

pub fn write_stability<W: Write>(out: W, map: &StabilityMap) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "T,A,p0,verdict,divergent_step,mean_n_tot,max_n_tot,steps")?;
    for c in &map.cells {
        let (v, step) = verdict_columns(&c.verdict);
        writeln!(
            out,
            "{},{},{},{v},{step},{:.6e},{},{}",
            c.tick_size, c.cancel_scale, c.p0, c.mean_n_tot, c.max_n_tot, c.steps
        )?;
    }
    out.flush()
}

pub fn write_tails<W: Write>(out: W, cells: &[TailCell]) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "H_s,alpha_x,seed,alpha_r,verdict")?;
    for c in cells {
        let alpha = c.alpha_r.map_or(String::new(), |a| format!("{a:.6}"));
        writeln!(out, "{},{},{},{alpha},{}", c.hurst, c.alpha_x, c.seed, verdict_columns(&c.verdict).0)?;
    }
    out.flush()
}

/// What was run, with enough detail to run it again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    /// Input file, for commands that read one.
    pub input: Option<String>,
    /// Full configuration in `key=value` form.
    pub config: String,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run, SimConfig};

    #[test]
    fn series_round_trip() {
        let out = run(&SimConfig::azn(20_000, 3)).unwrap();
        let mut buf = Vec::new();
        write_series(&mut buf, &out).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,r,s,transacted,n_tot\n"));
        assert_eq!(text.lines().count(), out.returns.len() + 1);
        let back = read_series(text.as_bytes()).unwrap();
        for (a, b) in back.r.iter().zip(&out.returns) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300));
        }
        assert_eq!(back.s.len(), out.spreads.len());
    }

    #[test]
    fn malformed_series() {
        assert!(matches!(read_series("x,y\n1,2\n".as_bytes()), Err(SeriesError::Malformed { line: 1, .. })));
        assert!(matches!(read_series("r,s\n1,2\n1,z\n".as_bytes()), Err(SeriesError::Malformed { line: 3, .. })));
        assert!(read_series("r,s\n".as_bytes()).is_err());
        let ok = read_series("s,t,r\n0.1,0,-0.5\n".as_bytes()).unwrap();
        assert_eq!((ok.r[0], ok.s[0]), (-0.5, 0.1));
    }

    #[test]
    fn summary_has_contract_fields() {
        let out = run(&SimConfig::azn(40_000, 1)).unwrap();
        let s = SimSummary::new(&out, 3000.0, 0.05);
        let v = serde_json::to_value(&s).unwrap();
        for k in ["E_abs_r", "E_s", "sigma_abs_r", "sigma_s", "alpha_r", "alpha_s", "schema_version", "verdict"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert_eq!(v["verdict"], "bounded");
        assert!(s.E_s > 0.0 && s.E_abs_r > 0.0);
    }

    #[test]
    fn manifest_round_trip() {
        let m = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: "simulate".into(),
            input: None,
            config: "flow.T=1\n".into(),
            seed: 1,
            version: "0.1.0".into(),
            outputs: vec!["series.csv".into()],
            duration_secs: 0.5,
        };
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<RunManifest>(&text).unwrap(), m);
    }
}
