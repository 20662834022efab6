//! CSV and JSON outputs.
//!
//! `episodes.csv` holds one row per episode record; `episodes_smoothed.csv`
//! holds seed-averaged curves under a trailing moving average; `summary.json`
//! holds aggregates and the fully resolved configuration. Everything except
//! the summary's `metadata` block is a pure function of the results.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::convergence::{smooth, ConvergenceRule};
use super::runner::{summarize, ExperimentResults, ModeSummary, RunFailure};
use crate::agent::{AgentMode, EpisodeRecord};
use crate::error::{Error, Result};

pub const EPISODES_CSV: &str = "episodes.csv";
pub const SMOOTHED_CSV: &str = "episodes_smoothed.csv";
pub const SUMMARY_JSON: &str = "summary.json";

pub const CSV_HEADER: [&str; 9] = [
    "episode",
    "seed",
    "mode",
    "return",
    "return_discounted",
    "length",
    "collisions",
    "epsilon",
    "wasserstein",
];

/// Window of the moving average applied in the smoothed export.
pub const SMOOTHING_WINDOW: usize = 10;

/// Formats a real with `sig` significant digits, `%g` style.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds a value the way the CSV export does.
pub fn quantize(x: f64) -> f64 {
    format_sig(x, 6).parse().unwrap_or(x)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

pub fn write_episodes_csv(records: &[EpisodeRecord], path: impl AsRef<Path>) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no episode records to export".into()));
    }
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.episode.to_string(),
            r.seed.to_string(),
            r.mode.to_string(),
            format_sig(r.return_undiscounted, 6),
            format_sig(r.return_discounted, 6),
            r.length.to_string(),
            r.collisions.to_string(),
            format_sig(r.epsilon, 6),
            format_sig(r.wasserstein, 6),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_episodes_csv(path: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let records = reader
        .deserialize()
        .collect::<std::result::Result<Vec<EpisodeRecord>, _>>()?;
    Ok(records)
}

/// Seed-averaged, moving-average-smoothed curves per mode.
pub fn write_smoothed_csv(records: &[EpisodeRecord], path: impl AsRef<Path>) -> Result<()> {
    let summaries = summarize(records, &ConvergenceRule::default());
    let mut w = csv_writer(path.as_ref())?;
    w.write_record([
        "episode",
        "mode",
        "return",
        "return_discounted",
        "length",
        "collisions",
        "wasserstein",
    ])?;
    for (mode, s) in &summaries {
        let columns = [
            smooth(&s.return_per_episode.mean, SMOOTHING_WINDOW),
            smooth(&s.return_discounted_per_episode.mean, SMOOTHING_WINDOW),
            smooth(&s.length_per_episode.mean, SMOOTHING_WINDOW),
            smooth(&s.collisions_per_episode.mean, SMOOTHING_WINDOW),
            smooth(&s.wasserstein_per_episode.mean, SMOOTHING_WINDOW),
        ];
        for e in 0..columns[0].len() {
            let mut row = vec![e.to_string(), mode.to_string()];
            row.extend(columns.iter().map(|c| format_sig(c[e], 6)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub config: &'a ExperimentConfig,
    pub modes: BTreeMap<AgentMode, ModeSummary>,
    pub failures: &'a [RunFailure],
    pub metadata: Metadata,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub generator: String,
    pub out_dir: String,
    pub generated_at_unix: u64,
}

pub fn build_summary<'a>(results: &'a ExperimentResults, out_dir: &Path) -> Summary<'a> {
    let generated_at_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Summary {
        config: &results.config,
        modes: summarize(&results.records, &ConvergenceRule::default()),
        failures: &results.failures,
        metadata: Metadata {
            generator: concat!("otq ", env!("CARGO_PKG_VERSION")).to_string(),
            out_dir: out_dir.display().to_string(),
            generated_at_unix,
        },
    }
}

/// Writes all three output files into `out_dir`, creating it if needed.
pub fn export(results: &ExperimentResults, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let episodes = out_dir.join(EPISODES_CSV);
    let smoothed = out_dir.join(SMOOTHED_CSV);
    let summary = out_dir.join(SUMMARY_JSON);
    write_episodes_csv(&results.records, &episodes)?;
    write_smoothed_csv(&results.records, &smoothed)?;
    let mut file = fs::File::create(&summary)?;
    serde_json::to_writer_pretty(&mut file, &build_summary(results, out_dir))?;
    file.write_all(b"\n")?;
    Ok(vec![episodes, smoothed, summary])
}
