//! Command implementations behind the `rehab-sim` binary, plus the CSV/JSON
//! artifact formats they read and write.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{ConfigDocument, ConfigError};
use crate::experiment::{
    mean_error_by_amplitude, prepare_patient, run_scenarios, AggregateStats, ExperimentOutcome,
    ScenarioConfig, SeedFailure, TrialRecord,
};
use crate::narx::{NarxNetwork, NetworkVariant};

pub const TRIALS_HEADER: [&str; 6] = [
    "seed",
    "trial",
    "amplitude_rad",
    "error_l2",
    "update_rad",
    "clamped",
];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Where the configuration comes from.
#[derive(Debug, Clone)]
pub enum ConfigSource {
    File(PathBuf),
    PaperPreset,
}

pub fn load_config(source: &ConfigSource) -> Result<ConfigDocument, CliError> {
    match source {
        ConfigSource::PaperPreset => Ok(ConfigDocument::paper()),
        ConfigSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            ConfigDocument::from_json(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
    }
}

/// Provenance record written next to command outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_hash: Option<String>,
    pub timestamp_unix: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub failures: Vec<ScenarioFailure>,
    /// Set when any seed failed and outputs cover only the successful ones.
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFailure {
    pub scenario: String,
    pub seed: u64,
    pub error: String,
}

impl RunManifest {
    fn new(command: &str, config_hash: Option<String>) -> Self {
        let timestamp_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash,
            timestamp_unix,
            inputs: Vec::new(),
            outputs: Vec::new(),
            failures: Vec::new(),
            partial: false,
        }
    }

    fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_file(&path, &text)?;
        Ok(path)
    }
}

/// Decimal with 17 significant digits; parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trials_csv(path: &Path, records: &[TrialRecord]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(TRIALS_HEADER).map_err(|e| io_err(path, e))?;
    for r in records {
        w.write_record([
            r.seed.to_string(),
            r.trial.to_string(),
            format_f64(r.amplitude),
            format_f64(r.error_norm),
            format_f64(r.update),
            r.clamped.to_string(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRecord>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| io_err(path, e))?.clone();
    if header.iter().ne(TRIALS_HEADER) {
        return Err(io_err(path, "unexpected trials.csv header"));
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| io_err(path, e))?;
        let bad = |what: &str| io_err(path, format!("row {}: bad {what}", i + 1));
        let f = |k: usize, what: &str| row[k].parse::<f64>().map_err(|_| bad(what));
        out.push(TrialRecord {
            seed: row[0].parse().map_err(|_| bad("seed"))?,
            trial: row[1].parse().map_err(|_| bad("trial"))?,
            amplitude: f(2, "amplitude_rad")?,
            error_norm: f(3, "error_l2")?,
            update: f(4, "update_rad")?,
            clamped: row[5].parse().map_err(|_| bad("clamped"))?,
        });
    }
    Ok(out)
}

/// One seed's trajectory through a session, as stored in `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTrace {
    pub seed: u64,
    pub amplitudes: Vec<f64>,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub stats: AggregateStats,
    pub traces: Vec<SeedTrace>,
    pub failures: Vec<SeedFailure>,
}

impl Summary {
    pub fn from_outcome(cfg: &ScenarioConfig, outcome: &ExperimentOutcome) -> Self {
        Self {
            scenario: outcome.scenario.clone(),
            config: cfg.clone(),
            stats: outcome.stats.clone(),
            traces: outcome
                .sessions
                .iter()
                .map(|s| SeedTrace {
                    seed: s.seed,
                    amplitudes: s.records.iter().map(|r| r.amplitude).collect(),
                    errors: s.records.iter().map(|r| r.error_norm).collect(),
                })
                .collect(),
            failures: outcome.failures.clone(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: not a summary file: {e}", path.display())))
    }
}

pub fn cmd_validate_config(source: &ConfigSource) -> Result<String, CliError> {
    let doc = load_config(source)?;
    for s in doc.scenarios() {
        s.validate()
            .map_err(|e| CliError::Usage(format!("scenario {}: {e}", s.name)))?;
    }
    Ok(doc.hash())
}

#[derive(Debug)]
pub struct PretrainOutput {
    pub network: PathBuf,
    pub report: PathBuf,
}

/// Pre-trains the healthy network of `variant` for `seed` and writes it with its training report.
pub fn cmd_pretrain(
    source: &ConfigSource,
    out_dir: &Path,
    variant: Option<NetworkVariant>,
    seed: Option<u64>,
) -> Result<PretrainOutput, CliError> {
    let doc = load_config(source)?;
    let spec = doc.experiment.scenarios[0].clone();
    let variant = variant.unwrap_or(spec.variant);
    let seed = seed.or_else(|| doc.seeds().first().copied()).unwrap_or(0);
    let mut cfg = doc.scenario(&spec);
    cfg.variant = variant;
    cfg.topology = doc.topology(variant);
    cfg.lesion_removals = doc.narx.lesions.get(variant);
    cfg.condition = crate::experiment::Condition::Healthy;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let (net, report) =
        prepare_patient(&cfg, seed).map_err(|e| CliError::Runtime(e.to_string()))?;
    let stem = format!("network_{}_seed{seed}", variant.name());
    let network = out_dir.join(format!("{stem}.json"));
    let report_path = out_dir.join(format!("{stem}.training.json"));
    write_file(&network, &net.to_json())?;
    write_file(
        &report_path,
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;

    let mut manifest = RunManifest::new("pretrain", Some(doc.hash()));
    if let ConfigSource::File(p) = source {
        manifest.inputs.push(p.display().to_string());
    }
    manifest.outputs = vec![
        network.display().to_string(),
        report_path.display().to_string(),
    ];
    manifest.write(out_dir)?;
    Ok(PretrainOutput {
        network,
        report: report_path,
    })
}

/// Lesions a saved network. Without explicit removals the stroke counts of the matching
/// variant are used.
pub fn cmd_lesion(
    network: &Path,
    out_dir: &Path,
    removals: Option<Vec<usize>>,
    seed: u64,
) -> Result<PathBuf, CliError> {
    let text = fs::read_to_string(network)
        .map_err(|e| CliError::Usage(format!("{}: {e}", network.display())))?;
    let net = NarxNetwork::from_json(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", network.display())))?;
    let removals = match removals {
        Some(r) => r,
        None => [NetworkVariant::Narx1, NetworkVariant::Narx2]
            .into_iter()
            .find(|v| v.hidden_layers() == net.topology().hidden_layers)
            .map(NetworkVariant::stroke_removals)
            .ok_or_else(|| {
                CliError::Usage("network is neither narx1 nor narx2; pass --removals".into())
            })?,
    };
    let lesioned = net
        .lesion(&removals, seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let stem = network
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("network");
    let out = out_dir.join(format!("{stem}_lesioned.json"));
    write_file(&out, &lesioned.to_json())?;
    Ok(out)
}

#[derive(Debug)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub outcomes: Vec<ExperimentOutcome>,
}

/// Runs every scenario of the config and writes `<out>/<scenario>/{trials.csv,summary.json}`
/// plus `<out>/manifest.json`.
pub fn cmd_run(
    source: &ConfigSource,
    out_dir: &Path,
    seeds: Option<Vec<u64>>,
    jobs: Option<usize>,
) -> Result<RunOutput, CliError> {
    let doc = load_config(source)?;
    let mut scenarios = doc.scenarios();
    if let Some(seeds) = &seeds {
        if seeds.is_empty() {
            return Err(CliError::Usage("--seeds selects no seeds".into()));
        }
        for s in &mut scenarios {
            s.seeds = seeds.clone();
        }
    }
    for s in &scenarios {
        s.validate()
            .map_err(|e| CliError::Usage(format!("scenario {}: {e}", s.name)))?;
    }

    let run = || run_scenarios(&scenarios);
    let outcomes = match jobs {
        Some(n) => {
            if n == 0 {
                return Err(CliError::Usage("--jobs must be >= 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(e.to_string()))?
                .install(run)
        }
        None => run(),
    }
    .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut manifest = RunManifest::new("run", Some(doc.hash()));
    if let ConfigSource::File(p) = source {
        manifest.inputs.push(p.display().to_string());
    }
    for (cfg, outcome) in scenarios.iter().zip(&outcomes) {
        let dir = out_dir.join(&cfg.name);
        let records: Vec<TrialRecord> = outcome
            .sessions
            .iter()
            .flat_map(|s| s.records.iter().copied())
            .collect();
        let csv_path = dir.join("trials.csv");
        write_trials_csv(&csv_path, &records)?;
        let summary_path = dir.join("summary.json");
        let summary = Summary::from_outcome(cfg, outcome);
        write_file(
            &summary_path,
            &serde_json::to_string_pretty(&summary).expect("summary serializes"),
        )?;
        manifest.outputs.push(csv_path.display().to_string());
        manifest.outputs.push(summary_path.display().to_string());
        manifest
            .failures
            .extend(outcome.failures.iter().map(|f| ScenarioFailure {
                scenario: cfg.name.clone(),
                seed: f.seed,
                error: f.error.clone(),
            }));
    }
    manifest.partial = !manifest.failures.is_empty();
    manifest.write(out_dir)?;

    if let Some(empty) = outcomes.iter().find(|o| o.sessions.is_empty()) {
        return Err(CliError::Runtime(format!(
            "scenario {} produced no successful seeds (see manifest.json)",
            empty.scenario
        )));
    }
    Ok(RunOutput { manifest, outcomes })
}

#[derive(Debug)]
pub struct FigureFiles {
    pub error_vs_trial: PathBuf,
    pub amplitude_vs_trial: PathBuf,
    pub error_vs_amplitude: PathBuf,
}

fn write_rows(path: &Path, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes plot-ready CSVs from one or more summaries. `seed` picks the trace for
/// the error-versus-amplitude file (default: each summary's first seed).
pub fn cmd_figures(
    summaries: &[PathBuf],
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<FigureFiles, CliError> {
    if summaries.is_empty() {
        return Err(CliError::Usage(
            "figures needs at least one summary.json".into(),
        ));
    }
    let loaded = summaries
        .iter()
        .map(|p| Summary::read(p))
        .collect::<Result<Vec<_>, _>>()?;
    let trials = loaded[0].stats.per_trial.len();
    if let Some((p, s)) = summaries
        .iter()
        .zip(&loaded)
        .find(|(_, s)| s.stats.per_trial.len() != trials)
    {
        return Err(CliError::Usage(format!(
            "{} has {} trials, expected {trials}",
            p.display(),
            s.stats.per_trial.len()
        )));
    }

    let mut header = vec!["trial".to_string()];
    for s in &loaded {
        header.push(format!("{}_mean", s.scenario));
        header.push(format!("{}_std", s.scenario));
    }
    let table = |pick: fn(&crate::experiment::TrialStats) -> (f64, f64)| -> Vec<Vec<String>> {
        (0..trials)
            .map(|k| {
                let mut row = vec![(k + 1).to_string()];
                for s in &loaded {
                    let (m, sd) = pick(&s.stats.per_trial[k]);
                    row.push(format_f64(m));
                    row.push(format_f64(sd));
                }
                row
            })
            .collect()
    };
    let files = FigureFiles {
        error_vs_trial: out_dir.join("fig_error_vs_trial.csv"),
        amplitude_vs_trial: out_dir.join("fig_amplitude_vs_trial.csv"),
        error_vs_amplitude: out_dir.join("fig_error_vs_amplitude.csv"),
    };
    write_rows(
        &files.error_vs_trial,
        header.clone(),
        table(|t| (t.error_mean, t.error_std)),
    )?;
    write_rows(
        &files.amplitude_vs_trial,
        header,
        table(|t| (t.amplitude_mean, t.amplitude_std)),
    )?;

    let mut rows = Vec::new();
    for s in &loaded {
        let trace = match seed {
            Some(k) => s.traces.iter().find(|t| t.seed == k).ok_or_else(|| {
                CliError::Usage(format!("scenario {} has no trace for seed {k}", s.scenario))
            })?,
            None => s
                .traces
                .first()
                .ok_or_else(|| CliError::Usage(format!("scenario {} has no traces", s.scenario)))?,
        };
        let records: Vec<TrialRecord> = trace
            .amplitudes
            .iter()
            .zip(&trace.errors)
            .enumerate()
            .map(|(i, (&amplitude, &error_norm))| TrialRecord {
                seed: trace.seed,
                trial: i + 1,
                amplitude,
                error_norm,
                update: 0.0,
                clamped: false,
            })
            .collect();
        for (a, e) in mean_error_by_amplitude(&records) {
            rows.push(vec![
                s.scenario.clone(),
                trace.seed.to_string(),
                format_f64(a),
                format_f64(e),
            ]);
        }
    }
    write_rows(
        &files.error_vs_amplitude,
        ["scenario", "seed", "amplitude_rad", "mean_error_l2"]
            .map(String::from)
            .to_vec(),
        rows,
    )?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digit_format_round_trips() {
        for v in [
            0.1,
            1.0 / 3.0,
            0.071_123_456_789_012_3,
            1e-300,
            0.0,
            123_456.789,
        ] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Runtime("x".into()).exit_code(), 1);
    }
}
