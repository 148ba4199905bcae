use std::path::{Path, PathBuf};

use dps_qkd::interferometer::kce_curve;
use dps_qkd::protocol::{run_session, run_session_with_log, DetectionLogEntry};
use dps_qkd::security::SecurityBudget;
use dps_qkd::wavepacket::{bandwidth, fit_g2, one_over_e2_width, Envelope, EnvelopeKind};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{csv_error, format_sig, to_rounded_json, Sink, CSV_DIGITS};

pub const KCE_HEADER: [&str; 5] = ["n_bins", "kce", "qber", "visibility", "envelope"];
pub const DETECTIONS_HEADER: [&str; 5] = ["trial_id", "slot", "port", "alice_bit", "bob_bit"];

fn parse_n_bins(list: &str) -> CliResult<Vec<usize>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::Config(format!("--n-bins: `{s}` is not a bin count")))
        })
        .collect()
}

fn parse_envelopes(list: &str, config: &RunConfig) -> CliResult<Vec<(Envelope, f64)>> {
    let matched = |kind| {
        let envelope = Envelope::matched(kind, config.source.gamma_s, config.source.gamma_i);
        (envelope, envelope.default_span())
    };
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "all" => out.extend(EnvelopeKind::ALL.into_iter().map(matched)),
            "config" => {
                let envelope = config.wavepacket.envelope;
                out.push((
                    envelope,
                    config.wavepacket.span.unwrap_or_else(|| envelope.default_span()),
                ));
            }
            _ => {
                let kind: EnvelopeKind = name.parse().map_err(|_| {
                    CliError::Config(format!(
                        "--envelopes: unknown envelope `{name}` (flat, triangle, gaussian, double_exponential, all, config)"
                    ))
                })?;
                out.push(matched(kind));
            }
        }
    }
    Ok(out)
}

/// Writes `n_bins,kce,qber,visibility,envelope` rows for every requested
/// envelope and bin count.
pub fn kce_sweep(config: &RunConfig, n_bins: &str, envelopes: &str) -> CliResult<()> {
    let ns = parse_n_bins(n_bins)?;
    let envelopes = parse_envelopes(envelopes, config)?;
    let visibility = config.interferometer.visibility;

    let mut rows = Vec::new();
    for (envelope, span) in &envelopes {
        rows.extend(kce_curve(envelope, *span, &ns, visibility)?);
    }

    let path = config.run.out.clone();
    let shown = path.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut writer = csv::Writer::from_writer(Sink::open(path.as_deref())?);
    writer.write_record(KCE_HEADER).map_err(|e| csv_error(&shown, e))?;
    for row in rows {
        writer
            .write_record([
                row.n_bins.to_string(),
                format_sig(row.kce, CSV_DIGITS),
                format_sig(row.qber, CSV_DIGITS),
                format_sig(row.visibility, CSV_DIGITS),
                row.envelope.name().to_string(),
            ])
            .map_err(|e| csv_error(&shown, e))?;
    }
    let sink = writer.into_inner().map_err(|e| CliError::io(&shown, e.into_error()))?;
    sink.finish()
}

fn bit_field(bit: Option<bool>) -> &'static str {
    match bit {
        None => "",
        Some(false) => "0",
        Some(true) => "1",
    }
}

fn write_detections(path: &Path, log: &[DetectionLogEntry]) -> CliResult<()> {
    let mut writer = csv::Writer::from_writer(Sink::open(Some(path))?);
    writer.write_record(DETECTIONS_HEADER).map_err(|e| csv_error(path, e))?;
    for entry in log {
        writer
            .write_record([
                entry.trial_id.to_string().as_str(),
                entry.slot.to_string().as_str(),
                entry.port.name(),
                bit_field(entry.alice_bit),
                bit_field(entry.bob_bit),
            ])
            .map_err(|e| csv_error(path, e))?;
    }
    let sink = writer.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    sink.finish()
}

/// Runs a session and emits `{seed, <stats>, config}` as JSON.
pub fn simulate(config: &RunConfig, detections: Option<PathBuf>) -> CliResult<()> {
    let session = config.session();
    let (seed, n_trials) = (config.run.seed, config.run.n_trials);
    let detections = detections.or_else(|| config.run.detections_csv.clone());
    let stats = match &detections {
        Some(path) => {
            let (stats, log) = run_session_with_log(&session, seed, n_trials)?;
            write_detections(path, &log)?;
            stats
        }
        None => run_session(&session, seed, n_trials)?,
    };

    let mut report = Map::new();
    report.insert("seed".into(), Value::from(seed));
    match to_rounded_json(&stats) {
        Value::Object(fields) => report.extend(fields),
        _ => unreachable!("SessionStats serializes to an object"),
    }
    let echo = serde_json::to_value(config).expect("config serializes");
    report.insert("config".into(), echo);
    Sink::open(config.run.out.as_deref())?.write_json(&Value::Object(report))
}

#[derive(Debug, Deserialize)]
struct StatsInput {
    sifted_rate_bps: f64,
    qber: f64,
    #[serde(default)]
    config: Option<RunConfig>,
}

#[derive(Debug, Serialize)]
struct SecureRateReport {
    sifted_rate_bps: f64,
    qber: f64,
    mu: f64,
    n_bins: usize,
    delta_f_hz: f64,
    f_fsr_hz: f64,
    #[serde(flatten)]
    report: dps_qkd::security::SecurityReport,
}

/// Evaluates key-rate bounds for the sifted rate and QBER in a stats JSON.
///
/// The mean photon number, bin count and source bandwidth come from the
/// file's `config` echo when present, otherwise from the active config.
pub fn secure_rate(config: &RunConfig, stats_path: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(stats_path).map_err(|e| CliError::io(stats_path, e))?;
    let input: StatsInput = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: invalid stats JSON: {e}", stats_path.display())))?;
    let effective = input.config.as_ref().unwrap_or(config);
    let delta_f = bandwidth(effective.source.gamma_s, effective.source.gamma_i)?;
    let budget = SecurityBudget {
        sifted_rate_bps: input.sifted_rate_bps,
        qber: input.qber,
        f_fsr: effective.security.f_fsr_hz,
        delta_f,
        mu: effective.source.mean_pairs_mu,
    };
    let n_bins = effective.wavepacket.n_bins;
    let report = budget.report(n_bins)?;
    let out = SecureRateReport {
        sifted_rate_bps: budget.sifted_rate_bps,
        qber: budget.qber,
        mu: budget.mu,
        n_bins,
        delta_f_hz: delta_f,
        f_fsr_hz: budget.f_fsr,
        report,
    };
    Sink::open(config.run.out.as_deref())?.write_json(&to_rounded_json(&out))
}

#[derive(Debug, Deserialize)]
struct HistogramRow {
    tau_ns: f64,
    counts: f64,
}

#[derive(Debug, Serialize)]
struct FitReport {
    gamma_s: f64,
    gamma_i: f64,
    peak: f64,
    offset: f64,
    residual_norm: f64,
    iterations: usize,
    width_s: f64,
    bandwidth_hz: f64,
}

pub fn read_histogram(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::Config(format!("{}: {other:?}", path.display())),
        })?;
    reader
        .deserialize::<HistogramRow>()
        .map(|row| {
            row.map(|r| (r.tau_ns * 1e-9, r.counts))
                .map_err(|e| match e.into_kind() {
                    csv::ErrorKind::Io(io) => CliError::io(path, io),
                    csv::ErrorKind::Deserialize { pos, err } => CliError::Config(format!(
                        "{}: line {}: {err}",
                        path.display(),
                        pos.map_or(0, |p| p.line())
                    )),
                    other => CliError::Config(format!("{}: {other:?}", path.display())),
                })
        })
        .collect()
}

/// Fits a `tau_ns,counts` histogram and reports rates, width and bandwidth.
pub fn fit_source(config: &RunConfig, histogram: &Path) -> CliResult<()> {
    let data = read_histogram(histogram)?;
    let fit = fit_g2(&data)?;
    let report = FitReport {
        gamma_s: fit.gamma_s,
        gamma_i: fit.gamma_i,
        peak: fit.peak,
        offset: fit.offset,
        residual_norm: fit.residual_norm,
        iterations: fit.iterations,
        width_s: one_over_e2_width(fit.gamma_s, fit.gamma_i)?,
        bandwidth_hz: bandwidth(fit.gamma_s, fit.gamma_i)?,
    };
    Sink::open(config.run.out.as_deref())?.write_json(&to_rounded_json(&report))
}
