use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    alice_encode, bob_detect, sift, transmit, trial_rng, ChannelModel, DetectionRecord, DetectorModel, SiftOutcome,
};
use crate::error::{Error, Result};
use crate::interferometer::{interfere_parts, Port, REALISTIC_VISIBILITY};
use crate::wavepacket::{make_waveform, Envelope, SourceModel};

/// Stream reserved for session-level draws (heralding-rate jitter).
const SESSION_STREAM: u64 = u64::MAX;

/// Everything a session needs besides the seed and trial count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub envelope: Envelope,
    pub n_bins: usize,
    /// Window in characteristic widths; `None` uses the envelope default.
    pub span: Option<f64>,
    pub visibility: f64,
    pub source: SourceModel,
    pub channel: ChannelModel,
    pub detector: DetectorModel,
}

impl SessionConfig {
    /// Field-test setup: the double-exponential source cut into 50 bins,
    /// realistic visibility, campus loss budget and SNSPDs.
    pub fn field_test() -> Self {
        let source = SourceModel::field_test();
        Self {
            envelope: Envelope::DoubleExponential {
                gamma_s: source.gamma_s,
                gamma_i: source.gamma_i,
            },
            n_bins: 50,
            span: None,
            visibility: REALISTIC_VISIBILITY,
            source,
            channel: ChannelModel::field_test(),
            detector: DetectorModel::snspd(),
        }
    }

    pub fn span(&self) -> f64 {
        self.span.unwrap_or_else(|| self.envelope.default_span())
    }

    /// Heralded photons per second before jitter.
    pub fn heralding_rate(&self) -> f64 {
        self.source.generation_rate()
    }

    pub fn validate(&self) -> Result<()> {
        self.envelope.validate()?;
        if self.n_bins < 2 {
            return Err(Error::invalid(
                "wavepacket.n_bins",
                format!("must be >= 2, got {}", self.n_bins),
            ));
        }
        if let Some(span) = self.span {
            if !(span > 0.0 && span.is_finite()) {
                return Err(Error::invalid(
                    "wavepacket.span",
                    format!("must be finite and > 0, got {span}"),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::invalid(
                "interferometer.visibility",
                format!("must lie in [0, 1], got {}", self.visibility),
            ));
        }
        self.source.validate()?;
        if self.heralding_rate() <= 0.0 {
            return Err(Error::invalid(
                "source.pump_mw",
                "rate_per_mw * pump_mw must be positive to convert trials into time",
            ));
        }
        self.channel.validate()?;
        self.detector.validate()
    }
}

/// Counts and rates of one simulated session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub trials: u64,
    pub detected: u64,
    pub sifted_bits: u64,
    pub errors: u64,
    /// Clicks in the first or last slot.
    pub edge_detections: u64,
    pub dark_detections: u64,
    /// Heralding rate after jitter (s⁻¹).
    pub heralding_rate_hz: f64,
    /// Simulated duration, `trials / heralding_rate_hz` (s).
    pub wall_time_s: f64,
    pub sifted_rate_bps: f64,
    /// `errors / sifted_bits`, 0 when nothing was sifted.
    pub qber: f64,
    /// `sifted_bits / detected`.
    pub kce_estimate: f64,
    /// Correct sifted bits per detection, `(sifted_bits − errors) / detected`.
    pub interference_success: f64,
}

/// One row of the optional per-detection log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DetectionLogEntry {
    pub trial_id: u64,
    pub slot: usize,
    pub port: Port,
    pub is_dark: bool,
    /// `None` for discarded (edge-slot) detections.
    pub alice_bit: Option<bool>,
    pub bob_bit: Option<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    detected: u64,
    sifted: u64,
    errors: u64,
    edge: u64,
    dark: u64,
}

impl Tally {
    fn record(mut self, outcome: Option<(DetectionRecord, SiftOutcome)>) -> Self {
        if let Some((record, sifted)) = outcome {
            self.detected += 1;
            self.dark += u64::from(record.is_dark);
            match sifted {
                SiftOutcome::Discarded => self.edge += 1,
                bit => {
                    self.sifted += 1;
                    self.errors += u64::from(bit.is_error());
                }
            }
        }
        self
    }

    fn merge(self, other: Self) -> Self {
        Tally {
            detected: self.detected + other.detected,
            sifted: self.sifted + other.sifted,
            errors: self.errors + other.errors,
            edge: self.edge + other.edge,
            dark: self.dark + other.dark,
        }
    }
}

/// Session constants shared read-only by all trials.
struct Prepared<'a> {
    config: &'a SessionConfig,
    amplitudes: Vec<f64>,
    frame_duration: f64,
    seed: u64,
}

impl Prepared<'_> {
    fn trial(&self, trial_id: u64) -> Result<Option<(DetectionRecord, SiftOutcome)>> {
        let mut rng = trial_rng(self.seed, trial_id);
        let (phases, bits) = alice_encode(self.config.n_bins, &mut rng)?;
        let arrived = transmit(&mut rng, &self.config.channel, &self.config.detector);
        let dist = interfere_parts(&self.amplitudes, &phases, self.config.visibility)?;
        let Some(record) = bob_detect(
            trial_id,
            &dist,
            arrived,
            &self.config.detector,
            self.frame_duration,
            &mut rng,
        ) else {
            return Ok(None);
        };
        let outcome = sift(&bits, &record)?;
        Ok(Some((record, outcome)))
    }
}

fn prepare(config: &SessionConfig, seed: u64, n_trials: u64) -> Result<Prepared<'_>> {
    if n_trials == 0 {
        return Err(Error::EmptySession);
    }
    config.validate()?;
    let wavepacket = make_waveform(&config.envelope, config.n_bins, config.span())?;
    Ok(Prepared {
        config,
        frame_duration: (config.n_bins + 1) as f64 * wavepacket.bin_period(),
        amplitudes: wavepacket.amplitudes().to_vec(),
        seed,
    })
}

fn finish(config: &SessionConfig, seed: u64, n_trials: u64, tally: Tally) -> SessionStats {
    let jitter = config.source.rate_jitter;
    let factor = if jitter > 0.0 {
        let u: f64 = trial_rng(seed, SESSION_STREAM).random();
        1.0 + jitter * (2.0 * u - 1.0)
    } else {
        1.0
    };
    let heralding_rate_hz = config.heralding_rate() * factor;
    let wall_time_s = n_trials as f64 / heralding_rate_hz;
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    SessionStats {
        trials: n_trials,
        detected: tally.detected,
        sifted_bits: tally.sifted,
        errors: tally.errors,
        edge_detections: tally.edge,
        dark_detections: tally.dark,
        heralding_rate_hz,
        wall_time_s,
        sifted_rate_bps: tally.sifted as f64 / wall_time_s,
        qber: ratio(tally.errors, tally.sifted),
        kce_estimate: ratio(tally.sifted, tally.detected),
        interference_success: ratio(tally.sifted - tally.errors, tally.detected),
    }
}

/// Runs `n_trials` heralded photons through the protocol.
///
/// Trials run in parallel; the result depends only on `(config, seed,
/// n_trials)`.
pub fn run_session(config: &SessionConfig, seed: u64, n_trials: u64) -> Result<SessionStats> {
    let prepared = prepare(config, seed, n_trials)?;
    let tally = (0..n_trials)
        .into_par_iter()
        .map(|t| prepared.trial(t))
        .try_fold(Tally::default, |acc, outcome| outcome.map(|o| acc.record(o)))
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
    Ok(finish(config, seed, n_trials, tally))
}

/// [`run_session`] that also returns every detection in trial order.
pub fn run_session_with_log(
    config: &SessionConfig,
    seed: u64,
    n_trials: u64,
) -> Result<(SessionStats, Vec<DetectionLogEntry>)> {
    let prepared = prepare(config, seed, n_trials)?;
    let outcomes: Vec<_> = (0..n_trials)
        .into_par_iter()
        .map(|t| prepared.trial(t))
        .collect::<Result<Vec<_>>>()?;

    let tally = outcomes.iter().fold(Tally::default(), |acc, o| acc.record(*o));
    let log = outcomes
        .into_iter()
        .flatten()
        .map(|(record, outcome)| {
            let (alice_bit, bob_bit) = match outcome {
                SiftOutcome::Discarded => (None, None),
                SiftOutcome::Bit { bob, alice } => (Some(alice), Some(bob)),
            };
            DetectionLogEntry {
                trial_id: record.trial_id,
                slot: record.slot,
                port: record.port,
                is_dark: record.is_dark,
                alice_bit,
                bob_bit,
            }
        })
        .collect();
    Ok((finish(config, seed, n_trials, tally), log))
}
