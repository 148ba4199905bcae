//! TOML run configuration with one section per library module.

use std::path::{Path, PathBuf};

use dps_qkd::protocol::{ChannelModel, DetectorModel, SessionConfig};
use dps_qkd::wavepacket::{Envelope, SourceModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const PRESETS: [&str; 2] = ["paper-field-test", "fig1-theory"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub wavepacket: WavepacketSection,
    pub interferometer: InterferometerSection,
    pub source: SourceModel,
    pub channel: ChannelModel,
    pub detector: DetectorModel,
    #[serde(default)]
    pub security: SecuritySection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavepacketSection {
    pub n_bins: usize,
    /// Window in characteristic widths; the envelope default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<f64>,
    pub envelope: Envelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferometerSection {
    pub visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecuritySection {
    /// Free spectral range of the cavity filter (Hz).
    pub f_fsr_hz: f64,
}

impl Default for SecuritySection {
    fn default() -> Self {
        Self { f_fsr_hz: 3.0e8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub n_trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections_csv: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            n_trials: 1_000_000,
            out: None,
            detections_csv: None,
        }
    }
}

impl RunConfig {
    pub fn from_session(session: &SessionConfig) -> Self {
        Self {
            wavepacket: WavepacketSection {
                n_bins: session.n_bins,
                span: session.span,
                envelope: session.envelope,
            },
            interferometer: InterferometerSection {
                visibility: session.visibility,
            },
            source: session.source,
            channel: session.channel,
            detector: session.detector,
            security: SecuritySection::default(),
            run: RunSection::default(),
        }
    }

    pub fn preset(name: &str) -> CliResult<Self> {
        match name {
            "paper-field-test" => Ok(Self::from_session(&SessionConfig::field_test())),
            "fig1-theory" => {
                let session = SessionConfig {
                    visibility: 1.0,
                    channel: ChannelModel::lossless(),
                    detector: DetectorModel::ideal(),
                    ..SessionConfig::field_test()
                };
                Ok(Self::from_session(&session))
            }
            other => Err(CliError::Config(format!(
                "unknown preset `{other}` (available: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn session(&self) -> SessionConfig {
        SessionConfig {
            envelope: self.wavepacket.envelope,
            n_bins: self.wavepacket.n_bins,
            span: self.wavepacket.span,
            visibility: self.interferometer.visibility,
            source: self.source,
            channel: self.channel,
            detector: self.detector,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.session().validate()?;
        let fsr = self.security.f_fsr_hz;
        if !(fsr > 0.0 && fsr.is_finite()) {
            return Err(CliError::Config(format!(
                "invalid parameter `security.f_fsr_hz`: must be finite and > 0, got {fsr}"
            )));
        }
        Ok(())
    }

    /// Parses and validates a TOML document. Errors name the offending key.
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(format!("TOML syntax: {e}")))?;
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.message().trim_end();
            if path == "." {
                CliError::Config(format!("config: {message}"))
            } else {
                CliError::Config(format!("config key `{path}`: {message}"))
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are all TOML-representable")
    }
}

/// Default configuration when neither `--config` nor `--preset` is given.
pub fn default_config() -> RunConfig {
    RunConfig::preset("paper-field-test").expect("built-in preset")
}
