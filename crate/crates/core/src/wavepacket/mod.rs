//! Heralded single-photon wavepacket: the signal-idler coincidence shape of a
//! doubly resonant down-conversion source, its spectral width, and its
//! discretization into time-bin amplitudes.

mod envelope;
mod fit;

pub use envelope::{Envelope, EnvelopeKind};
pub use fit::{fit_g2, G2Fit};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};

/// Photon-pair source parameters.
///
/// Rates are in s⁻¹. `rate_per_mw` is the pair generation rate per mW of pump,
/// so the generation rate entering the correlation function is
/// `rate_per_mw * pump_mw`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceModel {
    /// Signal cavity decay rate (s⁻¹).
    pub gamma_s: f64,
    /// Idler cavity decay rate (s⁻¹).
    pub gamma_i: f64,
    /// Parametric coupling constant (s⁻¹).
    pub kappa: f64,
    /// Pair generation rate per mW of pump power (s⁻¹ mW⁻¹).
    pub rate_per_mw: f64,
    /// Pump power (mW).
    pub pump_mw: f64,
    /// Mean photon-pair number per heralding window.
    pub mean_pairs_mu: f64,
    /// Half-width of the uniform relative jitter applied to the heralding
    /// rate of a session (0 disables, 0.15 matches the observed fluctuation).
    #[serde(default)]
    pub rate_jitter: f64,
}

impl SourceModel {
    /// Source used in the field test: decay times 45.3 ns and 44.1 ns,
    /// 4.2e5 s⁻¹ mW⁻¹ and a mean photon number of 0.37.
    pub fn field_test() -> Self {
        Self {
            gamma_s: 1.0 / 45.3e-9,
            gamma_i: 1.0 / 44.1e-9,
            kappa: 1.0e6,
            rate_per_mw: 4.2e5,
            pump_mw: 0.03,
            mean_pairs_mu: 0.37,
            rate_jitter: 0.0,
        }
    }

    /// Pair generation rate `R` in s⁻¹.
    pub fn generation_rate(&self) -> f64 {
        self.rate_per_mw * self.pump_mw
    }

    /// Height of the correlated part of G²(τ) above the accidental floor R².
    pub fn correlation_peak(&self) -> f64 {
        let sum = self.gamma_s + self.gamma_i;
        4.0 * self.kappa * self.kappa * self.gamma_s * self.gamma_i / (sum * sum)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("source.gamma_s", self.gamma_s), ("source.gamma_i", self.gamma_i)];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        let non_negative = [
            ("source.kappa", self.kappa),
            ("source.rate_per_mw", self.rate_per_mw),
            ("source.pump_mw", self.pump_mw),
            ("source.mean_pairs_mu", self.mean_pairs_mu),
        ];
        for (field, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.rate_jitter) {
            return Err(Error::invalid(
                "source.rate_jitter",
                format!("must lie in [0, 1), got {}", self.rate_jitter),
            ));
        }
        Ok(())
    }
}

/// Signal-idler coincidence rate G²(τ) for a delay `tau` (s).
///
/// The accidental floor R² plus a double exponential rising with Γs before
/// the idler detection and decaying with Γi after it.
pub fn glauber_g2(tau: f64, source: &SourceModel) -> f64 {
    let r = source.generation_rate();
    let shape = if tau < 0.0 {
        (source.gamma_s * tau).exp()
    } else {
        (-source.gamma_i * tau).exp()
    };
    r * r + source.correlation_peak() * shape
}

/// Single-photon bandwidth Δf (Hz) of the double-exponential wavepacket.
///
/// Δf = [(√(Γs⁴ + 6Γs²Γi² + Γi⁴) − Γs² − Γi²)/2]^½ / 2π, evaluated in the
/// rationalized form `4Γs²Γi² / (√(…) + Γs² + Γi²)` to avoid cancellation.
pub fn bandwidth(gamma_s: f64, gamma_i: f64) -> Result<f64> {
    check_positive("gamma_s", gamma_s)?;
    check_positive("gamma_i", gamma_i)?;
    // Order the operands so the result is bit-identical under exchange.
    let (lo, hi) = if gamma_s <= gamma_i {
        (gamma_s, gamma_i)
    } else {
        (gamma_i, gamma_s)
    };
    let lo2 = lo * lo;
    let hi2 = hi * hi;
    let root = (lo2 * lo2 + 6.0 * lo2 * hi2 + hi2 * hi2).sqrt();
    let inner = 4.0 * lo2 * hi2 / (root + lo2 + hi2);
    Ok((inner / 2.0).sqrt() / (2.0 * PI))
}

/// Full width (s) over which the correlated part of G²(τ) exceeds e⁻² of
/// its peak: `2/Γs + 2/Γi`.
pub fn one_over_e2_width(gamma_s: f64, gamma_i: f64) -> Result<f64> {
    check_positive("gamma_s", gamma_s)?;
    check_positive("gamma_i", gamma_i)?;
    Ok(2.0 / gamma_s + 2.0 / gamma_i)
}

/// A photon cut into `N` time bins with real, non-negative amplitudes
/// normalised so that `Σ aₖ² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedWavepacket {
    amplitudes: Vec<f64>,
    bin_period: f64,
    envelope: Option<Envelope>,
}

impl DiscretizedWavepacket {
    /// Builds a wavepacket from arbitrary non-negative amplitudes, rescaling
    /// them to unit norm.
    pub fn from_amplitudes(amplitudes: Vec<f64>, bin_period: f64) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::invalid("n_bins", "at least two time bins are required"));
        }
        check_positive("bin_period", bin_period)?;
        if amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::invalid("amplitudes", "must be finite and non-negative"));
        }
        let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateWaveform("all amplitudes are zero".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
            bin_period,
            envelope: None,
        })
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn n_bins(&self) -> usize {
        self.amplitudes.len()
    }

    /// Duration of one time bin (s).
    pub fn bin_period(&self) -> f64 {
        self.bin_period
    }

    /// Envelope the amplitudes were sampled from, if any.
    pub fn envelope(&self) -> Option<&Envelope> {
        self.envelope.as_ref()
    }

    /// Per-bin occupation probabilities `aₖ²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a * a).collect()
    }
}

/// Cuts `envelope` into `n_bins` equal time bins.
///
/// The window covers `span` characteristic widths of the envelope, centred on
/// its peak (see [`Envelope::window`]). Each amplitude is the square root of
/// the intensity integrated over its bin, renormalised to unit total
/// probability, so mass outside the window is discarded.
pub fn make_waveform(envelope: &Envelope, n_bins: usize, span: f64) -> Result<DiscretizedWavepacket> {
    envelope.validate()?;
    if n_bins < 2 {
        return Err(Error::invalid(
            "wavepacket.n_bins",
            format!("must be >= 2, got {n_bins}"),
        ));
    }
    check_positive("span", span)?;

    let (start, end) = envelope.window(span);
    let width = end - start;
    let edge = |k: usize| start + width * (k as f64) / (n_bins as f64);
    let masses: Vec<f64> = (0..n_bins).map(|k| envelope.mass(edge(k), edge(k + 1))).collect();

    let occupied = masses.iter().filter(|m| **m > 0.0).count();
    if occupied < 2 {
        return Err(Error::DegenerateWaveform(format!(
            "{occupied} of {n_bins} bins carry probability; span {span} is out of range for this envelope"
        )));
    }
    let total: f64 = masses.iter().sum();
    let amplitudes = masses.iter().map(|m| (m / total).sqrt()).collect();
    Ok(DiscretizedWavepacket {
        amplitudes,
        bin_period: width / n_bins as f64,
        envelope: Some(*envelope),
    })
}

/// [`make_waveform`] with the envelope's default span.
pub fn make_default_waveform(envelope: &Envelope, n_bins: usize) -> Result<DiscretizedWavepacket> {
    make_waveform(envelope, n_bins, envelope.default_span())
}
