use std::f64::consts::SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Temporal intensity profile of a single-photon wavepacket.
///
/// All envelopes are normalised densities over time with their peak at
/// `t = 0`. Widths are in seconds, decay rates in s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    /// Uniform intensity over `width`.
    Flat { width: f64 },
    /// Symmetric triangle with full base `width`.
    Triangle { width: f64 },
    /// Gaussian intensity with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Rises as `exp(Γs t)` before the peak and decays as `exp(−Γi t)` after.
    DoubleExponential { gamma_s: f64, gamma_i: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Flat,
    Triangle,
    Gaussian,
    DoubleExponential,
}

impl EnvelopeKind {
    pub const ALL: [EnvelopeKind; 4] = [
        EnvelopeKind::Flat,
        EnvelopeKind::Triangle,
        EnvelopeKind::Gaussian,
        EnvelopeKind::DoubleExponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvelopeKind::Flat => "flat",
            EnvelopeKind::Triangle => "triangle",
            EnvelopeKind::Gaussian => "gaussian",
            EnvelopeKind::DoubleExponential => "double_exponential",
        }
    }
}

impl fmt::Display for EnvelopeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EnvelopeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvelopeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("envelope", format!("unknown envelope kind `{s}`")))
    }
}

impl Envelope {
    pub fn kind(&self) -> EnvelopeKind {
        match self {
            Envelope::Flat { .. } => EnvelopeKind::Flat,
            Envelope::Triangle { .. } => EnvelopeKind::Triangle,
            Envelope::Gaussian { .. } => EnvelopeKind::Gaussian,
            Envelope::DoubleExponential { .. } => EnvelopeKind::DoubleExponential,
        }
    }

    /// An envelope of the given family sized against a double-exponential
    /// source with rates `gamma_s`, `gamma_i`.
    ///
    /// With each family's default span every member covers the same window,
    /// `4/Γs + 4/Γi`, so they share a bin period at equal `N`.
    pub fn matched(kind: EnvelopeKind, gamma_s: f64, gamma_i: f64) -> Self {
        let mean_decay = 0.5 * (1.0 / gamma_s + 1.0 / gamma_i);
        match kind {
            EnvelopeKind::Flat => Envelope::Flat {
                width: 8.0 * mean_decay,
            },
            EnvelopeKind::Triangle => Envelope::Triangle {
                width: 8.0 * mean_decay,
            },
            EnvelopeKind::Gaussian => Envelope::Gaussian { sigma: mean_decay },
            EnvelopeKind::DoubleExponential => Envelope::DoubleExponential { gamma_s, gamma_i },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let params: &[(&str, f64)] = match self {
            Envelope::Flat { width } | Envelope::Triangle { width } => &[("wavepacket.envelope.width", *width)],
            Envelope::Gaussian { sigma } => &[("wavepacket.envelope.sigma", *sigma)],
            Envelope::DoubleExponential { gamma_s, gamma_i } => &[
                ("wavepacket.envelope.gamma_s", *gamma_s),
                ("wavepacket.envelope.gamma_i", *gamma_i),
            ],
        };
        for (field, v) in params {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(*field, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Span (in characteristic widths) used when none is given: ±4σ for the
    /// Gaussian, `[−4/Γs, 4/Γi]` for the double exponential and the full
    /// support for flat and triangle.
    pub fn default_span(&self) -> f64 {
        match self {
            Envelope::Flat { .. } | Envelope::Triangle { .. } => 1.0,
            Envelope::Gaussian { .. } | Envelope::DoubleExponential { .. } => 4.0,
        }
    }

    /// Sampling window `[start, end]` (s) for a given span.
    pub fn window(&self, span: f64) -> (f64, f64) {
        match *self {
            Envelope::Flat { width } | Envelope::Triangle { width } => (-0.5 * span * width, 0.5 * span * width),
            Envelope::Gaussian { sigma } => (-span * sigma, span * sigma),
            Envelope::DoubleExponential { gamma_s, gamma_i } => (-span / gamma_s, span / gamma_i),
        }
    }

    /// Normalised intensity at time `t`.
    pub fn density(&self, t: f64) -> f64 {
        match *self {
            Envelope::Flat { width } => {
                if t.abs() <= 0.5 * width {
                    1.0 / width
                } else {
                    0.0
                }
            }
            Envelope::Triangle { width } => {
                let half = 0.5 * width;
                if t.abs() <= half {
                    (1.0 - t.abs() / half) / half
                } else {
                    0.0
                }
            }
            Envelope::Gaussian { sigma } => {
                let z = t / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Envelope::DoubleExponential { gamma_s, gamma_i } => {
                let peak = gamma_s * gamma_i / (gamma_s + gamma_i);
                if t < 0.0 {
                    peak * (gamma_s * t).exp()
                } else {
                    peak * (-gamma_i * t).exp()
                }
            }
        }
    }

    /// Probability contained in `[a, b]`, `a <= b`, computed in closed form.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        debug_assert!(a <= b);
        match *self {
            Envelope::Flat { width } => {
                let half = 0.5 * width;
                let lo = a.max(-half);
                let hi = b.min(half);
                if hi > lo {
                    (hi - lo) / width
                } else {
                    0.0
                }
            }
            Envelope::Triangle { width } => triangle_cdf(b, width) - triangle_cdf(a, width),
            Envelope::Gaussian { sigma } => gaussian_mass(a / sigma, b / sigma),
            Envelope::DoubleExponential { gamma_s, gamma_i } => {
                let peak = gamma_s * gamma_i / (gamma_s + gamma_i);
                let mut m = 0.0;
                if a < 0.0 {
                    // ∫ exp(Γs t) over [a, hi]
                    let hi = b.min(0.0);
                    m += peak / gamma_s * (gamma_s * hi).exp() * -(gamma_s * (a - hi)).exp_m1();
                }
                if b > 0.0 {
                    let lo = a.max(0.0);
                    m += peak / gamma_i * (-gamma_i * lo).exp() * -(-gamma_i * (b - lo)).exp_m1();
                }
                m
            }
        }
    }
}

fn triangle_cdf(t: f64, width: f64) -> f64 {
    let half = 0.5 * width;
    if t <= -half {
        0.0
    } else if t <= 0.0 {
        let u = (t + half) / half;
        0.5 * u * u
    } else if t < half {
        let u = (half - t) / half;
        1.0 - 0.5 * u * u
    } else {
        1.0
    }
}

/// Standard normal mass on `[za, zb]`, using the complementary error
/// function on the tail side to keep relative precision far from the mean.
fn gaussian_mass(za: f64, zb: f64) -> f64 {
    let (xa, xb) = (za / SQRT_2, zb / SQRT_2);
    if za >= 0.0 {
        0.5 * (libm::erfc(xa) - libm::erfc(xb))
    } else if zb <= 0.0 {
        0.5 * (libm::erfc(-xb) - libm::erfc(-xa))
    } else {
        0.5 * (libm::erf(xb) - libm::erf(xa))
    }
}
