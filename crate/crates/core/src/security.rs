//! Error budget and secure key rates for DPS QKD with single photons.
//!
//! Key rates assume error correction at the Shannon limit and are expressed
//! per second of sifted key `R_s`:
//!
//! - individual attacks on single photons:
//!   `R_s · {−log₂[1 − e² − (1 − 6e)²/2] − H(e)}`
//! - coherent attacks: `R_s · [1 − H(e) − H((3 + √5)e)]`
//!
//! The coherent-attack bound closes at `e ≈ 4.12 %`, the threshold for
//! unconditional security.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_fraction, check_positive, Error, Result};
use crate::quadrature;

/// QBER at and above which no unconditionally secure key is left.
pub const QBER_THRESHOLD: f64 = 0.0412;

/// `(3 + √5)`, the coherent-attack error amplification.
const COHERENT_FACTOR: f64 = 5.236_067_977_499_79;

pub fn binary_entropy(x: f64) -> Result<f64> {
    check_fraction("x", x)?;
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// True when `qber` is strictly below [`QBER_THRESHOLD`].
pub fn threshold_ok(qber: f64) -> bool {
    qber < QBER_THRESHOLD
}

fn check_qber(qber: f64) -> Result<()> {
    if (0.0..=0.5).contains(&qber) {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "qber",
            value: qber,
            expected: "[0, 0.5]",
        })
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate >= 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "sifted_rate",
            value: rate,
            expected: "finite and >= 0",
        })
    }
}

/// A key rate clamped at zero; `insecure` records that the unclamped bound
/// was negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecureRate {
    pub bps: f64,
    pub insecure: bool,
}

impl SecureRate {
    fn from_factor(rate: f64, factor: f64) -> Self {
        SecureRate {
            bps: (rate * factor).max(0.0),
            insecure: factor < 0.0,
        }
    }
}

/// Collision-probability term `1 − e² − (1 − 6e)²/2`.
fn collision_probability(qber: f64) -> Result<f64> {
    let d = 1.0 - 6.0 * qber;
    let p = 1.0 - qber * qber - 0.5 * d * d;
    if p > 0.0 {
        Ok(p)
    } else {
        Err(Error::Domain {
            name: "qber",
            value: qber,
            expected: "1 − e² − (1 − 6e)²/2 > 0",
        })
    }
}

/// Secure bits per sifted bit against individual attacks.
fn individual_factor(qber: f64) -> Result<f64> {
    check_qber(qber)?;
    Ok(-collision_probability(qber)?.log2() - binary_entropy(qber)?)
}

pub fn secure_rate_individual(sifted_rate: f64, qber: f64) -> Result<SecureRate> {
    check_rate(sifted_rate)?;
    Ok(SecureRate::from_factor(sifted_rate, individual_factor(qber)?))
}

pub fn secure_rate_coherent(sifted_rate: f64, qber: f64) -> Result<SecureRate> {
    check_rate(sifted_rate)?;
    check_qber(qber)?;
    let amplified = COHERENT_FACTOR * qber;
    if amplified > 1.0 {
        return Err(Error::Domain {
            name: "qber",
            value: qber,
            expected: "(3 + √5)·e <= 1",
        });
    }
    let factor = 1.0 - binary_entropy(qber)? - binary_entropy(amplified)?;
    Ok(SecureRate::from_factor(sifted_rate, factor))
}

/// QBER from a Lorentzian photon spectrum of FWHM `delta_f` passing an
/// interferometer with free spectral range `f_fsr`:
///
/// ```text
/// ∫ sin²(πx/f_FSR) · Δf / {2π [x² + (Δf/2)²]} dx = (1 − exp(−πΔf/f_FSR)) / 2
/// ```
///
/// The closed form is cross-checked by [`bandwidth_qber_quadrature`].
pub fn bandwidth_qber(delta_f: f64, f_fsr: f64) -> Result<f64> {
    check_positive("delta_f", delta_f)?;
    check_positive("f_fsr", f_fsr)?;
    Ok(-0.5 * (-PI * delta_f / f_fsr).exp_m1())
}

/// [`bandwidth_qber`] by direct numerical integration over the real line.
///
/// The integrand is even; the half line is integrated one free spectral
/// range at a time out to `K` ranges (at least 200, and 1000 half-widths),
/// and the remainder is added analytically: the `sin²` average of ½ over the
/// Lorentzian tail plus the leading oscillatory correction.
pub fn bandwidth_qber_quadrature(delta_f: f64, f_fsr: f64) -> Result<f64> {
    check_positive("delta_f", delta_f)?;
    check_positive("f_fsr", f_fsr)?;
    // Frequencies in units of the free spectral range.
    let half_width = 0.5 * delta_f / f_fsr;
    let lorentz = |u: f64| half_width / (PI * (u * u + half_width * half_width));
    let integrand = |u: f64| {
        let s = (PI * u).sin();
        s * s * lorentz(u)
    };

    let periods = (1000.0 * half_width).ceil().max(200.0) as usize;
    let mut body = 0.0;
    for j in 0..periods {
        let r = quadrature::integrate(integrand, j as f64, (j + 1) as f64, 1e-15, 1e-13, 200);
        body += r.value;
    }

    let k = periods as f64;
    let denom = k * k + half_width * half_width;
    // ∫_K^∞ L = atan(γ/K)/π ; ∫_K^∞ cos(2πu) L du ≈ −L'(K)/(4π²)
    let mean_tail = 0.5 * (half_width / k).atan() / PI;
    let lorentz_slope = -2.0 * k * half_width / (PI * denom * denom);
    let oscillating_tail = 0.5 * lorentz_slope / (4.0 * PI * PI);
    Ok(2.0 * (body + mean_tail + oscillating_tail))
}

/// QBER contributed by a finite two-path visibility, `(1 − V)/2`.
pub fn visibility_qber(visibility: f64) -> Result<f64> {
    check_fraction("visibility", visibility)?;
    Ok(0.5 * (1.0 - visibility))
}

/// Composes independent error sources to first order: `min(Σ eᵢ, ½)`.
///
/// Overlaps between sources are neglected, so the result is a diagnostic
/// upper estimate rather than a decomposition of a measured QBER.
pub fn qber_budget(intrinsic: f64, bandwidth_term: f64, dark_term: f64, visibility_term: f64) -> Result<f64> {
    let terms = [
        ("intrinsic", intrinsic),
        ("bandwidth_term", bandwidth_term),
        ("dark_term", dark_term),
        ("visibility_term", visibility_term),
    ];
    let mut sum = 0.0;
    for (name, e) in terms {
        if !(0.0..=0.5).contains(&e) {
            return Err(Error::Domain {
                name,
                value: e,
                expected: "[0, 0.5]",
            });
        }
        sum += e;
    }
    Ok(sum.min(0.5))
}

/// Fractional loss of secure key caused by multiphoton emission.
pub trait MultiphotonModel {
    /// Relative decrease of the secure rate at mean photon number `mu`;
    /// 0 at `mu = 0` and nondecreasing in `mu`.
    fn penalty(&self, mu: f64) -> Result<f64>;
}

/// Beam-splitting penalty for the individual-attack bound with Poisson
/// photon statistics.
///
/// An eavesdropper tapping photons from multiphoton pulses learns the phase
/// difference of two adjacent pulses per tapped photon, which removes a
/// fraction `2μ_p` of the privacy-amplification term:
///
/// ```text
/// R(μ) ∝ −(1 − 2μ_p)·log₂[1 − e² − (1 − 6e)²/2] − H(e),   μ_p = μ / N
/// ```
///
/// Here a pulse is one time bin, so the per-photon mean `μ` is spread over
/// `n_bins`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplittingModel {
    pub n_bins: usize,
    pub qber: f64,
}

impl BeamSplittingModel {
    /// Secure bits per sifted bit at mean photon number `mu`, clamped at 0.
    pub fn secure_fraction(&self, mu: f64) -> Result<f64> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::Domain {
                name: "mu",
                value: mu,
                expected: "finite and >= 0",
            });
        }
        if self.n_bins < 2 {
            return Err(Error::invalid("n_bins", "at least two time bins are required"));
        }
        check_qber(self.qber)?;
        let privacy = -collision_probability(self.qber)?.log2();
        let per_pulse = mu / self.n_bins as f64;
        let fraction = (1.0 - 2.0 * per_pulse) * privacy - binary_entropy(self.qber)?;
        Ok(fraction.max(0.0))
    }
}

impl MultiphotonModel for BeamSplittingModel {
    fn penalty(&self, mu: f64) -> Result<f64> {
        let base = self.secure_fraction(0.0)?;
        let reduced = self.secure_fraction(mu)?;
        if base <= 0.0 {
            // No key to lose.
            return Ok(0.0);
        }
        Ok(1.0 - reduced / base)
    }
}

/// Inputs for a security report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityBudget {
    pub sifted_rate_bps: f64,
    pub qber: f64,
    /// Interferometer free spectral range (Hz).
    pub f_fsr: f64,
    /// Photon bandwidth (Hz).
    pub delta_f: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecurityReport {
    pub individual_bps: f64,
    pub individual_insecure: bool,
    pub coherent_bps: f64,
    pub coherent_insecure: bool,
    pub threshold_ok: bool,
    pub penalty: f64,
    pub bandwidth_qber: f64,
}

impl SecurityBudget {
    pub fn validate(&self) -> Result<()> {
        check_rate(self.sifted_rate_bps)?;
        check_qber(self.qber)?;
        check_positive("f_fsr", self.f_fsr)?;
        check_positive("delta_f", self.delta_f)?;
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::Domain {
                name: "mu",
                value: self.mu,
                expected: "finite and >= 0",
            });
        }
        Ok(())
    }

    /// Evaluates both key-rate bounds, the threshold and the multiphoton
    /// penalty for a photon of `n_bins` time bins.
    ///
    /// Past the point where a bound's formula is defined (very large QBER)
    /// the corresponding rate is reported as 0 and insecure.
    pub fn report(&self, n_bins: usize) -> Result<SecurityReport> {
        self.validate()?;
        let insecure = SecureRate {
            bps: 0.0,
            insecure: true,
        };
        let individual = secure_rate_individual(self.sifted_rate_bps, self.qber).unwrap_or(insecure);
        let coherent = secure_rate_coherent(self.sifted_rate_bps, self.qber).unwrap_or(insecure);
        let penalty = BeamSplittingModel {
            n_bins,
            qber: self.qber,
        }
        .penalty(self.mu)
        .unwrap_or(0.0);
        Ok(SecurityReport {
            individual_bps: individual.bps,
            individual_insecure: individual.insecure,
            coherent_bps: coherent.bps,
            coherent_insecure: coherent.insecure,
            threshold_ok: threshold_ok(self.qber),
            penalty,
            bandwidth_qber: bandwidth_qber(self.delta_f, self.f_fsr)?,
        })
    }
}
