//! Heralded second-order coherence of a single-mode down-conversion source.
//!
//! Pair numbers are thermal with mean `μ`. A herald is at least one idler
//! click on a threshold detector of efficiency `η_h`; the heralded signal is
//! split on a balanced tap onto two threshold detectors behind a total
//! efficiency `η_s`. Then
//!
//! ```text
//! g²(0) = P₁₂|H · P_H / (P₁|H · P₂|H)
//! ```
//!
//! with all joint probabilities taken together with the herald.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use super::trial_rng;
use crate::error::{check_fraction, Error, Result};

const TAIL: f64 = 1e-9;

fn check_mu(mu: f64) -> Result<()> {
    if mu >= 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "mu",
            value: mu,
            expected: "finite and >= 0",
        })
    }
}

fn check_efficiencies(eta_herald: f64, eta_signal: f64) -> Result<()> {
    check_fraction("eta_herald", eta_herald)?;
    check_fraction("eta_signal", eta_signal)?;
    if eta_herald == 0.0 || eta_signal == 0.0 {
        return Err(Error::invalid(
            "efficiency",
            "g2(0) is undefined without herald and signal detection",
        ));
    }
    Ok(())
}

/// Heralded `g²(0)` by exact enumeration over pair numbers.
///
/// Coincidences need at least two pairs, so the sum runs until the thermal
/// tail is below 1e-9 of the two-or-more-pair probability.
pub fn heralded_g2(mu: f64, eta_herald: f64, eta_signal: f64) -> Result<f64> {
    check_mu(mu)?;
    check_efficiencies(eta_herald, eta_signal)?;
    if mu == 0.0 {
        return Ok(0.0);
    }
    let ratio = mu / (1.0 + mu);
    let half_miss = 1.0 - 0.5 * eta_signal;
    let miss = 1.0 - eta_signal;

    let (mut herald, mut single, mut coincidence) = (0.0, 0.0, 0.0);
    // P(n) = ratioⁿ / (1 + μ); tail beyond n is ratio^{n+1}.
    let mut p_n = 1.0 / (1.0 + mu);
    let mut tail = ratio;
    let mut n: i32 = 0;
    loop {
        let heralded = p_n * (1.0 - (1.0 - eta_herald).powi(n));
        let one_silent = half_miss.powi(n);
        herald += heralded;
        single += heralded * (1.0 - one_silent);
        coincidence += heralded * (1.0 - 2.0 * one_silent + miss.powi(n));
        if n >= 2 && tail < TAIL * ratio * ratio {
            break;
        }
        n += 1;
        p_n *= ratio;
        tail *= ratio;
    }
    // The two arms of the balanced tap are identical, so P₁ = P₂.
    Ok(coincidence * herald / (single * single))
}

/// Monte Carlo estimate of [`heralded_g2`] from `n_trials` pair emissions.
pub fn heralded_g2_sampled(mu: f64, eta_herald: f64, eta_signal: f64, n_trials: u64, seed: u64) -> Result<f64> {
    check_mu(mu)?;
    check_efficiencies(eta_herald, eta_signal)?;
    if n_trials == 0 {
        return Err(Error::EmptySession);
    }
    let pairs = Geometric::new(1.0 / (1.0 + mu)).map_err(|e| Error::invalid("mu", e.to_string()))?;
    let mut rng = trial_rng(seed, 0);
    let (mut herald, mut d1, mut d2, mut both) = (0u64, 0u64, 0u64, 0u64);
    for _ in 0..n_trials {
        let n = pairs.sample(&mut rng);
        if !(0..n).any(|_| rng.random::<f64>() < eta_herald) {
            continue;
        }
        herald += 1;
        let (mut c1, mut c2) = (false, false);
        for _ in 0..n {
            let u: f64 = rng.random();
            if u < 0.5 * eta_signal {
                c1 = true;
            } else if u < eta_signal {
                c2 = true;
            }
        }
        d1 += u64::from(c1);
        d2 += u64::from(c2);
        both += u64::from(c1 && c2);
    }
    if d1 == 0 || d2 == 0 {
        return Err(Error::invalid(
            "n_trials",
            "no heralded signal clicks; increase the number of trials",
        ));
    }
    Ok(both as f64 * herald as f64 / (d1 as f64 * d2 as f64))
}
