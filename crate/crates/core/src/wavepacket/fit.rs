//! Least-squares fit of a coincidence histogram to the double-exponential
//! correlation shape `offset + peak·exp(Γs τ)` (τ < 0) / `offset +
//! peak·exp(−Γi τ)` (τ ≥ 0).
//!
//! Levenberg-Marquardt on `(offset, peak, Γs, Γi)`, seeded by log-linear
//! regression on each flank. Internally delays are in ns and counts are
//! divided by their maximum, which makes the fit scale-equivariant.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};

const MIN_POINTS: usize = 10;
const MAX_ITERATIONS: usize = 500;

/// Fitted correlation parameters. Rates in s⁻¹, `peak` and `offset` in the
/// histogram's count units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Fit {
    pub gamma_s: f64,
    pub gamma_i: f64,
    pub peak: f64,
    pub offset: f64,
    /// Euclidean norm of the residuals, in count units.
    pub residual_norm: f64,
    pub iterations: usize,
}

fn model(p: &Vector4<f64>, tau: f64) -> f64 {
    if tau < 0.0 {
        p[0] + p[1] * (p[2] * tau).exp()
    } else {
        p[0] + p[1] * (-p[3] * tau).exp()
    }
}

fn gradient(p: &Vector4<f64>, tau: f64) -> Vector4<f64> {
    if tau < 0.0 {
        let e = (p[2] * tau).exp();
        Vector4::new(1.0, e, p[1] * tau * e, 0.0)
    } else {
        let e = (-p[3] * tau).exp();
        Vector4::new(1.0, e, 0.0, -p[1] * tau * e)
    }
}

fn cost(p: &Vector4<f64>, tau: &[f64], y: &[f64]) -> f64 {
    tau.iter().zip(y).map(|(t, v)| (model(p, *t) - v).powi(2)).sum()
}

/// Slope of `ln(y − offset)` against `|τ|` on one flank, or `None` when
/// fewer than two usable points exist or the flank is not decaying.
fn flank_rate(points: impl Iterator<Item = (f64, f64)>, offset: f64, height: f64) -> Option<f64> {
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (t, v) in points {
        let excess = v - offset;
        if excess > 0.05 * height {
            let (x, l) = (t.abs(), excess.ln());
            n += 1.0;
            sx += x;
            sy += l;
            sxx += x * x;
            sxy += x * l;
        }
    }
    if n < 2.0 {
        return None;
    }
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    (slope < 0.0).then_some(-slope)
}

/// Fits `(tau_seconds, counts)` samples.
///
/// Requires at least ten points with delays on both sides of zero and
/// non-negative counts. A flat histogram carries no shape information and is
/// reported as a fit failure.
pub fn fit_g2(histogram: &[(f64, f64)]) -> Result<G2Fit> {
    if histogram.len() < MIN_POINTS {
        return Err(Error::FitFailure {
            reason: format!("need at least {MIN_POINTS} points, got {}", histogram.len()),
            residual_norm: None,
        });
    }
    if histogram
        .iter()
        .any(|(t, c)| !t.is_finite() || !c.is_finite() || *c < 0.0)
    {
        return Err(Error::FitFailure {
            reason: "delays must be finite and counts finite and non-negative".into(),
            residual_norm: None,
        });
    }
    if !histogram.iter().any(|(t, _)| *t < 0.0) || !histogram.iter().any(|(t, _)| *t > 0.0) {
        return Err(Error::FitFailure {
            reason: "histogram must span both signs of the delay".into(),
            residual_norm: None,
        });
    }

    let max = histogram.iter().map(|(_, c)| *c).fold(0.0, f64::max);
    let min = histogram.iter().map(|(_, c)| *c).fold(f64::INFINITY, f64::min);
    if max <= 0.0 || max - min <= 1e-12 * max {
        return Err(Error::FitFailure {
            reason: "histogram is flat; no correlation peak to fit".into(),
            residual_norm: None,
        });
    }

    let tau: Vec<f64> = histogram.iter().map(|(t, _)| t * 1e9).collect();
    let y: Vec<f64> = histogram.iter().map(|(_, c)| c / max).collect();
    let span_ns = tau.iter().fold(0.0f64, |m, t| m.max(t.abs()));

    let offset0 = min / max;
    let height0 = 1.0 - offset0;
    let fallback = 4.0 / span_ns;
    let left = tau.iter().copied().zip(y.iter().copied()).filter(|(t, _)| *t < 0.0);
    let right = tau.iter().copied().zip(y.iter().copied()).filter(|(t, _)| *t > 0.0);
    let gs0 = flank_rate(left, offset0, height0).unwrap_or(fallback);
    let gi0 = flank_rate(right, offset0, height0).unwrap_or(fallback);

    let mut p = Vector4::new(offset0, height0, gs0, gi0);
    let mut current = cost(&p, &tau, &y);
    let mut lambda = 1e-3;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (t, v) in tau.iter().zip(&y) {
            let g = gradient(&p, *t);
            let r = model(&p, *t) - v;
            jtj += g * g.transpose();
            jtr += g * r;
        }

        let mut accepted = false;
        let mut converged = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            if trial[2] > 0.0 && trial[3] > 0.0 && trial.iter().all(|x| x.is_finite()) {
                let c = cost(&trial, &tau, &y);
                if c <= current {
                    let rel_step = (0..4)
                        .map(|i| step[i].abs() / p[i].abs().max(1e-12))
                        .fold(0.0, f64::max);
                    converged = rel_step < 1e-12 || current - c <= 1e-15 * current;
                    p = trial;
                    current = c;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !accepted || converged || current == 0.0 {
            break;
        }
    }

    let residual_norm = current.sqrt() * max;
    if !(p[2] > 0.0 && p[3] > 0.0 && p[1].is_finite() && p[0].is_finite()) {
        return Err(Error::FitFailure {
            reason: "iteration left the admissible parameter region".into(),
            residual_norm: Some(residual_norm),
        });
    }
    if p[1] <= 0.0 {
        return Err(Error::FitFailure {
            reason: format!("fitted peak is non-positive ({})", p[1] * max),
            residual_norm: Some(residual_norm),
        });
    }

    Ok(G2Fit {
        gamma_s: p[2] * 1e9,
        gamma_i: p[3] * 1e9,
        peak: p[1] * max,
        offset: p[0] * max,
        residual_norm,
        iterations,
    })
}
