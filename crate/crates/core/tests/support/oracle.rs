//! Reference computations that share no code with the library: composite
//! Simpson bin integration of hand-written envelope densities and a
//! path-by-path complex-amplitude model of the delay interferometer.

#![allow(dead_code)]

use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const GAMMA_S: f64 = 1.0 / 45.3e-9;
pub const GAMMA_I: f64 = 1.0 / 44.1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Flat,
    Triangle,
    Gaussian,
    DoubleExponential,
}

pub const SHAPES: [Shape; 4] = [Shape::Flat, Shape::Triangle, Shape::Gaussian, Shape::DoubleExponential];

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Flat => "flat",
            Shape::Triangle => "triangle",
            Shape::Gaussian => "gaussian",
            Shape::DoubleExponential => "double_exponential",
        }
    }

    /// Window of the source-matched envelope: all four share
    /// `[−4/Γs, 4/Γi]` in length; symmetric shapes are centred on zero.
    pub fn window(self) -> (f64, f64) {
        let tau = 0.5 * (1.0 / GAMMA_S + 1.0 / GAMMA_I);
        match self {
            Shape::DoubleExponential => (-4.0 / GAMMA_S, 4.0 / GAMMA_I),
            _ => (-4.0 * tau, 4.0 * tau),
        }
    }

    /// Unnormalised intensity; only ratios matter after normalisation.
    pub fn intensity(self, t: f64) -> f64 {
        let tau = 0.5 * (1.0 / GAMMA_S + 1.0 / GAMMA_I);
        let half = 4.0 * tau;
        match self {
            Shape::Flat => f64::from(u8::from(t.abs() <= half)),
            Shape::Triangle => (1.0 - t.abs() / half).max(0.0),
            Shape::Gaussian => (-0.5 * (t / tau).powi(2)).exp(),
            Shape::DoubleExponential => {
                if t < 0.0 {
                    (GAMMA_S * t).exp()
                } else {
                    (-GAMMA_I * t).exp()
                }
            }
        }
    }
}

/// Composite Simpson rule with `2m` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let n = 2 * m;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Bin integral that splits at the kink at `t = 0` so Simpson stays on
/// smooth pieces.
fn bin_integral(shape: Shape, a: f64, b: f64) -> f64 {
    let f = |t| shape.intensity(t);
    if a < 0.0 && b > 0.0 {
        simpson(f, a, 0.0, 400) + simpson(f, 0.0, b, 400)
    } else {
        simpson(f, a, b, 400)
    }
}

/// Normalised bin amplitudes `√(∫ bin intensity)` over the shape's window.
pub fn amplitudes(shape: Shape, n: usize) -> Vec<f64> {
    let (start, end) = shape.window();
    let width = end - start;
    let masses: Vec<f64> = (0..n)
        .map(|k| {
            let a = start + width * k as f64 / n as f64;
            let b = start + width * (k + 1) as f64 / n as f64;
            bin_integral(shape, a, b)
        })
        .collect();
    let total: f64 = masses.iter().sum();
    masses.iter().map(|m| (m / total).sqrt()).collect()
}

/// Fraction of detections in the `N − 1` slots where both bins overlap.
pub fn kce(a: &[f64]) -> f64 {
    1.0 - 0.5 * (a[0] * a[0] + a[a.len() - 1] * a[a.len() - 1])
}

/// Detection probabilities at the `N + 1` output slots of an unbalanced
/// Mach–Zehnder with one-bin delay, `[constructive-at-zero, other]` per slot.
///
/// Every (bin, arm) path is propagated through two 50:50 couplers with
/// transfer matrix `[[1, i], [i, 1]]/√2`. Visibility `V` mixes the coherent
/// sum with the incoherent sum of path intensities.
pub fn brute_force(a: &[f64], phases: &[f64], visibility: f64) -> Vec<[f64; 2]> {
    let n = a.len();
    let coupler = [
        [Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(0.0, FRAC_1_SQRT_2)],
        [Complex64::new(0.0, FRAC_1_SQRT_2), Complex64::new(FRAC_1_SQRT_2, 0.0)],
    ];
    // Indexed [slot][output port].
    let mut coherent = vec![[Complex64::new(0.0, 0.0); 2]; n + 1];
    let mut incoherent = vec![[0.0; 2]; n + 1];
    for (bin, (&amp, &phi)) in a.iter().zip(phases).enumerate() {
        let input = Complex64::from_polar(amp, phi);
        // arm 0 is short (arrives in slot `bin`), arm 1 is long (slot `bin + 1`)
        for (arm, second) in coupler.iter().enumerate() {
            let slot = bin + arm;
            for port in 0..2 {
                let path = input * coupler[0][arm] * second[port];
                coherent[slot][port] += path;
                incoherent[slot][port] += path.norm_sqr();
            }
        }
    }
    // Port 1 collects `i·(a_k + a_{k−1})/2`, constructive at equal phases.
    coherent
        .iter()
        .zip(&incoherent)
        .map(|(c, inc)| {
            let p = |port: usize| visibility * c[port].norm_sqr() + (1.0 - visibility) * inc[port];
            [p(1), p(0)]
        })
        .collect()
}

/// Phase pattern `0`/`π` from an integer's low `n` bits.
pub fn phases_from_mask(mask: u32, n: usize) -> Vec<f64> {
    (0..n).map(|k| if mask >> k & 1 == 1 { PI } else { 0.0 }).collect()
}
