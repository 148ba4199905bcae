//! Simulation and analysis toolkit for differential-phase-shift (DPS) quantum
//! key distribution with shaped, narrowband heralded single photons.
//!
//! The crate is organised bottom-up:
//!
//! - [`wavepacket`]: the double-exponential photon wavepacket of a doubly
//!   resonant down-conversion source, its bandwidth and `1/e²` width, a
//!   least-squares fit of measured coincidence histograms, and discretization
//!   of an envelope into `N` time-bin amplitudes.
//! - [`interferometer`]: closed-form output of the one-bit-delay Mach-Zehnder
//!   interferometer, key creation efficiency (KCE) and waveform-induced QBER.
//! - [`protocol`]: seeded, schedule-independent Monte Carlo of a full session
//!   (encoding, loss, detection, dark counts, sifting) and the heralded-source
//!   `g²(0)` model.
//! - [`security`]: binary entropy, secure key rates under individual and
//!   coherent attacks, bandwidth-induced QBER and the multiphoton penalty.

pub mod error;
pub mod interferometer;
pub mod protocol;
pub mod quadrature;
pub mod security;
pub mod wavepacket;

pub use error::{Error, Result};
