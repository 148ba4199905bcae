//! Monte Carlo of a DPS-QKD session.
//!
//! Each heralded photon is one trial. Alice draws `N − 1` random bits and
//! writes them as 0/π phase differences between adjacent bins; the photon
//! crosses a lossy channel; Bob's interferometer and detectors turn it into a
//! time-tagged click (or nothing); the time tags are compared with Alice's
//! bits to sift the key.
//!
//! Every trial owns an independent random stream derived from
//! `(seed, trial_id)`, so a session is reproducible bit for bit no matter how
//! its trials are scheduled across threads.

mod session;
mod source;

pub use session::{run_session, run_session_with_log, DetectionLogEntry, SessionConfig, SessionStats};
pub use source::{heralded_g2, heralded_g2_sampled};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interferometer::{phases_from_bits, InterferenceDistribution, Phase, Port};

/// Random stream of one trial.
pub type TrialRng = ChaCha8Rng;

/// Stream for trial `trial_id` of the session seeded with `seed`.
pub fn trial_rng(seed: u64, trial_id: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_id);
    rng
}

/// Losses between Alice's modulators and Bob's interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    pub fiber_loss_db: f64,
    /// Intensity-modulator insertion loss.
    pub eoim_loss_db: f64,
    /// Phase-modulator insertion loss.
    pub eopm_loss_db: f64,
    /// Transmission of the polarization filter in front of the interferometer.
    pub pol_filter_transmission: f64,
    /// Informational; the fiber loss is given directly in dB.
    pub fiber_length_km: f64,
}

impl ChannelModel {
    /// 3.4 km campus fiber loop (2 dB), modulators (1.7 dB, 1.6 dB) and a
    /// polarizing beamsplitter passing 98 %.
    pub fn field_test() -> Self {
        Self {
            fiber_loss_db: 2.0,
            eoim_loss_db: 1.7,
            eopm_loss_db: 1.6,
            pol_filter_transmission: 0.98,
            fiber_length_km: 3.4,
        }
    }

    pub fn lossless() -> Self {
        Self {
            fiber_loss_db: 0.0,
            eoim_loss_db: 0.0,
            eopm_loss_db: 0.0,
            pol_filter_transmission: 1.0,
            fiber_length_km: 0.0,
        }
    }

    pub fn total_loss_db(&self) -> f64 {
        self.fiber_loss_db + self.eoim_loss_db + self.eopm_loss_db
    }

    /// Probability that a photon reaches Bob's interferometer.
    pub fn transmission(&self) -> f64 {
        10f64.powf(-self.total_loss_db() / 10.0) * self.pol_filter_transmission
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("channel.fiber_loss_db", self.fiber_loss_db),
            ("channel.eoim_loss_db", self.eoim_loss_db),
            ("channel.eopm_loss_db", self.eopm_loss_db),
            ("channel.fiber_length_km", self.fiber_length_km),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        let t = self.pol_filter_transmission;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::invalid(
                "channel.pol_filter_transmission",
                format!("must lie in (0, 1], got {t}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Dark counts per second, summed over both detectors.
    pub dark_rate: f64,
    /// Dead time (s). A trial yields at most one click, so dead times shorter
    /// than the heralding interval have no effect; 0 disables.
    pub dead_time: f64,
}

impl DetectorModel {
    /// Superconducting nanowire detectors, 82 % efficiency, no dark counts.
    pub fn snspd() -> Self {
        Self {
            efficiency: 0.82,
            dark_rate: 0.0,
            dead_time: 0.0,
        }
    }

    /// Avalanche photodiode module used for the source characterisation.
    pub fn spcm() -> Self {
        Self {
            efficiency: 0.15,
            dark_rate: 0.0,
            dead_time: 0.0,
        }
    }

    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate: 0.0,
            dead_time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid(
                "detector.efficiency",
                format!("must lie in [0, 1], got {}", self.efficiency),
            ));
        }
        for (field, v) in [
            ("detector.dark_rate", self.dark_rate),
            ("detector.dead_time", self.dead_time),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// A time-tagged click announced by Bob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub trial_id: u64,
    /// 1-based output slot, `1..=N+1`.
    pub slot: usize,
    pub port: Port,
    pub is_dark: bool,
}

/// Draws Alice's `N − 1` bits and the phases that encode them (`φ₁ = 0`).
pub fn alice_encode<R: Rng + ?Sized>(n_bins: usize, rng: &mut R) -> Result<(Vec<Phase>, Vec<bool>)> {
    if n_bins < 2 {
        return Err(Error::invalid(
            "wavepacket.n_bins",
            format!("must be >= 2, got {n_bins}"),
        ));
    }
    let bits: Vec<bool> = (0..n_bins - 1).map(|_| rng.random()).collect();
    Ok((phases_from_bits(&bits), bits))
}

/// Probability that a photon crosses the channel and triggers a detector.
pub fn survival_probability(channel: &ChannelModel, detector: &DetectorModel) -> f64 {
    channel.transmission() * detector.efficiency
}

/// One Bernoulli draw of [`survival_probability`].
pub fn transmit<R: Rng + ?Sized>(rng: &mut R, channel: &ChannelModel, detector: &DetectorModel) -> bool {
    rng.random::<f64>() < survival_probability(channel, detector)
}

/// Samples `(slot, port)` by inverse CDF over the distribution's outcomes.
fn sample_outcome<R: Rng + ?Sized>(dist: &InterferenceDistribution, rng: &mut R) -> (usize, Port) {
    let u: f64 = rng.random::<f64>() * dist.total();
    let mut acc = 0.0;
    let mut last = (1, Port::Plus);
    for (slot, port, p) in dist.outcomes() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = (slot, port);
        if u < acc {
            return last;
        }
    }
    last
}

/// Bob's click for one trial.
///
/// `photon_arrived` is the outcome of [`transmit`] (which already includes
/// the detector efficiency). A dark count occurs with probability
/// `dark_rate × frame_duration`, uniformly over the `N + 1` slots and both
/// ports. When both happen the earlier slot wins, the photon on ties.
pub fn bob_detect<R: Rng + ?Sized>(
    trial_id: u64,
    dist: &InterferenceDistribution,
    photon_arrived: bool,
    detector: &DetectorModel,
    frame_duration: f64,
    rng: &mut R,
) -> Option<DetectionRecord> {
    let photon = photon_arrived.then(|| sample_outcome(dist, rng));

    let p_dark = (detector.dark_rate * frame_duration).min(1.0);
    let dark = if p_dark > 0.0 && rng.random::<f64>() < p_dark {
        let slot = rng.random_range(1..=dist.n_slots());
        let port = if rng.random::<bool>() { Port::Minus } else { Port::Plus };
        Some((slot, port))
    } else {
        None
    };

    let record = |(slot, port): (usize, Port), is_dark| DetectionRecord {
        trial_id,
        slot,
        port,
        is_dark,
    };
    match (photon, dark) {
        (Some(p), Some(d)) if d.0 < p.0 => Some(record(d, true)),
        (Some(p), _) => Some(record(p, false)),
        (None, Some(d)) => Some(record(d, true)),
        (None, None) => None,
    }
}

/// Result of comparing one click with Alice's bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiftOutcome {
    /// First or last slot: no adjacent pair interfered.
    Discarded,
    Bit {
        bob: bool,
        alice: bool,
    },
}

impl SiftOutcome {
    pub fn is_error(&self) -> bool {
        matches!(self, SiftOutcome::Bit { bob, alice } if bob != alice)
    }
}

/// Sifts a click against Alice's `N − 1` bits.
///
/// Slot `k` (2 ≤ k ≤ N) reads bit `k − 1` (1-based): plus → 0, minus → 1.
pub fn sift(alice_bits: &[bool], record: &DetectionRecord) -> Result<SiftOutcome> {
    let n_slots = alice_bits.len() + 2;
    match record.slot {
        0 => Err(Error::Protocol("slot 0 does not exist; slots are 1-based".into())),
        s if s > n_slots => Err(Error::Protocol(format!("slot {s} is past the last slot {n_slots}"))),
        1 => Ok(SiftOutcome::Discarded),
        s if s == n_slots => Ok(SiftOutcome::Discarded),
        s => Ok(SiftOutcome::Bit {
            bob: record.port.bit(),
            alice: alice_bits[s - 2],
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::{interfere, EncodedPhotonState};
    use crate::wavepacket::{make_default_waveform, DiscretizedWavepacket, Envelope};

    fn flat_dist(n: usize, bits: &[bool], v: f64) -> InterferenceDistribution {
        let wp = make_default_waveform(&Envelope::Flat { width: n as f64 * 1e-9 }, n).unwrap();
        interfere(&EncodedPhotonState::from_bits(wp, bits).unwrap(), v).unwrap()
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: u64 = trial_rng(7, 0).random();
        let b: u64 = trial_rng(7, 1).random();
        let c: u64 = trial_rng(7, 0).random();
        let d: u64 = trial_rng(8, 0).random();
        assert_eq!(a, c);
        assert_ne!(a, b);
        assert_ne!(a, d);
    }

    #[test]
    fn encoding_matches_bits() {
        let mut rng = trial_rng(1, 2);
        let (phases, bits) = alice_encode(40, &mut rng).unwrap();
        assert_eq!(bits.len(), 39);
        assert_eq!(phases, phases_from_bits(&bits));
        assert!(alice_encode(1, &mut rng).is_err());
    }

    #[test]
    fn bit_frequency_is_balanced() {
        let mut rng = trial_rng(99, 0);
        let n = 100_000;
        let ones = (0..n / 10)
            .flat_map(|_| alice_encode(11, &mut rng).unwrap().1)
            .filter(|b| *b)
            .count();
        // 3σ = 3·sqrt(0.25/1e5) ≈ 0.0047
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.005, "{ones}");
    }

    #[test]
    fn field_loss_budget() {
        let p = survival_probability(&ChannelModel::field_test(), &DetectorModel::snspd());
        assert!((p - 0.237).abs() < 5e-4, "{p}");
        assert_eq!(
            survival_probability(&ChannelModel::lossless(), &DetectorModel::ideal()),
            1.0
        );
        let blind = DetectorModel {
            efficiency: 0.0,
            ..DetectorModel::ideal()
        };
        assert_eq!(survival_probability(&ChannelModel::lossless(), &blind), 0.0);
        let mut rng = trial_rng(3, 3);
        assert!((0..1000).all(|_| transmit(&mut rng, &ChannelModel::lossless(), &DetectorModel::ideal())));
        assert!((0..1000).all(|_| !transmit(&mut rng, &ChannelModel::lossless(), &blind)));
    }

    #[test]
    fn deterministic_distribution_always_clicks_there() {
        // Only the middle bin is occupied, so clicks can land in slots 2
        // and 3 and nowhere else.
        let wp = DiscretizedWavepacket::from_amplitudes(vec![0.0, 1.0, 0.0], 1e-9).unwrap();
        let dist = interfere(&EncodedPhotonState::unmodulated(wp), 1.0).unwrap();
        let mut rng = trial_rng(5, 0);
        for t in 0..1000 {
            let r = bob_detect(t, &dist, true, &DetectorModel::ideal(), 1e-9, &mut rng).unwrap();
            assert!(r.slot == 2 || r.slot == 3, "{r:?}");
            assert!(!r.is_dark);
        }
    }

    #[test]
    fn lost_photon_without_darks_is_silent() {
        let dist = flat_dist(4, &[false; 3], 1.0);
        let mut rng = trial_rng(5, 1);
        assert!(bob_detect(0, &dist, false, &DetectorModel::ideal(), 5e-9, &mut rng).is_none());
    }

    #[test]
    fn certain_dark_count_fires() {
        let dist = flat_dist(4, &[false; 3], 1.0);
        let noisy = DetectorModel {
            dark_rate: 1e12,
            ..DetectorModel::ideal()
        };
        let mut rng = trial_rng(5, 2);
        let r = bob_detect(0, &dist, false, &noisy, 5e-9, &mut rng).unwrap();
        assert!(r.is_dark);
        assert!((1..=5).contains(&r.slot));
    }

    #[test]
    fn sift_examples() {
        let edge = DetectionRecord {
            trial_id: 0,
            slot: 1,
            port: Port::Plus,
            is_dark: false,
        };
        assert_eq!(sift(&[false], &edge).unwrap(), SiftOutcome::Discarded);
        let last = DetectionRecord { slot: 3, ..edge };
        assert_eq!(sift(&[false], &last).unwrap(), SiftOutcome::Discarded);

        let plus = DetectionRecord { slot: 2, ..edge };
        assert_eq!(
            sift(&[false], &plus).unwrap(),
            SiftOutcome::Bit {
                bob: false,
                alice: false
            }
        );
        let minus = DetectionRecord {
            slot: 2,
            port: Port::Minus,
            ..edge
        };
        let out = sift(&[true], &minus).unwrap();
        assert_eq!(out, SiftOutcome::Bit { bob: true, alice: true });
        assert!(!out.is_error());
        assert!(sift(&[false], &minus).unwrap().is_error());

        assert!(sift(&[false], &DetectionRecord { slot: 0, ..edge }).is_err());
        assert!(sift(&[false], &DetectionRecord { slot: 4, ..edge }).is_err());
    }

    #[test]
    fn interfere_then_sift_agrees_with_alice() {
        // Flat N=2, phases (0,0): slot 2 is entirely port plus → bit 0.
        let dist = flat_dist(2, &[false], 1.0);
        assert_eq!(dist.prob(2, Port::Minus), 0.0);
        let dist = flat_dist(2, &[true], 1.0);
        assert_eq!(dist.prob(2, Port::Plus), 0.0);
    }

    #[test]
    fn sampled_histogram_matches_distribution() {
        let wp = make_default_waveform(&Envelope::Gaussian { sigma: 1e-9 }, 6).unwrap();
        let bits = [true, false, false, true, true];
        let dist = interfere(&EncodedPhotonState::from_bits(wp, &bits).unwrap(), 0.8).unwrap();
        let trials = 1_000_000u64;
        let mut counts = vec![0u64; 2 * dist.n_slots()];
        for t in 0..trials {
            let mut rng = trial_rng(11, t);
            let r = bob_detect(t, &dist, true, &DetectorModel::ideal(), 1e-9, &mut rng).unwrap();
            counts[2 * (r.slot - 1) + usize::from(r.port == Port::Minus)] += 1;
        }
        // Pearson χ² against the closed-form probabilities.
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        for (i, (_, _, p)) in dist.outcomes().enumerate() {
            let expected = p * trials as f64;
            if expected > 0.0 {
                chi2 += (counts[i] as f64 - expected).powi(2) / expected;
                dof += 1;
            } else {
                assert_eq!(counts[i], 0);
            }
        }
        let dof = (dof - 1) as f64;
        // Mean dof, sd sqrt(2 dof).
        assert!(chi2 < dof + 3.0 * (2.0 * dof).sqrt(), "chi2 = {chi2}, dof = {dof}");
    }
}
