//! Closed-form output of Bob's one-bit-delay Mach-Zehnder interferometer.
//!
//! A photon spread over `N` bins leaves the interferometer in one of `N + 1`
//! time slots. Slot `k` (1-based) collects bin `k` through the short arm and
//! bin `k − 1` through the long arm, so with `a₀ = a_{N+1} = 0`
//!
//! ```text
//! P±(k) = [a_{k−1}² + a_k² ± 2V·a_{k−1}a_k·cos(φ_k − φ_{k−1})] / 4
//! ```
//!
//! The two edge slots see a single arm and carry no bit; the middle slots
//! carry one bit each, encoded in the adjacent phase difference.

use serde::{Deserialize, Serialize};

use crate::error::{check_fraction, Error, Result};
use crate::wavepacket::{make_waveform, DiscretizedWavepacket, Envelope, EnvelopeKind};

/// Two-path visibility that makes the double-exponential source of the field
/// test, cut into 50 bins over the default span, succeed with probability
/// 0.97 (see [`interference_success`]).
pub const REALISTIC_VISIBILITY: f64 = 0.946;

/// Phase of one time bin; only 0 and π are ever prepared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Zero,
    Pi,
}

impl Phase {
    pub fn radians(self) -> f64 {
        match self {
            Phase::Zero => 0.0,
            Phase::Pi => std::f64::consts::PI,
        }
    }

    /// `self + other` modulo 2π.
    pub fn shifted(self, other: Phase) -> Phase {
        if self == other {
            Phase::Zero
        } else {
            Phase::Pi
        }
    }

    /// `cos(self)`, exactly ±1.
    pub fn cos(self) -> f64 {
        match self {
            Phase::Zero => 1.0,
            Phase::Pi => -1.0,
        }
    }
}

/// Output port of the second beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Port {
    Plus,
    Minus,
}

impl Port {
    pub const BOTH: [Port; 2] = [Port::Plus, Port::Minus];

    fn index(self) -> usize {
        match self {
            Port::Plus => 0,
            Port::Minus => 1,
        }
    }

    /// Constructive port for an adjacent phase difference.
    pub fn constructive(difference: Phase) -> Port {
        match difference {
            Phase::Zero => Port::Plus,
            Phase::Pi => Port::Minus,
        }
    }

    /// Bit read by Bob: plus → 0, minus → 1.
    pub fn bit(self) -> bool {
        self == Port::Minus
    }

    pub fn other(self) -> Port {
        match self {
            Port::Plus => Port::Minus,
            Port::Minus => Port::Plus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Port::Plus => "plus",
            Port::Minus => "minus",
        }
    }
}

/// A wavepacket with a 0/π phase on every bin.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPhotonState {
    wavepacket: DiscretizedWavepacket,
    phases: Vec<Phase>,
}

impl EncodedPhotonState {
    pub fn new(wavepacket: DiscretizedWavepacket, phases: Vec<Phase>) -> Result<Self> {
        if phases.len() != wavepacket.n_bins() {
            return Err(Error::invalid(
                "phases",
                format!("expected {} phases, got {}", wavepacket.n_bins(), phases.len()),
            ));
        }
        Ok(Self { wavepacket, phases })
    }

    /// Encodes `N − 1` bits as adjacent phase differences with `φ₁ = 0`.
    pub fn from_bits(wavepacket: DiscretizedWavepacket, bits: &[bool]) -> Result<Self> {
        let phases = phases_from_bits(bits);
        Self::new(wavepacket, phases)
    }

    /// All bins in phase (every bit 0).
    pub fn unmodulated(wavepacket: DiscretizedWavepacket) -> Self {
        let n = wavepacket.n_bins();
        Self {
            wavepacket,
            phases: vec![Phase::Zero; n],
        }
    }

    pub fn wavepacket(&self) -> &DiscretizedWavepacket {
        &self.wavepacket
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn n_bins(&self) -> usize {
        self.phases.len()
    }
}

/// Absolute phases for a bit string: `φ₁ = 0`, `φ_{j+1} = φ_j + π·bit_j`.
pub fn phases_from_bits(bits: &[bool]) -> Vec<Phase> {
    let mut phases = Vec::with_capacity(bits.len() + 1);
    let mut current = Phase::Zero;
    phases.push(current);
    for &bit in bits {
        if bit {
            current = current.shifted(Phase::Pi);
        }
        phases.push(current);
    }
    phases
}

/// Detection probabilities over the `N + 1` output slots and two ports.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceDistribution {
    probs: Vec<[f64; 2]>,
    // Constructive port of middle slots 2..=N.
    constructive: Vec<Port>,
    visibility: f64,
}

impl InterferenceDistribution {
    pub fn n_bins(&self) -> usize {
        self.probs.len() - 1
    }

    /// Number of output slots, `N + 1`.
    pub fn n_slots(&self) -> usize {
        self.probs.len()
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    /// Probability of a click at `port` in 1-based `slot`.
    ///
    /// # Panics
    /// If `slot` is outside `1..=N+1`.
    pub fn prob(&self, slot: usize, port: Port) -> f64 {
        self.probs[slot - 1][port.index()]
    }

    pub fn slot_total(&self, slot: usize) -> f64 {
        let [p, m] = self.probs[slot - 1];
        p + m
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().map(|[p, m]| p + m).sum()
    }

    pub fn is_edge(&self, slot: usize) -> bool {
        slot == 1 || slot == self.n_slots()
    }

    /// Port on which the adjacent phase difference interferes constructively,
    /// or `None` for the two edge slots.
    pub fn constructive_port(&self, slot: usize) -> Option<Port> {
        if slot < 2 || slot > self.n_bins() {
            None
        } else {
            Some(self.constructive[slot - 2])
        }
    }

    /// `(slot, port, probability)` in slot-major, plus-before-minus order.
    pub fn outcomes(&self) -> impl Iterator<Item = (usize, Port, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .flat_map(|(i, pm)| Port::BOTH.into_iter().map(move |port| (i + 1, port, pm[port.index()])))
    }
}

/// Propagates an encoded photon through the interferometer with two-path
/// visibility `visibility`.
///
/// The visibility scales only the cross term, i.e. the two arms are mixed
/// with partial coherence; slot totals are independent of it.
pub fn interfere(state: &EncodedPhotonState, visibility: f64) -> Result<InterferenceDistribution> {
    interfere_parts(state.wavepacket.amplitudes(), &state.phases, visibility)
}

/// [`interfere`] on borrowed amplitudes and phases of equal length `>= 2`.
pub(crate) fn interfere_parts(a: &[f64], phases: &[Phase], visibility: f64) -> Result<InterferenceDistribution> {
    check_fraction("visibility", visibility)?;
    debug_assert_eq!(a.len(), phases.len());
    let n = a.len();
    let mut probs = Vec::with_capacity(n + 1);
    let mut constructive = Vec::with_capacity(n.saturating_sub(1));

    probs.push([a[0] * a[0] / 4.0; 2]);
    for k in 1..n {
        let (prev, cur) = (a[k - 1], a[k]);
        let difference = phases[k].shifted(phases[k - 1]);
        // (a ± b)² ∓ 2(1 − V)ab keeps the destructive port non-negative.
        let sum = prev + cur;
        let diff = prev - cur;
        let incoherent = 2.0 * (1.0 - visibility) * prev * cur;
        let bright = (sum * sum - incoherent) / 4.0;
        let dark = (diff * diff + incoherent) / 4.0;
        probs.push(match difference {
            Phase::Zero => [bright, dark],
            Phase::Pi => [dark, bright],
        });
        constructive.push(Port::constructive(difference));
    }
    probs.push([a[n - 1] * a[n - 1] / 4.0; 2]);

    Ok(InterferenceDistribution {
        probs,
        constructive,
        visibility,
    })
}

/// Key creation efficiency: probability that the photon leaves through a
/// middle slot, `1 − (a₁² + a_N²)/2`.
pub fn kce(dist: &InterferenceDistribution) -> f64 {
    1.0 - dist.slot_total(1) - dist.slot_total(dist.n_slots())
}

/// Probability that the photon leaves through a middle slot *and* the
/// constructive port, i.e. yields a correct bit.
///
/// Equals [`kce`] times `1 − QBER`; this is the efficiency an experiment
/// measures when it counts successful interference events.
pub fn interference_success(dist: &InterferenceDistribution) -> f64 {
    (2..=dist.n_bins())
        .map(|slot| dist.prob(slot, dist.constructive_port(slot).expect("middle slot")))
        .sum()
}

/// Error rate among sifted detections caused by amplitude mismatch between
/// adjacent bins and by finite visibility.
///
/// Each slot's wrong-port probability depends only on the amplitudes, so the
/// result does not depend on the phase pattern.
pub fn intrinsic_qber(state: &EncodedPhotonState, visibility: f64) -> Result<f64> {
    let dist = interfere(state, visibility)?;
    let (mut wrong, mut sifted) = (0.0, 0.0);
    for slot in 2..=dist.n_bins() {
        let right = dist.constructive_port(slot).expect("middle slot");
        wrong += dist.prob(slot, right.other());
        sifted += dist.slot_total(slot);
    }
    if sifted <= 0.0 {
        return Err(Error::UndefinedQber);
    }
    Ok(wrong / sifted)
}

/// One row of a KCE/QBER sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KceRow {
    pub n_bins: usize,
    pub kce: f64,
    pub qber: f64,
    /// Interference success probability (correct bit per photon).
    pub success: f64,
    pub visibility: f64,
    pub envelope: EnvelopeKind,
}

/// KCE, intrinsic QBER and interference success for each bin count.
pub fn kce_curve(envelope: &Envelope, span: f64, n_bins_list: &[usize], visibility: f64) -> Result<Vec<KceRow>> {
    check_fraction("visibility", visibility)?;
    n_bins_list
        .iter()
        .map(|&n| {
            let state = EncodedPhotonState::unmodulated(make_waveform(envelope, n, span)?);
            let dist = interfere(&state, visibility)?;
            Ok(KceRow {
                n_bins: n,
                kce: kce(&dist),
                qber: intrinsic_qber(&state, visibility)?,
                success: interference_success(&dist),
                visibility,
                envelope: envelope.kind(),
            })
        })
        .collect()
}
