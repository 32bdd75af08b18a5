//! The simulated quantum channel: eavesdropper tap, per-photon loss and
//! per-photon depolarizing noise, applied in that order (Eve taps near
//! the sender).

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::eve::Eve;
use crate::quantum::{PairRegistry, Photon, Polarization};
use crate::rngs::{poisson, random_index, random_unit};
use crate::wire::PulseRecord;

/// What travels on the quantum channel: zero or more photons sharing one
/// preparation. Zero photons means the pulse was lost or empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub seq: u32,
    pub photons: Vec<Photon>,
    /// Source mean photon number the pulse was drawn with (dimensionless).
    pub mean_photon_number: f64,
}

/// Photon-number model of the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "mu")]
pub enum SourceModel {
    /// Exactly one photon per pulse.
    SinglePhoton,
    /// k ~ Poisson(mu) photons per pulse.
    Poisson(f64),
}

impl SourceModel {
    pub fn mean_photon_number(&self) -> f64 {
        match self {
            SourceModel::SinglePhoton => 1.0,
            SourceModel::Poisson(mu) => *mu,
        }
    }

    pub fn draw_photon_count(&self, rng: &mut impl RngCore) -> usize {
        match self {
            SourceModel::SinglePhoton => 1,
            SourceModel::Poisson(mu) => poisson(rng, *mu),
        }
    }
}

/// Channel knobs: probabilities are per photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumChannelConfig {
    pub loss_probability: f64,
    pub noise_probability: f64,
}

/// A channel instance owning its eavesdropper tap.
#[derive(Debug)]
pub struct QuantumChannel {
    cfg: QuantumChannelConfig,
    eve: Eve,
}

impl QuantumChannel {
    pub fn new(cfg: QuantumChannelConfig, eve: Eve) -> QuantumChannel {
        QuantumChannel { cfg, eve }
    }

    pub fn eve(&self) -> &Eve {
        &self.eve
    }

    pub fn eve_mut(&mut self) -> &mut Eve {
        &mut self.eve
    }

    /// Pushes one pulse through the channel: Eve tap, then per-photon
    /// loss, then per-photon depolarization. `seq` is preserved.
    pub fn transmit_pulse(
        &mut self,
        pulse: Pulse,
        pairs: &mut PairRegistry,
        channel_rng: &mut impl RngCore,
        eve_rng: &mut impl RngCore,
    ) -> Pulse {
        let mut pulse = self.eve.tap(pulse, pairs, eve_rng);
        pulse
            .photons
            .retain(|_| random_unit(channel_rng) >= self.cfg.loss_probability);
        for photon in pulse.photons.iter_mut() {
            if random_unit(channel_rng) < self.cfg.noise_probability {
                depolarize(photon, pairs, channel_rng);
            }
        }
        pulse
    }
}

/// Replaces the photon's polarization by a uniformly random one of the
/// four angles. A still-entangled wing is first collapsed (the partner
/// wing keeps a random definite state; the correlation is destroyed).
fn depolarize(photon: &mut Photon, pairs: &mut PairRegistry, rng: &mut impl RngCore) {
    if let Photon::Entangled { pair_id, .. } = *photon {
        let partner = random_polarization(rng);
        // force_resolve is a no-op if the pair is already definite
        let _ = pairs.force_resolve(pair_id, partner);
    }
    *photon = Photon::Prepared(random_polarization(rng));
}

fn random_polarization(rng: &mut impl RngCore) -> Polarization {
    Polarization::from_code(random_index(rng, 4) as u8).unwrap()
}

/// Converts a post-channel pulse into its wire record. Entangled wings
/// must already be resolved (the sender measures its own wing first).
pub fn pulse_record(pulse: &Pulse, pairs: &PairRegistry) -> PulseRecord {
    let photons = pulse
        .photons
        .iter()
        .map(|p| match p {
            Photon::Prepared(pol) => *pol,
            Photon::Entangled { pair_id, .. } => pairs
                .resolved_state(*pair_id)
                .expect("entangled wing serialized before resolution"),
        })
        .collect();
    PulseRecord { seq: pulse.seq, photons }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eve::EveStrategy;
    use crate::quantum::{encode, measure_prepared, Basis};
    use crate::rngs::{stream, StreamId};

    fn channel(loss: f64, noise: f64) -> QuantumChannel {
        QuantumChannel::new(
            QuantumChannelConfig { loss_probability: loss, noise_probability: noise },
            Eve::new(EveStrategy::None),
        )
    }

    fn pulse(seq: u32, bit: bool, basis: Basis) -> Pulse {
        Pulse { seq, photons: vec![encode(bit, basis)], mean_photon_number: 1.0 }
    }

    #[test]
    fn identity_channel_passes_pulses_unchanged() {
        let mut ch = channel(0.0, 0.0);
        let mut pairs = PairRegistry::new();
        let mut crng = stream(1, StreamId::Channel);
        let mut erng = stream(1, StreamId::Eve);
        let p = pulse(42, true, Basis::Diagonal);
        assert_eq!(ch.transmit_pulse(p.clone(), &mut pairs, &mut crng, &mut erng), p);
    }

    #[test]
    fn certain_loss_empties_every_pulse() {
        let mut ch = channel(1.0, 0.0);
        let mut pairs = PairRegistry::new();
        let mut crng = stream(2, StreamId::Channel);
        let mut erng = stream(2, StreamId::Eve);
        for seq in 0..100 {
            let out = ch.transmit_pulse(pulse(seq, false, Basis::Rectilinear), &mut pairs, &mut crng, &mut erng);
            assert!(out.photons.is_empty());
            assert_eq!(out.seq, seq);
        }
    }

    #[test]
    fn depolarizing_noise_error_rate_matches_enumeration() {
        // noise 0.1, bit 0 rectilinear, measured rectilinearly. Of the 4
        // replacement angles: 90 always errs, 45/135 err half the time,
        // 0 never -> half of noise events flip the bit -> 0.05.
        let mut ch = channel(0.0, 0.1);
        let mut pairs = PairRegistry::new();
        let mut crng = stream(3, StreamId::Channel);
        let mut erng = stream(3, StreamId::Eve);
        let mut brng = stream(3, StreamId::Receiver);
        let n = 100_000u32;
        let mut errors = 0usize;
        for seq in 0..n {
            let out = ch.transmit_pulse(pulse(seq, false, Basis::Rectilinear), &mut pairs, &mut crng, &mut erng);
            let mut photon = out.photons[0];
            if measure_prepared(&mut photon, Basis::Rectilinear, &mut brng).bit {
                errors += 1;
            }
        }
        let freq = errors as f64 / n as f64;
        assert!((freq - 0.05).abs() < 0.005, "freq {freq}");
    }

    #[test]
    fn loss_rate_is_per_photon() {
        let mut ch = channel(0.3, 0.0);
        let mut pairs = PairRegistry::new();
        let mut crng = stream(4, StreamId::Channel);
        let mut erng = stream(4, StreamId::Eve);
        let n = 100_000u32;
        let mut survived = 0usize;
        for seq in 0..n {
            survived += ch
                .transmit_pulse(pulse(seq, true, Basis::Rectilinear), &mut pairs, &mut crng, &mut erng)
                .photons
                .len();
        }
        let freq = survived as f64 / n as f64;
        assert!((freq - 0.7).abs() < 0.01, "freq {freq}");
    }
}
