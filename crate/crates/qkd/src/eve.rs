//! Eavesdropper strategies attached to the quantum channel tap point.
//!
//! Two attacks: intercept-resend (measure in a guessed basis, forward a
//! freshly prepared photon) and beam splitting (divert photons with a
//! half-silvered mirror and measure the store only after the bases go
//! public). Eve reads the entire classical transcript but never writes
//! to it, and she stores photons indefinitely without decoherence.

use std::collections::HashMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::channel::Pulse;
use crate::quantum::{encode, measure, Basis, PairRegistry, Photon};
use crate::rngs::{random_bit, random_unit};

/// How Eve picks her measurement basis when intercepting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisPolicy {
    RandomBasis,
    FixedRectilinear,
    FixedDiagonal,
}

/// Eavesdropper configuration, selected via `SessionConfig`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EveStrategy {
    None,
    InterceptResend { fraction: f64, policy: BasisPolicy },
    BeamSplit,
}

impl EveStrategy {
    pub fn is_none(&self) -> bool {
        matches!(self, EveStrategy::None)
    }
}

/// One observation Eve made. `certain` marks knowledge that is correct
/// with probability 1 (matching-basis measurement); everything else is a
/// guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EveRecord {
    pub seq: u32,
    pub basis_guess: Basis,
    pub bit_guess: bool,
    pub certain: bool,
}

/// Eve's accumulated knowledge after a session, for post-session
/// accounting. `bits_known_of_sifted_key` counts only positions that
/// survived sifting and that Eve knows with certainty.
#[derive(Debug, Clone, Default)]
pub struct EveKnowledge {
    pub records: Vec<EveRecord>,
    pub bits_known_of_sifted_key: usize,
}

/// A live eavesdropper instance, owned by one channel and invoked
/// synchronously inside pulse transmission.
#[derive(Debug)]
pub struct Eve {
    strategy: EveStrategy,
    records: Vec<EveRecord>,
    stored: HashMap<u32, Vec<Photon>>,
}

impl Eve {
    pub fn new(strategy: EveStrategy) -> Eve {
        Eve { strategy, records: Vec::new(), stored: HashMap::new() }
    }

    pub fn strategy(&self) -> &EveStrategy {
        &self.strategy
    }

    /// Number of pulses Eve currently holds at least one photon of.
    pub fn stored_pulses(&self) -> usize {
        self.stored.len()
    }

    /// Applies the configured attack to one pulse and returns whatever
    /// continues toward the receiver.
    pub fn tap(
        &mut self,
        pulse: Pulse,
        pairs: &mut PairRegistry,
        rng: &mut impl RngCore,
    ) -> Pulse {
        match self.strategy.clone() {
            EveStrategy::None => pulse,
            EveStrategy::InterceptResend { fraction, policy } => {
                self.intercept_resend(pulse, fraction, policy, pairs, rng)
            }
            EveStrategy::BeamSplit => self.beam_split(pulse, rng),
        }
    }

    fn intercept_resend(
        &mut self,
        mut pulse: Pulse,
        fraction: f64,
        policy: BasisPolicy,
        pairs: &mut PairRegistry,
        rng: &mut impl RngCore,
    ) -> Pulse {
        if pulse.photons.is_empty() || random_unit(rng) >= fraction {
            return pulse;
        }
        let basis = match policy {
            BasisPolicy::RandomBasis => Basis::from_bit(random_bit(rng)),
            BasisPolicy::FixedRectilinear => Basis::Rectilinear,
            BasisPolicy::FixedDiagonal => Basis::Diagonal,
        };
        let mut measured_bit = false;
        for (i, photon) in pulse.photons.iter_mut().enumerate() {
            let outcome = measure(photon, basis, rng, pairs)
                .expect("eve measures photons from a live session registry");
            if i == 0 {
                measured_bit = outcome.bit;
            }
        }
        self.records.push(EveRecord {
            seq: pulse.seq,
            basis_guess: basis,
            bit_guess: measured_bit,
            certain: false,
        });
        // brand-new photons at her measured polarization
        let n = pulse.photons.len();
        pulse.photons = vec![encode(measured_bit, basis); n];
        pulse
    }

    fn beam_split(&mut self, mut pulse: Pulse, rng: &mut impl RngCore) -> Pulse {
        let mut forwarded = Vec::with_capacity(pulse.photons.len());
        for photon in pulse.photons.drain(..) {
            if random_bit(rng) {
                self.stored.entry(pulse.seq).or_default().push(photon);
            } else {
                forwarded.push(photon);
            }
        }
        pulse.photons = forwarded;
        pulse
    }

    /// Post-session accounting, run after the basis reveal appears on the
    /// public transcript. `revealed` lists the positions that survived
    /// sifting together with the basis both parties used there.
    ///
    /// Stored beam-split photons at surviving positions are measured in
    /// the true basis, yielding the correct bit with probability 1.
    /// Intercept records become certain where Eve's basis guess matched
    /// the revealed basis.
    pub fn delayed_measure_store(
        &mut self,
        revealed: &[(u32, Basis)],
        pairs: &mut PairRegistry,
        rng: &mut impl RngCore,
    ) -> EveKnowledge {
        let record_index: HashMap<u32, usize> =
            self.records.iter().enumerate().map(|(i, r)| (r.seq, i)).collect();
        let mut known = 0usize;
        for &(seq, basis) in revealed {
            if let Some(photons) = self.stored.get_mut(&seq) {
                if let Some(photon) = photons.first_mut() {
                    let outcome = measure(photon, basis, rng, pairs)
                        .expect("stored photon belongs to this session");
                    self.records.push(EveRecord {
                        seq,
                        basis_guess: basis,
                        bit_guess: outcome.bit,
                        certain: true,
                    });
                    known += 1;
                    continue;
                }
            }
            if let Some(rec) = record_index.get(&seq).map(|&i| &mut self.records[i]) {
                if rec.basis_guess == basis {
                    rec.certain = true;
                    known += 1;
                }
            }
        }
        EveKnowledge { records: self.records.clone(), bits_known_of_sifted_key: known }
    }
}
