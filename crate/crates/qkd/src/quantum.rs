//! Polarization states, bit/photon encoding and probabilistic measurement.
//!
//! The physics substrate every protocol builds on: two conjugate bases,
//! four polarization angles, projection-on-measurement, and a lazily
//! resolved entangled-pair model for E91.
//!
//! Canonical bit mapping: Rectilinear 0 -> 0 deg, 1 -> 90 deg;
//! Diagonal 0 -> 45 deg, 1 -> 135 deg.

use std::collections::HashMap;

use rand::RngCore;
use thiserror::Error;

use crate::rngs::random_bit;

/// One of the two conjugate measurement bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    /// 0 / 90 degrees.
    Rectilinear,
    /// 45 / 135 degrees.
    Diagonal,
}

impl Basis {
    pub fn conjugate(self) -> Basis {
        match self {
            Basis::Rectilinear => Basis::Diagonal,
            Basis::Diagonal => Basis::Rectilinear,
        }
    }

    pub fn from_bit(bit: bool) -> Basis {
        if bit {
            Basis::Diagonal
        } else {
            Basis::Rectilinear
        }
    }
}

/// One of the four polarization angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl Polarization {
    pub fn basis(self) -> Basis {
        match self {
            Polarization::Deg0 | Polarization::Deg90 => Basis::Rectilinear,
            Polarization::Deg45 | Polarization::Deg135 => Basis::Diagonal,
        }
    }

    /// The bit this polarization encodes in its own basis.
    pub fn bit(self) -> bool {
        matches!(self, Polarization::Deg90 | Polarization::Deg135)
    }

    pub fn angle_degrees(self) -> u16 {
        match self {
            Polarization::Deg0 => 0,
            Polarization::Deg45 => 45,
            Polarization::Deg90 => 90,
            Polarization::Deg135 => 135,
        }
    }

    pub fn from_angle(deg: u16) -> Option<Polarization> {
        match deg {
            0 => Some(Polarization::Deg0),
            45 => Some(Polarization::Deg45),
            90 => Some(Polarization::Deg90),
            135 => Some(Polarization::Deg135),
            _ => None,
        }
    }

    /// Compact 2-bit code used by the wire format: 0,45,90,135 -> 0..=3.
    pub fn code(self) -> u8 {
        match self {
            Polarization::Deg0 => 0,
            Polarization::Deg45 => 1,
            Polarization::Deg90 => 2,
            Polarization::Deg135 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Polarization> {
        match code {
            0 => Some(Polarization::Deg0),
            1 => Some(Polarization::Deg45),
            2 => Some(Polarization::Deg90),
            3 => Some(Polarization::Deg135),
            _ => None,
        }
    }
}

/// Canonical polarization for (bit, basis).
pub fn polarization_for(bit: bool, basis: Basis) -> Polarization {
    match (basis, bit) {
        (Basis::Rectilinear, false) => Polarization::Deg0,
        (Basis::Rectilinear, true) => Polarization::Deg90,
        (Basis::Diagonal, false) => Polarization::Deg45,
        (Basis::Diagonal, true) => Polarization::Deg135,
    }
}

/// Which side of an entangled pair a photon is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSide {
    A,
    B,
}

/// A single light quantum: either a definite polarization, or one wing of
/// an entangled pair whose polarization is fixed only when either side is
/// first measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Photon {
    Prepared(Polarization),
    Entangled { pair_id: u64, side: PairSide },
}

impl Photon {
    /// The definite polarization, if the photon has one yet.
    pub fn polarization(&self) -> Option<Polarization> {
        match self {
            Photon::Prepared(p) => Some(*p),
            Photon::Entangled { .. } => None,
        }
    }
}

/// Result of one measurement. `post_state` always belongs to the basis
/// used: measurement projects the photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasurementOutcome {
    pub bit: bool,
    pub basis_used: Basis,
    pub post_state: Polarization,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PairError {
    #[error("entangled pair id {0} already exists")]
    DuplicatePairId(u64),
    #[error("entangled pair id {0} unknown to this registry")]
    UnknownPairId(u64),
}

/// Per-session registry of entangled pairs and their resolved states.
///
/// A pair starts unresolved; the first measurement of either wing fixes a
/// shared definite polarization in the measuring basis, which the other
/// wing then carries.
#[derive(Debug, Default)]
pub struct PairRegistry {
    resolved: HashMap<u64, Option<Polarization>>,
}

impl PairRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Emits a fresh entangled pair. `pair_id` must be unused in this
    /// session; a duplicate signals a harness bug.
    pub fn make_entangled_pair(&mut self, pair_id: u64) -> Result<(Photon, Photon), PairError> {
        if self.resolved.contains_key(&pair_id) {
            return Err(PairError::DuplicatePairId(pair_id));
        }
        self.resolved.insert(pair_id, None);
        Ok((
            Photon::Entangled { pair_id, side: PairSide::A },
            Photon::Entangled { pair_id, side: PairSide::B },
        ))
    }

    /// Forces a pair into a definite state without a measurement outcome
    /// (used by the depolarizing noise model).
    pub(crate) fn force_resolve(
        &mut self,
        pair_id: u64,
        state: Polarization,
    ) -> Result<(), PairError> {
        match self.resolved.get_mut(&pair_id) {
            Some(slot) => {
                if slot.is_none() {
                    *slot = Some(state);
                }
                Ok(())
            }
            None => Err(PairError::UnknownPairId(pair_id)),
        }
    }

    /// Definite state of a pair, if fixed already.
    pub fn resolved_state(&self, pair_id: u64) -> Option<Polarization> {
        self.resolved.get(&pair_id).copied().flatten()
    }

    fn state_of(&self, pair_id: u64) -> Result<Option<Polarization>, PairError> {
        self.resolved
            .get(&pair_id)
            .copied()
            .ok_or(PairError::UnknownPairId(pair_id))
    }
}

/// Encodes one bit as a photon in the given basis. Deterministic.
pub fn encode(bit: bool, basis: Basis) -> Photon {
    Photon::Prepared(polarization_for(bit, basis))
}

/// Measures a photon in `basis`, projecting it onto that basis.
///
/// Matching-basis measurement is deterministic and draws nothing from the
/// rng; conjugate-basis measurement draws exactly one bit. The first
/// measurement of an unresolved entangled wing also draws exactly one bit
/// and fixes both wings.
pub fn measure(
    photon: &mut Photon,
    basis: Basis,
    rng: &mut impl RngCore,
    pairs: &mut PairRegistry,
) -> Result<MeasurementOutcome, PairError> {
    let current = match *photon {
        Photon::Prepared(p) => p,
        Photon::Entangled { pair_id, .. } => match pairs.state_of(pair_id)? {
            Some(p) => p,
            None => {
                let bit = random_bit(rng);
                let post = polarization_for(bit, basis);
                pairs.force_resolve(pair_id, post)?;
                *photon = Photon::Prepared(post);
                return Ok(MeasurementOutcome { bit, basis_used: basis, post_state: post });
            }
        },
    };
    let outcome = if current.basis() == basis {
        MeasurementOutcome { bit: current.bit(), basis_used: basis, post_state: current }
    } else {
        let bit = random_bit(rng);
        let post = polarization_for(bit, basis);
        MeasurementOutcome { bit, basis_used: basis, post_state: post }
    };
    *photon = Photon::Prepared(outcome.post_state);
    Ok(outcome)
}

/// Measures a photon that already has a definite polarization.
pub fn measure_prepared(
    photon: &mut Photon,
    basis: Basis,
    rng: &mut impl RngCore,
) -> MeasurementOutcome {
    let mut scratch = PairRegistry::new();
    measure(photon, basis, rng, &mut scratch)
        .expect("prepared photon never touches the pair registry")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngs::{stream, StreamId};
    use rand::RngCore;

    /// RngCore wrapper counting 32-bit draws.
    struct Counting<R> {
        inner: R,
        draws: usize,
    }

    impl<R: RngCore> RngCore for Counting<R> {
        fn next_u32(&mut self) -> u32 {
            self.draws += 1;
            self.inner.next_u32()
        }
        fn next_u64(&mut self) -> u64 {
            self.draws += 1;
            self.inner.next_u64()
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            self.draws += 1;
            self.inner.fill_bytes(dest)
        }
    }

    fn counting(seed: u64) -> Counting<rand_chacha::ChaCha8Rng> {
        Counting { inner: stream(seed, StreamId::Sender), draws: 0 }
    }

    #[test]
    fn canonical_encoding() {
        assert_eq!(encode(false, Basis::Rectilinear), Photon::Prepared(Polarization::Deg0));
        assert_eq!(encode(true, Basis::Rectilinear), Photon::Prepared(Polarization::Deg90));
        assert_eq!(encode(false, Basis::Diagonal), Photon::Prepared(Polarization::Deg45));
        assert_eq!(encode(true, Basis::Diagonal), Photon::Prepared(Polarization::Deg135));
    }

    #[test]
    fn matching_basis_is_deterministic_and_draws_nothing() {
        let mut rng = counting(1);
        let mut photon = encode(true, Basis::Rectilinear);
        let out = measure_prepared(&mut photon, Basis::Rectilinear, &mut rng);
        assert!(out.bit);
        assert_eq!(out.post_state, Polarization::Deg90);
        assert_eq!(rng.draws, 0);
    }

    #[test]
    fn conjugate_basis_draws_exactly_once_and_is_fair() {
        let mut rng = counting(2);
        let n = 100_000;
        let mut zeros = 0usize;
        for _ in 0..n {
            let mut photon = encode(false, Basis::Diagonal); // 45 deg
            let out = measure_prepared(&mut photon, Basis::Rectilinear, &mut rng);
            assert_eq!(out.post_state.basis(), Basis::Rectilinear);
            if !out.bit {
                zeros += 1;
            }
        }
        assert_eq!(rng.draws, n);
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn projection_idempotence() {
        let mut rng = counting(3);
        for seed_bit in [false, true] {
            for basis in [Basis::Rectilinear, Basis::Diagonal] {
                let mut photon = encode(seed_bit, basis);
                let first = measure_prepared(&mut photon, basis.conjugate(), &mut rng);
                let second = measure_prepared(&mut photon, basis.conjugate(), &mut rng);
                assert_eq!(first.bit, second.bit);
                assert_eq!(first.post_state, second.post_state);
            }
        }
    }

    #[test]
    fn wrong_basis_then_back_recovers_original_half_the_time() {
        // measure a 0-deg photon diagonally, then rectilinearly again:
        // two independent 1/2 branches compose to 1/2 recovery
        let mut rng = counting(4);
        let n = 100_000;
        let mut recovered = 0usize;
        for _ in 0..n {
            let mut photon = encode(false, Basis::Rectilinear);
            measure_prepared(&mut photon, Basis::Diagonal, &mut rng);
            let back = measure_prepared(&mut photon, Basis::Rectilinear, &mut rng);
            if !back.bit {
                recovered += 1;
            }
        }
        let freq = recovered as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn entangled_same_basis_always_agrees() {
        let mut rng = counting(5);
        let mut pairs = PairRegistry::new();
        for id in 0..2_000u64 {
            let basis = if id % 2 == 0 { Basis::Rectilinear } else { Basis::Diagonal };
            let (mut a, mut b) = pairs.make_entangled_pair(id).unwrap();
            let oa = measure(&mut a, basis, &mut rng, &mut pairs).unwrap();
            let ob = measure(&mut b, basis, &mut rng, &mut pairs).unwrap();
            assert_eq!(oa.bit, ob.bit);
            assert_eq!(oa.post_state, ob.post_state);
        }
    }

    #[test]
    fn entangled_conjugate_second_measurement_is_fair() {
        let mut rng = counting(6);
        let mut pairs = PairRegistry::new();
        let n = 100_000u64;
        let mut agree = 0usize;
        for id in 0..n {
            let (mut a, mut b) = pairs.make_entangled_pair(id).unwrap();
            let oa = measure(&mut a, Basis::Rectilinear, &mut rng, &mut pairs).unwrap();
            let ob = measure(&mut b, Basis::Diagonal, &mut rng, &mut pairs).unwrap();
            if oa.bit == ob.bit {
                agree += 1;
            }
        }
        let freq = agree as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn duplicate_pair_id_rejected() {
        let mut pairs = PairRegistry::new();
        pairs.make_entangled_pair(9).unwrap();
        assert_eq!(pairs.make_entangled_pair(9), Err(PairError::DuplicatePairId(9)));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let run = || {
            let mut rng = stream(42, StreamId::Sender);
            let mut bits = Vec::new();
            for i in 0..512 {
                let mut photon = encode(i % 2 == 0, Basis::Diagonal);
                bits.push(measure_prepared(&mut photon, Basis::Rectilinear, &mut rng).bit);
            }
            bits
        };
        assert_eq!(run(), run());
    }
}
