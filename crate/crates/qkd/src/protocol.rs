//! The BB84, B92 and simplified-E91 session state machines.
//!
//! Normative message sequence (BB84/E91): ProtocolHello (both) ->
//! quantum transmission -> receiver BasisReveal with arrival mask ->
//! sender SiftIndices -> receiver SampleRequest -> both SampleDisclosure
//! -> QberReport -> Abort, or reconciliation and PaParams. B92 replaces
//! the basis discussion: the receiver announces the conclusively decoded
//! positions as SiftIndices and never discloses outcomes.
//!
//! The sender side also hosts the simulated quantum channel: photon
//! records cross to the receiver after Eve, loss and noise have acted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{pulse_record, Pulse, QuantumChannel, QuantumChannelConfig, SourceModel};
use crate::eve::{Eve, EveKnowledge, EveStrategy};
use crate::postproc::{
    estimate_eve_knowledge, pa_out_len, privacy_amplify, reconcile_receiver, reconcile_sender,
    BlockSchedule, PaError, ReconError,
};
use crate::quantum::{encode, measure, measure_prepared, Basis, PairRegistry, Photon, Polarization};
use crate::rngs::{permutation, random_bit, stream, StreamId};
use crate::transport::{Transcript, Transport, TransportError};
use crate::wire::{AbortReason, ClassicalMessage, ProtocolId, PulseRecord};

const PULSE_BATCH_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Bb84,
    B92,
    E91,
}

impl Protocol {
    pub fn wire_id(self) -> ProtocolId {
        match self {
            Protocol::Bb84 => ProtocolId::Bb84,
            Protocol::B92 => ProtocolId::B92,
            Protocol::E91 => ProtocolId::E91,
        }
    }
}

/// All knobs of one protocol run. Both parties must hold identical
/// configs; the hello exchange checks protocol and pulse count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub protocol: Protocol,
    pub n_pulses: u32,
    /// Fraction of sifted bits sacrificed for QBER estimation.
    pub sample_fraction: f64,
    pub qber_abort_threshold: f64,
    pub loss: f64,
    pub noise: f64,
    pub eve: EveStrategy,
    pub source: SourceModel,
    pub security_param: u32,
    pub seed: u64,
}

impl SessionConfig {
    pub fn new(protocol: Protocol, n_pulses: u32, seed: u64) -> SessionConfig {
        SessionConfig {
            protocol,
            n_pulses,
            sample_fraction: 0.25,
            qber_abort_threshold: 0.11,
            loss: 0.0,
            noise: 0.0,
            eve: EveStrategy::None,
            source: SourceModel::SinglePhoton,
            security_param: 32,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SessionError::InvalidConfig(format!("{name} must be in [0,1], got {v}")))
            }
        };
        prob("loss", self.loss)?;
        prob("noise", self.noise)?;
        prob("qber_abort_threshold", self.qber_abort_threshold)?;
        if let EveStrategy::InterceptResend { fraction, .. } = self.eve {
            prob("eve intercept fraction", fraction)?;
        }
        if let SourceModel::Poisson(mu) = self.source {
            if mu <= 0.0 || !mu.is_finite() {
                return Err(SessionError::InvalidConfig(format!("poisson mu must be > 0, got {mu}")));
            }
        }
        if self.n_pulses == 0 {
            return Err(SessionError::InvalidConfig("n_pulses must be > 0".into()));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction < 1.0) {
            return Err(SessionError::InvalidConfig(format!(
                "sample_fraction must be in (0,1), got {}",
                self.sample_fraction
            )));
        }
        // the sample must leave at least 8 key bits at expected rates
        let sift_rate = match self.protocol {
            Protocol::Bb84 | Protocol::E91 => 0.5,
            Protocol::B92 => 0.25,
        };
        let expected_key =
            self.n_pulses as f64 * (1.0 - self.loss) * sift_rate * (1.0 - self.sample_fraction);
        if expected_key < 8.0 {
            return Err(SessionError::InvalidConfig(format!(
                "config leaves ~{expected_key:.1} expected key bits, need at least 8"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("peer hello does not match this config")]
    ConfigMismatch,
    #[error("protocol violation: {0}")]
    ProtocolViolation(&'static str),
    #[error("length mismatch in {0}")]
    LengthMismatch(&'static str),
    #[error("index out of range in {0}")]
    IndexOutOfRange(&'static str),
    #[error("reconciliation failed: {0}")]
    Reconciliation(#[from] ReconError),
    #[error("privacy amplification failed: {0}")]
    PrivacyAmplification(#[from] PaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Sender,
    Receiver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionStatus {
    Completed,
    Aborted(AbortReason),
}

/// Everything one party knows after a session.
#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub role: Role,
    pub status: SessionStatus,
    pub pulses_sent: u32,
    /// Pulses that arrived with at least one photon.
    pub pulses_received: u32,
    pub sifted_len: usize,
    pub sifted_key: Vec<bool>,
    pub sampled: usize,
    pub qber: f64,
    /// Reconciled key length p (0 when aborted).
    pub reconciled_len: usize,
    pub leaked_bits: usize,
    /// The parties' conservative bound l on Eve's knowledge.
    pub eve_l_bound: usize,
    pub final_key: Vec<bool>,
    /// Ground truth from the simulated eavesdropper (sender side only).
    pub eve_knowledge: Option<EveKnowledge>,
    pub transcript: Transcript,
}

impl SessionOutcome {
    pub fn sift_ratio(&self) -> f64 {
        if self.pulses_received == 0 {
            0.0
        } else {
            self.sifted_len as f64 / self.pulses_received as f64
        }
    }
}

/// Sifting: keep exactly the positions where bases match and a photon
/// arrived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiftResult {
    pub kept_indices: Vec<u32>,
    pub sifted_key: Vec<bool>,
}

pub fn sift(
    own_bases: &[Basis],
    peer_bases: &[Basis],
    received_mask: &[bool],
    own_bits: &[bool],
) -> Result<SiftResult, SessionError> {
    if own_bases.len() != peer_bases.len()
        || own_bases.len() != received_mask.len()
        || own_bases.len() != own_bits.len()
    {
        return Err(SessionError::LengthMismatch("sift inputs"));
    }
    let mut kept_indices = Vec::new();
    let mut sifted_key = Vec::new();
    for i in 0..own_bases.len() {
        if received_mask[i] && own_bases[i] == peer_bases[i] {
            kept_indices.push(i as u32);
            sifted_key.push(own_bits[i]);
        }
    }
    Ok(SiftResult { kept_indices, sifted_key })
}

/// QBER estimate from disclosed sample positions.
#[derive(Debug, Clone, PartialEq)]
pub struct QberReportData {
    pub sample_indices: Vec<u32>,
    pub mismatches: usize,
    pub qber: f64,
}

pub fn estimate_qber(
    sifted_key_a: &[bool],
    sifted_key_b: &[bool],
    sample_indices: &[u32],
) -> Result<QberReportData, SessionError> {
    if sifted_key_a.len() != sifted_key_b.len() {
        return Err(SessionError::LengthMismatch("qber keys"));
    }
    let mut mismatches = 0usize;
    for &i in sample_indices {
        let i = i as usize;
        if i >= sifted_key_a.len() {
            return Err(SessionError::IndexOutOfRange("qber sample"));
        }
        if sifted_key_a[i] != sifted_key_b[i] {
            mismatches += 1;
        }
    }
    let qber = if sample_indices.is_empty() {
        0.0
    } else {
        mismatches as f64 / sample_indices.len() as f64
    };
    Ok(QberReportData { sample_indices: sample_indices.to_vec(), mismatches, qber })
}

fn remove_indices(bits: &[bool], sorted_indices: &[u32]) -> Vec<bool> {
    let mut out = Vec::with_capacity(bits.len() - sorted_indices.len());
    let mut next = sorted_indices.iter().peekable();
    for (i, &b) in bits.iter().enumerate() {
        if next.peek().is_some_and(|&&s| s as usize == i) {
            next.next();
        } else {
            out.push(b);
        }
    }
    out
}

fn check_indices(indices: &[u32], bound: usize, what: &'static str) -> Result<(), SessionError> {
    let mut prev: Option<u32> = None;
    for &i in indices {
        if i as usize >= bound {
            return Err(SessionError::IndexOutOfRange(what));
        }
        if prev.is_some_and(|p| p >= i) {
            return Err(SessionError::ProtocolViolation(what));
        }
        prev = Some(i);
    }
    Ok(())
}

fn exchange_hello(
    cfg: &SessionConfig,
    transport: &mut dyn Transport,
) -> Result<(), SessionError> {
    transport.send(&ClassicalMessage::ProtocolHello {
        protocol: cfg.protocol.wire_id(),
        n_pulses: cfg.n_pulses,
    })?;
    match transport.recv()? {
        ClassicalMessage::ProtocolHello { protocol, n_pulses }
            if protocol == cfg.protocol.wire_id() && n_pulses == cfg.n_pulses =>
        {
            Ok(())
        }
        ClassicalMessage::ProtocolHello { .. } => Err(SessionError::ConfigMismatch),
        _ => Err(SessionError::ProtocolViolation("expected hello")),
    }
}

struct SenderPreparation {
    bits: Vec<bool>,
    bases: Vec<Basis>,
    arrived: u32,
}

/// Runs the quantum transmission on the sender side: prepares pulses,
/// pushes them through the channel (where Eve may act) and streams the
/// surviving photon records to the receiver.
fn transmit_all(
    cfg: &SessionConfig,
    transport: &mut dyn Transport,
    channel: &mut QuantumChannel,
    pairs: &mut PairRegistry,
) -> Result<SenderPreparation, SessionError> {
    let mut sender_rng = stream(cfg.seed, StreamId::Sender);
    let mut channel_rng = stream(cfg.seed, StreamId::Channel);
    let mut eve_rng = stream(cfg.seed, StreamId::Eve);
    let mut source_rng = stream(cfg.seed, StreamId::Source);

    let n = cfg.n_pulses as usize;
    let mut bits = Vec::with_capacity(n);
    let mut bases = Vec::with_capacity(n);
    let mut arrived = 0u32;
    let mut batch: Vec<PulseRecord> = Vec::with_capacity(PULSE_BATCH_SIZE);
    for seq in 0..cfg.n_pulses {
        let out = match cfg.protocol {
            Protocol::Bb84 => {
                let bit = random_bit(&mut sender_rng);
                let basis = Basis::from_bit(random_bit(&mut sender_rng));
                bits.push(bit);
                bases.push(basis);
                let k = cfg.source.draw_photon_count(&mut source_rng);
                let pulse = Pulse {
                    seq,
                    photons: vec![encode(bit, basis); k],
                    mean_photon_number: cfg.source.mean_photon_number(),
                };
                channel.transmit_pulse(pulse, pairs, &mut channel_rng, &mut eve_rng)
            }
            Protocol::B92 => {
                // two non-orthogonal states only: 0 -> 0 deg, 1 -> 45 deg
                let bit = random_bit(&mut sender_rng);
                let pol = if bit { Polarization::Deg45 } else { Polarization::Deg0 };
                bits.push(bit);
                bases.push(pol.basis());
                let k = cfg.source.draw_photon_count(&mut source_rng);
                let pulse = Pulse {
                    seq,
                    photons: vec![Photon::Prepared(pol); k],
                    mean_photon_number: cfg.source.mean_photon_number(),
                };
                channel.transmit_pulse(pulse, pairs, &mut channel_rng, &mut eve_rng)
            }
            Protocol::E91 => {
                // pair source at the sender; one pair per pulse. The
                // receiver's wing crosses the channel first (Eve taps
                // near the source), then the sender measures her wing.
                let (mut wing_a, wing_b) = pairs
                    .make_entangled_pair(seq as u64)
                    .map_err(|_| SessionError::ProtocolViolation("duplicate pair id"))?;
                let pulse = Pulse { seq, photons: vec![wing_b], mean_photon_number: 1.0 };
                let out = channel.transmit_pulse(pulse, pairs, &mut channel_rng, &mut eve_rng);
                let basis = Basis::from_bit(random_bit(&mut sender_rng));
                let outcome = measure(&mut wing_a, basis, &mut sender_rng, pairs)
                    .expect("own wing belongs to this registry");
                bits.push(outcome.bit);
                bases.push(basis);
                out
            }
        };
        if !out.photons.is_empty() {
            arrived += 1;
        }
        batch.push(pulse_record(&out, pairs));
        if batch.len() == PULSE_BATCH_SIZE {
            transport.send(&ClassicalMessage::PulseBatch(std::mem::take(&mut batch)))?;
        }
    }
    if !batch.is_empty() {
        transport.send(&ClassicalMessage::PulseBatch(batch))?;
    }
    Ok(SenderPreparation { bits, bases, arrived })
}

pub fn run_sender(
    cfg: &SessionConfig,
    transport: &mut dyn Transport,
) -> Result<SessionOutcome, SessionError> {
    cfg.validate()?;
    let mut pairs = PairRegistry::new();
    let mut channel = QuantumChannel::new(
        QuantumChannelConfig { loss_probability: cfg.loss, noise_probability: cfg.noise },
        Eve::new(cfg.eve.clone()),
    );

    exchange_hello(cfg, transport)?;
    let prep = transmit_all(cfg, transport, &mut channel, &mut pairs)?;
    let n = cfg.n_pulses as usize;

    // basis discussion and sifting
    let (kept, sifted) = match cfg.protocol {
        Protocol::Bb84 | Protocol::E91 => {
            let (peer_bases, mask) = match transport.recv()? {
                ClassicalMessage::BasisReveal { bases, received_mask } => (bases, received_mask),
                _ => return Err(SessionError::ProtocolViolation("expected basis reveal")),
            };
            if peer_bases.len() != n || mask.len() != n {
                return Err(SessionError::LengthMismatch("basis reveal"));
            }
            let result = sift(&prep.bases, &peer_bases, &mask, &prep.bits)?;
            transport.send(&ClassicalMessage::SiftIndices(result.kept_indices.clone()))?;
            (result.kept_indices, result.sifted_key)
        }
        Protocol::B92 => {
            // receiver announces conclusive positions, never outcomes
            let kept = match transport.recv()? {
                ClassicalMessage::SiftIndices(idx) => idx,
                _ => return Err(SessionError::ProtocolViolation("expected sift indices")),
            };
            check_indices(&kept, n, "b92 sift indices")?;
            let sifted = kept.iter().map(|&i| prep.bits[i as usize]).collect();
            (kept, sifted)
        }
    };

    // QBER estimation on a disclosed sample
    let sample_idx = match transport.recv()? {
        ClassicalMessage::SampleRequest(idx) => idx,
        _ => return Err(SessionError::ProtocolViolation("expected sample request")),
    };
    check_indices(&sample_idx, sifted.len(), "sample indices")?;
    let theirs = match transport.recv()? {
        ClassicalMessage::SampleDisclosure(bits) => bits,
        _ => return Err(SessionError::ProtocolViolation("expected sample disclosure")),
    };
    if theirs.len() != sample_idx.len() {
        return Err(SessionError::LengthMismatch("sample disclosure"));
    }
    let mine: Vec<bool> = sample_idx.iter().map(|&i| sifted[i as usize]).collect();
    transport.send(&ClassicalMessage::SampleDisclosure(mine.clone()))?;
    let mismatches = mine.iter().zip(&theirs).filter(|(a, b)| a != b).count();
    match transport.recv()? {
        ClassicalMessage::QberReport { mismatches: m, sample_size }
            if m as usize == mismatches && sample_size as usize == sample_idx.len() => {}
        ClassicalMessage::QberReport { .. } => {
            return Err(SessionError::ProtocolViolation("qber report disagrees"))
        }
        _ => return Err(SessionError::ProtocolViolation("expected qber report")),
    }
    let qber = if sample_idx.is_empty() {
        0.0
    } else {
        mismatches as f64 / sample_idx.len() as f64
    };

    // ground-truth eavesdropper accounting from the public reveal
    let eve_knowledge = if !cfg.eve.is_none() && cfg.protocol != Protocol::B92 {
        let mut eve_rng = stream(cfg.seed, StreamId::Eve);
        let revealed: Vec<(u32, Basis)> =
            kept.iter().map(|&i| (i, prep.bases[i as usize])).collect();
        Some(channel.eve_mut().delayed_measure_store(&revealed, &mut pairs, &mut eve_rng))
    } else {
        None
    };

    let mut outcome = SessionOutcome {
        role: Role::Sender,
        status: SessionStatus::Completed,
        pulses_sent: cfg.n_pulses,
        pulses_received: prep.arrived,
        sifted_len: sifted.len(),
        sifted_key: sifted.clone(),
        sampled: sample_idx.len(),
        qber,
        reconciled_len: 0,
        leaked_bits: 0,
        eve_l_bound: 0,
        final_key: Vec::new(),
        eve_knowledge,
        transcript: Transcript::default(),
    };

    if qber > cfg.qber_abort_threshold {
        match transport.recv()? {
            ClassicalMessage::Abort(reason) => outcome.status = SessionStatus::Aborted(reason),
            _ => return Err(SessionError::ProtocolViolation("expected abort")),
        }
        outcome.transcript = transport.transcript().clone();
        return Ok(outcome);
    }

    let key = remove_indices(&sifted, &sample_idx);
    let schedule = BlockSchedule::for_qber(qber, key.len());
    let mut public_rng = stream(cfg.seed, StreamId::Public);
    let leaked = reconcile_sender(&key, &schedule, transport, &mut public_rng)?;
    let l_bound = estimate_eve_knowledge(qber, &cfg.source, key.len());
    let expected_out = pa_out_len(key.len(), leaked, l_bound, cfg.security_param as usize);
    let (out_len, seed_bits) = match transport.recv()? {
        ClassicalMessage::PaParams { out_len, security_param, seed_bits }
            if security_param == cfg.security_param && out_len as usize == expected_out =>
        {
            (out_len as usize, seed_bits)
        }
        ClassicalMessage::PaParams { .. } => {
            return Err(SessionError::ProtocolViolation("pa params disagree"))
        }
        _ => return Err(SessionError::ProtocolViolation("expected pa params")),
    };
    outcome.final_key = privacy_amplify(&key, &seed_bits, out_len)?;
    outcome.reconciled_len = key.len();
    outcome.leaked_bits = leaked;
    outcome.eve_l_bound = l_bound;
    outcome.transcript = transport.transcript().clone();
    Ok(outcome)
}

pub fn run_receiver(
    cfg: &SessionConfig,
    transport: &mut dyn Transport,
) -> Result<SessionOutcome, SessionError> {
    cfg.validate()?;
    let mut receiver_rng = stream(cfg.seed, StreamId::Receiver);

    exchange_hello(cfg, transport)?;

    // measure arriving photon records
    let n = cfg.n_pulses as usize;
    let mut bases = Vec::with_capacity(n);
    let mut bits = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    let mut conclusive = Vec::with_capacity(n);
    let mut seen = 0usize;
    while seen < n {
        let records = match transport.recv()? {
            ClassicalMessage::PulseBatch(records) => records,
            _ => return Err(SessionError::ProtocolViolation("expected pulse batch")),
        };
        if seen + records.len() > n {
            return Err(SessionError::ProtocolViolation("too many pulse records"));
        }
        for rec in records {
            if rec.seq as usize != seen {
                return Err(SessionError::ProtocolViolation("pulse records out of order"));
            }
            seen += 1;
            let basis = Basis::from_bit(random_bit(&mut receiver_rng));
            bases.push(basis);
            match rec.photons.first() {
                Some(&pol) => {
                    mask.push(true);
                    let mut photon = Photon::Prepared(pol);
                    let outcome = measure_prepared(&mut photon, basis, &mut receiver_rng);
                    bits.push(outcome.bit);
                    // B92 exclusion rule: outcome 90 deg excludes the
                    // 45-deg state (sender bit 1); 135 deg excludes the
                    // 0-deg state (sender bit 0); all else inconclusive
                    conclusive.push(outcome.bit);
                }
                None => {
                    mask.push(false);
                    bits.push(false);
                    conclusive.push(false);
                }
            }
        }
    }

    let sifted: Vec<bool>;
    let kept: Vec<u32>;
    match cfg.protocol {
        Protocol::Bb84 | Protocol::E91 => {
            transport.send(&ClassicalMessage::BasisReveal {
                bases: bases.clone(),
                received_mask: mask.clone(),
            })?;
            kept = match transport.recv()? {
                ClassicalMessage::SiftIndices(idx) => idx,
                _ => return Err(SessionError::ProtocolViolation("expected sift indices")),
            };
            check_indices(&kept, n, "sift indices")?;
            if kept.iter().any(|&i| !mask[i as usize]) {
                return Err(SessionError::ProtocolViolation("sift kept a lost pulse"));
            }
            sifted = kept.iter().map(|&i| bits[i as usize]).collect();
        }
        Protocol::B92 => {
            kept = (0..n as u32).filter(|&i| conclusive[i as usize]).collect();
            transport.send(&ClassicalMessage::SiftIndices(kept.clone()))?;
            // conclusive outcome 90 deg (rectilinear) decodes to 1,
            // 135 deg (diagonal) decodes to 0
            sifted = kept.iter().map(|&i| bases[i as usize] == Basis::Rectilinear).collect();
        }
    }

    // sacrifice a random sample for QBER estimation
    let m = (cfg.sample_fraction * sifted.len() as f64).floor() as usize;
    let mut sample_idx: Vec<u32> = permutation(&mut receiver_rng, sifted.len())
        .into_iter()
        .take(m)
        .map(|i| i as u32)
        .collect();
    sample_idx.sort_unstable();
    transport.send(&ClassicalMessage::SampleRequest(sample_idx.clone()))?;
    let mine: Vec<bool> = sample_idx.iter().map(|&i| sifted[i as usize]).collect();
    transport.send(&ClassicalMessage::SampleDisclosure(mine.clone()))?;
    let theirs = match transport.recv()? {
        ClassicalMessage::SampleDisclosure(bits) => bits,
        _ => return Err(SessionError::ProtocolViolation("expected sample disclosure")),
    };
    if theirs.len() != sample_idx.len() {
        return Err(SessionError::LengthMismatch("sample disclosure"));
    }
    let mismatches = mine.iter().zip(&theirs).filter(|(a, b)| a != b).count();
    transport.send(&ClassicalMessage::QberReport {
        mismatches: mismatches as u32,
        sample_size: sample_idx.len() as u32,
    })?;
    let qber = if sample_idx.is_empty() {
        0.0
    } else {
        mismatches as f64 / sample_idx.len() as f64
    };

    let mut outcome = SessionOutcome {
        role: Role::Receiver,
        status: SessionStatus::Completed,
        pulses_sent: cfg.n_pulses,
        pulses_received: mask.iter().filter(|&&a| a).count() as u32,
        sifted_len: sifted.len(),
        sifted_key: sifted.clone(),
        sampled: sample_idx.len(),
        qber,
        reconciled_len: 0,
        leaked_bits: 0,
        eve_l_bound: 0,
        final_key: Vec::new(),
        eve_knowledge: None,
        transcript: Transcript::default(),
    };

    if qber > cfg.qber_abort_threshold {
        transport.send(&ClassicalMessage::Abort(AbortReason::QberExceeded))?;
        outcome.status = SessionStatus::Aborted(AbortReason::QberExceeded);
        outcome.transcript = transport.transcript().clone();
        return Ok(outcome);
    }

    let mut key = remove_indices(&sifted, &sample_idx);
    let schedule = BlockSchedule::for_qber(qber, key.len());
    let mut public_rng = stream(cfg.seed, StreamId::Public);
    let leaked = reconcile_receiver(&mut key, &schedule, transport, &mut public_rng)?;
    let l_bound = estimate_eve_knowledge(qber, &cfg.source, key.len());
    let out_len = pa_out_len(key.len(), leaked, l_bound, cfg.security_param as usize);
    let seed_len = (key.len() + out_len).saturating_sub(1);
    let seed_bits: Vec<bool> = (0..seed_len).map(|_| random_bit(&mut receiver_rng)).collect();
    transport.send(&ClassicalMessage::PaParams {
        out_len: out_len as u32,
        security_param: cfg.security_param,
        seed_bits: seed_bits.clone(),
    })?;
    outcome.final_key = privacy_amplify(&key, &seed_bits, out_len)?;
    outcome.reconciled_len = key.len();
    outcome.leaked_bits = leaked;
    outcome.eve_l_bound = l_bound;
    outcome.transcript = transport.transcript().clone();
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sift_keeps_matching_arrived_positions() {
        use Basis::{Diagonal as D, Rectilinear as R};
        let r = sift(&[R, D, R, D], &[R, R, R, D], &[true; 4], &[true, false, true, false]).unwrap();
        assert_eq!(r.kept_indices, vec![0, 2, 3]);
        assert_eq!(r.sifted_key, vec![true, true, false]);
    }

    #[test]
    fn sift_with_nothing_arrived_keeps_nothing() {
        use Basis::Rectilinear as R;
        let r = sift(&[R, R], &[R, R], &[false, false], &[true, true]).unwrap();
        assert!(r.kept_indices.is_empty());
    }

    #[test]
    fn sift_arrival_filter() {
        use Basis::Rectilinear as R;
        let r = sift(
            &[R, R, R, R],
            &[R, R, R, R],
            &[true, false, true, false],
            &[true, true, false, false],
        )
        .unwrap();
        assert_eq!(r.kept_indices, vec![0, 2]);
    }

    #[test]
    fn sift_length_mismatch_rejected() {
        use Basis::Rectilinear as R;
        assert!(matches!(
            sift(&[R], &[R, R], &[true], &[true]),
            Err(SessionError::LengthMismatch(_))
        ));
    }

    #[test]
    fn qber_is_the_mismatch_ratio() {
        let a = vec![true; 100];
        let mut b = vec![true; 100];
        for i in 0..25 {
            b[i * 4] = false;
        }
        let idx: Vec<u32> = (0..100).collect();
        let r = estimate_qber(&a, &b, &idx).unwrap();
        assert_eq!(r.mismatches, 25);
        assert!((r.qber - 0.25).abs() < 1e-12);

        assert_eq!(estimate_qber(&a, &a, &idx).unwrap().qber, 0.0);
        let flipped: Vec<bool> = a.iter().map(|b| !b).collect();
        let ten: Vec<u32> = (0..10).collect();
        assert_eq!(estimate_qber(&a, &flipped, &ten).unwrap().qber, 1.0);
    }

    #[test]
    fn qber_index_out_of_range_rejected() {
        assert!(matches!(
            estimate_qber(&[true], &[true], &[5]),
            Err(SessionError::IndexOutOfRange(_))
        ));
    }

    #[test]
    fn config_validation_catches_bad_knobs() {
        let mut cfg = SessionConfig::new(Protocol::Bb84, 1000, 1);
        cfg.validate().unwrap();
        cfg.noise = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = SessionConfig::new(Protocol::Bb84, 20, 1);
        cfg.sample_fraction = 0.9;
        assert!(cfg.validate().is_err(), "sample must leave at least 8 key bits");
        let mut cfg = SessionConfig::new(Protocol::Bb84, 0, 1);
        cfg.n_pulses = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn remove_indices_drops_exactly_the_sample() {
        let bits = vec![true, false, true, true, false];
        assert_eq!(remove_indices(&bits, &[1, 3]), vec![true, true, false]);
        assert_eq!(remove_indices(&bits, &[]), bits);
    }
}
