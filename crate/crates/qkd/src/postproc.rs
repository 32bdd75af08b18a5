//! Error reconciliation and privacy amplification.
//!
//! Reconciliation is a permuted parity-block protocol: per round, both
//! parties permute the key with a shared public permutation and split it
//! into blocks; the sender discloses block parities and the receiver
//! bisects each mismatched block down to one bit and flips it. Every
//! disclosed parity bit is counted as leaked. A whole-key parity plus a
//! public CRC-32 close the protocol; those 33 bits are counted as leaked
//! too.
//!
//! Privacy amplification multiplies the reconciled key by a Toeplitz
//! matrix over GF(2), with the seed drawn by the receiver and sent
//! publicly.

use rand::RngCore;
use thiserror::Error;

use crate::bits::{crc32, pack_bits, parity};
use crate::channel::SourceModel;
use crate::rngs::permutation;
use crate::transport::{Transport, TransportError};
use crate::wire::{ClassicalMessage, ReconMessage};

#[derive(Debug, Error)]
pub enum ReconError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("unexpected message during reconciliation: expected {0}")]
    Unexpected(&'static str),
    #[error("reconciliation verification failed: keys still differ")]
    Verification,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PaError {
    #[error("toeplitz seed has length {got}, needs {need}")]
    SeedLength { need: usize, got: usize },
}

/// Pipeline stage a piece of key material is at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyStage {
    Raw,
    Sifted,
    Reconciled,
    Final,
}

/// Key bits at one pipeline stage, with leak accounting. `leaked_bits`
/// and `eve_known_bound` only grow along the pipeline.
#[derive(Debug, Clone)]
pub struct KeyMaterial {
    pub stage: KeyStage,
    pub bits: Vec<bool>,
    pub leaked_bits: usize,
    pub eve_known_bound: usize,
}

impl KeyMaterial {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Block sizes per reconciliation round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSchedule {
    pub sizes: Vec<usize>,
}

impl BlockSchedule {
    /// Default five-round schedule: the initial block size targets about
    /// 0.73 errors per block at the measured QBER, then halves, restores,
    /// doubles and quadruples.
    pub fn for_qber(qber: f64, key_len: usize) -> BlockSchedule {
        let q = qber.max(0.01);
        let k1 = ((0.73 / q).ceil() as usize).clamp(4, key_len.max(4));
        BlockSchedule { sizes: vec![k1, (k1 / 2).max(2), k1, 2 * k1, 4 * k1] }
    }
}

fn parity_at(key: &[bool], perm: &[usize], start: usize, len: usize) -> bool {
    perm[start..start + len].iter().fold(false, |acc, &i| acc ^ key[i])
}

fn key_crc(key: &[bool]) -> u32 {
    crc32(&pack_bits(key))
}

fn recv_recon(transport: &mut dyn Transport, what: &'static str) -> Result<ReconMessage, ReconError> {
    match transport.recv()? {
        ClassicalMessage::Recon(m) => Ok(m),
        _ => Err(ReconError::Unexpected(what)),
    }
}

/// Sender side: discloses parities on request; the key is the reference
/// the receiver corrects toward. Returns the number of leaked bits.
pub fn reconcile_sender(
    key: &[bool],
    schedule: &BlockSchedule,
    transport: &mut dyn Transport,
    public_rng: &mut impl RngCore,
) -> Result<usize, ReconError> {
    let n = key.len();
    let mut leaked = 0usize;
    for &size in &schedule.sizes {
        let perm = permutation(public_rng, n);
        let size = size.min(n.max(1));
        let parities: Vec<bool> = (0..n)
            .step_by(size.max(1))
            .map(|start| parity_at(key, &perm, start, size.min(n - start)))
            .collect();
        leaked += parities.len();
        transport.send(&ClassicalMessage::Recon(ReconMessage::BlockParities(parities)))?;
        // answer bisection queries until the receiver closes the round
        loop {
            match recv_recon(transport, "parity request")? {
                ReconMessage::ParityRequest(ranges) if ranges.is_empty() => break,
                ReconMessage::ParityRequest(ranges) => {
                    let bits: Vec<bool> = ranges
                        .chunks_exact(2)
                        .map(|r| parity_at(key, &perm, r[0] as usize, r[1] as usize))
                        .collect();
                    leaked += bits.len();
                    transport.send(&ClassicalMessage::Recon(ReconMessage::ParityResponse(bits)))?;
                }
                _ => return Err(ReconError::Unexpected("parity request")),
            }
        }
    }
    transport.send(&ClassicalMessage::Recon(ReconMessage::KeyCheck {
        parity: parity(key),
        crc: key_crc(key),
    }))?;
    leaked += 33;
    match recv_recon(transport, "key check result")? {
        ReconMessage::KeyCheckResult { ok: true } => Ok(leaked),
        ReconMessage::KeyCheckResult { ok: false } => Err(ReconError::Verification),
        _ => Err(ReconError::Unexpected("key check result")),
    }
}

/// Receiver side: corrects `key` in place toward the sender's key.
/// Returns the number of leaked bits (same count the sender arrives at).
pub fn reconcile_receiver(
    key: &mut [bool],
    schedule: &BlockSchedule,
    transport: &mut dyn Transport,
    public_rng: &mut impl RngCore,
) -> Result<usize, ReconError> {
    let n = key.len();
    let mut leaked = 0usize;
    for &size in &schedule.sizes {
        let perm = permutation(public_rng, n);
        let size = size.min(n.max(1));
        let their_parities = match recv_recon(transport, "block parities")? {
            ReconMessage::BlockParities(bits) => bits,
            _ => return Err(ReconError::Unexpected("block parities")),
        };
        leaked += their_parities.len();
        // (start, len) of blocks whose parity disagrees
        let mut active: Vec<(usize, usize)> = (0..n)
            .step_by(size.max(1))
            .zip(their_parities.iter())
            .filter_map(|(start, &theirs)| {
                let len = size.min(n - start);
                (parity_at(key, &perm, start, len) != theirs).then_some((start, len))
            })
            .collect();
        while !active.is_empty() {
            // flip blocks narrowed to a single bit
            active.retain(|&(start, len)| {
                if len == 1 {
                    key[perm[start]] = !key[perm[start]];
                    false
                } else {
                    true
                }
            });
            if active.is_empty() {
                break;
            }
            let ranges: Vec<u32> = active
                .iter()
                .flat_map(|&(start, len)| [start as u32, (len / 2) as u32])
                .collect();
            transport.send(&ClassicalMessage::Recon(ReconMessage::ParityRequest(ranges)))?;
            let bits = match recv_recon(transport, "parity response")? {
                ReconMessage::ParityResponse(bits) => bits,
                _ => return Err(ReconError::Unexpected("parity response")),
            };
            if bits.len() != active.len() {
                return Err(ReconError::Unexpected("parity response length"));
            }
            leaked += bits.len();
            for (block, theirs) in active.iter_mut().zip(bits) {
                let (start, len) = *block;
                let half = len / 2;
                *block = if parity_at(key, &perm, start, half) != theirs {
                    (start, half)
                } else {
                    (start + half, len - half)
                };
            }
        }
        transport.send(&ClassicalMessage::Recon(ReconMessage::ParityRequest(vec![])))?;
    }
    let (their_parity, their_crc) = match recv_recon(transport, "key check")? {
        ReconMessage::KeyCheck { parity, crc } => (parity, crc),
        _ => return Err(ReconError::Unexpected("key check")),
    };
    leaked += 33;
    let ok = parity(key) == their_parity && key_crc(key) == their_crc;
    transport.send(&ClassicalMessage::Recon(ReconMessage::KeyCheckResult { ok }))?;
    if ok {
        Ok(leaked)
    } else {
        Err(ReconError::Verification)
    }
}

/// Toeplitz hash over GF(2): `out[i] = XOR_j seed[i - j + p - 1] & key[j]`
/// where p = key length. The seed must have p + out_len - 1 bits.
pub fn privacy_amplify(key: &[bool], seed: &[bool], out_len: usize) -> Result<Vec<bool>, PaError> {
    let p = key.len();
    let need = (p + out_len).saturating_sub(1);
    if seed.len() != need {
        return Err(PaError::SeedLength { need, got: seed.len() });
    }
    if out_len == 0 {
        return Ok(Vec::new());
    }
    if p == 0 {
        return Ok(vec![false; out_len]);
    }
    // Row i of the matrix is seed[i+p-1], seed[i+p-2], ..., seed[i]; in
    // the index-reversed seed that is a contiguous window of length p
    // starting at out_len - 1 - i. Pack both operands into u64 words and
    // use xor-accumulate + popcount parity per row.
    let key_words = pack_words(key);
    let rev: Vec<bool> = seed.iter().rev().copied().collect();
    let rev_words = pack_words(&rev);
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        out.push(dot_window(&key_words, &rev_words, out_len - 1 - i));
    }
    Ok(out)
}

fn pack_words(bits: &[bool]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

/// Parity of `key & window` where window is `other` shifted right by
/// `offset` bits.
fn dot_window(key_words: &[u64], other: &[u64], offset: usize) -> bool {
    let word_off = offset / 64;
    let bit_off = offset % 64;
    let mut acc = 0u64;
    for (w, &kw) in key_words.iter().enumerate() {
        let mut seg = other.get(word_off + w).copied().unwrap_or(0) >> bit_off;
        if bit_off != 0 {
            seg |= other.get(word_off + w + 1).copied().unwrap_or(0) << (64 - bit_off);
        }
        acc ^= seg & kw;
    }
    acc.count_ones() % 2 == 1
}

/// Final key length after privacy amplification.
pub fn pa_out_len(p: usize, leaked_bits: usize, eve_known: usize, security_param: usize) -> usize {
    p.saturating_sub(leaked_bits + eve_known + security_param)
}

/// Conservative bound on the number of sifted-key bits Eve may know.
///
/// Each observed error is charged as 2 bits of Eve knowledge (an
/// intercepted position errs with probability 1/4, and Eve's bit is
/// correct at about half of the intercepted positions, so per observed
/// error about 4 positions were intercepted of which she knows ~2).
/// Multi-photon pulses are charged in full as beam-splittable.
pub fn estimate_eve_knowledge(qber: f64, source: &SourceModel, sifted_len: usize) -> usize {
    let intercept = (sifted_len as f64 * (4.0 * qber * 2.0).min(1.0)).ceil() as usize;
    let beam_split = match source {
        SourceModel::SinglePhoton => 0,
        SourceModel::Poisson(mu) => {
            let p0 = (-mu).exp();
            let p1 = mu * p0;
            let nonempty = 1.0 - p0;
            if nonempty <= 0.0 {
                0
            } else {
                let multi_given_arrival = (1.0 - p0 - p1) / nonempty;
                (sifted_len as f64 * multi_given_arrival).ceil() as usize
            }
        }
    };
    (intercept + beam_split).min(sifted_len)
}
