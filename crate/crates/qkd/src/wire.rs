//! Bit-exact wire format for the public classical channel.
//!
//! Frame layout: 4-byte big-endian payload length, 1-byte message tag,
//! then the payload. Bit strings are packed MSB-first and prefixed with a
//! 4-byte big-endian bit count; index lists are a 4-byte count followed
//! by 4-byte big-endian indices.
//!
//! Reconciliation traffic rides inside `SiftIndices`-tagged frames and is
//! distinguished by a leading 1-byte sub-type, so the tag space of the
//! base protocol stays fixed.

use std::io::{Read, Write};

use thiserror::Error;

use crate::bits::{pack_bits, unpack_bits};
use crate::quantum::{Basis, Polarization};

pub const TAG_PROTOCOL_HELLO: u8 = 0x01;
pub const TAG_BASIS_REVEAL: u8 = 0x02;
pub const TAG_SIFT_INDICES: u8 = 0x03;
pub const TAG_SAMPLE_REQUEST: u8 = 0x04;
pub const TAG_SAMPLE_DISCLOSURE: u8 = 0x05;
pub const TAG_QBER_REPORT: u8 = 0x06;
pub const TAG_ABORT: u8 = 0x07;
pub const TAG_PA_PARAMS: u8 = 0x08;
pub const TAG_CIPHERTEXT: u8 = 0x09;
/// Simulation artifact: photon records crossing the process boundary in
/// two-process mode. A real quantum channel cannot be serialized; the
/// simulator's trust boundary is the process pair.
pub const TAG_PULSE_BATCH: u8 = 0x0A;

const SUB_SIFT_INDICES: u8 = 0x00;
const SUB_BLOCK_PARITIES: u8 = 0x01;
const SUB_PARITY_REQUEST: u8 = 0x02;
const SUB_PARITY_RESPONSE: u8 = 0x03;
const SUB_KEY_CHECK: u8 = 0x04;
const SUB_KEY_CHECK_RESULT: u8 = 0x05;

/// Hard cap on a declared payload length; anything larger is rejected
/// before allocation.
pub const MAX_PAYLOAD: u32 = 1 << 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("frame truncated")]
    Truncated,
    #[error("payload has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("unknown message tag 0x{0:02x}")]
    UnknownTag(u8),
    #[error("unknown reconciliation sub-type 0x{0:02x}")]
    UnknownSubtype(u8),
    #[error("declared payload length {0} exceeds limit")]
    PayloadTooLarge(u32),
    #[error("declared count {0} exceeds remaining payload")]
    CountTooLarge(u32),
    #[error("invalid value for {0}")]
    BadValue(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolId {
    Bb84 = 0x01,
    B92 = 0x02,
    E91 = 0x03,
}

impl ProtocolId {
    pub fn from_byte(b: u8) -> Option<ProtocolId> {
        match b {
            0x01 => Some(ProtocolId::Bb84),
            0x02 => Some(ProtocolId::B92),
            0x03 => Some(ProtocolId::E91),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    QberExceeded = 0x01,
    PeerError = 0x02,
    User = 0x03,
}

impl AbortReason {
    pub fn from_byte(b: u8) -> Option<AbortReason> {
        match b {
            0x01 => Some(AbortReason::QberExceeded),
            0x02 => Some(AbortReason::PeerError),
            0x03 => Some(AbortReason::User),
            _ => None,
        }
    }
}

/// One pulse as it crosses the simulated quantum channel in two-process
/// mode: sequence number plus the definite polarization of each photon
/// that survived the channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseRecord {
    pub seq: u32,
    pub photons: Vec<Polarization>,
}

/// Interactive reconciliation traffic (see module docs for framing).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReconMessage {
    /// Sender's top-level block parities for the current round.
    BlockParities(Vec<bool>),
    /// Receiver asks for parities of (start, len) ranges in permuted
    /// coordinates; flattened pairs.
    ParityRequest(Vec<u32>),
    ParityResponse(Vec<bool>),
    /// Whole-key parity plus CRC-32 of the sender's reconciled key.
    KeyCheck { parity: bool, crc: u32 },
    KeyCheckResult { ok: bool },
}

/// Everything the public discussion protocol can say. Delivered in
/// order, unmodified, and readable by the eavesdropper.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassicalMessage {
    ProtocolHello { protocol: ProtocolId, n_pulses: u32 },
    /// Receiver's measurement bases plus the arrival mask (one bit per
    /// pulse, 1 = at least one photon arrived).
    BasisReveal { bases: Vec<Basis>, received_mask: Vec<bool> },
    SiftIndices(Vec<u32>),
    Recon(ReconMessage),
    SampleRequest(Vec<u32>),
    SampleDisclosure(Vec<bool>),
    QberReport { mismatches: u32, sample_size: u32 },
    Abort(AbortReason),
    PaParams { out_len: u32, security_param: u32, seed_bits: Vec<bool> },
    Ciphertext { key_offset: u32, bytes: Vec<u8> },
    PulseBatch(Vec<PulseRecord>),
}

impl ClassicalMessage {
    pub fn tag(&self) -> u8 {
        match self {
            ClassicalMessage::ProtocolHello { .. } => TAG_PROTOCOL_HELLO,
            ClassicalMessage::BasisReveal { .. } => TAG_BASIS_REVEAL,
            ClassicalMessage::SiftIndices(_) | ClassicalMessage::Recon(_) => TAG_SIFT_INDICES,
            ClassicalMessage::SampleRequest(_) => TAG_SAMPLE_REQUEST,
            ClassicalMessage::SampleDisclosure(_) => TAG_SAMPLE_DISCLOSURE,
            ClassicalMessage::QberReport { .. } => TAG_QBER_REPORT,
            ClassicalMessage::Abort(_) => TAG_ABORT,
            ClassicalMessage::PaParams { .. } => TAG_PA_PARAMS,
            ClassicalMessage::Ciphertext { .. } => TAG_CIPHERTEXT,
            ClassicalMessage::PulseBatch(_) => TAG_PULSE_BATCH,
        }
    }

    /// Encodes the complete frame (length prefix, tag, payload).
    pub fn encode_frame(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        self.encode_payload(&mut payload);
        let mut frame = Vec::with_capacity(payload.len() + 5);
        frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        frame.push(self.tag());
        frame.extend_from_slice(&payload);
        frame
    }

    fn encode_payload(&self, out: &mut Vec<u8>) {
        match self {
            ClassicalMessage::ProtocolHello { protocol, n_pulses } => {
                out.push(*protocol as u8);
                out.extend_from_slice(&n_pulses.to_be_bytes());
            }
            ClassicalMessage::BasisReveal { bases, received_mask } => {
                let base_bits: Vec<bool> =
                    bases.iter().map(|b| *b == Basis::Diagonal).collect();
                put_bitstring(out, &base_bits);
                put_bitstring(out, received_mask);
            }
            ClassicalMessage::SiftIndices(idx) => {
                out.push(SUB_SIFT_INDICES);
                put_index_list(out, idx);
            }
            ClassicalMessage::Recon(m) => match m {
                ReconMessage::BlockParities(bits) => {
                    out.push(SUB_BLOCK_PARITIES);
                    put_bitstring(out, bits);
                }
                ReconMessage::ParityRequest(ranges) => {
                    out.push(SUB_PARITY_REQUEST);
                    put_index_list(out, ranges);
                }
                ReconMessage::ParityResponse(bits) => {
                    out.push(SUB_PARITY_RESPONSE);
                    put_bitstring(out, bits);
                }
                ReconMessage::KeyCheck { parity, crc } => {
                    out.push(SUB_KEY_CHECK);
                    out.push(*parity as u8);
                    out.extend_from_slice(&crc.to_be_bytes());
                }
                ReconMessage::KeyCheckResult { ok } => {
                    out.push(SUB_KEY_CHECK_RESULT);
                    out.push(*ok as u8);
                }
            },
            ClassicalMessage::SampleRequest(idx) => put_index_list(out, idx),
            ClassicalMessage::SampleDisclosure(bits) => put_bitstring(out, bits),
            ClassicalMessage::QberReport { mismatches, sample_size } => {
                out.extend_from_slice(&mismatches.to_be_bytes());
                out.extend_from_slice(&sample_size.to_be_bytes());
            }
            ClassicalMessage::Abort(reason) => out.push(*reason as u8),
            ClassicalMessage::PaParams { out_len, security_param, seed_bits } => {
                out.extend_from_slice(&out_len.to_be_bytes());
                out.extend_from_slice(&security_param.to_be_bytes());
                put_bitstring(out, seed_bits);
            }
            ClassicalMessage::Ciphertext { key_offset, bytes } => {
                out.extend_from_slice(&key_offset.to_be_bytes());
                out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
                out.extend_from_slice(bytes);
            }
            ClassicalMessage::PulseBatch(records) => {
                out.extend_from_slice(&(records.len() as u32).to_be_bytes());
                for rec in records {
                    out.extend_from_slice(&rec.seq.to_be_bytes());
                    out.push(rec.photons.len() as u8);
                    for p in &rec.photons {
                        out.push(p.code());
                    }
                }
            }
        }
    }

    /// Decodes one frame from the start of `buf`, returning the message
    /// and the number of bytes consumed.
    pub fn decode_frame(buf: &[u8]) -> Result<(ClassicalMessage, usize), CodecError> {
        if buf.len() < 5 {
            return Err(CodecError::Truncated);
        }
        let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]);
        if len > MAX_PAYLOAD {
            return Err(CodecError::PayloadTooLarge(len));
        }
        let tag = buf[4];
        let end = 5usize
            .checked_add(len as usize)
            .ok_or(CodecError::PayloadTooLarge(len))?;
        if buf.len() < end {
            return Err(CodecError::Truncated);
        }
        let msg = Self::decode_payload(tag, &buf[5..end])?;
        Ok((msg, end))
    }

    fn decode_payload(tag: u8, payload: &[u8]) -> Result<ClassicalMessage, CodecError> {
        let mut r = Reader::new(payload);
        let msg = match tag {
            TAG_PROTOCOL_HELLO => {
                let protocol = ProtocolId::from_byte(r.u8()?)
                    .ok_or(CodecError::BadValue("protocol id"))?;
                let n_pulses = r.u32()?;
                ClassicalMessage::ProtocolHello { protocol, n_pulses }
            }
            TAG_BASIS_REVEAL => {
                let base_bits = r.bitstring()?;
                let received_mask = r.bitstring()?;
                let bases = base_bits
                    .into_iter()
                    .map(|b| if b { Basis::Diagonal } else { Basis::Rectilinear })
                    .collect();
                ClassicalMessage::BasisReveal { bases, received_mask }
            }
            TAG_SIFT_INDICES => match r.u8()? {
                SUB_SIFT_INDICES => ClassicalMessage::SiftIndices(r.index_list()?),
                SUB_BLOCK_PARITIES => {
                    ClassicalMessage::Recon(ReconMessage::BlockParities(r.bitstring()?))
                }
                SUB_PARITY_REQUEST => {
                    let ranges = r.index_list()?;
                    if ranges.len() % 2 != 0 {
                        return Err(CodecError::BadValue("parity request range pairs"));
                    }
                    ClassicalMessage::Recon(ReconMessage::ParityRequest(ranges))
                }
                SUB_PARITY_RESPONSE => {
                    ClassicalMessage::Recon(ReconMessage::ParityResponse(r.bitstring()?))
                }
                SUB_KEY_CHECK => {
                    let parity = match r.u8()? {
                        0 => false,
                        1 => true,
                        _ => return Err(CodecError::BadValue("key check parity")),
                    };
                    let crc = r.u32()?;
                    ClassicalMessage::Recon(ReconMessage::KeyCheck { parity, crc })
                }
                SUB_KEY_CHECK_RESULT => {
                    let ok = match r.u8()? {
                        0 => false,
                        1 => true,
                        _ => return Err(CodecError::BadValue("key check result")),
                    };
                    ClassicalMessage::Recon(ReconMessage::KeyCheckResult { ok })
                }
                other => return Err(CodecError::UnknownSubtype(other)),
            },
            TAG_SAMPLE_REQUEST => ClassicalMessage::SampleRequest(r.index_list()?),
            TAG_SAMPLE_DISCLOSURE => ClassicalMessage::SampleDisclosure(r.bitstring()?),
            TAG_QBER_REPORT => {
                let mismatches = r.u32()?;
                let sample_size = r.u32()?;
                if mismatches > sample_size {
                    return Err(CodecError::BadValue("qber mismatch count"));
                }
                ClassicalMessage::QberReport { mismatches, sample_size }
            }
            TAG_ABORT => {
                let reason =
                    AbortReason::from_byte(r.u8()?).ok_or(CodecError::BadValue("abort reason"))?;
                ClassicalMessage::Abort(reason)
            }
            TAG_PA_PARAMS => {
                let out_len = r.u32()?;
                let security_param = r.u32()?;
                let seed_bits = r.bitstring()?;
                ClassicalMessage::PaParams { out_len, security_param, seed_bits }
            }
            TAG_CIPHERTEXT => {
                let key_offset = r.u32()?;
                let len = r.u32()?;
                let bytes = r.bytes(len)?.to_vec();
                ClassicalMessage::Ciphertext { key_offset, bytes }
            }
            TAG_PULSE_BATCH => {
                let count = r.u32()?;
                // each record is at least 5 bytes
                if count as usize > r.remaining() / 5 {
                    return Err(CodecError::CountTooLarge(count));
                }
                let mut records = Vec::with_capacity(count as usize);
                for _ in 0..count {
                    let seq = r.u32()?;
                    let n_photons = r.u8()?;
                    let mut photons = Vec::with_capacity(n_photons as usize);
                    for _ in 0..n_photons {
                        photons.push(
                            Polarization::from_code(r.u8()?)
                                .ok_or(CodecError::BadValue("polarization code"))?,
                        );
                    }
                    records.push(PulseRecord { seq, photons });
                }
                ClassicalMessage::PulseBatch(records)
            }
            other => return Err(CodecError::UnknownTag(other)),
        };
        if r.remaining() != 0 {
            return Err(CodecError::TrailingBytes(r.remaining()));
        }
        Ok(msg)
    }

    /// Reads one frame from a blocking stream. Returns `Ok(None)` on a
    /// clean end-of-stream at a frame boundary.
    pub fn read_frame(reader: &mut impl Read) -> std::io::Result<Option<ClassicalMessage>> {
        let mut header = [0u8; 5];
        let mut filled = 0usize;
        while filled < header.len() {
            let n = reader.read(&mut header[filled..])?;
            if n == 0 {
                if filled == 0 {
                    return Ok(None);
                }
                return Err(codec_io(CodecError::Truncated));
            }
            filled += n;
        }
        let len = u32::from_be_bytes([header[0], header[1], header[2], header[3]]);
        if len > MAX_PAYLOAD {
            return Err(codec_io(CodecError::PayloadTooLarge(len)));
        }
        let mut frame = vec![0u8; 5 + len as usize];
        frame[..5].copy_from_slice(&header);
        reader
            .read_exact(&mut frame[5..])
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => codec_io(CodecError::Truncated),
                _ => e,
            })?;
        let (msg, _) = Self::decode_frame(&frame).map_err(codec_io)?;
        Ok(Some(msg))
    }

    pub fn write_frame(&self, writer: &mut impl Write) -> std::io::Result<()> {
        writer.write_all(&self.encode_frame())
    }
}

fn codec_io(err: CodecError) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, err.to_string())
}

fn put_bitstring(out: &mut Vec<u8>, bits: &[bool]) {
    out.extend_from_slice(&(bits.len() as u32).to_be_bytes());
    out.extend_from_slice(&pack_bits(bits));
}

fn put_index_list(out: &mut Vec<u8>, idx: &[u32]) {
    out.extend_from_slice(&(idx.len() as u32).to_be_bytes());
    for i in idx {
        out.extend_from_slice(&i.to_be_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    fn remaining(&self) -> usize {
        self.buf.len()
    }

    fn bytes(&mut self, n: u32) -> Result<&'a [u8], CodecError> {
        if n as usize > self.buf.len() {
            return Err(CodecError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n as usize);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.bytes(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        let b = self.bytes(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn bitstring(&mut self) -> Result<Vec<bool>, CodecError> {
        let n = self.u32()?;
        let n_bytes = (n as usize).div_ceil(8);
        if n_bytes > self.buf.len() {
            return Err(CodecError::CountTooLarge(n));
        }
        let packed = self.bytes(n_bytes as u32)?;
        // canonical form: unused bits in the final byte must be zero
        if n % 8 != 0 {
            let last = packed[n_bytes - 1];
            if last & (0xFF >> (n % 8)) != 0 {
                return Err(CodecError::BadValue("bitstring padding"));
            }
        }
        Ok(unpack_bits(packed, n as usize))
    }

    fn index_list(&mut self) -> Result<Vec<u32>, CodecError> {
        let n = self.u32()?;
        if n as usize > self.buf.len() / 4 {
            return Err(CodecError::CountTooLarge(n));
        }
        (0..n).map(|_| self.u32()).collect()
    }
}
