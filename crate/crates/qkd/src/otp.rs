//! Vernam-cipher messaging from distilled key material.
//!
//! A `KeyLedger` owns final key bits and enforces strict consumption
//! accounting: each bit is used at most once, and the consumed offset
//! only moves forward. Key bits are consumed most-significant-first
//! within each byte, matching the channel packing rule.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OtpError {
    #[error("key exhausted: need {needed} bits, {available} remain (run another session)")]
    KeyExhausted { needed: usize, available: usize },
    #[error("key offset desync: ledger at {expected}, ciphertext claims {got}")]
    OffsetDesync { expected: usize, got: usize },
}

/// Final key bits plus the consumption watermark.
#[derive(Debug, Clone)]
pub struct KeyLedger {
    final_key: Vec<bool>,
    consumed_upto: usize,
}

impl KeyLedger {
    pub fn new(final_key: Vec<bool>) -> KeyLedger {
        KeyLedger { final_key, consumed_upto: 0 }
    }

    pub fn consumed_upto(&self) -> usize {
        self.consumed_upto
    }

    pub fn remaining_bits(&self) -> usize {
        self.final_key.len() - self.consumed_upto
    }

    /// XORs `plaintext` with the next key bits. Returns the ciphertext
    /// and the key offset it starts at (carried in the wire message so
    /// desync is detectable, not silent).
    pub fn encrypt(&mut self, plaintext: &[u8]) -> Result<(u32, Vec<u8>), OtpError> {
        let offset = self.consumed_upto;
        let ciphertext = self.xor_consume(plaintext)?;
        Ok((offset as u32, ciphertext))
    }

    /// Inverse of `encrypt`; `offset` must equal this ledger's watermark
    /// or the peers have desynchronized.
    pub fn decrypt(&mut self, offset: u32, ciphertext: &[u8]) -> Result<Vec<u8>, OtpError> {
        if offset as usize != self.consumed_upto {
            return Err(OtpError::OffsetDesync {
                expected: self.consumed_upto,
                got: offset as usize,
            });
        }
        self.xor_consume(ciphertext)
    }

    fn xor_consume(&mut self, data: &[u8]) -> Result<Vec<u8>, OtpError> {
        let needed = data.len() * 8;
        if needed > self.remaining_bits() {
            return Err(OtpError::KeyExhausted { needed, available: self.remaining_bits() });
        }
        let out = data
            .iter()
            .enumerate()
            .map(|(i, &byte)| {
                let mut pad = 0u8;
                for b in 0..8 {
                    pad |= (self.final_key[self.consumed_upto + i * 8 + b] as u8) << (7 - b);
                }
                byte ^ pad
            })
            .collect();
        self.consumed_upto += needed;
        Ok(out)
    }
}
