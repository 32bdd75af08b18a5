//! Bit-string helpers shared by the wire codec, post-processing and the
//! one-time pad. One packing convention repo-wide: most-significant-bit
//! first within each byte.

/// Packs bits MSB-first into bytes; the last byte is zero-padded.
pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 0x80 >> (i % 8);
        }
    }
    out
}

/// Unpacks `n` bits from MSB-first packed bytes.
pub fn unpack_bits(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect()
}

/// XOR parity of a bit slice.
pub fn parity(bits: &[bool]) -> bool {
    bits.iter().fold(false, |acc, &b| acc ^ b)
}

/// CRC-32 (IEEE polynomial, reflected) over a byte slice.
///
/// Used as the public reconciliation checksum: at the key sizes this
/// simulator works with, CRC-32 detects every residual difference of
/// three bits or fewer.
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &byte in bytes {
        crc ^= byte as u32;
        for _ in 0..8 {
            let mask = (crc & 1).wrapping_neg();
            crc = (crc >> 1) ^ (0xEDB8_8320 & mask);
        }
    }
    !crc
}

/// 64-bit FNV-1a over packed key bits. Non-cryptographic fingerprint used
/// only to compare final keys across processes in reports.
pub fn fingerprint(bits: &[bool]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for byte in pack_bits(bits) {
        h ^= byte as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}
