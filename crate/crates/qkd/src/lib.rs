//! Desk-scale simulator of quantum key distribution.
//!
//! Two party state machines (sender and receiver) run BB84, B92 or a
//! simplified E91 over a simulated quantum channel and an authenticated
//! classical channel. The pipeline covers the whole key lifecycle:
//! preparation and probabilistic measurement of polarized photons,
//! pluggable eavesdropper attacks at the channel tap point, sifting,
//! QBER-based intrusion detection, parity-block error reconciliation,
//! Toeplitz privacy amplification, and Vernam-cipher messaging from the
//! distilled key.
//!
//! Everything is driven by explicit seeded random streams, so any session
//! is bit-for-bit reproducible from its `SessionConfig`.

pub mod bits;
pub mod channel;
pub mod eve;
pub mod otp;
pub mod postproc;
pub mod protocol;
pub mod quantum;
pub mod report;
pub mod rngs;
pub mod session;
pub mod transport;
pub mod wire;
