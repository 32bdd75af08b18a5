//! Regenerates the fuzz corpus seeds in `fuzz/corpus/`: one valid encoded
//! frame per message variant, plus a few multi-frame streams.
//!
//! Run from the crate directory: `cargo run --example gen_fuzz_corpus`

use std::fs;
use std::path::Path;

use qkd::quantum::{Basis, Polarization};
use qkd::wire::{AbortReason, ClassicalMessage, ProtocolId, PulseRecord, ReconMessage};

fn sample_messages() -> Vec<(&'static str, ClassicalMessage)> {
    vec![
        (
            "protocol_hello",
            ClassicalMessage::ProtocolHello { protocol: ProtocolId::Bb84, n_pulses: 1_000 },
        ),
        (
            "basis_reveal",
            ClassicalMessage::BasisReveal {
                bases: vec![Basis::Rectilinear, Basis::Diagonal, Basis::Diagonal],
                received_mask: vec![true, false, true],
            },
        ),
        ("sift_indices", ClassicalMessage::SiftIndices(vec![0, 2, 5, 13, 144])),
        (
            "recon_block_parities",
            ClassicalMessage::Recon(ReconMessage::BlockParities(vec![true, false, true, true])),
        ),
        (
            "recon_parity_request",
            ClassicalMessage::Recon(ReconMessage::ParityRequest(vec![0, 8, 8, 8])),
        ),
        (
            "recon_parity_response",
            ClassicalMessage::Recon(ReconMessage::ParityResponse(vec![false, true])),
        ),
        (
            "recon_key_check",
            ClassicalMessage::Recon(ReconMessage::KeyCheck { parity: true, crc: 0xCBF4_3926 }),
        ),
        ("recon_key_check_result", ClassicalMessage::Recon(ReconMessage::KeyCheckResult { ok: true })),
        ("sample_request", ClassicalMessage::SampleRequest(vec![1, 3, 7])),
        ("sample_disclosure", ClassicalMessage::SampleDisclosure(vec![true, true, false, true])),
        ("qber_report", ClassicalMessage::QberReport { mismatches: 3, sample_size: 120 }),
        ("abort", ClassicalMessage::Abort(AbortReason::QberExceeded)),
        (
            "pa_params",
            ClassicalMessage::PaParams {
                out_len: 16,
                security_param: 32,
                seed_bits: (0..47).map(|i| i % 3 == 0).collect(),
            },
        ),
        (
            "ciphertext",
            ClassicalMessage::Ciphertext { key_offset: 64, bytes: b"attack at dawn".to_vec() },
        ),
        (
            "pulse_batch",
            ClassicalMessage::PulseBatch(vec![
                PulseRecord { seq: 0, photons: vec![Polarization::Deg0, Polarization::Deg45] },
                PulseRecord { seq: 1, photons: vec![] },
                PulseRecord { seq: 2, photons: vec![Polarization::Deg135] },
            ]),
        ),
    ]
}

fn main() -> std::io::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus");
    let single = root.join("decode_frame");
    let stream = root.join("read_frame_stream");
    fs::create_dir_all(&single)?;
    fs::create_dir_all(&stream)?;

    let messages = sample_messages();
    for (name, msg) in &messages {
        fs::write(single.join(name), msg.encode_frame())?;
    }

    // stream seeds: all frames back to back, and a short hello+abort pair
    let mut all = Vec::new();
    for (_, msg) in &messages {
        msg.write_frame(&mut all)?;
    }
    fs::write(stream.join("all_frames"), &all)?;

    let mut pair = Vec::new();
    ClassicalMessage::ProtocolHello { protocol: ProtocolId::E91, n_pulses: 10 }
        .write_frame(&mut pair)?;
    ClassicalMessage::Abort(AbortReason::User).write_frame(&mut pair)?;
    fs::write(stream.join("hello_abort"), &pair)?;

    println!("wrote {} single-frame seeds and 2 stream seeds", messages.len());
    Ok(())
}
