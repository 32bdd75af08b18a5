//! Cross-module session invariants plus property tests for the wire
//! codec, exercised through full in-process sessions.

use proptest::prelude::*;

use qkd::channel::SourceModel;
use qkd::eve::{BasisPolicy, EveStrategy};
use qkd::otp::KeyLedger;
use qkd::protocol::{Protocol, SessionConfig, SessionStatus};
use qkd::session::run_in_process;
use qkd::wire::{AbortReason, ClassicalMessage, ReconMessage};

#[test]
fn sifting_is_symmetric_and_sample_is_excluded() {
    for protocol in [Protocol::Bb84, Protocol::B92, Protocol::E91] {
        let mut cfg = SessionConfig::new(protocol, 4_000, 31);
        cfg.noise = 0.03;
        let (sender, receiver) = run_in_process(&cfg).unwrap();
        assert_eq!(sender.sifted_len, receiver.sifted_len, "{protocol:?}");
        assert_eq!(sender.sampled, receiver.sampled, "{protocol:?}");
        // sample bits are sacrificed: what remains plus the sample equals
        // the sifted count on both sides
        assert_eq!(sender.reconciled_len + sender.sampled, sender.sifted_len);
        assert_eq!(receiver.reconciled_len + receiver.sampled, receiver.sifted_len);
    }
}

#[test]
fn completed_sessions_agree_on_the_final_key() {
    for seed in 0..20u64 {
        let mut cfg = SessionConfig::new(Protocol::Bb84, 4_000, seed);
        cfg.noise = 0.04;
        cfg.loss = 0.1;
        let (sender, receiver) = run_in_process(&cfg).unwrap();
        assert_eq!(sender.status, SessionStatus::Completed, "seed {seed}");
        assert_eq!(sender.final_key, receiver.final_key, "seed {seed}");
        assert!(!sender.final_key.is_empty(), "seed {seed}");
    }
}

#[test]
fn abort_tracks_the_configured_threshold() {
    // a 4% noise floor (2% QBER) straddles these two thresholds
    let mut cfg = SessionConfig::new(Protocol::Bb84, 6_000, 77);
    cfg.noise = 0.04;

    cfg.qber_abort_threshold = 0.005;
    let (_, strict) = run_in_process(&cfg).unwrap();
    assert_eq!(strict.status, SessionStatus::Aborted(AbortReason::QberExceeded));
    assert!(strict.final_key.is_empty());

    cfg.qber_abort_threshold = 0.11;
    let (_, lenient) = run_in_process(&cfg).unwrap();
    assert_eq!(lenient.status, SessionStatus::Completed);
    assert!(strict.qber > 0.005 && lenient.qber < 0.11);
}

#[test]
fn final_key_is_shorter_by_at_least_the_leak_and_margin() {
    let mut cfg = SessionConfig::new(Protocol::Bb84, 10_000, 13);
    cfg.noise = 0.02;
    cfg.eve = EveStrategy::InterceptResend { fraction: 0.1, policy: BasisPolicy::RandomBasis };
    let (_, receiver) = run_in_process(&cfg).unwrap();
    assert_eq!(receiver.status, SessionStatus::Completed);
    assert!(
        receiver.final_key.len()
            <= receiver
                .reconciled_len
                .saturating_sub(receiver.leaked_bits + receiver.eve_l_bound + 32),
        "final key too long for the accounted leak"
    );
}

#[test]
fn multi_photon_source_reduces_the_key_budget() {
    let single = SessionConfig::new(Protocol::Bb84, 10_000, 3);
    let mut multi = single.clone();
    multi.source = SourceModel::Poisson(0.8);
    let (_, r_single) = run_in_process(&single).unwrap();
    let (_, r_multi) = run_in_process(&multi).unwrap();
    assert_eq!(r_single.eve_l_bound, 0);
    assert!(r_multi.eve_l_bound > 0, "Poisson source must charge a multi-photon toll");
    assert!(
        (r_multi.final_key.len() as f64) / (r_multi.reconciled_len.max(1) as f64)
            < (r_single.final_key.len() as f64) / (r_single.reconciled_len.max(1) as f64)
    );
}

#[test]
fn distilled_keys_carry_one_time_pad_traffic() {
    let cfg = SessionConfig::new(Protocol::Bb84, 4_000, 55);
    let (sender, receiver) = run_in_process(&cfg).unwrap();
    let mut alice = KeyLedger::new(sender.final_key);
    let mut bob = KeyLedger::new(receiver.final_key);
    let msg = b"attack at dawn";
    let (offset, ct) = alice.encrypt(msg).unwrap();
    assert_ne!(ct.as_slice(), msg.as_slice());
    assert_eq!(bob.decrypt(offset, &ct).unwrap(), msg);
}

fn arb_message() -> impl Strategy<Value = ClassicalMessage> {
    prop_oneof![
        (0u32..1 << 20).prop_map(|n| ClassicalMessage::ProtocolHello {
            protocol: qkd::wire::ProtocolId::Bb84,
            n_pulses: n
        }),
        proptest::collection::vec(any::<u32>(), 0..200).prop_map(ClassicalMessage::SiftIndices),
        proptest::collection::vec(any::<bool>(), 0..400)
            .prop_map(|bits| ClassicalMessage::Recon(ReconMessage::BlockParities(bits))),
        proptest::collection::vec(any::<u32>(), 0..100).prop_map(|mut v| {
            v.truncate(v.len() / 2 * 2);
            ClassicalMessage::Recon(ReconMessage::ParityRequest(v))
        }),
        (any::<bool>(), any::<u32>())
            .prop_map(|(parity, crc)| ClassicalMessage::Recon(ReconMessage::KeyCheck { parity, crc })),
        proptest::collection::vec(any::<bool>(), 0..400)
            .prop_map(ClassicalMessage::SampleDisclosure),
        any::<u32>()
            .prop_flat_map(|sample_size| (0..=sample_size, Just(sample_size)))
            .prop_map(|(mismatches, sample_size)| ClassicalMessage::QberReport {
                mismatches,
                sample_size
            }),
        (0u32..1 << 16, 0u32..256, proptest::collection::vec(any::<bool>(), 0..300)).prop_map(
            |(out_len, security_param, seed_bits)| ClassicalMessage::PaParams {
                out_len,
                security_param,
                seed_bits
            }
        ),
        (any::<u32>(), proptest::collection::vec(any::<u8>(), 0..200))
            .prop_map(|(key_offset, bytes)| ClassicalMessage::Ciphertext { key_offset, bytes }),
    ]
}

proptest! {
    #[test]
    fn wire_roundtrip_holds_for_generated_messages(msg in arb_message()) {
        let frame = msg.encode_frame();
        let (decoded, consumed) = ClassicalMessage::decode_frame(&frame).unwrap();
        prop_assert_eq!(consumed, frame.len());
        prop_assert_eq!(decoded, msg);
    }

    #[test]
    fn decoder_never_panics_and_reencodes_consistently(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        if let Ok((msg, consumed)) = ClassicalMessage::decode_frame(&bytes) {
            let reencoded = msg.encode_frame();
            prop_assert_eq!(&bytes[..consumed], reencoded.as_slice());
        }
    }
}
