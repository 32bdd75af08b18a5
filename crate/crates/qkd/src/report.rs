//! Machine-readable run reports. One `RunReport` per session, emitted as
//! JSON (see `schemas/run_report.schema.json`). With a fixed seed every
//! field except `wall_time_ms` is reproducible byte-for-byte.

use serde::{Deserialize, Serialize};

use crate::bits::fingerprint;
use crate::protocol::{SessionConfig, SessionOutcome, SessionStatus};
use crate::wire::AbortReason;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: SessionConfig,
    pub seed: u64,
    pub status: String,
    pub abort_reason: Option<String>,
    pub pulses_sent: u32,
    pub pulses_received: u32,
    pub sifted: usize,
    pub sampled: usize,
    pub reconciled: usize,
    pub final_len: usize,
    pub qber: f64,
    pub sift_ratio: f64,
    pub leaked_bits: usize,
    pub eve_l_bound: usize,
    /// Ground truth from the simulated eavesdropper, when this process
    /// hosted the channel.
    pub eve_bits_known: Option<usize>,
    /// FNV-1a over the packed final key; lets two processes compare keys
    /// without publishing them. Not a cryptographic commitment.
    pub final_key_fingerprint: String,
    pub wall_time_ms: f64,
}

fn status_strings(status: SessionStatus) -> (String, Option<String>) {
    match status {
        SessionStatus::Completed => ("completed".into(), None),
        SessionStatus::Aborted(reason) => (
            "aborted".into(),
            Some(
                match reason {
                    AbortReason::QberExceeded => "qber_exceeded",
                    AbortReason::PeerError => "peer_error",
                    AbortReason::User => "user",
                }
                .into(),
            ),
        ),
    }
}

impl RunReport {
    /// Report for one party's outcome (two-process mode).
    pub fn from_outcome(cfg: &SessionConfig, outcome: &SessionOutcome, wall_time_ms: f64) -> RunReport {
        let (status, abort_reason) = status_strings(outcome.status);
        RunReport {
            config: cfg.clone(),
            seed: cfg.seed,
            status,
            abort_reason,
            pulses_sent: outcome.pulses_sent,
            pulses_received: outcome.pulses_received,
            sifted: outcome.sifted_len,
            sampled: outcome.sampled,
            reconciled: outcome.reconciled_len,
            final_len: outcome.final_key.len(),
            qber: outcome.qber,
            sift_ratio: outcome.sift_ratio(),
            leaked_bits: outcome.leaked_bits,
            eve_l_bound: outcome.eve_l_bound,
            eve_bits_known: outcome
                .eve_knowledge
                .as_ref()
                .map(|k| k.bits_known_of_sifted_key),
            final_key_fingerprint: format!("{:016x}", fingerprint(&outcome.final_key)),
            wall_time_ms,
        }
    }

    /// Report for an in-process session: receiver-side statistics plus
    /// the sender-side eavesdropper ground truth.
    pub fn from_session(
        cfg: &SessionConfig,
        sender: &SessionOutcome,
        receiver: &SessionOutcome,
        wall_time_ms: f64,
    ) -> RunReport {
        let mut report = Self::from_outcome(cfg, receiver, wall_time_ms);
        report.eve_bits_known = sender
            .eve_knowledge
            .as_ref()
            .map(|k| k.bits_known_of_sifted_key);
        report
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub const CSV_HEADER: &'static str = "seed,status,pulses_sent,pulses_received,sifted,sampled,reconciled,final_len,qber,sift_ratio,leaked_bits,eve_l_bound,final_key_fingerprint";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{},{},{}",
            self.seed,
            self.status,
            self.pulses_sent,
            self.pulses_received,
            self.sifted,
            self.sampled,
            self.reconciled,
            self.final_len,
            self.qber,
            self.sift_ratio,
            self.leaked_bits,
            self.eve_l_bound,
            self.final_key_fingerprint,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Protocol;
    use crate::session::run_in_process;

    #[test]
    fn counts_weakly_decrease_along_the_pipeline() {
        let cfg = SessionConfig::new(Protocol::Bb84, 2_000, 5);
        let (sender, receiver) = run_in_process(&cfg).unwrap();
        let r = RunReport::from_session(&cfg, &sender, &receiver, 0.0);
        assert!(r.pulses_sent >= r.pulses_received);
        assert!(r.pulses_received as usize >= r.sifted);
        assert!(r.sifted >= r.sampled + r.reconciled);
        assert!(r.reconciled >= r.final_len);
        assert_eq!(r.status, "completed");
    }

    #[test]
    fn report_roundtrips_through_json() {
        let cfg = SessionConfig::new(Protocol::B92, 1_000, 9);
        let (sender, receiver) = run_in_process(&cfg).unwrap();
        let r = RunReport::from_session(&cfg, &sender, &receiver, 1.5);
        let parsed: RunReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(parsed.final_key_fingerprint, r.final_key_fingerprint);
        assert_eq!(parsed.config, cfg);
    }
}
