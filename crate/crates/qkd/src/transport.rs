//! Transports for the public discussion channel: an in-process FIFO pair
//! and a blocking TCP connection, both speaking the framed wire format.
//!
//! The channel is a reliable FIFO, authenticated by fiat: delivery is in
//! order, lossless and tamper-free, and every message is appended to an
//! eavesdropper-visible transcript. Pulse batches travel over the same
//! transport but are quantum-channel traffic and stay out of the
//! transcript; the eavesdropper taps them inside the channel module
//! instead.

use std::io::{BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::sync::mpsc::{channel, Receiver, Sender};

use thiserror::Error;

use crate::wire::{ClassicalMessage, CodecError};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("transport closed by peer")]
    Closed,
    #[error("framing error: {0}")]
    Framing(#[from] CodecError),
    #[error("transport i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything one endpoint saw, in order, per direction. This is exactly
/// the eavesdropper's view of the public channel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub sent: Vec<ClassicalMessage>,
    pub received: Vec<ClassicalMessage>,
}

impl Transcript {
    fn log_sent(&mut self, msg: &ClassicalMessage) {
        if !matches!(msg, ClassicalMessage::PulseBatch(_)) {
            self.sent.push(msg.clone());
        }
    }

    fn log_received(&mut self, msg: &ClassicalMessage) {
        if !matches!(msg, ClassicalMessage::PulseBatch(_)) {
            self.received.push(msg.clone());
        }
    }

    /// Total parity bits disclosed in reconciliation traffic, both
    /// directions. Used by the leak-accounting audit.
    pub fn disclosed_parity_bits(&self) -> usize {
        use crate::wire::ReconMessage::*;
        self.sent
            .iter()
            .chain(self.received.iter())
            .filter_map(|m| match m {
                ClassicalMessage::Recon(BlockParities(bits)) => Some(bits.len()),
                ClassicalMessage::Recon(ParityResponse(bits)) => Some(bits.len()),
                ClassicalMessage::Recon(KeyCheck { .. }) => Some(1 + 32),
                _ => None,
            })
            .sum()
    }
}

pub trait Transport {
    fn send(&mut self, msg: &ClassicalMessage) -> Result<(), TransportError>;
    fn recv(&mut self) -> Result<ClassicalMessage, TransportError>;
    /// The endpoint's transcript so far.
    fn transcript(&self) -> &Transcript;
}

/// One endpoint of an in-process FIFO pair. Frames cross as encoded
/// bytes so the wire codec is exercised even without a socket.
pub struct InProcTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    transcript: Transcript,
}

impl InProcTransport {
    /// Builds a connected pair of endpoints.
    pub fn pair() -> (InProcTransport, InProcTransport) {
        let (tx_ab, rx_ab) = channel();
        let (tx_ba, rx_ba) = channel();
        (
            InProcTransport { tx: tx_ab, rx: rx_ba, transcript: Transcript::default() },
            InProcTransport { tx: tx_ba, rx: rx_ab, transcript: Transcript::default() },
        )
    }
}

impl Transport for InProcTransport {
    fn send(&mut self, msg: &ClassicalMessage) -> Result<(), TransportError> {
        self.transcript.log_sent(msg);
        self.tx
            .send(msg.encode_frame())
            .map_err(|_| TransportError::Closed)
    }

    fn recv(&mut self) -> Result<ClassicalMessage, TransportError> {
        let frame = self.rx.recv().map_err(|_| TransportError::Closed)?;
        let (msg, _) = ClassicalMessage::decode_frame(&frame)?;
        self.transcript.log_received(&msg);
        Ok(msg)
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}

/// One endpoint of a TCP session: one connection per session, blocking
/// send/recv, single reader and single writer.
pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    transcript: Transcript,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> std::io::Result<TcpTransport> {
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        let writer = BufWriter::new(stream);
        Ok(TcpTransport { reader, writer, transcript: Transcript::default() })
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, msg: &ClassicalMessage) -> Result<(), TransportError> {
        self.transcript.log_sent(msg);
        msg.write_frame(&mut self.writer)?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<ClassicalMessage, TransportError> {
        match ClassicalMessage::read_frame(&mut self.reader)? {
            Some(msg) => {
                self.transcript.log_received(&msg);
                Ok(msg)
            }
            None => Err(TransportError::Closed),
        }
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::Basis;
    use crate::wire::AbortReason;

    #[test]
    fn in_proc_fifo_order_and_roundtrip() {
        let (mut a, mut b) = InProcTransport::pair();
        let msgs = vec![
            ClassicalMessage::BasisReveal {
                bases: vec![Basis::Rectilinear, Basis::Diagonal, Basis::Rectilinear],
                received_mask: vec![true, true, true],
            },
            ClassicalMessage::SiftIndices(vec![0, 2]),
            ClassicalMessage::Abort(AbortReason::QberExceeded),
        ];
        for m in &msgs {
            a.send(m).unwrap();
        }
        for m in &msgs {
            assert_eq!(&b.recv().unwrap(), m);
        }
        assert_eq!(a.transcript().sent, msgs);
        assert_eq!(b.transcript().received, msgs);
    }

    #[test]
    fn closed_peer_is_an_error() {
        let (a, mut b) = InProcTransport::pair();
        drop(a);
        assert!(matches!(b.recv(), Err(TransportError::Closed)));
    }

    #[test]
    fn pulse_batches_stay_out_of_the_transcript() {
        let (mut a, mut b) = InProcTransport::pair();
        a.send(&ClassicalMessage::PulseBatch(vec![])).unwrap();
        b.recv().unwrap();
        assert!(a.transcript().sent.is_empty());
        assert!(b.transcript().received.is_empty());
    }
}
