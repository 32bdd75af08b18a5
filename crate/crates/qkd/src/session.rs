//! Session drivers: both parties in one process (paired FIFO transports,
//! one thread each) or one party per process over TCP.

use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::thread;

use crate::protocol::{run_receiver, run_sender, SessionConfig, SessionError, SessionOutcome};
use crate::transport::{InProcTransport, TcpTransport};

/// Runs a full session with both parties in-process. Returns
/// (sender, receiver) outcomes.
pub fn run_in_process(
    cfg: &SessionConfig,
) -> Result<(SessionOutcome, SessionOutcome), SessionError> {
    let (mut sender_end, mut receiver_end) = InProcTransport::pair();
    let sender_cfg = cfg.clone();
    let sender_thread = thread::spawn(move || run_sender(&sender_cfg, &mut sender_end));
    let receiver = {
        let result = run_receiver(cfg, &mut receiver_end);
        // drop the endpoint before joining so a failed receiver unblocks
        // a sender stuck in recv
        drop(receiver_end);
        result
    };
    let sender = sender_thread
        .join()
        .map_err(|_| SessionError::ProtocolViolation("sender thread panicked"))?;
    Ok((sender?, receiver?))
}

/// Sender over TCP: connects to the listening receiver.
pub fn connect_sender(
    cfg: &SessionConfig,
    addr: impl ToSocketAddrs,
) -> Result<SessionOutcome, SessionError> {
    let stream = TcpStream::connect(addr).map_err(io_err)?;
    let mut transport = TcpTransport::new(stream).map_err(io_err)?;
    run_sender(cfg, &mut transport)
}

/// Receiver over TCP: accepts exactly one session on `addr`.
pub fn serve_receiver(
    cfg: &SessionConfig,
    addr: impl ToSocketAddrs,
) -> Result<SessionOutcome, SessionError> {
    let listener = TcpListener::bind(addr).map_err(io_err)?;
    let (stream, _) = listener.accept().map_err(io_err)?;
    let mut transport = TcpTransport::new(stream).map_err(io_err)?;
    run_receiver(cfg, &mut transport)
}

fn io_err(e: std::io::Error) -> SessionError {
    SessionError::Transport(e.into())
}
