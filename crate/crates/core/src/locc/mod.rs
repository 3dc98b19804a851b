//! Two-party orchestration of the protocol: Alice sends one classical bit
//! per round to Bob over an in-process or TCP transport, and every session
//! leaves a line-oriented transcript.

pub mod session;
pub mod transport;
pub mod wire;

pub use session::{
    run_alice, run_bob, run_session, run_session_truncated, AliceDevice, BobDevice, Referee, RoundEntry,
    SessionConfig, SessionTranscript, Transport, TRANSCRIPT_HEADER,
};
pub use transport::{in_process_pair, tcp_transport, Channel, InProcessChannel, Role, TcpChannel, TcpServer, DEFAULT_TIMEOUT};
pub use wire::{decode_message, encode_message, MessageBody, Party, RoundMessage, SessionEnd};
