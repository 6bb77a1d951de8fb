//! Feedback-driven erasure coding for short-lived sensor symbols.
//!
//! A source emits one symbol per step and packs up to `b` entries per packet:
//! the fresh symbol plus retransmissions, either uncoded or XOR combinations,
//! chosen by a [`PolicyKind`] from the most recent receiver feedback. Symbols
//! expire `delta` steps after generation. An optional relay overhears the
//! source and forwards buffered entries. [`sim::run`] drives the whole system
//! over lossy channels and reports the delivery failure rate.

pub mod airtime;
pub mod channel;
pub mod degree;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod policies;
pub mod receiver;
pub mod relay;
pub mod rng;
pub mod sim;
pub mod symbol;

pub use channel::ChannelConfig;
pub use error::{Error, Result};
pub use experiment::{preset, run_experiment, ExperimentSpec, Scheme};
pub use policies::{PolicyKind, SenderParams, SenderState};
pub use receiver::ReceiverState;
pub use relay::{RelayPolicy, RelayState};
pub use sim::{run, run_with, RunOptions, SimConfig, SimResult};
pub use symbol::{FeedbackFormat, FeedbackMsg, Packet, Payload, PayloadEntry, Seq, SymbolRecord};
