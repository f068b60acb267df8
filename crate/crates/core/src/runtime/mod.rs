//! Master–worker runtime: message types, wire codec, worker service, the
//! master's fan-out/reduce, and the one-step protocol.

pub mod codec;
mod master;
mod messages;
mod protocol;
mod transport;
mod worker;

pub use master::{Master, RoundKind, RoundRecord, Transcript, WorkerFailure};
pub use messages::{error_code, Message, WorkerRequest, WorkerResponse};
pub use protocol::{run_one_step_protocol, OneStepOutcome};
pub use transport::{InProcess, Tcp, Transport, DEFAULT_TIMEOUT};
pub use worker::{serve, SpawnedWorker, Worker};
