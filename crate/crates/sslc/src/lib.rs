//! Networked pieces of the stateless superlight client: wire formats, simulated full nodes and
//! oracle, transports, the client protocol, and the evaluation tooling built on them.

pub mod alloc;
pub mod bench;
pub mod client;
pub mod costmodel;
pub mod fullnode;
pub mod matrix;
pub mod oracle;
pub mod service;
pub mod setup;
pub mod transport;
pub mod wire;

pub use client::{run_protocol, BandwidthLedger, ClientConfig, ClientError, ProtocolOutcome};
pub use fullnode::{FullNode, NodeBehavior};
pub use oracle::{Oracle, OracleBehavior, SharedBackend};
pub use service::{Endpoint, Service, ServiceError};
pub use setup::{setup_backend, BackendChoice};
pub use transport::{Http, InProcess, ServerHandle, Transport, TransportError};
