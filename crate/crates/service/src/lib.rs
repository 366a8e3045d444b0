//! Real-time WebSocket bridge for interactive drives: one simulation per
//! connection, stepped at wall-clock rate from the client's pedal input.
//!
//! See `PROTOCOL.md` in this crate for the message schema.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, ServerMessage, SCHEMA_VERSION};
pub use server::{router, serve, spawn};
pub use session::{Phase, ServiceConfig, Session, TickOutput};
