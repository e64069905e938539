//! Live stylization over a websocket: edits in, position frames out.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{GlobalParam, ProtocolMessage};
pub use session::{Service, DEFAULT_BUDGET};
