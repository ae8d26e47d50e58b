//! HTTP and WebSocket gateway over the Nora modules, plus the simulation
//! harness behind `noractl simulate`.

pub mod auth;
pub mod error;
pub mod http;
pub mod platform;
pub mod push;
pub mod simulate;
pub mod speech;

pub use error::{GatewayError, GatewayResult};
pub use platform::Platform;
