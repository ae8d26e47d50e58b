//! Core services of the Nora well-being coach: rule-based language
//! understanding, affect scoring, daily health screening, the daily
//! session state machine, user-to-user chat, and a versioned document
//! store underneath all of them.

pub mod chat;
pub mod clock;
pub mod config;
pub mod dialogue;
pub mod empathy;
pub mod error;
pub mod lang;
pub mod nlu;
pub mod profile;
pub mod screening;
pub mod store;
pub mod text;

pub use error::ErrorKind;
pub use lang::Language;
