//! Versioned document store.
//!
//! Every document lives under a `(collection, key)` pair and carries a
//! version that starts at 1 and grows by one on every write. Writers that
//! need read-modify-write semantics use [`DocumentStore::compare_and_put`]
//! (or the [`modify`] helper built on it); an expected version of `0`
//! means "the key must not exist yet".
//!
//! Two implementations share the same contract: [`MemoryStore`] and the
//! append-only-log backed [`FileStore`].

pub mod conformance;
mod file;
mod memory;
mod query;
mod table;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use file::{FileStore, FileStoreOptions, SyncMode};
pub use memory::MemoryStore;
pub use query::{Order, Query};

use crate::error::ErrorKind;

/// A stored document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub collection: String,
    pub key: String,
    pub body: Value,
    pub version: u64,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown collection `{0}`")]
    UnknownCollection(String),
    #[error("version conflict on {collection}/{key}: expected {expected}, found {actual}")]
    Conflict {
        collection: String,
        key: String,
        expected: u64,
        actual: u64,
    },
    #[error("field `{field}` is not indexed in collection `{collection}`")]
    NotIndexed { collection: String, field: String },
    #[error("corrupt log {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl StoreError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            StoreError::Conflict { .. } => ErrorKind::Conflict,
            StoreError::UnknownCollection(_) | StoreError::NotIndexed { .. } => {
                ErrorKind::InvalidInput
            }
            StoreError::Corrupt { .. } | StoreError::Io(_) | StoreError::Serde(_) => {
                ErrorKind::Storage
            }
        }
    }
}

pub type StoreResult<T> = Result<T, StoreError>;

/// Declares a collection and the body fields that may be used in queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionSpec {
    pub name: String,
    pub indexed: Vec<String>,
}

impl CollectionSpec {
    pub fn new(name: impl Into<String>, indexed: &[&str]) -> Self {
        Self {
            name: name.into(),
            indexed: indexed.iter().map(|f| f.to_string()).collect(),
        }
    }
}

/// The collections used by the platform.
pub fn platform_schema() -> Vec<CollectionSpec> {
    vec![
        CollectionSpec::new(collections::USERS, &["alias"]),
        CollectionSpec::new(collections::ALIASES, &[]),
        CollectionSpec::new(collections::SESSIONS, &["user", "day"]),
        CollectionSpec::new(collections::SUMMARIES, &["user", "day"]),
        CollectionSpec::new(collections::HEALTH, &["user", "day"]),
        CollectionSpec::new(collections::CONTACTS, &[]),
        CollectionSpec::new(collections::MESSAGES, &["conversation", "id"]),
        CollectionSpec::new(collections::TOPICS, &[]),
        CollectionSpec::new(collections::REPORTS, &["reporter"]),
        CollectionSpec::new(collections::MEETINGS, &[]),
    ]
}

pub mod collections {
    pub const USERS: &str = "users";
    pub const ALIASES: &str = "aliases";
    pub const SESSIONS: &str = "sessions";
    pub const SUMMARIES: &str = "summaries";
    pub const HEALTH: &str = "health";
    pub const CONTACTS: &str = "contacts";
    pub const MESSAGES: &str = "messages";
    pub const TOPICS: &str = "topics";
    pub const REPORTS: &str = "reports";
    pub const MEETINGS: &str = "meetings";
}

/// Key-value store with per-key versioning.
///
/// Implementations guarantee per-key atomicity: a successful
/// `compare_and_put` observed version `expected` and nothing else was
/// written to that key in between.
pub trait DocumentStore: Send + Sync {
    /// Unconditional write. Returns the new version.
    fn put(&self, collection: &str, key: &str, body: Value) -> StoreResult<u64>;

    fn get(&self, collection: &str, key: &str) -> StoreResult<Option<Document>>;

    /// Documents whose indexed fields match every equality filter, ordered
    /// as requested (key order when no ordering is given).
    fn query(&self, collection: &str, query: &Query) -> StoreResult<Vec<Document>>;

    /// Conditional write. `expected == 0` requires the key to be absent.
    fn compare_and_put(
        &self,
        collection: &str,
        key: &str,
        expected: u64,
        body: Value,
    ) -> StoreResult<u64>;
}

/// Read-modify-write loop over `compare_and_put`.
///
/// `f` receives the current body (if any) and returns the replacement, or
/// an error that aborts the loop. Returns the written body and version.
pub fn modify<S, F, E>(store: &S, collection: &str, key: &str, mut f: F) -> Result<(Value, u64), E>
where
    S: DocumentStore + ?Sized,
    F: FnMut(Option<&Value>) -> Result<Value, E>,
    E: From<StoreError>,
{
    loop {
        let current = store.get(collection, key)?;
        let expected = current.as_ref().map_or(0, |d| d.version);
        let next = f(current.as_ref().map(|d| &d.body))?;
        match store.compare_and_put(collection, key, expected, next.clone()) {
            Ok(version) => return Ok((next, version)),
            Err(StoreError::Conflict { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
}

/// Typed helpers over the JSON document API.
pub trait DocumentStoreExt: DocumentStore {
    fn get_as<T: serde::de::DeserializeOwned>(
        &self,
        collection: &str,
        key: &str,
    ) -> StoreResult<Option<(T, u64)>> {
        match self.get(collection, key)? {
            Some(doc) => Ok(Some((serde_json::from_value(doc.body)?, doc.version))),
            None => Ok(None),
        }
    }

    fn put_as<T: Serialize>(&self, collection: &str, key: &str, value: &T) -> StoreResult<u64> {
        self.put(collection, key, serde_json::to_value(value)?)
    }

    fn query_as<T: serde::de::DeserializeOwned>(
        &self,
        collection: &str,
        query: &Query,
    ) -> StoreResult<Vec<T>> {
        self.query(collection, query)?
            .into_iter()
            .map(|d| serde_json::from_value(d.body).map_err(StoreError::from))
            .collect()
    }
}

impl<S: DocumentStore + ?Sized> DocumentStoreExt for S {}
