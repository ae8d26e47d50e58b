use std::collections::HashMap;

use serde_json::Value;

use super::table::{self, Table};
use super::{platform_schema, CollectionSpec, Document, DocumentStore, Query, StoreResult};

/// Volatile store; state lives only as long as the value.
#[derive(Debug)]
pub struct MemoryStore {
    tables: HashMap<String, Table>,
}

impl MemoryStore {
    pub fn new(schema: Vec<CollectionSpec>) -> Self {
        Self {
            tables: table::tables(schema),
        }
    }

    /// A store with every platform collection declared.
    pub fn platform() -> Self {
        Self::new(platform_schema())
    }

    fn write(&self, collection: &str, key: &str, expected: Option<u64>, body: Value) -> StoreResult<u64> {
        let t = table::lookup(&self.tables, collection)?;
        let mut docs = t.docs.write();
        let version = t.next_version(&docs, key, expected)?;
        Table::install(&mut docs, collection, key, body, version);
        Ok(version)
    }
}

impl DocumentStore for MemoryStore {
    fn put(&self, collection: &str, key: &str, body: Value) -> StoreResult<u64> {
        self.write(collection, key, None, body)
    }

    fn get(&self, collection: &str, key: &str) -> StoreResult<Option<Document>> {
        Ok(table::lookup(&self.tables, collection)?.get(key))
    }

    fn query(&self, collection: &str, query: &Query) -> StoreResult<Vec<Document>> {
        table::lookup(&self.tables, collection)?.query(query)
    }

    fn compare_and_put(&self, collection: &str, key: &str, expected: u64, body: Value) -> StoreResult<u64> {
        self.write(collection, key, Some(expected), body)
    }
}
